"""
The warp-function family applied to distances before the softmax exponent, and the small expression language used to
name warp pairs in configuration files and result tables (``"pwl(3,0.65,1.5) - t"``, ``"t^2 - t^2"``, ...).
"""

import math
import re
import typing as t

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from cellarium.warp import constants, exceptions, settings

Distances = t.Union[float, np.ndarray]


class WarpSpec(BaseModel):
    """
    A member of the warp-function family ``f: [0, inf) -> [0, inf)``.

    Only the parameters of the selected variant are set. Build instances with the ``identity``, ``power``, ``scale``
    and ``piecewise_linear`` constructors, which report invalid parameters as
    :class:`~cellarium.warp.exceptions.WarpSpecError`.
    """

    model_config = ConfigDict(frozen=True)

    variant: constants.WarpVariant = Field(description="Family member", examples=["piecewise_linear"])
    exponent: t.Optional[float] = Field(default=None, description="Exponent p of ``t^p``", examples=[2.0])
    factor: t.Optional[float] = Field(default=None, description="Factor c of ``c*t``", examples=[0.5])
    alpha: t.Optional[float] = Field(
        default=None, description="Point of attraction where the slope switches from k1 to k2", examples=[3.0]
    )
    k1: t.Optional[float] = Field(default=None, description="Slope below alpha, in (0, 1)", examples=[0.65])
    k2: t.Optional[float] = Field(default=None, description="Slope above alpha, greater than 1", examples=[1.5])
    delta: t.Optional[float] = Field(
        default=None, description="Additive offset cancelling the k1 handicap", examples=[1.05]
    )

    @model_validator(mode="after")
    def _check_parameters(self) -> "WarpSpec":
        required = {
            constants.WarpVariant.IDENTITY: (),
            constants.WarpVariant.POWER: ("exponent",),
            constants.WarpVariant.SCALE: ("factor",),
            constants.WarpVariant.PIECEWISE_LINEAR: ("alpha", "k1", "k2", "delta"),
        }[self.variant]
        for name in ("exponent", "factor", "alpha", "k1", "k2", "delta"):
            value = getattr(self, name)
            if name in required:
                if value is None:
                    raise ValueError(f"`{name}` is required for the {self.variant.value} warp")
                if not math.isfinite(value):
                    raise ValueError(f"`{name}` must be finite, got {value}")
            elif value is not None:
                raise ValueError(f"`{name}` is not a parameter of the {self.variant.value} warp")

        if self.variant == constants.WarpVariant.POWER and not self.exponent > 0:
            raise ValueError(f"Power exponent must be positive, got {self.exponent}")
        if self.variant == constants.WarpVariant.SCALE and not self.factor > 0:
            raise ValueError(f"Scale factor must be positive, got {self.factor}")
        if self.variant == constants.WarpVariant.PIECEWISE_LINEAR:
            if not self.alpha > 0:
                raise ValueError(f"alpha must be positive, got {self.alpha}")
            if not 0 < self.k1 < 1 < self.k2:
                raise ValueError(f"Piecewise-linear slopes need 0 < k1 < 1 < k2, got k1={self.k1}, k2={self.k2}")
            if not self.delta >= 0:
                raise ValueError(f"delta must be non-negative, got {self.delta}")
        return self

    @classmethod
    def _build(cls, **fields) -> "WarpSpec":
        try:
            return cls(**fields)
        except ValidationError as e:
            raise exceptions.WarpSpecError(_first_validation_message(e)) from e

    @classmethod
    def identity(cls) -> "WarpSpec":
        return cls._build(variant=constants.WarpVariant.IDENTITY)

    @classmethod
    def power(cls, exponent: float) -> "WarpSpec":
        return cls._build(variant=constants.WarpVariant.POWER, exponent=exponent)

    @classmethod
    def scale(cls, factor: float) -> "WarpSpec":
        return cls._build(variant=constants.WarpVariant.SCALE, factor=factor)

    @classmethod
    def piecewise_linear(
        cls, alpha: float, k1: float, k2: float, delta: t.Optional[float] = None, margin_k: float = 1.0
    ) -> "WarpSpec":
        """
        Slope ``k1`` up to ``alpha`` and ``k2`` beyond it, offset by ``delta``.

        :param alpha: Point of attraction.
        :param k1: Slope below alpha.
        :param k2: Slope above alpha.
        :param delta: Offset. When omitted it is filled with :func:`default_delta` using ``margin_k``.
        :param margin_k: Margin multiplier for the default offset, ignored when ``delta`` is given.
        """
        if delta is None:
            delta = default_delta(alpha, k1, margin_k)
        return cls._build(variant=constants.WarpVariant.PIECEWISE_LINEAR, alpha=alpha, k1=k1, k2=k2, delta=delta)

    def __str__(self) -> str:
        return format_warp(self)


class WarpPair(BaseModel):
    """
    Warps applied to the ground-truth distance (``f1``) and to every negative-class distance (``f2``).
    """

    model_config = ConfigDict(frozen=True)

    f1: WarpSpec = Field(description="Warp of the distance to the ground-truth proxy")
    f2: WarpSpec = Field(description="Warp of the distances to the other proxies")

    def __str__(self) -> str:
        return f"{format_warp(self.f1)} - {format_warp(self.f2)}"


def _first_validation_message(error: ValidationError) -> str:
    details = error.errors()[0]
    return str(details["msg"]).replace("Value error, ", "")


def _as_distances(t_values: Distances) -> np.ndarray:
    values = np.asarray(t_values, dtype=np.float64)
    if np.any(np.isnan(values)) or np.any(values < 0):
        raise exceptions.WarpSpecError("Warp functions are only defined for non-negative distances")
    return values


def _unwrap(values: np.ndarray) -> Distances:
    return float(values) if values.ndim == 0 else values


def warp_value(spec: WarpSpec, t_values: Distances) -> Distances:
    """
    Evaluate the warp at one distance or elementwise over an array of distances.

    :param spec: The warp.
    :param t_values: Non-negative distance(s).
    :return: A float for scalar input, an array of the same shape otherwise.
    """
    values = _as_distances(t_values)
    variant = spec.variant
    if variant == constants.WarpVariant.IDENTITY:
        result = values.copy()
    elif variant == constants.WarpVariant.POWER:
        result = np.power(values, spec.exponent)
    elif variant == constants.WarpVariant.SCALE:
        result = spec.factor * values
    else:
        lower = spec.k1 * values + spec.delta
        upper = spec.k1 * spec.alpha + spec.delta + spec.k2 * (values - spec.alpha)
        result = np.where(values <= spec.alpha, lower, upper)
    return _unwrap(np.asarray(result, dtype=np.float64))


def warp_deriv(spec: WarpSpec, t_values: Distances) -> Distances:
    """
    Exact derivative of the warp. The piecewise-linear kink takes the left derivative ``k1``; power warps clamp the
    distance at ``settings.POWER_DERIVATIVE_CLAMP`` so sub-linear exponents stay finite at zero.

    :param spec: The warp.
    :param t_values: Non-negative distance(s).
    :return: A float for scalar input, an array of the same shape otherwise.
    """
    values = _as_distances(t_values)
    variant = spec.variant
    if variant == constants.WarpVariant.IDENTITY:
        result = np.ones_like(values)
    elif variant == constants.WarpVariant.POWER:
        clamped = np.maximum(values, settings.POWER_DERIVATIVE_CLAMP)
        result = spec.exponent * np.power(clamped, spec.exponent - 1.0)
    elif variant == constants.WarpVariant.SCALE:
        result = np.full_like(values, spec.factor)
    else:
        result = np.where(values <= spec.alpha, spec.k1, spec.k2)
    return _unwrap(np.asarray(result, dtype=np.float64))


def default_delta(alpha: float, k1: float, margin_k: float = 1.0) -> float:
    """
    Offset that makes the piecewise-linear warp meet the raw distance at ``alpha`` (``f1(alpha) = alpha`` for
    ``margin_k = 1``). Larger ``margin_k`` turns the offset into a margin.

    :param alpha: Point of attraction, positive.
    :param k1: Slope below alpha, in (0, 1).
    :param margin_k: Margin multiplier, at least 1.
    :return: ``margin_k * (1 - k1) * alpha``
    """
    if not (math.isfinite(alpha) and alpha > 0):
        raise exceptions.WarpSpecError(f"alpha must be positive, got {alpha}")
    if not 0 < k1 < 1:
        raise exceptions.WarpSpecError(f"k1 must lie in (0, 1), got {k1}")
    if not (math.isfinite(margin_k) and margin_k >= 1):
        raise exceptions.WarpSpecError(f"margin_k must be at least 1, got {margin_k}")
    return margin_k * (1.0 - k1) * alpha


def is_monotone(
    f: t.Union[WarpSpec, t.Callable[[np.ndarray], np.ndarray]],
    t_max: float,
    n: int = settings.MONOTONICITY_PROBE_POINTS,
) -> bool:
    """
    Probe whether ``f`` is non-decreasing on ``[0, t_max]`` by sampling ``n`` equally spaced points.

    :param f: A warp, or any vectorised callable on distances (used for test functions that are not warps).
    :param t_max: Right end of the probed interval.
    :param n: Number of samples.
    :return: True if no sampled decrease exceeds ``settings.MONOTONICITY_TOLERANCE``.
    """
    samples = np.linspace(0.0, t_max, n)
    values = warp_value(f, samples) if isinstance(f, WarpSpec) else np.asarray(f(samples), dtype=np.float64)
    return bool(np.all(np.diff(values) >= -settings.MONOTONICITY_TOLERANCE))


def random_warp(
    rng: t.Union[np.random.Generator, np.random.RandomState], variant: constants.WarpVariant
) -> WarpSpec:
    """
    Draw a valid warp of the given family member: power exponents from {0.5, 1.5, 2}, scale factors in [0.5, 2],
    piecewise-linear ``alpha`` in [0.5, 3], ``k1`` in [0.3, 0.9] and ``k2`` in [1.1, 2] with the default offset.
    """
    variant = constants.WarpVariant(variant)
    if variant == constants.WarpVariant.IDENTITY:
        return WarpSpec.identity()
    if variant == constants.WarpVariant.POWER:
        return WarpSpec.power(float(rng.choice([0.5, 1.5, 2.0])))
    if variant == constants.WarpVariant.SCALE:
        return WarpSpec.scale(float(rng.uniform(0.5, 2.0)))
    return WarpSpec.piecewise_linear(
        alpha=float(rng.uniform(0.5, 3.0)), k1=float(rng.uniform(0.3, 0.9)), k2=float(rng.uniform(1.1, 2.0))
    )


def _format_number(value: float) -> str:
    text = repr(float(value))
    return text[:-2] if text.endswith(".0") else text


def format_warp(spec: WarpSpec) -> str:
    """
    Canonical expression text of a warp, readable back by :func:`parse_warp_pair`.
    """
    if spec.variant == constants.WarpVariant.IDENTITY:
        return "t"
    if spec.variant == constants.WarpVariant.POWER:
        return f"t^{_format_number(spec.exponent)}"
    if spec.variant == constants.WarpVariant.SCALE:
        return f"{_format_number(spec.factor)}*t"
    params = ",".join(_format_number(v) for v in (spec.alpha, spec.k1, spec.k2, spec.delta))
    return f"pwl({params})"


_TOKEN_PATTERN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]+)|(?P<symbol>[-*^/(),]))"
)


class _Token(t.NamedTuple):
    kind: str
    text: str
    position: int


class _WarpExpressionParser:
    """
    Recursive-descent parser of ``side '-' side`` where a side is one of ``t``, ``t^P``, ``t^P/Q``, ``C*t``, ``Ct``,
    ``sqrt(t)`` or ``pwl(ALPHA,K1,K2[,DELTA])``.
    """

    def __init__(self, expression: str):
        self.expression = expression
        self.tokens = self._tokenize(expression)
        self.index = 0

    def _error(self, position: int, reason: str) -> exceptions.WarpExpressionError:
        return exceptions.WarpExpressionError(expression=self.expression, position=position, reason=reason)

    def _tokenize(self, expression: str) -> t.List[_Token]:
        tokens = []
        position = 0
        while position < len(expression):
            if expression[position:].strip() == "":
                break
            match = _TOKEN_PATTERN.match(expression, position)
            if match is None:
                offset = len(expression[position:]) - len(expression[position:].lstrip())
                raise self._error(position + offset, f"Unexpected character {expression[position + offset]!r}")
            kind = match.lastgroup
            tokens.append(_Token(kind=kind, text=match.group(kind), position=match.start(kind)))
            position = match.end()
        tokens.append(_Token(kind="end", text="", position=len(expression)))
        return tokens

    @property
    def _current(self) -> _Token:
        return self.tokens[self.index]

    def _advance(self) -> _Token:
        token = self._current
        self.index += 1
        return token

    def _accept(self, text: str) -> bool:
        if self._current.kind != "end" and self._current.text == text:
            self.index += 1
            return True
        return False

    def _expect(self, text: str) -> _Token:
        if self._current.text != text or self._current.kind == "end":
            found = "end of expression" if self._current.kind == "end" else repr(self._current.text)
            raise self._error(self._current.position, f"Expected {text!r}, found {found}")
        return self._advance()

    def _number(self) -> float:
        if self._current.kind != "number":
            raise self._error(self._current.position, "Expected a number")
        return float(self._advance().text)

    def _variable(self) -> None:
        token = self._current
        if token.kind != "name" or token.text != "t":
            raise self._error(token.position, "Expected the distance variable 't'")
        self._advance()

    def _build(self, position: int, builder: t.Callable[..., WarpSpec], *args) -> WarpSpec:
        try:
            return builder(*args)
        except exceptions.WarpSpecError as e:
            raise self._error(position, str(e)) from e

    def parse(self) -> WarpPair:
        f1 = self._side()
        self._expect("-")
        f2 = self._side()
        if self._current.kind != "end":
            raise self._error(self._current.position, f"Unexpected trailing input {self._current.text!r}")
        return WarpPair(f1=f1, f2=f2)

    def _side(self) -> WarpSpec:
        token = self._current
        if token.kind == "number":
            factor = self._number()
            self._accept("*")
            self._variable()
            return self._build(token.position, WarpSpec.scale, factor)
        if token.kind == "name" and token.text == "t":
            self._advance()
            if not self._accept("^"):
                return WarpSpec.identity()
            exponent_position = self._current.position
            exponent = self._number()
            if self._accept("/"):
                denominator = self._number()
                if denominator == 0:
                    raise self._error(exponent_position, "Division by zero in exponent")
                exponent /= denominator
            return self._build(exponent_position, WarpSpec.power, exponent)
        if token.kind == "name" and token.text == "sqrt":
            self._advance()
            self._expect("(")
            self._variable()
            self._expect(")")
            return WarpSpec.power(0.5)
        if token.kind == "name" and token.text == "pwl":
            self._advance()
            self._expect("(")
            params = [self._number()]
            while self._accept(","):
                params.append(self._number())
            self._expect(")")
            if len(params) not in (3, 4):
                raise self._error(token.position, f"pwl takes 3 or 4 parameters, got {len(params)}")
            return self._build(token.position, WarpSpec.piecewise_linear, *params)
        if token.kind == "end":
            raise self._error(token.position, "Expected a warp, found end of expression")
        raise self._error(token.position, f"Unknown warp {token.text!r}")


def parse_warp_pair(expression: str) -> WarpPair:
    """
    Parse a warp-pair expression such as ``"t^2 - t^2"``, ``"0.5*t - t"`` or ``"pwl(3.0,0.65,1.5,1.05) - t"``.
    Whitespace is ignored. A ``pwl`` with three parameters gets the default offset.

    :param expression: The expression text.
    :return: The parsed pair.
    :raises WarpExpressionError: With the position of the first offending character.
    """
    return _WarpExpressionParser(expression).parse()


def coerce_warp_pair(value: t.Any) -> t.Any:
    """
    Before-validator for pydantic fields of type :class:`WarpPair` that accept expression strings. Parse errors are
    raised as ``ValueError`` so that the validation error names the field.
    """
    if not isinstance(value, str):
        return value
    try:
        return parse_warp_pair(value)
    except exceptions.WarpExpressionError as e:
        raise ValueError(str(e)) from e
