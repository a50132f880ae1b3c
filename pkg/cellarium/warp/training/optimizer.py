import typing as t
from dataclasses import dataclass, field

import numpy as np

from cellarium.warp import exceptions, settings

Params = t.Dict[str, np.ndarray]


@dataclass
class AdamState:
    """
    Step count and bias-uncorrected first / second moment estimates, one entry per parameter.
    """

    step: int = 0
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)

    @classmethod
    def zeros_like(cls, params: Params) -> "AdamState":
        return cls(
            step=0,
            m={name: np.zeros_like(value) for name, value in params.items()},
            v={name: np.zeros_like(value) for name, value in params.items()},
        )


def _check_finite(grads: Params) -> None:
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise exceptions.DivergenceError(f"Non-finite gradient for `{name}`")


def adam_step(
    params: Params,
    grads: Params,
    state: AdamState,
    lr: float,
    betas: t.Tuple[float, float] = settings.ADAM_BETAS,
    eps: float = settings.ADAM_EPSILON,
) -> t.Tuple[Params, AdamState]:
    """
    One bias-corrected Adam update.

    :param params: Current parameters.
    :param grads: Gradients keyed like ``params``.
    :param state: Moments before the step.
    :param lr: Learning rate.
    :param betas: Decay rates of the first and second moments.
    :param eps: Denominator guard.
    :return: New parameters and new state; the inputs are left untouched.
    :raises DivergenceError: If any gradient is non-finite.
    """
    if grads.keys() != params.keys():
        raise exceptions.DivergenceError(f"Gradients {sorted(grads)} do not match parameters {sorted(params)}")
    _check_finite(grads)

    beta1, beta2 = betas
    step = state.step + 1
    new_params, m, v = {}, {}, {}
    for name, value in params.items():
        m[name] = beta1 * state.m[name] + (1.0 - beta1) * grads[name]
        v[name] = beta2 * state.v[name] + (1.0 - beta2) * grads[name] ** 2
        m_hat = m[name] / (1.0 - beta1**step)
        v_hat = v[name] / (1.0 - beta2**step)
        new_params[name] = value - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(step=step, m=m, v=v)


class Adam:
    """
    Adam over one parameter dictionary. The learning rate can be changed between steps (the trainer scales it when
    the second phase starts).
    """

    def __init__(
        self,
        params: Params,
        lr: float,
        betas: t.Tuple[float, float] = settings.ADAM_BETAS,
        eps: float = settings.ADAM_EPSILON,
    ):
        self.lr = lr
        self.betas = tuple(betas)
        self.eps = eps
        self.state = AdamState.zeros_like(params)

    def step(self, params: Params, grads: Params) -> Params:
        updated, self.state = adam_step(params, grads, self.state, self.lr, self.betas, self.eps)
        return updated

    def state_dict(self) -> t.Dict[str, t.Any]:
        return {
            "step": self.state.step,
            "lr": self.lr,
            "betas": list(self.betas),
            "eps": self.eps,
            "m": {name: value.copy() for name, value in self.state.m.items()},
            "v": {name: value.copy() for name, value in self.state.v.items()},
        }

    def load_state_dict(self, state_dict: t.Dict[str, t.Any]) -> None:
        self.lr = float(state_dict["lr"])
        self.betas = tuple(float(b) for b in state_dict["betas"])
        self.eps = float(state_dict["eps"])
        self.state = AdamState(
            step=int(state_dict["step"]),
            m={name: np.asarray(value, dtype=np.float64) for name, value in state_dict["m"].items()},
            v={name: np.asarray(value, dtype=np.float64) for name, value in state_dict["v"].items()},
        )
