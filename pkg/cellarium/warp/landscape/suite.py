"""
The full set of landscape and loss properties, run as one self-contained report.
"""

import typing as t

import numpy as np

from cellarium.warp import constants, models
from cellarium.warp.geometry import ProxyPair
from cellarium.warp.gradcheck import finite_difference_check, is_near_kink
from cellarium.warp.landscape.grid import GridSpec, LineProfile, evaluate_along_line
from cellarium.warp.landscape.verification import verify_lemma, verify_prop
from cellarium.warp.logging import logger, progress
from cellarium.warp.loss import LabeledBatch, LossConfig, ProxySet
from cellarium.warp.seeding import stream_rng
from cellarium.warp.warping import WarpPair, WarpSpec, random_warp

GRADIENT_CASES = 200
GRADIENT_TOLERANCE = 1e-5
LEMMA_PAIRS = 20
LEMMA_EXTENT = 8.0
PROP_RANDOM_CASES = 50
CONVERSE_MIN_CELLS = 5.0
TAXONOMY_REACH = 10.0
TAXONOMY_POINTS = 10_001

Result = models.PropertySuiteReport.PropertyResult


def _verdict(passed: bool) -> constants.Verdict:
    return constants.Verdict.PASS if passed else constants.Verdict.FAIL


def _non_monotone_warp(t_values: np.ndarray) -> np.ndarray:
    return (t_values - 2.0) ** 2


def check_gradients(rng: np.random.Generator, cases: int = GRADIENT_CASES) -> Result:
    """Analytic loss gradients against central differences on random configurations."""
    variants = list(constants.WarpVariant)
    worst, checked, skipped = 0.0, 0, 0
    for index in range(cases):
        num_classes, dim, num_samples = int(rng.integers(2, 7)), int(rng.integers(2, 9)), int(rng.integers(1, 7))
        variant = variants[index % len(variants)]
        cfg = LossConfig(
            warp=WarpPair(f1=random_warp(rng, variant), f2=random_warp(rng, variant)),
            temperature=float(rng.choice([0.1, 1.0, 9.0])),
        )
        proxies = ProxySet(proxies=rng.normal(size=(num_classes, dim)))
        batch = LabeledBatch(
            embeddings=rng.normal(size=(num_samples, dim)), labels=rng.integers(0, num_classes, size=num_samples)
        )
        if is_near_kink(batch, proxies, cfg):
            skipped += 1
            continue
        worst = max(worst, finite_difference_check(batch, proxies, cfg).max_error)
        checked += 1
    return Result(
        name="gradient_check",
        verdict=_verdict(worst < GRADIENT_TOLERANCE),
        details={"max_relative_error": worst, "checked": checked, "skipped": skipped},
    )


def _random_planar_pair(rng: np.random.Generator) -> ProxyPair:
    while True:
        p_c, p_cprime = rng.uniform(-3.0, 3.0, size=(2, 2))
        if np.linalg.norm(p_c - p_cprime) >= 1.0:
            return ProxyPair(p_c=p_c, p_cprime=p_cprime)


def check_lemma_forward(rng: np.random.Generator, resolution: int, seed: int) -> Result:
    """Monotone single warps keep every extremum on the proxy line, for random proxy pairs."""
    warps = [
        WarpSpec.identity(),
        WarpSpec.power(2.0),
        WarpSpec.power(0.5),
        WarpSpec.power(1.5),
        WarpSpec.piecewise_linear(alpha=2.0, k1=0.65, k2=1.5),
    ]
    extent = (-LEMMA_EXTENT, LEMMA_EXTENT)
    spec = GridSpec(x_range=extent, y_range=extent, resolution=resolution)
    pairs = [_random_planar_pair(rng) for _ in range(LEMMA_PAIRS)]
    failures = []
    for warp in warps:
        for index, pair in enumerate(pairs):
            report = verify_lemma(warp, pair, spec, seed=seed + index)
            if report.verdict != constants.Verdict.PASS or not report.warp_monotone:
                failures.append({"warp": report.warp, "pair": index, "off_line": len(report.off_line_extrema)})
    return Result(
        name="lemma_forward",
        verdict=_verdict(not failures),
        details={"warps": [str(w) for w in warps], "pairs": len(pairs), "failures": failures},
    )


def check_lemma_converse(resolution: int, seed: int) -> Result:
    """
    ``f(t) = (t - 2)^2`` is not monotone and must exhibit an extremum more than ``CONVERSE_MIN_CELLS`` cell diagonals
    away from the proxy line.
    """
    pair = ProxyPair(p_c=(0.0, 0.0), p_cprime=(4.0, 0.0))
    spec = GridSpec(x_range=(-6.0, 10.0), y_range=(-8.0, 8.0), resolution=resolution)
    report = verify_lemma(_non_monotone_warp, pair, spec, seed=seed)
    farthest = max((e.distance_to_line for e in report.off_line_extrema), default=0.0)
    witnessed = farthest > CONVERSE_MIN_CELLS * spec.cell_diagonal
    return Result(
        name="lemma_converse_witness",
        verdict=constants.Verdict.FAIL if witnessed else constants.Verdict.PASS,
        expected_failure=True,
        details={
            "warp_monotone": report.warp_monotone,
            "off_line_extrema": len(report.off_line_extrema),
            "farthest_distance": farthest,
            "cell_diagonal": spec.cell_diagonal,
        },
    )


def check_prop_fixed() -> Result:
    """The reference warp ``pwl(3, 0.65, 1.5)`` moves the minimum to ``t = 3``."""
    warp = WarpPair(f1=WarpSpec.piecewise_linear(alpha=3.0, k1=0.65, k2=1.5), f2=WarpSpec.identity())
    report = verify_prop(warp, ProxyPair(p_c=(0.0, 0.0), p_cprime=(4.0, 0.0)))
    return Result(name="prop_fixed", verdict=report.verdict, details=report.model_dump(mode="json"))


def check_prop_random(rng: np.random.Generator, cases: int = PROP_RANDOM_CASES) -> Result:
    """Random valid piecewise-linear warps move the minimum to their own ``alpha``."""
    failures = []
    worst_offset = 0.0
    for index in range(cases):
        alpha, k1, k2 = rng.uniform(0.5, 5.0), rng.uniform(0.1, 0.95), rng.uniform(1.05, 3.0)
        separation = rng.uniform(1.0, 6.0)
        warp = WarpPair(f1=WarpSpec.piecewise_linear(alpha=alpha, k1=k1, k2=k2), f2=WarpSpec.identity())
        report = verify_prop(warp, ProxyPair(p_c=(0.0, 0.0), p_cprime=(separation, 0.0)))
        worst_offset = max(worst_offset, abs(report.argmin_t - alpha) / report.step)
        if not report.passed:
            failures.append({"case": index, "warp": str(warp), "argmin_t": report.argmin_t})
    return Result(
        name="prop_random",
        verdict=_verdict(not failures),
        details={"cases": cases, "worst_offset_steps": worst_offset, "failures": failures},
    )


def _outbound_profile(expression: str) -> LineProfile:
    pair = ProxyPair(p_c=(0.0, 0.0), p_cprime=(4.0, 0.0))
    return evaluate_along_line(pair, LossConfig(warp=expression), (0.0, TAXONOMY_REACH), TAXONOMY_POINTS)


def check_taxonomy() -> Result:
    """
    Shapes of the outbound loss profile: the unwarped loss plateaus beyond ``p_c``, ``t^2`` keeps decreasing,
    ``sqrt(t)`` is minimal at ``p_c`` and the piecewise-linear warp moves the minimum to ``alpha``.
    """
    step = TAXONOMY_REACH / (TAXONOMY_POINTS - 1)
    vanilla = _outbound_profile("t - t")
    squared = _outbound_profile("t^2 - t^2")
    root = _outbound_profile("sqrt(t) - sqrt(t)")
    warped = _outbound_profile("pwl(3,0.65,1.5,1.05) - t")
    pair = ProxyPair(p_c=(0.0, 0.0), p_cprime=(4.0, 0.0))
    between = evaluate_along_line(pair, LossConfig(warp="t - t"), (-1.0, 0.0), 2).loss[0]

    shapes = {
        "identity_plateau": bool(np.ptp(vanilla.loss) < 1e-3 and between > vanilla.loss[0]),
        "squared_decreasing": bool(np.all(np.diff(squared.loss) < 0)),
        "sqrt_minimum_at_p_c": bool(root.argmin() <= step),
        "warp_minimum_at_alpha": bool(abs(warped.argmin() - 3.0) <= step),
    }
    return Result(name="landscape_taxonomy", verdict=_verdict(all(shapes.values())), details=shapes)


def check_half_warps() -> t.List[Result]:
    """
    ``0.5t - t`` pushes outward everywhere (no finite minimum); ``2t - t`` anchors the minimum at ``p_c``.
    """
    step = TAXONOMY_REACH / (TAXONOMY_POINTS - 1)
    diverging = _outbound_profile("0.5*t - t")
    anchored = _outbound_profile("2*t - t")
    return [
        Result(
            name="half_warp_divergence",
            verdict=_verdict(bool(np.all(np.diff(diverging.loss) < 0))),
            details={"argmin_t": diverging.argmin(), "reach": TAXONOMY_REACH},
        ),
        Result(
            name="half_warp_anchoring",
            verdict=_verdict(anchored.argmin() <= step),
            details={"argmin_t": anchored.argmin()},
        ),
    ]


def run_property_suite(seed: int = 0, resolution: int = 512) -> models.PropertySuiteReport:
    """
    Run every landscape and loss property.

    :param seed: Seed of all random cases.
    :param resolution: Grid resolution of the lemma checks.
    :return: Per-property verdicts; :attr:`PropertySuiteReport.passed` is the overall outcome, where witnesses count
        as passing when they fail.
    """
    rng = stream_rng(seed, constants.RandomStream.VERIFICATION)
    checks: t.List[t.Callable[[], t.Union[Result, t.List[Result]]]] = [
        lambda: check_gradients(rng),
        lambda: check_lemma_forward(rng, resolution, seed),
        lambda: check_lemma_converse(resolution, seed),
        check_prop_fixed,
        lambda: check_prop_random(rng),
        check_taxonomy,
        check_half_warps,
    ]
    results: t.List[Result] = []
    for check in progress(checks, desc="Properties"):
        outcome = check()
        results.extend(outcome if isinstance(outcome, list) else [outcome])

    for result in results:
        message = f"{result.name}: {result.verdict.value}{' (witness)' if result.expected_failure else ''}"
        if result.ok:
            logger.info(message)
        else:
            logger.warning(message)
    return models.PropertySuiteReport(seed=seed, resolution=resolution, properties=results)
