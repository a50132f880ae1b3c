"""
Executable checks of two landscape claims:

* with one monotone warp ``f`` applied to both distances, every extremum of the binary loss lies on the line through
  both proxies, and on any circle around ``p_cprime`` the loss is smallest at the intersection nearer to ``p_c``
  and largest at the farther one;
* a piecewise-linear ``f1`` against ``f2 = t`` moves the minimum along the outbound ray from ``p_c`` to ``alpha``.
"""

import typing as t

import numpy as np

from cellarium.warp import constants, exceptions, models, settings
from cellarium.warp.geometry import ProxyPair, line_through, point_line_distance
from cellarium.warp.landscape.grid import GridSpec, evaluate_points_grid, outbound_reach, sample_line
from cellarium.warp.logging import logger
from cellarium.warp.loss import LossConfig
from cellarium.warp.seeding import stream_rng
from cellarium.warp.warping import WarpPair, WarpSpec, is_monotone, warp_value

WarpFunction = t.Union[WarpSpec, t.Callable[[np.ndarray], np.ndarray]]


def _warp_callable(warp: WarpFunction) -> t.Callable[[np.ndarray], np.ndarray]:
    if isinstance(warp, WarpSpec):
        return lambda distances: warp_value(warp, distances)
    return lambda distances: np.asarray(warp(distances), dtype=np.float64)


def _single_warp_loss(warp: WarpFunction, pair: ProxyPair) -> t.Callable[[np.ndarray], np.ndarray]:
    f = _warp_callable(warp)

    def evaluate(points: np.ndarray) -> np.ndarray:
        d1 = np.linalg.norm(points - pair.p_c, axis=-1)
        d2 = np.linalg.norm(points - pair.p_cprime, axis=-1)
        return np.logaddexp(0.0, f(d1) - f(d2))

    return evaluate


def _describe_warp(warp: WarpFunction) -> str:
    if isinstance(warp, WarpSpec):
        return str(warp)
    return getattr(warp, "__name__", repr(warp))


def _disk_radii(pair: ProxyPair, seed: int) -> np.ndarray:
    # one radius per stratum of [0.25 d, 2 d] so that every scale of circle gets probed
    rng = stream_rng(seed, constants.RandomStream.VERIFICATION)
    edges = np.linspace(0.25, 2.0, settings.DISK_NUM_RADII + 1) * pair.separation
    return edges[:-1] + rng.uniform(size=settings.DISK_NUM_RADII) * np.diff(edges)


def _circular_offset(index: int, target: int, n: int) -> int:
    offset = abs(index - target) % n
    return min(offset, n - offset)


def verify_lemma(warp: WarpFunction, pair: ProxyPair, spec: GridSpec, seed: int = 0) -> models.LemmaReport:
    """
    Check that the single-warp landscape ``log(1 + exp(f(|e - p_c|) - f(|e - p_cprime|)))`` has its extrema on the
    proxy line.

    Two witnesses are collected: extrema of the dense grid farther than one cell diagonal from the
    line, and circles around ``p_cprime`` (``settings.DISK_NUM_RADII`` radii, ``settings.DISK_NUM_ANGLES`` angles)
    whose minimiser (maximiser) is more than ``settings.DISK_ANGLE_TOLERANCE`` samples away from the near (far)
    intersection with the line.

    :param warp: A warp, or any vectorised function of distances (non-monotone functions are accepted here).
    :param pair: Planar proxy pair.
    :param spec: Lattice of the grid check.
    :param seed: Seed of the circle radii.
    :return: The report; the verdict passes iff no off-line extremum was found.
    """
    if pair.dim != 2:
        raise exceptions.LandscapeError(f"Landscapes are evaluated in the plane, got {pair.dim}-D proxies")

    loss = _single_warp_loss(warp, pair)
    line = line_through(pair)
    monotone = is_monotone(warp, t_max=outbound_reach(pair, spec) + pair.separation)
    off_line: t.List[models.LemmaReport.OffLineExtremum] = []

    grid = evaluate_points_grid(loss, spec)
    for kind, indices in ((constants.ExtremumKind.MINIMUM, grid.minima), (constants.ExtremumKind.MAXIMUM, grid.maxima)):
        for index in indices:
            point = grid.coordinates(index)
            distance_to_line = point_line_distance(point, line)
            if distance_to_line > spec.cell_diagonal:
                off_line.append(
                    models.LemmaReport.OffLineExtremum(
                        point=point.tolist(),
                        distance_to_line=distance_to_line,
                        kind=kind,
                        source=constants.ExtremumSource.GRID,
                    )
                )

    # angle 0 is the intersection nearer to p_c, angle pi the farther one
    angles = 2.0 * np.pi * np.arange(settings.DISK_NUM_ANGLES) / settings.DISK_NUM_ANGLES
    normal = np.array([-line.direction[1], line.direction[0]])
    radii = _disk_radii(pair, seed)
    for r in radii:
        circle = pair.p_cprime + r * (np.outer(np.cos(angles), line.direction) + np.outer(np.sin(angles), normal))
        values = loss(circle)
        checks = (
            (constants.ExtremumKind.MINIMUM, int(np.argmin(values)), 0),
            (constants.ExtremumKind.MAXIMUM, int(np.argmax(values)), settings.DISK_NUM_ANGLES // 2),
        )
        for kind, found, expected in checks:
            if _circular_offset(found, expected, settings.DISK_NUM_ANGLES) > settings.DISK_ANGLE_TOLERANCE:
                off_line.append(
                    models.LemmaReport.OffLineExtremum(
                        point=circle[found].tolist(),
                        distance_to_line=point_line_distance(circle[found], line),
                        kind=kind,
                        source=constants.ExtremumSource.DISK,
                    )
                )

    verdict = constants.Verdict.FAIL if off_line else constants.Verdict.PASS
    logger.debug(f"Lemma check of {_describe_warp(warp)}: {verdict.value}, {len(off_line)} off-line extrema")
    return models.LemmaReport(
        warp=_describe_warp(warp),
        warp_monotone=monotone,
        cell_diagonal=spec.cell_diagonal,
        grid_extrema=len(grid.minima) + len(grid.maxima),
        disk_radii=radii.tolist(),
        off_line_extrema=off_line,
        verdict=verdict,
    )


def verify_prop(warp_pair: WarpPair, pair: ProxyPair, temperature: float = 1.0) -> models.PropReport:
    """
    Brute-force the minimiser of the loss along the outbound ray ``t in [0, alpha + 3 d]`` at step ``alpha / 1000``
    and compare it with ``alpha``.

    The check passes iff the minimiser is within ``settings.PROP_PASS_STEPS`` steps of ``alpha``, the loss slope is
    negative just below ``alpha`` and positive just above it, and the sampled derivative changes sign exactly once.

    :param warp_pair: ``f1`` piecewise-linear, ``f2`` the identity.
    :param pair: Proxy pair of any dimension.
    :param temperature: Loss temperature.
    :raises WarpSpecError: If the warps are not of the required form.
    """
    if warp_pair.f1.variant != constants.WarpVariant.PIECEWISE_LINEAR:
        raise exceptions.WarpSpecError(f"f1 must be piecewise-linear, got {warp_pair.f1}")
    if warp_pair.f2.variant != constants.WarpVariant.IDENTITY:
        raise exceptions.WarpSpecError(f"f2 must be the identity, got {warp_pair.f2}")

    cfg = LossConfig(warp=warp_pair, temperature=temperature)
    alpha = warp_pair.f1.alpha
    step = alpha * settings.PROP_STEP_FRACTION
    span = alpha + settings.PROP_SPAN_SEPARATIONS * pair.separation
    profile = sample_line(pair, cfg, step * np.arange(int(np.floor(span / step)) + 1))
    argmin_t = profile.argmin()

    offset = min(settings.PROP_SLOPE_OFFSET, alpha / 2.0)
    probe = step * 1e-3
    probes = np.array([alpha - offset - probe, alpha - offset, alpha + offset, alpha + offset + probe])
    below, above = sample_line(pair, cfg, probes).loss.reshape(2, 2)
    slope_below = (below[1] - below[0]) / probe
    slope_above = (above[1] - above[0]) / probe

    signs = np.sign(np.diff(profile.loss))
    signs = signs[signs != 0]
    sign_changes = int(np.count_nonzero(signs[1:] != signs[:-1]))

    passed = (
        abs(argmin_t - alpha) <= settings.PROP_PASS_STEPS * step
        and slope_below < 0 < slope_above
        and sign_changes == 1
    )
    return models.PropReport(
        argmin_t=argmin_t,
        expected_alpha=alpha,
        step=step,
        slope_below=slope_below,
        slope_above=slope_above,
        sign_changes=sign_changes,
        verdict=constants.Verdict.PASS if passed else constants.Verdict.FAIL,
    )
