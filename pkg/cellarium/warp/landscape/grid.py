"""
Dense evaluation of the binary loss over a rectangle of the plane and along the proxy line.
"""

import os
import typing as t
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import ndimage

from cellarium.warp import constants, exceptions, models, settings
from cellarium.warp.geometry import ProxyPair, line_through, point_line_distance
from cellarium.warp.loss import LabeledBatch, LossConfig, ProxySet, per_sample_losses

GridIndex = t.Tuple[int, int]
PointLoss = t.Callable[[np.ndarray], np.ndarray]

GRID_COLUMNS = ("x", "y", "loss")

_NEIGHBOUR_OFFSETS = [(di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)]
_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class GridSpec(BaseModel):
    """
    A square lattice of ``resolution x resolution`` points spanning ``x_range x y_range`` (both ends included).
    """

    model_config = ConfigDict(frozen=True)

    x_range: t.Tuple[float, float] = Field(description="Closed x interval", examples=[(-6.0, 10.0)])
    y_range: t.Tuple[float, float] = Field(description="Closed y interval", examples=[(-8.0, 8.0)])
    resolution: int = Field(
        ge=settings.GRID_MIN_RESOLUTION,
        le=settings.GRID_MAX_RESOLUTION,
        description="Points per axis",
        examples=[65],
    )

    @model_validator(mode="after")
    def _check_ranges(self) -> "GridSpec":
        for name in ("x_range", "y_range"):
            low, high = getattr(self, name)
            if not (np.isfinite(low) and np.isfinite(high) and low < high):
                raise ValueError(f"`{name}` must be a finite interval with low < high, got {(low, high)}")
        return self

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_range[0], self.x_range[1], self.resolution)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(self.y_range[0], self.y_range[1], self.resolution)

    @property
    def cell_diagonal(self) -> float:
        dx = (self.x_range[1] - self.x_range[0]) / (self.resolution - 1)
        dy = (self.y_range[1] - self.y_range[0]) / (self.resolution - 1)
        return float(np.hypot(dx, dy))

    def points(self) -> np.ndarray:
        """All lattice points in row-major order (y outer, x inner), shape ``(resolution**2, 2)``."""
        xx, yy = np.meshgrid(self.xs, self.ys)
        return np.column_stack([xx.ravel(), yy.ravel()])


@dataclass
class LandscapeGrid:
    """
    Loss values on a :class:`GridSpec` lattice; ``values[i, j]`` is the loss at ``(xs[j], ys[i])``. Extrema are
    ``(i, j)`` index pairs as found by :func:`find_extrema`.
    """

    spec: GridSpec
    values: np.ndarray
    minima: t.List[GridIndex] = field(default_factory=list)
    maxima: t.List[GridIndex] = field(default_factory=list)

    def coordinates(self, index: GridIndex) -> np.ndarray:
        i, j = index
        return np.array([self.spec.xs[j], self.spec.ys[i]])


@dataclass(frozen=True)
class LineProfile:
    """
    Loss sampled along the proxy line at signed distances ``t`` from ``p_c``.
    """

    t: np.ndarray
    loss: np.ndarray

    def argmin(self) -> float:
        return float(self.t[np.argmin(self.loss)])

    def pairs(self) -> t.List[t.Tuple[float, float]]:
        return list(zip(self.t.tolist(), self.loss.tolist()))


def _check_planar(pair: ProxyPair) -> None:
    if pair.dim != 2:
        raise exceptions.LandscapeError(f"Landscapes are evaluated in the plane, got {pair.dim}-D proxies")


def loss_on_points(pair: ProxyPair, cfg: LossConfig) -> PointLoss:
    """
    Binary loss of the pair as a vectorised function of points.
    """
    proxies = ProxySet.from_pair(pair)

    def evaluate(points: np.ndarray) -> np.ndarray:
        batch = LabeledBatch(embeddings=points, labels=np.zeros(points.shape[0], dtype=np.int64))
        return per_sample_losses(batch, proxies, cfg)

    return evaluate


def evaluate_points_grid(loss: PointLoss, spec: GridSpec) -> LandscapeGrid:
    """
    Evaluate an arbitrary point loss on the lattice, ``settings.GRID_CHUNK_ROWS`` rows at a time, and detect its
    extrema.
    """
    xs, ys = spec.xs, spec.ys
    values = np.empty((spec.resolution, spec.resolution), dtype=np.float64)
    for start in range(0, spec.resolution, settings.GRID_CHUNK_ROWS):
        rows = ys[start : start + settings.GRID_CHUNK_ROWS]
        xx, yy = np.meshgrid(xs, rows)
        chunk = loss(np.column_stack([xx.ravel(), yy.ravel()]))
        values[start : start + rows.shape[0]] = chunk.reshape(rows.shape[0], spec.resolution)

    if not np.all(np.isfinite(values)):
        raise exceptions.LandscapeError("The landscape contains non-finite values")

    minima, maxima = find_extrema(values)
    return LandscapeGrid(spec=spec, values=values, minima=minima, maxima=maxima)


def evaluate_grid(pair: ProxyPair, cfg: LossConfig, spec: GridSpec) -> LandscapeGrid:
    """
    Binary loss of a planar proxy pair at every lattice point.

    :param pair: 2-D proxy pair.
    :param cfg: Loss configuration.
    :param spec: Lattice.
    :return: Values and extrema.
    """
    _check_planar(pair)
    return evaluate_points_grid(loss_on_points(pair, cfg), spec)


def find_extrema(
    values: np.ndarray, tolerance: float = settings.PLATEAU_TOLERANCE
) -> t.Tuple[t.List[GridIndex], t.List[GridIndex]]:
    """
    Minima and maxima of a sampled landscape. Two values are equal when they differ by at most ``tolerance`` relative
    to the larger magnitude. An extremum is either

    - an interior cell strictly below (above) all 8 neighbours, or
    - a plateau: an 8-connected region of equal cells, holding at least one interior cell, whose every outside
      neighbour is strictly higher (lower). It is reported once, at its cell farthest from the lattice edge when it
      touches the edge (the window cuts it, so that is the only end the grid resolves), otherwise at its cell nearest
      its centroid.

    A constant matrix has no extrema.

    :param values: 2-D matrix.
    :param tolerance: Relative equality tolerance.
    :return: ``(minima, maxima)`` as ``(row, column)`` indices in row-major order.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] < 3 or values.shape[1] < 3:
        return [], []
    return _find_minima(values, tolerance), _find_minima(-values, tolerance)


def _find_minima(values: np.ndarray, tolerance: float) -> t.List[GridIndex]:
    rows, cols = values.shape
    # NaN padding compares false both ways: the lattice edge neither lowers nor equals a cell
    padded = np.pad(values, 1, constant_values=np.nan)
    has_lower = np.zeros(values.shape, dtype=bool)
    has_equal = np.zeros(values.shape, dtype=bool)
    with np.errstate(invalid="ignore"):
        for di, dj in _NEIGHBOUR_OFFSETS:
            neighbour = padded[1 + di : rows + 1 + di, 1 + dj : cols + 1 + dj]
            gap = tolerance * np.maximum(np.abs(values), np.abs(neighbour))
            has_lower |= neighbour < values - gap
            has_equal |= np.abs(values - neighbour) <= gap

    interior = np.zeros(values.shape, dtype=bool)
    interior[1:-1, 1:-1] = True
    found = [(int(i), int(j)) for i, j in np.argwhere(interior & ~has_lower & ~has_equal)]

    labels, count = ndimage.label(~has_lower & has_equal, structure=_EIGHT_CONNECTED)
    for label in range(1, count + 1):
        region = labels == label
        if not (region & interior).any():
            continue
        rim = ndimage.binary_dilation(region, structure=_EIGHT_CONNECTED) & ~region
        if not rim.any():
            continue
        level, outside = values[region].max(), values[rim]
        if np.all(outside > level + tolerance * np.maximum(np.abs(outside), abs(level))):
            found.append(_plateau_anchor(region))
    return sorted(found)


def _plateau_anchor(region: np.ndarray) -> GridIndex:
    cells = np.argwhere(region)
    rows, cols = region.shape
    edge_distance = np.minimum.reduce([cells[:, 0], cells[:, 1], rows - 1 - cells[:, 0], cols - 1 - cells[:, 1]])
    if edge_distance.min() == 0:
        pick = int(np.argmax(edge_distance))
    else:
        pick = int(np.argmin(np.linalg.norm(cells - cells.mean(axis=0), axis=1)))
    i, j = cells[pick]
    return int(i), int(j)


def evaluate_along_line(
    pair: ProxyPair, cfg: LossConfig, t_range: t.Tuple[float, float], n_points: int
) -> LineProfile:
    """
    Loss at ``p_c + t * direction`` for ``n_points`` equally spaced ``t`` in ``t_range``, where ``direction`` points
    away from ``p_cprime``. Works in any dimension.
    """
    if n_points < 2:
        raise exceptions.LandscapeError(f"Need at least two samples along the line, got {n_points}")
    t_values = np.linspace(t_range[0], t_range[1], n_points)
    return sample_line(pair, cfg, t_values)


def sample_line(pair: ProxyPair, cfg: LossConfig, t_values: np.ndarray) -> LineProfile:
    line = line_through(pair)
    losses = loss_on_points(pair, cfg)(line.point_at(t_values))
    return LineProfile(t=np.asarray(t_values, dtype=np.float64), loss=losses)


def outbound_reach(pair: ProxyPair, spec: GridSpec) -> float:
    """Largest distance from ``p_c`` to a corner of the lattice."""
    corners = np.array([[x, y] for x in spec.x_range for y in spec.y_range])
    return float(np.max(np.linalg.norm(corners - pair.p_c, axis=1)))


def summarize_extrema(grid: LandscapeGrid, pair: ProxyPair, cfg: LossConfig) -> models.ExtremaReport:
    """
    Locate the extrema of an evaluated landscape relative to the proxy line.

    :param grid: Evaluated landscape.
    :param pair: The proxy pair it was evaluated for.
    :param cfg: The loss configuration it was evaluated with.
    :return: Report with every extremum, the minimiser along the outbound ray and the on-line verdict.
    """
    line = line_through(pair)

    def describe(indices: t.List[GridIndex]) -> t.List[models.ExtremaReport.Extremum]:
        described = []
        for index in indices:
            x, y = grid.coordinates(index)
            described.append(
                models.ExtremaReport.Extremum(
                    x=float(x),
                    y=float(y),
                    loss=float(grid.values[index]),
                    distance_to_line=float(point_line_distance((x, y), line)),
                )
            )
        return described

    minima, maxima = describe(grid.minima), describe(grid.maxima)
    on_line = all(e.distance_to_line <= grid.spec.cell_diagonal for e in minima + maxima)
    profile = evaluate_along_line(pair, cfg, (0.0, outbound_reach(pair, grid.spec)), 4 * grid.spec.resolution)

    return models.ExtremaReport(
        warp=str(cfg.warp),
        temperature=cfg.temperature,
        p_c=pair.p_c.tolist(),
        p_cprime=pair.p_cprime.tolist(),
        resolution=grid.spec.resolution,
        cell_diagonal=grid.spec.cell_diagonal,
        minima=minima,
        maxima=maxima,
        outbound_argmin_t=profile.argmin(),
        verdict=constants.Verdict.PASS if on_line else constants.Verdict.FAIL,
    )


def export_grid(grid: LandscapeGrid, path: t.Union[str, os.PathLike]) -> None:
    """
    Write the landscape as CSV with header ``x,y,loss``, rows ordered y outer and x inner, floats with 17 significant
    digits so that :func:`import_grid` recovers the values exactly.

    :raises ArtifactIOError: If the file cannot be written.
    """
    points = grid.spec.points()
    frame = pd.DataFrame({"x": points[:, 0], "y": points[:, 1], "loss": grid.values.ravel()}, columns=GRID_COLUMNS)
    try:
        frame.to_csv(path, index=False, float_format=settings.CSV_FLOAT_FORMAT)
    except OSError as e:
        raise exceptions.ArtifactIOError(f"Could not write grid to {path}: {e}") from e


def import_grid(path: t.Union[str, os.PathLike], spec: GridSpec) -> np.ndarray:
    """
    Read a grid CSV written by :func:`export_grid` back into its value matrix.

    :param path: CSV path.
    :param spec: The lattice the file was written for.
    :return: ``(resolution, resolution)`` matrix of losses.
    :raises ArtifactIOError: If the file cannot be read or does not match ``spec``.
    """
    try:
        frame = pd.read_csv(path, dtype=np.float64, float_precision="round_trip")
    except (OSError, ValueError) as e:
        raise exceptions.ArtifactIOError(f"Could not read grid from {path}: {e}") from e

    if tuple(frame.columns) != GRID_COLUMNS:
        raise exceptions.ArtifactIOError(f"{path}: expected header {','.join(GRID_COLUMNS)}")
    if len(frame) != spec.resolution**2:
        raise exceptions.ArtifactIOError(f"{path}: expected {spec.resolution ** 2} rows, found {len(frame)}")
    if not np.allclose(frame[["x", "y"]].to_numpy(), spec.points(), rtol=0, atol=1e-12):
        raise exceptions.ArtifactIOError(f"{path}: coordinates do not match the grid specification")
    return frame["loss"].to_numpy().reshape(spec.resolution, spec.resolution)
