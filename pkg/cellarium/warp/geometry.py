"""
Euclidean primitives and the constructions around a pair of proxies: the line L_p through both proxies and the
points where a disk centred on the opposite-class proxy meets that line.
"""

import typing as t
from dataclasses import dataclass

import numpy as np

from cellarium.warp import exceptions, settings

PointLike = t.Union[t.Sequence[float], np.ndarray]


def as_point(coords: PointLike) -> np.ndarray:
    """
    Convert coordinates into a validated point (1-D float array).

    :param coords: Coordinates of the point.
    :return: A 1-D ``float64`` array with at least one finite component.
    """
    point = np.asarray(coords, dtype=np.float64)
    if point.ndim != 1 or point.shape[0] < 1:
        raise exceptions.GeometryError(f"A point must be a non-empty vector, got shape {point.shape}")
    if not np.all(np.isfinite(point)):
        raise exceptions.GeometryError("A point must have finite components")
    return point


def _check_same_dimension(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise exceptions.GeometryError(f"Dimension mismatch: {a.shape[-1]} != {b.shape[-1]}")


@dataclass(frozen=True)
class ProxyPair:
    """
    Ground-truth proxy ``p_c`` and opposite-class proxy ``p_cprime`` of the binary setting.

    :param p_c: Proxy of the class the embedding belongs to.
    :param p_cprime: Proxy of the opposite class.
    """

    p_c: np.ndarray
    p_cprime: np.ndarray

    def __post_init__(self):
        p_c = as_point(self.p_c)
        p_cprime = as_point(self.p_cprime)
        _check_same_dimension(p_c, p_cprime)
        if distance(p_c, p_cprime) <= 0.0:
            raise exceptions.GeometryError("Proxies of a pair must not coincide")
        object.__setattr__(self, "p_c", p_c)
        object.__setattr__(self, "p_cprime", p_cprime)

    @property
    def dim(self) -> int:
        return self.p_c.shape[0]

    @property
    def separation(self) -> float:
        """Distance ``d`` between the two proxies."""
        return distance(self.p_c, self.p_cprime)

    def swapped(self) -> "ProxyPair":
        return ProxyPair(p_c=self.p_cprime, p_cprime=self.p_c)


@dataclass(frozen=True)
class LineParam:
    """
    Parametrisation ``origin + t * direction`` of an infinite line.

    :param origin: Point at ``t = 0``.
    :param direction: Unit direction vector.
    """

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        origin = as_point(self.origin)
        direction = as_point(self.direction)
        _check_same_dimension(origin, direction)
        if abs(np.linalg.norm(direction) - 1.0) > settings.UNIT_DIRECTION_TOLERANCE:
            raise exceptions.GeometryError("Line direction must have unit norm")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "direction", direction)

    def point_at(self, t_values: t.Union[float, np.ndarray]) -> np.ndarray:
        """
        Points of the line at the given parameter values.

        :param t_values: Scalar or 1-D array of signed distances from the origin.
        :return: A point, or an array of shape ``(len(t_values), dim)``.
        """
        t_values = np.asarray(t_values, dtype=np.float64)
        return self.origin + t_values[..., np.newaxis] * self.direction


def distance(a: PointLike, b: PointLike) -> float:
    """
    Euclidean distance between two points of equal dimension.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_dimension(a, b)
    return float(np.linalg.norm(a - b))


def line_through(pair: ProxyPair) -> LineParam:
    """
    The line L_p through both proxies, with ``t`` measuring the signed distance from ``p_c`` and positive on the side
    away from ``p_cprime``.

    :param pair: Proxy pair defining the line.
    :return: Line with origin ``p_c`` and unit direction ``(p_c - p_cprime) / d``.
    """
    offset = pair.p_c - pair.p_cprime
    return LineParam(origin=pair.p_c, direction=offset / np.linalg.norm(offset))


def disk_extreme_points(pair: ProxyPair, r: float) -> t.Tuple[np.ndarray, np.ndarray]:
    """
    Intersections of the sphere of radius ``r`` around ``p_cprime`` with L_p.

    :param pair: Proxy pair.
    :param r: Radius of the disk, must be positive.
    :return: ``(e_star, e_upper_star)``: the intersection nearer to ``p_c`` and the one farther from it.
    """
    if not r > 0:
        raise exceptions.GeometryError(f"Disk radius must be positive, got {r}")
    direction = line_through(pair).direction
    return pair.p_cprime + r * direction, pair.p_cprime - r * direction


def point_line_distance(e: PointLike, line: LineParam) -> t.Union[float, np.ndarray]:
    """
    Perpendicular distance from one point, or from each row of an array of points, to an infinite line.

    :param e: A point or an array of shape ``(n, dim)``.
    :param line: The line.
    :return: A float for a single point, an array of ``n`` distances otherwise.
    """
    e = np.asarray(e, dtype=np.float64)
    _check_same_dimension(e, line.origin)
    offset = e - line.origin
    along = np.asarray(offset @ line.direction)
    perpendicular = offset - along[..., np.newaxis] * line.direction
    result = np.linalg.norm(perpendicular, axis=-1)
    return float(result) if result.ndim == 0 else result
