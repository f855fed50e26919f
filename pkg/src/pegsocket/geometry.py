"""Planar primitives: rigid poses, point/segment predicates and socket clearance.

Orientation convention: a segment ``a -> b`` has its *free* side on the left,
so the signed distance of a point is ``cross(b - a, p - a) / |b - a|``.  Socket
polylines are stored left mouth vertex first, which puts the hole on the left
of every edge.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .design import SocketDesign

#: Contact classification tolerance (design units), shared by every module.
GEOM_TOL = 1e-9

#: Two edges closer than this in direction count as parallel (radians).
PARALLEL_TOL = math.radians(0.5)


class GeometryError(ValueError):
    """Raised for degenerate geometric input."""


def as_vec(p: Sequence[float] | np.ndarray) -> np.ndarray:
    v = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(v)):
        raise GeometryError(f"non-finite coordinate {v!r}")
    return v


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    t = math.fmod(theta, 2.0 * math.pi)
    if t <= -math.pi:
        t += 2.0 * math.pi
    elif t > math.pi:
        t -= 2.0 * math.pi
    return t


def rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def cross2(a, b) -> float | np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def perp(v: np.ndarray) -> np.ndarray:
    """Rotate by +90 degrees."""
    v = np.asarray(v, dtype=float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


@dataclass(frozen=True)
class Config:
    """Peg pose: world = R(theta) @ p + (x, y)."""

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "theta"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise GeometryError(f"non-finite config component {name}={val}")
            object.__setattr__(self, name, val)
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def rotation(self) -> float:
        return self.theta

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])

    @classmethod
    def from_array(cls, q) -> "Config":
        return cls(float(q[0]), float(q[1]), float(q[2]))


def compose(q1: Config, q2: Config) -> Config:
    """Pose of ``q1`` applied after ``q2``."""
    t = rot(q1.theta) @ q2.translation + q1.translation
    return Config(t[0], t[1], q1.theta + q2.theta)


def apply_config(q: Config, p) -> np.ndarray:
    """Map peg-frame point(s) ``p`` (shape (2,) or (k, 2)) into the world."""
    p = np.asarray(p, dtype=float)
    c, s = math.cos(q.theta), math.sin(q.theta)
    x = c * p[..., 0] - s * p[..., 1] + q.x
    y = s * p[..., 0] + c * p[..., 1] + q.y
    return np.stack([x, y], axis=-1)


def rotate_about(p, center, angle: float) -> np.ndarray:
    if not math.isfinite(angle):
        raise GeometryError("rotation angle must be finite")
    p = np.asarray(p, dtype=float)
    center = np.asarray(center, dtype=float)
    return (p - center) @ rot(angle).T + center


@dataclass(frozen=True, eq=False)
class Segment:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a, b = as_vec(self.a), as_vec(self.b)
        if float(np.hypot(*(b - a))) <= GEOM_TOL:
            raise GeometryError("degenerate segment")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def length(self) -> float:
        return float(np.hypot(*(self.b - self.a)))

    @property
    def direction(self) -> np.ndarray:
        return (self.b - self.a) / self.length

    @property
    def normal(self) -> np.ndarray:
        """Unit normal pointing to the free (left) side."""
        return perp(self.direction)


class ContactKind(Enum):
    INTERIOR = "interior"
    ENDPOINT = "endpoint"
    OFF = "off"


@dataclass(frozen=True)
class SegmentContact:
    kind: ContactKind
    distance: float = 0.0

    @property
    def touching(self) -> bool:
        return self.kind is not ContactKind.OFF


def point_segment_contact(p, s: Segment, tol: float = GEOM_TOL) -> SegmentContact:
    """Classify point ``p`` against segment ``s``.

    Off-contact distances are signed: positive on the free (left) side.  A
    point beyond the segment span reports its signed distance to the line when
    it lies within the span's normal slab, otherwise the Euclidean distance to
    the nearest endpoint carrying the side's sign.
    """
    if tol <= 0:
        raise GeometryError("tol must be positive")
    p = as_vec(p)
    u = s.direction
    rel = p - s.a
    along = float(rel @ u)
    signed = float(cross2(u, rel))
    length = s.length
    if np.hypot(*(p - s.a)) <= tol or np.hypot(*(p - s.b)) <= tol:
        return SegmentContact(ContactKind.ENDPOINT, 0.0)
    if -tol <= along <= length + tol:
        if abs(signed) <= tol:
            return SegmentContact(ContactKind.INTERIOR, 0.0)
        if 0.0 <= along <= length:
            return SegmentContact(ContactKind.OFF, signed)
    end = s.a if along < 0.0 else s.b
    dist = float(np.hypot(*(p - end)))
    return SegmentContact(ContactKind.OFF, math.copysign(dist, signed) if signed else dist)


def point_segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Unsigned distances, shape (k, m), from k points to m segments."""
    points = np.atleast_2d(points)
    d = b - a
    ll = np.einsum("ij,ij->i", d, d)
    rel = points[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("kij,ij->ki", rel, d) / ll, 0.0, 1.0)
    closest = a[None] + t[..., None] * d[None]
    return np.hypot(*(points[:, None, :] - closest).transpose(2, 0, 1))


def polygon_signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def points_in_polygon(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd crossing test, vectorized over points."""
    points = np.atleast_2d(points)
    px = points[:, 0][:, None]
    py = points[:, 1][:, None]
    x0, y0 = poly[:, 0][None], poly[:, 1][None]
    x1, y1 = np.roll(poly[:, 0], -1)[None], np.roll(poly[:, 1], -1)[None]
    cond = (y0 > py) != (y1 > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
    hit = cond & (px < xint)
    return (np.count_nonzero(hit, axis=1) % 2) == 1


def hole_polygon(vertices: np.ndarray) -> np.ndarray:
    """The hole as a closed polygon (polyline closed across the mouth)."""
    return np.asarray(vertices, dtype=float)


def is_free(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Free space: strictly above the mouth line or inside the hole."""
    points = np.atleast_2d(points)
    mouth_y = 0.5 * (vertices[0, 1] + vertices[-1, 1])
    return (points[:, 1] > mouth_y) | points_in_polygon(points, vertices)


def socket_clearance(p, socket: "SocketDesign") -> float:
    """Signed distance from ``p`` to the nearest socket edge.

    Non-negative in free space (inside the hole or above the mouth), negative
    inside socket material.
    """
    return float(socket_clearances(np.atleast_2d(as_vec(p)), socket.vertices)[0])


def socket_clearances(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    v = np.asarray(vertices, dtype=float)
    dist = point_segment_distance(points, v[:-1], v[1:]).min(axis=1)
    free = is_free(points, v)
    return np.where(free, dist, -dist)


def segments_intersect(p1, p2, p3, p4, tol: float = GEOM_TOL) -> bool:
    """Proper or touching intersection of closed segments p1p2 and p3p4."""
    p1, p2, p3, p4 = (np.asarray(x, dtype=float) for x in (p1, p2, p3, p4))
    d1 = cross2(p4 - p3, p1 - p3)
    d2 = cross2(p4 - p3, p2 - p3)
    d3 = cross2(p2 - p1, p3 - p1)
    d4 = cross2(p2 - p1, p4 - p1)
    if ((d1 > tol and d2 < -tol) or (d1 < -tol and d2 > tol)) and (
        (d3 > tol and d4 < -tol) or (d3 < -tol and d4 > tol)
    ):
        return True

    def on_seg(a, b, c, d):
        return abs(d) <= tol and min(a[0], b[0]) - tol <= c[0] <= max(a[0], b[0]) + tol and min(
            a[1], b[1]
        ) - tol <= c[1] <= max(a[1], b[1]) + tol

    return bool(
        on_seg(p3, p4, p1, d1)
        or on_seg(p3, p4, p2, d2)
        or on_seg(p1, p2, p3, d3)
        or on_seg(p1, p2, p4, d4)
    )


def line_intersection(p, u, q, w) -> np.ndarray | None:
    """Intersection of lines p + s u and q + t w; None when parallel."""
    den = float(cross2(u, w))
    if abs(den) < 1e-14:
        return None
    s = float(cross2(np.asarray(q) - np.asarray(p), w)) / den
    return np.asarray(p, dtype=float) + s * np.asarray(u, dtype=float)


def direction_angle(d) -> float:
    return math.atan2(float(d[1]), float(d[0]))


def lines_parallel(d1, d2, tol: float = PARALLEL_TOL) -> bool:
    """Undirected line parallelism within ``tol`` radians."""
    diff = abs(normalize_angle(direction_angle(d1) - direction_angle(d2)))
    diff = min(diff, math.pi - diff)
    return diff < tol


def pairwise(seq: Iterable):
    it = list(seq)
    return zip(it[:-1], it[1:])
