"""Joint design data model: peg, socket, correspondence and error bounds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from .geometry import (
    GEOM_TOL,
    GeometryError,
    cross2,
    lines_parallel,
    polygon_signed_area,
    rot,
    segments_intersect,
)

MIN_POINTS, MAX_POINTS = 2, 6
MIN_EDGES, MAX_EDGES = 2, 7


class DesignError(ValueError):
    """Invalid design input."""


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(arr)):
        raise GeometryError("non-finite coordinates")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PegDesign:
    """Contact points ``c_1..c_n`` and force application point, in the peg frame."""

    points: np.ndarray
    tip: np.ndarray = field(default_factory=lambda: np.zeros(2))
    bump_radius: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "points", _frozen_array(self.points))
        tip = np.array(self.tip, dtype=float).reshape(2)
        tip.setflags(write=False)
        object.__setattr__(self, "tip", tip)
        object.__setattr__(self, "bump_radius", float(self.bump_radius))

    @property
    def n(self) -> int:
        return len(self.points)


@dataclass(frozen=True, eq=False)
class SocketDesign:
    """Hole profile as a polyline from the left mouth vertex to the right one."""

    vertices: np.ndarray
    insertion_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, -1.0]))

    def __post_init__(self):
        object.__setattr__(self, "vertices", _frozen_array(self.vertices))
        ax = np.array(self.insertion_axis, dtype=float).reshape(2)
        norm = float(np.hypot(*ax))
        if not math.isfinite(norm) or norm < 1e-12:
            raise GeometryError("insertion axis must be a non-zero vector")
        ax = ax / norm
        ax.setflags(write=False)
        object.__setattr__(self, "insertion_axis", ax)

    @property
    def m(self) -> int:
        return len(self.vertices) - 1

    @property
    def starts(self) -> np.ndarray:
        return self.vertices[:-1]

    @property
    def ends(self) -> np.ndarray:
        return self.vertices[1:]

    @property
    def edge_lengths(self) -> np.ndarray:
        d = self.ends - self.starts
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def mouth_center(self) -> np.ndarray:
        return 0.5 * (self.vertices[0] + self.vertices[-1])

    @property
    def mouth_width(self) -> float:
        return float(np.hypot(*(self.vertices[-1] - self.vertices[0])))


@dataclass(frozen=True)
class Correspondence:
    """Point/edge pairs meant to be in contact once the peg is seated."""

    pairs: frozenset

    def __post_init__(self):
        object.__setattr__(
            self, "pairs", frozenset((int(i), int(j)) for i, j in self.pairs)
        )

    def sorted(self) -> list[tuple[int, int]]:
        return sorted(self.pairs)

    @classmethod
    def diagonal(cls, n: int) -> "Correspondence":
        return cls(frozenset((i, i) for i in range(n)))


@dataclass(frozen=True)
class ErrorModel:
    """Bounds on initial lateral offset, tilt and uniform socket scaling."""

    dx: float = 0.0
    dtheta: float = 0.0
    scale: float = 0.0

    def __post_init__(self):
        for name in ("dx", "dtheta", "scale"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise DesignError(f"error bound {name} must be finite and >= 0, got {v}")
            object.__setattr__(self, name, v)
        if self.scale >= 1.0:
            raise DesignError("scale bound must be < 1")

    def scales(self) -> tuple[float, ...]:
        """Manufacturing scales analysed: the two extremes and nominal."""
        if self.scale == 0.0:
            return (1.0,)
        return (1.0 - self.scale, 1.0, 1.0 + self.scale)


@dataclass(frozen=True, eq=False)
class JointDesign:
    peg: PegDesign
    socket: SocketDesign
    correspondence: Correspondence

    @property
    def goal_pairs(self) -> frozenset:
        return self.correspondence.pairs


@dataclass
class ValidationReport:
    violations: list[tuple[str, str]] = field(default_factory=list)

    def add(self, code: str, message: str) -> None:
        self.violations.append((code, message))

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def codes(self) -> list[str]:
        return [c for c, _ in self.violations]

    def __bool__(self) -> bool:  # truthy when the design is valid
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            return "valid"
        return "; ".join(f"{c}: {m}" for c, m in self.violations)


def _colinear(points: np.ndarray, tol: float) -> bool:
    centered = points - points.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    scale = max(float(sv[0]), 1e-300)
    return float(sv[-1]) <= tol * max(1.0, scale)


def validate_design(d: JointDesign, tol: float = GEOM_TOL) -> ValidationReport:
    """Check every structural invariant; an empty report means valid."""
    rep = ValidationReport()
    pts = d.peg.points
    verts = d.socket.vertices
    n, m = len(pts), len(verts) - 1

    if not MIN_POINTS <= n <= MAX_POINTS:
        rep.add("point-count", f"peg has {n} points; need {MIN_POINTS}..{MAX_POINTS}")
    if not MIN_EDGES <= m <= MAX_EDGES:
        rep.add("edge-count", f"socket has {m} edges; need {MIN_EDGES}..{MAX_EDGES}")
    if abs(n - m) > 1:
        rep.add("redundant", f"|n - m| = {abs(n - m)} > 1")

    for a, b in combinations(range(n), 2):
        if np.hypot(*(pts[a] - pts[b])) <= tol:
            rep.add("duplicate-points", f"points {a} and {b} coincide")
    if n >= 3 and _colinear(pts, 1e-9):
        rep.add("co-linear points", "peg contact points are co-linear")

    lengths = []
    for j in range(m):
        length = float(np.hypot(*(verts[j + 1] - verts[j])))
        lengths.append(length)
        if length <= tol:
            rep.add("degenerate-edge", f"edge {j} has zero length")
    if any(length <= tol for length in lengths):
        return rep

    dirs = verts[1:] - verts[:-1]
    for a, b in combinations(range(m), 2):
        if lines_parallel(dirs[a], dirs[b]):
            rep.add("parallel edges", f"edges {a} and {b} are parallel")

    # Simple polygon: hole polyline closed by the mouth segment.
    closed = np.vstack([verts, verts[:1]])
    segs = list(zip(closed[:-1], closed[1:]))
    k = len(segs)
    for a in range(k):
        for b in range(a + 1, k):
            if b == a + 1 or (a == 0 and b == k - 1):
                continue
            if segments_intersect(*segs[a], *segs[b], tol=tol):
                rep.add("self-intersecting", f"socket segments {a} and {b} intersect")

    mouth = verts[-1] - verts[0]
    width = float(np.hypot(*mouth))
    axis = d.socket.insertion_axis
    if width <= tol:
        rep.add("mouth", "mouth width must be positive")
    else:
        if abs(float(mouth @ axis)) / width > 1e-6:
            rep.add("mouth", "mouth is not perpendicular to the insertion axis")
        if polygon_signed_area(verts) <= 0 or float(cross2(axis, mouth)) <= 0:
            rep.add("winding", "vertices must run from the left mouth vertex to the right one")
        center = 0.5 * (verts[0] + verts[-1])
        depth = (verts[1:-1] - center) @ axis
        if np.any(depth <= tol):
            rep.add("mouth", "hole vertices must lie below the mouth line")

    for i, j in d.goal_pairs:
        if not (0 <= i < n and 0 <= j < m):
            rep.add("correspondence", f"pair ({i}, {j}) out of range")
    if not d.goal_pairs:
        rep.add("correspondence", "goal mode is empty")

    # Non-degeneracy: no edge as long as an adjacent point gap.
    if n >= 2:
        gaps = np.hypot(*(pts[1:] - pts[:-1]).T)
        for j, length in enumerate(lengths):
            for i, g in enumerate(gaps):
                if abs(length - g) <= 1e-6 * max(length, g):
                    rep.add(
                        "degenerate",
                        f"edge {j} length equals distance between points {i} and {i + 1}",
                    )
    return rep


def require_valid(d: JointDesign) -> None:
    rep = validate_design(d)
    if not rep.ok:
        raise DesignError(f"invalid design: {rep}")


def scale_socket(s: SocketDesign, factor: float) -> SocketDesign:
    """Uniformly scale the socket about its mouth center."""
    if not factor > 0:
        raise DesignError("scale factor must be positive")
    c = s.mouth_center
    return SocketDesign(c + factor * (s.vertices - c), s.insertion_axis)


def scaled(d: JointDesign, factor: float) -> JointDesign:
    if factor == 1.0:
        return d
    return replace(d, socket=scale_socket(d.socket, factor))


def _reverse_socket(d: JointDesign) -> JointDesign:
    m = d.socket.m
    sock = SocketDesign(d.socket.vertices[::-1].copy(), d.socket.insertion_axis)
    corr = Correspondence(frozenset((i, m - 1 - j) for i, j in d.goal_pairs))
    return JointDesign(d.peg, sock, corr)


def canonicalize(d: JointDesign) -> JointDesign:
    """Mouth center at the origin, insertion axis (0, -1), peg origin at the point centroid.

    The whole design (socket and peg drawing) is rotated rigidly, so rotated or
    translated copies of a design share one canonical form.
    """
    axis = d.socket.insertion_axis
    if polygon_signed_area(d.socket.vertices) < 0:
        d = _reverse_socket(d)
    ang = -math.pi / 2 - math.atan2(axis[1], axis[0])
    R = rot(ang)
    verts = d.socket.vertices @ R.T
    verts = verts - 0.5 * (verts[0] + verts[-1])
    # Mouth vertices sit on y = 0 exactly; kill rounding residue.
    verts[0, 1] = 0.0
    verts[-1, 1] = 0.0
    pts = d.peg.points @ R.T
    tip = R @ d.peg.tip
    centroid = pts.mean(axis=0)
    peg = PegDesign(pts - centroid, tip - centroid, d.peg.bump_radius)
    out = JointDesign(peg, SocketDesign(verts, (0.0, -1.0)), d.correspondence)
    require_valid(out)
    return out


def transform_design(d: JointDesign, angle: float, shift) -> JointDesign:
    """Rigidly move the whole drawing (socket, axis and peg) by a rotation then a shift."""
    R = rot(angle)
    shift = np.asarray(shift, dtype=float)
    sock = SocketDesign(d.socket.vertices @ R.T + shift, R @ d.socket.insertion_axis)
    peg = PegDesign(d.peg.points @ R.T + shift, R @ d.peg.tip + shift, d.peg.bump_radius)
    return JointDesign(peg, sock, d.correspondence)
