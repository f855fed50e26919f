"""Design improvement: repair insertion by rotating socket edges, then slide contact points for stability.

Peg and socket are edited together.  A design is handled through its seated
picture, the world positions of the peg points at the seat, so that rotating
an edge carries the points lying on it and sliding a point moves it along its
edge.  The force application point keeps its seated world position.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable

import numpy as np
from sklearn.base import BaseEstimator

from .design import (
    MAX_EDGES,
    MAX_POINTS,
    MIN_EDGES,
    MIN_POINTS,
    Correspondence,
    DesignError,
    ErrorModel,
    JointDesign,
    PegDesign,
    SocketDesign,
    validate_design,
)
from .geometry import line_intersection, rot
from .graph import build_graph, sink_report
from .kinematics import KinematicsError, scene_for, seat_config
from .stability import StabilityError, StabilityMetrics, pose_cone, seated_summary, stability_summary

log = logging.getLogger(__name__)

#: Edge rotations allowed per repair call, as a multiple of ``max_iters``.
REPAIR_FACTOR = 5


@dataclass(frozen=True)
class OptimizerParams:
    eps: float = 0.02
    edge_step: float = math.radians(0.5)
    point_step: float | None = None  # default: 1% of the shortest edge
    max_iters: int = 40
    seed: int = 0
    entry_samples: int = 3

    def __post_init__(self):
        for name in ("eps", "edge_step", "max_iters", "entry_samples"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")
        if self.point_step is not None and not self.point_step > 0:
            raise ValueError("point_step must be positive")

    def step_for(self, d: JointDesign) -> float:
        if self.point_step is not None:
            return float(self.point_step)
        return 0.01 * float(d.socket.edge_lengths.min())

    def check(self, d: JointDesign) -> None:
        if not self.eps < 0.5 * float(d.socket.edge_lengths.min()):
            raise ValueError("eps must be below half the shortest edge length")


@dataclass(frozen=True)
class Failure:
    reason: str


@dataclass(frozen=True)
class NoImprovement:
    reason: str = "no slide improves stability"


@dataclass
class Evaluation:
    success: bool
    defects: tuple  # (undesired sinks, disconnected initial modes, jam margin)
    metrics: StabilityMetrics | None


@dataclass
class TraceRecord:
    iteration: int
    action: str
    design: JointDesign
    success: bool
    metrics: StabilityMetrics | None

    def as_dict(self) -> dict:
        m = self.metrics
        return {
            "iteration": self.iteration,
            "action": self.action,
            "success": self.success,
            "max_rotation": None if m is None else m.max_rotation,
            "force_cone": None if m is None else list(m.force_cone),
        }


@dataclass
class OptimizationTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def add(self, *args) -> None:
        self.records.append(TraceRecord(len(self.records), *args))

    def accepted_slides(self) -> list[TraceRecord]:
        return [r for r in self.records if r.action.startswith("slide") or r.action == "evaluate"]

    def stage(self, name: str) -> TraceRecord | None:
        """Last record of a stage: ``initial``, ``insertion`` or ``stability``."""
        recs = self.records
        if name == "initial":
            return recs[0] if recs else None
        if name == "insertion":
            ev = [r for r in recs if r.action == "evaluate"]
            return ev[0] if ev else None
        if name == "stability":
            ok = [r for r in recs if r.success and r.metrics is not None]
            return ok[-1] if ok else None
        raise KeyError(name)


class OptimizationFailure(RuntimeError):
    def __init__(self, reason: str, trace: OptimizationTrace):
        super().__init__(reason)
        self.trace = trace


# -- seated picture ---------------------------------------------------------


def seated_points(d: JointDesign) -> tuple[np.ndarray, np.ndarray]:
    """World positions of the peg points and tip at the nominal seat."""
    scene = scene_for(d)
    q = seat_config(scene).as_array()
    return scene.world(q), scene.tip_world(q)


def from_seated(socket: SocketDesign, W: np.ndarray, tip: np.ndarray, d: JointDesign) -> JointDesign:
    c = W.mean(axis=0)
    peg = PegDesign(W - c, tip - c, d.peg.bump_radius)
    return JointDesign(peg, socket, d.correspondence)


def _edge_of(d: JointDesign) -> dict[int, int]:
    return {i: j for i, j in d.goal_pairs}


def _on_segment_margin(V: np.ndarray, W: np.ndarray, d: JointDesign) -> float:
    """Smallest distance from a goal point to its edge's endpoints (negative when outside)."""
    best = math.inf
    for i, j in d.goal_pairs:
        a, b = V[j], V[j + 1]
        L = float(np.hypot(*(b - a)))
        s = float((W[i] - a) @ (b - a)) / L
        best = min(best, s, L - s)
    return best


def _usable(d: JointDesign) -> bool:
    if not validate_design(d).ok:
        return False
    try:
        scene = scene_for(d)
        q = seat_config(scene).as_array()
    except (DesignError, KinematicsError):
        return False
    return scene.penetration(scene.world(q))[0] <= scene.tol


def rotate_edge(d: JointDesign, j: int, angle: float, W=None, tip=None) -> JointDesign | None:
    """Turn socket edge ``j`` about its midpoint; neighbours are re-intersected.

    The first and last edges re-meet the mouth line.  Points seated on the edge
    turn with it.  Returns None when the result is not a usable design.
    """
    if W is None:
        W, tip = seated_points(d)
    V = np.array(d.socket.vertices, dtype=float)
    m = len(V) - 1
    mid = 0.5 * (V[j] + V[j + 1])
    R = rot(angle)
    u = R @ (V[j + 1] - V[j])
    mouth_dir = np.array([-d.socket.insertion_axis[1], d.socket.insertion_axis[0]])
    if j == 0:
        left = line_intersection(mid, u, V[0], mouth_dir)
    else:
        left = line_intersection(mid, u, V[j - 1], V[j] - V[j - 1])
    if j == m - 1:
        right = line_intersection(mid, u, V[m], mouth_dir)
    else:
        right = line_intersection(mid, u, V[j + 2], V[j + 1] - V[j + 2])
    if left is None or right is None:
        return None
    V2 = V.copy()
    V2[j], V2[j + 1] = left, right
    W2 = np.array(W, dtype=float)
    for i, jj in d.goal_pairs:
        if jj == j:
            W2[i] = mid + R @ (W2[i] - mid)
    try:
        sock = SocketDesign(V2, d.socket.insertion_axis)
        out = from_seated(sock, W2, tip, d)
    except (ValueError, DesignError):
        return None
    if _on_segment_margin(V2, W2, out) <= 0 or not _usable(out):
        return None
    return out


def slide_point(d: JointDesign, i: int, delta: float, eps: float, W=None, tip=None) -> JointDesign | None:
    """Move goal point ``i`` by ``delta`` along its edge, keeping ``eps`` clear of the endpoints."""
    if W is None:
        W, tip = seated_points(d)
    j = _edge_of(d)[i]
    V = d.socket.vertices
    a, b = V[j], V[j + 1]
    L = float(np.hypot(*(b - a)))
    u = (b - a) / L
    W2 = np.array(W, dtype=float)
    W2[i] = W2[i] + delta * u
    s = float((W2[i] - a) @ u)
    if s < eps - 1e-12 or s > L - eps + 1e-12:
        return None
    try:
        out = from_seated(d.socket, W2, tip, d)
    except (ValueError, DesignError):
        return None
    return out if _usable(out) else None


# -- evaluation -------------------------------------------------------------


class Evaluator:
    """Memoized insertion and stability evaluation of candidate designs."""

    def __init__(self, errors: ErrorModel, params: OptimizerParams):
        self.errors = errors
        self.params = params
        self._cache: dict[bytes, Evaluation] = {}
        self._estimates: dict[bytes, StabilityMetrics | None] = {}

    @staticmethod
    def key(d: JointDesign) -> bytes:
        return (np.round(d.socket.vertices, 12).tobytes() + np.round(d.peg.points, 12).tobytes()
                + np.round(d.peg.tip, 12).tobytes())

    def estimate(self, d: JointDesign) -> StabilityMetrics | None:
        """Seated-pose stability, or None when the goal is not seated."""
        k = self.key(d)
        if k not in self._estimates:
            try:
                self._estimates[k] = seated_summary(d, self.errors)
            except (StabilityError, DesignError, KinematicsError):
                self._estimates[k] = None
        return self._estimates[k]

    def __call__(self, d: JointDesign) -> Evaluation:
        k = self.key(d)
        hit = self._cache.get(k)
        if hit is not None:
            return hit
        try:
            g = build_graph(d, self.errors, samples=self.params.entry_samples)
            rep = sink_report(g)
            margin = 0.0 if rep.success else jam_margin(d, g, rep)
            defects = (len(rep.undesired), rep.disconnected, round(margin, 9))
            metrics = None
            if rep.success:
                try:
                    metrics = stability_summary(d, g, self.errors)
                except StabilityError:
                    metrics = None
            ev = Evaluation(rep.success and metrics is not None, defects, metrics)
        except (DesignError, KinematicsError) as exc:
            log.debug("candidate rejected: %s", exc)
            ev = Evaluation(False, (10**6, 10**6, math.inf), None)
        self._cache[k] = ev
        return ev


def jam_margin(d: JointDesign, g, rep) -> float:
    """How firmly the jams hold: summed over their rest poses, the angular distance
    from the insertion direction to the nearer edge of the pose's force cone."""
    total = 0.0
    for s, layer in sorted(g.layers.items()):
        scene = scene_for(d, s)
        for comp in rep.per_scale[s]["undesired"]:
            for mode in sorted(comp, key=lambda m: m.sort_key()):
                for q in layer.resting.get(mode, [])[:4]:
                    lo, hi = pose_cone(scene, q)
                    total += min(hi, -lo)
    return total


def _better(a: StabilityMetrics, b: StabilityMetrics, tol: float = 1e-9) -> bool:
    """``a`` improves on ``b``: lexicographically better and worse in neither metric."""
    if a.max_rotation > b.max_rotation + tol or a.cone_width < b.cone_width - tol:
        return False
    return a.max_rotation < b.max_rotation - tol or a.cone_width > b.cone_width + tol


def _rank(m: StabilityMetrics):
    return (round(m.max_rotation, 9), -round(m.cone_width, 9))


# -- the two improvement steps ------------------------------------------------


def edge_rotation_repair(d: JointDesign, g, params: OptimizerParams, errors: ErrorModel,
                         evaluator: Evaluator | None = None,
                         trace: OptimizationTrace | None = None) -> JointDesign | Failure:
    """Rotate socket edges until the insertion graph has no undesired sink and is connected."""
    ev = evaluator or Evaluator(errors, params)
    rep = sink_report(g) if g is not None else None
    current = ev(d)
    if rep is not None and rep.success and current.success:
        return d
    rng = np.random.default_rng(params.seed)
    last = None
    for _ in range(REPAIR_FACTOR * params.max_iters):
        if current.success:
            return d
        W, tip = seated_points(d)
        m = d.socket.m
        order = [(j, s) for j in rng.permutation(m).tolist() for s in (1, -1)]
        if last in order:
            order.remove(last)
            order.insert(0, last)
        moved = False
        for j, sign in order:
            cand = rotate_edge(d, j, sign * params.edge_step, W, tip)
            if cand is None:
                continue
            res = ev(cand)
            if res.success or res.defects < current.defects:
                d, current, moved, last = cand, res, True, (j, sign)
                if trace is not None:
                    trace.add(f"rotate edge {j} {'+' if sign > 0 else '-'}", d, res.success, res.metrics)
                break
        if not moved:
            return Failure("no edge rotation reduces the insertion defects")
    return d if current.success else Failure("repair budget exhausted")


def slide_points_step(d: JointDesign, metrics: StabilityMetrics, params: OptimizerParams,
                      errors: ErrorModel, evaluator: Evaluator | None = None):
    """Best single ``±point_step`` slide of one goal point that keeps insertion and improves stability.

    Candidates are ranked by the stability of their seated poses, which needs
    no insertion graph; the full evaluation then runs in rank order and the
    first candidate that still inserts and improves on ``metrics`` is taken.
    """
    ev = evaluator or Evaluator(errors, params)
    W, tip = seated_points(d)
    step = params.step_for(d)
    scored = []
    for i, _ in sorted(d.goal_pairs):
        for sign in (1, -1):
            cand = slide_point(d, i, sign * step, params.eps, W, tip)
            if cand is None:
                continue
            est = ev.estimate(cand)
            if est is not None and _better(est, metrics):
                scored.append((_rank(est), i, -sign, cand))
    scored.sort(key=lambda t: t[:3])
    for _, i, neg_sign, cand in scored:
        res = ev(cand)
        if res.success and _better(res.metrics, metrics):
            return cand, res, f"slide point {i} {'+' if neg_sign < 0 else '-'}"
    return NoImprovement()


def optimize(d: JointDesign, e: ErrorModel, params: OptimizerParams | None = None):
    """Alternate insertion repair and stability slides until nothing improves.

    Returns ``(best_design, trace)``.  Raises :class:`OptimizationFailure`, with the
    trace attached, when insertion cannot be repaired.
    """
    params = params or OptimizerParams()
    params.check(d)
    ev = Evaluator(e, params)
    trace = OptimizationTrace()
    res = ev(d)
    trace.add("initial", d, res.success, res.metrics)
    iters = 0
    while iters < params.max_iters:
        iters += 1
        if not res.success:
            g = build_graph(d, e, samples=params.entry_samples)
            out = edge_rotation_repair(d, g, params, e, ev, trace)
            if isinstance(out, Failure):
                raise OptimizationFailure(out.reason, trace)
            d, res = out, ev(out)
            trace.add("evaluate", d, res.success, res.metrics)
            continue
        if not any(r.action == "evaluate" for r in trace.records):
            trace.add("evaluate", d, res.success, res.metrics)
        step = slide_points_step(d, res.metrics, params, e, ev)
        if isinstance(step, NoImprovement):
            break
        d, res, action = step
        trace.add(action, d, res.success, res.metrics)
    best = min(
        (r for r in trace.records if r.success and r.metrics is not None),
        key=lambda r: (_rank(r.metrics), r.iteration),
    )
    return best.design, trace


# -- sweep over point and edge counts ------------------------------------------


def correspondence_patterns(n: int, m: int) -> list[Correspondence]:
    """Order-preserving point/edge matchings; every point is matched when n <= m."""
    if not (MIN_POINTS <= n <= MAX_POINTS and MIN_EDGES <= m <= MAX_EDGES) or abs(n - m) > 1:
        raise ValueError(f"({n}, {m}) is outside 2 <= n <= 6, |m - n| <= 1")
    k = min(n, m)
    pats = []
    for pts in combinations(range(n), k):
        for edges in combinations(range(m), k):
            pats.append(Correspondence(frozenset(zip(pts, edges))))
    return pats


def sweep_cells(cells=None) -> list[tuple[int, int]]:
    out = []
    for n in range(MIN_POINTS, MAX_POINTS + 1):
        for m in (n - 1, n, n + 1):
            if MIN_EDGES <= m <= MAX_EDGES:
                out.append((n, m))
    if cells is None:
        return out
    for c in cells:
        if tuple(c) not in out:
            raise ValueError(f"cell {c[0]}-{c[1]} is outside 2 <= n <= 6, |m - n| <= 1")
    return [tuple(c) for c in cells]


@dataclass
class CellResult:
    n: int
    m: int
    pattern: Correspondence | None
    design: JointDesign | None
    trace: OptimizationTrace | None
    error: str | None = None

    def rows(self) -> list[dict]:
        """Table rows: initial, insertion optimized and stability optimized."""
        label = f"{self.n}-{self.m}"
        if self.trace is None:
            return [{"cell": label, "stage": "initial", "success": False, "max_rotation": None,
                     "force_cone": None, "error": self.error}]
        out = []
        for stage in ("initial", "insertion", "stability"):
            r = self.trace.stage(stage)
            m = r.metrics if r is not None and r.success else None
            out.append({
                "cell": label,
                "stage": stage,
                "success": bool(r is not None and r.success),
                "max_rotation": None if m is None else m.max_rotation,
                "force_cone": None if m is None else list(m.force_cone),
            })
        return out


def sweep_mn(socket_family: Callable, e: ErrorModel, params: OptimizerParams | None = None,
             cells=None) -> dict[tuple[int, int], CellResult]:
    """Run :func:`optimize` on every (n, m) cell and matching pattern; keep each cell's best.

    ``socket_family(n, m, pattern)`` returns a seed design or None.
    """
    params = params or OptimizerParams()
    out: dict[tuple[int, int], CellResult] = {}
    for n, m in sweep_cells(cells):
        best: CellResult | None = None
        pats = correspondence_patterns(n, m)
        for pat in pats:
            seed = socket_family(n, m, pat)
            if seed is None:
                continue
            try:
                design, trace = optimize(seed, e, params)
            except (OptimizationFailure, ValueError, DesignError) as exc:
                res = CellResult(n, m, pat, None, getattr(exc, "trace", None), str(exc))
            else:
                res = CellResult(n, m, pat, design, trace)
            if best is None or _cell_key(res) < _cell_key(best):
                best = res
        out[(n, m)] = best or CellResult(n, m, None, None, None, "no seed design")
    return out


def _cell_key(r: CellResult):
    if r.design is None:
        return (1, 0.0, 0.0)
    m = r.trace.stage("stability").metrics
    return (0,) + _rank(m)


def format_table(results: dict) -> str:
    """Aligned text table: cell, stage, success, max rotation, force cone."""
    head = f"{'n-m':<5} {'design':<12} {'success':<8} {'max rotation':>14}  force cone"
    lines = [head, "-" * len(head)]
    for key in sorted(results):
        for row in results[key].rows():
            rot_s = "null" if row["max_rotation"] is None else f"{row['max_rotation']:.9f}"
            cone = "null" if row["force_cone"] is None else (
                f"[{row['force_cone'][0]:.9f}, {row['force_cone'][1]:.9f}]")
            lines.append(f"{row['cell']:<5} {row['stage']:<12} {str(row['success']):<8} {rot_s:>14}  {cone}")
    return "\n".join(lines) + "\n"


class JointDesignOptimizer(BaseEstimator):
    """Estimator-style wrapper around :func:`optimize`.

    ``fit(design, errors)`` stores ``best_design_``, ``trace_`` and ``metrics_``.
    """

    def __init__(self, eps: float = 0.02, edge_step: float = math.radians(0.5),
                 point_step: float | None = None, max_iters: int = 40, seed: int = 0,
                 entry_samples: int = 3):
        self.eps = eps
        self.edge_step = edge_step
        self.point_step = point_step
        self.max_iters = max_iters
        self.seed = seed
        self.entry_samples = entry_samples

    def _params(self) -> OptimizerParams:
        return OptimizerParams(self.eps, self.edge_step, self.point_step, self.max_iters,
                               self.seed, self.entry_samples)

    def fit(self, design: JointDesign, errors: ErrorModel | None = None):
        errors = errors or ErrorModel()
        self.best_design_, self.trace_ = optimize(design, errors, self._params())
        best = self.trace_.stage("stability")
        self.metrics_ = best.metrics if best is not None else None
        return self
