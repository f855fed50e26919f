"""After-insertion stability: rotational play of the seated peg and the force cone it withstands."""
from __future__ import annotations

import math
from itertools import combinations
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from .design import ErrorModel, JointDesign
from .geometry import Config, cross2
from .graph import InsertionGraph, sink_report
from .kinematics import ContactMode, Scene, _reference_seat, goal_realizations, scene_for, seat_config
from .mechanics import EQ_TOL, QuasiStatic
from .simulate import keeps_contacts

#: Coarse angular step of the rotation sweep before bisection.
ROTATION_STEP = 2e-3
#: Bisection tolerance for both boundaries.
ANGLE_TOL = 1e-7


class StabilityError(ValueError):
    pass


@dataclass
class StabilityMetrics:
    max_rotation: float
    force_cone: tuple[float, float]
    breakdown: list = field(default_factory=list)

    @property
    def cone_width(self) -> float:
        return self.force_cone[1] - self.force_cone[0]

    def as_dict(self) -> dict:
        return {
            "max_rotation": self.max_rotation,
            "force_cone": list(self.force_cone),
            "breakdown": self.breakdown,
        }


def rotation_limit(scene: Scene, q, center, direction: int, cap: float = math.pi) -> float:
    """Largest angle the peg turns about ``center`` (sense ``direction``) inside the hole.

    The sweep stops at the first pose that penetrates the socket or lifts a
    point above the mouth line.
    """
    q = np.asarray(q, dtype=float)
    return float(_k.rotation_limit(scene.points, q, float(center[0]), float(center[1]),
                                   float(direction), ROTATION_STEP, cap, scene.vertices,
                                   scene.mouth_y, scene.A, scene.B, scene.tol, ANGLE_TOL))


def rotation_centers(scene: Scene, q) -> list[np.ndarray]:
    """Contact points of the pose, plus the instantaneous center of a two-contact family."""
    q = np.asarray(q, dtype=float)
    W = scene.world(q)
    pairs = sorted(p for p in scene.contact_pairs(W) if p[1] < scene.m)
    centers = [W[i] for i in sorted({i for i, _ in pairs})]
    if len(pairs) == 2:
        (i1, j1), (i2, j2) = pairs
        n1, n2 = scene.N[j1], scene.N[j2]
        den = float(cross2(n1, n2))
        if abs(den) > 1e-9:
            s = float(cross2(W[i2] - W[i1], n2)) / den
            centers.append(W[i1] + s * n1)
    return centers


def pose_rotation(scene: Scene, q) -> float:
    """Rotational play of one seated pose: best over centers and both senses."""
    best = 0.0
    for c in rotation_centers(scene, q):
        for sense in (1, -1):
            best = max(best, rotation_limit(scene, q, c, sense))
    return best


def seated_poses(scene: Scene, goal, fallback: bool = True) -> list[np.ndarray]:
    """Realizations of ``goal`` near the seat that rest under the insertion force.

    When none rests, returns the realization closest to the nominal seat, or
    nothing if ``fallback`` is off.
    """
    qs = goal_realizations(scene, ContactMode(goal))
    if not qs:
        raise StabilityError(f"goal mode {ContactMode(goal).label} is not seated at scale {scene.scale:g}")
    law = QuasiStatic(scene)
    rest = []
    for q in qs:
        qa = q.as_array()
        if all(law._speed(v) < EQ_TOL for v, _, _ in law.velocities(law.contact_state(qa))):
            rest.append(qa)
    if rest or not fallback:
        return rest
    ref = _reference_seat(scene.design)
    best = min(qs, key=lambda q: (abs(q.theta - ref.theta), abs(q.x - ref.x), q.y))
    return [best.as_array()]


def max_rotation(d: JointDesign, goal, scale: float = 1.0, seated=None) -> float:
    """Largest rotation about a contact-determined center that keeps the peg penetration-free.

    ``seated`` gives the poses to test; by default every realization of ``goal``
    near the nominal seat.
    """
    scene = scene_for(d, scale)
    poses = seated_poses(scene, goal) if seated is None else [_as_q(q) for q in seated]
    return max(pose_rotation(scene, q) for q in poses)


def mode_rotations(d: JointDesign, scale: float = 1.0) -> dict[ContactMode, float]:
    """Rotation of the seated peg about the pivot each one- or two-pair contact mode fixes.

    A single pair pivots about its contact point; two pairs on non-parallel
    edges pivot about the instantaneous center of their one-parameter family.
    Each value is the larger of the two senses.
    """
    scene = scene_for(d, scale)
    q = seat_config(scene).as_array()
    W = scene.world(q)
    pairs = sorted(p for p in scene.contact_pairs(W) if p[1] < scene.m)
    out = {}
    for r in (1, 2):
        for sub in combinations(pairs, r):
            if r == 1:
                center = W[sub[0][0]]
            else:
                (i1, j1), (i2, j2) = sub
                n1, n2 = scene.N[j1], scene.N[j2]
                den = float(cross2(n1, n2))
                if abs(den) < 1e-9 or i1 == i2:
                    continue
                center = W[i1] + float(cross2(W[i2] - W[i1], n2)) / den * n1
            out[ContactMode(sub)] = max(rotation_limit(scene, q, center, sense) for sense in (1, -1))
    return out


def rotation_order(rotations: dict, tol: float = 1e-6) -> set:
    """Strict part of the partial order: ``(a, b)`` when mode ``a`` turns less than ``b``."""
    return {(a, b) for a, ra in rotations.items() for b, rb in rotations.items() if ra < rb - tol}


def _as_q(q) -> np.ndarray:
    return q.as_array() if isinstance(q, Config) else np.asarray(q, dtype=float)


def pose_cone(scene: Scene, q) -> tuple[float, float]:
    """Interval of force directions, containing 0, under which no contact of ``q`` separates."""
    q = _as_q(q)
    qs = QuasiStatic(scene)
    st = qs.contact_state(q)

    def holds(phi: float) -> bool:
        qs.set_force_angle(phi)
        return keeps_contacts(qs, q, st)

    if not holds(0.0):
        return (0.0, 0.0)
    # Directions that hold form an arc around 0 (a circle cut by a convex
    # cone), so each side is found by plain bisection.
    bounds = []
    for sense in (1, -1):
        if holds(sense * math.pi):
            bounds.append(math.pi)
            continue
        lo, hi = 0.0, math.pi
        while hi - lo > ANGLE_TOL:
            mid = 0.5 * (lo + hi)
            if holds(sense * mid):
                lo = mid
            else:
                hi = mid
        bounds.append(lo)
    return (-bounds[1], bounds[0])


def force_cone(d: JointDesign, goal_sinks, scale: float = 1.0, seated=None) -> tuple[float, float]:
    """Force directions withstood at every seated pose of the goal sinks (intersection)."""
    goal_sinks = [ContactMode(g) for g in goal_sinks]
    if not goal_sinks:
        raise StabilityError("no goal sinks")
    scene = scene_for(d, scale)
    poses = []
    if seated is not None:
        poses = [_as_q(q) for q in seated]
    else:
        for g in sorted(goal_sinks, key=ContactMode.sort_key):
            poses.extend(seated_poses(scene, g))
    lo, hi = -math.pi, math.pi
    for q in poses:
        a, b = pose_cone(scene, q)
        lo, hi = max(lo, a), min(hi, b)
    return (lo, hi)


def seated_summary(d: JointDesign, e: ErrorModel | None = None) -> StabilityMetrics:
    """Stability over the seated poses of the goal modes alone, without an insertion graph."""
    scales = e.scales() if e is not None else (1.0,)
    worst_rot = 0.0
    lo, hi = -math.pi, math.pi
    for s in scales:
        scene = scene_for(d, s)
        per_mode = [seated_poses(scene, g, fallback=False)
                    for g in sorted(scene.goal_modes, key=ContactMode.sort_key)]
        if not any(per_mode):
            raise StabilityError(f"no goal mode rests at scale {s:g}")
        for poses in filter(None, per_mode):
            worst_rot = max(worst_rot, max(pose_rotation(scene, q) for q in poses))
            for q in poses:
                a, b = pose_cone(scene, q)
                lo, hi = max(lo, a), min(hi, b)
    return StabilityMetrics(worst_rot, (lo, hi))


def _unique_poses(poses) -> list[np.ndarray]:
    out, keys = [], set()
    for q in poses:
        key = tuple(np.round(q, 7))
        if key not in keys:
            keys.add(key)
            out.append(np.asarray(q, dtype=float))
    return out


def goal_sink_poses(d: JointDesign, g: InsertionGraph) -> dict:
    """Rest poses in goal modes per (scale, mode); falls back to the mode's seated poses."""
    out = {}
    report = sink_report(g)
    for s, layer in sorted(g.layers.items()):
        scene = None
        for comp in report.per_scale[s]["sinks"]:
            for m in sorted(comp & layer.goals, key=ContactMode.sort_key):
                poses = layer.resting.get(m)
                if not poses:
                    scene = scene or scene_for(d, s)
                    try:
                        poses = seated_poses(scene, m)
                    except StabilityError:
                        continue
                out[(s, m)] = _unique_poses(poses)
    return out


def stability_summary(d: JointDesign, g: InsertionGraph, e: ErrorModel | None = None) -> StabilityMetrics:
    """Worst case over goal sinks and scales: largest rotation, intersected force cone."""
    sinks = goal_sink_poses(d, g)
    if not sinks:
        raise StabilityError("design has no goal sink")
    worst_rot = 0.0
    lo, hi = -math.pi, math.pi
    rows = []
    scenes: dict[float, Scene] = {}
    for (s, mode), poses in sorted(sinks.items(), key=lambda kv: (kv[0][0], kv[0][1].sort_key())):
        scene = scenes.setdefault(s, scene_for(d, s))
        rot = max(pose_rotation(scene, q) for q in poses)
        cones = [pose_cone(scene, q) for q in poses]
        a = max(c[0] for c in cones)
        b = min(c[1] for c in cones)
        rows.append({"scale": s, "mode": mode.label, "max_rotation": rot, "force_cone": [a, b]})
        worst_rot = max(worst_rot, rot)
        lo, hi = max(lo, a), min(hi, b)
    return StabilityMetrics(worst_rot, (lo, hi), rows)
