"""Event-driven quasi-static insertion and disturbance simulation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .design import ErrorModel, JointDesign
from .geometry import Config
from .kinematics import ContactMode, PenetrationError, Scene, scene_for
from .mechanics import (
    EQ_TOL,
    EQUILIBRIUM,
    EXITED,
    RIM,
    SEP_TOL,
    TIMEOUT,
    TRANSITION,
    REST_TOL,
    QuasiStatic,
)

#: Penetration allowed anywhere along a trajectory.
MAX_PENETRATION = 1e-7


class Verdict(str, Enum):
    SEATED = "seated"
    STUCK = "stuck"
    EJECTED = "ejected"


class Disturbance(str, Enum):
    HOLDS = "holds"
    LEAVES = "leaves"


class SimulationError(RuntimeError):
    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class SimState:
    config: Config
    mode: ContactMode
    progress: float


@dataclass
class SimOutcome:
    verdict: Verdict
    mode: ContactMode
    trajectory: list[SimState] = field(default_factory=list)

    @property
    def final(self) -> SimState:
        return self.trajectory[-1]

    @property
    def mode_sequence(self) -> list[ContactMode]:
        """Contact modes at successive events, consecutive repeats removed."""
        seq: list[ContactMode] = []
        for s in self.trajectory:
            if not seq or seq[-1] != s.mode:
                seq.append(s.mode)
        return seq

    def dump(self) -> str:
        """Line records ``progress x y theta mode`` for plotting."""
        lines = [
            f"{s.progress:.9f} {s.config.x:.9f} {s.config.y:.9f} {s.config.theta:.9f} {s.mode.label}"
            for s in self.trajectory
        ]
        return "\n".join(lines) + "\n"


def _state(scene: Scene, q, progress: float) -> SimState:
    W = scene.world(q)
    depth, i, j = scene.penetration(W)
    if depth > MAX_PENETRATION:
        raise SimulationError(f"penetration {depth:.3g} of point {i} into edge {j}",
                              state=(progress, tuple(q)))
    return SimState(Config.from_array(q), scene.mode_of(W), progress)


def simulate_insertion(d: JointDesign, q0: Config, friction: float = 0.0,
                       max_travel: float | None = None, scale: float = 1.0,
                       force_angle: float = 0.0, record_steps: bool = False) -> SimOutcome:
    """Push the peg from ``q0`` with a unit tip force until it rests or leaves.

    The verdict is Seated when the resting mode is one of the goal modes at
    this scale, Stuck for any other rest (or when ``max_travel`` runs out), and
    Ejected once the peg is back above the mouth with nothing touching.
    """
    scene = scene_for(d, scale)
    qs = QuasiStatic(scene, force_angle=force_angle, friction=friction, max_travel=max_travel)
    q = q0.as_array() if isinstance(q0, Config) else np.asarray(q0, dtype=float)
    W = scene.world(q)
    depth, i, j = scene.penetration(W)
    if depth > scene.tol:
        raise PenetrationError(i, j, depth)
    goals = set(scene.goal_modes)
    traj = [_state(scene, q, 0.0)]
    travel = 0.0
    budget = qs.max_travel
    touched = bool(scene.contact_pairs(W))
    while True:
        st = qs.contact_state(q)
        steps: list | None = [] if record_steps else None
        if not st.pairs and abs(force_angle) < 1e-15 and friction == 0.0:
            o = qs.descend(q)
        else:
            qs.max_travel = budget - travel
            o = qs.advance(q, trace=steps)[0]
        for t, qq in steps or []:
            traj.append(_state(scene, qq, travel + t))
        travel += o.travel
        q = o.q
        if not steps or o.kind != EQUILIBRIUM:
            traj.append(_state(scene, q, travel))
        mode = traj[-1].mode
        touched |= bool(o.raw_pairs)
        if o.kind == EQUILIBRIUM:
            mode = o.mode
            traj[-1] = SimState(traj[-1].config, mode, traj[-1].progress)
            verdict = Verdict.SEATED if mode in goals else Verdict.STUCK
            return SimOutcome(verdict, mode, traj)
        if o.kind == EXITED:
            return SimOutcome(Verdict.EJECTED, mode, traj)
        if o.kind == TIMEOUT or travel >= budget:
            return SimOutcome(Verdict.STUCK, mode, traj)
        if o.kind in (TRANSITION, RIM):
            W = scene.world(q)
            if touched and not o.raw_pairs and float(W[:, 1].min()) > scene.mouth_y:
                return SimOutcome(Verdict.EJECTED, mode, traj)
            continue
        raise SimulationError(f"unexpected integrator outcome {o.kind}", state=(travel, tuple(q)))


def sample_entry_poses(d: JointDesign, e: ErrorModel, count: int = 25,
                       seed: int | None = None, scale: float = 1.0) -> list[Config]:
    """Hover poses spanning the (dx, dtheta) box: a square grid, or uniform draws when seeded."""
    from .graph import entry_offsets, entry_pose

    scene = scene_for(d, scale)
    if seed is None:
        k = max(1, int(round(math.sqrt(count))))
        offsets = entry_offsets(e, k)
    else:
        rng = np.random.default_rng(seed)
        offsets = [(float(rng.uniform(-e.dx, e.dx)), float(rng.uniform(-e.dtheta, e.dtheta)))
                   for _ in range(count)]
    return [entry_pose(scene, dx, dt) for dx, dt in offsets]


def keeps_contacts(qs: QuasiStatic, q, st=None) -> bool:
    """The motion under ``qs``'s force separates none of the current contacts.

    ``st`` may pass a precomputed contact state of ``q``.
    """
    st = qs.contact_state(q) if st is None else st
    if not st.pairs:
        return False
    for v, _, _ in qs.velocities(st):
        speed = qs._speed(v)
        if speed < EQ_TOL:
            continue
        if np.any(st.rows @ (v / speed) > SEP_TOL):
            return False
    return True


def simulate_disturbance(d: JointDesign, seated: Config, force_angle: float,
                         scale: float = 1.0) -> Disturbance:
    """Whether a seated peg withstands a unit tip force at ``force_angle``.

    Holds when the force keeps every seated contact and the peg either stays
    put or slides without leaving the goal modes, or when the motion it starts
    comes to rest in another goal mode.
    """
    scene = scene_for(d, scale)
    goals = set(scene.goal_modes)
    q = seated.as_array() if isinstance(seated, Config) else np.asarray(seated, dtype=float)
    W = scene.world(q)
    if scene.penetration(W)[0] > scene.tol or scene.mode_of(W, REST_TOL) not in goals:
        raise ValueError("configuration is not seated in a goal mode")
    qs = QuasiStatic(scene, force_angle=force_angle, max_travel=2.0 * scene.mouth_width)
    kept = keeps_contacts(qs, q)
    for _ in range(64):
        o = qs.advance(q)[0]
        if o.kind == EQUILIBRIUM:
            return Disturbance.HOLDS if o.mode in goals else Disturbance.LEAVES
        if o.kind in (EXITED, TIMEOUT):
            return Disturbance.LEAVES
        if kept and o.mode not in goals:
            return Disturbance.LEAVES
        q = o.q
    return Disturbance.LEAVES
