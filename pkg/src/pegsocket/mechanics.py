"""Quasi-static frictionless motion of the peg under a constant tip force.

With active contacts ``J v >= 0`` the instantaneous velocity is the
metric projection of the applied wrench onto the feasible cone,

    v = M^-1 (w + J^T lam),  lam = argmin_{lam >= 0} |M^-1/2 (w + J^T lam)|,

solved as a non-negative least squares problem.  ``M = diag(1, 1, L^2)`` with
``L`` the RMS radius of the contact points.  A point pressed into a reflex
socket corner is constrained by either face; each choice is solved and the
projection closest to the free motion wins, ties are all returned.

Without any contact the peg is carried rigidly along the force direction
(the gripper holds its orientation).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.optimize import lsq_linear, nnls

from . import _kernels as _k
from .kinematics import ContactMode, Scene

EQUILIBRIUM = "equilibrium"
TRANSITION = "transition"
EXITED = "exited"
TIMEOUT = "timeout"
RIM = "rim"

#: Metric speed below which the peg is in equilibrium.
EQ_TOL = 1e-9
#: Normalized gap rate above which a contact is separating.
SEP_TOL = 1e-7
#: Gap below which a pair counts as closed once the peg rests.
REST_TOL = 1e-7
#: Integration step, in mouth widths.
STEP_FRACTION = 0.01


def _kkt_ok(A, b, lam, tol: float = 1e-10) -> bool:
    """Optimality of ``lam`` for min |A lam - b| with lam >= 0."""
    g = A.T @ (A @ lam - b)
    return bool(np.all(g >= -tol) and np.all(np.abs(g[lam > 0]) <= tol))


def force_direction(angle: float) -> np.ndarray:
    """Unit force rotated by ``angle`` from the insertion direction (0, -1)."""
    return np.array([math.sin(angle), -math.cos(angle)])


@dataclass
class ContactState:
    q: np.ndarray
    W: np.ndarray
    pairs: frozenset  # touching pairs incl. rims
    rows: np.ndarray  # (k, 3) gap Jacobian rows
    row_pairs: list  # pair for each row
    groups: list  # (row_a, row_b, point) reflex-corner disjunctions
    arms: np.ndarray  # (k, 2) contact point minus peg origin, per row

    @property
    def mode(self) -> ContactMode:
        return ContactMode(p for p in self.pairs if p[1] < self._m)

    _m: int = 0

    @property
    def rim(self) -> bool:
        return any(p[1] >= self._m for p in self.pairs)


@dataclass
class Outcome:
    kind: str
    q: np.ndarray
    mode: ContactMode
    start_mode: ContactMode
    velocity: np.ndarray | None = None
    travel: float = 0.0
    rim: bool = False
    raw_pairs: frozenset = field(default_factory=frozenset)


class QuasiStatic:
    """Motion law and event-driven integrator for one scene and force direction."""

    def __init__(self, scene: Scene, force_angle: float = 0.0, friction: float = 0.0,
                 step: float | None = None, max_travel: float | None = None):
        self.scene = scene
        self.set_force_angle(force_angle)
        self.friction = float(friction)
        if self.friction < 0:
            raise ValueError("friction must be >= 0")
        self.h = step if step is not None else STEP_FRACTION * scene.mouth_width
        self.max_travel = max_travel if max_travel is not None else 10.0 * scene.mouth_width
        self.Minv = 1.0 / scene.metric
        self.Mhalf_inv = 1.0 / np.sqrt(scene.metric)
        m = scene.m
        self._corner = {}
        for k in range(m + 1):
            self._corner[frozenset((scene.vert_prev[k], scene.vert_next[k]))] = k

    def set_force_angle(self, angle: float) -> None:
        self.force_angle = float(angle)
        self.f = force_direction(self.force_angle)

    # -- contact state -------------------------------------------------------
    def contact_state(self, q) -> ContactState:
        sc = self.scene
        q = np.asarray(q, dtype=float)
        W = sc.world(q)
        pairs = sc.contact_pairs(W)
        by_point: dict[int, list[int]] = {}
        for i, j in pairs:
            by_point.setdefault(i, []).append(j)
        rows, row_pairs, groups, arms = [], [], [], []
        for i, edges in sorted(by_point.items()):
            arm = W[i] - q[:2]
            start = len(rows)
            for j in sorted(edges):
                nrm = sc.N[j]
                rows.append((nrm[0], nrm[1], arm[0] * nrm[1] - arm[1] * nrm[0]))
                row_pairs.append((i, j))
                arms.append(arm)
            if len(edges) == 2:
                k = self._corner.get(frozenset(edges))
                if k is not None and not sc.vert_convex[k]:
                    groups.append((start, start + 1, i))
        st = ContactState(q, W, frozenset(pairs), np.array(rows).reshape(-1, 3), row_pairs, groups,
                          np.array(arms).reshape(-1, 2))
        st._m = sc.m
        return st

    def wrench(self, q, W=None) -> np.ndarray:
        tip = self.scene.tip_world(q)
        arm = tip - np.asarray(q[:2])
        f = self.f
        return np.array([f[0], f[1], arm[0] * f[1] - arm[1] * f[0]])

    # -- motion law ----------------------------------------------------------
    def _project(self, w: np.ndarray, J: np.ndarray):
        if len(J) == 0:
            return self.Minv * w, np.zeros(0)
        A = (J * self.Mhalf_inv[None]).T
        b = -self.Mhalf_inv * w
        lam, _ = nnls(A, b)
        if not _kkt_ok(A, b, lam):
            # scipy's nnls can stop early on underdetermined systems.
            lam = lsq_linear(A, b, bounds=(0.0, np.inf), method="bvls", tol=1e-14).x
        return self.Minv * (w + J.T @ lam), lam

    def velocities(self, st: ContactState) -> list[tuple[np.ndarray, list[int], np.ndarray]]:
        """Candidate velocities ``(v, rows used, multipliers)``; more than one only on ties."""
        w = self.wrench(st.q)
        if not st.pairs:
            return [(np.array([self.f[0], self.f[1], 0.0]), [], np.zeros(0))]
        J = st.rows
        grouped = {r for a, b, _ in st.groups for r in (a, b)}
        base = [r for r in range(len(J)) if r not in grouped]
        v, lam = self._solve(w, J, base, st.arms)
        bad = [g for g in st.groups if not self._corner_ok(st, v, g)]
        if not bad:
            return [(v, base, lam)]
        vfree = self.Minv * w
        cands = []
        for choice in product(*[(a, b) for a, b, _ in bad]):
            rows = sorted(set(base) | set(choice))
            vc, lc = self._solve(w, J, rows, st.arms)
            if all(self._corner_ok(st, vc, g) for g in st.groups):
                diff = vc - vfree
                cands.append((float(np.sum(diff * diff * self.scene.metric)), rows, vc, lc))
        if not cands:
            rows = list(range(len(J)))
            vc, lc = self._solve(w, J, rows, st.arms)
            return [(vc, rows, lc)]
        cands.sort(key=lambda c: (c[0], c[1]))
        best = cands[0][0]
        return [(vc, rows, lc) for d, rows, vc, lc in cands if d <= best + 1e-12]

    def _solve(self, w, J, rows, arms=None):
        Jr = J[rows] if rows else np.zeros((0, 3))
        v, lam = self._project(w, Jr)
        if self.friction > 0 and len(rows) and arms is not None:
            v, lam = self._with_friction(w, Jr, arms[rows], v, lam)
        return v, lam

    def _corner_ok(self, st: ContactState, v, group) -> bool:
        a, b, i = group
        arm = st.W[i] - st.q[:2]
        u = np.array([v[0] - v[2] * arm[1], v[1] + v[2] * arm[0]])
        na = st.rows[a][:2]
        nb = st.rows[b][:2]
        return bool(na @ u >= -1e-12 or nb @ u >= -1e-12)

    def _with_friction(self, w, Jr, arms, v, lam):
        """Approximate Coulomb friction by fixed-point iteration on sliding contacts.

        Each loaded contact adds ``-mu * lam`` along its slip direction.  When
        friction would reverse a slip the contact sticks and the peg stops.
        """
        T = np.column_stack([Jr[:, 1], -Jr[:, 0]])
        T = np.column_stack([T, arms[:, 0] * T[:, 1] - arms[:, 1] * T[:, 0]])
        slip = T @ v
        for _ in range(8):
            sgn = np.where(lam > 1e-12, np.sign(slip), 0.0)
            v_new, lam_new = self._project(w - self.friction * (T.T @ (lam * sgn)), Jr)
            slip_new = T @ v_new
            if np.any((sgn != 0) & (slip_new * sgn < -1e-12)):
                return np.zeros(3), lam_new
            if np.allclose(v_new, v, atol=1e-13):
                return v_new, lam_new
            v, lam, slip = v_new, lam_new, slip_new
        return v, lam

    # -- integration ------------------------------------------------------------
    def descend(self, q0) -> Outcome:
        """Carry the peg straight along the force until the first contact."""
        sc = self.scene
        q0 = np.asarray(q0, dtype=float)
        st0 = self.contact_state(q0)
        if st0.pairs:
            return Outcome(TRANSITION, q0, st0.mode, st0.mode, rim=st0.rim, raw_pairs=st0.pairs)
        f = self.f
        W = st0.W
        g, s = sc.gaps(W)
        rate_g = sc.N @ f  # gap change per unit travel
        rate_s = sc.U @ f
        best = math.inf
        with np.errstate(divide="ignore", invalid="ignore"):
            h = np.where(rate_g[None] < -1e-15, -g / rate_g[None], np.inf)
            s_hit = s + h * rate_s[None]
            hit = (h >= 0) & (s_hit >= 0) & (s_hit <= sc.L[None])
        if hit.any():
            best = float(h[hit].min())
        if not math.isfinite(best):
            return Outcome(EXITED, q0, ContactMode(), ContactMode())
        q = q0 + np.array([f[0], f[1], 0.0]) * best
        st = self.contact_state(q)
        kind = RIM if st.rim and not st.mode else TRANSITION
        return Outcome(kind, q, st.mode, ContactMode(), velocity=np.array([f[0], f[1], 0.0]),
                       travel=best, rim=st.rim, raw_pairs=st.pairs)

    def advance(self, q, branch: bool = False, trace: list | None = None) -> list[Outcome]:
        """Follow the motion from ``q`` until the touching pairs change or the peg rests."""
        st = self.contact_state(q)
        cands = self.velocities(st)
        if not branch:
            cands = cands[:1]
        return [self._follow(st, v, rows, trace) for v, rows, _ in cands]

    def _speed(self, v) -> float:
        return math.sqrt(float(np.sum(v * v * self.scene.metric)))

    def _slide_index(self, slide):
        ip = np.array([p[0] for p in slide], dtype=np.int64)
        ie = np.array([p[1] for p in slide], dtype=np.int64)
        return ip, ie

    def _mask(self, W) -> int:
        sc = self.scene
        return int(_k.pair_mask(W, sc.A, sc.N, sc.U, sc.L, sc.tol))

    def _rest(self, q, mode0, witness, travel) -> Outcome:
        """Equilibrium outcome; pairs within ``REST_TOL`` count as closed at rest."""
        sc = self.scene
        raw = frozenset(sc.contact_pairs(sc.world(q), REST_TOL))
        mode = ContactMode(p for p in raw if p[1] < sc.m)
        return Outcome(EQUILIBRIUM, q, mode, mode0, witness, travel,
                       any(p[1] >= sc.m for p in raw), raw)

    def _follow(self, st: ContactState, v, rows, trace) -> Outcome:
        sc = self.scene
        pts, A, B, N, U, L = sc.points, sc.A, sc.B, sc.N, sc.U, sc.L
        poly, tol, minv = sc.vertices, sc.tol, self.Minv
        mode0 = st.mode
        pairs0 = st.pairs
        mask0 = self._mask(st.W)
        q = st.q.copy()
        speed = self._speed(v)
        if speed < EQ_TOL:
            return self._rest(q, mode0, np.zeros(3), 0.0)
        travel = 0.0
        h = self.h
        eps = 1e-12 * max(1.0, sc.mouth_width)
        witness = v / speed
        free = not pairs0
        while True:
            vhat = v / speed
            slide = []
            if len(rows):
                rates = st.rows[rows] @ vhat
                slide = [st.row_pairs[r] for r, rate in zip(rows, rates) if rate <= SEP_TOL]
            ip, ie = self._slide_index(slide)
            qt = _k.path_point(pts, q, vhat, h, ip, ie, A, N, minv)
            if not _k.state_ok(pts, qt, mask0, poly, sc.mouth_y, A, B, N, U, L, tol):
                hit = _k.bisect_event(pts, q, vhat, h, ip, ie, A, B, N, U, L, minv, mask0,
                                      poly, sc.mouth_y, tol, eps)
                qn = _k.path_point(pts, q, vhat, hit, ip, ie, A, N, minv)
                raw = frozenset(sc.contact_pairs(sc.world(qn)))
                travel += hit
                if trace is not None:
                    trace.append((travel, qn.copy()))
                mode = ContactMode(p for p in raw if p[1] < sc.m)
                return Outcome(TRANSITION, qn, mode, mode0, witness, travel,
                               any(p[1] >= sc.m for p in raw), raw)
            q = qt
            travel += h
            if trace is not None:
                trace.append((travel, q.copy()))
            if free:
                low = float(sc.world(q)[:, 1].min())
                if (self.f[1] > 0 and low > sc.mouth_y + 0.05 * sc.mouth_width) or (
                        low > sc.mouth_y + 2.0 * sc.mouth_width):
                    return Outcome(EXITED, q, mode0, mode0, witness, travel, False, pairs0)
            if travel > self.max_travel:
                return Outcome(TIMEOUT, q, mode0, mode0, witness, travel, st.rim, pairs0)
            st = self.contact_state(q)
            v_new, rows, _ = self.velocities(st)[0]
            speed_new = self._speed(v_new)
            if speed_new < EQ_TOL:
                return self._rest(q, mode0, witness, travel)
            if float(np.sum(v_new * v * sc.metric)) < 0.0:
                h *= 0.5
                if h < 1e-10 * sc.mouth_width:
                    return self._rest(q, mode0, witness, travel)
            v, speed = v_new, speed_new
