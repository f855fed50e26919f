"""Contact kinematics: configurations that realize a contact mode and the inverse map.

A contact pair ``(i, j)`` constrains peg point ``c_i`` to lie on socket edge
``e_j``.  For a fixed rotation every pair is linear in the translation, which
is what all the solvers below exploit: three pairs over two non-parallel edges
eliminate the translation and leave ``A cos(theta) + B sin(theta) = C``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import linprog

from . import _kernels as _k
from .design import DesignError, JointDesign, scale_socket
from .geometry import GEOM_TOL, Config, cross2, normalize_angle, points_in_polygon

#: Number of rotation samples for one-parameter families.
THETA_SAMPLES = 721
#: Representatives kept per continuous family.
N_REPRESENTATIVES = 17
#: Rotations farther than this from the seat are not considered "seated".
GOAL_WINDOW = math.pi / 6
#: Clearance of the hover pose above the mouth, in mouth widths.
HOVER_CLEARANCE = 0.05


class KinematicsError(ValueError):
    """Raised when a contact mode cannot be solved numerically."""


class PenetrationError(ValueError):
    def __init__(self, point: int, edge: int, depth: float):
        super().__init__(f"point {point} penetrates edge {edge} by {depth:.3g}")
        self.point, self.edge, self.depth = point, edge, depth


class ContactPair(NamedTuple):
    point: int
    edge: int

    def __repr__(self) -> str:
        return f"p{self.point}e{self.edge}"


class ContactMode(frozenset):
    """Set of contact pairs; compares equal to any frozenset of the same tuples."""

    def __new__(cls, pairs: Iterable = ()):
        return super().__new__(cls, (ContactPair(int(i), int(j)) for i, j in pairs))

    def sorted(self) -> list[ContactPair]:
        return sorted(self)

    @property
    def label(self) -> str:
        if not self:
            return "{}"
        return "{" + ",".join(f"{p.point}-{p.edge}" for p in self.sorted()) + "}"

    def sort_key(self):
        return (len(self), tuple(self.sorted()))

    def __repr__(self) -> str:
        return f"ContactMode({self.label})"

    def with_pair(self, pair) -> "ContactMode":
        return ContactMode(set(self) | {tuple(pair)})

    def without(self, pair) -> "ContactMode":
        return ContactMode(set(self) - {tuple(pair)})


@dataclass(frozen=True)
class ConfigFamily:
    mode: ContactMode
    dof: int
    representatives: tuple[Config, ...]

    @property
    def empty(self) -> bool:
        return not self.representatives

    def __len__(self) -> int:
        return len(self.representatives)


class Scene:
    """A design at one manufacturing scale, with the arrays every solver needs.

    Edge indices ``0..m-1`` are hole edges; ``m`` and ``m + 1`` are the left and
    right rims (the socket's top face), which constrain motion but never appear
    in contact modes.
    """

    def __init__(self, design: JointDesign, scale: float = 1.0, tol: float = GEOM_TOL):
        self.design = design
        self.scale = float(scale)
        self.tol = tol
        sock = scale_socket(design.socket, scale) if scale != 1.0 else design.socket
        self.socket = sock
        v = np.array(sock.vertices, dtype=float)
        self.vertices = v
        self.m = len(v) - 1
        self.n = design.peg.n
        self.points = np.array(design.peg.points, dtype=float)
        self.tip = np.array(design.peg.tip, dtype=float)
        self.mouth_width = float(np.hypot(*(v[-1] - v[0])))
        self.mouth_y = 0.5 * (v[0, 1] + v[-1, 1])
        rim = 10.0 * max(self.mouth_width, 1.0)
        a = np.vstack([v[:-1], [[v[0, 0] - rim, v[0, 1]]], [v[-1]]])
        b = np.vstack([v[1:], [v[0]], [[v[-1, 0] + rim, v[-1, 1]]]])
        d = b - a
        self.A, self.B = a, b
        self.L = np.hypot(d[:, 0], d[:, 1])
        self.U = d / self.L[:, None]
        self.N = np.stack([-self.U[:, 1], self.U[:, 0]], axis=1)
        # Vertex k joins edge ``prev[k]`` (ending at it) and ``next[k]``.
        m = self.m
        self.vert_prev = [m] + list(range(m))
        self.vert_next = list(range(m)) + [m + 1]
        self.vert_convex = []
        for k in range(m + 1):
            turn = float(cross2(self.U[self.vert_prev[k]], self.U[self.vert_next[k]]))
            self.vert_convex.append(turn > 0.0)
        r2 = np.einsum("ij,ij->i", self.points, self.points)
        self.char_len = max(float(np.sqrt(r2.mean())), 1e-3 * max(self.mouth_width, 1.0))
        self.metric = np.array([1.0, 1.0, self.char_len**2])

    # -- poses -------------------------------------------------------------
    def world(self, q) -> np.ndarray:
        x, y, th = q
        c, s = math.cos(th), math.sin(th)
        p = self.points
        return np.stack([c * p[:, 0] - s * p[:, 1] + x, s * p[:, 0] + c * p[:, 1] + y], axis=1)

    def world_batch(self, Q: np.ndarray) -> np.ndarray:
        c, s = np.cos(Q[:, 2]), np.sin(Q[:, 2])
        px, py = self.points[:, 0][None], self.points[:, 1][None]
        x = c[:, None] * px - s[:, None] * py + Q[:, 0:1]
        y = s[:, None] * px + c[:, None] * py + Q[:, 1:2]
        return np.stack([x, y], axis=-1)

    def tip_world(self, q) -> np.ndarray:
        c, s = math.cos(q[2]), math.sin(q[2])
        t = self.tip
        return np.array([c * t[0] - s * t[1] + q[0], s * t[0] + c * t[1] + q[1]])

    # -- contact geometry --------------------------------------------------
    def gaps(self, W: np.ndarray):
        """Signed gaps and along-edge coordinates, shape (n, m + 2)."""
        rel = W[:, None, :] - self.A[None]
        g = rel[..., 0] * self.N[None, :, 0] + rel[..., 1] * self.N[None, :, 1]
        s = rel[..., 0] * self.U[None, :, 0] + rel[..., 1] * self.U[None, :, 1]
        return g, s

    def penetration(self, W: np.ndarray) -> tuple[float, int, int]:
        """Deepest penetration ``(depth, point, edge)``; depth <= 0 when free."""
        free = (W[:, 1] > self.mouth_y) | points_in_polygon(W, self.vertices)
        if free.all():
            return 0.0, -1, -1
        idx = np.nonzero(~free)[0]
        P = W[idx]
        d = self.B - self.A
        rel = P[:, None, :] - self.A[None]
        t = np.clip(np.einsum("kij,ij->ki", rel, d) / (self.L**2)[None], 0.0, 1.0)
        closest = self.A[None] + t[..., None] * d[None]
        dist = np.hypot(*(P[:, None, :] - closest).transpose(2, 0, 1))
        j = dist.argmin(axis=1)
        depth = dist[np.arange(len(idx)), j]
        k = int(depth.argmax())
        return float(depth[k]), int(idx[k]), int(j[k])

    def contact_pairs(self, W: np.ndarray, tol: float | None = None) -> list[tuple[int, int]]:
        """All touching pairs, rims included."""
        tol = self.tol if tol is None else tol
        g, s = self.gaps(W)
        hit = (np.abs(g) <= tol) & (s >= -tol) & (s <= self.L[None] + tol)
        ii, jj = np.nonzero(hit)
        return list(zip(ii.tolist(), jj.tolist()))

    def mode_of(self, W: np.ndarray, tol: float | None = None) -> ContactMode:
        return ContactMode(p for p in self.contact_pairs(W, tol) if p[1] < self.m)

    def free_batch(self, W: np.ndarray) -> np.ndarray:
        """Per-config flag: no point penetrates beyond tolerance.  W is (K, n, 2)."""
        W = np.ascontiguousarray(W, dtype=float)
        return _k.free_configs(W, self.vertices, self.mouth_y, self.A, self.B, self.tol)

    def hover_config(self, dx: float = 0.0, dtheta: float = 0.0, base: Config | None = None) -> Config:
        """Contact-free pose just above the mouth."""
        base = base or Config()
        th = base.theta + dtheta
        x = base.x + dx
        W = self.world((x, 0.0, th))
        y = self.mouth_y + HOVER_CLEARANCE * self.mouth_width - float(W[:, 1].min())
        return Config(x, y, th)

    @cached_property
    def goal_modes(self) -> list[ContactMode]:
        return goal_modes(self.design, self.scale, scene=self)


_SCENE_CACHE: dict[tuple[int, float], tuple[JointDesign, "Scene"]] = {}


def scene_for(d: JointDesign, scale: float = 1.0) -> Scene:
    """Shared :class:`Scene` for a design object, so cached mode data is reused."""
    key = (id(d), float(scale))
    hit = _SCENE_CACHE.get(key)
    if hit is not None and hit[0] is d:
        return hit[1]
    if len(_SCENE_CACHE) > 512:
        _SCENE_CACHE.clear()
    scene = Scene(d, scale)
    _SCENE_CACHE[key] = (d, scene)
    return scene


def _pair_arrays(scene: Scene, pairs: Sequence[tuple[int, int]]):
    idx_p = np.array([p[0] for p in pairs], dtype=int)
    idx_e = np.array([p[1] for p in pairs], dtype=int)
    n = scene.N[idx_e]
    c = scene.points[idx_p]
    a = scene.A[idx_e]
    beta = np.einsum("ij,ij->i", n, a)
    alpha = np.einsum("ij,ij->i", n, c)
    gamma = cross2(c, n)
    return idx_p, idx_e, n, beta, alpha, gamma


def _admissible(scene: Scene, Q: np.ndarray, pairs, band: float | None = None) -> np.ndarray:
    """Configs whose constrained points sit inside their segments and that penetrate nothing."""
    band = scene.tol if band is None else band
    if len(Q) == 0:
        return np.zeros(0, dtype=bool)
    W = scene.world_batch(Q)
    ok = scene.free_batch(W)
    for i, j in pairs:
        rel = W[:, i, :] - scene.A[j]
        s = rel @ scene.U[j]
        g = rel @ scene.N[j]
        ok &= (s >= band) & (s <= scene.L[j] - band) & (np.abs(g) <= 1e3 * scene.tol)
    return ok


def _spread(Q: np.ndarray, k: int = N_REPRESENTATIVES) -> np.ndarray:
    if len(Q) <= k:
        return Q
    idx = np.unique(np.round(np.linspace(0, len(Q) - 1, k)).astype(int))
    return Q[idx]


def _normal_rank(normals: np.ndarray) -> int:
    if len(normals) == 0:
        return 0
    for a, b in combinations(range(len(normals)), 2):
        if abs(float(cross2(normals[a], normals[b]))) > 1e-9:
            return 2
    return 1


def _trig_roots(A: float, B: float, C: float) -> list[float]:
    """Solutions of A cos t + B sin t = C in (-pi, pi]."""
    R = math.hypot(A, B)
    if R < 1e-12:
        if abs(C) < 1e-12:
            raise KinematicsError("rotation is unconstrained (degenerate geometry)")
        return []
    ratio = C / R
    if abs(ratio) > 1.0 + 1e-12:
        return []
    ratio = max(-1.0, min(1.0, ratio))
    phi = math.atan2(B, A)
    delta = math.acos(ratio)
    roots = [normalize_angle(phi + delta)]
    if delta > 1e-9:
        roots.append(normalize_angle(phi - delta))
    return sorted(roots)


def _translation_for(theta: float, n: np.ndarray, beta, alpha, gamma):
    b = beta - (math.cos(theta) * alpha + math.sin(theta) * gamma)
    t, *_ = np.linalg.lstsq(n, b, rcond=None)
    return t, float(np.abs(n @ t - b).max())


def solve_mode(d: JointDesign | Scene, mode, scale: float = 1.0) -> ConfigFamily:
    """Configurations realizing ``mode`` (point on line AND inside the segment, no penetration).

    The degrees of freedom left by the mode are ``3 - rank``; isolated
    solutions are returned exactly for rigid modes, continuous families are
    sampled with up to ``N_REPRESENTATIVES`` configurations.
    """
    scene = d if isinstance(d, Scene) else scene_for(d, scale)
    mode = ContactMode(mode)
    pairs = mode.sorted()
    k = len(pairs)
    if k == 0:
        return ConfigFamily(mode, 3, (scene.hover_config(),))
    for i, j in pairs:
        if not (0 <= i < scene.n and 0 <= j < scene.m):
            raise KinematicsError(f"pair ({i}, {j}) out of range in mode {mode.label}")
    _, idx_e, n, beta, alpha, gamma = _pair_arrays(scene, pairs)
    rank = _normal_rank(n)

    if rank == 2 and k >= 3:
        return ConfigFamily(mode, 0, _solve_rigid(scene, mode, pairs, n, beta, alpha, gamma))
    if rank == 2:  # two pairs on non-parallel edges: one family over theta
        thetas = np.linspace(-math.pi, math.pi, THETA_SAMPLES, endpoint=False) + math.pi / THETA_SAMPLES
        thetas = (thetas + math.pi) % (2 * math.pi) - math.pi
        Q = _two_pair_batch(n, beta, alpha, gamma, thetas)
        ok = _admissible(scene, Q, pairs)
        return ConfigFamily(mode, 1, tuple(Config.from_array(q) for q in _spread(Q[ok])))
    if k == 1:
        return ConfigFamily(mode, 2, tuple(Config.from_array(q) for q in _one_pair_family(scene, pairs[0])))
    return ConfigFamily(mode, 1, tuple(Config.from_array(q) for q in _parallel_family(scene, pairs, n, beta, alpha, gamma)))


def _solve_rigid(scene, mode, pairs, n, beta, alpha, gamma) -> tuple[Config, ...]:
    k = len(pairs)
    best = None
    for r1, r2, r3 in combinations(range(k), 3):
        z = np.array(
            [cross2(n[r2], n[r3]), cross2(n[r3], n[r1]), cross2(n[r1], n[r2])], dtype=float
        )
        cond = float(np.abs(z).max())
        if best is None or cond > best[0] + 1e-12:
            best = (cond, (r1, r2, r3), z)
    cond, rows, z = best
    if cond < 1e-12:
        raise KinematicsError(f"mode {mode.label} has no independent triple")
    rows = list(rows)
    A = float(z @ alpha[rows])
    B = float(z @ gamma[rows])
    C = float(z @ beta[rows])
    try:
        roots = _trig_roots(A, B, C)
    except KinematicsError as exc:
        raise KinematicsError(f"mode {mode.label}: {exc}") from None
    sols = []
    res_tol = 1e3 * scene.tol
    for th in roots:
        t, res = _translation_for(th, n, beta, alpha, gamma)
        if res > res_tol:
            continue
        sols.append([t[0], t[1], th])
    if not sols:
        return ()
    Q = np.array(sols)
    ok = _admissible(scene, Q, pairs)
    return tuple(Config.from_array(q) for q in Q[ok])


def _two_pair_batch(n, beta, alpha, gamma, thetas):
    c, s = np.cos(thetas), np.sin(thetas)
    b = beta[None] - (c[:, None] * alpha[None] + s[:, None] * gamma[None])
    inv = np.linalg.inv(n)
    t = b @ inv.T
    return np.column_stack([t, thetas])


def _one_pair_family(scene: Scene, pair) -> np.ndarray:
    i, j = pair
    thetas = np.linspace(-math.pi, math.pi, 72, endpoint=False)
    L = scene.L[j]
    svals = np.linspace(0.1, 0.9, 9) * L
    th, sv = np.meshgrid(thetas, svals, indexing="ij")
    th, sv = th.ravel(), sv.ravel()
    c, s = np.cos(th), np.sin(th)
    p = scene.points[i]
    rp = np.stack([c * p[0] - s * p[1], s * p[0] + c * p[1]], axis=1)
    on_edge = scene.A[j][None] + sv[:, None] * scene.U[j][None]
    t = on_edge - rp
    Q = np.column_stack([t, th])
    ok = _admissible(scene, Q, [pair])
    Q = Q[ok]
    # Prefer poses near the nominal orientation.
    order = np.argsort(np.abs(Q[:, 2]), kind="stable")
    return _spread(Q[order])


def _parallel_family(scene, pairs, n, beta, alpha, gamma) -> np.ndarray:
    """All pairs on parallel lines: rotation fixed by any two, slide free."""
    n0 = n[0]
    # Make all normals equal to n0 (flip rows with opposite normal).
    sign = np.sign(n @ n0)
    bb, aa, gg = beta * sign, alpha * sign, gamma * sign
    roots = None
    for r in range(1, len(pairs)):
        A = float(aa[0] - aa[r])
        B = float(gg[0] - gg[r])
        C = float(bb[0] - bb[r])
        rr = _trig_roots(A, B, C)
        if roots is None:
            roots = rr
        else:
            roots = [t for t in roots if any(abs(normalize_angle(t - u)) < 1e-9 for u in rr)]
    out = []
    u = np.array([n0[1], -n0[0]])
    for th in roots or []:
        off = float(bb[0] - (math.cos(th) * aa[0] + math.sin(th) * gg[0]))
        base = off * n0
        # Admissible slide interval from segment bounds.
        lo, hi = -np.inf, np.inf
        c, s = math.cos(th), math.sin(th)
        for i, j in pairs:
            p = scene.points[i]
            rp = np.array([c * p[0] - s * p[1], s * p[0] + c * p[1]])
            s0 = float((base + rp - scene.A[j]) @ scene.U[j])
            rate = float(u @ scene.U[j])
            b1 = (scene.tol - s0) / rate
            b2 = (scene.L[j] - scene.tol - s0) / rate
            lo, hi = max(lo, min(b1, b2)), min(hi, max(b1, b2))
        if not hi > lo:
            continue
        ss = np.linspace(lo, hi, 33)[1:-1]
        Q = np.column_stack([base[0] + ss * u[0], base[1] + ss * u[1], np.full(len(ss), th)])
        ok = _admissible(scene, Q, pairs)
        out.extend(Q[ok].tolist())
    return _spread(np.array(out).reshape(-1, 3))


def classify_config(d: JointDesign | Scene, q: Config, tol: float = GEOM_TOL, scale: float = 1.0) -> ContactMode:
    """Exactly the pairs whose point lies on its edge within ``tol``."""
    scene = d if isinstance(d, Scene) else scene_for(d, scale)
    qa = (q.x, q.y, q.theta) if isinstance(q, Config) else tuple(q)
    W = scene.world(qa)
    depth, i, j = scene.penetration(W)
    if depth > tol:
        raise PenetrationError(i, j, depth)
    return scene.mode_of(W, tol)


def seat_config(d: JointDesign | Scene, scale: float = 1.0) -> Config:
    """Seated pose for the full correspondence (closest to zero rotation)."""
    scene = d if isinstance(d, Scene) else scene_for(d, scale)
    goal = ContactMode(scene.design.goal_pairs)
    fam = solve_mode(scene, goal)
    if fam.empty:
        raise DesignError(f"goal unreachable at scale {scene.scale:g}")
    return min(fam.representatives, key=lambda q: (abs(q.theta), q.x, q.y))


def goal_modes(d: JointDesign | Scene, scale: float = 1.0, scene: Scene | None = None,
               reference: Config | None = None) -> list[ContactMode]:
    """Maximal realizable subsets of the correspondence at this scale.

    A subset counts when some pose within ``GOAL_WINDOW`` of the nominal seat
    realizes it without touching any edge outside the correspondence.
    """
    if scene is None:
        scene = d if isinstance(d, Scene) else scene_for(d, scale)
    corr = sorted(scene.design.goal_pairs)
    if reference is None:
        reference = _reference_seat(scene.design)
    found: list[frozenset] = []
    for size in range(len(corr), 0, -1):
        for sub in combinations(corr, size):
            s = frozenset(sub)
            if any(s < f for f in found):
                continue
            if goal_realizations(scene, s, reference):
                found.append(s)
    return sorted((ContactMode(f) for f in found), key=ContactMode.sort_key)


_REF_CACHE: dict[int, tuple[JointDesign, Config]] = {}


def _reference_seat(d: JointDesign) -> Config:
    key = id(d)
    hit = _REF_CACHE.get(key)
    if hit is not None and hit[0] is d:
        return hit[1]
    try:
        q = seat_config(d, 1.0)
    except (DesignError, KinematicsError):
        q = Config()
    if len(_REF_CACHE) > 256:
        _REF_CACHE.clear()
    _REF_CACHE[key] = (d, q)
    return q


def goal_realizations(scene: Scene, subset, reference: Config | None = None) -> list[Config]:
    """Poses realizing ``subset`` of the correspondence near the seat with no stray contacts."""
    if reference is None:
        reference = _reference_seat(scene.design)
    corr = scene.design.goal_pairs
    fam = solve_mode(scene, ContactMode(subset))
    out = []
    for q in fam.representatives:
        if abs(normalize_angle(q.theta - reference.theta)) > GOAL_WINDOW:
            continue
        W = scene.world((q.x, q.y, q.theta))
        if scene.mode_of(W) <= corr:
            out.append(q)
    return out


def constraint_rows(scene: Scene, q, pairs) -> np.ndarray:
    """Gap Jacobian rows ``[n_x, n_y, r x n]`` for the given pairs at pose q."""
    W = scene.world(q)
    rows = np.empty((len(pairs), 3))
    for r, (i, j) in enumerate(pairs):
        nrm = scene.N[j]
        arm = W[i] - np.array(q[:2])
        rows[r] = (nrm[0], nrm[1], arm[0] * nrm[1] - arm[1] * nrm[0])
    return rows


def pair_gaps(scene: Scene, q, pairs) -> np.ndarray:
    W = scene.world(q)
    return np.array([float((W[i] - scene.A[j]) @ scene.N[j]) for i, j in pairs])


def project_to_pairs(scene: Scene, q, pairs, iters: int = 4) -> np.ndarray:
    """Minimum-norm Gauss-Newton correction onto the pairs' lines."""
    q = np.array(q, dtype=float)
    if not pairs:
        return q
    Minv = 1.0 / scene.metric
    for _ in range(iters):
        g = pair_gaps(scene, q, pairs)
        if np.abs(g).max() < 1e-14:
            break
        J = constraint_rows(scene, q, pairs)
        JM = J * Minv[None]
        lam = np.linalg.lstsq(JM @ J.T, g, rcond=None)[0]
        q = q - JM.T @ lam
    return q


def mode_subset_validity(d: JointDesign | Scene, mode, scale: float = 1.0,
                         step: float = 1e-4) -> dict[ContactMode, bool]:
    """For a three-pair mode, whether each of its 8 subsets is realizable on its own.

    A subset ``S`` is valid when a pose exists with every pair of ``S`` in
    contact and the rest of the mode separated, found by moving along the
    free directions of ``S`` away from a configuration of the full mode.
    """
    scene = d if isinstance(d, Scene) else scene_for(d, scale)
    mode = ContactMode(mode)
    fam = solve_mode(scene, mode)
    result: dict[ContactMode, bool] = {}
    for r in range(len(mode) + 1):
        for sub in combinations(mode.sorted(), r):
            S = ContactMode(sub)
            if not S:
                result[S] = True
            elif S == mode:
                result[S] = not fam.empty
            else:
                result[S] = any(
                    _separates(scene, q, S, mode - S, step) for q in fam.representatives
                )
    return result


def _null_directions(J: np.ndarray) -> list[np.ndarray]:
    if len(J) == 0:
        basis = np.eye(3)
    else:
        _, sv, vt = np.linalg.svd(J)
        rank = int(np.sum(sv > 1e-10))
        basis = vt[rank:]
    dirs = []
    if len(basis) == 1:
        dirs = [basis[0], -basis[0]]
    else:
        k = len(basis)
        for a in range(16):
            ang = 2 * math.pi * a / 16
            if k == 2:
                dirs.append(math.cos(ang) * basis[0] + math.sin(ang) * basis[1])
            else:
                for b in range(-3, 4):
                    el = b * math.pi / 8
                    dirs.append(
                        math.cos(el) * (math.cos(ang) * basis[0] + math.sin(ang) * basis[1])
                        + math.sin(el) * basis[2]
                    )
    return dirs


def _escape_direction(scene: Scene, q0: np.ndarray, keep_pairs, drop) -> np.ndarray | None:
    """First-order motion keeping ``keep``, opening every ``drop`` gap and closing no other."""
    W = scene.world(q0)
    held = set(keep_pairs) | set(drop)
    others = [p for p in scene.contact_pairs(W) if p not in held]
    scale = 1.0 / np.sqrt(scene.metric)
    J_keep = constraint_rows(scene, q0, keep_pairs) * scale[None]
    J_out = constraint_rows(scene, q0, sorted(drop)) * scale[None]
    J_oth = constraint_rows(scene, q0, others) * scale[None]
    A_ub = np.vstack([-J_out, -J_oth])
    b_ub = np.concatenate([-np.ones(len(J_out)), np.zeros(len(J_oth))])
    res = linprog(np.zeros(3), A_ub=A_ub, b_ub=b_ub,
                  A_eq=J_keep if len(J_keep) else None, b_eq=np.zeros(len(J_keep)) if len(J_keep) else None,
                  bounds=[(-1e3, 1e3)] * 3, method="highs")
    if res.status != 0:
        return None
    x = res.x
    return x * scale / max(float(np.linalg.norm(x)), 1e-300)


def _separates(scene: Scene, q: Config, keep: ContactMode, drop, step: float) -> bool:
    q0 = np.array([q.x, q.y, q.theta])
    keep_pairs = keep.sorted()
    J = constraint_rows(scene, q0, keep_pairs)
    trials = [(dv / scene.metric**0.5, (step,)) for dv in _null_directions(J)]
    lp = _escape_direction(scene, q0, keep_pairs, drop)
    if lp is not None:
        trials.insert(0, (lp, (step, 0.1 * step, 10.0 * step)))
    for direction, steps in trials:
        for h in steps:
            qt = project_to_pairs(scene, q0 + h * direction, keep_pairs)
            if realizes_exactly(scene, qt, keep, drop):
                return True
    return False


def realizes_exactly(scene: Scene, q, keep, drop) -> bool:
    """Pose keeps every pair of ``keep`` (inside its segment) and separates ``drop``."""
    W = scene.world(q)
    if scene.penetration(W)[0] > scene.tol:
        return False
    g, s = scene.gaps(W)
    for i, j in keep:
        if abs(g[i, j]) > 10 * scene.tol or not (scene.tol <= s[i, j] <= scene.L[j] - scene.tol):
            return False
    for i, j in drop:
        inside = -scene.tol <= s[i, j] <= scene.L[j] + scene.tol
        if inside and g[i, j] <= scene.tol:
            return False
    return True
