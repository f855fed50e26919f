"""Independent oracles shared by the test modules.

Everything here works from the raw design arrays (points, vertices) with its
own rotation and edge-normal formulas, so it does not share code paths with
the solvers under test.
"""
import math
from itertools import combinations

import numpy as np
from scipy.optimize import brentq, linprog

from pegsocket.design import Correspondence, JointDesign, PegDesign
from pegsocket.geometry import socket_clearances
from pegsocket.kinematics import ContactMode


def rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def edge_frames(V):
    """Unit tangents, left normals and lengths of the polyline edges."""
    D = np.diff(np.asarray(V, float), axis=0)
    L = np.linalg.norm(D, axis=1)
    U = D / L[:, None]
    return U, np.stack([-U[:, 1], U[:, 0]], axis=1), L


def world(d, q):
    return np.asarray(d.peg.points, float) @ rotation(q[2]).T + np.asarray(q[:2], float)


def sub_peg(d, mode):
    """The design restricted to the points named in ``mode`` (points renumbered)."""
    pts = sorted({i for i, _ in mode})
    idx = {i: k for k, i in enumerate(pts)}
    peg = PegDesign(np.asarray(d.peg.points)[pts], d.peg.tip, d.peg.bump_radius)
    pairs = frozenset((idx[i], j) for i, j in mode)
    return JointDesign(peg, d.socket, Correspondence(pairs)), ContactMode(pairs)


def pair_residuals(d, q, pairs):
    """Signed gap and arc-length position of each pair's point on its edge."""
    V = np.asarray(d.socket.vertices, float)
    U, N, _ = edge_frames(V)
    W = world(d, q)
    gaps = np.array([(W[i] - V[j]) @ N[j] for i, j in pairs])
    pos = np.array([(W[i] - V[j]) @ U[j] for i, j in pairs])
    return gaps, pos


def admissible(d, q, pairs, band=1e-9, gap_tol=1e-7, pen_tol=1e-7):
    V = np.asarray(d.socket.vertices, float)
    _, _, L = edge_frames(V)
    gaps, pos = pair_residuals(d, q, pairs)
    if np.any(np.abs(gaps) > gap_tol):
        return False
    if any(not (band <= s <= L[j] - band) for s, (_, j) in zip(pos, pairs)):
        return False
    return socket_clearances(world(d, q), V).min() >= -pen_tol


def rigid_solutions(d, pairs, grid=20000):
    """Isolated poses for three or more pairs, by a dense theta scan.

    For fixed theta the pair constraints are linear in (x, y); three of them
    are consistent exactly when a 3x3 determinant vanishes.  Sign changes on
    the grid are refined with brentq, the translation recovered by least
    squares, and every remaining pair, segment bound and penetration checked.
    """
    pairs = sorted(pairs)
    P = np.asarray(d.peg.points, float)
    V = np.asarray(d.socket.vertices, float)
    _, N, _ = edge_frames(V)
    n = np.array([N[j] for _, j in pairs])
    c = np.array([P[i] for i, _ in pairs])
    a = np.array([V[j] for _, j in pairs])
    beta = np.einsum("ij,ij->i", n, a)
    nc = np.einsum("ij,ij->i", n, c)
    nxc = n[:, 1] * c[:, 0] - n[:, 0] * c[:, 1]

    def rhs(th, rows):
        # n . (a - R(th) c)
        return beta[rows] - (math.cos(th) * nc[rows] + math.sin(th) * nxc[rows])

    tri = max(combinations(range(len(pairs)), 3),
              key=lambda r: abs(np.linalg.det(np.column_stack([n[list(r)], np.ones(3)]))))
    tri = list(tri)
    cof = np.array([np.linalg.det(np.delete(n[tri], k, axis=0)) * (-1) ** (k + 2) for k in range(3)])

    def det(th):
        return float(cof @ rhs(th, tri))

    ths = np.linspace(-math.pi, math.pi, grid + 1)
    f = cof @ (beta[tri][:, None] - np.outer(nc[tri], np.cos(ths)) - np.outer(nxc[tri], np.sin(ths)))
    roots = []
    for k in range(grid):
        if f[k] == 0.0:
            roots.append(ths[k])
        elif f[k] * f[k + 1] < 0:
            # Re-evaluate the bracket; the vectorized scan can differ in the last bit.
            fa, fb = det(ths[k]), det(ths[k + 1])
            if fa == 0.0 or fb == 0.0:
                roots.append(ths[k] if fa == 0.0 else ths[k + 1])
            elif fa * fb < 0:
                roots.append(brentq(det, ths[k], ths[k + 1], xtol=1e-15))
            else:
                roots.append(ths[k] if abs(fa) < abs(fb) else ths[k + 1])
    sols = []
    for th in roots:
        t, *_ = np.linalg.lstsq(n, rhs(th, slice(None)), rcond=None)
        q = (t[0], t[1], th)
        if admissible(d, q, pairs):
            sols.append(q)
    return sols


def project_pairs(d, q, pairs, iters=30):
    """Gauss-Newton onto the pair lines, minimum-norm steps."""
    V = np.asarray(d.socket.vertices, float)
    _, N, _ = edge_frames(V)
    P = np.asarray(d.peg.points, float)
    q = np.array(q, float)
    for _ in range(iters):
        g, _ = pair_residuals(d, q, pairs)
        if np.abs(g).max() < 1e-14:
            break
        dR = rotation(q[2] + math.pi / 2)
        J = np.array([[N[j][0], N[j][1], N[j] @ (dR @ P[i])] for i, j in pairs])
        q = q - np.linalg.lstsq(J, g, rcond=None)[0]
    return q


def subset_reachable(d, mode, q0, samples=3000, radius=1e-3, seed=0):
    """Random-sampling oracle: does some pose near ``q0`` touch exactly ``subset``?

    Returns a dict over all subsets of ``mode``.  A pose counts for subset S
    when S's pairs are on their segments, the rest of ``mode`` is strictly
    separated and nothing penetrates.
    """
    rng = np.random.default_rng(seed)
    mode = sorted(mode)
    V = np.asarray(d.socket.vertices, float)
    out = {}
    for r in range(len(mode) + 1):
        for S in combinations(mode, r):
            S = list(S)
            drop = [p for p in mode if p not in S]
            found = not drop
            for _ in range(samples if drop else 0):
                q = np.asarray(q0, float) + rng.uniform(-radius, radius, 3)
                if S:
                    q = project_pairs(d, q, S)
                    if not admissible(d, q, S, gap_tol=1e-12):
                        continue
                elif socket_clearances(world(d, q), V).min() < 0:
                    continue
                g, _ = pair_residuals(d, q, drop)
                if g.min() > 1e-12:
                    found = True
                    break
            out[ContactMode(S)] = found
    return out


def in_cone(rows, w):
    """Linear feasibility: ``-w`` is a nonnegative combination of the given rows."""
    rows = np.atleast_2d(rows)
    res = linprog(np.zeros(len(rows)), A_eq=rows.T, b_eq=-np.asarray(w, float),
                  bounds=[(0, None)] * len(rows), method="highs")
    return res.status == 0
