"""Reproducible design generators: random funnels, hand-built examples and sweep seeds."""
from __future__ import annotations

import numpy as np

from .design import Correspondence, JointDesign, PegDesign, SocketDesign, validate_design
from .optimize import correspondence_patterns


def _funnel_vertices(angles_deg, lengths) -> np.ndarray:
    """Polyline with the given edge directions, closed back onto the mouth line."""
    ang = np.radians(np.asarray(angles_deg, dtype=float))
    d = np.column_stack([np.cos(ang), np.sin(ang)])
    L = np.asarray(lengths, dtype=float).copy()
    down = d[:, 1] < 0
    up = d[:, 1] > 0
    drop = -float((L[down] * d[down, 1]).sum())
    rise = float((L[up] * d[up, 1]).sum())
    L[up] *= drop / rise
    V = np.vstack([[0.0, 0.0], np.cumsum(L[:, None] * d, axis=0)])
    V[-1, 1] = 0.0
    V[:, 0] -= 0.5 * (V[0, 0] + V[-1, 0])
    return V / (V[-1, 0] - V[0, 0])


def seated_design(V, W, corr: Correspondence, tip=None, bump_radius: float = 0.02) -> JointDesign:
    """Design from socket vertices and the seated world positions of the points."""
    W = np.asarray(W, dtype=float)
    c = W.mean(axis=0)
    tip = c if tip is None else np.asarray(tip, dtype=float)
    return JointDesign(PegDesign(W - c, tip - c, bump_radius), SocketDesign(V), corr)


def _place_points(V, n: int, corr: Correspondence, rng) -> np.ndarray | None:
    """Matched points in the deeper part of their edges; a spare point floats inside."""
    W = np.zeros((n, 2))
    matched = dict(corr.pairs)
    for i in range(n):
        if i in matched:
            j = matched[i]
            down = V[j + 1, 1] < V[j, 1]
            f = rng.uniform(0.45, 0.8) if down else rng.uniform(0.2, 0.55)
            W[i] = V[j] + f * (V[j + 1] - V[j])
    spare = [i for i in range(n) if i not in matched]
    for i in spare:
        prev = max([k for k in matched if k < i], default=None)
        nxt = min([k for k in matched if k > i], default=None)
        anchors = [W[k] for k in (prev, nxt) if k is not None]
        base = np.mean(anchors, axis=0)
        W[i] = base + np.array([0.0, 0.05])
    return W


def random_funnel(rng: np.random.Generator, n: int = 3, m: int | None = None,
                  corr: Correspondence | None = None, max_tries: int = 50) -> JointDesign:
    """Convex funnel socket with each matched point on its edge.

    Edge directions rise monotonically from steeply down on the left to steeply
    up on the right, at least 8 degrees apart, so the hole is convex.
    """
    m = n if m is None else m
    if corr is None:
        corr = correspondence_patterns(n, m)[0] if n != m else Correspondence.diagonal(n)
    for _ in range(max_tries):
        angles = np.sort(rng.uniform(-80.0, 80.0, m))
        if m >= 2 and np.min(np.diff(angles)) < 8.0:
            continue
        if not (angles[0] < -10.0 and angles[-1] > 10.0):
            continue
        lengths = rng.uniform(0.5, 1.5, m)
        V = _funnel_vertices(angles, lengths)
        W = _place_points(V, n, corr, rng)
        d = seated_design(V, W, corr)
        if validate_design(d).ok:
            return d
    raise RuntimeError("could not draw a valid funnel")


def funnel_corpus(count: int, seed: int = 0, sizes=(2, 3, 4)) -> list[JointDesign]:
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        n = sizes[k % len(sizes)]
        out.append(random_funnel(rng, n))
    return out


def jitter_points(d: JointDesign, sigma: float, rng: np.random.Generator) -> JointDesign | None:
    """Copy of ``d`` with Gaussian noise on the peg points; None if the result is invalid.

    Seated designs fit their socket exactly, so several contacts can close at
    the same instant; a small jitter removes such coincidences.
    """
    P = d.peg.points + rng.normal(0.0, sigma, d.peg.points.shape)
    out = JointDesign(PegDesign(P, d.peg.tip, d.peg.bump_radius), d.socket, d.correspondence)
    return out if validate_design(out).ok else None


# -- hand-built examples -----------------------------------------------------------


def v_socket() -> JointDesign:
    """Two points on the walls of a V."""
    V = np.array([[-0.5, 0.0], [0.0, -0.6], [0.5, 0.0]])
    W = np.array([[-0.25, -0.3], [0.25, -0.3]])
    return seated_design(V, W, Correspondence.diagonal(2))


def wedge_trap() -> JointDesign:
    """A funnel whose steep left wall meets a shallow shelf: a tilted peg lodges its
    left point in the corner above the seat."""
    V = _funnel_vertices([-62.0, -10.0, 18.0, 70.0], [0.9, 0.35, 0.35, 0.9])
    corr = Correspondence.diagonal(4)
    W = np.array([V[j] + f * (V[j + 1] - V[j]) for j, f in enumerate((0.75, 0.5, 0.5, 0.25))])
    return seated_design(V, W, corr)


def table_seed(n: int, m: int) -> JointDesign:
    """Seed designs for the sweep cells of the results table."""
    rng = np.random.default_rng(1000 + 10 * n + m)
    corr = correspondence_patterns(n, m)[0] if n != m else Correspondence.diagonal(n)
    return random_funnel(rng, n, m, corr)


def seed_family(seed: int = 0):
    """Socket family for :func:`pegsocket.optimize.sweep_mn`: one funnel per cell and pattern."""

    def family(n: int, m: int, corr: Correspondence):
        rng = np.random.default_rng([seed, n, m, *sorted(x for p in corr.pairs for x in p)])
        try:
            return random_funnel(rng, n, m, corr)
        except RuntimeError:
            return None

    return family


__all__ = [
    "funnel_corpus",
    "jitter_points",
    "random_funnel",
    "seated_design",
    "seed_family",
    "table_seed",
    "v_socket",
    "wedge_trap",
]
