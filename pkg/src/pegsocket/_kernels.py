"""Compiled inner loops for the integrator: poses, contact signatures, projection, bisection."""
from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def world(points, q):
    c, s = math.cos(q[2]), math.sin(q[2])
    n = points.shape[0]
    W = np.empty((n, 2))
    for i in range(n):
        W[i, 0] = c * points[i, 0] - s * points[i, 1] + q[0]
        W[i, 1] = s * points[i, 0] + c * points[i, 1] + q[1]
    return W


@njit(cache=True)
def pair_mask(W, A, N, U, L, tol):
    """Bit ``i * ne + j`` is set when point i touches edge j."""
    ne = A.shape[0]
    mask = 0
    for i in range(W.shape[0]):
        for j in range(ne):
            rx = W[i, 0] - A[j, 0]
            ry = W[i, 1] - A[j, 1]
            g = rx * N[j, 0] + ry * N[j, 1]
            if abs(g) <= tol:
                s = rx * U[j, 0] + ry * U[j, 1]
                if s >= -tol and s <= L[j] + tol:
                    mask |= np.int64(1) << np.int64(i * ne + j)
    return mask


@njit(cache=True)
def _inside(px, py, poly):
    inside = False
    k = poly.shape[0]
    for a in range(k):
        b = (a + 1) % k
        y0, y1 = poly[a, 1], poly[b, 1]
        if (y0 > py) != (y1 > py):
            x = poly[a, 0] + (py - y0) * (poly[b, 0] - poly[a, 0]) / (y1 - y0)
            if px < x:
                inside = not inside
    return inside


@njit(cache=True)
def penetrates(W, poly, mouth_y, A, B, tol):
    """True when some point lies in socket material deeper than ``tol``."""
    for i in range(W.shape[0]):
        px, py = W[i, 0], W[i, 1]
        if py > mouth_y or _inside(px, py, poly):
            continue
        best = math.inf
        for j in range(A.shape[0]):
            dx, dy = B[j, 0] - A[j, 0], B[j, 1] - A[j, 1]
            t = ((px - A[j, 0]) * dx + (py - A[j, 1]) * dy) / (dx * dx + dy * dy)
            t = min(1.0, max(0.0, t))
            ex = px - A[j, 0] - t * dx
            ey = py - A[j, 1] - t * dy
            d = math.sqrt(ex * ex + ey * ey)
            if d < best:
                best = d
        if best > tol:
            return True
    return False


@njit(cache=True)
def free_configs(W, poly, mouth_y, A, B, tol):
    """Per configuration of ``W`` (K, n, 2): no point penetrates deeper than ``tol``."""
    K = W.shape[0]
    ok = np.empty(K, dtype=np.bool_)
    for k in range(K):
        ok[k] = not penetrates(W[k], poly, mouth_y, A, B, tol)
    return ok


@njit(cache=True)
def reproject(points, q, ip, ie, A, N, minv, iters):
    """Gauss-Newton pull of ``q`` back onto the pairs ``(ip[k], ie[k])`` in the metric."""
    k = ip.shape[0]
    q = q.copy()
    if k == 0:
        return q
    J = np.empty((k, 3))
    g = np.empty(k)
    for _ in range(iters):
        c, s = math.cos(q[2]), math.sin(q[2])
        worst = 0.0
        for r in range(k):
            p = points[ip[r]]
            ax = c * p[0] - s * p[1]
            ay = s * p[0] + c * p[1]
            nx, ny = N[ie[r], 0], N[ie[r], 1]
            g[r] = (ax + q[0] - A[ie[r], 0]) * nx + (ay + q[1] - A[ie[r], 1]) * ny
            J[r, 0] = nx
            J[r, 1] = ny
            J[r, 2] = ax * ny - ay * nx
            worst = max(worst, abs(g[r]))
        if worst < 1e-15:
            break
        JM = J * minv.reshape(1, 3)
        G = JM @ J.T
        lam = np.linalg.lstsq(G, g)[0]
        q -= JM.T @ lam
    return q


@njit(cache=True)
def path_point(points, q, vhat, h, ip, ie, A, N, minv):
    return reproject(points, q + h * vhat, ip, ie, A, N, minv, 3)


@njit(cache=True)
def state_ok(points, qt, mask0, poly, mouth_y, A, B, N, U, L, tol):
    W = world(points, qt)
    if penetrates(W, poly, mouth_y, A, B, tol):
        return False
    return pair_mask(W, A, N, U, L, tol) == mask0


@njit(cache=True)
def bisect_event(points, q, vhat, h, ip, ie, A, B, N, U, L, minv, mask0, poly, mouth_y, tol, eps):
    """Smallest travel in (0, h] where the contact signature changes."""
    lo, hi = 0.0, h
    for _ in range(80):
        if hi - lo <= eps:
            break
        mid = 0.5 * (lo + hi)
        qm = path_point(points, q, vhat, mid, ip, ie, A, N, minv)
        if state_ok(points, qm, mask0, poly, mouth_y, A, B, N, U, L, tol):
            lo = mid
        else:
            hi = mid
    return hi


@njit(cache=True)
def _rotation_ok(points, q, cx, cy, ang, poly, mouth_y, A, B, tol):
    c, s = math.cos(ang), math.sin(ang)
    rx, ry = q[0] - cx, q[1] - cy
    qt = np.empty(3)
    qt[0] = cx + c * rx - s * ry
    qt[1] = cy + s * rx + c * ry
    qt[2] = q[2] + ang
    W = world(points, qt)
    for i in range(W.shape[0]):
        if W[i, 1] > mouth_y + tol:
            return False
    return not penetrates(W, poly, mouth_y, A, B, tol)


@njit(cache=True)
def rotation_limit(points, q, cx, cy, sense, step, cap, poly, mouth_y, A, B, tol, ang_tol):
    """Largest angle in [0, cap] reachable turning about (cx, cy) without penetrating
    or lifting a point above the mouth; coarse sweep then bisection."""
    lo = 0.0
    hi = -1.0
    k = 1
    while True:
        a = min(k * step, cap)
        if not _rotation_ok(points, q, cx, cy, sense * a, poly, mouth_y, A, B, tol):
            hi = a
            break
        lo = a
        if a >= cap:
            return cap
        k += 1
    while hi - lo > ang_tol:
        mid = 0.5 * (lo + hi)
        if _rotation_ok(points, q, cx, cy, sense * mid, poly, mouth_y, A, B, tol):
            lo = mid
        else:
            hi = mid
    return lo
