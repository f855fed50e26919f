import math

import numpy as np
import pytest

from pegsocket.design import SocketDesign
from pegsocket.geometry import (
    Config,
    ContactKind,
    GeometryError,
    Segment,
    apply_config,
    compose,
    point_segment_contact,
    rotate_about,
    socket_clearance,
)


def _matrix(theta):
    # Independent 2x2 rotation built from a half-angle product.
    h = theta / 2.0
    half = np.array([[math.cos(h), -math.sin(h)], [math.sin(h), math.cos(h)]])
    return half @ half


def test_apply_config_identity():
    assert np.allclose(apply_config(Config(), [3.0, 4.0]), [3.0, 4.0])


def test_apply_config_quarter_turn():
    assert np.allclose(apply_config(Config(0, 0, math.pi / 2), [1.0, 0.0]), [0.0, 1.0], atol=1e-15)


def test_apply_config_matches_matrix_oracle(rng):
    for _ in range(200):
        q = Config(*rng.uniform(-5, 5, 2), rng.uniform(-math.pi, math.pi))
        p = rng.uniform(-3, 3, 2)
        expect = _matrix(q.theta) @ p + np.array([q.x, q.y])
        assert np.allclose(apply_config(q, p), expect, atol=1e-12)


def test_compose_law(rng):
    for _ in range(100):
        q1 = Config(*rng.uniform(-2, 2, 2), rng.uniform(-3, 3))
        q2 = Config(*rng.uniform(-2, 2, 2), rng.uniform(-3, 3))
        p = rng.uniform(-1, 1, 2)
        lhs = apply_config(q1, apply_config(q2, p))
        assert np.allclose(lhs, apply_config(compose(q1, q2), p), atol=1e-10)


def test_config_angle_normalized():
    assert Config(0, 0, 3 * math.pi).theta == pytest.approx(math.pi)
    assert -math.pi < Config(0, 0, -math.pi).theta <= math.pi
    with pytest.raises(GeometryError):
        Config(float("nan"), 0, 0)


def test_rotate_about_fixed_point_and_half_turn(rng):
    p = rng.uniform(-1, 1, 2)
    assert np.allclose(rotate_about(p, p, 1.234), p)
    assert np.allclose(rotate_about([1.0, 0.0], [0.0, 0.0], math.pi), [-1.0, 0.0], atol=1e-15)


def test_rotate_about_preserves_distance(rng):
    for _ in range(500):
        p, c = rng.uniform(-10, 10, (2, 2))
        r = rotate_about(p, c, rng.uniform(-7, 7))
        assert abs(np.linalg.norm(r - c) - np.linalg.norm(p - c)) < 1e-12


def test_point_segment_contact_cases():
    s = Segment([0.0, 0.0], [2.0, 0.0])
    assert point_segment_contact([1.0, 0.0], s, 1e-9).kind is ContactKind.INTERIOR
    assert point_segment_contact([2.0, 0.0], s, 1e-9).kind is ContactKind.ENDPOINT
    above = point_segment_contact([1.0, 0.1], s, 1e-9)
    assert above.kind is ContactKind.OFF and above.distance == pytest.approx(0.1)
    assert point_segment_contact([1.0, -0.1], s, 1e-9).distance == pytest.approx(-0.1)


def test_point_segment_contact_projection_oracle(rng):
    for _ in range(300):
        a, b = rng.uniform(-1, 1, (2, 2))
        s = Segment(a, b)
        t = rng.uniform(0.05, 0.95)
        off = rng.uniform(-0.5, 0.5)
        u = (b - a) / np.linalg.norm(b - a)
        n = np.array([-u[1], u[0]])
        p = a + t * (b - a) + off * n
        res = point_segment_contact(p, s, 1e-9)
        # Scalar projection onto the left normal.
        assert res.distance == pytest.approx(float((p - a) @ n), abs=1e-12)


def test_point_segment_contact_endpoint_swap_symmetry(rng):
    for _ in range(100):
        a, b = rng.uniform(-1, 1, (2, 2))
        p = rng.uniform(-1, 1, 2)
        r1 = point_segment_contact(p, Segment(a, b))
        r2 = point_segment_contact(p, Segment(b, a))
        assert r1.kind == r2.kind
        assert r1.distance == pytest.approx(-r2.distance, abs=1e-12)


def test_degenerate_segment_and_bad_tol():
    with pytest.raises(GeometryError):
        Segment([0, 0], [0, 0])
    with pytest.raises(GeometryError):
        point_segment_contact([0, 0], Segment([0, 0], [1, 0]), 0.0)


def _brute_clearance(p, V):
    # Winding-number inside test on the hole closed by the mouth, plus the
    # region above the mouth line, against the minimum distance to every edge.
    closed = np.vstack([V, V[:1]])
    wn = 0
    for a, b in zip(closed[:-1], closed[1:]):
        if a[1] <= p[1] < b[1] and (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]) > 0:
            wn += 1
        elif b[1] <= p[1] < a[1] and (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]) < 0:
            wn -= 1
    dist = min(
        np.linalg.norm(p - (a + np.clip((p - a) @ (b - a) / ((b - a) @ (b - a)), 0, 1) * (b - a)))
        for a, b in zip(V[:-1], V[1:])
    )
    free = wn != 0 or p[1] > V[0, 1]
    return dist if free else -dist


def test_socket_clearance_brute_force(rng):
    V = np.array([[-1.0, 0.0], [-0.6, -1.0], [0.2, -1.3], [0.8, -0.5], [1.0, 0.0]])
    sock = SocketDesign(V)
    pts = rng.uniform([-1.5, -1.8], [1.5, 0.5], (10000, 2))
    got = np.array([socket_clearance(p, sock) for p in pts])
    want = np.array([_brute_clearance(p, V) for p in pts])
    assert np.allclose(got, want, atol=1e-12)


def test_socket_clearance_simple_cases():
    V = np.array([[-1.0, 0.0], [-0.9, -1.0], [0.9, -1.1], [1.0, 0.0]])
    sock = SocketDesign(V)
    assert socket_clearance([0.0, -0.5], sock) > 0
    for a, b in zip(V[:-1], V[1:]):
        assert abs(socket_clearance(0.5 * (a + b), sock)) < 1e-9
