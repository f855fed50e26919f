import math

import numpy as np
import pytest

from pegsocket.corpus import funnel_corpus, v_socket
from pegsocket.design import (
    Correspondence,
    DesignError,
    ErrorModel,
    JointDesign,
    PegDesign,
    SocketDesign,
    canonicalize,
    scale_socket,
    transform_design,
    validate_design,
)


def _design(points, vertices, pairs=None):
    pairs = pairs if pairs is not None else [(i, i) for i in range(len(points))]
    return JointDesign(PegDesign(points), SocketDesign(vertices), Correspondence(frozenset(pairs)))


V45 = [[-1.0, 0.0], [0.0, -1.0], [1.0, 0.0]]


def test_rectangle_socket_reports_parallel_edges():
    rect = [[-1.0, 0.0], [-1.0, -1.0], [1.0, -1.0], [1.0, 0.0]]
    rep = validate_design(_design([[-0.9, -0.5], [0.0, -1.0], [0.9, -0.4]], rect))
    assert "parallel edges" in rep.codes


def test_colinear_points_reported():
    rep = validate_design(_design([[-0.5, -0.3], [0.0, -0.3], [0.5, -0.3]],
                                  [[-1.0, 0.0], [-0.6, -1.0], [0.6, -1.1], [1.0, 0.0]]))
    assert "co-linear points" in rep.codes


def test_v_socket_45_degrees_valid():
    d = _design([[-0.5, 0.0], [0.5, 0.0]], V45)
    rep = validate_design(d)
    assert rep.ok and not rep.codes
    # Oracle: every pair of edges differs in direction by more than the tolerance.
    V = np.array(V45)
    ang = [math.degrees(math.atan2(*(b - a)[::-1])) for a, b in zip(V[:-1], V[1:])]
    assert abs(ang[0] - ang[1]) > 0.5


@pytest.mark.parametrize(
    "points, vertices, pairs, code",
    [
        ([[0.0, 0.0]], V45, [(0, 0)], "point-count"),
        ([[x, 0.1 * x * x] for x in np.linspace(-0.5, 0.5, 5)], V45, [(0, 0)], "redundant"),
        ([[-0.5, 0.0], [-0.5, 0.0]], V45, [(0, 0)], "duplicate-points"),
        ([[-0.5, 0.0], [0.5, 0.0]], V45, [(0, 5)], "correspondence"),
        ([[-0.5, 0.0], [0.5, 0.0]], V45, [], "correspondence"),
        ([[-0.5, 0.0], [0.5, 0.0]], V45[::-1], None, "winding"),
        ([[-0.5, 0.0], [0.5, 0.0]], [[-1.0, 0.0], [0.0, 1.0], [1.0, 0.0]], None, "mouth"),
        ([[-0.5, 0.0], [0.5, 0.0]], [[-1.0, 0.0], [-1.0, 0.0], [1.0, 0.0]], None, "degenerate-edge"),
        ([[-0.5, 0.0], [0.5, 0.0]],
         [[-1.0, 0.0], [0.6, -1.0], [-0.6, -1.2], [1.0, 0.0]], None, "self-intersecting"),
    ],
)
def test_validation_codes(points, vertices, pairs, code):
    assert code in validate_design(_design(points, vertices, pairs)).codes


def test_degenerate_length_reported():
    # Edge 0 has length sqrt(2); points 0 and 1 are sqrt(2) apart.
    d = _design([[0.0, 0.0], [1.0, 1.0]], V45)
    assert "degenerate" in validate_design(d).codes


def test_error_model_bounds():
    assert ErrorModel(0.1, 0.1, 0.02).scales() == (0.98, 1.0, 1.02)
    assert ErrorModel().scales() == (1.0,)
    for bad in ((-1, 0, 0), (0, 0, 1.0), (0, float("nan"), 0)):
        with pytest.raises(DesignError):
            ErrorModel(*bad)


def test_scale_socket_identity_and_doubling():
    s = v_socket().socket
    assert np.array_equal(scale_socket(s, 1.0).vertices, s.vertices)
    assert np.allclose(scale_socket(s, 2.0).edge_lengths, 2 * s.edge_lengths, rtol=0, atol=1e-12)
    with pytest.raises(DesignError):
        scale_socket(s, 0.0)


def test_scale_socket_vertex_oracle():
    s = v_socket().socket
    out = scale_socket(s, 1.05)
    c = 0.5 * (np.array(s.vertices[0]) + np.array(s.vertices[-1]))
    for v, w in zip(s.vertices, out.vertices):
        assert np.allclose(w, [c[0] + 1.05 * (v[0] - c[0]), c[1] + 1.05 * (v[1] - c[1])], atol=1e-15)
    assert out.mouth_width == pytest.approx(1.05 * s.mouth_width, abs=1e-12)
    assert np.array_equal(out.insertion_axis, s.insertion_axis)


def test_scale_socket_composes(rng):
    s = funnel_corpus(1, seed=4)[0].socket
    for _ in range(20):
        a, b = rng.uniform(0.5, 1.5, 2)
        assert np.allclose(scale_socket(scale_socket(s, a), b).vertices, scale_socket(s, a * b).vertices,
                           atol=1e-10)


def _same(d1, d2, tol=1e-9):
    return (
        np.allclose(d1.socket.vertices, d2.socket.vertices, atol=tol)
        and np.allclose(d1.peg.points, d2.peg.points, atol=tol)
        and np.allclose(d1.peg.tip, d2.peg.tip, atol=tol)
        and d1.goal_pairs == d2.goal_pairs
    )


def test_canonicalize_idempotent(corpus):
    for d in corpus[:10]:
        c = canonicalize(d)
        assert _same(canonicalize(c), c, tol=1e-15)
        assert np.allclose(c.socket.mouth_center, 0.0, atol=1e-15)
        assert np.allclose(c.peg.points.mean(axis=0), 0.0, atol=1e-12)
        assert np.array_equal(c.socket.insertion_axis, [0.0, -1.0])


def test_canonicalize_translation_invariant(vdesign):
    assert _same(canonicalize(transform_design(vdesign, 0.0, (5.0, 5.0))), canonicalize(vdesign), tol=1e-12)


def test_canonicalize_rigid_invariance(corpus, rng):
    for d in corpus[:10]:
        base = canonicalize(d)
        for _ in range(5):
            moved = transform_design(d, rng.uniform(-math.pi, math.pi), rng.uniform(-10, 10, 2))
            assert _same(canonicalize(moved), base)


def test_canonicalize_rejects_invalid():
    rect = [[-1.0, 0.0], [-1.0, -1.0], [1.0, -1.0], [1.0, 0.0]]
    with pytest.raises(DesignError):
        canonicalize(_design([[-0.9, -0.5], [0.0, -1.0], [0.9, -0.4]], rect))


def test_canonicalize_reversed_socket_keeps_correspondence(vdesign):
    d = vdesign
    rev = JointDesign(d.peg, SocketDesign(d.socket.vertices[::-1].copy(), (0.0, -1.0)), d.correspondence)
    c = canonicalize(rev)
    # Same hole listed clockwise: the edge labels are swapped back.
    assert c.goal_pairs == {(0, 1), (1, 0)}
    assert validate_design(c).ok
