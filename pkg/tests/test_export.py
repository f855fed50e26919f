import math
import xml.etree.ElementTree as ET
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from pegsocket.corpus import funnel_corpus
from pegsocket.export import (
    SEPARATIONS,
    export_dot,
    export_svg,
    meshes_to_obj,
    project_3d,
    revolve,
)
from pegsocket.graph import InsertionGraph, ScaleLayer, build_graph, sink_report
from pegsocket.kinematics import ContactMode

GOLDEN = Path(__file__).parent / "golden"
NS = {"s": "http://www.w3.org/2000/svg"}


def test_svg_golden_v_socket(vdesign):
    assert export_svg(vdesign) == (GOLDEN / "v_socket.svg").read_text()


def test_svg_structure(corpus):
    for d in corpus[:5]:
        root = ET.fromstring(export_svg(d))
        assert len(root.findall(".//s:path", NS)) == d.socket.m
        assert len(root.findall(".//s:circle", NS)) == d.peg.n
        # Edge paths follow the socket vertices (y flipped for SVG).
        V = d.socket.vertices
        for j, el in enumerate(root.findall(".//s:path", NS)):
            nums = [float(t) for t in el.get("d").split() if t not in "ML"]
            assert nums == pytest.approx([V[j, 0], -V[j, 1], V[j + 1, 0], -V[j + 1, 1]], abs=1e-6)


def test_svg_same_design_overlaps(wedge):
    root = ET.fromstring(export_svg(wedge, before=wedge))
    before, after = root.findall("s:g", NS)
    assert before.get("id") == "before" and after.get("id") == "after"
    geom = lambda g: [(el.tag, el.get("d"), el.get("cx"), el.get("cy")) for el in g]
    assert geom(before) == geom(after)
    assert {el.get("stroke") for el in before} == {"blue", "black"}
    assert {el.get("stroke") for el in after} == {"red", "brown"}


def _dot_nodes(text):
    return [ln for ln in text.splitlines() if ln.lstrip().startswith("n") and ln.lstrip()[1].isdigit() and "->" not in ln]


def test_dot_two_node_graph():
    a, b = ContactMode([(0, 0)]), ContactMode([(0, 0), (1, 1)])
    layer = ScaleLayer(1.0, {(a, b)}, {b: [np.zeros(3)]}, {a}, {b})
    g = InsertionGraph(layers={1.0: layer}, edges={(a, b)}, initial_nodes={a}, goal_nodes={b})
    g.nodes.update((a, b))
    text = export_dot(g)
    nodes = _dot_nodes(text)
    assert len(nodes) == 2
    assert "doublecircle" in nodes[1] and "penwidth=2" in nodes[0]
    assert text.count("->") == 1


def test_dot_wedge_marks_jam(wedge, errors):
    g = build_graph(wedge, errors)
    text = export_dot(g)
    nodes = _dot_nodes(text)
    assert len(nodes) == len(g.nodes)
    assert text.count("->") == len(g.edges)
    filled = [ln for ln in nodes if "filled" in ln]
    jam = {m for s in sink_report(g).undesired for m in s}
    assert len(filled) == len(jam)
    assert all(any(f'label="{m.label}"' in ln for ln in filled) for m in jam)
    assert export_dot(build_graph(wedge, errors)) == text


def _edge_use(faces):
    """Directed edge multiset of a triangle list."""
    return Counter((int(f[k]), int(f[(k + 1) % 3])) for f in faces for k in range(3))


def _closed_manifold(mesh):
    use = _edge_use(mesh.faces)
    # Every directed edge once, and its reverse exactly once: closed, two faces per
    # edge and consistently oriented.
    if any(c != 1 for c in use.values()) or any(use.get((b, a)) != 1 for a, b in use):
        return False
    V, E, F = len(mesh.vertices), len(use) // 2, len(mesh.faces)
    return V - E + F == 2


def _axis_radius(v):
    return np.hypot(v[:, 0], v[:, 2])


def test_revolution_mesh(corpus):
    d = corpus[0]
    peg, sock = project_3d(d, 0)
    k = SEPARATIONS[0]
    for mesh in (peg, sock):
        assert _closed_manifold(mesh)
        assert mesh.signed_volume() > 0
        ring = (len(mesh.vertices) - 2) // k
        # Two axis poles plus one full ring per off-axis profile point.
        assert len(mesh.vertices) == ring * k + 2
        rings = mesh.vertices[1:-1].reshape(ring, k, 3)
        for r in rings:
            rad = _axis_radius(r)
            assert np.ptp(rad) < 1e-12 and np.ptp(r[:, 1]) == 0.0


def test_revolve_rejects_bad_profile():
    with pytest.raises(ValueError):
        revolve(np.array([[0.1, 0.0], [1.0, 1.0], [0.0, 1.0]]), 8)


def _rotate_y(v, angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.column_stack([c * v[:, 0] + s * v[:, 2], v[:, 1], -s * v[:, 0] + c * v[:, 2]])


@pytest.mark.parametrize("sep", [90, 120])
def test_station_symmetry(corpus, sep):
    for d in corpus[:4]:
        for mesh in project_3d(d, sep):
            assert _closed_manifold(mesh)
            turned = _rotate_y(mesh.vertices, math.radians(sep))
            # Nearest-neighbour matching of the two vertex sets.
            dist = np.linalg.norm(turned[:, None] - mesh.vertices[None], axis=2).min(axis=1)
            assert dist.max() < 1e-9


def test_bad_separation(vdesign):
    with pytest.raises(ValueError, match="separation"):
        project_3d(vdesign, 45)


def test_obj_text(vdesign):
    peg, sock = project_3d(vdesign, 90)
    text = meshes_to_obj(peg, sock)
    lines = text.splitlines()
    assert [ln for ln in lines if ln.startswith("o ")] == ["o peg", "o socket"]
    nv = sum(ln.startswith("v ") for ln in lines)
    assert nv == len(peg.vertices) + len(sock.vertices)
    idx = [int(t) for ln in lines if ln.startswith("f ") for t in ln.split()[1:]]
    assert min(idx) == 1 and max(idx) == nv
    assert meshes_to_obj(*project_3d(vdesign, 90)) == text


def test_exports_deterministic():
    d = funnel_corpus(3, seed=7)[2]
    assert export_svg(d) == export_svg(d)
    assert meshes_to_obj(*project_3d(d, 0)) == meshes_to_obj(*project_3d(d, 0))
