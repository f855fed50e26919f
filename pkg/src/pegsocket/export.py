"""Deterministic exporters: SVG drawings, DOT insertion graphs and OBJ meshes."""
from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .design import JointDesign, require_valid
from .graph import InsertionGraph, sink_report
from .kinematics import scene_for, seat_config

#: Socket and point colours of a single (or the initial) design, and of the optimized one.
BEFORE_COLORS = ("blue", "black")
AFTER_COLORS = ("red", "brown")
#: Segments of a full surface of revolution.
REVOLUTION_SEGMENTS = 64
SEPARATIONS = {0: REVOLUTION_SEGMENTS, 90: 4, 120: 3}
#: Wall thickness and depth margin of the socket block, as fractions of the mouth width.
WALL = 0.25
PEG_HEIGHT = 0.5


def _f(x: float) -> str:
    s = f"{x:.6f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def seated_world(d: JointDesign) -> np.ndarray:
    scene = scene_for(d)
    return scene.world(seat_config(scene).as_array())


# -- SVG --------------------------------------------------------------------


def _svg_layer(d: JointDesign, colors, tag: str) -> list[str]:
    edge_color, point_color = colors
    V = d.socket.vertices
    out = [f'  <g id="{tag}">']
    for j in range(d.socket.m):
        a, b = V[j], V[j + 1]
        out.append(f'    <path class="edge" data-edge="{j}" d="M {_f(a[0])} {_f(-a[1])} L {_f(b[0])} {_f(-b[1])}" '
                   f'stroke="{edge_color}" fill="none"/>')
    r = d.peg.bump_radius
    for i, p in enumerate(seated_world(d)):
        out.append(f'    <circle class="point" data-point="{i}" cx="{_f(p[0])}" cy="{_f(-p[1])}" r="{_f(r)}" '
                   f'stroke="{point_color}" fill="none"/>')
    out.append("  </g>")
    return out


def export_svg(d: JointDesign, before: JointDesign | None = None) -> str:
    """Socket edges and seated contact bumps; ``before`` is drawn underneath in the initial colours.

    The drawing's y axis points up (SVG coordinates are flipped).
    """
    designs = [x for x in (before, d) if x is not None]
    for x in designs:
        require_valid(x)
    pts = []
    for x in designs:
        pts.append(x.socket.vertices)
        pts.append(seated_world(x))
    P = np.vstack(pts)
    pad = 0.05 * float(np.ptp(P[:, 0]) + np.ptp(P[:, 1])) + max(x.peg.bump_radius for x in designs)
    x0, x1 = float(P[:, 0].min()) - pad, float(P[:, 0].max()) + pad
    y0, y1 = float(-P[:, 1].max()) - pad, float(-P[:, 1].min()) + pad
    width = max(x1 - x0, 1e-9)
    stroke = _f(0.004 * width)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{_f(x0)} {_f(y0)} {_f(x1 - x0)} {_f(y1 - y0)}" '
        f'stroke-width="{stroke}">',
    ]
    if before is not None:
        lines += _svg_layer(before, BEFORE_COLORS, "before")
        lines += _svg_layer(d, AFTER_COLORS, "after")
    else:
        lines += _svg_layer(d, BEFORE_COLORS, "design")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


# -- DOT --------------------------------------------------------------------


def export_dot(g: InsertionGraph) -> str:
    """Insertion graph in Graphviz form; goal sinks double circles, undesired sinks filled."""
    nodes = g.sorted_nodes()
    ids = {m: f"n{k}" for k, m in enumerate(nodes)}
    goal_sink, undesired = set(), set()
    if nodes:
        rep = sink_report(g)
        for comp in rep.goal_sinks:
            goal_sink |= set(comp) & g.goal_nodes
        for comp in rep.undesired:
            undesired |= set(comp)
    lines = ["digraph insertion {", "  rankdir=TB;", "  node [shape=circle];"]
    for m in nodes:
        attrs = [f'label="{escape(m.label)}"']
        if m in goal_sink:
            attrs.append("shape=doublecircle")
        if m in undesired:
            attrs.append('style=filled, fillcolor="lightcoral"')
        if m in g.initial_nodes:
            attrs.append("penwidth=2")
        lines.append(f"  {ids[m]} [{', '.join(attrs)}];")
    for a, b in g.sorted_edges():
        lines.append(f"  {ids[a]} -> {ids[b]};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- 3D ---------------------------------------------------------------------


@dataclass
class Mesh3D:
    """Triangle mesh; ``y`` is the insertion axis, pointing out of the socket."""

    vertices: np.ndarray  # (k, 3)
    faces: np.ndarray  # (f, 3) zero-based, counter-clockwise seen from outside

    def signed_volume(self) -> float:
        a, b, c = (self.vertices[self.faces[:, k]] for k in range(3))
        return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)

    def to_obj(self, name: str = "mesh") -> str:
        lines = [f"o {name}"]
        lines += [f"v {_f(x)} {_f(y)} {_f(z)}" for x, y, z in self.vertices]
        lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in self.faces]
        return "\n".join(lines) + "\n"


def _half_profile(poly: np.ndarray, cx: float) -> np.ndarray:
    """Part of an open polyline on the right of the axis x = cx, as (radius, y), starting on the axis."""
    P = np.asarray(poly, dtype=float)
    out = []
    for a, b in zip(P[:-1], P[1:]):
        ra, rb = a[0] - cx, b[0] - cx
        if ra < 0 <= rb or rb < 0 <= ra:
            t = -ra / (rb - ra)
            out.append([0.0, a[1] + t * (b[1] - a[1])])
        if rb > 0:
            out.append([rb, b[1]])
    if not out or out[0][0] != 0.0:
        raise ValueError("profile does not cross the insertion axis")
    return np.array(out)


def revolve(profile: np.ndarray, segments: int) -> Mesh3D:
    """Revolve a closed (radius, y) profile whose first and last points lie on the axis.

    The axis points become single pole vertices, so the result is a closed
    manifold surface.
    """
    prof = np.asarray(profile, dtype=float)
    if prof[0, 0] != 0.0 or prof[-1, 0] != 0.0 or np.any(prof[1:-1, 0] <= 0):
        raise ValueError("profile must start and end on the axis and stay off it in between")
    ring = prof[1:-1]
    k = len(ring)
    ang = 2.0 * math.pi * np.arange(segments) / segments
    c, s = np.cos(ang), np.sin(ang)
    c[np.abs(c) < 1e-15] = 0.0
    s[np.abs(s) < 1e-15] = 0.0
    verts = [[0.0, prof[0, 1], 0.0]]
    for r, y in ring:
        for a in range(segments):
            verts.append([r * c[a], y, r * s[a]])
    verts.append([0.0, prof[-1, 1], 0.0])
    top, bottom = 0, len(verts) - 1

    def vid(i, a):
        return 1 + i * segments + a % segments

    faces = []
    for a in range(segments):
        faces.append([top, vid(0, a + 1), vid(0, a)])
        for i in range(k - 1):
            faces.append([vid(i, a), vid(i, a + 1), vid(i + 1, a + 1)])
            faces.append([vid(i, a), vid(i + 1, a + 1), vid(i + 1, a)])
        faces.append([vid(k - 1, a), vid(k - 1, a + 1), bottom])
    mesh = Mesh3D(np.array(verts), np.array(faces, dtype=np.int64))
    if mesh.signed_volume() < 0:
        mesh.faces = mesh.faces[:, ::-1].copy()
    return mesh


def _socket_profile(d: JointDesign) -> np.ndarray:
    V = d.socket.vertices
    cx = float(d.socket.mouth_center[0])
    mouth_y = float(d.socket.mouth_center[1])
    w = float(d.socket.mouth_width)
    inner = _half_profile(V, cx)
    outer_r = float(inner[:, 0].max()) + WALL * w
    floor = float(V[:, 1].min()) - WALL * w
    # Bottom pole, outer wall, rim, then the hole surface back down to its pole.
    prof = [[0.0, floor], [outer_r, floor], [outer_r, mouth_y]]
    prof += inner[::-1].tolist()
    return np.array(prof)


def _peg_profile(d: JointDesign) -> np.ndarray:
    W = seated_world(d)
    order = np.argsort(W[:, 0], kind="stable")
    W = W[order]
    cx = float(d.socket.mouth_center[0])
    top = float(d.socket.mouth_center[1]) + PEG_HEIGHT * float(d.socket.mouth_width)
    left = W[0] if W[0, 0] < cx else np.array([cx - 1.0, W[0, 1]])
    body = np.vstack([[left[0], top], W, [W[-1, 0], top]]) if W[-1, 0] > cx else None
    if body is None:
        raise ValueError("peg points do not straddle the insertion axis")
    half = _half_profile(body, cx)
    # Top pole, down the right side of the body, then the bottom pole.
    bottom_y = half[0, 1]
    prof = [[0.0, top]] + half[:0:-1].tolist() + [[0.0, bottom_y]]
    return np.array(prof)


def project_3d(d: JointDesign, separation: int = 0) -> tuple[Mesh3D, Mesh3D]:
    """Peg and socket solids around the insertion axis.

    Separation 0 revolves the right half of each profile; 90 and 120 place the
    profile at 4 or 3 stations and join neighbouring stations with flat strips.
    """
    if separation not in SEPARATIONS:
        raise ValueError(f"separation must be one of {sorted(SEPARATIONS)}, got {separation!r}")
    require_valid(d)
    k = SEPARATIONS[separation]
    return revolve(_peg_profile(d), k), revolve(_socket_profile(d), k)


def meshes_to_obj(peg: Mesh3D, socket: Mesh3D) -> str:
    """Both meshes in one OBJ file, as separate objects."""
    text = peg.to_obj("peg")
    offset = len(peg.vertices)
    shifted = Mesh3D(socket.vertices, socket.faces + offset)
    lines = shifted.to_obj("socket").splitlines()
    return text + "\n".join(lines) + "\n"
