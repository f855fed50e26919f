"""Insertion graph: contact modes linked by force-driven transitions, and its sinks.

The graph is grown forward from the entry poses allowed by the error model and
from the seated poses of the goal modes, following the quasi-static motion
under the insertion force.  Every event that changes several pairs at once is
expanded into one-pair steps through the intermediate modes.

Sinks are analysed per manufacturing scale, because a mode that rests at one
scale may keep moving at another.  A mode where the motion comes to rest is
absorbing even if other visits to it move on.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations

import networkx as nx
import numpy as np

from .design import DesignError, ErrorModel, JointDesign, require_valid
from .geometry import Config
from .kinematics import (
    ConfigFamily,
    ContactMode,
    Scene,
    scene_for,
    _reference_seat,
    goal_realizations,
    solve_mode,
)
from .mechanics import EQUILIBRIUM, EXITED, RIM, TIMEOUT, TRANSITION, QuasiStatic

log = logging.getLogger(__name__)

#: Entry poses per axis of the (dx, dtheta) error box.
ENTRY_SAMPLES = 5
#: Cap on flow segments followed per scale.
MAX_EXPANSIONS = 4000


@dataclass
class InsertionGraph:
    """Contact modes and transitions, merged over the manufacturing scales.

    ``layers`` keeps the per-scale edges, resting modes and initial modes that
    sink analysis needs.
    """

    nodes: set = field(default_factory=set)
    edges: set = field(default_factory=set)
    initial_nodes: set = field(default_factory=set)
    goal_nodes: set = field(default_factory=set)
    layers: dict = field(default_factory=dict)
    rim_entries: int = 0
    families: dict = field(default_factory=dict)

    def family(self, mode, design: JointDesign, scale: float = 1.0) -> ConfigFamily:
        key = (ContactMode(mode), scale)
        if key not in self.families:
            self.families[key] = solve_mode(design, key[0], scale)
        return self.families[key]

    def sorted_nodes(self) -> list[ContactMode]:
        return sorted(self.nodes, key=ContactMode.sort_key)

    def sorted_edges(self) -> list[tuple[ContactMode, ContactMode]]:
        return sorted(self.edges, key=lambda e: (e[0].sort_key(), e[1].sort_key()))

    def to_networkx(self, scale: float | None = None) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.sorted_nodes())
        edges = self.edges if scale is None else self.layers[scale].edges
        g.add_edges_from(sorted(edges, key=lambda e: (e[0].sort_key(), e[1].sort_key())))
        return g


@dataclass
class ScaleLayer:
    scale: float
    edges: set = field(default_factory=set)
    resting: dict = field(default_factory=dict)  # mode -> list of rest poses
    initial: set = field(default_factory=set)
    goals: set = field(default_factory=set)
    rim_entries: list = field(default_factory=list)
    timeouts: set = field(default_factory=set)


@dataclass
class SinkReport:
    sinks: list  # frozensets of modes, one per sink component
    undesired: list
    connected: bool
    rim_entries: int = 0  # entry poses whose first touch is on the rim
    per_scale: dict = field(default_factory=dict)
    disconnected: int = 0  # initial modes, over all scales, that reach no goal sink

    @property
    def success(self) -> bool:
        return not self.undesired and self.connected

    @property
    def goal_sinks(self) -> list:
        return [s for s in self.sinks if s not in self.undesired]


def _chain_edges(a: ContactMode, b: ContactMode) -> set:
    """One-pair steps covering every ordering of the changes between ``a`` and ``b``."""
    diff = sorted(set(a) ^ set(b))
    out = set()
    for r in range(len(diff)):
        for sub in combinations(diff, r):
            src = ContactMode(set(a) ^ set(sub))
            for p in diff:
                if p in sub:
                    continue
                out.add((src, ContactMode(set(src) ^ {p})))
    return out


def entry_offsets(e: ErrorModel, samples: int = ENTRY_SAMPLES) -> list[tuple[float, float]]:
    """Grid of (dx, dtheta) offsets spanning the error box."""
    xs = np.linspace(-e.dx, e.dx, samples) if e.dx > 0 else np.zeros(1)
    ts = np.linspace(-e.dtheta, e.dtheta, samples) if e.dtheta > 0 else np.zeros(1)
    return [(float(x), float(t)) for x in xs for t in ts]


def entry_pose(scene: Scene, dx: float, dtheta: float, base: Config | None = None) -> Config:
    base = base if base is not None else _reference_seat(scene.design)
    return scene.hover_config(dx, dtheta, Config(base.x, 0.0, base.theta))


def _explore_scale(d: JointDesign, e: ErrorModel, scale: float, samples: int,
                   max_expansions: int) -> ScaleLayer:
    scene = scene_for(d, scale)
    qs = QuasiStatic(scene)
    layer = ScaleLayer(scale)
    layer.goals = set(scene.goal_modes)
    if not layer.goals:
        raise DesignError(f"goal unreachable at scale {scale:g}")
    frontier: list[tuple[ContactMode, np.ndarray]] = []
    for dx, dth in entry_offsets(e, samples):
        o = qs.descend(entry_pose(scene, dx, dth).as_array())
        if o.kind == RIM:
            # First touch on the mouth rim: the peg may still slide in, or rest
            # there, which makes the empty mode an undesired sink.
            layer.rim_entries.append((dx, dth, o.q))
        elif o.kind != TRANSITION:
            continue
        layer.initial.add(o.mode)
        frontier.append((o.mode, o.q))
    for g in sorted(layer.goals, key=ContactMode.sort_key):
        for q in goal_realizations(scene, g)[:3]:
            frontier.append((g, q.as_array()))

    seen = set()
    expansions = 0
    while frontier:
        mode, q = frontier.pop(0)
        key = (mode, tuple(np.round(q, 6)))
        if key in seen:
            continue
        seen.add(key)
        expansions += 1
        if expansions > max_expansions:
            log.warning("expansion cap reached at scale %g", scale)
            layer.timeouts.add(mode)
            break
        for o in qs.advance(q, branch=True):
            if o.kind == EQUILIBRIUM:
                if o.mode != mode:
                    layer.edges |= _chain_edges(mode, o.mode)
                layer.resting.setdefault(o.mode, []).append(o.q)
            elif o.kind == TIMEOUT:
                layer.timeouts.add(mode)
                layer.resting.setdefault(mode, []).append(o.q)
            elif o.kind == EXITED:
                continue
            elif o.kind == TRANSITION:
                if o.mode != mode:
                    layer.edges |= _chain_edges(mode, o.mode)
                frontier.append((o.mode, o.q))
    return layer


def build_graph(d: JointDesign, e: ErrorModel, samples: int = ENTRY_SAMPLES,
                max_expansions: int = MAX_EXPANSIONS) -> InsertionGraph:
    """Explore the insertion flow at every analysed scale and merge the layers."""
    require_valid(d)
    g = InsertionGraph()
    for s in e.scales():
        layer = _explore_scale(d, e, s, samples, max_expansions)
        g.layers[s] = layer
        g.edges |= layer.edges
        g.initial_nodes |= layer.initial
        g.goal_nodes |= layer.goals
        g.rim_entries += len(layer.rim_entries)
        for a, b in layer.edges:
            g.nodes.update((a, b))
        g.nodes.update(layer.resting)
        g.nodes.update(layer.initial)
        g.nodes.update(layer.goals)
    return g


def enumerate_modes(d: JointDesign, e: ErrorModel, samples: int = ENTRY_SAMPLES,
                    graph: InsertionGraph | None = None) -> set:
    """Goal modes, every subset of the correspondence, and all modes on the insertion flow."""
    g = graph if graph is not None else build_graph(d, e, samples)
    modes = set(g.nodes)
    corr = sorted(d.goal_pairs)
    for r in range(len(corr) + 1):
        for sub in combinations(corr, r):
            modes.add(ContactMode(sub))
    return modes


def transitions(d: JointDesign, mode, force_angle: float = 0.0,
                scale: float = 1.0) -> set:
    """Adjacent modes reached from representatives of ``mode``, with motion witnesses.

    Returns ``(next_mode, velocity)`` pairs, where ``next_mode`` differs from
    ``mode`` by exactly one pair.  Modes at rest everywhere yield no transitions.
    """
    scene = scene_for(d, scale)
    qs = QuasiStatic(scene, force_angle=force_angle)
    mode = ContactMode(mode)
    if mode:
        reps = [q.as_array() for q in solve_mode(scene, mode).representatives]
    else:
        reps = [entry_pose(scene, 0.0, 0.0).as_array()]
    out = set()
    for q in reps:
        start = qs.descend(q) if not mode else None
        outs = [start] if start is not None else qs.advance(q, branch=True)
        for o in outs:
            if o.kind not in (TRANSITION, RIM) or o.mode == mode:
                continue
            for a, b in _chain_edges(mode, o.mode):
                if a == mode:
                    out.add((b, tuple(np.round(o.velocity, 12))))
    return out


def _layer_graph(nodes, layer: ScaleLayer) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(sorted(nodes, key=ContactMode.sort_key))
    g.add_edges_from(sorted(layer.edges, key=lambda e: (e[0].sort_key(), e[1].sort_key())))
    return g


def _layer_sinks(nodes, layer: ScaleLayer):
    """Sink components of one scale: condensation sinks plus components holding a rest pose."""
    g = _layer_graph(nodes, layer)
    cond = nx.condensation(g)
    members = cond.graph["mapping"]
    comps = {c: frozenset(cond.nodes[c]["members"]) for c in cond.nodes}
    reach_from_init = set()
    for m in layer.initial:
        reach_from_init |= nx.descendants(cond, members[m]) | {members[m]}
    sinks, undesired, dormant = [], [], []
    for c in sorted(cond.nodes, key=lambda c: sorted(ContactMode.sort_key(x) for x in comps[c])):
        comp = comps[c]
        rests = any(m in layer.resting for m in comp)
        if cond.out_degree(c) == 0:
            active = any(m in layer.resting for m in comp) or comp & layer.initial or any(
                g.in_degree(m) for m in comp)
            if not active:
                continue  # untouched bookkeeping node
        elif not rests:
            continue
        sinks.append(comp)
        if not comp & layer.goals:
            (undesired if c in reach_from_init else dormant).append(comp)
    goal_comps = {members[m] for s in sinks if s & layer.goals for m in s}
    lost = 0
    for m in layer.initial:
        c = members[m]
        if not ({c} | nx.descendants(cond, c)) & goal_comps:
            lost += 1
    return sinks, undesired, dormant, lost


def sink_report(g: InsertionGraph) -> SinkReport:
    """Sinks and undesired sinks over every scale layer; success needs all layers clean."""
    if not g.nodes:
        raise ValueError("empty insertion graph")
    sinks, undesired, per_scale = [], [], {}
    connected = True
    disconnected = 0
    for s in sorted(g.layers):
        layer = g.layers[s]
        sk, und, dormant, lost = _layer_sinks(g.nodes, layer)
        per_scale[s] = {"sinks": sk, "undesired": und, "dormant": dormant, "connected": lost == 0,
                        "rim_entries": len(layer.rim_entries)}
        connected &= lost == 0 and bool(layer.initial)
        disconnected += lost
        for comp in sk:
            if comp not in sinks:
                sinks.append(comp)
        for comp in und:
            if comp not in undesired:
                undesired.append(comp)
    return SinkReport(sinks, undesired, connected, g.rim_entries, per_scale, disconnected)


def goal_sink_poses(g: InsertionGraph) -> dict[float, dict[ContactMode, list[np.ndarray]]]:
    """Rest poses of the goal modes, per scale."""
    out = {}
    for s, layer in sorted(g.layers.items()):
        out[s] = {m: qs for m, qs in layer.resting.items() if m in layer.goals}
    return out
