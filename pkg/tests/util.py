"""Independent oracles and random-instance generators for the test suite.

The oracles here deliberately avoid the engine's matcher/detection code
paths: matching enumerates injective assignments directly, and violation
checking is a double loop over match pairs.
"""

from __future__ import annotations

import itertools
import random
from typing import Dict, List, Sequence, Set, Tuple

from tgfd.graph import (
    AttrSet,
    ChangeSet,
    EdgeDelete,
    EdgeInsert,
    GraphView,
    Snapshot,
    TemporalGraph,
    Vertex,
    apply_changes,
)
from tgfd.model import (
    ConstantLiteral,
    Delta,
    GraphPattern,
    MatchBinding,
    Tgfd,
    VariableLiteral,
    pair_satisfies,
)


# ---------------------------------------------------------------------------
# graph construction helpers
# ---------------------------------------------------------------------------


def build_graph(
    vertices: Dict[str, str],
    edges: Sequence[Tuple[str, str, str]],
    attrs: Dict[str, Dict[str, str]] = None,
) -> TemporalGraph:
    vmap = {vid: Vertex(vid, label) for vid, label in vertices.items()}
    snap = Snapshot(t=1, edges=frozenset(edges), attrs=dict(attrs or {}))
    return TemporalGraph(vmap, [snap])


def extend(graph: TemporalGraph, changes: Sequence) -> TemporalGraph:
    return apply_changes(graph, ChangeSet(t=graph.T + 1, changes=tuple(changes)))


# ---------------------------------------------------------------------------
# brute-force matching
# ---------------------------------------------------------------------------


def brute_matches(pattern: GraphPattern, view: GraphView) -> Set[MatchBinding]:
    """Injective assignments by plain depth-first enumeration in declaration
    order, pruning on edges to already-placed variables."""
    variables = list(pattern.vars)
    candidates = {}
    for var in variables:
        label = pattern.label_of(var)
        if label == "_":
            candidates[var] = sorted(view.vertices())
        else:
            candidates[var] = sorted(view.vertices_of_type(label))
    out: Set[MatchBinding] = set()
    assignment: Dict[str, str] = {}

    def place(i: int) -> None:
        if i == len(variables):
            out.add(MatchBinding.of(view.t, dict(assignment)))
            return
        var = variables[i]
        for vid in candidates[var]:
            if vid in assignment.values():
                continue
            ok = True
            for (s, l, d) in pattern.edges:
                if s == var and d in assignment and not view.has_edge(vid, l, assignment[d]):
                    ok = False
                    break
                if d == var and s in assignment and not view.has_edge(assignment[s], l, vid):
                    ok = False
                    break
            if ok:
                assignment[var] = vid
                place(i + 1)
                del assignment[var]

    place(0)
    return out


def brute_matches_all_maps(pattern: GraphPattern, view: GraphView) -> Set[MatchBinding]:
    """Even more literal: every injective map of variables onto vertices."""
    variables = list(pattern.vars)
    vids = sorted(view.vertices())
    out: Set[MatchBinding] = set()
    for combo in itertools.permutations(vids, len(variables)):
        assignment = dict(zip(variables, combo))
        label_ok = all(
            pattern.label_of(v) == "_" or view.type_of(assignment[v]) == pattern.label_of(v)
            for v in variables
        )
        if not label_ok:
            continue
        if all(
            view.has_edge(assignment[s], l, assignment[d]) for (s, l, d) in pattern.edges
        ):
            out.add(MatchBinding.of(view.t, assignment))
    return out


# ---------------------------------------------------------------------------
# pairwise violation oracle
# ---------------------------------------------------------------------------


def oracle_violations(graph: TemporalGraph, sigma: Tgfd) -> Set[Tuple]:
    """Violation keys from first principles: brute matches per snapshot, a
    double loop over in-interval pairs for variable consequents, and the
    degenerate self-pair check for constant consequents."""
    matches = {
        t: sorted(brute_matches(sigma.pattern, graph.view(t)), key=lambda b: b.items)
        for t in range(1, graph.T + 1)
    }
    x = sorted(sigma.x_literals, key=str)
    y = sorted(sigma.y_literals, key=str)
    y_constant = all(isinstance(l, ConstantLiteral) for l in y)
    out: Set[Tuple] = set()
    if y_constant:
        for t in range(1, graph.T + 1):
            for h in matches[t]:
                if pair_satisfies(h, h, x, graph) and not pair_satisfies(h, h, y, graph):
                    out.add((sigma.name, t, t, h.items, h.items))
        return out
    for ti in range(1, graph.T + 1):
        for tj in range(ti, graph.T + 1):
            if not sigma.delta.contains(tj - ti):
                continue
            for hi in matches[ti]:
                for hj in matches[tj]:
                    if ti == tj and hi.items >= hj.items:
                        continue
                    violated = False
                    for a, b in ((hi, hj), (hj, hi)):
                        if pair_satisfies(a, b, x, graph) and not pair_satisfies(a, b, y, graph):
                            violated = True
                    if violated:
                        out.add((sigma.name, ti, tj, hi.items, hj.items))
    return out


def engine_violation_keys(violations) -> Set[Tuple]:
    """Project engine violations onto the oracle's key shape."""
    from tgfd.detection import PairViolation

    out: Set[Tuple] = set()
    for v in violations:
        if isinstance(v, PairViolation):
            a, b = sorted(
                [(v.binding_i.t, v.binding_i.items), (v.binding_j.t, v.binding_j.items)]
            )
            out.add((v.tgfd, a[0], b[0], a[1], b[1]))
        else:
            out.add((v.tgfd, v.binding.t, v.binding.t, v.binding.items, v.binding.items))
    return out


def gfd_snapshot_oracle(graph: TemporalGraph, sigma: Tgfd) -> Set[Tuple]:
    """Snapshot-local validator: each snapshot checked independently."""
    x = sorted(sigma.x_literals, key=str)
    y = sorted(sigma.y_literals, key=str)
    y_constant = all(isinstance(l, ConstantLiteral) for l in y)
    out: Set[Tuple] = set()
    for t in range(1, graph.T + 1):
        ms = sorted(brute_matches(sigma.pattern, graph.view(t)), key=lambda b: b.items)
        if y_constant:
            for h in ms:
                if pair_satisfies(h, h, x, graph) and not pair_satisfies(h, h, y, graph):
                    out.add((sigma.name, t, t, h.items, h.items))
            continue
        for i in range(len(ms)):
            for j in range(i + 1, len(ms)):
                hi, hj = ms[i], ms[j]
                violated = False
                for a, b in ((hi, hj), (hj, hi)):
                    if pair_satisfies(a, b, x, graph) and not pair_satisfies(a, b, y, graph):
                        violated = True
                if violated:
                    out.add((sigma.name, t, t, hi.items, hj.items))
    return out


# ---------------------------------------------------------------------------
# random instances
# ---------------------------------------------------------------------------

TYPE_POOL = ["person", "city", "team", "org", "item", "tag"]
LABEL_POOL = ["knows", "in", "plays", "owns"]
ATTR_POOL = ["name", "rank", "code"]
VALUE_POOL = ["a", "b", "c", "d"]


def random_graph(rng: random.Random, n_vertices: int, n_edges: int, n_types: int = 4) -> TemporalGraph:
    vertices = {f"v{i}": TYPE_POOL[rng.randrange(n_types)] for i in range(n_vertices)}
    vids = sorted(vertices)
    edges = set()
    guard = 0
    while len(edges) < n_edges and guard < 40 * n_edges:
        guard += 1
        a, b = rng.choice(vids), rng.choice(vids)
        if a != b:
            edges.add((a, rng.choice(LABEL_POOL), b))
    attrs = {
        vid: {name: rng.choice(VALUE_POOL) for name in ATTR_POOL} for vid in vids
    }
    return build_graph(vertices, sorted(edges), attrs)


def random_changes(
    rng: random.Random,
    graph: TemporalGraph,
    t: int,
    count: int,
    profile: Tuple[float, float, float] = (0.4, 0.3, 0.3),
) -> ChangeSet:
    """(attr updates, edge deletions, edge insertions) fractions."""
    au_frac, ed_frac, ei_frac = profile
    n_ed = round(ed_frac * count)
    n_ei = round(ei_frac * count)
    n_au = count - n_ed - n_ei
    snap = graph.snapshots[-1]
    vids = sorted(graph.vertices)
    live = set(snap.edges)
    changes = []
    deletable = sorted(live)
    rng.shuffle(deletable)
    for e in deletable[: min(n_ed, len(deletable))]:
        changes.append(EdgeDelete(*e))
        live.discard(e)
    added = 0
    guard = 0
    while added < n_ei and guard < 100 * n_ei + 50:
        guard += 1
        a, b = rng.choice(vids), rng.choice(vids)
        if a == b:
            continue
        e = (a, rng.choice(LABEL_POOL), b)
        if e in live:
            continue
        changes.append(EdgeInsert(*e))
        live.add(e)
        added += 1
    for _ in range(n_au):
        vid = rng.choice(vids)
        name = rng.choice(ATTR_POOL)
        current = snap.attr(vid, name)
        changes.append(AttrSet(vid, name, rng.choice([v for v in VALUE_POOL if v != current])))
    return ChangeSet(t=t, changes=tuple(changes))


def random_temporal_graph(
    rng: random.Random,
    n_vertices: int = 40,
    n_edges: int = 80,
    T: int = 6,
    chg: float = 0.1,
    profile: Tuple[float, float, float] = (0.4, 0.3, 0.3),
) -> TemporalGraph:
    graph = random_graph(rng, n_vertices, n_edges)
    count = max(1, round(chg * n_edges))
    for t in range(2, T + 1):
        graph = apply_changes(graph, random_changes(rng, graph, t, count, profile))
    return graph


def random_pattern(rng: random.Random, max_edges: int = 4) -> GraphPattern:
    """Small connected pattern over the shared type pool."""
    n_edges = rng.randint(1, max_edges)
    variables = ["x", "y", "z", "w", "u"][: n_edges + 1]
    nodes = [(v, TYPE_POOL[rng.randrange(4)]) for v in variables]
    edges = []
    for i in range(1, len(variables)):
        # attach each new variable to a previous one; direction random
        other = variables[rng.randrange(i)]
        label = rng.choice(LABEL_POOL)
        if rng.random() < 0.5:
            edges.append((other, label, variables[i]))
        else:
            edges.append((variables[i], label, other))
    edges = edges[:n_edges]
    return GraphPattern(nodes, edges)


def pair_isolated_instance(
    n_entities: int = 100,
    slots: int = 5,
    duplicate_names: int = 0,
) -> Tuple[TemporalGraph, Tgfd]:
    """A clean instance whose satisfying-pair pool is fully known.

    Entity i is a person/team edge alive only at the two timestamps of its
    slot, so with interval (0, 1) each entity contributes exactly one
    satisfying pair and no violations exist.  duplicate_names > 0 gives that
    many entities per slot a shared name, adding same-timestamp pairs.
    """
    vertices: Dict[str, str] = {}
    attrs: Dict[str, Dict[str, str]] = {}
    base_edges: List[Tuple[str, str, str]] = []
    per_slot: Dict[int, List[Tuple[str, str, str]]] = {j: [] for j in range(slots)}
    for i in range(n_entities):
        a, b = f"a{i}", f"b{i}"
        vertices[a] = "person"
        vertices[b] = "team"
        slot = i % slots
        dup = i % slots == slot and (i // slots) < duplicate_names
        attrs[a] = {"name": f"shared{slot}" if dup else f"n{i}"}
        attrs[b] = {"code": "ok"}
        edge = (a, "plays", b)
        per_slot[slot].append(edge)
        if slot == 0:
            base_edges.append(edge)
    graph = build_graph(vertices, base_edges, attrs)
    T = 2 * slots
    for t in range(2, T + 1):
        changes: List = []
        if t % 2 == 1:  # a new slot begins at odd timestamps
            old_slot = (t - 3) // 2
            new_slot = (t - 1) // 2
            changes.extend(EdgeDelete(*e) for e in per_slot[old_slot])
            changes.extend(EdgeInsert(*e) for e in per_slot[new_slot])
        graph = apply_changes(graph, ChangeSet(t=t, changes=tuple(changes)))
    sigma = Tgfd(
        "pairs",
        GraphPattern([("x", "person"), ("y", "team")], [("x", "plays", "y")]),
        Delta(0, 1),
        [VariableLiteral("x", "name", "x", "name")],
        [VariableLiteral("y", "code", "y", "code")],
    )
    return graph, sigma


def exotic_pattern(rng: random.Random) -> GraphPattern:
    """Shapes the tree generator never emits: diamonds, directed cycles,
    parallel labels, wildcard hubs."""
    t = lambda: TYPE_POOL[rng.randrange(4)]
    l = lambda: rng.choice(LABEL_POOL)
    kind = rng.randrange(4)
    if kind == 0:
        return GraphPattern(
            [("x", t()), ("y", t()), ("z", t()), ("w", t())],
            [("x", l(), "y"), ("x", l(), "z"), ("y", l(), "w"), ("z", l(), "w")],
        )
    if kind == 1:
        return GraphPattern(
            [("x", t()), ("y", t()), ("z", t())],
            [("x", l(), "y"), ("y", l(), "z"), ("z", l(), "x")],
        )
    if kind == 2:
        la, lb = rng.sample(LABEL_POOL, 2)
        return GraphPattern(
            [("x", t()), ("y", t()), ("z", t())],
            [("x", la, "y"), ("x", lb, "y"), ("y", la, "z")],
        )
    return GraphPattern(
        [("x", "_"), ("y", t()), ("z", t())],
        [("y", l(), "x"), ("x", l(), "z")],
    )


def exotic_rule(rng: random.Random, name: str) -> Tgfd:
    pattern = exotic_pattern(rng)
    variables = list(pattern.vars)
    p = rng.randint(0, 2)
    q = rng.randint(p, p + 3)
    x = []
    if rng.random() > 0.25:  # else: empty antecedent
        var = rng.choice(variables)
        x.append(VariableLiteral(var, "name", var, "name"))
        if rng.random() < 0.4:
            x.append(ConstantLiteral(rng.choice(variables), "rank", rng.choice(VALUE_POOL)))
    y_var = rng.choice(variables)
    if rng.random() < 0.4:
        y = [ConstantLiteral(y_var, "code", rng.choice(VALUE_POOL))]
    else:
        y = [VariableLiteral(y_var, "code", y_var, "code")]
    return Tgfd(name, pattern, Delta(p, q), x, y)


def skewed_fragments(graph: TemporalGraph, n: int, rng: random.Random):
    """Worker 1 owns roughly 70% of the vertices; the rest split the rest."""
    from tgfd.graph import Fragment

    vids = sorted(graph.vertices)
    rng.shuffle(vids)
    cut = int(0.7 * len(vids))
    frags = [Fragment(worker_id=1, owned_vertices=frozenset(vids[:cut]))]
    rest = vids[cut:]
    per = max(1, len(rest) // max(1, n - 1))
    for w in range(2, n + 1):
        chunk = rest[(w - 2) * per :] if w == n else rest[(w - 2) * per : (w - 1) * per]
        frags.append(Fragment(worker_id=w, owned_vertices=frozenset(chunk)))
    owned = set()
    for f in frags:
        owned |= f.owned_vertices
    missing = frozenset(set(graph.vertices) - owned)
    if missing:
        frags[0] = Fragment(
            worker_id=1, owned_vertices=frags[0].owned_vertices | missing
        )
    return frags


def random_tgfd(rng: random.Random, name: str, max_edges: int = 4, T: int = 6) -> Tgfd:
    pattern = random_pattern(rng, max_edges)
    variables = list(pattern.vars)
    p = rng.randint(0, 2)
    q = rng.randint(p, min(T, p + 3))
    x_literals = []
    if rng.random() < 0.7:
        var = rng.choice(variables)
        x_literals.append(VariableLiteral(var, "name", var, "name"))
    if rng.random() < 0.5:
        x_literals.append(
            ConstantLiteral(rng.choice(variables), "rank", rng.choice(VALUE_POOL))
        )
    y_var = rng.choice(variables)
    if rng.random() < 0.5:
        y_literals = [VariableLiteral(y_var, "code", y_var, "code")]
    else:
        y_literals = [ConstantLiteral(y_var, "code", rng.choice(VALUE_POOL))]
    return Tgfd(name, pattern, Delta(p, q), x_literals, y_literals)
