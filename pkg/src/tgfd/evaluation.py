"""Error injection, scoring, and synthetic temporal graph generation.

Positive errors break the consequent of sampled satisfying match pairs;
negative errors retarget a consequent value into another rule's antecedent
domain.  Scoring compares detected violations against the injection ledger
over canonical pair identities.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .graph import Snapshot, TemporalGraph
from .matcher import match_snapshot
from .model import (
    ConstantLiteral,
    MatchBinding,
    Tgfd,
    literal_sort_key,
    normalize_all,
    pair_satisfies,
)
from .detection import Violation, pair_id

CHANGE_PROFILES = {
    "uniform": (0.40, 0.30, 0.30),      # attr updates, edge deletions, edge insertions
    "skewed_au": (0.85, 0.075, 0.075),
    "skewed_ed": (0.075, 0.85, 0.075),
    "skewed_ei": (0.075, 0.075, 0.85),
}


@dataclass(frozen=True)
class Mutation:
    t: int
    vid: str
    attr: str
    old: Optional[str]
    new: str
    kind: str = "+"


@dataclass
class InjectionLedger:
    gamma_plus: List[Tuple] = field(default_factory=list)
    gamma_minus: List[Tuple] = field(default_factory=list)
    mutations: List[Mutation] = field(default_factory=list)
    pool_size: int = 0
    sampled_positive: int = 0
    sampled_negative: int = 0
    flags: List[str] = field(default_factory=list)

    def plus_set(self) -> Set[Tuple]:
        return set(self.gamma_plus)

    def minus_set(self) -> Set[Tuple]:
        return set(self.gamma_minus)


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    fpr: float
    f1: float
    fpr_defined: bool = True


def _pair_key(tgfd: str, a: MatchBinding, b: MatchBinding) -> Tuple:
    sides = sorted([(a.t, a.vertex_ids()), (b.t, b.vertex_ids())])
    return (tgfd, sides[0], sides[1])


def _all_matches(graph: TemporalGraph, sigma: Tgfd) -> Dict[int, List[MatchBinding]]:
    out: Dict[int, List[MatchBinding]] = {}
    for t in range(1, graph.T + 1):
        out[t] = sorted(match_snapshot(sigma.pattern, graph.view(t)), key=lambda b: b.items)
    return out


def satisfying_pairs(graph: TemporalGraph, sigma: Tgfd) -> List[Tuple[MatchBinding, MatchBinding]]:
    """Match pairs inside the rule's interval satisfying both X and Y,
    canonicalized as (earlier, later)."""
    return _pool_from_matches(graph, sigma, _all_matches(graph, sigma))


def _mutate_snapshot(snap: Snapshot, vid: str, attr: str, value: str) -> Snapshot:
    attrs = {v: dict(named) for v, named in snap.attrs.items()}
    attrs.setdefault(vid, {})[attr] = value
    return Snapshot(t=snap.t, edges=snap.edges, attrs=attrs)


def _y_targets(sigma: Tgfd, binding: MatchBinding) -> List[Tuple[str, str]]:
    """(vertex, attribute) slots realizing the consequent on this binding."""
    slots = []
    for lit in sorted(sigma.y_literals, key=literal_sort_key):
        if isinstance(lit, ConstantLiteral):
            slots.append((binding.assignment[lit.var], lit.attr))
        else:
            slots.append((binding.assignment[lit.var1], lit.attr1))
    return slots


def _x_attr_names(sigma: Tgfd) -> Set[str]:
    names = set()
    for lit in sigma.x_literals:
        if isinstance(lit, ConstantLiteral):
            names.add(lit.attr)
        else:
            names.add(lit.attr1)
            names.add(lit.attr2)
    return names


def _y_attr_names(sigma: Tgfd) -> Set[str]:
    names = set()
    for lit in sigma.y_literals:
        if isinstance(lit, ConstantLiteral):
            names.add(lit.attr)
        else:
            names.add(lit.attr1)
            names.add(lit.attr2)
    return names


def _domain_values(graph: TemporalGraph, attr: str) -> List[str]:
    values = set()
    for snap in graph.snapshots:
        for named in snap.attrs.values():
            if attr in named:
                values.add(named[attr])
    return sorted(values)


def inject_errors(
    graph: TemporalGraph,
    tgfds: Sequence[Tgfd],
    err_rate: float,
    seed: int,
    include_negative: bool = False,
) -> Tuple[TemporalGraph, InjectionLedger]:
    """Mutate consequent values of sampled satisfying pairs.

    Positive errors write a fresh out-of-domain value; negative errors write
    a value drawn from the antecedent domain of another rule sharing the
    attribute name.  The ledger records every pair made violating, including
    collateral pairs of the mutated matches.
    """
    if not 0 <= err_rate <= 1:
        raise ValueError("error rate must lie in [0, 1]")
    rules = normalize_all(tgfds)
    rng = random.Random(seed)
    ledger = InjectionLedger()

    matches_by_rule: Dict[str, Dict[int, List[MatchBinding]]] = {}
    pools: Dict[str, List[Tuple[MatchBinding, MatchBinding]]] = {}
    for sigma in rules:
        matches_by_rule[sigma.name] = _all_matches(graph, sigma)
        pools[sigma.name] = _pool_from_matches(graph, sigma, matches_by_rule[sigma.name])
    ledger.pool_size = sum(len(p) for p in pools.values())

    snapshots = list(graph.snapshots)
    counter = 0
    for sigma in sorted(rules, key=lambda s: s.name):
        pool = pools[sigma.name]
        want_pos = round(err_rate * len(pool))
        want_neg = round(err_rate * len(pool)) if include_negative else 0
        if want_pos + want_neg > len(pool):
            ledger.flags.append(
                f"insufficient-pairs:{sigma.name}:{len(pool)}<{want_pos + want_neg}"
            )
        order = list(range(len(pool)))
        rng.shuffle(order)
        taken: Set[Tuple] = set()
        picked_pos: List[Tuple[MatchBinding, MatchBinding]] = []
        picked_neg: List[Tuple[MatchBinding, MatchBinding]] = []
        for idx in order:
            hi, hj = pool[idx]
            endpoint = (hj.t, hj.items)
            if endpoint in taken:
                continue
            taken.add(endpoint)
            if len(picked_pos) < want_pos:
                picked_pos.append((hi, hj))
            elif len(picked_neg) < want_neg:
                picked_neg.append((hi, hj))
            else:
                break

        neg_values = _negative_value_pool(graph, rules, sigma, ledger)
        for kind, picked in (("+", picked_pos), ("-", picked_neg)):
            for hi, hj in picked:
                for vid, attr in _y_targets(sigma, hj):
                    old = snapshots[hj.t - 1].attr(vid, attr)
                    if kind == "+":
                        new = f"__err{counter}__"
                    else:
                        candidates = [v for v in neg_values.get(attr, []) if v != old]
                        if candidates:
                            new = rng.choice(candidates)
                        else:
                            new = f"__neg{counter}__"
                            ledger.flags.append(f"negative-degraded:{sigma.name}")
                    counter += 1
                    snapshots[hj.t - 1] = _mutate_snapshot(
                        snapshots[hj.t - 1], vid, attr, new
                    )
                    ledger.mutations.append(Mutation(hj.t, vid, attr, old, new, kind))
        ledger.sampled_positive += len(picked_pos)
        ledger.sampled_negative += len(picked_neg)

    mutated = TemporalGraph(graph.vertices, snapshots)

    # Ledger every violation the mutations induce, across all rules
    # (collateral pairs of mutated matches included).
    slot_kinds: Dict[Tuple[int, str], Set[str]] = {}
    for m in ledger.mutations:
        slot_kinds.setdefault((m.t, m.vid), set()).add(m.kind)

    def touched(binding: MatchBinding) -> Set[str]:
        kinds: Set[str] = set()
        for _, vid in binding.items:
            kinds |= slot_kinds.get((binding.t, vid), set())
        return kinds

    for sigma in rules:
        y_is_constant = all(
            isinstance(l, ConstantLiteral) for l in sigma.y_literals
        )
        if y_is_constant:
            for t, ms in matches_by_rule[sigma.name].items():
                for h in ms:
                    kinds = touched(h)
                    if not kinds:
                        continue
                    if pair_satisfies(h, h, list(sigma.x_literals), mutated) and not pair_satisfies(
                        h, h, list(sigma.y_literals), mutated
                    ):
                        key = _pair_key(sigma.name, h, h)
                        _ledger_add(ledger, key, kinds)
        else:
            for hi, hj in pools[sigma.name]:
                kinds = touched(hi) | touched(hj)
                if not kinds:
                    continue
                if _pair_violates(sigma, hi, hj, mutated):
                    key = _pair_key(sigma.name, hi, hj)
                    _ledger_add(ledger, key, kinds)

    ledger.gamma_plus.sort()
    ledger.gamma_minus.sort()
    return mutated, ledger


def _pool_from_matches(
    graph: TemporalGraph,
    sigma: Tgfd,
    matches: Dict[int, List[MatchBinding]],
) -> List[Tuple[MatchBinding, MatchBinding]]:
    lits_x = list(sigma.x_literals)
    lits_y = list(sigma.y_literals)
    pool = []
    for ti in range(1, graph.T + 1):
        for tj in range(ti, graph.T + 1):
            if not sigma.delta.contains(tj - ti):
                continue
            for hi in matches[ti]:
                for hj in matches[tj]:
                    if ti == tj and hi.items >= hj.items:
                        continue
                    if pair_satisfies(hi, hj, lits_x, graph) and pair_satisfies(
                        hi, hj, lits_y, graph
                    ):
                        pool.append((hi, hj))
    return pool


def _pair_violates(sigma: Tgfd, hi: MatchBinding, hj: MatchBinding, graph: TemporalGraph) -> bool:
    lits_x = list(sigma.x_literals)
    lits_y = list(sigma.y_literals)
    for a, b in ((hi, hj), (hj, hi)):
        if pair_satisfies(a, b, lits_x, graph) and not pair_satisfies(a, b, lits_y, graph):
            return True
    return False


def _ledger_add(ledger: InjectionLedger, key: Tuple, kinds: Set[str]) -> None:
    if "-" in kinds:
        if key not in ledger.gamma_minus:
            ledger.gamma_minus.append(key)
    else:
        if key not in ledger.gamma_plus:
            ledger.gamma_plus.append(key)


def _negative_value_pool(
    graph: TemporalGraph,
    rules: Sequence[Tgfd],
    sigma: Tgfd,
    ledger: InjectionLedger,
) -> Dict[str, List[str]]:
    """For each consequent attribute, values from the antecedent domain of
    some other rule sharing that attribute name."""
    out: Dict[str, List[str]] = {}
    y_names = _y_attr_names(sigma)
    for attr in sorted(y_names):
        donors = [
            other
            for other in rules
            if other.name != sigma.name and attr in _x_attr_names(other)
        ]
        values: Set[str] = set()
        for other in donors:
            for lit in other.x_literals:
                if isinstance(lit, ConstantLiteral) and lit.attr == attr:
                    values.add(lit.value)
        if donors and not values:
            values.update(_domain_values(graph, attr))
        if values:
            out[attr] = sorted(values)
    return out


def score(violations: Iterable[Violation], ledger: InjectionLedger) -> Metrics:
    """Precision/recall/false-positive rate over canonical pair identities."""
    detected = {pair_id(v) for v in violations}
    plus = ledger.plus_set()
    minus = ledger.minus_set()
    if detected:
        precision = len(detected & plus) / len(detected)
    else:
        precision = 1.0
    if plus:
        recall = len(detected & plus) / len(plus)
    else:
        recall = 1.0
    if minus:
        fpr = len(detected & minus) / len(minus)
        fpr_defined = True
    else:
        fpr = 0.0
        fpr_defined = False
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
    return Metrics(precision=precision, recall=recall, fpr=fpr, f1=f1, fpr_defined=fpr_defined)


def _key_to_json(key: Tuple) -> List:
    tgfd, (ti, ids_i), (tj, ids_j) = key
    return [tgfd, [ti, list(ids_i)], [tj, list(ids_j)]]


def _key_from_json(row: Sequence) -> Tuple:
    tgfd, (ti, ids_i), (tj, ids_j) = row
    return (tgfd, (ti, tuple(ids_i)), (tj, tuple(ids_j)))


def ledger_to_text(ledger: InjectionLedger) -> str:
    doc = {
        "pool_size": ledger.pool_size,
        "sampled_positive": ledger.sampled_positive,
        "sampled_negative": ledger.sampled_negative,
        "flags": list(ledger.flags),
        "mutations": [
            [m.t, m.vid, m.attr, m.old, m.new, m.kind] for m in ledger.mutations
        ],
        "gamma_plus": [_key_to_json(k) for k in ledger.gamma_plus],
        "gamma_minus": [_key_to_json(k) for k in ledger.gamma_minus],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def ledger_from_text(text: str) -> InjectionLedger:
    doc = json.loads(text)
    return InjectionLedger(
        gamma_plus=[_key_from_json(r) for r in doc["gamma_plus"]],
        gamma_minus=[_key_from_json(r) for r in doc["gamma_minus"]],
        mutations=[Mutation(*row) for row in doc["mutations"]],
        pool_size=doc["pool_size"],
        sampled_positive=doc["sampled_positive"],
        sampled_negative=doc["sampled_negative"],
        flags=list(doc["flags"]),
    )


# ---------------------------------------------------------------------------
# synthetic graphs
# ---------------------------------------------------------------------------


def generate_synthetic(
    vertices: int,
    edges: int,
    types: int,
    attrs: int,
    T: int,
    chg_rate: float,
    seed: int,
    profile: str = "uniform",
    n_labels: int = 3,
    value_pool: int = 8,
    hotspot_vids: Optional[Sequence[str]] = None,
) -> TemporalGraph:
    """Random typed graph evolved over T timestamps.

    Per timestamp the change count is chg_rate times the base edge count,
    split per the profile (nearest integer, remainder to attribute updates).
    When hotspot_vids is given, all changes touch only those vertices.
    """
    if profile not in CHANGE_PROFILES:
        raise ValueError(f"unknown profile {profile!r}")
    if vertices < 2 or T < 1:
        raise ValueError("need at least two vertices and one timestamp")
    rng = random.Random(seed)
    from .graph import (
        AttrSet,
        ChangeSet,
        EdgeDelete,
        EdgeInsert,
        Vertex,
        apply_changes,
    )

    vids = [f"v{i}" for i in range(vertices)]
    vertex_map = {vid: Vertex(vid, f"T{rng.randrange(types)}") for vid in vids}
    labels = [f"l{i}" for i in range(n_labels)]
    attr_names = [f"a{i}" for i in range(attrs)]
    values = [f"val{i}" for i in range(value_pool)]

    edge_set: Set[Tuple[str, str, str]] = set()
    guard = 0
    while len(edge_set) < edges and guard < edges * 50:
        guard += 1
        src, dst = rng.choice(vids), rng.choice(vids)
        if src == dst:
            continue
        edge_set.add((src, rng.choice(labels), dst))
    attr_map = {
        vid: {name: rng.choice(values) for name in attr_names} for vid in vids
    }
    graph = TemporalGraph(
        vertex_map, [Snapshot(t=1, edges=frozenset(edge_set), attrs=attr_map)]
    )

    pool_vids = sorted(hotspot_vids) if hotspot_vids else vids
    au_frac, ed_frac, ei_frac = CHANGE_PROFILES[profile]
    n_changes = round(chg_rate * len(edge_set))
    n_ed = round(ed_frac * n_changes)
    n_ei = round(ei_frac * n_changes)
    n_au = n_changes - n_ed - n_ei
    if not attr_names:
        n_au = 0

    live_edges = set(edge_set)
    for t in range(2, T + 1):
        changes = []
        deletable = sorted(
            e for e in live_edges if not hotspot_vids or (e[0] in pool_vids and e[2] in pool_vids)
        )
        for e in rng.sample(deletable, min(n_ed, len(deletable))):
            changes.append(EdgeDelete(*e))
            live_edges.discard(e)
        inserted = 0
        guard = 0
        while inserted < n_ei and guard < n_ei * 100 + 100:
            guard += 1
            src, dst = rng.choice(pool_vids), rng.choice(pool_vids)
            if src == dst:
                continue
            e = (src, rng.choice(labels), dst)
            if e in live_edges:
                continue
            changes.append(EdgeInsert(*e))
            live_edges.add(e)
            inserted += 1
        for _ in range(n_au):
            vid = rng.choice(pool_vids)
            name = rng.choice(attr_names)
            current = graph.snapshots[-1].attr(vid, name)
            choices = [v for v in values if v != current]
            changes.append(AttrSet(vid, name, rng.choice(choices)))
        graph = apply_changes(graph, ChangeSet(t=t, changes=tuple(changes)))
    return graph
