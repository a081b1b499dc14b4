"""Reasoning over rule sets: satisfiability, implication, and the axioms.

Satisfiability and implication both reduce to a closure of literals with
validity windows.  Validity is computed pointwise over the integer gap
values 0..horizon: a rule fires at gap g when g lies in its interval and
its antecedent is derivable from the literals valid at g via transitivity
of equality; the consequent then becomes valid at g.  Maximal runs of gaps
form the validity intervals, which makes interval merging exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .errors import ArityMismatch
from .model import (
    WILDCARD,
    ConstantLiteral,
    Delta,
    GraphPattern,
    Literal,
    Tgfd,
    VariableLiteral,
    literal_sort_key,
    normalize_all,
)

Interval = Tuple[int, int]


def runs_to_intervals(points: Iterable[int]) -> Tuple[Interval, ...]:
    """Maximal runs of consecutive integers."""
    out: List[Interval] = []
    for p in sorted(set(points)):
        if out and p == out[-1][1] + 1:
            out[-1] = (out[-1][0], p)
        else:
            out.append((p, p))
    return tuple(out)


def intervals_contain(intervals: Sequence[Interval], delta: Delta) -> Optional[Interval]:
    """The interval containing the whole delta, if any (intervals are
    disjoint maximal runs, so union containment equals single containment)."""
    for lo, hi in intervals:
        if lo <= delta.p and delta.q <= hi:
            return (lo, hi)
    return None


# ---------------------------------------------------------------------------
# pattern embedding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Embedding:
    """Injective, label- and edge-preserving map of one pattern's variables
    into another's.  A wildcard node maps anywhere; a labeled node never
    maps onto a wildcard."""

    items: Tuple[Tuple[str, str], ...]

    @property
    def mapping(self) -> Dict[str, str]:
        return dict(self.items)

    def translate(self, lit: Literal) -> Literal:
        m = self.mapping
        if isinstance(lit, ConstantLiteral):
            return ConstantLiteral(m[lit.var], lit.attr, lit.value)
        return VariableLiteral(m[lit.var1], lit.attr1, m[lit.var2], lit.attr2)


def _embed_label_ok(small_label: str, big_label: str) -> bool:
    if small_label == WILDCARD:
        return True
    return small_label == big_label


def all_embeddings(q_small: GraphPattern, q_big: GraphPattern) -> List[Embedding]:
    """Every embedding of q_small into q_big, in canonical order."""
    small_vars = sorted(q_small.vars)
    big_vars = sorted(q_big.vars)
    results: List[Embedding] = []
    assignment: Dict[str, str] = {}
    used: Set[str] = set()

    def ok(var: str, target: str) -> bool:
        if not _embed_label_ok(q_small.label_of(var), q_big.label_of(target)):
            return False
        big_edges = set(q_big.edges)
        for (src, label, dst) in q_small.edges:
            if src == var and dst in assignment:
                if (target, label, assignment[dst]) not in big_edges:
                    return False
            if dst == var and src in assignment:
                if (assignment[src], label, target) not in big_edges:
                    return False
            if src == var and dst == var:
                if (target, label, target) not in big_edges:
                    return False
        return True

    def backtrack(i: int) -> None:
        if i == len(small_vars):
            results.append(Embedding(items=tuple(sorted(assignment.items()))))
            return
        var = small_vars[i]
        for target in big_vars:
            if target in used:
                continue
            if ok(var, target):
                assignment[var] = target
                used.add(target)
                backtrack(i + 1)
                del assignment[var]
                used.discard(target)

    backtrack(0)
    return results


def find_embedding(q_small: GraphPattern, q_big: GraphPattern) -> Optional[Embedding]:
    """First embedding in canonical search order, or None."""
    found = all_embeddings(q_small, q_big)
    return found[0] if found else None


# ---------------------------------------------------------------------------
# pointwise closure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClosureEntry:
    literal: Literal
    validity: Tuple[Interval, ...]


class _EqualityAtoms:
    """Union-find over the attribute terms a match pair exposes.

    A literal relates the earlier match's side ("L") to the later match's
    side ("R"): a constant pins both sides of one term to a value; a
    variable literal ties its left side to the partner's right side.  A
    self-form literal is therefore not a tautology here."""

    def __init__(self):
        self.parent: Dict = {}

    def _find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def _union(self, a, b) -> None:
        ra, rb = self._find(a), self._find(b)
        if ra != rb:
            self.parent[ra] = rb

    def add(self, lit: Literal) -> None:
        if isinstance(lit, ConstantLiteral):
            self._union(("L", lit.var, lit.attr), ("#", lit.value))
            self._union(("R", lit.var, lit.attr), ("#", lit.value))
        else:
            self._union(("L", lit.var1, lit.attr1), ("R", lit.var2, lit.attr2))

    def derivable(self, lit: Literal) -> bool:
        if isinstance(lit, ConstantLiteral):
            c = self._find(("#", lit.value))
            return (
                self._find(("L", lit.var, lit.attr)) == c
                and self._find(("R", lit.var, lit.attr)) == c
            )
        return self._find(("L", lit.var1, lit.attr1)) == self._find(
            ("R", lit.var2, lit.attr2)
        )

    def constants_joined(self, a: str, b: str) -> bool:
        return self._find(("#", a)) == self._find(("#", b))


@dataclass(frozen=True)
class _Rule:
    """A member rule translated into the anchor pattern's variables."""

    name: str
    delta: Delta
    x: Tuple[Literal, ...]
    y: Tuple[Literal, ...]


def _translated_rules(members: Sequence[Tuple[Tgfd, Embedding]]) -> List[_Rule]:
    rules = []
    for sigma, f in members:
        rules.append(
            _Rule(
                name=sigma.name,
                delta=sigma.delta,
                x=tuple(sorted((f.translate(l) for l in sigma.x_literals), key=literal_sort_key)),
                y=tuple(sorted((f.translate(l) for l in sigma.y_literals), key=literal_sort_key)),
            )
        )
    return rules


def _closure_at_gap(
    gap: int,
    seeds: Sequence[Literal],
    seed_delta: Optional[Delta],
    rules: Sequence[_Rule],
) -> Set[Literal]:
    """Literals valid at one gap value, to fixpoint."""
    active: Set[Literal] = set()
    if seed_delta is None or seed_delta.contains(gap):
        active.update(seeds)
    changed = True
    while changed:
        changed = False
        atoms = _EqualityAtoms()
        for lit in active:
            atoms.add(lit)
        for rule in rules:
            if not rule.delta.contains(gap):
                continue
            if all(atoms.derivable(x) for x in rule.x):
                for y in rule.y:
                    if y not in active:
                        active.add(y)
                        changed = True
    return active


def closure_for_implication(
    x_literals: Iterable[Literal],
    members: Sequence[Tuple[Tgfd, Embedding]],
    delta: Delta,
    horizon: Optional[int] = None,
) -> List[ClosureEntry]:
    """Literals derivable from X under the embedded rules, each with the gap
    intervals on which it holds.  X itself seeds the closure on delta."""
    rules = _translated_rules(members)
    seeds = sorted(set(x_literals), key=literal_sort_key)
    if horizon is None:
        horizon = max([delta.q] + [r.delta.q for r in rules], default=delta.q)
    valid_points: Dict[Literal, List[int]] = {}
    for gap in range(0, horizon + 1):
        for lit in _closure_at_gap(gap, seeds, delta, rules):
            valid_points.setdefault(lit, []).append(gap)
    entries = [
        ClosureEntry(literal=lit, validity=runs_to_intervals(points))
        for lit, points in valid_points.items()
    ]
    return sorted(entries, key=lambda e: literal_sort_key(e.literal))


# ---------------------------------------------------------------------------
# satisfiability
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Conflict:
    anchor: str
    literal_a: ConstantLiteral
    literal_b: ConstantLiteral
    interval: Interval


@dataclass(frozen=True)
class SatResult:
    satisfiable: bool
    conflict: Optional[Conflict] = None


def overlap_class(anchor: Tgfd, tgfds: Sequence[Tgfd]) -> List[Tuple[Tgfd, Embedding]]:
    """Rules embeddable into the anchor's pattern whose interval overlaps
    the anchor's, under every embedding."""
    members: List[Tuple[Tgfd, Embedding]] = []
    for sigma in tgfds:
        if not sigma.delta.overlaps(anchor.delta):
            continue
        for f in all_embeddings(sigma.pattern, anchor.pattern):
            members.append((sigma, f))
    return members


def embedded_class(anchor_pattern: GraphPattern, tgfds: Sequence[Tgfd]) -> List[Tuple[Tgfd, Embedding]]:
    """Rules embeddable into the pattern, under every embedding (implication
    membership carries no interval condition)."""
    members: List[Tuple[Tgfd, Embedding]] = []
    for sigma in tgfds:
        for f in all_embeddings(sigma.pattern, anchor_pattern):
            members.append((sigma, f))
    return members


def _conflict_scan(
    anchor: Tgfd,
    rules: Sequence[_Rule],
) -> Optional[Tuple[ConstantLiteral, ConstantLiteral, List[int]]]:
    """Gap values where the closure of the anchor's antecedent binds one
    attribute to two distinct constants."""
    horizon = max([anchor.delta.q] + [r.delta.q for r in rules])
    seeds = sorted(set(anchor.x_literals), key=literal_sort_key)
    found_at: List[Tuple[int, Tuple[ConstantLiteral, ConstantLiteral]]] = []
    for gap in range(0, horizon + 1):
        active = _closure_at_gap(gap, seeds, anchor.delta, rules)
        consts = sorted(
            (l for l in active if isinstance(l, ConstantLiteral)),
            key=literal_sort_key,
        )
        atoms = _EqualityAtoms()
        for lit in active:
            atoms.add(lit)
        for i in range(len(consts)):
            for j in range(i + 1, len(consts)):
                a, b = consts[i], consts[j]
                if a.value == b.value:
                    continue
                if atoms.constants_joined(a.value, b.value):
                    found_at.append((gap, (a, b)))
    if not found_at:
        return None
    witness = found_at[0][1]
    points = [gap for gap, pair in found_at if pair == witness]
    return witness[0], witness[1], points


def check_satisfiability(tgfds: Sequence[Tgfd]) -> SatResult:
    """A rule set is unsatisfiable exactly when, for some anchor rule,
    assuming its antecedent forces two distinct constants onto one
    attribute at an overlapping gap."""
    rules_nf = normalize_all(tgfds)
    for anchor in sorted(rules_nf, key=lambda s: s.name):
        members = overlap_class(anchor, rules_nf)
        translated = _translated_rules(members)
        hit = _conflict_scan(anchor, translated)
        if hit is not None:
            lit_a, lit_b, points = hit
            interval = runs_to_intervals(points)[0]
            return SatResult(
                satisfiable=False,
                conflict=Conflict(anchor.name, lit_a, lit_b, interval),
            )
    return SatResult(satisfiable=True)


# ---------------------------------------------------------------------------
# implication
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ImplicationResult:
    implied: bool
    entry: Optional[ClosureEntry] = None


def check_implication(tgfds: Sequence[Tgfd], sigma: Tgfd) -> ImplicationResult:
    """Whether the rule set forces sigma: its consequent must be derivable
    from its antecedent on every gap in its interval."""
    rules_nf = normalize_all(tgfds)
    queries = normalize_all([sigma])
    witness: Optional[ClosureEntry] = None
    for query in queries:
        members = embedded_class(query.pattern, rules_nf)
        rules = _translated_rules(members)
        horizon = max([query.delta.q] + [r.delta.q for r in rules])
        seeds = sorted(set(query.x_literals), key=literal_sort_key)
        y = query.y_literal
        good_points: List[int] = []
        for gap in range(0, horizon + 1):
            active = _closure_at_gap(gap, seeds, query.delta, rules)
            atoms = _EqualityAtoms()
            for lit in active:
                atoms.add(lit)
            if atoms.derivable(y):
                good_points.append(gap)
        validity = runs_to_intervals(good_points)
        if intervals_contain(validity, query.delta) is None:
            return ImplicationResult(
                implied=False,
                entry=ClosureEntry(literal=y, validity=validity) if validity else None,
            )
        witness = ClosureEntry(literal=y, validity=validity)
    return ImplicationResult(implied=True, entry=witness)


# ---------------------------------------------------------------------------
# axioms
# ---------------------------------------------------------------------------

AXIOM_ARITY = {
    "literal-reflexivity": 0,
    "literal-augmentation": 1,
    "pattern-augmentation": 1,
    "transitivity": 2,
    "decomposition": 1,
    "interval-intersection": 2,
    "interval-containment": 1,
}


def _lits(ls: Iterable[Literal]) -> FrozenSet[Literal]:
    return frozenset(ls)


def _translated_match(
    small: GraphPattern,
    big: GraphPattern,
    small_lits: FrozenSet[Literal],
    big_lits: FrozenSet[Literal],
) -> Optional[Embedding]:
    """An embedding of small into big under which the literal sets align."""
    for f in all_embeddings(small, big):
        if frozenset(f.translate(l) for l in small_lits) == big_lits:
            return f
    return None


def axiom_check(rule: str, premises: Sequence[Tgfd], conclusion: Tgfd) -> bool:
    """Whether premises/conclusion instantiate the named inference schema."""
    if rule not in AXIOM_ARITY:
        raise ValueError(f"unknown axiom {rule!r}")
    if len(premises) != AXIOM_ARITY[rule]:
        raise ArityMismatch(f"{rule} takes {AXIOM_ARITY[rule]} premises, got {len(premises)}")

    c = conclusion
    if rule == "literal-reflexivity":
        return bool(c.y_literals) and c.y_literals <= c.x_literals

    if rule == "literal-augmentation":
        (p,) = premises
        return (
            p.pattern.same_shape(c.pattern)
            and p.delta == c.delta
            and p.y_literals == c.y_literals
            and p.x_literals <= c.x_literals
        )

    if rule == "pattern-augmentation":
        (p,) = premises
        if p.delta != c.delta:
            return False
        for f in all_embeddings(p.pattern, c.pattern):
            if (
                frozenset(f.translate(l) for l in p.x_literals) == c.x_literals
                and frozenset(f.translate(l) for l in p.y_literals) == c.y_literals
            ):
                return True
        return False

    if rule == "transitivity":
        def fits(first: Tgfd, second: Tgfd) -> bool:
            # first: Q' with X -> W ; second: Q with W -> Y
            if not (first.delta == second.delta == c.delta):
                return False
            if not second.pattern.same_shape(c.pattern):
                return False
            if second.y_literals != c.y_literals:
                return False
            for f in all_embeddings(first.pattern, second.pattern):
                if (
                    frozenset(f.translate(l) for l in first.x_literals) == c.x_literals
                    and frozenset(f.translate(l) for l in first.y_literals) == second.x_literals
                ):
                    return True
            return False

        a, b = premises
        return fits(a, b) or fits(b, a)

    if rule == "decomposition":
        (p,) = premises
        return (
            p.pattern.same_shape(c.pattern)
            and p.delta == c.delta
            and p.x_literals == c.x_literals
            and len(c.y_literals) == 1
            and c.y_literals <= p.y_literals
        )

    if rule == "interval-intersection":
        a, b = premises
        if not (
            a.pattern.same_shape(c.pattern)
            and b.pattern.same_shape(c.pattern)
            and a.x_literals == b.x_literals == c.x_literals
            and a.y_literals == b.y_literals == c.y_literals
        ):
            return False
        inter = a.delta.intersect(b.delta)
        return inter is not None and inter == c.delta

    if rule == "interval-containment":
        (p,) = premises
        return (
            p.pattern.same_shape(c.pattern)
            and p.x_literals == c.x_literals
            and p.y_literals == c.y_literals
            and c.delta.within(p.delta)
        )

    raise AssertionError("unreachable")
