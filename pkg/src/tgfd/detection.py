"""Incremental violation detection over a stream of match sets.

Matches are partitioned by the values realizing the antecedent literals
(an X key), sub-partitioned by consequent values (an XY key), with the
timestamps of each class recorded.  A new match at time t is compared only
against indexed matches whose timestamps fall in its permissible range.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .graph import ChangeSet, TemporalGraph, derive_changesets
from .matcher import IncrementalMatcher, tgfd_paths
from .model import (
    ConstantLiteral,
    Delta,
    MatchBinding,
    Tgfd,
    VariableLiteral,
    literal_sort_key,
    normalize_all,
)

XKey = Tuple
XYKey = Tuple


@dataclass(frozen=True)
class PairViolation:
    tgfd: str
    binding_i: MatchBinding
    binding_j: MatchBinding

    def __post_init__(self):
        a, b = self.binding_i, self.binding_j
        if (b.t, b.items) < (a.t, a.items):
            object.__setattr__(self, "binding_i", b)
            object.__setattr__(self, "binding_j", a)


@dataclass(frozen=True)
class ConstantViolation:
    tgfd: str
    binding: MatchBinding
    failed: ConstantLiteral


Violation = Union[PairViolation, ConstantViolation]


def violation_key(v: Violation) -> Tuple:
    """Canonical identity used for ordering, set comparison, and scoring."""
    if isinstance(v, PairViolation):
        return (
            v.tgfd,
            v.binding_i.t,
            v.binding_j.t,
            v.binding_i.vertex_ids(),
            v.binding_j.vertex_ids(),
            v.binding_i.items,
            v.binding_j.items,
        )
    return (
        v.tgfd,
        v.binding.t,
        v.binding.t,
        v.binding.vertex_ids(),
        v.binding.vertex_ids(),
        v.binding.items,
        v.binding.items,
    )


def pair_id(v: Violation) -> Tuple:
    """Scoring identity: (rule, (t_i, ids_i), (t_j, ids_j)); constant
    violations count as degenerate pairs."""
    if isinstance(v, PairViolation):
        sides = sorted(
            [(v.binding_i.t, v.binding_i.vertex_ids()), (v.binding_j.t, v.binding_j.vertex_ids())]
        )
        return (v.tgfd, sides[0], sides[1])
    side = (v.binding.t, v.binding.vertex_ids())
    return (v.tgfd, side, side)


def format_violation(v: Violation) -> str:
    if isinstance(v, PairViolation):
        return (
            f"{v.tgfd} PAIR t_i={v.binding_i.t} t_j={v.binding_j.t} "
            f"{v.binding_i} {v.binding_j}"
        )
    return f"{v.tgfd} CONST t={v.binding.t} {v.binding} failed={v.failed}"


def permissible_range(i: int, delta: Delta, T: int) -> List[int]:
    """Timestamps j in [1, T] with p <= |j - i| <= q."""
    if not 1 <= i <= T:
        raise ValueError(f"timestamp {i} outside [1, {T}]")
    return [j for j in range(1, T + 1) if delta.contains(j - i)]


# ---------------------------------------------------------------------------
# value profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValueProfile:
    """Literal values realized by one binding, split by evaluation route."""

    xkey: XKey                       # self-form X values (hashable route)
    x_general: Tuple                 # (left, right) values per general X literal
    y_const_failed: Optional[ConstantLiteral]
    y_self: Optional[Tuple]          # self-form Y values; None when incomplete
    y_general: Optional[Tuple]       # (left, right) per general Y literal


class RulePlan:
    """A rule's literals sorted into hashing and pairwise-evaluation routes."""

    def __init__(self, sigma: Tgfd):
        self.sigma = sigma
        self.x_const: List[ConstantLiteral] = []
        self.x_self: List[VariableLiteral] = []
        self.x_general: List[VariableLiteral] = []
        for lit in sorted(sigma.x_literals, key=literal_sort_key):
            if isinstance(lit, ConstantLiteral):
                self.x_const.append(lit)
            elif lit.is_self_form:
                self.x_self.append(lit)
            else:
                self.x_general.append(lit)
        self.y_const: List[ConstantLiteral] = []
        self.y_self: List[VariableLiteral] = []
        self.y_general: List[VariableLiteral] = []
        for lit in sorted(sigma.y_literals, key=literal_sort_key):
            if isinstance(lit, ConstantLiteral):
                self.y_const.append(lit)
            elif lit.is_self_form:
                self.y_self.append(lit)
            else:
                self.y_general.append(lit)

    def profile(self, binding: MatchBinding, view_attr) -> Optional[ValueProfile]:
        """None when the binding can never realize X with any partner."""
        for lit in self.x_const:
            if view_attr(binding.get(lit.var), lit.attr) != lit.value:
                return None
        xvals = []
        for lit in self.x_self:
            value = view_attr(binding.get(lit.var1), lit.attr1)
            if value is None:
                return None
            xvals.append(value)
        x_general = tuple(
            (view_attr(binding.get(l.var1), l.attr1), view_attr(binding.get(l.var2), l.attr2))
            for l in self.x_general
        )
        y_const_failed = None
        for lit in self.y_const:
            if view_attr(binding.get(lit.var), lit.attr) != lit.value:
                y_const_failed = lit
                break
        y_self: Optional[Tuple] = None
        if self.y_self:
            vals = []
            complete = True
            for lit in self.y_self:
                value = view_attr(binding.get(lit.var1), lit.attr1)
                if value is None:
                    complete = False
                    break
                vals.append(value)
            y_self = tuple(vals) if complete else None
        y_general = tuple(
            (view_attr(binding.get(l.var1), l.attr1), view_attr(binding.get(l.var2), l.attr2))
            for l in self.y_general
        ) if self.y_general else ()
        return ValueProfile(tuple(xvals), x_general, y_const_failed, y_self, y_general)

    @property
    def pair_based(self) -> bool:
        """Whether the consequent compares the two matches (variable form).
        Constant consequents are checked per match instead."""
        return bool(self.y_self or self.y_general)

    def pair_x_ok(self, a: "IndexEntry", b: "IndexEntry") -> bool:
        """General X literals, evaluated with a on the left."""
        for idx in range(len(self.x_general)):
            left = a.profile.x_general[idx][0]
            right = b.profile.x_general[idx][1]
            if left is None or right is None or left != right:
                return False
        return True

    def pair_y_ok(self, a: "IndexEntry", b: "IndexEntry") -> bool:
        if self.y_const:
            if a.profile.y_const_failed is not None or b.profile.y_const_failed is not None:
                return False
        if self.y_self:
            if a.profile.y_self is None or b.profile.y_self is None:
                return False
            if a.profile.y_self != b.profile.y_self:
                return False
        for idx in range(len(self.y_general)):
            left = a.profile.y_general[idx][0]
            right = b.profile.y_general[idx][1]
            if left is None or right is None or left != right:
                return False
        return True

    def pair_violates(self, a: "IndexEntry", b: "IndexEntry") -> bool:
        """Either orientation satisfying X while failing Y."""
        for left, right in ((a, b), (b, a)):
            if self.pair_x_ok(left, right) and not self.pair_y_ok(left, right):
                return True
        return False


@dataclass(frozen=True)
class IndexEntry:
    t: int
    binding: MatchBinding
    profile: ValueProfile
    owner: int = 0  # fragment owning the binding's anchor; 0 when sequential


class MatchIndex:
    """Per-rule partitions of indexed matches by X and XY values."""

    def __init__(self, plan: RulePlan):
        self.plan = plan
        self.pi_x: Dict[XKey, List[IndexEntry]] = {}
        self.pi_xy: Dict[XKey, Dict[XYKey, List[IndexEntry]]] = {}
        self.gamma_x: Dict[XKey, List[int]] = {}
        self.gamma_xy: Dict[Tuple[XKey, XYKey], List[int]] = {}
        self.pairs_compared = 0

    def insert(self, entry: IndexEntry) -> None:
        key = entry.profile.xkey
        self.pi_x.setdefault(key, []).append(entry)
        self.gamma_x.setdefault(key, []).append(entry.t)
        xy = entry.profile.y_self
        self.pi_xy.setdefault(key, {}).setdefault(xy, []).append(entry)
        self.gamma_xy.setdefault((key, xy), []).append(entry.t)

    def partners(self, entry: IndexEntry, rng: Sequence[int]) -> Iterable[IndexEntry]:
        allowed = set(rng)
        for other in self.pi_x.get(entry.profile.xkey, ()):
            if other.t in allowed:
                yield other


def mu_x(index: MatchIndex, entry: IndexEntry) -> Optional[XYKey]:
    """The XY class an indexed match belongs to."""
    return entry.profile.y_self


def incted_step(
    index: MatchIndex,
    sigma: Tgfd,
    new_matches: Iterable[MatchBinding],
    graph_attr,
    T: int,
    owner_of=None,
    cross_only: bool = False,
    checked_pairs: Optional[List] = None,
) -> List[Violation]:
    """Index the new matches of one timestamp and return the new violations.

    graph_attr(t) must return a (vid, name) -> value lookup for snapshot t.
    With cross_only, only pairs whose entries carry different owners are
    emitted (the coordinator's role); checked_pairs, when given, records
    every pair actually compared.
    """
    plan = index.plan
    violations: List[Violation] = []
    for binding in sorted(new_matches, key=lambda b: b.items):
        attr_t = graph_attr(binding.t)
        profile = plan.profile(binding, attr_t)
        if profile is None:
            continue  # can never realize X; never enters the partitions
        owner = owner_of(binding) if owner_of else 0
        entry = IndexEntry(t=binding.t, binding=binding, profile=profile, owner=owner)
        if plan.y_const and not cross_only:
            # the unary check is the degenerate pair of the match with itself
            if profile.y_const_failed is not None and plan.pair_x_ok(entry, entry):
                violations.append(
                    ConstantViolation(sigma.name, binding, profile.y_const_failed)
                )
        if plan.pair_based:
            rng = permissible_range(binding.t, sigma.delta, T)
            for other in index.partners(entry, rng):
                if other.binding == entry.binding:
                    continue
                if cross_only and other.owner == entry.owner:
                    continue
                index.pairs_compared += 1
                if checked_pairs is not None:
                    checked_pairs.append((other.binding, entry.binding))
                if plan.pair_violates(other, entry):
                    violations.append(PairViolation(sigma.name, other.binding, entry.binding))
        index.insert(entry)
    return sorted(violations, key=violation_key)


def snapshot_attr_fn(graph: TemporalGraph):
    def graph_attr(t: int):
        snap = graph.snapshot(t)

        def attr(vid: Optional[str], name: str) -> Optional[str]:
            if vid is None:
                return None
            return snap.attr(vid, name)

        return attr

    return graph_attr


def nontrivially_exercised(index: MatchIndex, delta: Delta) -> bool:
    """Whether some pair of X-equal matches fell inside the interval, i.e.
    the rule constrained at least one pair."""
    for ts in index.gamma_x.values():
        ordered = sorted(ts)
        for i in range(len(ordered)):
            for j in range(i + 1, len(ordered)):
                if delta.contains(ordered[j] - ordered[i]):
                    return True
    return False


@dataclass
class DetectionResult:
    violations: Dict[str, List[Violation]]
    pairs_compared: Dict[str, int]
    nontrivial: Dict[str, bool]
    iso_searches: int = 0

    def all_violations(self) -> List[Violation]:
        out = []
        for name in sorted(self.violations):
            out.extend(self.violations[name])
        return sorted(out, key=violation_key)


def apply_mode(tgfds: Sequence[Tgfd], mode: str) -> List[Tgfd]:
    """tgfd keeps intervals; gfd forces (0, 0); upper-only keeps q, zeroes p."""
    if mode == "tgfd":
        return list(tgfds)
    if mode == "gfd":
        return [s.with_delta(Delta(0, 0)) for s in tgfds]
    if mode == "upper-only":
        return [s.with_delta(Delta(0, s.delta.q)) for s in tgfds]
    raise ValueError(f"unknown mode {mode!r}")


def detect_sequential(
    graph: TemporalGraph,
    tgfds: Sequence[Tgfd],
    changesets: Optional[Sequence[ChangeSet]] = None,
) -> DetectionResult:
    """Full matching on the first snapshot, incremental maintenance after,
    indexing each timestamp's matches as it streams by."""
    rules = normalize_all(tgfds)
    if changesets is None:
        changesets = derive_changesets(graph)
    by_t = {cs.t: cs for cs in changesets}
    graph_attr = snapshot_attr_fn(graph)

    matchers: Dict[str, IncrementalMatcher] = {}
    indexes: Dict[str, MatchIndex] = {}
    violations: Dict[str, List[Violation]] = {}
    for sigma in rules:
        paths = tgfd_paths(sigma)
        matchers[sigma.name] = IncrementalMatcher(sigma.pattern, paths, graph.view(1))
        indexes[sigma.name] = MatchIndex(RulePlan(sigma))
        violations[sigma.name] = []

    for t in range(1, graph.T + 1):
        if t > 1:
            cs = by_t.get(t)
            changes = cs.changes if cs else ()
            for sigma in rules:
                matcher = matchers[sigma.name]
                for change in changes:
                    matcher.apply(change)
        for sigma in rules:
            matches = matchers[sigma.name].topological_matches(t)
            violations[sigma.name].extend(
                incted_step(indexes[sigma.name], sigma, matches, graph_attr, graph.T)
            )

    for name in violations:
        violations[name] = sorted(violations[name], key=violation_key)
    return DetectionResult(
        violations=violations,
        pairs_compared={name: idx.pairs_compared for name, idx in indexes.items()},
        nontrivial={
            sigma.name: nontrivially_exercised(indexes[sigma.name], sigma.delta)
            for sigma in rules
        },
        iso_searches=sum(m.iso_searches for m in matchers.values()),
    )
