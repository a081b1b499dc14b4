"""Coordinator/worker detection over fragmented graphs.

Workers are concurrent in-process units.  The vertex set is partitioned into
fragments; each (rule, fragment) pair forms a job whose matcher sees the
fragment plus the induced balls around its candidate anchor vertices (the
"shipped" edges).  Each superstep processes one timestamp under a barrier:
workers maintain matches and detect violations among matches anchored on
their own fragment, the coordinator pairs matches across fragments, and job
runtimes outside the allowed band trigger a workload reassignment.
"""

from __future__ import annotations

import random
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .errors import JobOutOfBounds
from .graph import (
    AttrDelete,
    AttrSet,
    EdgeDelete,
    EdgeInsert,
    Fragment,
    GraphView,
    TemporalGraph,
    ball_vertices,
)
from .matcher import IncrementalMatcher, PathPattern, tgfd_paths
from .model import WILDCARD, ConstantLiteral, MatchBinding, Tgfd, normalize_all
from .detection import (
    MatchIndex,
    RulePlan,
    Violation,
    incted_step,
    nontrivially_exercised,
    snapshot_attr_fn,
    violation_key,
)

REBALANCE_FIXED_COST = 1.0
REBALANCE_EDGE_UNIT = 0.01


# ---------------------------------------------------------------------------
# fragmentation
# ---------------------------------------------------------------------------


def make_fragments(graph: TemporalGraph, n: int, seed: Optional[int] = None) -> List[Fragment]:
    """Partition the vertex set over n workers; seeded order when given."""
    if n < 1:
        raise ValueError("need at least one worker")
    vids = sorted(graph.vertices)
    if seed is not None:
        random.Random(seed).shuffle(vids)
    buckets: List[List[str]] = [[] for _ in range(n)]
    for i, vid in enumerate(vids):
        buckets[i % n].append(vid)
    return [
        Fragment(worker_id=r + 1, owned_vertices=frozenset(bucket))
        for r, bucket in enumerate(buckets)
    ]


def owner_map(fragments: Sequence[Fragment]) -> Dict[str, int]:
    owners: Dict[str, int] = {}
    for frag in fragments:
        for vid in frag.owned_vertices:
            owners[vid] = frag.worker_id
    return owners


# ---------------------------------------------------------------------------
# workload model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Joblet:
    tgfd: str
    path_index: int
    worker_id: int
    center: str
    radius: int
    estimated_size: float
    ccost: int


@dataclass
class Job:
    tgfd: str
    home: int
    joblets: Tuple[Joblet, ...]
    size: float
    ship_in: int   # edges crossing into the home fragment's balls
    ship_all: int  # total ball edges, paid when the job runs elsewhere

    @property
    def name(self) -> str:
        return f"{self.tgfd}@f{self.home}"

    def cost_on(self, worker: int) -> int:
        return self.ship_in if worker == self.home else self.ship_all


@dataclass
class Assignment:
    mapping: Dict[str, int]
    makespan: float
    total_cost: float
    bounds: Tuple[float, float]
    zeta: float = 0.0

    def loads(self, jobs_by_name: Mapping[str, Job]) -> Dict[int, float]:
        out: Dict[int, float] = {}
        for name, worker in self.mapping.items():
            out[worker] = out.get(worker, 0.0) + jobs_by_name[name].size
        return out


@dataclass
class CardinalityModel:
    """Per-edge-signature fan-out statistics plus attribute selectivities."""

    fanout: Dict[Tuple[str, str, str], Tuple[float, float]]
    type_counts: Dict[str, int]
    attr_counts: Dict[Tuple[str, str, str], int]
    total_vertices: int

    def mean_fanout(self, src_type: str, label: str, dst_type: str) -> float:
        if src_type != WILDCARD and dst_type != WILDCARD:
            return self.fanout.get((src_type, label, dst_type), (0.0, 0.0))[0]
        total = 0.0
        denom = 0
        for (s, l, d), (mean, _std) in self.fanout.items():
            if l != label:
                continue
            if src_type != WILDCARD and s != src_type:
                continue
            if dst_type != WILDCARD and d != dst_type:
                continue
            total += mean * self.type_counts.get(s, 0)
            denom += self.type_counts.get(s, 0)
        if src_type == WILDCARD:
            denom = self.total_vertices
        return total / denom if denom else 0.0

    def selectivity(self, type_label: str, attr: str, value: str) -> float:
        if type_label == WILDCARD:
            n = self.total_vertices
        else:
            n = self.type_counts.get(type_label, 0)
        if not n:
            return 0.0
        return self.attr_counts.get((type_label, attr, value), 0) / n


def build_cardinality_model(view: GraphView) -> CardinalityModel:
    per_source: Dict[Tuple[str, str, str], Dict[str, int]] = {}
    for (src, label, dst) in view.edges:
        sig = (view.type_of(src), label, view.type_of(dst))
        per_source.setdefault(sig, {}).setdefault(src, 0)
        per_source[sig][src] += 1
    type_counts: Dict[str, int] = {}
    for vid in view.vertices():
        type_counts[view.type_of(vid)] = type_counts.get(view.type_of(vid), 0) + 1
    fanout: Dict[Tuple[str, str, str], Tuple[float, float]] = {}
    for sig, counts in per_source.items():
        n = type_counts.get(sig[0], 0)
        if not n:
            continue
        values = list(counts.values()) + [0] * (n - len(counts))
        mean = sum(values) / n
        var = sum((v - mean) ** 2 for v in values) / n
        fanout[sig] = (mean, var ** 0.5)
    attr_counts: Dict[Tuple[str, str, str], int] = {}
    for vid in view.vertices():
        tl = view.type_of(vid)
        for name, value in view.attrs.get(vid, {}).items():
            key = (tl, name, value)
            attr_counts[key] = attr_counts.get(key, 0) + 1
    return CardinalityModel(fanout, type_counts, attr_counts, len(view.vertices()))


def _center_candidates(view: GraphView, label: str, literals: Iterable[ConstantLiteral], center_var: str) -> List[str]:
    if label == WILDCARD:
        pool: Iterable[str] = view.vertices()
    else:
        pool = view.vertices_of_type(label)
    out = []
    lits = [l for l in literals if l.var == center_var]
    for vid in pool:
        if all(view.attr(vid, l.attr) == l.value for l in lits):
            out.append(vid)
    return sorted(out)


def estimate_cardinality(model: CardinalityModel, path: PathPattern, view: GraphView, pattern) -> float:
    """Expected path-match count: literal-satisfying center candidates times
    the product of mean fan-outs over the path edges."""
    centers = _center_candidates(
        view, pattern.label_of(path.center_var), path.literals, path.center_var
    )
    estimate = float(len(centers))
    for (src, label, dst) in path.edges:
        estimate *= model.mean_fanout(pattern.label_of(src), label, pattern.label_of(dst))
    return estimate


def ccost_joblet(graph: TemporalGraph, t: int, center: str, radius: int, owned: frozenset) -> int:
    """Edges of the radius-ball around the center with an endpoint off the
    owning fragment: what must ship for the joblet to run at home."""
    view = graph.view(t)
    nodes = ball_vertices(view, center, radius)
    count = 0
    for (src, label, dst) in view.edges:
        if src in nodes and dst in nodes:
            if src not in owned or dst not in owned:
                count += 1
    return count


def build_jobs(
    graph: TemporalGraph,
    tgfds: Sequence[Tgfd],
    fragments: Sequence[Fragment],
    t: int = 1,
) -> List[Job]:
    """One job per (rule, fragment): all of the rule's joblets whose candidate
    centers the fragment owns."""
    rules = normalize_all(tgfds)
    full = graph.view(t)
    jobs: List[Job] = []
    for frag in fragments:
        owned_view = GraphView(
            t,
            {vid: graph.vertices[vid].type_label for vid in frag.owned_vertices},
            {
                e
                for e in graph.snapshot(t).edges
                if e[0] in frag.owned_vertices and e[2] in frag.owned_vertices
            },
            {
                vid: graph.snapshot(t).attrs.get(vid, {})
                for vid in frag.owned_vertices
            },
        )
        model = build_cardinality_model(owned_view)
        for sigma in rules:
            paths = tgfd_paths(sigma)
            joblets: List[Joblet] = []
            path_estimates: List[float] = []
            ship_in = 0
            ship_all = 0
            for path in paths:
                per_edge = 1.0
                for (src, label, dst) in path.edges:
                    per_edge *= model.mean_fanout(
                        sigma.pattern.label_of(src), label, sigma.pattern.label_of(dst)
                    )
                centers = _center_candidates(
                    owned_view,
                    sigma.pattern.label_of(path.center_var),
                    path.literals,
                    path.center_var,
                )
                path_estimates.append(len(centers) * per_edge)
                for center in centers:
                    nodes = ball_vertices(full, center, path.radius)
                    ball_edges = [
                        e for e in full.edges if e[0] in nodes and e[2] in nodes
                    ]
                    cc = sum(
                        1
                        for e in ball_edges
                        if e[0] not in frag.owned_vertices or e[2] not in frag.owned_vertices
                    )
                    ship_in += cc
                    ship_all += len(ball_edges)
                    joblets.append(
                        Joblet(
                            tgfd=sigma.name,
                            path_index=path.index,
                            worker_id=frag.worker_id,
                            center=center,
                            radius=path.radius,
                            estimated_size=per_edge,
                            ccost=cc,
                        )
                    )
            size = min(path_estimates) if path_estimates else 0.0
            jobs.append(
                Job(
                    tgfd=sigma.name,
                    home=frag.worker_id,
                    joblets=tuple(joblets),
                    size=size,
                    ship_in=ship_in,
                    ship_all=ship_all,
                )
            )
    return jobs


# ---------------------------------------------------------------------------
# assignment
# ---------------------------------------------------------------------------


def _greedy_pack(jobs: Sequence[Job], n: int, cap: float) -> Optional[Dict[str, int]]:
    """Size-descending first-fit under a makespan cap, preferring the worker
    with the least added communication cost."""
    order = sorted(jobs, key=lambda j: (-j.size, j.ship_in, j.name))
    loads = {w: 0.0 for w in range(1, n + 1)}
    mapping: Dict[str, int] = {}
    eps = 1e-9
    for job in order:
        options = [w for w in loads if loads[w] + job.size <= cap + eps]
        if not options:
            return None
        options.sort(key=lambda w: (job.cost_on(w), w))
        chosen = options[0]
        mapping[job.name] = chosen
        loads[chosen] += job.size
    return mapping


def gen_assign(
    jobs: Sequence[Job],
    n: int,
    bounds: Tuple[float, float],
    zeta: float = 0.0,
) -> Assignment:
    """Bisection on the candidate makespan with greedy packing at each probe;
    returns the feasible assignment with the smallest makespan found."""
    t_l, t_u = bounds
    for job in jobs:
        if not (t_l <= job.size <= t_u):
            raise JobOutOfBounds(job.name, job.size, bounds)
    if not jobs:
        return Assignment({}, 0.0, 0.0, bounds, zeta)
    total = sum(j.size for j in jobs)
    biggest = max(j.size for j in jobs)
    lo = max(total / n, biggest)
    hi = total
    best = _greedy_pack(jobs, n, hi)
    assert best is not None  # one worker can always absorb everything
    best_cap = hi
    for _ in range(64):
        if hi - lo < 1e-9:
            break
        mid = (lo + hi) / 2
        packed = _greedy_pack(jobs, n, mid)
        if packed is not None:
            best, best_cap = packed, mid
            hi = mid
        else:
            lo = mid
    jobs_by_name = {j.name: j for j in jobs}
    loads: Dict[int, float] = {}
    cost = 0.0
    for name, worker in best.items():
        loads[worker] = loads.get(worker, 0.0) + jobs_by_name[name].size
        cost += jobs_by_name[name].cost_on(worker)
    makespan = max(loads.values()) if loads else 0.0
    return Assignment(dict(sorted(best.items())), makespan, cost, bounds, zeta)


# ---------------------------------------------------------------------------
# the parallel run
# ---------------------------------------------------------------------------


@dataclass
class SuperstepReport:
    t: int
    worker_jobs: Dict[int, int]
    worker_times: Dict[int, float]
    job_times: Dict[str, float]
    shipped_edges: Dict[int, int]
    rebalanced: bool = False


@dataclass
class RunReport:
    supersteps: List[SuperstepReport] = field(default_factory=list)
    rebalances: int = 0
    rebalance_overhead: float = 0.0
    total_time: float = 0.0
    assignments: List[Tuple[int, Dict[str, int]]] = field(default_factory=list)
    cross_checked: Dict[str, List[Tuple[MatchBinding, MatchBinding]]] = field(default_factory=dict)

    def overhead_fraction(self) -> float:
        if self.total_time <= 0:
            return 0.0
        return self.rebalance_overhead / self.total_time


@dataclass
class ParallelResult:
    violations: Dict[str, List[Violation]]
    report: RunReport
    nontrivial: Dict[str, bool] = field(default_factory=dict)

    def all_violations(self) -> List[Violation]:
        out = []
        for name in sorted(self.violations):
            out.extend(self.violations[name])
        return sorted(out, key=violation_key)


class _JobState:
    """Everything a job carries when it migrates between workers."""

    def __init__(self, job: Job, sigma: Tgfd, paths: List[PathPattern], anchor_var: str):
        self.job = job
        self.sigma = sigma
        self.paths = paths
        self.anchor_var = anchor_var
        self.matcher: Optional[IncrementalMatcher] = None
        self.index = MatchIndex(RulePlan(sigma))
        self.last_iso = 0


def _fragment_working_view(
    graph: TemporalGraph,
    t: int,
    frag: Fragment,
    anchor_specs: Sequence[Tuple[str, int]],
) -> GraphView:
    """The fragment's owned subgraph plus the induced balls around owned
    anchor candidates; anchor_specs lists (anchor label, ball radius)."""
    full = graph.view(t)
    snap = graph.snapshot(t)
    owned = frag.owned_vertices
    nodes: Set[str] = set(owned)
    edges: Set[Tuple[str, str, str]] = {
        e for e in snap.edges if e[0] in owned and e[2] in owned
    }
    for label, radius in anchor_specs:
        candidates = owned if label == WILDCARD else [
            v for v in owned if graph.vertices[v].type_label == label
        ]
        for center in sorted(candidates):
            ball = ball_vertices(full, center, radius)
            nodes |= ball
            for e in snap.edges:
                if e[0] in ball and e[2] in ball:
                    edges.add(e)
    types = {vid: graph.vertices[vid].type_label for vid in nodes}
    attrs = {vid: snap.attrs[vid] for vid in nodes if vid in snap.attrs}
    return GraphView(t, types, edges, attrs)


def _view_delta_ops(prev: GraphView, cur: GraphView) -> List:
    """Operations evolving one working view into the next: edge removals,
    vertex exits, vertex entries, attribute diffs, edge insertions."""
    ops: List = []
    for e in sorted(prev.edges - cur.edges):
        ops.append(("change", EdgeDelete(*e)))
    for vid in sorted(prev.vertices() - cur.vertices()):
        ops.append(("exit", vid))
    for vid in sorted(cur.vertices() - prev.vertices()):
        ops.append(("enter", vid, cur.type_of(vid), dict(cur.attrs.get(vid, {}))))
    for vid in sorted(prev.vertices() & cur.vertices()):
        before = prev.attrs.get(vid, {})
        after = cur.attrs.get(vid, {})
        for name in sorted(set(before) - set(after)):
            ops.append(("change", AttrDelete(vid, name)))
        for name in sorted(after):
            if before.get(name) != after[name]:
                ops.append(("change", AttrSet(vid, name, after[name])))
    for e in sorted(cur.edges - prev.edges):
        ops.append(("change", EdgeInsert(*e)))
    return ops


def _apply_ops(state: _JobState, ops: Sequence) -> int:
    applied = 0
    matcher = state.matcher
    for op in ops:
        if op[0] == "change":
            matcher.apply(op[1])
            applied += 1
        elif op[0] == "exit":
            matcher.sync_vertex(op[1], None)
        else:
            _, vid, label, attrs = op
            matcher.sync_vertex(vid, label, attrs)
    return applied


def run_parallel(
    graph: TemporalGraph,
    tgfds: Sequence[Tgfd],
    n: int,
    zeta: float = 0.1,
    bounds: Tuple[float, float] = (0.0, float("inf")),
    *,
    seed: int = 1,
    time_model: str = "size",
    fragments: Optional[Sequence[Fragment]] = None,
    time_hook: Optional[Callable[[int, str, float], float]] = None,
) -> ParallelResult:
    """Detect violations with n workers over T supersteps.

    time_model "size" charges one unit per applied change plus two per
    localized search plus the live match count (deterministic); "wall"
    measures real elapsed time.  time_hook may rewrite a job's measured
    time (tests use it to force rebalances).
    """
    if n < 1:
        raise ValueError("need at least one worker")
    rules = normalize_all(tgfds)
    frags = list(fragments) if fragments is not None else make_fragments(graph, n, seed)
    if len(frags) != n:
        raise ValueError("fragment count must equal worker count")
    owners = owner_map(frags)
    frag_by_id = {f.worker_id: f for f in frags}
    graph_attr = snapshot_attr_fn(graph)

    anchor_specs: List[Tuple[str, int]] = []
    states: Dict[str, _JobState] = {}
    jobs = build_jobs(graph, rules, frags, t=1)
    jobs_by_name = {j.name: j for j in jobs}
    for sigma in rules:
        anchor_var, _ = sigma.pattern.radius_center()
        anchor_specs.append((sigma.pattern.label_of(anchor_var), sigma.pattern.diameter))
        for frag in frags:
            job = jobs_by_name[f"{sigma.name}@f{frag.worker_id}"]
            states[job.name] = _JobState(job, sigma, tgfd_paths(sigma), anchor_var)
    anchor_specs = sorted(set(anchor_specs))

    def clamp(job: Job) -> Job:
        size = min(max(job.size, bounds[0]), bounds[1])
        return Job(job.tgfd, job.home, job.joblets, size, job.ship_in, job.ship_all)

    assignment = gen_assign([clamp(j) for j in jobs], n, bounds, zeta)
    report = RunReport()
    report.assignments.append((1, dict(assignment.mapping)))

    coord_index: Dict[str, MatchIndex] = {s.name: MatchIndex(RulePlan(s)) for s in rules}
    coord_checked: Dict[str, List[Tuple[MatchBinding, MatchBinding]]] = {s.name: [] for s in rules}
    violations: Dict[str, List[Violation]] = {s.name: [] for s in rules}

    prev_views: Dict[int, GraphView] = {}
    prev_shipped: Dict[int, Set[Tuple[str, str, str]]] = {r: set() for r in frag_by_id}

    lo_band = (1 - zeta) * bounds[0]
    hi_band = (1 + zeta) * bounds[1]

    def owner_of(binding: MatchBinding, anchor_var: str) -> int:
        return owners[binding.assignment[anchor_var]]

    for t in range(1, graph.T + 1):
        views = {
            r: _fragment_working_view(graph, t, frag_by_id[r], anchor_specs)
            for r in sorted(frag_by_id)
        }
        ops_by_fragment: Dict[int, List] = {}
        for r in sorted(frag_by_id):
            if t == 1:
                ops_by_fragment[r] = []
            else:
                ops_by_fragment[r] = _view_delta_ops(prev_views[r], views[r])

        worker_jobs: Dict[int, List[str]] = {w: [] for w in range(1, n + 1)}
        for name, worker in assignment.mapping.items():
            worker_jobs[worker].append(name)
        for w in worker_jobs:
            worker_jobs[w].sort()

        def run_worker(w: int):
            results = []
            for name in worker_jobs[w]:
                state = states[name]
                started = _time.perf_counter()
                if t == 1:
                    state.matcher = IncrementalMatcher(
                        state.sigma.pattern, state.paths, views[state.job.home]
                    )
                    applied = 0
                else:
                    applied = _apply_ops(state, ops_by_fragment[state.job.home])
                iso_delta = state.matcher.iso_searches - state.last_iso
                state.last_iso = state.matcher.iso_searches
                owned_matches = sorted(
                    (
                        b
                        for b in state.matcher.topological_matches(t)
                        if owner_of(b, state.anchor_var) == state.job.home
                    ),
                    key=lambda b: b.items,
                )
                local = incted_step(
                    state.index, state.sigma, owned_matches, graph_attr, graph.T
                )
                elapsed = _time.perf_counter() - started
                if time_model == "wall":
                    measured = elapsed
                else:
                    measured = 1.0 + applied + 2.0 * iso_delta + len(owned_matches)
                if time_hook is not None:
                    measured = time_hook(t, name, measured)
                results.append((name, owned_matches, local, measured))
            return results

        if n == 1:
            gathered = {1: run_worker(1)}
        else:
            with ThreadPoolExecutor(max_workers=n) as pool:
                futures = {w: pool.submit(run_worker, w) for w in sorted(worker_jobs)}
                gathered = {w: futures[w].result() for w in sorted(futures)}

        job_times: Dict[str, float] = {}
        per_rule_matches: Dict[str, List[MatchBinding]] = {s.name: [] for s in rules}
        for w in sorted(gathered):
            for name, owned_matches, local, measured in gathered[w]:
                state = states[name]
                violations[state.sigma.name].extend(local)
                per_rule_matches[state.sigma.name].extend(owned_matches)
                job_times[name] = measured

        # coordinator: pair matches across fragments
        for sigma in rules:
            anchor = rule_anchor(sigma)
            matches = sorted(
                per_rule_matches[sigma.name],
                key=lambda b: (owners[b.assignment[anchor]], b.items),
            )
            cross = incted_step(
                coord_index[sigma.name],
                sigma,
                matches,
                graph_attr,
                graph.T,
                owner_of=lambda b, a=anchor: owner_of(b, a),
                cross_only=True,
                checked_pairs=coord_checked[sigma.name],
            )
            violations[sigma.name].extend(cross)

        shipped_now: Dict[int, int] = {}
        for r in sorted(frag_by_id):
            owned = frag_by_id[r].owned_vertices
            cross_edges = {
                e for e in views[r].edges if e[0] not in owned or e[2] not in owned
            }
            shipped_now[r] = len(cross_edges - prev_shipped[r])
            prev_shipped[r] = cross_edges

        worker_times = {
            w: sum(job_times[name] for name in worker_jobs[w]) for w in sorted(worker_jobs)
        }
        step = SuperstepReport(
            t=t,
            worker_jobs={w: len(worker_jobs[w]) for w in sorted(worker_jobs)},
            worker_times=worker_times,
            job_times=dict(sorted(job_times.items())),
            shipped_edges=shipped_now,
        )
        report.total_time += max(worker_times.values()) if worker_times else 0.0

        out_of_band = [
            name for name, measured in sorted(job_times.items())
            if measured < lo_band or measured > hi_band
        ]
        if out_of_band and t < graph.T:
            fresh = build_jobs(graph, rules, frags, t=t)
            fresh_by_name = {j.name: j for j in fresh}
            for name, state in states.items():
                state.job = fresh_by_name[name]
            new_assignment = gen_assign(
                [clamp(j) for j in fresh], n, bounds, zeta
            )
            moved_cost = 0.0
            for name, worker in new_assignment.mapping.items():
                if assignment.mapping.get(name) != worker:
                    moved_cost += fresh_by_name[name].cost_on(worker)
            assignment = new_assignment
            report.rebalances += 1
            report.rebalance_overhead += REBALANCE_FIXED_COST + REBALANCE_EDGE_UNIT * moved_cost
            report.assignments.append((t + 1, dict(assignment.mapping)))
            step.rebalanced = True

        report.supersteps.append(step)
        prev_views = views

    report.total_time += report.rebalance_overhead
    report.cross_checked = {
        name: list(pairs) for name, pairs in sorted(coord_checked.items())
    }
    for name in violations:
        violations[name] = sorted(set(violations[name]), key=violation_key)

    # the coordinator's index holds every owned match, so it alone decides
    nontrivial = {
        sigma.name: nontrivially_exercised(coord_index[sigma.name], sigma.delta)
        for sigma in rules
    }
    return ParallelResult(violations=violations, report=report, nontrivial=nontrivial)


def rule_anchor(sigma: Tgfd) -> str:
    """The designated anchor variable: the pattern's minimum-radius center."""
    return sigma.pattern.radius_center()[0]
