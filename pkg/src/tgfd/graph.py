"""In-memory temporal property graph.

A temporal graph is a fixed vertex set plus one snapshot per timestamp
(1-based).  Snapshots store directed labeled edges and string-valued vertex
attributes.  Snapshots are immutable once built; change sets produce the next
snapshot from the previous one.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

from .errors import DeleteMissingEdge, GraphFormatError, UnknownVertex

Edge = Tuple[str, str, str]  # (src-id, edge-label, dst-id)


@dataclass(frozen=True)
class Vertex:
    id: str
    type_label: str


@dataclass(frozen=True)
class EdgeInsert:
    src: str
    label: str
    dst: str


@dataclass(frozen=True)
class EdgeDelete:
    src: str
    label: str
    dst: str


@dataclass(frozen=True)
class AttrSet:
    vid: str
    name: str
    value: str


@dataclass(frozen=True)
class AttrDelete:
    vid: str
    name: str


Change = Union[EdgeInsert, EdgeDelete, AttrSet, AttrDelete]


@dataclass(frozen=True)
class ChangeSet:
    t: int
    changes: Tuple[Change, ...]


@dataclass(frozen=True)
class Snapshot:
    """One timestamp of the graph: edge set plus attribute tuples."""

    t: int
    edges: frozenset
    attrs: Mapping[str, Mapping[str, str]]

    def attr(self, vid: str, name: str) -> Optional[str]:
        return self.attrs.get(vid, {}).get(name)


class GraphView:
    """A queryable slice of one snapshot: a vertex subset with its edges.

    Also used as the matcher's working copy of an evolving fragment, so it
    supports in-place mutation; TemporalGraph itself stays immutable.
    """

    __slots__ = ("t", "types", "edges", "attrs", "_out", "_in", "_by_type")

    def __init__(
        self,
        t: int,
        types: Mapping[str, str],
        edges: Iterable[Edge],
        attrs: Mapping[str, Mapping[str, str]],
    ):
        self.t = t
        self.types: Dict[str, str] = dict(types)
        self.edges: Set[Edge] = set(edges)
        self.attrs: Dict[str, Dict[str, str]] = {
            vid: dict(named) for vid, named in attrs.items() if vid in self.types
        }
        self._out: Dict[str, Set[Tuple[str, str]]] = {}
        self._in: Dict[str, Set[Tuple[str, str]]] = {}
        self._by_type: Dict[str, Set[str]] = {}
        for vid, label in self.types.items():
            self._by_type.setdefault(label, set()).add(vid)
        for e in self.edges:
            self._index_edge(e)

    def _index_edge(self, e: Edge) -> None:
        src, label, dst = e
        self._out.setdefault(src, set()).add((label, dst))
        self._in.setdefault(dst, set()).add((label, src))

    # -- queries ---------------------------------------------------------

    def vertices(self) -> Set[str]:
        return set(self.types)

    def type_of(self, vid: str) -> Optional[str]:
        return self.types.get(vid)

    def vertices_of_type(self, label: str) -> Set[str]:
        return self._by_type.get(label, set())

    def has_edge(self, src: str, label: str, dst: str) -> bool:
        return (src, label, dst) in self.edges

    def out_edges(self, vid: str) -> Set[Tuple[str, str]]:
        """(label, dst) pairs leaving vid."""
        return self._out.get(vid, set())

    def in_edges(self, vid: str) -> Set[Tuple[str, str]]:
        """(label, src) pairs entering vid."""
        return self._in.get(vid, set())

    def attr(self, vid: str, name: str) -> Optional[str]:
        return self.attrs.get(vid, {}).get(name)

    def neighbors(self, vid: str) -> Set[str]:
        seen = {dst for _, dst in self._out.get(vid, ())}
        seen.update(src for _, src in self._in.get(vid, ()))
        return seen

    # -- mutation (matcher working copies only) --------------------------

    def add_vertex(self, vid: str, label: str) -> None:
        if vid not in self.types:
            self.types[vid] = label
            self._by_type.setdefault(label, set()).add(vid)

    def remove_vertex(self, vid: str) -> None:
        label = self.types.pop(vid, None)
        if label is not None:
            self._by_type[label].discard(vid)
        self.attrs.pop(vid, None)

    def add_edge(self, e: Edge) -> None:
        if e not in self.edges:
            self.edges.add(e)
            self._index_edge(e)

    def remove_edge(self, e: Edge) -> None:
        if e in self.edges:
            self.edges.discard(e)
            src, label, dst = e
            self._out[src].discard((label, dst))
            self._in[dst].discard((label, src))

    def set_attr(self, vid: str, name: str, value: str) -> None:
        self.attrs.setdefault(vid, {})[name] = value

    def del_attr(self, vid: str, name: str) -> None:
        self.attrs.get(vid, {}).pop(name, None)

    def copy(self) -> "GraphView":
        return GraphView(self.t, self.types, self.edges, self.attrs)


class TemporalGraph:
    """Fixed vertex set plus an ordered sequence of snapshots, t = 1..T."""

    def __init__(self, vertices: Mapping[str, Vertex], snapshots: Sequence[Snapshot]):
        if not snapshots:
            raise ValueError("a temporal graph needs at least one snapshot")
        self.vertices: Dict[str, Vertex] = dict(vertices)
        self.snapshots: Tuple[Snapshot, ...] = tuple(snapshots)
        for i, snap in enumerate(self.snapshots, start=1):
            if snap.t != i:
                raise ValueError(f"snapshot {i} carries timestamp {snap.t}")
            for src, _, dst in snap.edges:
                if src not in self.vertices or dst not in self.vertices:
                    raise UnknownVertex(f"edge endpoint missing at t={i}: {src}->{dst}")
            for vid in snap.attrs:
                if vid not in self.vertices:
                    raise UnknownVertex(f"attributed vertex {vid} missing at t={i}")

    @property
    def T(self) -> int:
        return len(self.snapshots)

    def snapshot(self, t: int) -> Snapshot:
        if not 1 <= t <= self.T:
            raise ValueError(f"timestamp {t} outside [1, {self.T}]")
        return self.snapshots[t - 1]

    def view(self, t: int) -> GraphView:
        """Full snapshot t as a queryable view."""
        snap = self.snapshot(t)
        types = {vid: v.type_label for vid, v in self.vertices.items()}
        return GraphView(t, types, snap.edges, snap.attrs)

    def type_of(self, vid: str) -> str:
        try:
            return self.vertices[vid].type_label
        except KeyError:
            raise UnknownVertex(vid) from None


@dataclass(frozen=True)
class Fragment:
    """One worker's share of the vertex set, plus edges shipped to it."""

    worker_id: int
    owned_vertices: frozenset
    borrowed_edges: frozenset = frozenset()


def apply_changes(graph: TemporalGraph, cs: ChangeSet) -> TemporalGraph:
    """Materialize snapshot cs.t from snapshot cs.t - 1.

    Changes apply in list order; earlier snapshots are shared, not copied.
    """
    if cs.t != graph.T + 1:
        raise ValueError(f"change set targets t={cs.t}, expected {graph.T + 1}")
    prev = graph.snapshots[-1]
    edges = set(prev.edges)
    attrs = {vid: dict(named) for vid, named in prev.attrs.items()}
    for change in cs.changes:
        if isinstance(change, EdgeInsert):
            _require_vertex(graph, change.src)
            _require_vertex(graph, change.dst)
            edges.add((change.src, change.label, change.dst))
        elif isinstance(change, EdgeDelete):
            e = (change.src, change.label, change.dst)
            if e not in edges:
                raise DeleteMissingEdge(f"{e} absent at t={cs.t}")
            edges.discard(e)
        elif isinstance(change, AttrSet):
            _require_vertex(graph, change.vid)
            attrs.setdefault(change.vid, {})[change.name] = change.value
        elif isinstance(change, AttrDelete):
            _require_vertex(graph, change.vid)
            attrs.get(change.vid, {}).pop(change.name, None)
        else:  # pragma: no cover - guarded by Change union
            raise TypeError(f"unknown change {change!r}")
    attrs = {vid: named for vid, named in attrs.items() if named}
    snap = Snapshot(t=cs.t, edges=frozenset(edges), attrs=attrs)
    return TemporalGraph(graph.vertices, graph.snapshots + (snap,))


def _require_vertex(graph: TemporalGraph, vid: str) -> None:
    if vid not in graph.vertices:
        raise UnknownVertex(vid)


def induced_subgraph(graph: TemporalGraph, t: int, center: str, d: int) -> GraphView:
    """Subgraph of snapshot t within d undirected hops of center."""
    _require_vertex(graph, center)
    if d < 0:
        raise ValueError("hop radius must be non-negative")
    snap = graph.snapshot(t)
    full = graph.view(t)
    reached = ball_vertices(full, center, d)
    types = {vid: graph.vertices[vid].type_label for vid in reached}
    edges = {e for e in snap.edges if e[0] in reached and e[2] in reached}
    attrs = {vid: snap.attrs[vid] for vid in reached if vid in snap.attrs}
    return GraphView(t, types, edges, attrs)


def ball_vertices(view: GraphView, center: str, d: int) -> Set[str]:
    """Vertices within d undirected hops of center in the view."""
    reached = {center}
    frontier = deque([(center, 0)])
    while frontier:
        vid, dist = frontier.popleft()
        if dist == d:
            continue
        for nxt in view.neighbors(vid):
            if nxt not in reached:
                reached.add(nxt)
                frontier.append((nxt, dist + 1))
    return reached


def fragment_view(graph: TemporalGraph, frag: Fragment, t: int) -> GraphView:
    """Snapshot t restricted to a fragment: owned vertices, their induced
    edges, plus whatever borrowed edges exist at t (with their endpoints)."""
    snap = graph.snapshot(t)
    owned = frag.owned_vertices
    edges = {e for e in snap.edges if e[0] in owned and e[2] in owned}
    for e in frag.borrowed_edges:
        if e in snap.edges:
            edges.add(e)
    vids = set(owned)
    for src, _, dst in edges:
        vids.add(src)
        vids.add(dst)
    types = {vid: graph.vertices[vid].type_label for vid in vids}
    attrs = {vid: snap.attrs[vid] for vid in vids if vid in snap.attrs}
    return GraphView(t, types, edges, attrs)


def diff_snapshots(prev: Snapshot, cur: Snapshot) -> ChangeSet:
    """Deterministic change list turning prev into cur."""
    changes: List[Change] = []
    for e in sorted(prev.edges - cur.edges):
        changes.append(EdgeDelete(*e))
    prev_attrs = {(vid, name) for vid, named in prev.attrs.items() for name in named}
    cur_attrs = {(vid, name) for vid, named in cur.attrs.items() for name in named}
    for vid, name in sorted(prev_attrs - cur_attrs):
        changes.append(AttrDelete(vid, name))
    sets = []
    for vid, named in cur.attrs.items():
        for name, value in named.items():
            if prev.attrs.get(vid, {}).get(name) != value:
                sets.append(AttrSet(vid, name, value))
    changes.extend(sorted(sets, key=lambda c: (c.vid, c.name)))
    for e in sorted(cur.edges - prev.edges):
        changes.append(EdgeInsert(*e))
    return ChangeSet(t=cur.t, changes=tuple(changes))


def derive_changesets(graph: TemporalGraph) -> List[ChangeSet]:
    """Per-timestamp change sets recovered by diffing consecutive snapshots."""
    return [
        diff_snapshots(graph.snapshots[i - 1], graph.snapshots[i])
        for i in range(1, graph.T)
    ]


# ---------------------------------------------------------------------------
# line-based file format
# ---------------------------------------------------------------------------


def _quote(value: str) -> str:
    if any(ch in value for ch in (' ', '"', '\t')):
        return '"' + value.replace('"', '\\"') + '"'
    return value


def _tokenize(line: str, lineno: int) -> List[str]:
    tokens: List[str] = []
    buf: List[str] = []
    quoted = False
    i = 0
    while i < len(line):
        ch = line[i]
        if quoted:
            if ch == "\\" and i + 1 < len(line) and line[i + 1] == '"':
                buf.append('"')
                i += 1
            elif ch == '"':
                quoted = False
            else:
                buf.append(ch)
        elif ch == '"':
            quoted = True
        elif ch.isspace():
            if buf:
                tokens.append("".join(buf))
                buf = []
        else:
            buf.append(ch)
        i += 1
    if quoted:
        raise GraphFormatError("unterminated quote", lineno)
    if buf:
        tokens.append("".join(buf))
    return tokens


def _split_assignment(token: str, lineno: int) -> Tuple[str, str]:
    name, sep, value = token.partition("=")
    if not sep or not name:
        raise GraphFormatError(f"expected name=value, got {token!r}", lineno)
    return name, value


def parse_snapshot_text(text: str) -> TemporalGraph:
    """Parse the base snapshot file: `v <id> <type> [<name>=<value>]...` and
    `e <src> <label> <dst>` lines."""
    vertices: Dict[str, Vertex] = {}
    attrs: Dict[str, Dict[str, str]] = {}
    edges: Set[Edge] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = _tokenize(line, lineno)
        kind = tokens[0]
        if kind == "v":
            if len(tokens) < 3:
                raise GraphFormatError("vertex line needs id and type", lineno)
            vid, type_label = tokens[1], tokens[2]
            if vid in vertices:
                raise GraphFormatError(f"duplicate vertex {vid}", lineno)
            if not type_label:
                raise GraphFormatError("empty type label", lineno)
            vertices[vid] = Vertex(vid, type_label)
            for token in tokens[3:]:
                name, value = _split_assignment(token, lineno)
                attrs.setdefault(vid, {})[name] = value
        elif kind == "e":
            if len(tokens) != 4:
                raise GraphFormatError("edge line needs src, label, dst", lineno)
            src, label, dst = tokens[1], tokens[2], tokens[3]
            if src not in vertices or dst not in vertices:
                raise GraphFormatError(f"edge references unknown vertex", lineno)
            edges.add((src, label, dst))
        else:
            raise GraphFormatError(f"unknown record {kind!r}", lineno)
    snap = Snapshot(t=1, edges=frozenset(edges), attrs=attrs)
    return TemporalGraph(vertices, [snap])


def parse_changes_text(text: str) -> List[ChangeSet]:
    """Parse the change file: `t <k>` headers, then +e/-e/+a/-a records."""
    sets: List[ChangeSet] = []
    current_t: Optional[int] = None
    current: List[Change] = []

    def flush():
        if current_t is not None:
            sets.append(ChangeSet(t=current_t, changes=tuple(current)))

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = _tokenize(line, lineno)
        kind = tokens[0]
        if kind == "t":
            if len(tokens) != 2:
                raise GraphFormatError("timestamp header needs one value", lineno)
            flush()
            try:
                current_t = int(tokens[1])
            except ValueError:
                raise GraphFormatError(f"bad timestamp {tokens[1]!r}", lineno) from None
            if current_t < 2:
                raise GraphFormatError("change sets start at t=2", lineno)
            current = []
            continue
        if current_t is None:
            raise GraphFormatError("change record before any `t` header", lineno)
        if kind == "+e" or kind == "-e":
            if len(tokens) != 4:
                raise GraphFormatError("edge change needs src, label, dst", lineno)
            cls = EdgeInsert if kind == "+e" else EdgeDelete
            current.append(cls(tokens[1], tokens[2], tokens[3]))
        elif kind == "+a":
            if len(tokens) != 3:
                raise GraphFormatError("attr set needs vid and name=value", lineno)
            name, value = _split_assignment(tokens[2], lineno)
            current.append(AttrSet(tokens[1], name, value))
        elif kind == "-a":
            if len(tokens) != 3:
                raise GraphFormatError("attr delete needs vid and name", lineno)
            current.append(AttrDelete(tokens[1], tokens[2]))
        else:
            raise GraphFormatError(f"unknown change record {kind!r}", lineno)
    flush()
    return sets


def load_graph(snapshot_text: str, changes_text: Optional[str] = None) -> TemporalGraph:
    """Build the full temporal graph from a base snapshot plus change files."""
    graph = parse_snapshot_text(snapshot_text)
    if changes_text:
        for cs in parse_changes_text(changes_text):
            graph = apply_changes(graph, cs)
    return graph


def snapshot_to_text(graph: TemporalGraph) -> str:
    """Serialize the base snapshot (t=1)."""
    snap = graph.snapshots[0]
    lines = []
    for vid in sorted(graph.vertices):
        parts = ["v", _quote(vid), _quote(graph.vertices[vid].type_label)]
        for name in sorted(snap.attrs.get(vid, {})):
            parts.append(f"{name}={_quote(snap.attrs[vid][name])}")
        lines.append(" ".join(parts))
    for src, label, dst in sorted(snap.edges):
        lines.append(f"e {_quote(src)} {_quote(label)} {_quote(dst)}")
    return "\n".join(lines) + "\n"


def changes_to_text(changesets: Iterable[ChangeSet]) -> str:
    """Serialize per-timestamp change sets."""
    lines = []
    for cs in changesets:
        lines.append(f"t {cs.t}")
        for c in cs.changes:
            if isinstance(c, EdgeInsert):
                lines.append(f"+e {_quote(c.src)} {_quote(c.label)} {_quote(c.dst)}")
            elif isinstance(c, EdgeDelete):
                lines.append(f"-e {_quote(c.src)} {_quote(c.label)} {_quote(c.dst)}")
            elif isinstance(c, AttrSet):
                lines.append(f"+a {_quote(c.vid)} {c.name}={_quote(c.value)}")
            elif isinstance(c, AttrDelete):
                lines.append(f"-a {_quote(c.vid)} {c.name}")
    return "\n".join(lines) + ("\n" if lines else "")


def graph_to_texts(graph: TemporalGraph) -> Tuple[str, str]:
    """Serialize a materialized graph as (snapshot file, change file)."""
    return snapshot_to_text(graph), changes_to_text(derive_changesets(graph))
