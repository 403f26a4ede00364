"""Core labeled-graph data model: typed nodes, directed labeled edges."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import DuplicateEdge, UnknownNode

_WS = re.compile(r"\s+")

# Node kind tags. Clevr operation nodes use KIND_CLEVR_OP plus an op name
# (and a parameter when the operation is parameterized).
KIND_ACTIVITY = "activity"
KIND_DECISION = "decision"
KIND_CONCEPT = "concept"
KIND_CLEVR_OP = "clevr_op"


def normalize_label(label: str, case_sensitive: bool = False) -> str:
    """Trim, collapse internal whitespace, and (by default) case-fold."""
    text = _WS.sub(" ", label.strip())
    return text if case_sensitive else text.casefold()


@dataclass(frozen=True)
class NodeKind:
    kind: str
    op: Optional[str] = None
    param: Optional[str] = None

    def __post_init__(self):
        if self.kind == KIND_CLEVR_OP:
            if not self.op:
                raise ValueError("clevr_op kind requires an operation name")
        elif self.op is not None or self.param is not None:
            raise ValueError(f"{self.kind} kind carries no operation fields")

    @property
    def is_clevr(self) -> bool:
        return self.kind == KIND_CLEVR_OP


ACTIVITY = NodeKind(KIND_ACTIVITY)
DECISION = NodeKind(KIND_DECISION)
CONCEPT = NodeKind(KIND_CONCEPT)


@dataclass(frozen=True)
class Node:
    id: str
    label: str
    kind: NodeKind


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    label: str = ""


@dataclass
class LabeledGraph:
    """Mutable during construction, treated as immutable afterwards."""

    nodes: dict[str, Node] = field(default_factory=dict)
    edges: list[Edge] = field(default_factory=list)
    _edge_keys: set[tuple[str, str, str]] = field(default_factory=set, repr=False)
    _next_id: int = field(default=0, repr=False)

    def add_node(self, label: str, kind: NodeKind = ACTIVITY, node_id: str | None = None) -> str:
        """Insert a node and return its id. Ids are identity; labels are data."""
        if not label and not kind.is_clevr:
            raise ValueError("only clevr_op nodes may have an empty label")
        if node_id is None:
            while f"n{self._next_id}" in self.nodes:
                self._next_id += 1
            node_id = f"n{self._next_id}"
            self._next_id += 1
        elif node_id in self.nodes:
            raise ValueError(f"duplicate node id {node_id!r}")
        self.nodes[node_id] = Node(node_id, label, kind)
        return node_id

    def add_edge(self, source: str, target: str, label: str = "") -> None:
        if source not in self.nodes:
            raise UnknownNode(source)
        if target not in self.nodes:
            raise UnknownNode(target)
        key = (source, target, normalize_label(label))
        if key in self._edge_keys:
            raise DuplicateEdge(str(key))
        self._edge_keys.add(key)
        self.edges.append(Edge(source, target, label))

    def has_edge(self, source: str, target: str, label: str = "") -> bool:
        return (source, target, normalize_label(label)) in self._edge_keys

    def node(self, node_id: str) -> Node:
        return self.nodes[node_id]

    def out_edges(self, node_id: str) -> list[Edge]:
        return [e for e in self.edges if e.source == node_id]

    def in_edges(self, node_id: str) -> list[Edge]:
        return [e for e in self.edges if e.target == node_id]

    def edge_keys(self) -> set[tuple[str, str, str]]:
        """Set of (source, target, normalized label) triples."""
        return set(self._edge_keys)

    def copy(self) -> "LabeledGraph":
        g = LabeledGraph()
        g.nodes = dict(self.nodes)
        g.edges = list(self.edges)
        g._edge_keys = set(self._edge_keys)
        g._next_id = self._next_id
        return g

    def __len__(self) -> int:
        return len(self.nodes)


def graph_from(nodes: Iterable[Node], edges: Iterable[Edge]) -> LabeledGraph:
    """Build a graph from prebuilt parts, enforcing all invariants."""
    g = LabeledGraph()
    for n in nodes:
        if not n.label and not n.kind.is_clevr:
            raise ValueError("only clevr_op nodes may have an empty label")
        if n.id in g.nodes:
            raise ValueError(f"duplicate node id {n.id!r}")
        g.nodes[n.id] = n
    for e in edges:
        g.add_edge(e.source, e.target, e.label)
    return g
