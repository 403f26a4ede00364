"""Incrementally merge matched candidate graphs into a probabilistic partial
model: per-element occurrence counts plus label histograms."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

from .domains import DomainProfile
from .graph import LabeledGraph, NodeKind, normalize_label
from .matching import CostModel, match


@dataclass
class PartialElement:
    count: int
    labels: Counter = field(default_factory=Counter)
    kind: NodeKind | None = None  # nodes only

    def add(self, label: str) -> None:
        self.count += 1
        self.labels[label] += 1

    @property
    def representative_label(self) -> str:
        # Most frequent label; ties resolved lexicographically.
        return min(self.labels.items(), key=lambda kv: (-kv[1], kv[0]))[0]


EdgeKey = tuple[str, str, str]  # (source element id, target element id, normalized label)


@dataclass
class PartialModel:
    nodes: dict[str, PartialElement] = field(default_factory=dict)
    edges: dict[EdgeKey, PartialElement] = field(default_factory=dict)
    n_candidates: int = 0
    _next_id: int = 0

    def new_node(self, label: str, kind: NodeKind) -> str:
        elem_id = f"p{self._next_id}"
        self._next_id += 1
        self.nodes[elem_id] = PartialElement(1, Counter({label: 1}), kind)
        return elem_id

    def probability(self, element: PartialElement) -> float:
        return element.count / self.n_candidates

    def label_distribution(self, element: PartialElement) -> dict[str, float]:
        return {l: c / element.count for l, c in element.labels.items()}

    def view(self) -> LabeledGraph:
        """Representative-label graph over the partial elements."""
        g = LabeledGraph()
        for elem_id, elem in self.nodes.items():
            g.add_node(elem.representative_label, elem.kind, node_id=elem_id)
        for (src, tgt, _), elem in self.edges.items():
            label = elem.representative_label
            if not g.has_edge(src, tgt, label):
                g.add_edge(src, tgt, label)
        return g

    def size(self) -> int:
        return len(self.nodes) + len(self.edges)

    def to_json(self) -> str:
        def kind_json(kind: NodeKind) -> dict:
            data = {"kind": kind.kind}
            if kind.op is not None:
                data["op"] = kind.op
            if kind.param is not None:
                data["param"] = kind.param
            return data

        data = {
            "n_candidates": self.n_candidates,
            "nodes": [
                {"id": elem_id, "kind": kind_json(elem.kind), "count": elem.count,
                 "labels": dict(sorted(elem.labels.items()))}
                for elem_id, elem in self.nodes.items()
            ],
            "edges": [
                {"source": key[0], "target": key[1], "count": elem.count,
                 "labels": dict(sorted(elem.labels.items()))}
                for key, elem in self.edges.items()
            ],
        }
        return json.dumps(data, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "PartialModel":
        data = json.loads(text)
        model = cls(n_candidates=data["n_candidates"])
        max_suffix = -1
        for row in data["nodes"]:
            kind_data = row["kind"]
            kind = NodeKind(kind_data["kind"], kind_data.get("op"), kind_data.get("param"))
            model.nodes[row["id"]] = PartialElement(row["count"], Counter(row["labels"]), kind)
            if row["id"].startswith("p") and row["id"][1:].isdigit():
                max_suffix = max(max_suffix, int(row["id"][1:]))
        for row in data["edges"]:
            any_label = next(iter(row["labels"]))
            key = (row["source"], row["target"], normalize_label(any_label))
            model.edges[key] = PartialElement(row["count"], Counter(row["labels"]))
        model._next_id = max_suffix + 1
        return model


def abstract(candidates: list[LabeledGraph], profile: DomainProfile) -> PartialModel:
    """Fold candidates into a partial model, seeding with the first (or the
    largest, when the profile says so) and matching the rest against the
    representative-label view."""
    if not candidates:
        raise ValueError("at least one candidate is required")
    ordered = list(candidates)
    if profile.seed_selection == "largest":
        seed_idx = max(range(len(ordered)), key=lambda i: (len(ordered[i].nodes) + len(ordered[i].edges), -i))
        ordered.insert(0, ordered.pop(seed_idx))

    model = PartialModel(n_candidates=len(ordered))
    cost = CostModel(
        mode=profile.similarity_mode,
        provider=profile.provider,
        tau=profile.tau,
        case_sensitive=profile.case_sensitive_labels,
    )

    first = ordered[0]
    seed_map: dict[str, str] = {}
    for node_id in sorted(first.nodes):
        node = first.nodes[node_id]
        seed_map[node_id] = model.new_node(node.label, node.kind)
    for edge in first.edges:
        key = (seed_map[edge.source], seed_map[edge.target],
               normalize_label(edge.label, profile.case_sensitive_labels))
        model.edges[key] = PartialElement(1, Counter({edge.label: 1}))

    for candidate in ordered[1:]:
        base_view = model.view()
        result = match(candidate, base_view, cost, timeout=profile.match_timeout)
        node_map = dict(result.node_map)
        for node_id in sorted(candidate.nodes):
            node = candidate.nodes[node_id]
            if node_id in node_map:
                model.nodes[node_map[node_id]].add(node.label)
            else:
                node_map[node_id] = model.new_node(node.label, node.kind)
        for edge in candidate.edges:
            key = (node_map[edge.source], node_map[edge.target],
                   normalize_label(edge.label, profile.case_sensitive_labels))
            if key in model.edges:
                model.edges[key].add(edge.label)
            else:
                model.edges[key] = PartialElement(1, Counter({edge.label: 1}))
    return model


def mlc(partial: PartialModel) -> LabeledGraph:
    """Maximum likelihood concretization: strict-majority elements only,
    ignoring all constraints; dangling edges are dropped."""
    g = LabeledGraph()
    for elem_id, elem in partial.nodes.items():
        if elem.count * 2 > partial.n_candidates:
            g.add_node(elem.representative_label, elem.kind, node_id=elem_id)
    for (src, tgt, _), elem in partial.edges.items():
        if elem.count * 2 > partial.n_candidates and src in g.nodes and tgt in g.nodes:
            label = elem.representative_label
            if not g.has_edge(src, tgt, label):
                g.add_edge(src, tgt, label)
    return g
