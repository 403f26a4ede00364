from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from abscon.errors import DuplicateEdge, UnknownNode
from abscon.graph import ACTIVITY, DECISION, LabeledGraph, normalize_label


def test_add_node_returns_fresh_ids():
    g = LabeledGraph()
    a = g.add_node("A", ACTIVITY)
    b = g.add_node("A", ACTIVITY)
    assert a != b
    assert len(g.nodes) == 2
    assert g.nodes[a].label == g.nodes[b].label == "A"


def test_add_edge_and_duplicate_rejection():
    g = LabeledGraph()
    a = g.add_node("A", ACTIVITY)
    b = g.add_node("B", DECISION)
    g.add_edge(a, b, "yes")
    assert g.has_edge(a, b, "yes")
    with pytest.raises(DuplicateEdge):
        g.add_edge(a, b, " YES ")  # same normalized triple
    g.add_edge(a, b, "no")
    assert len(g.edges) == 2


def test_unknown_endpoint_rejected():
    g = LabeledGraph()
    a = g.add_node("A", ACTIVITY)
    with pytest.raises(UnknownNode):
        g.add_edge(a, "missing", "")
    with pytest.raises(UnknownNode):
        g.add_edge("missing", a, "")


def test_empty_label_only_for_clevr_ops():
    g = LabeledGraph()
    with pytest.raises(ValueError):
        g.add_node("", ACTIVITY)


def test_referential_integrity_preserved():
    g = LabeledGraph()
    ids = [g.add_node(f"x{i}", ACTIVITY) for i in range(5)]
    for i in range(4):
        g.add_edge(ids[i], ids[i + 1], "")
    for e in g.edges:
        assert e.source in g.nodes and e.target in g.nodes


def test_normalize_label_examples():
    assert normalize_label("  Yes ") == "yes"
    assert normalize_label("NO") == "no"
    assert normalize_label("has  stock") == "has stock"
    assert normalize_label("Has  Stock", case_sensitive=True) == "Has Stock"


@given(st.text(max_size=40))
def test_normalize_label_idempotent(text):
    once = normalize_label(text)
    assert normalize_label(once) == once
