from __future__ import annotations

import random
from pathlib import Path

import pytest

from abscon.abstraction import PartialModel, abstract, mlc
from abscon.constraints import check
from abscon.domains import profile
from abscon.graph import ACTIVITY, LabeledGraph
from abscon.llm import load_candidates
from genutil import build_graph, clone, graph_signature, random_flowchart

DATA = Path(__file__).parent / "data"


def load_fig2_graphs():
    candidates, _ = load_candidates(DATA / "fig2_pool")
    return [c.graph for c in candidates]


def _chain(labels):
    g = LabeledGraph()
    ids = [g.add_node(l, ACTIVITY) for l in labels]
    for a, b in zip(ids, ids[1:]):
        g.add_edge(a, b, "")
    return g


def test_single_candidate_all_probabilities_one():
    g = _chain(["a b", "c d"])
    model = abstract([g], profile("flowchart"))
    assert model.n_candidates == 1
    for elem in list(model.nodes.values()) + list(model.edges.values()):
        assert model.probability(elem) == 1.0


def test_identical_candidates_all_counts_equal_n():
    g = _chain(["receive order", "ship order", "close ticket"])
    model = abstract([clone(g), clone(g), clone(g)], profile("flowchart"))
    assert model.n_candidates == 3
    for elem in list(model.nodes.values()) + list(model.edges.values()):
        assert elem.count == 3
        assert model.probability(elem) == 1.0


def test_fig2_pool_probabilities():
    graphs = load_fig2_graphs()
    model = abstract(graphs, profile("flowchart"))
    by_label = {elem.representative_label: elem for elem in model.nodes.values()}
    assert by_label["Update ledger"].count == 2
    for label in ("Receive order", "In stock?", "Ship order", "Reorder stock", "Notify customer"):
        assert by_label[label].count == 3, label
    # the unlabeled decision arm from candidate 3 stays a separate minority edge
    arm_counts = sorted(
        (key[2], elem.count) for key, elem in model.edges.items()
        if by_label["In stock?"] is model.nodes[key[0]]
    )
    assert arm_counts == [("", 1), ("no", 2), ("yes", 3)]


def test_fig2_mlc_includes_hallucination_and_violates_constraints():
    graphs = load_fig2_graphs()
    flowchart = profile("flowchart")
    model = abstract(graphs, flowchart)
    g = mlc(model)
    labels = {n.label for n in g.nodes.values()}
    assert "Update ledger" in labels
    report = check(g, flowchart)
    assert not report.consistent
    assert any(v.name == "single_source" for v in report.violations)


def test_mlc_strict_majority_excludes_half():
    g1 = _chain(["alpha beta", "gamma delta"])
    g2 = _chain(["alpha beta", "unrelated thing"])
    model = abstract([g1, g2], profile("flowchart"))
    half = [e for e in model.nodes.values() if e.count == 1]
    assert half  # the non-shared nodes sit exactly at P = 0.5
    out = mlc(model)
    labels = {n.label for n in out.nodes.values()}
    assert labels == {"alpha beta"}


def test_abstract_then_mlc_round_trips_single_candidate():
    rng = random.Random(3)
    g = random_flowchart(rng, 6)
    model = abstract([g], profile("flowchart"))
    assert graph_signature(mlc(model)) == graph_signature(g)


def test_count_conservation():
    rng = random.Random(5)
    truth = random_flowchart(rng, 5)
    pool = [clone(truth) for _ in range(4)]
    model = abstract(pool, profile("flowchart"))
    total_nodes = sum(e.count for e in model.nodes.values())
    assert total_nodes == sum(len(g.nodes) for g in pool)
    total_edges = sum(e.count for e in model.edges.values())
    assert total_edges == sum(len(g.edges) for g in pool)


def test_label_histogram_and_distribution():
    a = build_graph([("x", "Ship order", ACTIVITY)], [])
    b = build_graph([("x", "ship order", ACTIVITY)], [])
    c = build_graph([("x", "Ship order", ACTIVITY)], [])
    model = abstract([a, b, c], profile("flowchart"))
    (elem,) = model.nodes.values()
    assert elem.count == 3
    assert elem.labels == {"Ship order": 2, "ship order": 1}
    assert elem.representative_label == "Ship order"
    dist = model.label_distribution(elem)
    assert dist["Ship order"] == pytest.approx(2 / 3)
    assert sum(dist.values()) == pytest.approx(1.0)


def test_seed_selection_largest():
    small = _chain(["one two"])
    big = _chain(["one two", "three four", "five six"])
    model = abstract([small, big], profile("flowchart", seed_selection="largest"))
    # largest candidate seeds the model, so its nodes come first
    first = next(iter(model.nodes.values()))
    assert first.representative_label == "one two"
    assert model.n_candidates == 2
    assert sum(e.count for e in model.nodes.values()) == 4


def test_json_round_trip():
    graphs = load_fig2_graphs()
    model = abstract(graphs, profile("flowchart"))
    text = model.to_json()
    back = PartialModel.from_json(text)
    assert back.to_json() == text
    assert back.n_candidates == model.n_candidates
    assert set(back.nodes) == set(model.nodes)
    assert set(back.edges) == set(model.edges)
    for key, elem in model.edges.items():
        assert back.edges[key].labels == elem.labels
