from __future__ import annotations

import itertools
import random

import pytest

from abscon.abstraction import abstract
from abscon.clevr import clevr_op
from abscon.constraints import build_problem, check
from abscon.domains import profile
from abscon.errors import UnknownDomain
from abscon.graph import ACTIVITY, CONCEPT, DECISION, LabeledGraph
from genutil import build_graph, candidate_pool, random_flowchart, random_taxonomy_tree


def _partial_from(graphs, domain):
    return abstract(graphs, profile(domain))


def test_build_problem_two_node_flowchart():
    g = build_graph(
        [("a", "start work", ACTIVITY), ("b", "finish work", ACTIVITY)],
        [("a", "b", "")],
    )
    problem = build_problem(_partial_from([g], "flowchart"), profile("flowchart"))
    assert len(problem.variables) == 3
    linking = [c for c in problem.linear if c.name.startswith("link_")]
    assert len(linking) == 2
    kinds = [gc.kind for gc in problem.global_cs]
    assert kinds == ["single_source", "reachable_from_source"]
    assert any(c.name == "at_least_one_node" for c in problem.linear)


def test_flowchart_decision_rules():
    g = build_graph(
        [("a", "start", ACTIVITY), ("d", "ok?", DECISION), ("b", "stop", ACTIVITY)],
        [("a", "d", ""), ("d", "b", "yes"), ("d", "a", ""), ("d", "d", "loop")],
    )
    problem = build_problem(_partial_from([g], "flowchart"), profile("flowchart"))
    min_out = [c for c in problem.linear if c.name == "decision_min_out"]
    assert len(min_out) == 1
    fixed_edges = {v for v, val in problem.fixed.items() if val == 0}
    assert len(fixed_edges) == 2  # the self-loop and the unlabeled decision arm


def test_taxonomy_self_loop_fixed_to_zero():
    g = LabeledGraph()
    a = g.add_node("animal", CONCEPT)
    b = g.add_node("dog", CONCEPT)
    g.add_edge(a, b, "")
    g.add_edge(b, b, "")
    problem = build_problem(_partial_from([g], "taxonomy"), profile("taxonomy"))
    self_loops = [
        v for v, e in problem.edges.items() if e.source == e.target
    ]
    assert self_loops and all(problem.fixed.get(v) == 0 for v in self_loops)


def test_clevr_type_incompatible_edge_fixed():
    g = LabeledGraph()
    s = g.add_node("", clevr_op("scene"))
    c = g.add_node("", clevr_op("count"))
    f = g.add_node("", clevr_op("filter_color", "red"))
    g.add_edge(s, c, "0")
    g.add_edge(c, f, "0")  # Count output feeding an ObjectSet input
    problem = build_problem(_partial_from([g], "clevr"), profile("clevr"))
    bad = [v for v, e in problem.edges.items()
           if problem.nodes[e.source].kind.op == "count"]
    assert bad and all(problem.fixed.get(v) == 0 for v in bad)


def test_unknown_domain():
    g = build_graph([("a", "x", ACTIVITY)], [])
    partial = _partial_from([g], "flowchart")
    with pytest.raises(UnknownDomain):
        build_problem(partial, profile("flowchart", name="mindmap"))


def test_check_consistent_flowchart():
    g = build_graph(
        [("a", "start", ACTIVITY), ("d", "ok?", DECISION),
         ("b", "ship", ACTIVITY), ("c", "hold", ACTIVITY)],
        [("a", "d", ""), ("d", "b", "yes"), ("d", "c", "no")],
    )
    report = check(g, profile("flowchart"))
    assert report.consistent
    assert report.violations == []


def test_check_decision_single_exit():
    g = build_graph(
        [("a", "start", ACTIVITY), ("d", "ok?", DECISION), ("b", "done", ACTIVITY)],
        [("a", "d", ""), ("d", "b", "yes")],
    )
    report = check(g, profile("flowchart"))
    assert not report.consistent
    names = {v.name: v for v in report.violations}
    assert "decision_min_out" in names
    assert names["decision_min_out"].witnesses == ("d",)


def test_check_flowchart_violation_names():
    g = build_graph(
        [("a", "start", ACTIVITY), ("b", "loose end", ACTIVITY),
         ("c", "finish", ACTIVITY), ("d", "ok?", DECISION)],
        [("a", "d", ""), ("d", "c", ""), ("d", "d", "x")],
    )
    report = check(g, profile("flowchart"))
    names = {v.name for v in report.violations}
    assert {"single_source", "no_self_loop", "decision_edge_condition"} <= names


def test_check_taxonomy_two_roots():
    g = build_graph(
        [("a", "animal", CONCEPT), ("b", "plant", CONCEPT), ("c", "dog", CONCEPT)],
        [("a", "c", "")],
    )
    report = check(g, profile("taxonomy"))
    assert not report.consistent
    names = {v.name: v for v in report.violations}
    assert names["single_root"].witnesses == ("a", "b")


def test_check_taxonomy_cycle_and_multi_parent():
    g = build_graph(
        [("a", "animal", CONCEPT), ("b", "dog", CONCEPT), ("c", "pet", CONCEPT)],
        [("a", "b", ""), ("c", "b", ""), ("b", "c", "")],
    )
    report = check(g, profile("taxonomy"))
    names = {v.name for v in report.violations}
    assert "acyclic" in names
    assert "single_parent" in names


def test_check_taxonomy_connected_toggle():
    # a -> b plus a rootless cycle c <-> d
    g = build_graph(
        [("a", "animal", CONCEPT), ("b", "dog", CONCEPT),
         ("c", "rock", CONCEPT), ("d", "granite", CONCEPT)],
        [("a", "b", ""), ("c", "d", ""), ("d", "c", "")],
    )
    strict = check(g, profile("taxonomy"))
    assert any(v.name == "reachable_from_root" for v in strict.violations)
    loose = check(g, profile("taxonomy", taxonomy_require_connected=False))
    assert not any(v.name == "reachable_from_root" for v in loose.violations)
    assert not loose.consistent  # the cycle still violates acyclicity


def test_check_empty_graph_inconsistent_everywhere():
    g = LabeledGraph()
    for domain in ("flowchart", "taxonomy", "clevr"):
        assert not check(g, profile(domain)).consistent


def test_check_clevr_valid_program():
    g = LabeledGraph()
    s = g.add_node("", clevr_op("scene"))
    f = g.add_node("", clevr_op("filter_color", "red"))
    e = g.add_node("", clevr_op("exist"))
    g.add_edge(s, f, "0")
    g.add_edge(f, e, "0")
    assert check(g, profile("clevr")).consistent


def test_check_clevr_violations():
    g = LabeledGraph()
    s = g.add_node("", clevr_op("scene"))
    u = g.add_node("", clevr_op("unique"))
    q = g.add_node("", clevr_op("query_color"))
    lt = g.add_node("", clevr_op("less_than"))
    g.add_edge(s, u, "0")
    g.add_edge(u, q, "0")
    g.add_edge(q, lt, "0")  # Attr feeding a Count slot
    report = check(g, profile("clevr"))
    names = {v.name for v in report.violations}
    assert "arg_type" in names
    assert "arity" in names  # less_than is missing its second argument


# ---------------------------------------------------------------------------
# Solver-side problem semantics agree with the concrete-graph checker.


@pytest.mark.parametrize("domain,builder", [
    ("flowchart", random_flowchart),
    ("taxonomy", random_taxonomy_tree),
])
def test_problem_checker_agreement_small(domain, builder):
    rng = random.Random(17)
    prof = profile(domain)
    for _ in range(4):
        truth = builder(rng, 3)
        pool = candidate_pool(rng, truth, domain, size=3)
        partial = abstract(pool, prof)
        if partial.size() > 11:
            continue
        problem = build_problem(partial, prof)
        variables = sorted(problem.variables)
        for bits in itertools.product((0, 1), repeat=len(variables)):
            assignment = dict(zip(variables, bits))
            lhs = problem.satisfied(assignment)
            graph = problem.induced_graph(assignment)
            rhs = graph is not None and check(graph, prof).consistent
            assert lhs == rhs, (domain, assignment)
