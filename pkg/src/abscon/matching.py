"""Align a candidate graph to a base graph by approximate graph edit distance.

The edit model: substituting a node costs 1 - similarity (forbidden below the
threshold tau), inserting or deleting a node costs 1, substituting an edge is
free when the normalized labels agree under the node mapping and forbidden
otherwise, and inserting or deleting an edge costs 1. Small inputs are solved
exactly; larger ones use a bipartite assignment warm start refined by local
search.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import TooLarge
from .graph import LabeledGraph, normalize_label
from .similarity import EmbeddingProvider, SimilarityMode, node_similarity

EXHAUSTIVE_LIMIT = 6  # match() falls back to exact search at or below this size
ORACLE_LIMIT = 8


@dataclass
class CostModel:
    mode: SimilarityMode = SimilarityMode.EMBEDDING
    provider: EmbeddingProvider | None = None
    tau: float = 0.5
    case_sensitive: bool = False

    def node_sub(self, a, b) -> float:
        sim = node_similarity(a, b, self.mode, self.provider, self.case_sensitive)
        if sim < self.tau:
            return math.inf
        return 1.0 - sim


@dataclass
class MatchResult:
    node_map: dict[str, str]
    total_cost: float
    optimal: bool = False


class _Instance:
    """Precomputed cost data for one (candidate, base) pair."""

    def __init__(self, candidate: LabeledGraph, base: LabeledGraph, cost: CostModel):
        self.cand_ids = sorted(candidate.nodes)
        self.base_ids = sorted(base.nodes)
        self.sub = {}
        for c in self.cand_ids:
            for b in self.base_ids:
                value = cost.node_sub(candidate.nodes[c], base.nodes[b])
                if value != math.inf:
                    self.sub[(c, b)] = value
        norm = lambda l: normalize_label(l, cost.case_sensitive)
        self.cand_edges = [(e.source, e.target, norm(e.label)) for e in candidate.edges]
        self.base_edge_set = {(e.source, e.target, norm(e.label)) for e in base.edges}
        self.n_base_edges = len(base.edges)

    def mapping_cost(self, node_map: dict[str, str]) -> float:
        total = 0.0
        for c in self.cand_ids:
            b = node_map.get(c)
            total += self.sub[(c, b)] if b is not None else 1.0
        total += len(self.base_ids) - len(node_map)
        matched = 0
        for s, t, l in self.cand_edges:
            ms, mt = node_map.get(s), node_map.get(t)
            if ms is not None and mt is not None and (ms, mt, l) in self.base_edge_set:
                matched += 1
            else:
                total += 1.0
        total += self.n_base_edges - matched
        return total


def match(
    candidate: LabeledGraph,
    base: LabeledGraph,
    cost: CostModel | None = None,
    timeout: float = 5.0,
) -> MatchResult:
    """Lowest-cost alignment found within the timeout; deterministic."""
    cost = cost or CostModel()
    inst = _Instance(candidate, base, cost)
    if len(inst.cand_ids) <= EXHAUSTIVE_LIMIT and len(inst.base_ids) <= EXHAUSTIVE_LIMIT:
        node_map, total = _exhaustive(inst)
        return MatchResult(node_map, total, optimal=True)
    deadline = time.monotonic() + timeout
    node_map = _assignment_start(inst)
    node_map, total = _refine(inst, node_map, deadline)
    return MatchResult(node_map, total, optimal=False)


def exhaustive_match(
    candidate: LabeledGraph, base: LabeledGraph, cost: CostModel | None = None
) -> MatchResult:
    """Provably minimal edit cost by enumeration of all partial injections."""
    if len(candidate.nodes) > ORACLE_LIMIT or len(base.nodes) > ORACLE_LIMIT:
        raise TooLarge(f"exhaustive matching is limited to {ORACLE_LIMIT} nodes per side")
    cost = cost or CostModel()
    inst = _Instance(candidate, base, cost)
    node_map, total = _exhaustive(inst)
    return MatchResult(node_map, total, optimal=True)


def _exhaustive(inst: _Instance) -> tuple[dict[str, str], float]:
    """DFS over partial injections, visiting base choices in id order (then
    'unmapped') so the first minimum found is the canonical tie-break."""
    cand_ids = inst.cand_ids
    best_map: dict[str, str] = {}
    best_cost = math.inf

    # Undecided candidate edges indexed by their later endpoint in DFS order.
    order_of = {c: i for i, c in enumerate(cand_ids)}
    edges_closing_at = {c: [] for c in cand_ids}
    for s, t, l in inst.cand_edges:
        closer = s if order_of[s] >= order_of[t] else t
        edges_closing_at[closer].append((s, t, l))

    current: dict[str, str] = {}
    used: set[str] = set()

    def lower_bound(depth: int, node_cost: float, edge_del: int, matched: int) -> float:
        remaining_cand_edges = sum(
            len(edges_closing_at[cand_ids[i]]) for i in range(depth, len(cand_ids))
        )
        base_ins = max(0, inst.n_base_edges - matched - remaining_cand_edges)
        unmatched_base_nodes = len(inst.base_ids) - len(current)
        remaining_nodes = len(cand_ids) - depth
        # Each side's surplus nodes can only be deleted (resp. inserted) at cost 1.
        node_floor = max(0, remaining_nodes - unmatched_base_nodes)
        base_node_floor = max(0, unmatched_base_nodes - remaining_nodes)
        return node_cost + edge_del + base_ins + node_floor + base_node_floor

    def dfs(depth: int, node_cost: float, edge_del: int, matched: int):
        nonlocal best_map, best_cost
        if depth == len(cand_ids):
            total = (
                node_cost
                + (len(inst.base_ids) - len(current))
                + edge_del
                + (inst.n_base_edges - matched)
            )
            if total < best_cost - 1e-12:
                best_cost = total
                best_map = dict(current)
            return
        if lower_bound(depth, node_cost, edge_del, matched) >= best_cost - 1e-12:
            return
        c = cand_ids[depth]
        pending = edges_closing_at[c]

        def settle(extra_map: dict[str, str]) -> tuple[int, int]:
            d, m = 0, 0
            lookup = {**current, **extra_map}
            for s, t, l in pending:
                ms, mt = lookup.get(s), lookup.get(t)
                if ms is not None and mt is not None and (ms, mt, l) in inst.base_edge_set:
                    m += 1
                else:
                    d += 1
            return d, m

        for b in inst.base_ids:
            if b in used or (c, b) not in inst.sub:
                continue
            current[c] = b
            used.add(b)
            d, m = settle({c: b})
            dfs(depth + 1, node_cost + inst.sub[(c, b)], edge_del + d, matched + m)
            del current[c]
            used.discard(b)
        d, m = settle({})
        dfs(depth + 1, node_cost + 1.0, edge_del + d, matched + m)

    dfs(0, 0.0, 0, 0)
    return best_map, best_cost


def _assignment_start(inst: _Instance) -> dict[str, str]:
    """Bipartite assignment over nodes with local edge-neighborhood terms."""
    n, m = len(inst.cand_ids), len(inst.base_ids)
    big = 1e6  # stands in for forbidden substitutions
    size = n + m
    matrix = np.full((size, size), 0.0)
    cand_out = {c: [] for c in inst.cand_ids}
    cand_in = {c: [] for c in inst.cand_ids}
    for s, t, l in inst.cand_edges:
        cand_out[s].append(l)
        cand_in[t].append(l)
    base_out = {b: [] for b in inst.base_ids}
    base_in = {b: [] for b in inst.base_ids}
    for s, t, l in inst.base_edge_set:
        base_out[s].append(l)
        base_in[t].append(l)

    def local_term(c, b):
        cost = 0.0
        for ca, ba in ((cand_out, base_out), (cand_in, base_in)):
            left, pool = sorted(ca[c]), sorted(ba[b])
            shared = 0
            for l in left:
                if l in pool:
                    pool.remove(l)
                    shared += 1
            cost += 0.5 * (len(left) + len(pool) - shared)
        return cost

    for i, c in enumerate(inst.cand_ids):
        for j, b in enumerate(inst.base_ids):
            sub = inst.sub.get((c, b))
            matrix[i, j] = big if sub is None else sub + local_term(c, b)
    matrix[:n, m:] = big
    for i, c in enumerate(inst.cand_ids):
        matrix[i, m + i] = 1.0 + 0.5 * (len(cand_out[c]) + len(cand_in[c]))
    matrix[n:, :m] = big
    for j, b in enumerate(inst.base_ids):
        matrix[n + j, j] = 1.0 + 0.5 * (len(base_out[b]) + len(base_in[b]))
    matrix[n:, m:] = 0.0

    rows, cols = linear_sum_assignment(matrix)
    node_map = {}
    for i, j in zip(rows, cols):
        if i < n and j < m and (inst.cand_ids[i], inst.base_ids[j]) in inst.sub:
            node_map[inst.cand_ids[i]] = inst.base_ids[j]
    return node_map


def _refine(inst: _Instance, node_map: dict[str, str], deadline: float) -> tuple[dict[str, str], float]:
    """Greedy local moves: remap / unmap single nodes, swap image pairs."""
    best = dict(node_map)
    best_cost = inst.mapping_cost(best)
    improved = True
    while improved and time.monotonic() < deadline:
        improved = False
        used = set(best.values())
        for c in inst.cand_ids:
            if time.monotonic() >= deadline:
                break
            options: list[str | None] = [b for b in inst.base_ids if (c, b) in inst.sub and (b not in used or best.get(c) == b)]
            options.append(None)
            for b in options:
                if best.get(c) == b:
                    continue
                trial = dict(best)
                if b is None:
                    trial.pop(c, None)
                else:
                    trial[c] = b
                trial_cost = inst.mapping_cost(trial)
                if trial_cost < best_cost - 1e-12:
                    best, best_cost = trial, trial_cost
                    used = set(best.values())
                    improved = True
        mapped = sorted(best)
        for i in range(len(mapped)):
            if time.monotonic() >= deadline:
                break
            for j in range(i + 1, len(mapped)):
                a, b = mapped[i], mapped[j]
                if a not in best or b not in best:
                    continue
                if (a, best[b]) not in inst.sub or (b, best[a]) not in inst.sub:
                    continue
                trial = dict(best)
                trial[a], trial[b] = best[b], best[a]
                trial_cost = inst.mapping_cost(trial)
                if trial_cost < best_cost - 1e-12:
                    best, best_cost = trial, trial_cost
                    improved = True
    return best, best_cost
