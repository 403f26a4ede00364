"""Constrained maximum-likelihood selection over a partial model.

The objective is binary cross-entropy over element existence probabilities;
maximizing it is equivalent (up to an additive constant) to maximizing the
sum of logit weights of the selected elements, which is what the solver and
its brute-force oracle both do.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .abstraction import PartialModel
from .constraints import (
    EQ,
    GE,
    LE,
    ConstraintProblem,
    build_problem,
    check,
)
from .domains import DomainProfile, profile as make_profile
from .errors import InfeasibleModel, TooLarge
from .graph import LabeledGraph

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
TIMED_OUT_BEST = "timed_out_best"

BRUTE_FORCE_LIMIT = 20
_TOL = 1e-12


@dataclass
class Solution:
    assignment: dict[str, int] | None
    objective: float
    status: str

    @property
    def feasible(self) -> bool:
        return self.assignment is not None


def node_var(elem_id: str) -> str:
    return f"n:{elem_id}"


def edge_var(key: tuple[str, str, str]) -> str:
    return f"e:{key[0]}|{key[1]}|{key[2]}"


def weights(partial: PartialModel, epsilon: float | None = None) -> dict[str, float]:
    """Logit weights with probabilities clamped away from 0 and 1.

    The clamp eps defaults to 1/(2 n): unanimous elements stay droppable when
    constraints demand it, yet remain strictly preferred over majority ones.
    """
    if partial.n_candidates < 1:
        raise ValueError("partial model has no candidates")
    eps = 1.0 / (2 * partial.n_candidates) if epsilon is None else epsilon
    out: dict[str, float] = {}

    def logit(count: int) -> float:
        p = count / partial.n_candidates
        p = min(max(p, eps), 1.0 - eps)
        return math.log(p) - math.log(1.0 - p)

    for elem_id, elem in partial.nodes.items():
        out[node_var(elem_id)] = logit(elem.count)
    for key, elem in partial.edges.items():
        out[edge_var(key)] = logit(elem.count)
    return out


def bce_objective(partial: PartialModel, assignment: dict[str, int],
                  epsilon: float | None = None) -> float:
    """The cross-entropy objective itself (used by equivalence tests)."""
    eps = 1.0 / (2 * partial.n_candidates) if epsilon is None else epsilon
    total = 0.0
    items = [(node_var(i), e) for i, e in partial.nodes.items()]
    items += [(edge_var(k), e) for k, e in partial.edges.items()]
    for var, elem in items:
        p = elem.count / partial.n_candidates
        p = min(max(p, eps), 1.0 - eps)
        x = assignment.get(var, 0)
        total += x * math.log(p) + (1 - x) * math.log(1.0 - p)
    return total


# ---------------------------------------------------------------------------
# Branch and bound


class _Solver:
    def __init__(self, problem: ConstraintProblem, timeout: float):
        self.problem = problem
        self.deadline = time.monotonic() + timeout
        self.vars = sorted(problem.variables)
        self.index = {v: i for i, v in enumerate(self.vars)}
        self.weights = np.array([problem.weights.get(v, 0.0) for v in self.vars])
        self.order = sorted(
            range(len(self.vars)),
            key=lambda i: (-abs(self.weights[i]), self.vars[i]),
        )
        self.values = [-1] * len(self.vars)
        self.trail: list[int] = []

        self.edge_endpoints = {}
        self.incident: dict[int, list[int]] = {i: [] for i in range(len(self.vars))}
        self.in_edges_of: dict[int, list[int]] = {i: [] for i in range(len(self.vars))}
        self.out_edges_of: dict[int, list[int]] = {i: [] for i in range(len(self.vars))}
        for var, edge in problem.edges.items():
            e = self.index[var]
            s, t = self.index[edge.source], self.index[edge.target]
            self.edge_endpoints[e] = (s, t)
            self.incident[s].append(e)
            self.incident[t].append(e)
            self.in_edges_of[t].append(e)
            self.out_edges_of[s].append(e)
        self.node_idx = [self.index[v] for v in problem.nodes]
        self.is_node = [v in problem.nodes for v in self.vars]

        self.constraints = []
        self.watching: dict[int, list[int]] = {i: [] for i in range(len(self.vars))}
        for lc in problem.linear:
            terms = [(c, self.index[v]) for c, v in lc.terms]
            ci = len(self.constraints)
            self.constraints.append((terms, lc.relation, lc.bound))
            for _, vi in terms:
                self.watching[vi].append(ci)

        self.global_kinds = {g.kind for g in problem.global_cs}
        self.node_kind = {}
        for var, nv in problem.nodes.items():
            self.node_kind[self.index[var]] = nv.kind

        # Under a single-source constraint, at most one node without any
        # incoming edge variable can ever be selected; group each such node
        # with its outgoing edges so the bound admits only the best bundle.
        self.bundle_of = [-1] * len(self.vars)
        self.n_bundles = 0
        if "single_source" in self.global_kinds:
            for vi in self.node_idx:
                if not self.in_edges_of[vi]:
                    self.bundle_of[vi] = self.n_bundles
                    for e in self.out_edges_of[vi]:
                        self.bundle_of[e] = self.n_bundles
                    self.n_bundles += 1

        self.best_assignment: dict[str, int] | None = None
        self.best_obj = -math.inf
        self.best_count = -1
        self.nodes_explored = 0
        self.timed_out = False

    # -- assignment machinery

    def assign(self, vi: int, value: int, queue: list[int]) -> bool:
        if self.values[vi] != -1:
            return self.values[vi] == value
        self.values[vi] = value
        self.trail.append(vi)
        queue.append(vi)
        return True

    def undo_to(self, mark: int) -> None:
        while len(self.trail) > mark:
            self.values[self.trail.pop()] = -1

    def propagate(self, queue: list[int]) -> bool:
        touched = list(queue)
        while touched:
            next_constraints = set()
            while touched:
                vi = touched.pop()
                value = self.values[vi]
                if self.is_node[vi] and value == 0:
                    for e in self.incident[vi]:
                        if not self.assign(e, 0, touched):
                            return False
                elif not self.is_node[vi] and value == 1:
                    s, t = self.edge_endpoints[vi]
                    if not self.assign(s, 1, touched) or not self.assign(t, 1, touched):
                        return False
                next_constraints.update(self.watching[vi])
            for ci in sorted(next_constraints):
                if not self._propagate_linear(ci, touched):
                    return False
        return True

    def _propagate_linear(self, ci: int, queue: list[int]) -> bool:
        terms, relation, bound = self.constraints[ci]
        lo = hi = 0
        free = []
        for c, vi in terms:
            v = self.values[vi]
            if v == -1:
                lo += min(c, 0)
                hi += max(c, 0)
                free.append((c, vi))
            else:
                lo += c * v
                hi += c * v
        if relation in (LE, EQ):
            if lo > bound:
                return False
            for c, vi in free:
                if c > 0 and lo + c > bound:
                    if not self.assign(vi, 0, queue):
                        return False
                elif c < 0 and lo - c > bound:
                    if not self.assign(vi, 1, queue):
                        return False
        if relation in (GE, EQ):
            if hi < bound:
                return False
            for c, vi in free:
                if self.values[vi] != -1:
                    continue
                if c > 0 and hi - c < bound:
                    if not self.assign(vi, 1, queue):
                        return False
                elif c < 0 and hi + c < bound:
                    if not self.assign(vi, 0, queue):
                        return False
        return True

    # -- structural pruning (sound: prunes only provably doomed subtrees)

    def structural_conflict(self) -> bool:
        values = self.values
        if "acyclic" in self.global_kinds and self._must_edge_cycle():
            return True
        if {"single_source", "source_kind_is", "reachable_from_source"} & self.global_kinds:
            # A node with an incoming edge already selected can never end up
            # a source, whatever happens to the free variables.
            potential_sources = [
                vi for vi in self.node_idx
                if values[vi] != 0
                and not any(values[e] == 1 for e in self.in_edges_of[vi])
            ]
            definite_sources = [
                vi for vi in potential_sources
                if values[vi] == 1
                and all(values[e] == 0 for e in self.in_edges_of[vi])
            ]
            any_selected = any(values[vi] == 1 for vi in self.node_idx)
            if "single_source" in self.global_kinds:
                if len(definite_sources) > 1:
                    return True
                if any_selected and not potential_sources:
                    return True
            if "source_kind_is" in self.global_kinds:
                for vi in definite_sources:
                    kind = self.node_kind[vi]
                    if not (kind.is_clevr and kind.op == "scene"):
                        return True
            if "reachable_from_source" in self.global_kinds and any_selected:
                # Optimistic reachability: selected nodes must be reachable
                # from some potential source via edges not yet excluded.
                reached = set(potential_sources)
                stack = list(potential_sources)
                while stack:
                    vi = stack.pop()
                    for e in self.out_edges_of[vi]:
                        if values[e] == 0:
                            continue
                        target = self.edge_endpoints[e][1]
                        if target not in reached and values[target] != 0:
                            reached.add(target)
                            stack.append(target)
                for vi in self.node_idx:
                    if values[vi] == 1 and vi not in reached:
                        return True
        if "single_sink" in self.global_kinds:
            potential_sinks = [
                vi for vi in self.node_idx
                if values[vi] != 0
                and not any(values[e] == 1 for e in self.out_edges_of[vi])
            ]
            definite_sinks = [
                vi for vi in potential_sinks
                if values[vi] == 1
                and all(values[e] == 0 for e in self.out_edges_of[vi])
            ]
            if len(definite_sinks) > 1:
                return True
            if any(values[vi] == 1 for vi in self.node_idx) and not potential_sinks:
                return True
        return False

    def _must_edge_cycle(self) -> bool:
        indeg = {vi: 0 for vi in self.node_idx}
        out: dict[int, list[int]] = {vi: [] for vi in self.node_idx}
        total = 0
        for e, (s, t) in self.edge_endpoints.items():
            if self.values[e] == 1:
                out[s].append(t)
                indeg[t] += 1
                total += 1
        if not total:
            return False
        queue = [vi for vi in self.node_idx if indeg[vi] == 0]
        seen = 0
        while queue:
            vi = queue.pop()
            seen += 1
            for t in out[vi]:
                indeg[t] -= 1
                if indeg[t] == 0:
                    queue.append(t)
        return seen < len(self.node_idx)

    # -- search

    def bound_and_counts(self) -> tuple[float, int, int]:
        """(objective upper bound, selected so far, count upper bound among
        equal-objective completions). A variable with a genuinely negative
        weight cannot appear in any completion that ties the bound, so it is
        excluded from the tie count. Feasible completions activate at most
        one source bundle, so only the best bundle enters the bound."""
        bound = 0.0
        selected = 0
        tie_count = 0
        bundles = [0.0] * self.n_bundles
        for i, v in enumerate(self.values):
            w = self.weights[i]
            b = self.bundle_of[i]
            if v == 1:
                selected += 1
                tie_count += 1
                if b < 0:
                    bound += w
                else:
                    bundles[b] += w
            elif v == -1:
                if w > 0.0:
                    if b < 0:
                        bound += w
                    else:
                        bundles[b] += w
                if w > -_TOL:
                    tie_count += 1
        if bundles:
            bound += max(0.0, max(bundles))
        return bound, selected, tie_count

    def search(self) -> None:
        queue: list[int] = []
        for var, value in self.problem.fixed.items():
            if not self.assign(self.index[var], value, queue):
                return
        if not self.propagate(queue):
            return
        if self.structural_conflict():
            return
        self._dfs()

    def _dfs(self) -> None:
        self.nodes_explored += 1
        if self.nodes_explored % 128 == 0 and time.monotonic() > self.deadline:
            self.timed_out = True
        if self.timed_out:
            return

        bound, selected, tie_count = self.bound_and_counts()
        if bound < self.best_obj - _TOL:
            return
        if bound <= self.best_obj + _TOL and tie_count <= self.best_count:
            return

        branch_var = next((i for i in self.order if self.values[i] == -1), None)
        if branch_var is None:
            assignment = {self.vars[i]: self.values[i] for i in range(len(self.vars))}
            if not self.problem.satisfied(assignment):
                return
            obj = float(sum(self.weights[i] for i, v in enumerate(self.values) if v == 1))
            if (
                obj > self.best_obj + _TOL
                or (abs(obj - self.best_obj) <= _TOL and selected > self.best_count)
            ):
                self.best_obj = obj
                self.best_count = selected
                self.best_assignment = assignment
            return

        preferred = 1 if self.weights[branch_var] >= 0 else 0
        for value in (preferred, 1 - preferred):
            mark = len(self.trail)
            queue: list[int] = []
            if self.assign(branch_var, value, queue) and self.propagate(queue):
                if not self.structural_conflict():
                    self._dfs()
            self.undo_to(mark)
            if self.timed_out:
                return


def solve(problem: ConstraintProblem, timeout: float = 60.0) -> Solution:
    """Branch-and-bound over the binary selection variables.

    Returns a provably optimal solution, INFEASIBLE when no assignment
    satisfies the constraints, or the best solution found at timeout.
    """
    solver = _Solver(problem, timeout)
    solver.search()
    if solver.timed_out:
        return Solution(solver.best_assignment, solver.best_obj, TIMED_OUT_BEST)
    if solver.best_assignment is None:
        return Solution(None, -math.inf, INFEASIBLE)
    return Solution(solver.best_assignment, solver.best_obj, OPTIMAL)


# ---------------------------------------------------------------------------
# Brute-force oracle


def _profile_for_problem(problem: ConstraintProblem) -> DomainProfile:
    kinds = {g.kind for g in problem.global_cs}
    overrides = {"case_sensitive_labels": problem.case_sensitive}
    if problem.domain == "taxonomy":
        overrides["taxonomy_require_connected"] = "reachable_from_source" in kinds
    return make_profile(problem.domain, **overrides)


def brute_force(problem: ConstraintProblem) -> Solution:
    """Enumerate all assignments, filtering with the graph-level checker.

    Independent verification path for solve(): the domain rules are applied
    to the induced concrete graph, not to the encoded constraints.
    """
    variables = sorted(problem.variables)
    k = len(variables)
    if k > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"brute force is limited to {BRUTE_FORCE_LIMIT} variables")
    checker_profile = _profile_for_problem(problem)

    codes = np.arange(1 << k, dtype=np.int64)
    bits = {v: (codes >> (k - 1 - i)) & 1 for i, v in enumerate(variables)}

    mask = np.ones(1 << k, dtype=bool)
    for var, value in problem.fixed.items():
        mask &= bits[var] == value
    for lc in problem.linear:
        lhs = np.zeros(1 << k, dtype=np.int64)
        for c, v in lc.terms:
            lhs += c * bits[v]
        if lc.relation == LE:
            mask &= lhs <= lc.bound
        elif lc.relation == GE:
            mask &= lhs >= lc.bound
        else:
            mask &= lhs == lc.bound

    weight_vec = np.zeros(1 << k)
    for i, v in enumerate(variables):
        weight_vec += problem.weights.get(v, 0.0) * bits[v]

    survivors = np.nonzero(mask)[0]
    if survivors.size == 0:
        return Solution(None, -math.inf, INFEASIBLE)
    # Visit candidates best-objective first; ties in ascending code order,
    # which is lexicographic over the assignment tuple.
    order = survivors[np.argsort(-weight_vec[survivors], kind="stable")]
    for code in order:
        assignment = {v: int((code >> (k - 1 - i)) & 1) for i, v in enumerate(variables)}
        graph = problem.induced_graph(assignment)
        if graph is None:
            continue
        if check(graph, checker_profile).consistent:
            return Solution(assignment, float(weight_vec[code]), OPTIMAL)
    return Solution(None, -math.inf, INFEASIBLE)


# ---------------------------------------------------------------------------
# End-to-end concretization


def concretize(
    partial: PartialModel,
    profile: DomainProfile,
    solve_timeout: float | None = None,
) -> LabeledGraph:
    """build problem -> weights -> solve -> materialize; the result is
    guaranteed to pass the domain checker."""
    problem = build_problem(partial, profile)
    problem.weights = weights(partial)
    solution = solve(problem, solve_timeout if solve_timeout is not None else profile.solve_timeout)
    if solution.assignment is None:
        raise InfeasibleModel(
            "no combination of candidate elements satisfies the domain constraints"
            if solution.status == INFEASIBLE
            else "solver timed out before finding any consistent selection"
        )
    graph = problem.induced_graph(solution.assignment)
    report = check(graph, profile)
    if not report.consistent:
        # Only reachable for timed-out, non-proven solutions.
        raise InfeasibleModel("timed-out best selection is not consistent")
    return graph
