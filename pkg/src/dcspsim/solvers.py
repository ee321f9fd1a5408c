"""Centralized search engines used by mediators.

``branch_and_bound`` solves a coloring-style session subproblem: all
in-session constraints must hold, and the number of violated
(variable, outside-agent) pairs is minimized.  ``build_flow_network`` /
``ford_fulkerson`` / ``extract_assignment`` solve the sensor-allocation
subproblem through its reduction to feasible flow.

Both are pure and reentrant; any replacement solver only has to honor the
SubProblem -> solution contract.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .csp import Constraint, Value, is_satisfied

# -- branch and bound --------------------------------------------------------


@dataclass
class SubProblem:
    """A mediation subproblem.

    ``domains`` are ordered with each variable's current value first, so the
    incumbent assignment is the first leaf the search visits.  ``labels`` map
    each candidate value to the outside agents it would conflict with (from
    the responders' labeled domains); ``fixed`` holds current values of
    dropped/outside agents whose constraints with session members act as
    weak constraints.
    """

    variables: tuple[int, ...]
    domains: Mapping[int, tuple[Value, ...]]
    constraints: tuple[Constraint, ...]
    fixed: Mapping[int, Value] = field(default_factory=dict)
    fixed_constraints: tuple[Constraint, ...] = ()
    labels: Mapping[int, Mapping[Value, frozenset[int]]] = field(default_factory=dict)


@dataclass
class BnbSolution:
    assignment: dict[int, Value]
    outside_cost: int
    nodes: int
    checks: int


def _outside_names(sp: SubProblem, x: int, v: Value, session: frozenset[int]) -> frozenset[int]:
    """Outside agents violated when in-session ``x`` takes ``v``.

    Union of the responder's label for ``v`` and direct violations against
    the fixed outside context; session members never count (their constraints
    are hard).
    """
    names = set(sp.labels.get(x, {}).get(v, frozenset()))
    for c in sp.fixed_constraints:
        if not c.involves(x):
            continue
        u = c.other(x)
        if u in sp.fixed and not is_satisfied(c, v, sp.fixed[u]):
            names.add(u)
    return frozenset(names - session)


def branch_and_bound(sp: SubProblem) -> BnbSolution | None:
    """Minimum-outside-violation assignment satisfying all in-session
    constraints, or None when the in-session constraints are unsatisfiable.

    Depth-first over variables sorted by id, domains current-value-first;
    bound is the accumulated outside cost with no lookahead.  Among
    minimal-cost solutions the first one found is returned, so an incumbent
    that is consistent and cost-free survives unchanged.  Forward checking
    prunes values with no feasible completion; it never changes which leaf
    is found first, so the returned assignment is order-identical to plain
    backtracking.
    """
    order = tuple(sorted(sp.variables))
    session = frozenset(order)
    cost_of: dict[int, dict[Value, int]] = {}
    for x in order:
        cost_of[x] = {v: len(_outside_names(sp, x, v, session)) for v in sp.domains[x]}
    pos = {x: i for i, x in enumerate(order)}
    n = len(order)
    domains = [tuple(sp.domains[x]) for x in order]
    costs = [[cost_of[order[i]][v] for v in domains[i]] for i in range(n)]
    # per variable: the later-ordered neighbors, with per-value-pair conflict
    # tables so the hot loop never touches Constraint objects
    later: list[list[tuple[int, list[list[bool]]]]] = [[] for _ in range(n)]
    for c in sp.constraints:
        a, b = (c.a, c.b) if pos[c.a] < pos[c.b] else (c.b, c.a)
        ia, ib = pos[a], pos[b]
        table = [
            [not is_satisfied(c, v, w) for w in domains[ib]]
            for v in domains[ia]
        ]
        later[ia].append((ib, table))

    # pruned[i][j] counts how many assigned earlier neighbors exclude value j
    pruned = [[0] * len(domains[i]) for i in range(n)]
    live = [len(domains[i]) for i in range(n)]
    chosen: list[int] = [0] * n

    best_cost: int | None = None
    best: list[int] | None = None
    nodes = 0
    checks = 0

    def dfs(i: int, cost: int) -> None:
        nonlocal best, best_cost, nodes, checks
        if best_cost is not None and cost >= best_cost:
            return
        if i == n:
            best = chosen.copy()
            best_cost = cost
            return
        px = pruned[i]
        cx = costs[i]
        for j in range(len(domains[i])):
            if px[j]:
                continue
            nodes += 1
            chosen[i] = j
            wiped = False
            touched: list[tuple[int, int]] = []
            for iy, table in later[i]:
                py = pruned[iy]
                row = table[j]
                checks += len(row)
                for w in range(len(row)):
                    if row[w]:
                        if py[w] == 0:
                            live[iy] -= 1
                        py[w] += 1
                        touched.append((iy, w))
                if live[iy] == 0:
                    wiped = True
                    break
            if not wiped:
                dfs(i + 1, cost + cx[j])
            for iy, w in touched:
                py = pruned[iy]
                py[w] -= 1
                if py[w] == 0:
                    live[iy] += 1

    dfs(0, 0)
    if best is None:
        return None
    assignment = {order[i]: domains[i][best[i]] for i in range(n)}
    return BnbSolution(assignment, best_cost or 0, nodes, checks)


# -- flow network -------------------------------------------------------------

SOURCE = (0, -1)
SINK = (3, -1)


def sensor_node(s: int) -> tuple[int, int]:
    return (1, s)


def target_node(t: int) -> tuple[int, int]:
    return (2, t)


class FlowNetwork:
    """Integer-capacity flow network with skew-symmetric flow bookkeeping."""

    def __init__(self):
        self.adj: dict[tuple[int, int], list[tuple[int, int]]] = {}
        self.cap: dict[tuple[tuple[int, int], tuple[int, int]], int] = {}
        self.flow: dict[tuple[tuple[int, int], tuple[int, int]], int] = {}
        self.cost: dict[tuple[tuple[int, int], tuple[int, int]], int] = {}
        self.targets: list[int] = []

    def add_edge(self, u, v, capacity: int, cost: int = 0) -> None:
        self.adj.setdefault(u, []).append(v)
        self.adj.setdefault(v, []).append(u)
        self.cap[(u, v)] = capacity
        self.cap.setdefault((v, u), 0)
        self.flow[(u, v)] = 0
        self.flow[(v, u)] = 0
        self.cost[(u, v)] = cost
        self.cost.setdefault((v, u), 0)

    def residual(self, u, v) -> int:
        return self.cap.get((u, v), 0) - self.flow.get((u, v), 0)

    def flow_value(self) -> int:
        return sum(self.flow[(SOURCE, v)] for v in self.adj.get(SOURCE, ()))

    def check_invariants(self) -> None:
        for (u, v), f in self.flow.items():
            if f != -self.flow[(v, u)]:
                raise AssertionError(f"skew symmetry broken on {(u, v)}")
            if f > self.cap.get((u, v), 0):
                raise AssertionError(f"capacity exceeded on {(u, v)}")
        for u in self.adj:
            if u in (SOURCE, SINK):
                continue
            net = sum(self.flow[(u, v)] for v in self.adj[u])
            if net != 0:
                raise AssertionError(f"conservation broken at {u}")


def build_flow_network(
    domains: Mapping[int, Iterable[int]],
    edge_costs: Mapping[tuple[int, int], int] | None = None,
    cap: int = 3,
) -> FlowNetwork:
    """Network for a sensor-allocation subproblem.

    One node per target and per unique sensor; source->sensor edges carry
    capacity 1, sensor->target edges capacity 1, target->sink edges capacity
    min(|domain|, cap).  ``edge_costs`` optionally prices each
    (sensor, target) edge by the outside conflict it would create.
    """
    net = FlowNetwork()
    net.targets = sorted(domains)
    sensors_seen: set[int] = set()
    for t in net.targets:
        ds = sorted(set(domains[t]))
        if not ds:
            raise ValueError(f"target {t} has an empty domain")
        net.add_edge(target_node(t), SINK, min(len(ds), cap))
        for s in ds:
            if s not in sensors_seen:
                sensors_seen.add(s)
                net.add_edge(SOURCE, sensor_node(s), 1)
            c = 0 if edge_costs is None else edge_costs.get((s, t), 0)
            net.add_edge(sensor_node(s), target_node(t), 1, cost=c)
    return net


def _bfs_path(net: FlowNetwork) -> list | None:
    """Shortest augmenting path; ties broken by total edge cost then by the
    lexicographically smallest node sequence."""
    heap = [(0, 0, (SOURCE,))]
    seen: set = set()
    while heap:
        hops, cost, path = heapq.heappop(heap)
        u = path[-1]
        if u == SINK:
            return list(path)
        if u in seen:
            continue
        seen.add(u)
        for v in net.adj.get(u, ()):
            if v in seen or net.residual(u, v) <= 0:
                continue
            heapq.heappush(heap, (hops + 1, cost + net.cost.get((u, v), 0), path + (v,)))
    return None


def _dfs_path(net: FlowNetwork) -> list | None:
    """First augmenting path found depth-first (used to exercise the
    path-order invariance of the max-flow value)."""
    stack = [(SOURCE, [SOURCE])]
    seen = {SOURCE}
    while stack:
        u, path = stack.pop()
        if u == SINK:
            return path
        for v in sorted(net.adj.get(u, ()), reverse=True):
            if v not in seen and net.residual(u, v) > 0:
                seen.add(v)
                stack.append((v, path + [v]))
    return None


def ford_fulkerson(net: FlowNetwork, path_rule: str = "bfs") -> int:
    """Augment along residual paths until none remain; returns the max flow.

    ``path_rule`` selects "bfs" (min-hop, min-conflict-cost, the production
    rule) or "dfs" (order-invariance checking).
    """
    find = _bfs_path if path_rule == "bfs" else _dfs_path
    total = 0
    while True:
        path = find(net)
        if path is None:
            return total
        bottleneck = min(net.residual(u, v) for u, v in zip(path, path[1:]))
        for u, v in zip(path, path[1:]):
            net.flow[(u, v)] += bottleneck
            net.flow[(v, u)] = -net.flow[(u, v)]
        total += bottleneck


def extract_assignment(net: FlowNetwork) -> dict[int, tuple[int, ...]] | None:
    """Per-target sensor sets from a maximal flow, or None when some
    target->sink edge is unsaturated (the subproblem is unsatisfiable)."""
    out: dict[int, tuple[int, ...]] = {}
    for t in net.targets:
        tn = target_node(t)
        if net.residual(tn, SINK) > 0:
            return None
        chosen = tuple(sorted(
            s for (kind, s) in net.adj[tn]
            if kind == 1 and net.flow[(sensor_node(s), tn)] == 1
        ))
        out[t] = chosen
    return out
