"""Centralized solvers against independent exhaustive oracles."""
import itertools
import random

import pytest

from dcspsim.csp import Constraint, Relation, is_satisfied
from dcspsim.solvers import (
    SINK,
    SOURCE,
    SubProblem,
    branch_and_bound,
    build_flow_network,
    extract_assignment,
    ford_fulkerson,
    sensor_node,
    target_node,
)

NEQ = Relation.NOT_EQUALS
BLACK, RED, BLUE = 0, 1, 2


def subproblem(variables, domains, edges, fixed=None, fixed_edges=None, labels=None):
    return SubProblem(
        variables=tuple(variables),
        domains=domains,
        constraints=tuple(Constraint(a, b, NEQ) for a, b in edges),
        fixed=fixed or {},
        fixed_constraints=tuple(Constraint(a, b, NEQ) for a, b in (fixed_edges or ())),
        labels=labels or {},
    )


def bnb_oracle(sp):
    """Exhaustive enumeration: (satisfiable?, minimum outside cost)."""
    session = frozenset(sp.variables)
    best = None
    for combo in itertools.product(*[sp.domains[x] for x in sp.variables]):
        a = dict(zip(sp.variables, combo))
        if not all(is_satisfied(c, a[c.a], a[c.b]) for c in sp.constraints):
            continue
        cost = 0
        for x in sp.variables:
            names = set(sp.labels.get(x, {}).get(a[x], frozenset()))
            for c in sp.fixed_constraints:
                if c.involves(x):
                    u = c.other(x)
                    if u in sp.fixed and not is_satisfied(c, a[x], sp.fixed[u]):
                        names.add(u)
            cost += len(names - session)
        if best is None or cost < best:
            best = cost
    return best


class TestBranchAndBound:
    def test_consistent_incumbent_survives(self):
        # current values (first in each domain) are already consistent
        sp = subproblem(
            (0, 1), {0: (RED, BLACK, BLUE), 1: (BLACK, RED, BLUE)}, [(0, 1)]
        )
        got = branch_and_bound(sp)
        assert got.assignment == {0: RED, 1: BLACK}
        assert got.outside_cost == 0

    def test_k4_in_session_unsatisfiable(self):
        dom = (BLACK, RED, BLUE)
        sp = subproblem(range(4), {x: dom for x in range(4)},
                        itertools.combinations(range(4), 2))
        assert branch_and_bound(sp) is None

    def test_mediator_changes_own_value_when_neighbors_pinned(self):
        # star around variable 3 plus a 6-7 edge; everyone else is consistent,
        # so the first minimal solution recolors only the center
        variables = (1, 3, 5, 6, 7)
        values = {1: BLACK, 3: BLACK, 5: BLUE, 6: BLACK, 7: BLUE}
        domains = {
            x: (values[x],) + tuple(v for v in (BLACK, RED, BLUE) if v != values[x])
            for x in variables
        }
        sp = subproblem(variables, domains,
                        [(1, 3), (3, 5), (3, 6), (3, 7), (6, 7)])
        got = branch_and_bound(sp)
        assert got.outside_cost == 0
        assert got.assignment[3] == RED
        for x in (1, 5, 6, 7):
            assert got.assignment[x] == values[x]

    def test_outside_cost_counts_labels_and_fixed(self):
        labels = {0: {BLACK: frozenset({40, 41}), RED: frozenset(), BLUE: frozenset()}}
        sp = subproblem(
            (0,), {0: (BLACK, RED, BLUE)}, [], fixed={50: RED},
            fixed_edges=[(0, 50)], labels=labels,
        )
        got = branch_and_bound(sp)
        # Black costs 2 (labels), Red costs 1 (fixed neighbor), Blue costs 0
        assert got.assignment[0] == BLUE and got.outside_cost == 0

    def test_label_and_fixed_name_counted_once(self):
        labels = {0: {BLACK: frozenset({50}), RED: frozenset()}}
        sp = subproblem(
            (0,), {0: (BLACK, RED)}, [], fixed={50: BLACK},
            fixed_edges=[(0, 50)], labels=labels,
        )
        # Black conflicts with 50 via both the label and the fixed value: one name
        got = branch_and_bound(sp)
        assert got.assignment[0] == RED
        sp_forced = subproblem(
            (0,), {0: (BLACK,)}, [], fixed={50: BLACK},
            fixed_edges=[(0, 50)], labels={0: {BLACK: frozenset({50})}},
        )
        assert branch_and_bound(sp_forced).outside_cost == 1

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_exhaustive_oracle(self, seed):
        rng = random.Random(seed)
        for _ in range(250):
            sp = random_subproblem(rng)
            want = bnb_oracle(sp)
            got = branch_and_bound(sp)
            if want is None:
                assert got is None
            else:
                assert got is not None and got.outside_cost == want
                assert all(
                    is_satisfied(c, got.assignment[c.a], got.assignment[c.b])
                    for c in sp.constraints
                )


def random_subproblem(rng, max_vars=6):
    nv = rng.randint(1, max_vars)
    variables = tuple(range(nv))
    k = rng.randint(2, 4)
    domains = {x: tuple(rng.sample(range(k), k)) for x in variables}
    edges = [
        (i, j) for i in range(nv) for j in range(i + 1, nv) if rng.random() < 0.5
    ]
    fixed = {100 + i: rng.randrange(k) for i in range(rng.randint(0, 2))}
    fixed_edges = [
        (x, u) for x in variables for u in fixed if rng.random() < 0.4
    ]
    labels = {
        x: {
            v: frozenset(rng.sample(range(200, 210), rng.randint(0, 3)))
            for v in domains[x]
        }
        for x in variables
    }
    return subproblem(variables, domains, edges, fixed, fixed_edges, labels)


# -- flow -----------------------------------------------------------------------


def matching_oracle(domains, cap=3):
    """Max total assignment via enumeration of every sensor's choice."""
    sensors = sorted({s for ds in domains.values() for s in ds})
    targets = sorted(domains)
    caps = {t: min(len(domains[t]), cap) for t in targets}
    best = 0
    choices = [[None] + [t for t in targets if s in domains[t]] for s in sensors]
    for combo in itertools.product(*choices):
        count = {t: 0 for t in targets}
        for t in combo:
            if t is not None:
                count[t] += 1
        best = max(best, sum(min(count[t], caps[t]) for t in targets))
    return best


class TestFlow:
    def test_empty_network(self):
        net = build_flow_network({})
        assert ford_fulkerson(net) == 0

    def test_single_target_saturates(self):
        net = build_flow_network({0: (1, 2, 3)})
        assert ford_fulkerson(net) == 3
        out = extract_assignment(net)
        assert out == {0: (1, 2, 3)}

    def test_small_domain_capacity(self):
        net = build_flow_network({0: (4, 9)})
        assert net.cap[(target_node(0), SINK)] == 2
        assert ford_fulkerson(net) == 2

    def test_shared_sensor_single_source_edge(self):
        net = build_flow_network({0: (7, 8), 1: (8, 9)})
        assert net.cap[(SOURCE, sensor_node(8))] == 1
        assert net.cap[(sensor_node(8), target_node(0))] == 1
        assert net.cap[(sensor_node(8), target_node(1))] == 1

    def test_competition_unsatisfiable(self):
        # two targets needing 3 each out of 4 shared sensors
        domains = {0: (1, 2, 3, 4), 1: (1, 2, 3, 4)}
        net = build_flow_network(domains)
        assert ford_fulkerson(net) == 4
        assert extract_assignment(net) is None

    def test_extraction_is_disjoint(self):
        domains = {0: (1, 2, 3), 1: (4, 5, 6), 2: (3, 4, 7, 8, 9)}
        net = build_flow_network(domains)
        ford_fulkerson(net)
        out = extract_assignment(net)
        assert out is not None
        seen = set()
        for t, chosen in out.items():
            assert len(chosen) == min(len(domains[t]), 3)
            assert not seen & set(chosen)
            seen |= set(chosen)

    @pytest.mark.parametrize("seed", range(3))
    def test_flow_equals_matching_oracle(self, seed):
        rng = random.Random(seed)
        for _ in range(170):
            domains = random_sensor_domains(rng)
            net = build_flow_network(domains)
            total = ford_fulkerson(net)
            net.check_invariants()
            assert total == matching_oracle(domains)
            out = extract_assignment(net)
            caps = {t: min(len(domains[t]), 3) for t in domains}
            assert (out is not None) == (total == sum(caps.values()))

    def test_value_invariant_to_path_order(self):
        rng = random.Random(99)
        for _ in range(500):
            domains = random_sensor_domains(rng)
            bfs = ford_fulkerson(build_flow_network(domains), path_rule="bfs")
            dfs = ford_fulkerson(build_flow_network(domains), path_rule="dfs")
            assert bfs == dfs

    def test_costed_paths_prefer_cheap_sensors(self):
        # one target, one slot free; sensor 1 is priced, sensor 2 is free
        domains = {0: (1, 2)}
        net = build_flow_network(domains, edge_costs={(1, 0): 5, (2, 0): 0}, cap=1)
        assert ford_fulkerson(net) == 1
        assert extract_assignment(net) == {0: (2,)}


def random_sensor_domains(rng):
    n_targets = rng.randint(1, 4)
    n_sensors = rng.randint(1, 8)
    domains = {}
    for t in range(n_targets):
        size = rng.randint(1, min(5, n_sensors))
        domains[t] = tuple(sorted(rng.sample(range(n_sensors), size)))
    return domains
