"""Instance families: edge counts, satisfiability witnesses, determinism."""
import math

import pytest

from dcspsim.csp import Kind, brute_force
from dcspsim.generators import (
    Family,
    GeneratorConfig,
    SensorFieldConfig,
    gen_minton,
    gen_random,
    gen_sensor_field,
    sensor_positions,
)
from dcspsim.solvers import build_flow_network, extract_assignment, ford_fulkerson


class TestMinton:
    def test_group_partition_is_witness_coloring(self):
        # contiguous groups of n/k; every edge must cross groups
        n, m, k = 15, 30, 3
        inst = gen_minton(n, m, k, seed=7)
        assert inst.n == n and len(inst.constraints) == m
        size = n // k
        for c in inst.constraints:
            assert c.a // size != c.b // size

    def test_small_instance_brute_force_satisfiable(self):
        inst = gen_minton(9, 18, 3, seed=3)
        assert brute_force(inst) is not None

    def test_edgeless(self):
        inst = gen_minton(3, 0, 3, seed=0)
        assert len(inst.constraints) == 0

    def test_determinism(self):
        a = gen_minton(15, 30, 3, seed=42)
        b = gen_minton(15, 30, 3, seed=42)
        assert a.to_text() == b.to_text()
        assert a.to_text() != gen_minton(15, 30, 3, seed=43).to_text()

    def test_indivisible_n_rejected(self):
        with pytest.raises(ValueError):
            gen_minton(10, 5, 3, seed=0)

    def test_infeasible_edge_count_rejected(self):
        # 3 groups of 1: only 3 cross pairs exist
        with pytest.raises(ValueError):
            gen_minton(3, 4, 3, seed=0)


class TestRandom:
    def test_edge_count_is_density_times_n(self):
        inst = gen_random(60, 2.3, seed=5)
        assert len(inst.constraints) == 138
        assert inst.n == 60

    def test_two_nodes_single_edge(self):
        inst = gen_random(2, 0.5, seed=1)
        assert [(c.a, c.b) for c in inst.constraints] == [(0, 1)]

    def test_no_duplicates_or_self_loops(self):
        inst = gen_random(30, 2.7, seed=9)
        seen = set()
        for c in inst.constraints:
            assert c.a != c.b
            key = (c.a, c.b)
            assert key not in seen
            seen.add(key)

    def test_determinism(self):
        assert gen_random(20, 2.0, seed=4).to_text() == gen_random(20, 2.0, seed=4).to_text()

    def test_infeasible_density_rejected(self):
        with pytest.raises(ValueError):
            gen_random(4, 3.0, seed=0)

    def test_satisfiability_declines_through_the_density_sweep(self):
        # the transition shifts left at small n, so assert the shape: from
        # mostly satisfiable through a crossing down to fully unsatisfiable
        def sat_fraction(d, trials=40):
            hits = 0
            for s in range(trials):
                if brute_force(gen_random(10, d, seed=int(1000 * d) + s)) is not None:
                    hits += 1
            return hits / trials

        low, mid, high = sat_fraction(1.5), sat_fraction(2.0), sat_fraction(2.9)
        assert low > 0.6
        assert high < 0.1
        assert low > mid > high


class TestSensorField:
    def test_grid_positions_have_half_spacing_margins(self):
        cfg = SensorFieldConfig(targets=1, rows=14, cols=16)
        spots = sensor_positions(cfg)
        assert len(spots) == 224
        xs = sorted({p[0] for p in spots})
        ys = sorted({p[1] for p in spots})
        assert math.isclose(xs[0], 200 / 16 / 2)
        assert math.isclose(ys[0], 200 / 14 / 2)
        assert math.isclose(xs[-1], 200 - 200 / 16 / 2)

    def test_standard_field_shape(self):
        cfg = SensorFieldConfig(targets=30)
        inst = gen_sensor_field(cfg, seed=11)
        assert inst.kind is Kind.SENSOR
        assert inst.n == 30
        for x in inst.variables:
            assert len(inst.elements(x)) >= 1
            assert all(len(v) == min(len(inst.elements(x)), 3) for v in inst.domain(x))

    def test_constraints_exactly_where_visibility_overlaps(self):
        inst = gen_sensor_field(SensorFieldConfig(targets=12), seed=3)
        expect = {
            (i, j)
            for i in range(12) for j in range(i + 1, 12)
            if set(inst.elements(i)) & set(inst.elements(j))
        }
        assert {(c.a, c.b) for c in inst.constraints} == expect

    def test_determinism(self):
        cfg = SensorFieldConfig(targets=22)
        assert gen_sensor_field(cfg, seed=8).to_text() == gen_sensor_field(cfg, seed=8).to_text()

    def test_unreachable_field_rejected(self):
        cfg = SensorFieldConfig(targets=1, sense_range=0.01, max_retries=5)
        with pytest.raises(ValueError):
            gen_sensor_field(cfg, seed=0)

    def test_saturation_degrades_with_target_count(self):
        # feasibility measured centrally via the flow reduction
        def feasible_fraction(targets, trials=12):
            hits = 0
            for s in range(trials):
                inst = gen_sensor_field(SensorFieldConfig(targets=targets), seed=900 + s)
                domains = {x: inst.elements(x) for x in inst.variables}
                net = build_flow_network(domains)
                ford_fulkerson(net)
                hits += extract_assignment(net) is not None
            return hits / trials

        assert feasible_fraction(22) > feasible_fraction(59) + 0.3


class TestGeneratorConfig:
    def test_builds_each_family(self):
        m = GeneratorConfig(Family.MINTON, n=9, density=2.0, k=3).build(1)
        r = GeneratorConfig(Family.RANDOM, n=9, density=2.0, k=3).build(1)
        s = GeneratorConfig(Family.SENSOR, sensor=SensorFieldConfig(targets=5)).build(1)
        assert len(m.constraints) == 18
        assert len(r.constraints) == 18
        assert s.n == 5
