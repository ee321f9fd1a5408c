"""Scripted scenarios for the weak-commitment agent and its nogood learning."""
import pytest

from dcspsim.awc import AwcAgent
from dcspsim.csp import Constraint, Kind, Relation
from dcspsim.messages import AwcLink, AwcNogood, AwcOk

BLACK, RED, BLUE = 0, 1, 2
COLORS = (BLACK, RED, BLUE)


def neq(a, b):
    return Constraint(min(a, b), max(a, b), Relation.NOT_EQUALS)


def agent(aid, neighbors, value=BLACK):
    cons = tuple(neq(aid, j) for j in neighbors)
    return AwcAgent(aid, Kind.COLORING, COLORS, cons, value)


def sent(a):
    return a.take_outbox()


def deliver(a, sender, msg):
    a.handle(sender, msg)


def settle(a):
    a.end_cycle()
    return sent(a)


class TestStartup:
    def test_sends_ok_to_neighbors_with_priority_zero(self):
        a = agent(2, [0, 5])
        a.start()
        out = sent(a)
        assert sorted(dst for dst, _ in out) == [0, 5]
        assert all(isinstance(m, AwcOk) and m.p == 0 for _, m in out)

    def test_initial_nogoods_are_exactly_own_constraints(self):
        a = agent(2, [0, 5])
        assert a.learned == []
        assert len(a.constraints) == 2


class TestThreeCases:
    def test_case1_no_higher_violation_is_silent(self):
        a = agent(0, [1], value=BLACK)
        a.start()
        sent(a)
        deliver(a, 1, AwcOk(1, RED, 0))
        assert settle(a) == []
        assert a.value == BLACK

    def test_case1_conflict_with_lower_ignored(self):
        # tie order makes agent 1 higher than agent 0, so 1 leaves the shared
        # conflict to 0
        a = agent(1, [0], value=BLACK)
        a.start()
        sent(a)
        deliver(a, 0, AwcOk(0, BLACK, 0))
        assert settle(a) == []

    def test_case2_repairs_by_changing_value(self):
        a = agent(0, [1], value=BLACK)
        a.start()
        sent(a)
        deliver(a, 1, AwcOk(1, BLACK, 0))
        out = settle(a)
        assert a.value != BLACK
        assert out and all(isinstance(m, AwcOk) for _, m in out)

    def test_case2_minimizes_lower_priority_violations(self):
        # higher neighbor holds Black; two lower neighbors hold Red: Blue is
        # the repair that violates no lower nogood
        a = agent(1, [0, 2, 9], value=BLACK)
        a.start()
        sent(a)
        deliver(a, 9, AwcOk(9, BLACK, 5))
        deliver(a, 0, AwcOk(0, RED, 0))
        deliver(a, 2, AwcOk(2, RED, 0))
        settle(a)
        assert a.value == BLUE

    def test_case3_emits_resolvent_and_raises_priority(self):
        # three higher neighbors block all three colors
        a = agent(0, [1, 2, 3], value=BLACK)
        a.start()
        sent(a)
        deliver(a, 1, AwcOk(1, BLACK, 3))
        deliver(a, 2, AwcOk(2, RED, 4))
        deliver(a, 3, AwcOk(3, BLUE, 5))
        out = settle(a)
        nogoods = [m for _, m in out if isinstance(m, AwcNogood)]
        assert nogoods
        assert set(nogoods[0].pairs) == {(1, BLACK), (2, RED), (3, BLUE)}
        assert {dst for dst, m in out if isinstance(m, AwcNogood)} == {1, 2, 3}
        assert a.priority == 6  # above the highest in view

    def test_duplicate_resolvent_is_silent(self):
        a = agent(0, [1, 2, 3], value=BLACK)
        a.start()
        sent(a)
        for j, v, p in ((1, BLACK, 3), (2, RED, 4), (3, BLUE, 5)):
            deliver(a, j, AwcOk(j, v, p))
        settle(a)
        p_after = a.priority
        # the same blocked situation recurs with even higher priorities
        for j, v, p in ((1, BLACK, 7), (2, RED, 8), (3, BLUE, 9)):
            deliver(a, j, AwcOk(j, v, p))
        out = settle(a)
        assert not any(isinstance(m, AwcNogood) for _, m in out)
        assert a.priority == p_after


class TestResolvent:
    def test_distinct_binary_nogoods_union(self):
        # state built directly so the blocked snapshot is inspectable before
        # the agent reacts to it
        a = agent(0, [1, 2, 3], value=BLACK)
        a.start()
        sent(a)
        a._update_view(1, BLACK, 3)
        a._update_view(2, RED, 4)
        a._update_view(3, BLUE, 5)
        assert a.resolvent() == frozenset({(1, BLACK), (2, RED), (3, BLUE)})

    def test_single_nogood_covering_all_values(self):
        # one learned nogood per value, all pointing at the same neighbor
        a = agent(0, [9], value=BLACK)
        a.start()
        sent(a)
        a._update_view(9, BLACK, 5)
        for v in (RED, BLUE):
            a.handle_nogood(frozenset(((0, v), (9, BLACK))))
        assert a.resolvent() == frozenset({(9, BLACK)})

    def test_precondition_violation_raises(self):
        a = agent(0, [1], value=BLACK)
        a.start()
        sent(a)
        deliver(a, 1, AwcOk(1, RED, 5))
        with pytest.raises(ValueError):
            a.resolvent()

    def test_self_only_nogoods_resolve_to_empty(self):
        a = agent(0, [], value=BLACK)
        a.start()
        for v in COLORS:
            deliver(a, 9, AwcNogood(9, ((0, v),)))
        settle(a)
        assert a.declared_unsat


class TestHandleNogood:
    def test_unknown_member_triggers_link(self):
        a = agent(0, [1], value=BLACK)
        a.start()
        sent(a)
        deliver(a, 1, AwcNogood(1, ((0, BLACK), (7, RED))))
        out = sent(a) + settle(a)
        links = [(dst, m) for dst, m in out if isinstance(m, AwcLink)]
        assert [dst for dst, _ in links] == [7]
        assert links[0][1].d == a.value

    def test_duplicate_nogood_no_state_change(self):
        a = agent(0, [1], value=BLACK)
        a.start()
        sent(a)
        ng = AwcNogood(1, ((0, BLACK), (7, RED)))
        deliver(a, 1, ng)
        settle(a)
        n_before = len(a.learned)
        deliver(a, 1, ng)
        settle(a)
        assert len(a.learned) == n_before

    def test_cascading_resolvent_on_arrival(self):
        # the arriving nogood blocks the last free value
        a = agent(0, [1, 2], value=BLACK)
        a.start()
        sent(a)
        deliver(a, 1, AwcOk(1, BLACK, 4))
        deliver(a, 2, AwcOk(2, RED, 5))
        settle(a)  # repaired to Blue
        assert a.value == BLUE
        deliver(a, 1, AwcNogood(1, ((0, BLUE), (1, BLACK))))
        out = settle(a)
        assert any(isinstance(m, AwcNogood) for _, m in out) or a.declared_unsat

    def test_link_request_answered_with_targeted_ok(self):
        a = agent(0, [1], value=RED)
        a.start()
        sent(a)
        deliver(a, 6, AwcLink(6, BLUE, 2))
        out = sent(a)
        assert out == [(6, AwcOk(0, RED, 0))]
        assert 6 in a.links
        assert a.view[6] == (BLUE, 2)


class TestPriorities:
    def test_raise_is_strictly_increasing_even_with_stale_view(self):
        a = agent(0, [1, 2, 3], value=BLACK)
        a.start()
        sent(a)
        deliver(a, 1, AwcOk(1, BLACK, 3))
        deliver(a, 2, AwcOk(2, RED, 4))
        deliver(a, 3, AwcOk(3, BLUE, 5))
        settle(a)
        first = a.priority
        assert first == 6
        # force another novel resolvent without the view priorities moving
        deliver(a, 1, AwcNogood(1, ((0, BLACK), (1, BLACK), (2, RED))))
        deliver(a, 1, AwcOk(1, BLACK, 7))
        deliver(a, 2, AwcOk(2, RED, 8))
        deliver(a, 3, AwcOk(3, BLUE, 9))
        out = settle(a)
        if any(isinstance(m, AwcNogood) for _, m in out):
            assert a.priority > first

    def test_nogood_priority_is_min_over_other_members(self):
        # the nogood {(0,*),(1,Black),(2,Red)} has priority min(p1, p2); it is
        # higher for agent 0 only while both others outrank it
        a = agent(0, [1, 2], value=BLACK)
        a.start()
        sent(a)
        deliver(a, 1, AwcOk(1, BLACK, 2))
        deliver(a, 2, AwcOk(2, RED, 9))
        deliver(a, 1, AwcNogood(1, ((0, BLACK), (1, BLACK), (2, RED))))
        settle(a)
        moved_once = a.value
        assert moved_once != BLACK  # the learned nogood bit (min=(2,1) > (0,0))
        # after our own priority climbs past min(p1,p2), the same nogood
        # stops being higher priority
        a.priority = 99
        deliver(a, 1, AwcOk(1, BLACK, 2))
        before = a.value
        settle(a)
        assert a.value == before
