"""The APO protocol state machine: linking, local resolution, mediation.

Each agent owns one variable and knows only its own constraints plus
whatever other agents have told it.  It keeps an ``agent_view`` (everything
known about linked agents) and a ``good_list`` (the subset known to be
connected to it in the constraint graph); its priority is the good_list
size, ties broken by the larger agent id (zero-padded decimal names order
the same way as the ids themselves).

Handlers run ``check_agent_view`` inline as messages are processed, and
the simulator runs it once more after the inbox has drained, so stale
mediation flags correct themselves even without an inbound message.  All
decisions are deterministic functions of the inbox order and prior state.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .csp import Constraint, Kind, Relation, SENSOR_CAP, Value, is_satisfied, violated_neighbors
from .messages import (
    Accept,
    EvaluateReq,
    EvaluateResp,
    Init,
    Labels,
    Message,
    NoSolution,
    Ok,
    Wait,
)
from .solvers import SubProblem, branch_and_bound, build_flow_network, extract_assignment, ford_fulkerson


class InvariantViolation(AssertionError):
    """A runtime protocol invariant failed (simulation exits with status 2)."""


@dataclass(slots=True)
class ViewEntry:
    priority: int
    value: Value | None = None
    wants_mediate: bool = False
    elements: tuple[int, ...] | None = None
    constraints: tuple[Constraint, ...] | None = None
    has_init: bool = False


@dataclass
class Session:
    members: frozenset[int]
    counter: int
    preferences: dict[int, dict[int, frozenset[int]]] = field(default_factory=dict)


class ApoAgent:
    def __init__(
        self,
        aid: int,
        kind: Kind,
        elements: tuple[int, ...],
        constraints: tuple[Constraint, ...],
        value: Value,
        strict: bool = True,
    ):
        self.aid = aid
        self.kind = kind
        self.elements = elements
        self.constraints = constraints
        self.value = value
        self.strict = strict

        self.neighbors: tuple[int, ...] = tuple(sorted(c.other(aid) for c in constraints))
        self.priority = len(self.neighbors) + 1
        self.wants_mediate = True
        self.mediate_lock = False
        self.good_list: set[int] = {aid}
        self.init_list: set[int] = set()
        self.view: dict[int, ViewEntry] = {}
        self.known_edges: set[tuple[int, int]] = {
            (min(c.a, c.b), max(c.a, c.b)) for c in constraints
        }
        self.session: Session | None = None

        self.declared_unsat = False
        self.sessions_started = 0
        self.stale_accepts = 0
        self.work = 0
        self.outbox: list[tuple[int, Message]] = []
        self._flag_raised_now = False
        self._mediated_this_cycle = False

    # -- plumbing ------------------------------------------------------------

    def _send(self, dst: int, msg: Message) -> None:
        self.outbox.append((dst, msg))

    def take_outbox(self) -> list[tuple[int, Message]]:
        out = self.outbox
        self.outbox = []
        return out

    def _order(self, aid: int, priority: int) -> tuple[int, int]:
        return (priority, aid)

    def _my_order(self) -> tuple[int, int]:
        return (self.priority, self.aid)

    def _view_values(self) -> dict[int, Value]:
        return {j: e.value for j, e in self.view.items() if e.value is not None}

    def value_domain(self) -> tuple[Value, ...]:
        return _value_domain(self.kind, self.elements)

    def _set_priority(self, p: int) -> None:
        if p < self.priority:
            if self.strict:
                raise InvariantViolation(
                    f"agent {self.aid}: priority would drop {self.priority}->{p}"
                )
            return
        self.priority = p

    def _grow_good_list(self, joined: int) -> None:
        """Add ``joined`` and transitively connectable view members, then
        refresh the priority.  Only full (init-received) entries qualify."""
        self.good_list.add(joined)
        changed = True
        while changed:
            changed = False
            for l, entry in self.view.items():
                if l in self.good_list or not entry.has_init:
                    continue
                if self._adjacent_to_good_list(l):
                    self.good_list.add(l)
                    changed = True
        # initialize() anticipates the neighbors joining (p = deg+1), so the
        # size only takes over once it catches up; priorities never decrease
        self._set_priority(max(self.priority, len(self.good_list)))
        if self.strict:
            self._check_good_list()

    def _adjacent_to_good_list(self, x: int) -> bool:
        for g in self.good_list:
            key = (min(x, g), max(x, g))
            if key in self.known_edges:
                return True
        return False

    def _check_good_list(self) -> None:
        if self.aid not in self.good_list:
            raise InvariantViolation(f"agent {self.aid} missing from own good_list")
        if not self.good_list <= (set(self.view) | {self.aid}):
            raise InvariantViolation(f"agent {self.aid}: good_list outside agent_view")
        # connectivity of the induced subgraph over known edges
        todo = {self.aid}
        seen: set[int] = set()
        while todo:
            u = todo.pop()
            seen.add(u)
            for v in self.good_list:
                if v not in seen and (min(u, v), max(u, v)) in self.known_edges:
                    todo.add(v)
        if seen != self.good_list:
            raise InvariantViolation(f"agent {self.aid}: good_list not connected")

    # -- startup ---------------------------------------------------------------

    def start(self) -> None:
        """Pick up the assigned value, announce to neighbors, await replies."""
        self.init_list = set(self.neighbors)
        for j in self.neighbors:
            self._send(j, self._init_msg())

    def _init_msg(self) -> Init:
        return Init(self.aid, self.priority, self.value, self.wants_mediate,
                    self.elements, self.constraints)

    # -- message handlers --------------------------------------------------------

    def handle(self, sender: int, msg: Message) -> None:
        match msg:
            case Init():
                self.handle_init(msg)
            case Ok():
                self.handle_ok(msg)
            case EvaluateReq():
                self.handle_evaluate_request(msg)
            case Wait():
                self.handle_wait(msg)
            case EvaluateResp():
                self.handle_evaluate_resp(msg)
            case Accept():
                self.handle_accept(msg)
            case NoSolution():
                pass  # the simulator halts the trial on the broadcast itself
            case _:
                raise TypeError(f"APO agent got {msg!r}")

    def handle_init(self, msg: Init) -> None:
        entry = self.view.get(msg.x)
        if entry is None:
            entry = self.view[msg.x] = ViewEntry(priority=msg.p)
        entry.priority = max(entry.priority, msg.p)
        entry.value = msg.d
        entry.wants_mediate = msg.m
        entry.elements = msg.elements
        entry.constraints = msg.constraints
        entry.has_init = True
        for c in msg.constraints:
            self.known_edges.add((min(c.a, c.b), max(c.a, c.b)))
        if msg.x not in self.good_list and self._adjacent_to_good_list(msg.x):
            self._grow_good_list(msg.x)
        if msg.x in self.init_list:
            self.init_list.discard(msg.x)
        else:
            self._send(msg.x, self._init_msg())
        self.check_agent_view()

    def handle_ok(self, msg: Ok) -> None:
        entry = self.view.get(msg.x)
        if entry is None:
            # value-only entry; domain/constraints stay unknown until an init
            entry = self.view[msg.x] = ViewEntry(priority=msg.p)
        entry.priority = max(entry.priority, msg.p)
        entry.value = msg.d
        entry.wants_mediate = msg.m
        self.check_agent_view()

    def handle_evaluate_request(self, msg: EvaluateReq) -> None:
        entry = self.view.get(msg.x)
        if entry is None:
            entry = self.view[msg.x] = ViewEntry(priority=msg.p)
        entry.priority = max(entry.priority, msg.p)
        entry.wants_mediate = True
        if self.mediate_lock or self._expecting_higher_than(msg.p, msg.x):
            self._send(msg.x, Wait(self.aid, self.priority))
        else:
            self.mediate_lock = True
            self._send(msg.x, EvaluateResp(self.aid, self.priority, self._label_domain()))

    def _expecting_higher_than(self, p: int, x: int) -> bool:
        """A mediator of higher effective priority than (p, x) wants to
        mediate -- possibly this agent itself."""
        ref = self._order(x, p)
        if self.wants_mediate and self._my_order() > ref:
            return True
        return any(
            e.wants_mediate and self._order(j, e.priority) > ref
            for j, e in self.view.items()
        )

    def _label_domain(self) -> Labels:
        """Label each atomic domain element with the agents that would be
        violated by adopting it (sensor kind: by using that sensor)."""
        values = self._view_values()
        labels = []
        for e in self.elements:
            if self.kind is Kind.COLORING:
                bad = violated_neighbors(self.constraints, self.aid, e, values)
            else:
                bad = {
                    c.other(self.aid)
                    for c in self.constraints
                    if (v := values.get(c.other(self.aid))) is not None and e in v
                }
            self.work += len(self.constraints)
            labels.append((e, tuple(sorted(bad))))
        return tuple(labels)

    def handle_wait(self, msg: Wait) -> None:
        entry = self.view.get(msg.x)
        if entry is not None:
            entry.priority = max(entry.priority, msg.p)
        if self.session is not None and msg.x in self.session.members:
            self.session.counter -= 1
            if self.session.counter == 0:
                self.choose_solution()

    def handle_evaluate_resp(self, msg: EvaluateResp) -> None:
        entry = self.view.get(msg.x)
        if entry is not None:
            entry.priority = max(entry.priority, msg.p)
        if self.session is not None and msg.x in self.session.members:
            self.session.preferences[msg.x] = {e: frozenset(ns) for e, ns in msg.labels}
            self.session.counter -= 1
            if self.session.counter == 0:
                self.choose_solution()

    def handle_accept(self, msg: Accept) -> None:
        if not self.mediate_lock:
            # tolerated protocol slip: a session concluded after our lock was
            # released by a competing mediator; adopt and count it
            self.stale_accepts += 1
        self.value = msg.d
        self.mediate_lock = False
        self._broadcast_ok()
        entry = self.view.get(msg.x)
        if entry is None:
            entry = self.view[msg.x] = ViewEntry(priority=msg.p)
        entry.priority = max(entry.priority, msg.p)
        entry.value = msg.dx
        entry.wants_mediate = msg.m
        self.check_agent_view()

    def _broadcast_ok(self) -> None:
        msg = Ok(self.aid, self.priority, self.value, self.wants_mediate)
        for j in sorted(self.view):
            self._send(j, msg)

    # -- local resolution ---------------------------------------------------------

    def current_conflicts(self) -> set[int]:
        values = self._view_values()
        self.work += len(self.constraints)
        return violated_neighbors(self.constraints, self.aid, self.value, values)

    def check_agent_view(self) -> None:
        """Local repair / mediation decision (runs per message and once per
        cycle after the inbox has drained).

        Acting is gated on the flag having been announced on a previous
        check: a conflicted agent first broadcasts its raised flag, then
        repairs or mediates the next time around.  This is the two-phase
        commit that keeps the protocol livelock-free: the announcement
        reaches every linked agent before any session starts, so when equal
        contenders discover a conflict simultaneously, the priority order
        arbitrates instead of both mediating forever in lockstep.  Startup
        flags arrive already announced (init carries m=true), so the
        first-round mediations are not delayed.
        """
        if self.init_list or self.mediate_lock:
            return
        conflicts = self.current_conflicts()
        wants_now = bool(conflicts)
        if wants_now and not self._someone_higher_wants() \
                and self._outranks_all(conflicts):
            if not self.wants_mediate:
                self.wants_mediate = True
                self._flag_raised_now = True
                self._broadcast_ok()
                return
            if self._flag_raised_now:
                return  # announcement still in flight until the next cycle
            repair = self._find_repair(conflicts)
            if repair is not None:
                self.value = repair
                self._broadcast_ok()
            elif not self._mediated_this_cycle:
                # at most one session per cycle; a just-concluded session's
                # trailing check must not spin up the next one instantly
                self.start_mediation()
        elif wants_now != self.wants_mediate:
            self.wants_mediate = wants_now
            self._broadcast_ok()

    def _someone_higher_wants(self) -> bool:
        me = self._my_order()
        return any(
            e.wants_mediate and self._order(j, e.priority) > me
            for j, e in self.view.items()
        )

    def _outranks_all(self, conflicts: set[int]) -> bool:
        """True when every current conflict partner has lower effective
        priority.  A conflict with a higher-priority neighbor is that
        neighbor's to resolve; acting on it here would race the very agent
        the priority order says should decide."""
        me = self._my_order()
        return all(self._order(j, self.view[j].priority) < me for j in conflicts)

    def _find_repair(self, conflicts: set[int]) -> Value | None:
        """First conflict-free value, tried in domain order."""
        values = self._view_values()
        for v in self.value_domain():
            if v == self.value:
                continue
            self.work += len(self.constraints)
            if not violated_neighbors(self.constraints, self.aid, v, values):
                return v
        return None

    # -- mediation ------------------------------------------------------------------

    def start_mediation(self) -> None:
        self.sessions_started += 1
        self._mediated_this_cycle = True
        members = frozenset(self.good_list)
        self.session = Session(members=members, counter=len(members))
        self.mediate_lock = True
        for j in sorted(members):
            if j != self.aid:
                self._send(j, EvaluateReq(self.aid, self.priority))
        # the mediator answers its own request internally, without wire
        # traffic; like any evaluate? receipt this keeps its own flag raised
        self.wants_mediate = True
        self.session.preferences[self.aid] = {
            e: frozenset(ns) for e, ns in self._label_domain()
        }
        self.session.counter -= 1
        if self.session.counter == 0:
            self.choose_solution()

    def _session_subproblem(self) -> SubProblem:
        session = self.session
        assert session is not None
        in_vars = tuple(sorted(session.preferences))
        in_set = frozenset(in_vars)
        domains: dict[int, tuple[Value, ...]] = {}
        for x in in_vars:
            if x == self.aid:
                elems, current = self.elements, self.value
            else:
                entry = self.view[x]
                elems, current = entry.elements, entry.value
            domains[x] = _ordered_domain(self.kind, elems, current)
        cons = tuple(
            Constraint(a, b, _relation(self.kind))
            for a, b in sorted(self.known_edges)
            if a in in_set and b in in_set
        )
        fixed = {
            j: e.value for j, e in self.view.items()
            if j not in in_set and e.value is not None
        }
        fixed_cons = tuple(
            Constraint(a, b, _relation(self.kind))
            for a, b in sorted(self.known_edges)
            if (a in in_set) != (b in in_set) and (a in fixed or b in fixed)
        )
        labels = {
            x: _value_labels(self.kind, session.preferences[x], domains[x])
            for x in in_vars
        }
        return SubProblem(in_vars, domains, cons, fixed, fixed_cons, labels)

    def choose_solution(self) -> None:
        session = self.session
        assert session is not None
        sp = self._session_subproblem()
        if self.kind is Kind.COLORING:
            res = branch_and_bound(sp)
            self.work += (res.nodes + res.checks) if res else len(sp.variables)
            solution = res.assignment if res else None
        else:
            solution = self._solve_flow(sp, session)
        if solution is None:
            self.declared_unsat = True
            self.session = None
            self.mediate_lock = False
            for j in sorted(self.view):
                self._send(j, NoSolution(self.aid))
            return
        if self.strict:
            self._assert_session_satisfied(sp, solution)
        self.value = solution[self.aid]
        in_session = frozenset(solution)
        chosen_labels = {
            x: _value_labels(self.kind, session.preferences[x],
                             (solution[x],)).get(solution[x], frozenset()) - in_session
            for x in solution
        }
        for j in sorted(self.view):
            if j in session.preferences:
                for harmed in sorted(chosen_labels[j]):
                    if harmed not in self.view and harmed not in self.init_list:
                        self._send(harmed, self._init_msg())
                        self.init_list.add(harmed)
                self._send(j, Accept(solution[j], self.aid, self.priority,
                                     self.value, self.wants_mediate))
                self.view[j].value = solution[j]
            else:
                self._send(j, Ok(self.aid, self.priority, self.value, self.wants_mediate))
        # own chosen value may also harm out-of-view agents
        for harmed in sorted(chosen_labels[self.aid]):
            if harmed not in self.view and harmed not in self.init_list:
                self._send(harmed, self._init_msg())
                self.init_list.add(harmed)
        self.session = None
        self.mediate_lock = False
        self.check_agent_view()

    def _solve_flow(self, sp: SubProblem, session: Session) -> dict[int, Value] | None:
        costs: dict[tuple[int, int], int] = {}
        for x in sp.variables:
            prefs = session.preferences[x]
            for s in (self.elements if x == self.aid else self.view[x].elements):
                outside = set(prefs.get(s, frozenset()))
                for c in sp.fixed_constraints:
                    if c.involves(x):
                        u = c.other(x)
                        uv = sp.fixed.get(u)
                        if uv is not None and s in uv:
                            outside.add(u)
                costs[(s, x)] = len(outside - set(sp.variables))
        domains = {
            x: (self.elements if x == self.aid else self.view[x].elements)
            for x in sp.variables
        }
        net = build_flow_network(domains, costs, cap=SENSOR_CAP)
        flow = ford_fulkerson(net)
        self.work += flow + len(net.cap)
        return extract_assignment(net)

    def _assert_session_satisfied(self, sp: SubProblem, solution: dict[int, Value]) -> None:
        for c in sp.constraints:
            if not is_satisfied(c, solution[c.a], solution[c.b]):
                raise InvariantViolation(
                    f"mediator {self.aid}: chosen solution violates in-session {c}"
                )

    # -- simulator hooks --------------------------------------------------------------

    def end_cycle(self) -> None:
        self.check_agent_view()
        self._flag_raised_now = False
        self._mediated_this_cycle = False

    def idle(self) -> bool:
        return not self.init_list and not self.mediate_lock and self.session is None


def _relation(kind: Kind) -> Relation:
    return Relation.NOT_EQUALS if kind is Kind.COLORING else Relation.NOT_INTERSECTS


def _value_domain(kind: Kind, elements: tuple[int, ...]) -> tuple[Value, ...]:
    if kind is Kind.COLORING:
        return elements
    c = min(len(elements), SENSOR_CAP)
    return tuple(itertools.combinations(elements, c))


def _ordered_domain(kind: Kind, elements: tuple[int, ...], current: Value) -> tuple[Value, ...]:
    """Value domain reordered so the current value leads (lock-and-key)."""
    dom = _value_domain(kind, elements)
    if current in dom:
        return (current,) + tuple(v for v in dom if v != current)
    return dom


def _value_labels(
    kind: Kind,
    element_labels: dict[int, frozenset[int]],
    values: tuple[Value, ...],
) -> dict[Value, frozenset[int]]:
    """Per-value outside-conflict names derived from per-element labels."""
    if kind is Kind.COLORING:
        return {v: element_labels.get(v, frozenset()) for v in values}
    out: dict[Value, frozenset[int]] = {}
    for v in values:
        names: set[int] = set()
        for s in v:  # type: ignore[union-attr]
            names |= element_labels.get(s, frozenset())
        out[v] = frozenset(names)
    return out
