"""Deterministic cycle-based simulator.

Each cycle delivers every message queued in the previous cycle, lets each
agent drain its inbox and act (in agent-id order), and collects newly sent
messages for delivery at the start of the next cycle.  Per (sender,
receiver) pair, delivery order equals send order.  A trial ends when the
system is quiescent with zero conflicts (Solved), when an agent announces
an unsatisfiable subsystem (Unsatisfiable), or at the cycle limit.

Everything an agent does is a pure function of its inbox and state, so a
trial is a pure function of (instance, protocol, initial values, cycle
limit, seed) and replays are byte-identical.
"""
from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from enum import Enum

from .apo import ApoAgent, InvariantViolation, _value_domain
from .awc import AwcAgent
from .csp import CspInstance, Value
from .messages import Message, message_size, message_tag


class Verdict(Enum):
    RUNNING = "running"
    SOLVED = "solved"
    UNSATISFIABLE = "unsatisfiable"
    CYCLE_LIMIT = "cycle_limit"


@dataclass
class TrialResult:
    protocol: str
    verdict: Verdict
    cycles: int
    messages_total: int
    message_counts: dict[str, int]
    bytes_total: int
    work_total: int
    sessions: int
    links_used: int
    max_view: int
    n: int
    assignment: dict[int, Value] | None
    stale_accepts: int = 0
    wall_time: float = field(default=0.0, compare=False, repr=False)

    def canonical(self) -> str:
        """Stable one-line rendering; excludes wall-clock time so replays
        compare byte-identical."""
        counts = ",".join(f"{k}={v}" for k, v in sorted(self.message_counts.items()))
        assign = ""
        if self.assignment is not None:
            assign = ";".join(f"{x}:{self.assignment[x]}" for x in sorted(self.assignment))
        return (
            f"{self.protocol} {self.verdict.value} cycles={self.cycles} "
            f"msgs={self.messages_total} bytes={self.bytes_total} "
            f"work={self.work_total} sessions={self.sessions} "
            f"links={self.links_used} max_view={self.max_view} n={self.n} "
            f"counts[{counts}] assign[{assign}]"
        )


class Simulation:
    def __init__(
        self,
        instance: CspInstance,
        protocol: str,
        initial_values: dict[int, Value],
        cycle_limit: int = 1000,
        assert_invariants: bool = True,
        trace: list[str] | None = None,
    ):
        if protocol not in ("apo", "awc"):
            raise ValueError(f"unknown protocol {protocol!r}")
        self.instance = instance
        self.protocol = protocol
        self.cycle_limit = cycle_limit
        self.assert_invariants = assert_invariants
        self.trace = trace
        self.cycle = 0
        self.verdict = Verdict.RUNNING
        self.pending: list[tuple[int, int, Message]] = []
        self.messages_total = 0
        self.message_counts: dict[str, int] = {}
        self.bytes_total = 0
        self.work_total = 0
        self.wall_time = 0.0

        kind = instance.kind
        self.agents: list[ApoAgent | AwcAgent] = []
        for x in instance.variables:
            v = initial_values[x]
            if v not in instance.domain(x):
                raise ValueError(f"initial value {v!r} not in domain of {x}")
            if protocol == "apo":
                agent: ApoAgent | AwcAgent = ApoAgent(
                    x, kind, instance.elements(x), instance.constraints_of(x), v,
                    strict=assert_invariants,
                )
            else:
                agent = AwcAgent(
                    x, kind, instance.domain(x), instance.constraints_of(x), v,
                    strict=assert_invariants,
                )
            self.agents.append(agent)

    # -- bookkeeping -----------------------------------------------------------

    def _collect(self, agent) -> None:
        for dst, msg in agent.take_outbox():
            self.messages_total += 1
            tag = message_tag(msg)
            self.message_counts[tag] = self.message_counts.get(tag, 0) + 1
            self.bytes_total += message_size(msg)
            if self.trace is not None:
                self.trace.append(
                    f"{self.cycle} {agent.aid} {dst} {tag} {message_size(msg)}"
                )
            self.pending.append((agent.aid, dst, msg))

    def values(self) -> dict[int, Value]:
        return {a.aid: a.value for a in self.agents}

    def conflict_free(self) -> bool:
        return self.instance.verify_solution(self.values())

    def detect_quiescence(self) -> bool:
        """No messages in flight, no agent mid-mediation, zero conflicts."""
        if self.pending:
            return False
        if not all(a.idle() for a in self.agents):
            return False
        return self.conflict_free()

    # -- stepping ---------------------------------------------------------------

    def step_cycle(self) -> None:
        inboxes: dict[int, list[tuple[int, Message]]] = {}
        for sender, dst, msg in self.pending:
            inboxes.setdefault(dst, []).append((sender, msg))
        self.pending = []
        self.cycle += 1
        for agent in self.agents:
            t0 = time.perf_counter()
            for sender, msg in inboxes.get(agent.aid, ()):
                agent.handle(sender, msg)
            agent.end_cycle()
            self.wall_time += time.perf_counter() - t0
            self.work_total += agent.work
            agent.work = 0
            self._collect(agent)
            if agent.declared_unsat:
                self.verdict = Verdict.UNSATISFIABLE
                return

    def run(self) -> TrialResult:
        for agent in self.agents:
            t0 = time.perf_counter()
            agent.start()
            self.wall_time += time.perf_counter() - t0
            self._collect(agent)
        quiet_cycles = 0
        while self.verdict is Verdict.RUNNING:
            if self.detect_quiescence():
                self.verdict = Verdict.SOLVED
                if self.assert_invariants:
                    self._check_quiescence_lemmas()
                break
            if self.cycle >= self.cycle_limit:
                self.verdict = Verdict.CYCLE_LIMIT
                break
            before = self.messages_total
            self.step_cycle()
            quiet = not self.pending and self.messages_total == before
            quiet_cycles = quiet_cycles + 1 if quiet else 0
            # two message-free cycles mean a true fixed point: agents are
            # event-driven apart from the one-cycle flag-release hold, so
            # after riding that out the state can never change again
            if self.verdict is Verdict.RUNNING and quiet_cycles >= 2 \
                    and not self.conflict_free():
                if self.protocol == "apo":
                    if self.assert_invariants:
                        raise InvariantViolation(
                            "stable state reached with conflicts remaining"
                        )
                self.verdict = Verdict.CYCLE_LIMIT
                self.cycle = self.cycle_limit
                break
        assignment = None
        if self.verdict is Verdict.SOLVED:
            assignment = self.values()
            if not self.instance.verify_solution(assignment):
                raise InvariantViolation("solved verdict fails verification")
        links = sum(len(a.view) for a in self.agents)
        max_view = max((len(a.view) + 1 for a in self.agents), default=1)
        sessions = sum(getattr(a, "sessions_started", 0) for a in self.agents)
        stale = sum(getattr(a, "stale_accepts", 0) for a in self.agents)
        return TrialResult(
            protocol=self.protocol,
            verdict=self.verdict,
            cycles=self.cycle,
            messages_total=self.messages_total,
            message_counts=dict(sorted(self.message_counts.items())),
            bytes_total=self.bytes_total,
            work_total=self.work_total,
            sessions=sessions,
            links_used=links,
            max_view=max_view,
            n=self.instance.n,
            assignment=assignment,
            stale_accepts=stale,
            wall_time=self.wall_time,
        )

    def _check_quiescence_lemmas(self) -> None:
        """Link bidirectionality and view freshness, checked omnisciently at
        quiescence (mid-flight staleness is expected and allowed)."""
        if self.protocol != "apo":
            return
        by_id = {a.aid: a for a in self.agents}
        for a in self.agents:
            for j, entry in a.view.items():
                other = by_id[j]
                if a.aid not in other.view:
                    raise InvariantViolation(
                        f"link {a.aid}->{j} not bidirectional at quiescence"
                    )
                if entry.value is not None and entry.value != other.value:
                    raise InvariantViolation(
                        f"stale view: {a.aid} thinks {j}={entry.value!r}, "
                        f"actual {other.value!r}"
                    )


def run_trial(
    instance: CspInstance,
    protocol: str,
    initial_values: dict[int, Value] | None = None,
    cycle_limit: int = 1000,
    seed: int = 0,
    assert_invariants: bool = True,
    trace: list[str] | None = None,
) -> TrialResult:
    """Run one trial; a pure function of its arguments."""
    if initial_values is None:
        initial_values = draw_initial_values(instance, seed)
    sim = Simulation(instance, protocol, initial_values, cycle_limit,
                     assert_invariants, trace)
    return sim.run()


def draw_initial_values(instance: CspInstance, seed: int) -> dict[int, Value]:
    rng = random.Random(seed)
    return {x: rng.choice(instance.domain(x)) for x in instance.variables}
