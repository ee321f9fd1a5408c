"""Asynchronous weak-commitment agent with resolvent-based nogood learning.

Nogoods are sets of (variable, value) pairs that cannot all hold.  An
agent's initial nogood list is exactly its own constraints, kept in
predicate form and materialized into concrete pairs only when selected for
a resolvent.  A nogood's priority is the minimum (priority, id) over its
*other* members; the lowest-priority member of a violated nogood is the one
that must adapt.  Priority ties break toward the larger id, matching the
tie order used by the mediation protocol.
"""
from __future__ import annotations

from dataclasses import dataclass

from .csp import Constraint, Kind, Value, is_satisfied
from .messages import AwcLink, AwcNogood, AwcOk, Message

Nogood = frozenset[tuple[int, Value]]

_TOP = (1 << 60, 1 << 60)  # order key above any real (priority, id)


@dataclass(slots=True, eq=False)
class _Learned:
    pairs: Nogood
    my_value: Value | None   # this agent's pair value, None if absent
    others: tuple[tuple[int, Value], ...]
    n_others: int
    idx: int                 # arrival index, the nogood-list order
    n_match: int = 0         # how many others currently match the view


class AwcAgent:
    def __init__(
        self,
        aid: int,
        kind: Kind,
        value_domain: tuple[Value, ...],
        constraints: tuple[Constraint, ...],
        value: Value,
        strict: bool = True,
    ):
        self.aid = aid
        self.kind = kind
        self.domain = value_domain
        self.constraints = constraints
        self.value = value
        self.strict = strict

        self.priority = 0
        self.neighbors: tuple[int, ...] = tuple(sorted(c.other(aid) for c in constraints))
        self.view: dict[int, tuple[Value, int]] = {}
        self.links: set[int] = set(self.neighbors)
        self.learned: list[_Learned] = []
        self.learned_set: set[Nogood] = set()
        self.by_var: dict[int, list[tuple[_Learned, Value]]] = {}
        self.matched: dict[_Learned, None] = {}  # fully-matched, insertion-ordered
        self.sent_resolvents: set[Nogood] = set()
        self.declared_unsat = False
        self.work = 0
        self.outbox: list[tuple[int, Message]] = []

    # -- plumbing -----------------------------------------------------------

    def _send(self, dst: int, msg: Message) -> None:
        self.outbox.append((dst, msg))

    def take_outbox(self) -> list[tuple[int, Message]]:
        out = self.outbox
        self.outbox = []
        return out

    def _order(self, aid: int) -> tuple[int, int]:
        if aid == self.aid:
            return (self.priority, self.aid)
        got = self.view.get(aid)
        return (got[1], aid) if got else (0, aid)

    def start(self) -> None:
        for j in self.neighbors:
            self._send(j, AwcOk(self.aid, self.value, self.priority))

    # -- handlers -------------------------------------------------------------

    def handle(self, sender: int, msg: Message) -> None:
        t = type(msg)
        if t is AwcOk:
            self._update_view(msg.x, msg.d, msg.p)
        elif t is AwcNogood:
            self.handle_nogood(frozenset(msg.pairs))
        elif t is AwcLink:
            self._update_view(msg.x, msg.d, msg.p)
            self.links.add(msg.x)
            self._send(msg.x, AwcOk(self.aid, self.value, self.priority))
        else:
            raise TypeError(f"AWC agent got {msg!r}")
        self.evaluate()

    def _update_view(self, x: int, d: Value, p: int) -> None:
        got = self.view.get(x)
        old = got[0] if got is not None else None
        self.view[x] = (d, p)
        if old == d:
            return
        for ng, val in self.by_var.get(x, ()):
            self.work += 1
            if val == old:
                if ng.n_match == ng.n_others:
                    del self.matched[ng]
                ng.n_match -= 1
            elif val == d:
                ng.n_match += 1
                if ng.n_match == ng.n_others:
                    self.matched[ng] = None

    def handle_nogood(self, ng: Nogood) -> None:
        if ng in self.learned_set:
            return
        self.learned_set.add(ng)
        my_value = None
        others = []
        for var, val in sorted(ng, key=lambda p: (p[0], str(p[1]))):
            if var == self.aid:
                my_value = val
            else:
                others.append((var, val))
        n_match = 0
        for var, val in others:
            got = self.view.get(var)
            if got is not None and got[0] == val:
                n_match += 1
        rec = _Learned(ng, my_value, tuple(others), len(others),
                       len(self.learned), n_match)
        self.learned.append(rec)
        if n_match == rec.n_others:
            self.matched[rec] = None
        for var, val in others:
            self.by_var.setdefault(var, []).append((rec, val))
        for var, _ in others:
            if var not in self.view:
                self.links.add(var)
                self._send(var, AwcLink(self.aid, self.value, self.priority))

    # -- evaluation -------------------------------------------------------------

    def _has_higher_violation(self, v: Value, me: tuple[int, int]) -> bool:
        """Cheap case-1 test: does any higher-priority nogood forbid ``v``?"""
        if self.kind is Kind.COLORING:
            for c in self.constraints:
                j = c.other(self.aid)
                got = self.view.get(j)
                self.work += 1
                if got is not None and got[0] == v and (got[1], j) > me:
                    return True
        else:
            for c in self.constraints:
                j = c.other(self.aid)
                got = self.view.get(j)
                self.work += 1
                if got is not None and (got[1], j) > me \
                        and not is_satisfied(c, v, got[0]):
                    return True
        for ng in self.matched:
            if ng.my_value is not None and ng.my_value != v:
                continue
            pr = _TOP
            for var, _ in ng.others:
                got = self.view[var]
                key = (got[1], var)
                if key < pr:
                    pr = key
            if pr > me:
                return True
        return False

    def _violated_buckets(self) -> dict[Value, list[tuple[tuple[int, int], object]]]:
        """Per own-value list of currently violated nogoods as
        (priority-key-over-other-members, source), in nogood-list order:
        constraints first, learned nogoods in arrival order.

        Whether a nogood's other members match the view is independent of
        this agent's own value, so one pass suffices for every value."""
        buckets: dict[Value, list[tuple[tuple[int, int], object]]] = {
            v: [] for v in self.domain
        }
        if self.kind is Kind.COLORING:
            for c in self.constraints:
                j = c.other(self.aid)
                got = self.view.get(j)
                self.work += 1
                if got is not None and got[0] in buckets:
                    buckets[got[0]].append(((got[1], j), (c, j)))
        else:
            for c in self.constraints:
                j = c.other(self.aid)
                got = self.view.get(j)
                if got is None:
                    continue
                pr = (got[1], j)
                for v in self.domain:
                    self.work += 1
                    if not is_satisfied(c, v, got[0]):
                        buckets[v].append((pr, (c, j)))
        hot = sorted(self.matched, key=lambda g: g.idx) \
            if len(self.matched) > 1 else list(self.matched)
        for ng in hot:
            self.work += ng.n_others
            pr = _TOP
            for var, _ in ng.others:
                got = self.view[var]
                key = (got[1], var)
                if key < pr:
                    pr = key
            if ng.my_value is None:
                for v in self.domain:
                    buckets[v].append((pr, ng))
            elif ng.my_value in buckets:
                buckets[ng.my_value].append((pr, ng))
        return buckets

    def evaluate(self) -> None:
        """The three-case nogood check, run on every message receipt."""
        me = (self.priority, self.aid)
        if not self._has_higher_violation(self.value, me):
            return
        buckets = self._violated_buckets()
        per_value = [
            (v, [e for e in buckets[v] if e[0] > me],
             sum(1 for e in buckets[v] if e[0] <= me))
            for v in self.domain
        ]
        clean = [(lower, i, v) for i, (v, hi, lower) in enumerate(per_value) if not hi]
        if clean:
            _, _, v = min(clean)
            self.value = v
            self._broadcast()
            return
        # every value is blocked by some higher-priority nogood: resolve
        resolvent = self._resolvent_from(per_value)
        if not resolvent:
            self.declared_unsat = True
            return
        if resolvent in self.sent_resolvents:
            return
        self.sent_resolvents.add(resolvent)
        pairs = tuple(sorted(resolvent, key=lambda p: (p[0], str(p[1]))))
        for var in sorted({var for var, _ in resolvent}):
            self._send(var, AwcNogood(self.aid, pairs))
        self.priority = max(
            self.priority + 1,
            max((p for _, p in self.view.values()), default=0) + 1,
        )
        self._pick_weak_commit_value(buckets)
        self._broadcast()

    def resolvent(self) -> Nogood:
        """Union of one violated higher-priority nogood per domain value
        (first in nogood-list order), minus this agent's own pairs."""
        buckets = self._violated_buckets()
        me = (self.priority, self.aid)
        per_value = [
            (v, [e for e in buckets[v] if e[0] > me], 0) for v in self.domain
        ]
        return self._resolvent_from(per_value)

    def _resolvent_from(self, per_value) -> Nogood:
        pairs: set[tuple[int, Value]] = set()
        for v, higher, _ in per_value:
            if not higher:
                raise ValueError(f"value {v!r} violates no higher-priority nogood")
            _, chosen = higher[0]
            if isinstance(chosen, _Learned):
                pairs.update(chosen.others)
            else:
                _, j = chosen
                pairs.add((j, self.view[j][0]))
        return frozenset(pairs)

    def _pick_weak_commit_value(self, buckets) -> None:
        """Min-conflict restart: satisfy higher-priority nogoods when some
        value can, otherwise minimize total conflicts; ties to the smallest
        domain index.  Classification uses the just-raised priority."""
        me = (self.priority, self.aid)
        per_value = [
            (v, sum(1 for e in buckets[v] if e[0] > me),
             sum(1 for e in buckets[v] if e[0] <= me))
            for v in self.domain
        ]
        clean = [(lower, i, v) for i, (v, hi, lower) in enumerate(per_value) if not hi]
        if clean:
            _, _, v = min(clean)
        else:
            _, _, v = min((hi + lower, i, v)
                          for i, (v, hi, lower) in enumerate(per_value))
        self.value = v

    def _broadcast(self) -> None:
        msg = AwcOk(self.aid, self.value, self.priority)
        for j in sorted(self.links):
            self._send(j, msg)

    # -- simulator hooks ----------------------------------------------------------

    def end_cycle(self) -> None:
        pass

    def idle(self) -> bool:
        return True
