"""Problem representation, conflict evaluation, and the brute-force oracle.

A problem instance is a set of integer-indexed variables with finite ordered
domains and binary constraints.  Two instance kinds exist:

* ``COLORING`` -- values are color indices ``0..k-1``, constraints are
  not-equals.
* ``SENSOR``   -- each variable is a target; a value is a sorted tuple of
  sensor ids of cardinality ``min(|visible|, 3)``, constraints are
  not-intersects (no sensor shared between two targets).

Instances are immutable after construction and safe to share across
concurrently running trials.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

# A value is a color index (coloring) or a sorted tuple of sensor ids (sensor).
Value = int | tuple[int, ...]
Assignment = dict[int, Value]

SENSOR_CAP = 3  # max sensors tracking one target


class Kind(Enum):
    COLORING = "coloring"
    SENSOR = "sensor"


class Relation(Enum):
    NOT_EQUALS = "not_equals"
    NOT_INTERSECTS = "not_intersects"


class DomainTooLarge(Exception):
    """Raised when brute_force is asked to search beyond its cap."""


@dataclass(frozen=True, slots=True)
class Constraint:
    """Binary constraint between variables ``a`` and ``b`` (stored a < b)."""

    a: int
    b: int
    relation: Relation

    def other(self, x: int) -> int:
        if x == self.a:
            return self.b
        if x == self.b:
            return self.a
        raise ValueError(f"variable {x} not an endpoint of {self}")

    def involves(self, x: int) -> bool:
        return x == self.a or x == self.b


def is_satisfied(c: Constraint, va: Value, vb: Value) -> bool:
    """True iff the constraint holds with endpoint values ``va``, ``vb``."""
    if c.relation is Relation.NOT_EQUALS:
        if not isinstance(va, int) or not isinstance(vb, int):
            raise TypeError("not-equals constraints take color-index values")
        return va != vb
    if not isinstance(va, tuple) or not isinstance(vb, tuple):
        raise TypeError("not-intersects constraints take sensor-set values")
    return all(s not in vb for s in va)


def violated_neighbors(
    constraints: Iterable[Constraint],
    x: int,
    v: Value,
    view: Mapping[int, Value],
) -> set[int]:
    """Neighbors (per ``constraints`` incident to ``x``) present in ``view``
    whose constraint with ``x`` is violated when ``x`` takes ``v``.

    This is the shared primitive behind both the omniscient conflict check
    and the agent-side domain labeling: agents call it with the constraints
    they know about, the simulator with the instance's.
    """
    bad: set[int] = set()
    for c in constraints:
        if not c.involves(x):
            continue
        j = c.other(x)
        vj = view.get(j)
        if vj is None:
            continue
        if not is_satisfied(c, v, vj):
            bad.add(j)
    return bad


class CspInstance:
    """Shared constraint-satisfaction problem.

    Attributes
    ----------
    kind : Kind
    n : number of variables (ids are 0..n-1)
    k : color count (coloring) or per-target cap (sensor)
    constraints : tuple of Constraint, one per unordered pair
    visible : per-target sorted sensor-id tuples (sensor kind only)
    """

    def __init__(
        self,
        kind: Kind,
        n: int,
        k: int,
        constraints: Iterable[tuple[int, int]],
        visible: tuple[tuple[int, ...], ...] | None = None,
    ):
        self.kind = kind
        self.n = n
        self.k = k
        relation = Relation.NOT_EQUALS if kind is Kind.COLORING else Relation.NOT_INTERSECTS
        seen: set[tuple[int, int]] = set()
        cs: list[Constraint] = []
        for a, b in constraints:
            if a == b:
                raise ValueError(f"self-loop constraint on {a}")
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"constraint ({a},{b}) references unknown variable")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise ValueError(f"duplicate constraint {key}")
            seen.add(key)
            cs.append(Constraint(key[0], key[1], relation))
        self.constraints: tuple[Constraint, ...] = tuple(cs)

        if kind is Kind.SENSOR:
            if visible is None or len(visible) != n:
                raise ValueError("sensor instances need one visible-sensor set per target")
            vis = []
            for i, ds in enumerate(visible):
                t = tuple(sorted(ds))
                if not t or len(set(t)) != len(t):
                    raise ValueError(f"target {i} visible set empty or duplicated")
                vis.append(t)
            self.visible: tuple[tuple[int, ...], ...] | None = tuple(vis)
        else:
            if visible is not None:
                raise ValueError("visible sets only apply to sensor instances")
            if k < 1:
                raise ValueError("coloring needs at least one color")
            self.visible = None

        self._adj: tuple[tuple[Constraint, ...], ...] = tuple(
            tuple(c for c in self.constraints if c.involves(x)) for x in range(n)
        )
        self._domains: tuple[tuple[Value, ...], ...] = tuple(
            self._build_domain(x) for x in range(n)
        )

    def _build_domain(self, x: int) -> tuple[Value, ...]:
        if self.kind is Kind.COLORING:
            return tuple(range(self.k))
        elems = self.visible[x]  # type: ignore[index]
        c = min(len(elems), SENSOR_CAP)
        return tuple(itertools.combinations(elems, c))

    # -- accessors ---------------------------------------------------------

    @property
    def variables(self) -> range:
        return range(self.n)

    def domain(self, x: int) -> tuple[Value, ...]:
        """Ordered value domain of variable ``x``."""
        return self._domains[x]

    def elements(self, x: int) -> tuple[int, ...]:
        """Atomic domain elements: colors, or the target's visible sensors."""
        if self.kind is Kind.COLORING:
            return tuple(range(self.k))
        return self.visible[x]  # type: ignore[index]

    def constraints_of(self, x: int) -> tuple[Constraint, ...]:
        if not (0 <= x < self.n):
            raise ValueError(f"unknown variable {x}")
        return self._adj[x]

    def neighbors(self, x: int) -> tuple[int, ...]:
        return tuple(c.other(x) for c in self.constraints_of(x))

    @property
    def relation(self) -> Relation:
        return Relation.NOT_EQUALS if self.kind is Kind.COLORING else Relation.NOT_INTERSECTS

    # -- whole-assignment queries ------------------------------------------

    def conflicts_of(self, x: int, v: Value, view: Mapping[int, Value]) -> set[int]:
        """Neighbors of ``x`` in ``view`` violated when ``x`` takes ``v``."""
        return violated_neighbors(self.constraints_of(x), x, v, view)

    def verify_solution(self, a: Mapping[int, Value]) -> bool:
        """True iff ``a`` assigns every variable and satisfies every constraint."""
        for x in range(self.n):
            if x not in a:
                raise ValueError(f"assignment misses variable {x}")
        return all(is_satisfied(c, a[c.a], a[c.b]) for c in self.constraints)

    def search_space(self) -> int:
        p = 1
        for d in self._domains:
            p *= len(d)
        return p

    # -- serialization -----------------------------------------------------

    def to_text(self) -> str:
        """Line-oriented text form; bit-exact round-trip with parse_instance."""
        lines = [f"{self.kind.value} {self.n} {len(self.constraints)} {self.k}"]
        lines.extend(f"{c.a} {c.b}" for c in self.constraints)
        if self.kind is Kind.SENSOR:
            lines.extend(" ".join(str(s) for s in vis) for vis in self.visible)  # type: ignore[union-attr]
        return "\n".join(lines) + "\n"


def parse_instance(text: str) -> CspInstance:
    lines = text.splitlines()
    if not lines:
        raise ValueError("empty instance text")
    head = lines[0].split()
    if len(head) != 4:
        raise ValueError(f"bad header: {lines[0]!r}")
    kind = Kind(head[0])
    n, m, k = int(head[1]), int(head[2]), int(head[3])
    edges = []
    for ln in lines[1 : 1 + m]:
        a, b = ln.split()
        edges.append((int(a), int(b)))
    visible = None
    if kind is Kind.SENSOR:
        vis_lines = lines[1 + m : 1 + m + n]
        if len(vis_lines) != n:
            raise ValueError("sensor instance missing visible-sensor lines")
        visible = tuple(tuple(int(s) for s in ln.split()) for ln in vis_lines)
    return CspInstance(kind, n, k, edges, visible)


def verify_solution(instance: CspInstance, a: Mapping[int, Value]) -> bool:
    return instance.verify_solution(a)


def conflicts_of(instance: CspInstance, x: int, v: Value, view: Mapping[int, Value]) -> set[int]:
    return instance.conflicts_of(x, v, view)


def brute_force(instance: CspInstance, cap: int = 10_000_000) -> Assignment | None:
    """Exhaustive-search verdict: a satisfying assignment, or None if none exists.

    Refuses (DomainTooLarge) when the assignment space exceeds ``cap``; the
    caller must shrink the instance.  Independent of every protocol/solver
    code path -- this is the verification oracle.
    """
    space = instance.search_space()
    if space > cap:
        raise DomainTooLarge(f"search space {space} exceeds cap {cap}")
    order = list(range(instance.n))
    assign: Assignment = {}

    def extend(i: int) -> bool:
        if i == len(order):
            return True
        x = order[i]
        for v in instance.domain(x):
            ok = True
            for c in instance.constraints_of(x):
                j = c.other(x)
                if j in assign and not is_satisfied(c, v, assign[j]):
                    ok = False
                    break
            if ok:
                assign[x] = v
                if extend(i + 1):
                    return True
                del assign[x]
        return False

    if extend(0):
        assert instance.verify_solution(assign)
        return assign
    return None
