"""Wire messages for both protocols, plus the canonical byte-size model.

Size model (documented contract): 1 byte per type tag, 4 bytes per agent id,
4 bytes per priority/value/flag, 4 bytes per domain element, 8 bytes per
constraint reference.  Sensor-set values cost 4 bytes per member sensor id.
"""
from __future__ import annotations

from dataclasses import dataclass

from .csp import Constraint, Value

TAG = 1
ID = 4
SCALAR = 4  # priority / value / flag
ELEM = 4    # domain element
CONSTRAINT = 8


def value_bytes(v: Value) -> int:
    if isinstance(v, tuple):
        return SCALAR * len(v)
    return SCALAR


# Labels: per atomic domain element, the agents that element would conflict
# with.  Stored as a sorted tuple of (element, names-tuple) pairs so messages
# are hashable and traces deterministic.
Labels = tuple[tuple[int, tuple[int, ...]], ...]


@dataclass(frozen=True, slots=True)
class Init:
    x: int
    p: int
    d: Value
    m: bool
    elements: tuple[int, ...]
    constraints: tuple[Constraint, ...]


@dataclass(frozen=True, slots=True)
class Ok:
    x: int
    p: int
    d: Value
    m: bool


@dataclass(frozen=True, slots=True)
class EvaluateReq:
    x: int
    p: int


@dataclass(frozen=True, slots=True)
class Wait:
    x: int
    p: int


@dataclass(frozen=True, slots=True)
class EvaluateResp:
    x: int
    p: int
    labels: Labels


@dataclass(frozen=True, slots=True)
class Accept:
    d: Value        # value the receiver must adopt
    x: int          # mediator id
    p: int
    dx: Value       # mediator's own value
    m: bool


@dataclass(frozen=True, slots=True)
class NoSolution:
    x: int


@dataclass(frozen=True, slots=True)
class AwcOk:
    x: int
    d: Value
    p: int


@dataclass(frozen=True, slots=True)
class AwcNogood:
    x: int
    pairs: tuple[tuple[int, Value], ...]


@dataclass(frozen=True, slots=True)
class AwcLink:
    x: int
    d: Value
    p: int


Message = (
    Init | Ok | EvaluateReq | Wait | EvaluateResp | Accept | NoSolution
    | AwcOk | AwcNogood | AwcLink
)

_TAGS = {
    Init: "init",
    Ok: "ok",
    EvaluateReq: "eval_req",
    Wait: "wait",
    EvaluateResp: "eval_resp",
    Accept: "accept",
    NoSolution: "no_solution",
    AwcOk: "awc_ok",
    AwcNogood: "awc_nogood",
    AwcLink: "awc_link",
}


def message_tag(msg: Message) -> str:
    return _TAGS[type(msg)]


def message_size(msg: Message) -> int:
    """Deterministic byte size of a message under the documented model."""
    t = type(msg)
    if t is AwcOk or t is AwcLink:
        return TAG + ID + value_bytes(msg.d) + SCALAR
    if t is Ok:
        return TAG + ID + SCALAR + value_bytes(msg.d) + SCALAR
    if t is EvaluateReq or t is Wait:
        return TAG + ID + SCALAR
    if t is EvaluateResp:
        names = sum(len(ns) for _, ns in msg.labels)
        return TAG + ID + SCALAR + ELEM * len(msg.labels) + ID * names
    if t is Accept:
        return TAG + value_bytes(msg.d) + ID + SCALAR + value_bytes(msg.dx) + SCALAR
    if t is AwcNogood:
        return TAG + ID + sum(ID + value_bytes(v) for _, v in msg.pairs)
    if t is Init:
        return (TAG + ID + SCALAR + value_bytes(msg.d) + SCALAR
                + ELEM * len(msg.elements) + CONSTRAINT * len(msg.constraints))
    if t is NoSolution:
        return TAG + ID
    raise TypeError(f"unknown message {msg!r}")
