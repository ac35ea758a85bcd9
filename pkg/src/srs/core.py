"""Passive automaton data: signal templates, slots, spikes, rules, payloads.

Everything here is owned by a Context (see scheduler); mutation happens on the
scheduler's tick loop or inside rule bodies holding slot guards.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Iterable, Optional, TYPE_CHECKING, Union

if TYPE_CHECKING:
    from .condition import Cond

INF = float("inf")


def changed_sid(slot_name: str) -> str:
    """Name of the signal emitted whenever a slot is written."""
    return f"{slot_name}:changed"


@dataclass(frozen=True)
class SignalSpec:
    """Template for a transient event.

    Spikes instantiating the signal match between ``min_age`` and ``max_age``
    ticks. ``tail`` names signals that must appear among a matching spike's
    causes (cause qualifiers).
    """

    sid: str
    min_age: int = 0
    max_age: Union[int, float] = INF
    tail: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.min_age < 0:
            raise ValueError(f"signal {self.sid!r}: min_age must be >= 0")
        if self.max_age < self.min_age:
            raise ValueError(f"signal {self.sid!r}: max_age < min_age")


@dataclass(frozen=True)
class Resource:
    """A consumable: either a rule identity or a slot identity."""

    kind: str  # "rule" | "slot"
    name: str

    def __repr__(self) -> str:
        return f"{self.kind}:{self.name}"


def rule_resource(name: str) -> Resource:
    return Resource("rule", name)


def slot_resource(name: str) -> Resource:
    return Resource("slot", name)


class ResultFlag(Enum):
    """Flags a rule body may return."""

    DELETE = "delete"
    RESIGN = "resign"


RuleResult = Optional[Union[ResultFlag, Iterable[ResultFlag]]]


def normalize_result(result: RuleResult) -> frozenset[ResultFlag]:
    if result is None:
        return frozenset()
    if isinstance(result, ResultFlag):
        return frozenset((result,))
    return frozenset(result)


class Spike:
    """An operational instance of a signal.

    Carries an immutable cause set, a growing age, and a ledger of consumed
    resources. Identity is the monotonically assigned ``id``.
    """

    __slots__ = ("id", "sid", "age", "cause", "payload", "consumed",
                 "resigned_rules", "eliminated_rules", "live")

    def __init__(self, spike_id: int, sid: str, cause: frozenset["Spike"],
                 payload: Any = None) -> None:
        self.id = spike_id
        self.sid = sid
        self.age = 0
        self.cause = cause
        self.payload = payload
        self.consumed: set[Resource] = set()
        self.resigned_rules: set[str] = set()
        self.eliminated_rules: set[str] = set()  # gave up via auto-elimination
        self.live = True

    def __repr__(self) -> str:
        return f"<spike #{self.id} {self.sid} age={self.age}>"


class Slot:
    """A named, guarded variable holding long-term interaction state.

    The lock guarantees exclusive write access for the duration of a rule
    body; reads are unguarded and see either the pre- or post-write value.
    """

    __slots__ = ("name", "value", "lock")

    def __init__(self, name: str, value: Any = None) -> None:
        self.name = name
        self.value = value
        self.lock = threading.RLock()  # bodies re-enter via their write view

    @property
    def changed_sid(self) -> str:
        return changed_sid(self.name)

    def __repr__(self) -> str:
        return f"<slot {self.name}={self.value!r}>"


@dataclass(frozen=True)
class EmitSpec:
    """Declares that a rule may emit a signal, optionally detached."""

    sid: str
    detached: bool = False


class Triggers(tuple):
    """The spikes that fulfilled the clause a rule ran on."""

    def payload(self, sid: str) -> Any:
        for spike in self:
            if spike.sid == sid:
                return spike.payload
        return None


class ReadView:
    """Slot read access limited to a rule's declared read set."""

    def __init__(self, slots: dict[str, Slot], allowed: frozenset[str]):
        self._slots = slots
        self._allowed = allowed

    def __getitem__(self, name: str) -> Any:
        if name not in self._allowed:
            from .errors import ConfigurationError
            raise ConfigurationError(f"slot {name!r} is not in the rule's read set")
        return self._slots[name].value


class WriteView:
    """Effect channel handed to a rule body: slot writes, emissions, wipes."""

    def __init__(self, write: Callable[[str, Any], None],
                 emit: Callable[[str, Any], None],
                 wipe: Callable[[str], int]):
        self._write = write
        self._emit = emit
        self._wipe = wipe

    def __setitem__(self, name: str, value: Any) -> None:
        self._write(name, value)

    def emit(self, sid: str, payload: Any = None) -> None:
        self._emit(sid, payload)

    def wipe(self, sid: str) -> int:
        return self._wipe(sid)


RuleBody = Callable[[ReadView, WriteView, Triggers], RuleResult]


class Rule:
    """A guarded procedure triggered by a Boolean signal condition.

    ``body(reads, writes, triggers)`` runs with all ``write_slots`` locked and
    may return result flags. Emissions must be declared in ``emits``.
    """

    __slots__ = ("name", "condition", "body", "read_slots", "write_slots",
                 "emits", "index")

    def __init__(self, name: str, condition: "Cond", body: RuleBody,
                 read_slots: Iterable[str] = (), write_slots: Iterable[str] = (),
                 emits: Iterable[EmitSpec] = ()) -> None:
        self.name = name
        self.condition = condition
        self.body = body
        self.read_slots = frozenset(read_slots)
        self.write_slots = frozenset(write_slots)
        self.emits = tuple(emits)
        self.index = -1  # registration order, assigned by the context

    def resources(self) -> frozenset[Resource]:
        """Resources consumed by an execution: the rule plus its write slots."""
        return frozenset((rule_resource(self.name),)) | frozenset(
            slot_resource(s) for s in self.write_slots)

    def emitted_sids(self, detached: Optional[bool] = None) -> tuple[str, ...]:
        if detached is None:
            return tuple(e.sid for e in self.emits)
        return tuple(e.sid for e in self.emits if e.detached == detached)

    def __repr__(self) -> str:
        return f"<rule {self.name}>"
