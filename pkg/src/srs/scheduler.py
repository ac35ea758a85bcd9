"""The runtime: context state, the tick loop, and activation arbitration.

A Context owns the automaton ⟨rules, signals, slots, spikes, activations⟩
plus the tick clock. Each tick:

1. drain queued external inputs and finished rule executions
2. age every live spike
3. refresh the built-in activity slot
4. enforce the activation existence guarantee
5. housekeeping pass per activation: expire spikes, run down pressure
   clocks, prune unsatisfiable pathways, acquire new spikes
6. arbitration pass per activation: consent check, then either execute the
   rule body or pressure the higher-utility blockers
7. garbage-collect dead spikes and empty causal groups

The two per-activation passes are deliberately separate so that consent sees
every competitor's acquisitions from the same tick; interleaving gathering
with execution would make arbitration depend on update order.

Rule bodies run inline in deterministic mode and on a worker pool otherwise.
Effects from pooled bodies (emissions, changed-spikes, wipes) are queued and
drained at the next tick start; slot values themselves change immediately
under the slot guard.
"""

from __future__ import annotations

import copy
import itertools
import logging
import threading
import time
from collections import deque
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Optional, Union

from .causal import GroupTable, groups as groups_from_scratch
from .condition import (Clause, Lit, SignalExpr, clause_key, dnf, eval_signal,
                        backward_complete, resolve_literal)
from .core import (INF, EmitSpec, ReadView, Resource, ResultFlag, Rule, Slot,
                   Spike, SignalSpec, Triggers, WriteView, changed_sid,
                   normalize_result, rule_resource)
from .errors import ConfigurationError, NotFulfilledError
from .trace import TraceRecorder, excerpt
from .utility import UtilityTable

log = logging.getLogger("srs.scheduler")

ACTIVITY_SLOT = "activity"


@dataclass
class EngineConfig:
    """Runtime knobs; every value has a scenario-safe default."""

    tick_hz: float = 20.0
    timeout_ticks: int = 7
    deterministic: bool = False
    seed: int = 0
    retry_on_resign: bool = False
    workers: int = 4
    check_invariants: bool = False


@dataclass
class TickReport:
    """What one tick did."""

    tick: int
    spikes_emitted: list[int] = field(default_factory=list)
    rules_run: list[str] = field(default_factory=list)
    activations_eliminated: int = 0

    @property
    def quiet(self) -> bool:
        return not self.spikes_emitted and not self.rules_run


class Activation:
    """One pending rule execution gathering spikes toward a fulfilled clause.

    ``assignments`` maps (clause index, literal index) of the rule's
    completed condition to the acquired spike serving that literal, so an
    activation never holds more than its condition needs per clause.
    """

    __slots__ = ("id", "rule", "assignments", "clocks", "state",
                 "_counts", "_frozen")

    def __init__(self, act_id: int, rule: Rule) -> None:
        self.id = act_id
        self.rule = rule
        self.assignments: dict[tuple[int, int], Spike] = {}
        self.clocks: dict[int, int] = {}  # causal-group root -> ticks left
        self.state = "gathering"  # gathering | executing | done
        self._counts: dict[Spike, int] = {}
        self._frozen: Optional[frozenset[Spike]] = None

    def assign(self, key: tuple[int, int], spike: Spike) -> None:
        old = self.assignments.get(key)
        if old is spike:
            return
        if old is not None:
            self._drop(old)
        self.assignments[key] = spike
        self._counts[spike] = self._counts.get(spike, 0) + 1
        self._frozen = None

    def unassign(self, key: tuple[int, int]) -> None:
        spike = self.assignments.pop(key, None)
        if spike is not None:
            self._drop(spike)

    def _drop(self, spike: Spike) -> None:
        left = self._counts.get(spike, 0) - 1
        if left <= 0:
            self._counts.pop(spike, None)
        else:
            self._counts[spike] = left
        self._frozen = None

    def holds(self, spike: Spike) -> bool:
        return spike in self._counts

    @property
    def spikes(self) -> frozenset[Spike]:
        if self._frozen is None:
            self._frozen = frozenset(self._counts)
        return self._frozen

    def spike_ids(self) -> list[int]:
        return sorted(s.id for s in self._counts)

    def __repr__(self) -> str:
        return (f"<activation #{self.id} {self.rule.name} "
                f"spikes={self.spike_ids()} {self.state}>")


class Context:
    """A complete signal-rule-slot automaton plus its runtime state."""

    def __init__(self, config: Optional[EngineConfig] = None,
                 trace: Optional[TraceRecorder] = None) -> None:
        self.config = config or EngineConfig()
        self.trace = trace or TraceRecorder()
        self.slots: dict[str, Slot] = {}
        self.signals: dict[str, SignalSpec] = {}
        self.rules: list[Rule] = []
        self.spikes: list[Spike] = []  # live spike set, id order
        self.activations: list[Activation] = []
        self.groups = GroupTable()
        self.tick = 0

        self.completed: dict[str, tuple[Clause, ...]] = {}
        self.table: Optional[UtilityTable] = None
        self._clause_lits: dict[str, tuple[tuple[Lit, ...], ...]] = {}
        self._condition_sids: dict[str, frozenset[str]] = {}
        self._emitters: dict[str, list[str]] = {}
        self._retention: dict[str, Union[int, float]] = {}

        self._by_sid: dict[str, list[Spike]] = {}
        self._rules_by_name: dict[str, Rule] = {}
        self._spike_counter = itertools.count(1)
        self._act_counter = itertools.count(1)
        self._dirty = True
        self._in_tick = False
        self._tick_lock = threading.RLock()
        self._inbox: deque[Callable[[], None]] = deque()
        self._inbox_lock = threading.Lock()
        self._executing: list[tuple[Activation, Future]] = []
        self._pool: Optional[ThreadPoolExecutor] = None
        self._pending_deletes: list[str] = []
        self._report: Optional[TickReport] = None

        self.add_slot(ACTIVITY_SLOT, 0)

    # ------------------------------------------------------------------
    # registration

    def add_slot(self, name: str, value: Any = None) -> Slot:
        if self._in_tick:
            raise ConfigurationError("cannot register mid-tick")
        if name in self.slots:
            raise ConfigurationError(f"slot {name!r} already exists")
        slot = Slot(name, value)
        self.slots[name] = slot
        sid = changed_sid(name)
        if sid in self.signals:
            raise ConfigurationError(f"signal {sid!r} already exists")
        self.signals[sid] = SignalSpec(sid)
        self._dirty = True
        return slot

    def add_signal(self, spec: Union[SignalSpec, str], **kwargs: Any) -> SignalSpec:
        if self._in_tick:
            raise ConfigurationError("cannot register mid-tick")
        if isinstance(spec, str):
            spec = SignalSpec(spec, **kwargs)
        if spec.sid in self.signals:
            raise ConfigurationError(f"signal {spec.sid!r} already exists")
        self.signals[spec.sid] = spec
        self._dirty = True
        return spec

    def add_rule(self, rule: Rule) -> Rule:
        if self._in_tick:
            raise ConfigurationError("cannot register mid-tick")
        if rule.name in self._rules_by_name:
            raise ConfigurationError(f"rule {rule.name!r} already exists")
        rule.index = len(self.rules)
        self.rules.append(rule)
        self._rules_by_name[rule.name] = rule
        self._dirty = True
        return rule

    def rule(self, name: str) -> Rule:
        return self._rules_by_name[name]

    # ------------------------------------------------------------------
    # derived structures

    def _implicit_emits(self) -> dict[str, tuple[str, ...]]:
        return {r.name: tuple(sorted(changed_sid(s) for s in r.write_slots))
                for r in self.rules if r.write_slots}

    def _validate(self) -> None:
        for rule in self.rules:
            for slot in rule.read_slots | rule.write_slots:
                if slot not in self.slots:
                    raise ConfigurationError(
                        f"rule {rule.name!r} references unknown slot {slot!r}")
            for emit in rule.emits:
                if emit.sid not in self.signals:
                    raise ConfigurationError(
                        f"rule {rule.name!r} emits unknown signal {emit.sid!r}")
            for clause in dnf(rule.condition, self.signals):
                for lit in clause:
                    if lit.sid not in self.signals:
                        raise ConfigurationError(
                            f"rule {rule.name!r} conditions on unknown "
                            f"signal {lit.sid!r}")
                    for t in lit.tail:
                        if t.sid not in self.signals:
                            raise ConfigurationError(
                                f"rule {rule.name!r}: tail references unknown "
                                f"signal {t.sid!r}")

    def _prepare(self) -> None:
        self._validate()
        implicit = self._implicit_emits()
        self.completed = backward_complete(self.rules, self.signals, implicit)
        self.table = UtilityTable(self.rules, self.completed)

        self._clause_lits = {}
        self._condition_sids = {}
        for rule in self.rules:
            clauses = self.table.clauses(rule.name)
            self._clause_lits[rule.name] = tuple(
                tuple(sorted(clause, key=lambda l: (l.sid, l.min_age, l.max_age)))
                for clause in clauses)
            self._condition_sids[rule.name] = frozenset(
                lit.sid for clause in clauses for lit in clause)

        self._emitters = {}
        for rule in self.rules:
            sids = list(rule.emitted_sids(detached=False))
            sids += [s for s in implicit.get(rule.name, ()) if s not in sids]
            for sid in sids:
                lst = self._emitters.setdefault(sid, [])
                if rule.name not in lst:
                    lst.append(rule.name)

        self._retention = {}
        for rule in self.rules:
            for clause in self.completed[rule.name]:
                for lit in clause:
                    prev = self._retention.get(lit.sid, -1)
                    self._retention[lit.sid] = max(prev, lit.max_age)

        # signals produced only by detached emission: there is no causal
        # pathway to anticipate them, so they count toward a competitor's
        # blocking utility only once a spike actually exists
        detached_declared = {e.sid for r in self.rules for e in r.emits
                             if e.detached}
        self._detached_only = {sid for sid in detached_declared
                               if sid not in self._emitters}
        self._dirty = False

    def _prepare_if_dirty(self) -> None:
        if self._dirty:
            self._prepare()

    def prepare(self) -> None:
        """Validate and build completion/utility structures eagerly."""
        self._prepare_if_dirty()

    # ------------------------------------------------------------------
    # core operations on the passive state

    def read_slot(self, name: str) -> Any:
        if name not in self.slots:
            raise ConfigurationError(f"unknown slot {name!r}")
        return self.slots[name].value

    def write_slot(self, name: str, value: Any, cause: Iterable[Spike] = (),
                   source: str = "external",
                   act_id: Optional[int] = None) -> Spike:
        """Replace the slot value and emit one changed-spike carrying it."""
        if name not in self.slots:
            raise ConfigurationError(f"unknown slot {name!r}")
        slot = self.slots[name]
        value = copy.deepcopy(value)
        with slot.lock:
            slot.value = value
        spike = self.emit(slot.changed_sid, cause=cause, payload=value,
                          source=source, _copied=True)
        self.trace.record(self.tick, "slot_written", slot=name, rule=source,
                          act=act_id, spike=spike.id, value=value)
        return spike

    def emit(self, sid: str, cause: Iterable[Spike] = (), detached: bool = False,
             payload: Any = None, source: str = "external",
             _copied: bool = False) -> Spike:
        """Append a new age-0 spike; detached spikes found a fresh group."""
        if sid not in self.signals:
            raise ConfigurationError(f"unknown signal {sid!r}")
        cause_set = frozenset() if detached else frozenset(cause)
        if not _copied:
            payload = copy.deepcopy(payload)
        spike = Spike(next(self._spike_counter), sid, cause_set, payload)
        self.spikes.append(spike)
        self._by_sid.setdefault(sid, []).append(spike)
        self.groups.add(spike)
        if self._report is not None:
            self._report.spikes_emitted.append(spike.id)
        self.trace.record(self.tick, "spike_emitted", spike=spike.id, sid=sid,
                          cause=sorted(s.id for s in cause_set),
                          group=self.groups.group_of(spike), detached=detached,
                          payload=excerpt(payload), source=source)
        return spike

    def age_all(self) -> None:
        for spike in self.spikes:
            spike.age += 1

    def wipe(self, sid: str) -> int:
        """Remove all live spikes of the signal and reject them everywhere."""
        if sid not in self.signals:
            raise ConfigurationError(f"unknown signal {sid!r}")
        doomed = [s for s in self.spikes if s.sid == sid]
        for spike in doomed:
            for act in self.activations:
                if act.holds(spike):
                    self._reject(act, spike, "wipe")
            spike.live = False
            self.groups.retire(spike)
            self.trace.record(self.tick, "spike_rejected", act=None, rule=None,
                              spike=spike.id, reason="wipe")
        self.spikes = [s for s in self.spikes if s.sid != sid]
        self._by_sid.pop(sid, None)
        return len(doomed)

    # ------------------------------------------------------------------
    # external input (thread-safe, drained at tick start)

    def post(self, thunk: Callable[[], None]) -> None:
        with self._inbox_lock:
            self._inbox.append(thunk)

    def external_write(self, slot: str, value: Any) -> None:
        """Queue a slot write from outside the engine (input channel)."""
        self.post(lambda: self.write_slot(slot, value, source="external"))

    def external_emit(self, sid: str, payload: Any = None,
                      detached: bool = True) -> None:
        self.post(lambda: self.emit(sid, detached=detached, payload=payload))

    def _drain_inbox(self) -> None:
        while True:
            with self._inbox_lock:
                if not self._inbox:
                    return
                thunk = self._inbox.popleft()
            thunk()

    # ------------------------------------------------------------------
    # tick loop

    def run_tick(self) -> TickReport:
        with self._tick_lock:
            self._prepare_if_dirty()
            self.tick += 1
            self._in_tick = True
            self._report = report = TickReport(self.tick)
            try:
                self._drain_inbox()
                self._reap_finished()
                self.age_all()
                self._update_activity()
                self.ensure_activations()
                active = self._ordered_activations()
                for act in active:
                    if act.state == "gathering":
                        self._housekeep(act)
                for act in active:
                    if act.state == "gathering":
                        self._arbitrate(act)
                self._apply_deletes()
                # executed activations removed themselves; restore the guarantee
                self.ensure_activations()
                self._gc()
                if self.config.check_invariants:
                    self._check_invariants()
            finally:
                self._in_tick = False
                self._report = None
            return report

    def run_ticks(self, n: int) -> list[TickReport]:
        return [self.run_tick() for _ in range(n)]

    def _ordered_activations(self) -> list[Activation]:
        self.activations.sort(key=lambda a: (a.rule.index, a.id))
        return list(self.activations)

    def update_activation(self, act: Activation) -> str:
        """Run one activation's full lifecycle step and return its state.

        The tick loop performs the same work in two passes across all
        activations (gather everything, then arbitrate) so consent sees every
        competitor's acquisitions; this single-activation form serves direct
        driving and tests.
        """
        self._prepare_if_dirty()
        if act.state == "gathering":
            self._housekeep(act)
        if act.state == "gathering":
            self._arbitrate(act)
        return act.state

    # ------------------------------------------------------------------
    # activity slot

    def _update_activity(self) -> None:
        sid = changed_sid(ACTIVITY_SLOT)
        count = 0
        for act in self.activations:
            if act.assignments and sid not in self._condition_sids.get(
                    act.rule.name, frozenset()):
                count += 1
        if count != self.slots[ACTIVITY_SLOT].value:
            # stale transition spikes describe a count that no longer holds
            self.wipe(sid)
            self.write_slot(ACTIVITY_SLOT, count, source="system")
            self.trace.record(self.tick, "activity_changed", value=count)

    def activity(self) -> int:
        return self.slots[ACTIVITY_SLOT].value

    # ------------------------------------------------------------------
    # activation existence guarantee

    def ensure_activations(self) -> int:
        """Create standby activations so every condition signal has a taker."""
        created = 0
        for rule in self.rules:
            gathering = [a for a in self.activations
                         if a.rule is rule and a.state == "gathering"]
            if gathering and not self._needs_standby(rule, gathering):
                continue
            act = Activation(next(self._act_counter), rule)
            self.activations.append(act)
            created += 1
            self.trace.record(self.tick, "activation_created", act=act.id,
                              rule=rule.name)
        return created

    def _needs_standby(self, rule: Rule,
                       gathering: list[Activation]) -> bool:
        lits = {lit for clause in self.completed[rule.name] for lit in clause}
        for lit in lits:
            if all(eval_signal(a.spikes, lit) for a in gathering):
                return True
        return False

    def check_existence_guarantee(self) -> bool:
        for rule in self.rules:
            gathering = [a for a in self.activations
                         if a.rule is rule and a.state == "gathering"]
            if not gathering or self._needs_standby(rule, gathering):
                return False
        return True

    # ------------------------------------------------------------------
    # housekeeping pass

    def _reject(self, act: Activation, spike: Spike, reason: str) -> None:
        keys = [k for k, s in act.assignments.items() if s is spike]
        for k in keys:
            act.unassign(k)
        if keys:
            self.trace.record(self.tick, "spike_rejected", act=act.id,
                              rule=act.rule.name, spike=spike.id, reason=reason)

    def _available(self, rule: Rule, spike: Spike) -> bool:
        if rule.name in spike.eliminated_rules:
            return False
        if self.groups.ledger(spike) & rule.resources():
            return False
        if not self.config.retry_on_resign and rule.name in spike.resigned_rules:
            return False
        return True

    def _matches(self, lit: Lit, spike: Spike) -> bool:
        if spike.sid != lit.sid or not spike.live:
            return False
        if spike.age > lit.max_age:
            return False
        # tails are age-free cause qualifiers: a structural check
        return all(eval_signal(spike.cause, t) for t in lit.tail)

    def _housekeep(self, act: Activation) -> None:
        rule = act.rule
        # 1. expire spikes past their literal's window or no longer available
        clause_lits = self._clause_lits[rule.name]
        for (ci, li), spike in list(act.assignments.items()):
            lit = clause_lits[ci][li]
            if not spike.live or spike.age > lit.max_age:
                self._reject(act, spike, "too_old")
        for spike in sorted(act.spikes, key=lambda s: s.id):
            if not self._available(rule, spike):
                self._reject(act, spike, "consumed")

        # 2. pressure clocks: decrement; on zero reject the whole group
        if act.clocks:
            normalized: dict[int, int] = {}
            for root, left in act.clocks.items():
                root = self.groups.find(root)
                normalized[root] = min(left, normalized.get(root, left))
            act.clocks = {}
            for root, left in sorted(normalized.items()):
                left -= 1
                if left <= 0:
                    self.trace.record(self.tick, "clock_expired", act=act.id,
                                      rule=rule.name, group=root)
                    if self._report is not None:
                        self._report.activations_eliminated += 1
                    # the rule lost the timeout contest: it abstains from
                    # this causal group for good, or its standbys would just
                    # re-acquire and the pressurer would starve
                    for member in sorted(self.groups.members(root),
                                         key=lambda s: s.id):
                        member.eliminated_rules.add(rule.name)
                    for spike in sorted(act.spikes, key=lambda s: s.id):
                        if self.groups.find(spike.id) == root:
                            self._reject(act, spike, "clock")
                else:
                    act.clocks[root] = left

        # 3. prune causal pathways that can no longer complete
        self._prune_unsatisfiable(act)

        # 4. acquire newly matching unconsumed spikes
        sibling_held = {s.id for a in self.activations
                        if a is not act and a.rule is rule
                        and a.state == "gathering" for s in a.spikes}
        acquired_new = False
        for ci, lits in enumerate(clause_lits):
            for li, lit in enumerate(lits):
                if (ci, li) in act.assignments:
                    continue
                held = sorted((s for s in act.spikes if s.sid == lit.sid),
                              key=lambda s: s.id)
                pool = held + [s for s in self._by_sid.get(lit.sid, ())
                               if not act.holds(s)]
                for spike in pool:
                    if not self._matches(lit, spike):
                        continue
                    if not self._available(rule, spike):
                        continue
                    fresh = not act.holds(spike)
                    if fresh and spike.id in sibling_held:
                        # a sibling already tracks this spike; the pair can
                        # only fire once anyway (conflict type A)
                        continue
                    if fresh and not self._cause_viable(act, ci, spike):
                        continue
                    act.assign((ci, li), spike)
                    if fresh:
                        acquired_new = True
                        self.trace.record(self.tick, "spike_acquired",
                                          act=act.id, rule=rule.name,
                                          spike=spike.id)
                    break
        if acquired_new and act.clocks:
            act.clocks = {g: self.config.timeout_ticks for g in act.clocks}

    def _completion_effect_ok(self, rule: Rule, lit: Lit,
                              cause_spike: Spike) -> bool:
        """Can the completion literal still be served, given this cause?

        True when a matching spike is already acquirable, or some emitter of
        the signal could still run on the cause spike's group (resources not
        consumed) or is still gathering it.
        """
        if any(self._matches(lit, s) and self._available(rule, s)
               for s in self._by_sid.get(lit.sid, ())):
            return True
        for qname in self._emitters.get(lit.sid, ()):
            if qname == rule.name or qname not in self._rules_by_name:
                continue
            q = self._rules_by_name[qname]
            if not (self.groups.ledger(cause_spike) & q.resources()):
                return True
            if any(a.rule is q and a.state == "gathering"
                   and a.holds(cause_spike) for a in self.activations):
                return True
        return False

    def _cause_viable(self, act: Activation, ci: int, spike: Spike) -> bool:
        """Is holding this spike in clause ``ci`` still a live pathway?

        The spike is pointless for the clause when some unfulfilled
        completion-qualified literal names its signal in the tail but can no
        longer be produced from it.
        """
        rule = act.rule
        for li, lit in enumerate(self._clause_lits[rule.name][ci]):
            if (ci, li) in act.assignments or not lit.tail:
                continue
            if spike.sid not in {t.sid for t in lit.tail}:
                continue
            if not any(q != rule.name and q in self._rules_by_name
                       for q in self._emitters.get(lit.sid, ())):
                continue
            if not self._completion_effect_ok(rule, lit, spike):
                return False
        return True

    def _prune_unsatisfiable(self, act: Activation) -> None:
        """Drop assignments whose required completion effect is dead.

        Conservative: a pathway counts as dead only when no matching effect
        spike is acquirable and every non-detached emitter of the effect has
        consumed or given up the held cause spikes.
        """
        doomed: list[tuple[tuple[int, int], Spike]] = []
        for (ci, li), spike in act.assignments.items():
            if not self._cause_viable(act, ci, spike):
                doomed.append(((ci, li), spike))
        for (key, spike) in sorted(doomed, key=lambda d: (d[0], d[1].id)):
            act.unassign(key)
        for spike in sorted({s for _, s in doomed}, key=lambda s: s.id):
            if not act.holds(spike):
                self.trace.record(self.tick, "spike_rejected", act=act.id,
                                  rule=act.rule.name, spike=spike.id,
                                  reason="unsatisfiable")

    # ------------------------------------------------------------------
    # arbitration pass

    def _fulfilled_pick(self, act: Activation):
        try:
            return self.table.best_fulfilled(act.rule.name, act.spikes)
        except NotFulfilledError:
            return None

    def _competitors(self, act: Activation) -> list[Activation]:
        """Gathering activations sharing a causal group and a resource."""
        res = act.rule.resources()
        mine = {self.groups.find(s.id) for s in act.spikes}
        out = []
        for other in self.activations:
            if other is act or other.state != "gathering":
                continue
            if not (other.rule.resources() & res):
                continue
            theirs = {self.groups.find(s.id) for s in other.spikes}
            if mine & theirs:
                out.append(other)
        return out

    def _clause_supported(self, rule: Rule, clause: Clause,
                          held: frozenset[Spike]) -> bool:
        """Could this clause still come true, as far as structure can tell?

        Unfulfilled literals need an acquirable spike, a live non-detached
        emitter pathway, or an external source. Detached-only signals are
        unanticipatable until instantiated.
        """
        for lit in clause:
            if eval_signal(held, lit):
                continue
            if any(self._matches(lit, s) and self._available(rule, s)
                   for s in self._by_sid.get(lit.sid, ())):
                continue
            if any(q != rule.name and q in self._rules_by_name
                   for q in self._emitters.get(lit.sid, ())):
                continue
            if lit.sid in self._detached_only:
                return False
        return True

    def _blocking_probability(self, act: Activation) -> Optional[Fraction]:
        """Best utility the activation can still credibly promise."""
        best: Optional[Fraction] = None
        held = act.spikes
        for pick in self.table.picks(act.rule.name):
            if not self._clause_supported(act.rule, pick.clause, held):
                continue
            if best is None or pick.probability < best:
                best = pick.probability
        return best

    def consent(self, act: Activation) -> bool:
        """Both conflict-resolution decisions for a fulfilled activation.

        Grants unless (a) any held spike's group ledger already contains one
        of the activation's resources, or (b) a competing activation over a
        shared group and overlapping resource set promises strictly higher
        utility.
        """
        pick = self._fulfilled_pick(act)
        if pick is None:
            raise NotFulfilledError(act.rule.name)
        reason = self._denial(act, pick.probability)
        return reason is None

    def _denial(self, act: Activation,
                mu_prob: Fraction) -> Optional[tuple[str, str]]:
        res = act.rule.resources()
        for spike in sorted(act.spikes, key=lambda s: s.id):
            if act.rule.name in spike.eliminated_rules:
                return ("resource", spike.sid)
            if self.groups.ledger(spike) & res:
                return ("resource", spike.sid)
            if (not self.config.retry_on_resign
                    and act.rule.name in spike.resigned_rules):
                return ("resource", spike.sid)
        for other in self._competitors(act):
            blocking = self._blocking_probability(other)
            if blocking is not None and blocking < mu_prob:
                return ("outscored", other.rule.name)
        return None

    def pressure(self, act: Activation, mu_prob: Optional[Fraction] = None) -> None:
        """Start auto-elimination clocks on higher-utility blockers."""
        if mu_prob is None:
            mu_prob = self._fulfilled_pick(act).probability
        for other in self._competitors(act):
            blocking = self._blocking_probability(other)
            if blocking is None or not blocking < mu_prob:
                continue
            normalized = {self.groups.find(g) for g in other.clocks}
            for root in sorted({self.groups.find(s.id) for s in other.spikes}):
                if root in normalized:
                    continue
                other.clocks[root] = self.config.timeout_ticks
                self.trace.record(self.tick, "pressured", act=other.id,
                                  rule=other.rule.name, by=act.rule.name,
                                  group=root,
                                  timeout=self.config.timeout_ticks)

    def _arbitrate(self, act: Activation) -> None:
        pick = self._fulfilled_pick(act)
        if pick is None:
            return
        denial = self._denial(act, pick.probability)
        if denial is not None:
            reason, blocker = denial
            self.trace.record(self.tick, "consent_denied", act=act.id,
                              rule=act.rule.name, reason=reason,
                              blocker=blocker)
            if reason == "outscored":
                self.pressure(act, pick.probability)
            return
        self.trace.record(self.tick, "consent_granted", act=act.id,
                          rule=act.rule.name, bits=pick.bits)
        self._execute(act, pick)

    # ------------------------------------------------------------------
    # execution

    def activated(self, act: Activation) -> None:
        """Mark the activation's resources consumed on every held spike."""
        res = act.rule.resources()
        for spike in sorted(act.spikes, key=lambda s: s.id):
            spike.consumed |= res
            self.trace.record(self.tick, "spike_consumed", spike=spike.id,
                              act=act.id, rule=act.rule.name,
                              resources=sorted(repr(r) for r in res))

    def _execute(self, act: Activation, pick) -> None:
        # pre-run ops: keep only the most useful fulfilled clause's spikes,
        # then consume resources for what remains
        keep: dict[tuple[int, int], Spike] = {}
        clause_lits = self._clause_lits[act.rule.name][pick.index]
        for li, lit in enumerate(clause_lits):
            spike = act.assignments.get((pick.index, li))
            if spike is None or not (lit.min_age <= spike.age <= lit.max_age):
                # the clause is fulfilled, so some held spike satisfies it
                spike = next((s for s in sorted(act.spikes, key=lambda s: s.id)
                              if self._matches(lit, s)
                              and s.age >= lit.min_age), spike)
            if spike is not None:
                keep[(pick.index, li)] = spike
        for spike in sorted(act.spikes - frozenset(keep.values()),
                            key=lambda s: s.id):
            self._reject(act, spike, "outside_muc")
        for key in [k for k in list(act.assignments) if k not in keep]:
            act.unassign(key)
        for key, spike in keep.items():
            act.assign(key, spike)
        self.activated(act)
        act.state = "executing"
        triggers = Triggers(sorted(act.spikes, key=lambda s: s.id))
        self.trace.record(self.tick, "rule_started", act=act.id,
                          rule=act.rule.name, spikes=[s.id for s in triggers],
                          clause=pick.index, bits=pick.bits)
        if self.config.deterministic:
            flags, error = self._run_body(act, triggers)
            self._post_run(act, flags, error)
        else:
            pool = self._ensure_pool()
            future = pool.submit(self._run_body, act, triggers)
            self._executing.append((act, future))

    def _ensure_pool(self) -> ThreadPoolExecutor:
        if self._pool is None:
            self._pool = ThreadPoolExecutor(
                max_workers=self.config.workers,
                thread_name_prefix="srs-rule")
        return self._pool

    def _run_body(self, act: Activation,
                  triggers: Triggers) -> tuple[frozenset[ResultFlag], Optional[str]]:
        rule = act.rule
        immediate = self.config.deterministic

        def do_write(name: str, value: Any) -> None:
            if name not in rule.write_slots:
                raise ConfigurationError(
                    f"rule {rule.name!r} writes undeclared slot {name!r}")
            if immediate:
                self.write_slot(name, value, cause=triggers, source=rule.name,
                                act_id=act.id)
            else:
                slot = self.slots[name]
                value = copy.deepcopy(value)
                with slot.lock:
                    slot.value = value
                self.post(lambda: self._deferred_changed(name, value, triggers,
                                                         rule.name, act.id))

        def do_emit(sid: str, payload: Any = None) -> None:
            spec = next((e for e in rule.emits if e.sid == sid), None)
            if spec is None:
                raise ConfigurationError(
                    f"rule {rule.name!r} emits undeclared signal {sid!r}")
            if immediate:
                self.emit(sid, cause=triggers, detached=spec.detached,
                          payload=payload, source=rule.name)
            else:
                payload = copy.deepcopy(payload)
                self.post(lambda: self.emit(sid, cause=triggers,
                                            detached=spec.detached,
                                            payload=payload, source=rule.name,
                                            _copied=True))

        def do_wipe(sid: str) -> int:
            if sid not in {e.sid for e in rule.emits}:
                raise ConfigurationError(
                    f"rule {rule.name!r} wipes undeclared signal {sid!r}")
            if immediate:
                return self.wipe(sid)
            self.post(lambda: self.wipe(sid))
            return 0

        reads = ReadView(self.slots, rule.read_slots)
        writes = WriteView(do_write, do_emit, do_wipe)
        locks = [self.slots[s].lock for s in sorted(rule.write_slots)]
        for lock in locks:
            lock.acquire()
        try:
            result = rule.body(reads, writes, triggers)
            return normalize_result(result), None
        except Exception as exc:  # body failure: treated as Resign
            log.warning("rule %s failed: %s", rule.name, exc)
            return frozenset((ResultFlag.RESIGN,)), f"{type(exc).__name__}: {exc}"
        finally:
            for lock in reversed(locks):
                lock.release()

    def _deferred_changed(self, name: str, value: Any, cause: Triggers,
                          source: str, act_id: Optional[int] = None) -> None:
        spike = self.emit(changed_sid(name), cause=cause, payload=value,
                          source=source, _copied=True)
        self.trace.record(self.tick, "slot_written", slot=name, rule=source,
                          act=act_id, spike=spike.id, value=value)

    def _post_run(self, act: Activation, flags: frozenset[ResultFlag],
                  error: Optional[str]) -> None:
        self.trace.record(self.tick, "rule_finished", act=act.id,
                          rule=act.rule.name,
                          flags=sorted(f.value for f in flags), error=error)
        if ResultFlag.RESIGN in flags:
            self.resigned(act)
        else:
            self.consumed(act)
        if ResultFlag.DELETE in flags:
            self._pending_deletes.append(act.rule.name)
        act.state = "done"
        self.activations = [a for a in self.activations if a is not act]
        if self._report is not None:
            self._report.rules_run.append(act.rule.name)

    def resigned(self, act: Activation) -> None:
        """Release the resources claimed by ``activated``; allow second-best."""
        res = act.rule.resources()
        for spike in sorted(act.spikes, key=lambda s: s.id):
            spike.consumed -= res
            spike.resigned_rules.add(act.rule.name)

    def consumed(self, act: Activation) -> None:
        """Force resource-sharing competitors to give up the used spikes."""
        res = act.rule.resources()
        mine = act.spikes
        for other in self.activations:
            if other is act or other.state != "gathering":
                continue
            if not (other.rule.resources() & res):
                continue
            for spike in sorted(mine & other.spikes, key=lambda s: s.id):
                self._reject(other, spike, "consumed")

    def _reap_finished(self) -> None:
        still = []
        for act, future in self._executing:
            if future.done():
                flags, error = future.result()
                self._post_run(act, flags, error)
            else:
                still.append((act, future))
        self._executing = still

    def _apply_deletes(self) -> None:
        if not self._pending_deletes:
            return
        for name in self._pending_deletes:
            rule = self._rules_by_name.pop(name, None)
            if rule is None:
                continue
            self.rules.remove(rule)
            for act in [a for a in self.activations if a.rule is rule]:
                for spike in sorted(act.spikes, key=lambda s: s.id):
                    self._reject(act, spike, "rule_deleted")
                self.activations.remove(act)
        self._pending_deletes = []
        for i, rule in enumerate(self.rules):
            rule.index = i
        old_completed = self.completed
        self._prepare()
        for act in self.activations:
            if act.state != "gathering":
                continue
            if old_completed.get(act.rule.name) != self.completed[act.rule.name]:
                for spike in sorted(act.spikes, key=lambda s: s.id):
                    self._reject(act, spike, "rule_set_changed")
                act.clocks = {}

    # ------------------------------------------------------------------
    # garbage collection & invariants

    def _gc(self) -> None:
        held: set[int] = set()
        for act in self.activations:
            held.update(s.id for s in act.spikes)
        for act, _ in self._executing:
            held.update(s.id for s in act.spikes)
        survivors = []
        for spike in self.spikes:
            bound = max(0, self._retention.get(spike.sid, 0))
            if spike.age > bound and spike.id not in held:
                spike.live = False
                self.groups.retire(spike)
                self.trace.record(self.tick, "spike_rejected", act=None,
                                  rule=None, spike=spike.id, reason="gc")
            else:
                survivors.append(spike)
        if len(survivors) != len(self.spikes):
            self.spikes = survivors
            self._by_sid = {}
            for spike in survivors:
                self._by_sid.setdefault(spike.sid, []).append(spike)

    def _check_invariants(self) -> None:
        assert self.check_existence_guarantee(), "existence guarantee violated"
        valid = set()
        for rule in self.rules:
            valid |= rule.resources()
        for spike in self.spikes:
            ghost = {r for r in spike.consumed
                     if r.kind == "slot" and r.name not in self.slots}
            assert not ghost, f"invalid consumed entries on {spike}: {ghost}"
        incremental = [frozenset(g) for g in self.groups.live_partition()]
        scratch = [frozenset(g) for g in groups_from_scratch(self.spikes)]
        assert incremental == scratch, "incremental groups diverged"

    # ------------------------------------------------------------------

    def utility_report(self) -> list[tuple[str, float]]:
        self._prepare_if_dirty()
        return self.table.report()

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=False, cancel_futures=True)
            self._pool = None


class Runner:
    """Paces a context's tick loop on a background thread."""

    def __init__(self, ctx: Context) -> None:
        self.ctx = ctx
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    def start(self) -> None:
        if self._thread is not None:
            return
        self._thread = threading.Thread(target=self._loop, name="srs-tick",
                                        daemon=True)
        self._thread.start()

    def _loop(self) -> None:
        period = 1.0 / self.ctx.config.tick_hz
        next_tick = time.monotonic()
        while not self._stop.is_set():
            try:
                self.ctx.run_tick()
            except Exception:  # keep the loop alive; surface in logs
                log.exception("tick failed")
            next_tick += period
            delay = next_tick - time.monotonic()
            if delay > 0:
                self._stop.wait(delay)
            else:
                next_tick = time.monotonic()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None
        self.ctx.close()
