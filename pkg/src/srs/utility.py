"""Intrinsic rule utility: causal pathway self-information.

A signal's probability is estimated from automaton structure alone as
``k / n`` where ``k`` counts rules whose backward-completed condition
mentions the signal and ``n`` is the rule-set size. A clause's utility is the
summed self-information of its distinct signals, in bits.

Probabilities are kept as exact rationals so that utility comparisons and
tie detection never depend on float rounding; bit values are derived floats
used only for reporting.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

from .condition import Clause, clause_key, condition_sids, eval_clause
from .core import Rule
from .errors import ConfigurationError, NotFulfilledError


class ClausePick(NamedTuple):
    """One clause of a rule's completed condition with its utility."""

    probability: Fraction  # lower probability = higher utility
    bits: float
    index: int
    clause: Clause


class UtilityTable:
    """Per-signal and per-clause self-information over a completed rule set.

    Immutable after construction; rebuilt whenever the rule set changes.
    """

    def __init__(self, rules: Sequence[Rule],
                 completed: Mapping[str, tuple[Clause, ...]]) -> None:
        self._n = len(rules)
        self._clauses: dict[str, tuple[Clause, ...]] = {
            rule.name: tuple(sorted(completed[rule.name], key=clause_key))
            for rule in rules}
        self._k: dict[str, int] = {}
        for rule in rules:
            for sid in condition_sids(self._clauses[rule.name]):
                self._k[sid] = self._k.get(sid, 0) + 1
        self._picks: dict[str, tuple[ClausePick, ...]] = {}
        self._best: dict[str, ClausePick] = {}

    @property
    def rule_count(self) -> int:
        return self._n

    def dependents(self, sid: str) -> int:
        """Number of rules whose completed condition mentions the signal."""
        return self._k.get(sid, 0)

    def signal_probability(self, sid: str) -> Fraction:
        k = self._k.get(sid, 0)
        if k == 0 or self._n == 0:
            raise ConfigurationError(
                f"signal {sid!r} occurs in no rule condition; "
                "its information is undefined")
        return Fraction(k, self._n)

    def signal_information(self, sid: str) -> float:
        """Self-information of the signal in bits: -log2(k/n)."""
        return -math.log2(self.signal_probability(sid))

    def clause_probability(self, clause: Clause) -> Fraction:
        prob = Fraction(1)
        for sid in sorted({lit.sid for lit in clause}):
            prob *= self.signal_probability(sid)
        return prob

    def clause_information(self, clause: Clause) -> float:
        """Summed self-information of the clause's distinct signals, in bits."""
        prob = self.clause_probability(clause)
        return math.log2(prob.denominator) - math.log2(prob.numerator)

    def clauses(self, rule_name: str) -> tuple[Clause, ...]:
        return self._clauses[rule_name]

    def picks(self, rule_name: str) -> tuple[ClausePick, ...]:
        cached = self._picks.get(rule_name)
        if cached is None:
            cached = tuple(
                ClausePick(self.clause_probability(clause),
                           self.clause_information(clause), i, clause)
                for i, clause in enumerate(self._clauses[rule_name]))
            self._picks[rule_name] = cached
        return cached

    def best(self, rule_name: str) -> ClausePick:
        """Most useful clause regardless of fulfillment (the starred forms)."""
        cached = self._best.get(rule_name)
        if cached is None:
            cached = min(self.picks(rule_name),
                         key=lambda p: (p.probability, p.index))
            self._best[rule_name] = cached
        return cached

    def best_fulfilled(self, rule_name: str, spikes: Iterable) -> ClausePick:
        """Most useful clause among those fulfilled by the given spikes."""
        spikes = tuple(spikes)
        fulfilled = [p for p in self.picks(rule_name)
                     if eval_clause(spikes, p.clause)]
        if not fulfilled:
            raise NotFulfilledError(f"rule {rule_name!r}: no fulfilled clause")
        return min(fulfilled, key=lambda p: (p.probability, p.index))

    def rule_information(self, rule_name: str) -> float:
        """Bits of the rule's most useful clause (its headline utility)."""
        return self.best(rule_name).bits

    def report(self) -> list[tuple[str, float]]:
        """(rule, bits) pairs for diagnostics, in name order."""
        return [(name, self.rule_information(name))
                for name in sorted(self._clauses)]


def mu_star(table: UtilityTable, activation) -> float:
    """Max clause utility of the activation's rule, in bits."""
    return table.best(activation.rule.name).bits


def muc_star(table: UtilityTable, activation) -> Clause:
    """Argmax clause of the activation's rule, unrestricted."""
    return table.best(activation.rule.name).clause


def mu(table: UtilityTable, activation) -> float:
    """Max utility over clauses fulfilled by the activation's spikes."""
    return table.best_fulfilled(activation.rule.name, activation.spikes).bits


def muc(table: UtilityTable, activation) -> Clause:
    """Argmax fulfilled clause of the activation."""
    return table.best_fulfilled(activation.rule.name, activation.spikes).clause
