"""Condition algebra: construction, evaluation, DNF, backward completion.

Conditions are Boolean trees over signal literals. A literal carries concrete
age bounds and a tail of cause qualifiers once resolved against the registered
signal templates. Backward completion rewrites rule conditions so that every
condition signal is accompanied by the conditions of the rules that can emit
it, letting the scheduler anticipate competitors along causal pathways.

All functions here are pure over immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Optional, Sequence, Union

from .core import INF, Rule, SignalSpec
from .errors import ConfigurationError

MAX_DNF_CLAUSES = 64
MAX_COMPLETED_CLAUSES = 256


@dataclass(frozen=True)
class Lit:
    """A resolved signal literal: sid, concrete age window, cause qualifiers."""

    sid: str
    min_age: int = 0
    max_age: Union[int, float] = INF
    tail: frozenset["Lit"] = frozenset()

    def as_tail(self) -> "Lit":
        """Age-free copy for use as a cause qualifier.

        Age windows describe when the *holder* matches; a cause spike keeps
        aging after its offspring is emitted, so tails only pin causal
        structure, never age.
        """
        return Lit(self.sid, 0, INF, frozenset(t.as_tail() for t in self.tail))

    def __repr__(self) -> str:
        bits = self.sid
        if self.min_age != 0 or self.max_age != INF:
            hi = "inf" if self.max_age == INF else self.max_age
            bits += f"[{self.min_age},{hi}]"
        if self.tail:
            bits += "<-{" + ",".join(sorted(t.sid for t in self.tail)) + "}"
        return bits


Clause = frozenset  # frozenset[Lit]


def _lit_key(lit: Lit) -> tuple:
    return (lit.sid, lit.min_age, lit.max_age,
            tuple(sorted(_lit_key(t) for t in lit.tail)))


def clause_key(clause: Clause) -> tuple:
    return tuple(sorted(_lit_key(l) for l in clause))


class Cond:
    """Base class for condition expression trees."""

    def __and__(self, other: "Cond") -> "Cond":
        return And((self, other))

    def __or__(self, other: "Cond") -> "Cond":
        return Or((self, other))


@dataclass(frozen=True)
class SignalExpr(Cond):
    """Condition leaf referencing one signal, with optional overrides.

    ``min_age``/``max_age`` of ``None`` inherit the registered template's
    bounds; ``tail`` entries extend the template's tail.
    """

    sid: str
    min_age: Optional[int] = None
    max_age: Optional[Union[int, float]] = None
    tail: tuple[str, ...] = ()


@dataclass(frozen=True)
class And(Cond):
    children: tuple[Cond, ...]


@dataclass(frozen=True)
class Or(Cond):
    children: tuple[Cond, ...]


@dataclass(frozen=True)
class RawClauses(Cond):
    """A condition given directly in DNF (used by completion and tests)."""

    clauses: tuple[Clause, ...]


def signal(sid: str, min_age: Optional[int] = None,
           max_age: Optional[Union[int, float]] = None,
           tail: Iterable[str] = ()) -> SignalExpr:
    """Condition leaf for the named signal."""
    return SignalExpr(sid, min_age, max_age, tuple(tail))


def resolve_literal(expr: SignalExpr,
                    specs: Optional[Mapping[str, SignalSpec]] = None,
                    _seen: frozenset[str] = frozenset()) -> Lit:
    """Resolve a leaf against registered templates into a concrete literal."""
    spec = (specs or {}).get(expr.sid)
    min_age = expr.min_age if expr.min_age is not None else (spec.min_age if spec else 0)
    max_age = expr.max_age if expr.max_age is not None else (spec.max_age if spec else INF)
    if max_age < min_age:
        raise ConfigurationError(f"literal {expr.sid!r}: max_age < min_age")
    tail_sids = tuple(expr.tail) + (spec.tail if spec else ())
    tails = []
    for tsid in tail_sids:
        if tsid in _seen or tsid == expr.sid:
            raise ConfigurationError(f"circular tail reference through {tsid!r}")
        tails.append(resolve_literal(SignalExpr(tsid), specs,
                                     _seen | {expr.sid}).as_tail())
    return Lit(expr.sid, min_age, max_age, frozenset(tails))


def _absorb(clauses: Iterable[Clause]) -> tuple[Clause, ...]:
    """Deduplicate and drop clauses that are supersets of other clauses."""
    unique = sorted(set(clauses), key=clause_key)
    kept: list[Clause] = []
    for c in unique:
        if not any(other < c for other in unique if other is not c):
            kept.append(c)
    return tuple(kept)


def dnf(cond: Cond, specs: Optional[Mapping[str, SignalSpec]] = None,
        max_clauses: int = MAX_DNF_CLAUSES) -> tuple[Clause, ...]:
    """Disjunctive normal form as a tuple of conjunct literal sets.

    Clauses are deduplicated, absorbed (no clause is a superset of another)
    and returned in a canonical order. Conditions whose DNF exceeds
    ``max_clauses`` are rejected.
    """

    def walk(node: Cond) -> list[frozenset[Lit]]:
        if isinstance(node, SignalExpr):
            return [frozenset((resolve_literal(node, specs),))]
        if isinstance(node, RawClauses):
            return [frozenset(c) for c in node.clauses]
        if isinstance(node, Or):
            out: list[frozenset[Lit]] = []
            for child in node.children:
                out.extend(walk(child))
            return out
        if isinstance(node, And):
            acc: list[frozenset[Lit]] = [frozenset()]
            for child in node.children:
                branches = walk(child)
                acc = [a | b for a in acc for b in branches]
                if len(acc) > max_clauses * 4:
                    raise ConfigurationError(
                        f"condition DNF exceeds {max_clauses} clauses")
            return acc
        raise ConfigurationError(f"unknown condition node {node!r}")

    clauses = _absorb(walk(cond))
    if len(clauses) > max_clauses:
        raise ConfigurationError(f"condition DNF exceeds {max_clauses} clauses")
    if any(not c for c in clauses):
        raise ConfigurationError("empty conjunct clause in condition")
    return clauses


def eval_signal(spikes: Iterable, lit: Lit) -> bool:
    """True iff some spike matches the literal.

    A spike matches when its sid equals the literal's, its age lies inside the
    literal's window, and every tail qualifier is matched by the spike's
    direct causes (recursively).
    """
    for spike in spikes:
        if spike.sid != lit.sid:
            continue
        if not (lit.min_age <= spike.age <= lit.max_age):
            continue
        if all(eval_signal(spike.cause, t) for t in lit.tail):
            return True
    return False


def eval_clause(spikes: Iterable, clause: Clause) -> bool:
    return all(eval_signal(spikes, lit) for lit in clause)


def eval_condition(spikes, cond: Cond,
                   specs: Optional[Mapping[str, SignalSpec]] = None) -> bool:
    """Recursive Boolean evaluation with ``eval_signal`` at the leaves."""
    spikes = tuple(spikes)
    if isinstance(cond, SignalExpr):
        return eval_signal(spikes, resolve_literal(cond, specs))
    if isinstance(cond, RawClauses):
        return any(eval_clause(spikes, c) for c in cond.clauses)
    if isinstance(cond, Or):
        return any(eval_condition(spikes, c, specs) for c in cond.children)
    if isinstance(cond, And):
        return all(eval_condition(spikes, c, specs) for c in cond.children)
    raise ConfigurationError(f"unknown condition node {cond!r}")


def condition_sids(clauses: Iterable[Clause]) -> frozenset[str]:
    return frozenset(lit.sid for clause in clauses for lit in clause)


def backward_complete(rules: Sequence[Rule],
                      specs: Optional[Mapping[str, SignalSpec]] = None,
                      implicit_emits: Optional[Mapping[str, Iterable[str]]] = None,
                      max_clauses: int = MAX_COMPLETED_CLAUSES,
                      ) -> dict[str, tuple[Clause, ...]]:
    """Backward-complete every rule's condition across the rule set.

    For each condition signal and each *other* rule that emits it
    non-detached, every clause of the emitter's (recursively completed)
    condition is conjoined in, and the signal's tail is extended with that
    clause's signals. Detached emissions are never folded in. Cycles
    terminate through a visited set of (emitter, signal) pairs per expansion
    chain.

    ``implicit_emits`` maps rule names to extra signal ids they effectively
    emit (the changed-signals of their write slots).

    Returns a mapping of rule name to completed DNF clauses; the rules'
    authored conditions are left untouched.
    """
    implicit_emits = implicit_emits or {}
    emitters: dict[str, list[str]] = {}
    for rule in rules:
        sids = list(rule.emitted_sids(detached=False))
        sids += [s for s in implicit_emits.get(rule.name, ()) if s not in sids]
        for sid in sids:
            lst = emitters.setdefault(sid, [])
            if rule.name not in lst:
                lst.append(rule.name)

    base = {rule.name: dnf(rule.condition, specs) for rule in rules}
    budget = [max_clauses * 16]  # caps intermediate expansion blowup

    def spend() -> None:
        budget[0] -= 1
        if budget[0] < 0:
            raise ConfigurationError(
                f"backward completion exceeds {max_clauses} clauses")

    def completed_clauses(name: str, chain: frozenset) -> tuple[Clause, ...]:
        out: list[Clause] = []
        for clause in base[name]:
            out.extend(complete_clause(name, clause, chain))
        return _absorb(out)

    def complete_clause(name: str, clause: Clause, chain: frozenset) -> list[Clause]:
        for lit in sorted(clause, key=_lit_key):
            candidates = [q for q in emitters.get(lit.sid, ())
                          if q != name and (q, lit.sid) not in chain]
            expansions = []
            for q in candidates:
                # committing to one emitter alternative: alternatives become
                # separate clauses, never merged conjunctions
                subchain = chain | {(qq, lit.sid) for qq in candidates}
                for c_q in completed_clauses(q, subchain):
                    new_lit = replace(
                        lit, tail=lit.tail | frozenset(t.as_tail() for t in c_q))
                    new_clause = frozenset((clause - {lit}) | {new_lit} | c_q)
                    if new_clause != clause:
                        spend()
                        expansions.append((new_clause, subchain))
            if expansions:
                results: list[Clause] = []
                for new_clause, subchain in expansions:
                    results.extend(complete_clause(name, new_clause, subchain))
                return results
        return [clause]

    completed: dict[str, tuple[Clause, ...]] = {}
    for rule in rules:
        clauses = completed_clauses(rule.name, frozenset())
        if len(clauses) > max_clauses:
            raise ConfigurationError(
                f"rule {rule.name!r}: completed condition exceeds {max_clauses} clauses")
        completed[rule.name] = clauses
    return completed
