"""Condition algebra: evaluation, DNF equivalence, backward completion."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from srs.condition import (And, Lit, Or, RawClauses, SignalExpr,
                           backward_complete, dnf, eval_clause,
                           eval_condition, eval_signal, signal)
from srs.core import INF, EmitSpec, Rule, SignalSpec
from srs.errors import ConfigurationError

from conftest import mkspike


def noop(reads, writes, triggers):
    return None


# ---------------------------------------------------------------------------
# eval_signal


def test_eval_empty_spike_set_is_false():
    assert not eval_signal([], Lit("a"))


def test_eval_matches_sid_and_age():
    assert eval_signal([mkspike("a", age=1)], Lit("a"))
    assert not eval_signal([mkspike("b", age=1)], Lit("a"))
    assert not eval_signal([mkspike("a", age=5)], Lit("a", max_age=3))
    assert not eval_signal([mkspike("a", age=1)], Lit("a", min_age=2))
    assert eval_signal([mkspike("a", age=2)], Lit("a", min_age=2, max_age=2))


def test_eval_tail_requires_matching_cause():
    lit = Lit("a", tail=frozenset({Lit("b")}))
    orphan = mkspike("a")
    assert not eval_signal([orphan], lit)
    b = mkspike("b")
    caused = mkspike("a", cause={b})
    assert eval_signal([caused], lit)


def test_eval_tail_recurses_into_causes():
    lit = Lit("c", tail=frozenset({Lit("b", tail=frozenset({Lit("a")}))}))
    a = mkspike("a")
    b = mkspike("b", cause={a})
    c = mkspike("c", cause={b})
    assert eval_signal([c], lit)
    b_orphan = mkspike("b")
    c_orphan = mkspike("c", cause={b_orphan})
    assert not eval_signal([c_orphan], lit)


# ---------------------------------------------------------------------------
# eval over trees


def test_eval_and_or_basics():
    a, b, c = signal("a"), signal("b"), signal("c")
    spikes = [mkspike("a")]
    assert not eval_condition(spikes, a & b)
    assert eval_condition([mkspike("b")], a | b)
    assert eval_condition([mkspike("a"), mkspike("c")], a & (b | c))


def _tree_oracle(node, present):
    """Independent truth evaluation against a set of present signal names."""
    if isinstance(node, SignalExpr):
        return node.sid in present
    if isinstance(node, And):
        return all(_tree_oracle(ch, present) for ch in node.children)
    if isinstance(node, Or):
        return any(_tree_oracle(ch, present) for ch in node.children)
    raise AssertionError(node)


def _random_tree(rng, names, depth=3):
    if depth == 0 or rng.random() < 0.35:
        return signal(rng.choice(names))
    op = And if rng.random() < 0.5 else Or
    return op(tuple(_random_tree(rng, names, depth - 1)
                    for _ in range(rng.randint(2, 3))))


def test_eval_agrees_with_truth_table_oracle():
    names = ["s0", "s1", "s2", "s3", "s4", "s5"]
    rng = random.Random(7)
    for _ in range(40):
        tree = _random_tree(rng, names)
        for bits in range(2 ** len(names)):
            present = {names[i] for i in range(len(names)) if bits >> i & 1}
            spikes = [mkspike(n) for n in sorted(present)]
            assert eval_condition(spikes, tree) == _tree_oracle(tree, present)


# ---------------------------------------------------------------------------
# dnf


def test_dnf_single_literal():
    assert dnf(signal("a")) == (frozenset({Lit("a")}),)


def test_dnf_distributes_and_over_or():
    clauses = dnf(signal("a") & (signal("b") | signal("c")))
    assert set(clauses) == {frozenset({Lit("a"), Lit("b")}),
                            frozenset({Lit("c"), Lit("a")})}


def test_dnf_deduplicates_and_absorbs():
    a, b = signal("a"), signal("b")
    clauses = dnf(a | (a & b) | a)
    assert clauses == (frozenset({Lit("a")}),)


def test_dnf_explosion_guard():
    cond = signal("x0") | signal("x1")
    for i in range(2, 16):
        cond = cond & (signal(f"x{i}") | signal(f"y{i}"))
    with pytest.raises(ConfigurationError):
        dnf(cond)


def test_dnf_resolves_spec_defaults_and_overrides():
    specs = {"a": SignalSpec("a", min_age=2, max_age=9)}
    (clause,) = dnf(signal("a"), specs)
    (lit,) = clause
    assert (lit.min_age, lit.max_age) == (2, 9)
    (clause,) = dnf(signal("a", min_age=4), specs)
    (lit,) = clause
    assert (lit.min_age, lit.max_age) == (4, 9)


def _clause_oracle(clauses, present):
    return any(all(l.sid in present for l in c) for c in clauses)


def test_dnf_equivalent_to_eval_exhaustive():
    names = ["s0", "s1", "s2", "s3", "s4", "s5"]
    rng = random.Random(13)
    for _ in range(40):
        tree = _random_tree(rng, names)
        clauses = dnf(tree)
        for bits in range(2 ** len(names)):
            present = {names[i] for i in range(len(names)) if bits >> i & 1}
            assert _clause_oracle(clauses, present) == _tree_oracle(tree, present)


@st.composite
def cond_trees(draw, names=("a", "b", "c", "d", "e", "f", "g", "h")):
    def build(depth):
        if depth == 0 or draw(st.booleans()):
            return signal(draw(st.sampled_from(names)))
        op = draw(st.sampled_from([And, Or]))
        n = draw(st.integers(2, 3))
        return op(tuple(build(depth - 1) for _ in range(n)))
    return build(3)


@settings(max_examples=60, deadline=None)
@given(cond_trees(), st.sets(st.sampled_from(["a", "b", "c", "d", "e", "f", "g", "h"])))
def test_dnf_eval_equivalence_property(tree, present):
    clauses = dnf(tree, max_clauses=4096)
    spikes = [mkspike(n) for n in sorted(present)]
    assert eval_condition(spikes, tree) == _clause_oracle(clauses, present)
    assert eval_condition(spikes, tree) == any(
        eval_clause(spikes, c) for c in clauses)


@settings(max_examples=60, deadline=None)
@given(cond_trees())
def test_dnf_absorption_property(tree):
    clauses = dnf(tree, max_clauses=4096)
    for c in clauses:
        for other in clauses:
            if other is not c:
                assert not other < c


# ---------------------------------------------------------------------------
# backward completion


def _fig4_rules():
    emitter = Rule("emitter", signal("input:changed"), noop,
                   emits=[EmitSpec("question")])
    wildtalk = Rule("wildtalk", signal("input:changed"), noop,
                    write_slots=["output"])
    qa = Rule("qa", signal("question"), noop, write_slots=["output"])
    emotion = Rule("emotion", signal("input:changed"), noop,
                   write_slots=["face"])
    for i, r in enumerate([emitter, wildtalk, qa, emotion]):
        r.index = i
    return [emitter, wildtalk, qa, emotion]


def test_completion_folds_emitter_condition_into_consumer():
    rules = _fig4_rules()
    completed = backward_complete(rules)
    (clause,) = completed["qa"]
    sids = sorted(l.sid for l in clause)
    assert sids == ["input:changed", "question"]
    (qlit,) = [l for l in clause if l.sid == "question"]
    assert {t.sid for t in qlit.tail} == {"input:changed"}
    # the others only condition on the externally produced changed-signal
    for name in ("emitter", "wildtalk", "emotion"):
        (clause,) = completed[name]
        assert {l.sid for l in clause} == {"input:changed"}


def test_completion_unemitted_signal_unchanged():
    r = Rule("r", signal("lonely"), noop)
    r.index = 0
    completed = backward_complete([r])
    assert completed["r"] == (frozenset({Lit("lonely")}),)


def test_completion_ignores_detached_emissions():
    a = Rule("a", signal("x"), noop, emits=[EmitSpec("y", detached=True)])
    b = Rule("b", signal("y"), noop, emits=[EmitSpec("x", detached=True)])
    a.index, b.index = 0, 1
    completed = backward_complete([a, b])
    assert completed["a"] == (frozenset({Lit("x")}),)
    assert completed["b"] == (frozenset({Lit("y")}),)


def test_completion_terminates_on_attached_cycle():
    a = Rule("a", signal("x"), noop, emits=[EmitSpec("y")])
    b = Rule("b", signal("y"), noop, emits=[EmitSpec("x")])
    a.index, b.index = 0, 1
    completed = backward_complete([a, b])
    assert completed["a"]
    assert completed["b"]
    (clause,) = completed["b"]
    assert {l.sid for l in clause} == {"x", "y"}


def test_completion_idempotent():
    rules = _fig4_rules()
    once = backward_complete(rules)
    again_rules = []
    for r in rules:
        r2 = Rule(r.name, RawClauses(once[r.name]), noop,
                  write_slots=r.write_slots, emits=r.emits)
        r2.index = r.index
        again_rules.append(r2)
    twice = backward_complete(again_rules)
    for name in once:
        assert set(once[name]) == set(twice[name])


def test_completion_uses_implicit_changed_emitters():
    writer = Rule("writer", signal("go"), noop, write_slots=["out"])
    listener = Rule("listener", signal("out:changed"), noop)
    writer.index, listener.index = 0, 1
    completed = backward_complete(
        [writer, listener],
        implicit_emits={"writer": ("out:changed",)})
    (clause,) = completed["listener"]
    assert {l.sid for l in clause} == {"go", "out:changed"}


def test_completion_multiple_emitters_yield_alternative_clauses():
    e1 = Rule("e1", signal("x"), noop, emits=[EmitSpec("q")])
    e2 = Rule("e2", signal("y"), noop, emits=[EmitSpec("q")])
    consumer = Rule("c", signal("q"), noop)
    for i, r in enumerate([e1, e2, consumer]):
        r.index = i
    completed = backward_complete([e1, e2, consumer])
    sid_sets = {frozenset(l.sid for l in clause) for clause in completed["c"]}
    assert sid_sets == {frozenset({"x", "q"}), frozenset({"y", "q"})}


def test_completion_chain_folds_transitively():
    r1 = Rule("r1", signal("a"), noop, emits=[EmitSpec("b")])
    r2 = Rule("r2", signal("b"), noop, emits=[EmitSpec("c")])
    r3 = Rule("r3", signal("c"), noop)
    for i, r in enumerate([r1, r2, r3]):
        r.index = i
    completed = backward_complete([r1, r2, r3])
    (clause,) = completed["r3"]
    assert {l.sid for l in clause} == {"a", "b", "c"}
    (clit,) = [l for l in clause if l.sid == "c"]
    assert {t.sid for t in clit.tail} == {"a", "b"}


def _full_history_spikes(present_externals, rules, completed):
    """Causally wire spikes per the emit graph, keeping full history.

    Externals get causeless spikes; whenever an emitter's completed clause is
    satisfied, its emitted signals spawn spikes caused by the satisfying set.
    """
    spikes = [mkspike(sid) for sid in sorted(present_externals)]
    changed = True
    produced = set()
    while changed:
        changed = False
        for rule in rules:
            for clause in completed[rule.name]:
                if not eval_clause(spikes, clause):
                    continue
                support = frozenset(
                    s for s in spikes
                    if any(l.sid == s.sid for l in clause))
                for sid in rule.emitted_sids(detached=False):
                    key = (rule.name, sid, support)
                    if key in produced:
                        continue
                    produced.add(key)
                    spikes.append(mkspike(sid, cause=support))
                    changed = True
    return spikes


def test_completion_preserves_eval_on_causally_wired_histories():
    r1 = Rule("r1", signal("a"), noop, emits=[EmitSpec("b")])
    r2 = Rule("r2", signal("b") | signal("e"), noop, emits=[EmitSpec("c")])
    r3 = Rule("r3", signal("c") & signal("a"), noop)
    for i, r in enumerate([r1, r2, r3]):
        r.index = i
    rules = [r1, r2, r3]
    completed = backward_complete(rules)
    for bits in range(4):
        present = {n for i, n in enumerate(["a", "e"]) if bits >> i & 1}
        spikes = _full_history_spikes(present, rules, completed)
        for rule in rules:
            original = eval_condition(spikes, rule.condition)
            done = any(eval_clause(spikes, c) for c in completed[rule.name])
            assert original == done, (rule.name, present)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_completion_terminates_on_random_emit_graphs(data):
    n = data.draw(st.integers(2, 8))
    sids = [f"s{i}" for i in range(n)]
    rules = []
    for i in range(n):
        cond_sids = data.draw(
            st.sets(st.sampled_from(sids), min_size=1, max_size=2))
        emit_sids = data.draw(
            st.sets(st.sampled_from(sids), max_size=2))
        cond = None
        for sid in sorted(cond_sids):
            cond = signal(sid) if cond is None else cond & signal(sid)
        rule = Rule(f"r{i}", cond, noop,
                    emits=[EmitSpec(s) for s in sorted(emit_sids)])
        rule.index = i
        rules.append(rule)
    try:
        completed = backward_complete(rules)
    except ConfigurationError:
        return  # clause-count guard tripping is an acceptable outcome
    assert set(completed) == {r.name for r in rules}
