"""Causal pathway self-information and maximum-utility-clause selection."""

import math
from fractions import Fraction

import pytest

from srs.condition import Lit, backward_complete, signal
from srs.core import EmitSpec, Rule
from srs.errors import ConfigurationError, NotFulfilledError
from srs.utility import UtilityTable, mu, mu_star, muc, muc_star

from conftest import mkspike


def noop(reads, writes, triggers):
    return None


def make_rules(specs):
    """specs: list of (name, condition, emits). Returns completed table."""
    rules = []
    for i, (name, cond, emits) in enumerate(specs):
        rule = Rule(name, cond, noop, emits=[EmitSpec(s) for s in emits])
        rule.index = i
        rules.append(rule)
    return rules, backward_complete(rules)


class FakeActivation:
    def __init__(self, rule, spikes=()):
        self.rule = rule
        self.spikes = frozenset(spikes)


def test_ubiquitous_signal_carries_no_information():
    rules, completed = make_rules([
        (f"r{i}", signal("common"), ()) for i in range(4)])
    table = UtilityTable(rules, completed)
    assert table.signal_information("common") == 0.0


def test_information_from_dependent_counts():
    specs = [("r0", signal("rare") & signal("common"), ()),
             ("r1", signal("common") & signal("half"), ()),
             ("r2", signal("common") & signal("half"), ()),
             ("r3", signal("common"), ())]
    rules, completed = make_rules(specs)
    table = UtilityTable(rules, completed)
    assert table.signal_information("rare") == 2.0       # 1 of 4
    assert table.signal_information("half") == 1.0       # 2 of 4
    assert table.signal_information("common") == 0.0     # 4 of 4
    assert table.signal_probability("half") == Fraction(1, 2)


def test_unreferenced_signal_is_an_error():
    rules, completed = make_rules([("r0", signal("a"), ())])
    table = UtilityTable(rules, completed)
    with pytest.raises(ConfigurationError):
        table.signal_information("ghost")


def test_clause_information_sums_signal_information():
    specs = [("r0", signal("a") & signal("b"), ()),
             ("r1", signal("a"), ()),
             ("r2", signal("c"), ()),
             ("r3", signal("c"), ())]
    rules, completed = make_rules(specs)
    table = UtilityTable(rules, completed)
    clause = frozenset({Lit("a"), Lit("b")})
    expected = table.signal_information("a") + table.signal_information("b")
    assert table.clause_information(clause) == pytest.approx(expected)


def test_clause_information_counts_each_signal_once():
    rules, completed = make_rules([("r0", signal("a"), ()),
                                   ("r1", signal("b"), ())])
    table = UtilityTable(rules, completed)
    clause = frozenset({Lit("a"), Lit("a", min_age=3)})
    assert table.clause_information(clause) == table.signal_information("a")


def test_additivity_over_disjoint_clause_union():
    specs = [("r0", signal("a") & signal("b"), ()),
             ("r1", signal("c"), ()),
             ("r2", signal("d") & signal("c"), ()),
             ("r3", signal("a"), ())]
    rules, completed = make_rules(specs)
    table = UtilityTable(rules, completed)
    left = frozenset({Lit("a"), Lit("b")})
    right = frozenset({Lit("c"), Lit("d")})
    assert table.clause_information(left | right) == pytest.approx(
        table.clause_information(left) + table.clause_information(right))


def _fig4_table():
    specs = [("emitter", signal("input:changed"), ("question",)),
             ("wildtalk", signal("input:changed"), ()),
             ("qa", signal("question"), ()),
             ("emotion", signal("input:changed"), ())]
    rules, completed = make_rules(specs)
    return rules, UtilityTable(rules, completed)


def test_arbitration_example_utilities_exact():
    rules, table = _fig4_table()
    # completed qa clause is {input:changed, question}: 0 + 2 bits, exactly
    assert table.rule_information("wildtalk") == 0.0
    assert table.rule_information("qa") == 2.0
    assert table.best("qa").probability == Fraction(1, 4)
    assert table.best("wildtalk").probability == Fraction(1, 1)


def test_mu_star_vs_mu_gating():
    specs = [("two", signal("rare") | signal("common"), ()),
             ("r1", signal("common"), ()),
             ("r2", signal("common"), ()),
             ("r3", signal("common"), ())]
    rules, completed = make_rules(specs)
    table = UtilityTable(rules, completed)
    act = FakeActivation(rules[0], [mkspike("common")])
    # the fulfilled clause carries 0 bits; the unfulfilled one 2 bits
    assert mu(table, act) == 0.0
    assert mu_star(table, act) == 2.0
    assert muc(table, act) == frozenset({Lit("common")})
    assert muc_star(table, act) == frozenset({Lit("rare")})


def test_mu_requires_a_fulfilled_clause():
    rules, table = _fig4_table()
    act = FakeActivation(rules[2], [])
    with pytest.raises(NotFulfilledError):
        mu(table, act)


def test_single_clause_rule_muc_is_that_clause():
    rules, table = _fig4_table()
    act = FakeActivation(rules[1], [mkspike("input:changed")])
    assert muc(table, act) == muc_star(table, act)
    assert mu(table, act) == mu_star(table, act)


def test_mu_never_exceeds_mu_star():
    specs = [("multi", (signal("a") & signal("b")) | signal("c"), ()),
             ("r1", signal("c"), ()),
             ("r2", signal("c") & signal("b"), ()),
             ("r3", signal("a"), ())]
    rules, completed = make_rules(specs)
    table = UtilityTable(rules, completed)
    for present in ([], ["c"], ["a", "b"], ["a", "b", "c"]):
        act = FakeActivation(rules[0], [mkspike(s) for s in present])
        try:
            assert mu(table, act) <= mu_star(table, act) + 1e-12
        except NotFulfilledError:
            pass


def test_adding_dependent_rule_never_raises_information():
    base = [("r0", signal("x") & signal("y"), ()),
            ("r1", signal("y"), ())]
    rules, completed = make_rules(base)
    before = UtilityTable(rules, completed).signal_information("x")
    extended = base + [("r2", signal("x"), ())]
    rules2, completed2 = make_rules(extended)
    after = UtilityTable(rules2, completed2).signal_information("x")
    assert after <= before


def test_ordering_invariant_under_log_base():
    specs = [("r0", signal("a") & signal("b"), ()),
             ("r1", signal("b"), ()),
             ("r2", signal("c"), ()),
             ("r3", signal("c") & signal("a"), ())]
    rules, completed = make_rules(specs)
    table = UtilityTable(rules, completed)
    clauses = [frozenset({Lit("a")}), frozenset({Lit("b"), Lit("c")}),
               frozenset({Lit("a"), Lit("b"), Lit("c")})]

    def nat_bits(clause):  # alternative base: natural log
        return sum(-math.log(table.signal_probability(l.sid))
                   for l in clause)

    by_bits = sorted(range(3), key=lambda i: table.clause_information(clauses[i]))
    by_nat = sorted(range(3), key=lambda i: nat_bits(clauses[i]))
    by_prob = sorted(range(3), key=lambda i: table.clause_probability(clauses[i]),
                     reverse=True)
    assert by_bits == by_nat == by_prob


def test_equal_rarity_recovers_clause_size_ordering():
    # every signal appears in exactly one rule: information is uniform,
    # so clause utility orders by clause size (count specificity)
    specs = [("r0", signal("a") & signal("b") & signal("c"), ()),
             ("r1", signal("d") & signal("e"), ()),
             ("r2", signal("f"), ())]
    rules, completed = make_rules(specs)
    table = UtilityTable(rules, completed)
    u3 = table.rule_information("r0")
    u2 = table.rule_information("r1")
    u1 = table.rule_information("r2")
    assert u3 > u2 > u1


def _rarity_breakdown_rules():
    """Six rules; two 3-signal rules differ only in unique-signal rarity."""
    specs = [
        ("stimulus", signal("input:changed"),
         ("shared1", "shared2", "unique_rare", "unique_common")),
        ("offer", signal("shared1") & signal("shared2") & signal("unique_rare"), ()),
        ("persqa", signal("shared1") & signal("shared2") & signal("unique_common"), ()),
        ("extra1", signal("unique_common"), ()),
        ("extra2", signal("unique_common"), ()),
        ("extra3", signal("shared1"), ()),
    ]
    return make_rules(specs)


def test_count_specificity_breakdown_resolved_by_rarity():
    rules, completed = make_rules_cached = _rarity_breakdown_rules()
    table = UtilityTable(rules, completed)
    # both contenders have equally sized completed clauses: count ties
    (offer_clause,) = table.clauses("offer")
    (persqa_clause,) = table.clauses("persqa")
    assert len(offer_clause) == len(persqa_clause)
    # independent recount of the structural estimate
    n = len(rules)
    k = {}
    for rule in rules:
        for sid in {l.sid for c in completed[rule.name] for l in c}:
            k[sid] = k.get(sid, 0) + 1
    expected_offer = sum(-math.log2(k[sid] / n)
                         for sid in {l.sid for l in offer_clause})
    assert table.rule_information("offer") == pytest.approx(expected_offer)
    assert k["unique_rare"] == 1
    assert k["unique_common"] == 3
    assert table.rule_information("offer") > table.rule_information("persqa")
