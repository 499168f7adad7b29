import random

import pytest

from reservematch import Category, GLChoice, make_overall_rule
from reservematch.controls import (complement_rule, even_empty_rule, quota_swap_rule,
                                   reverse_merit_rule)
from reservematch.families import SubUniverse, desk_instance, institution_universe
from reservematch.harness import (
    BOUNDS_ENV, AuditReport, Bounds, Dominance, audit_subchoice_axioms, check_completion_relation,
    check_declaration_order, check_dominance_reduction, check_irc, check_merit_undominated,
    check_order_independence, check_quota_monotonicity, check_size_monotonicity,
    check_strategy_proofness, check_substitutability, check_transfer_monotonicity,
    deviation_count, deviations, immediate_acceptance_process, merit_based_compare,
    merit_compare_by_bijection, offered_to)
from reservematch.model import TransferPolicy, TransferKind
from reservematch.subchoice import hierarchical_subchoice, meritorious_subchoice

from conftest import C, one_institution

PLAIN = SubUniverse((frozenset(),) * 4, {}, {}, 2)
NESTED = SubUniverse((frozenset({"a"}), frozenset(), frozenset({"a", "b"}), frozenset({"a"}),
                      frozenset(), frozenset({"a", "b"}), frozenset()),
                     {"a": 2, "b": 1}, {"a": None, "b": "a"}, 3)


def chooser(rule, su):
    return lambda X: rule(su.input(X))


def quota_chooser(rule, su):
    return lambda X, q: rule(su.input(X, q))


@pytest.mark.parametrize("rule", [hierarchical_subchoice, meritorious_subchoice])
def test_real_rules_pass_with_closed_form_counts(rule):
    U = NESTED.contracts
    for rep in (check_substitutability(chooser(rule, NESTED), U),
                check_size_monotonicity(chooser(rule, NESTED), U),
                check_irc(chooser(rule, NESTED), U),
                check_quota_monotonicity(quota_chooser(rule, NESTED), U, 5)):
        assert rep.passed and rep.count_ok and rep.cases > 0
    assert check_substitutability(chooser(rule, NESTED), U).cases == 7 * 6 * 2 ** 5
    assert check_quota_monotonicity(quota_chooser(rule, NESTED), U, 5).cases == 15 * 2 ** 7


def test_negative_controls_fail_their_checks():
    U = PLAIN.contracts
    sub = check_substitutability(chooser(complement_rule, PLAIN), U)
    assert not sub.passed and sub.witness["C(X+y)"] == frozenset()
    assert not check_size_monotonicity(chooser(even_empty_rule, PLAIN), U).passed
    assert not check_quota_monotonicity(quota_chooser(quota_swap_rule, PLAIN), U, 3).passed
    # reverse merit is unfair but still substitutable
    assert check_substitutability(chooser(reverse_merit_rule, PLAIN), U).passed


def test_failing_report_always_has_witness():
    rep = AuditReport("x")
    rep.fail({"k": 1})
    rep.fail({"k": 2})
    assert not rep and rep.witness == {"k": 1}
    assert rep.to_dict()["verdict"] == "fail"


def test_subchoice_axioms_on_small_bounds():
    b = Bounds(universe_size=4, universes_per_size=10, exhaustive_size=2, capacity=3)
    for kind in ("hierarchical", "meritorious"):
        for rep in audit_subchoice_axioms(kind, b, seed=3):
            assert rep.passed and rep.count_ok, rep.line()


@pytest.mark.parametrize("kind", [TransferKind.NONE, TransferKind.OBC_DERESERVATION])
def test_named_transfer_policies_are_monotone(kind):
    rep = check_transfer_monotonicity(TransferPolicy(kind), bound=2)
    assert rep.passed and rep.count_ok
    k = 6 if kind is TransferKind.OBC_DERESERVATION else 5
    assert rep.cases == 1 + sum(6 ** j for j in range(1, k))


def test_transfer_table_overshoot_fails_second_condition():
    from reservematch import custom_policy
    caps = {Category.OPEN: 1, Category.SC: 1, Category.ST: 0, Category.OBC: 0, Category.EWS: 0}
    rep = check_transfer_monotonicity(custom_policy({Category.SC: {(0,): 1, (1,): 3}}), caps, 2)
    assert not rep.passed and "exceeds" in rep.witness["problem"]


def test_dominance_examples():
    merit = ["i1", "i2", "i3", "i4"]
    assert merit_based_compare({"i1", "i4"}, {"i2", "i3"}, merit) is Dominance.INCOMPARABLE
    assert merit_based_compare({"i1", "i2"}, {"i1", "i2"}, merit) is Dominance.EQUAL
    assert merit_compare_by_bijection({"i1", "i2"}, {"i1", "i3"}, merit) is Dominance.I_DOMINATES
    assert merit_based_compare({"i1", "i2"}, {"i1", "i3"}, merit) is Dominance.I_DOMINATES
    assert merit_based_compare({"i3"}, {"i2"}, merit) is Dominance.J_DOMINATES
    with pytest.raises(ValueError):
        merit_based_compare({"i1"}, {"i2", "i3"}, merit)


def test_dominance_reduction_small():
    rep = check_dominance_reduction(["a", "b", "c", "d"], 3)
    assert rep.passed and rep.count_ok and rep.cases == 1 + 16 + 36 + 16


def test_merit_undominated_checker():
    names = ["i1", "i2", "i3"]
    types = {"i3": frozenset({"h"})}
    merit = {n: k for k, n in enumerate(names)}
    assert check_merit_undominated({"i1", "i3"}, names, {"h": 1}, 2, merit, types).passed
    # swapping in a lower-merit holder of no extra type is dominated
    assert not check_merit_undominated({"i2", "i3"}, names, {"h": 1}, 2, merit, types).passed
    assert check_merit_undominated(names, names, {"h": 1}, 5, merit, types).passed
    infeasible = check_merit_undominated({"i1"}, ["i1", "i2", "i3"],
                                         {"h": 1, "g": 1}, 1, merit,
                                         {"i2": frozenset({"h"}), "i3": frozenset({"g"})})
    assert infeasible.passed and infeasible.skipped == 1


def test_declaration_order_skips_infeasible_case():
    su = SubUniverse((frozenset({"a", "b"}), frozenset({"a", "c"})), {"a": 1, "b": 1, "c": 1},
                     {"a": None, "b": "a", "c": "a"}, 1)
    rep = check_declaration_order(su)
    assert rep.skipped == 1 and rep.cases == 0
    rep = check_declaration_order(NESTED)
    assert rep.passed and rep.count_ok


def test_completion_relation_and_divergence():
    inst = one_institution([("i", "SC", [], ["Open", "SC"])],
                           {"Open": 1, "SC": 1, "ST": 0, "OBC": 0, "EWS": 0})
    rule = GLChoice(inst, "s")
    rep = check_completion_relation(rule, [C("i", "Open"), C("i", "SC")])
    assert rep.passed and rep.cases == 4
    assert rule.complete({C("i", "Open"), C("i", "SC")}) != rule({C("i", "Open"), C("i", "SC")})
    assert check_completion_relation(rule, []).cases == 1


def test_completion_on_institution_universes():
    rng = random.Random(9)
    for _ in range(30):
        inst = institution_universe(rng, 6)
        U = sorted(offered_to(inst, "s"))
        for v in ("hT", "mNT"):
            rule = GLChoice(inst, "s", make_overall_rule(v, inst))
            assert check_completion_relation(rule, U).passed
            assert check_irc(rule.complete, U).passed
            assert check_substitutability(rule.complete, U).passed


def boston_instance():
    return one_institution(
        [("i", "GC", [], []), ("j", "GC", [], []), ("k", "GC", [], [])], {"Open": 1})


def test_strategy_proofness_and_faulty_engine():
    from reservematch import validate_instance
    raw = {"institutions": [{"id": "a", "capacity": {"Open": 1}, "merit": ["j", "i", "k"]},
                            {"id": "b", "capacity": {"Open": 1}, "merit": ["i", "k"]}],
           "individuals": [
               {"id": "i", "vertical": "GC", "preferences": [["a", "Open"], ["b", "Open"]]},
               {"id": "j", "vertical": "GC", "preferences": [["a", "Open"], ["b", "Open"]]},
               {"id": "k", "vertical": "GC", "preferences": [["b", "Open"]]}]}
    inst = validate_instance(raw)
    assert check_strategy_proofness(inst, "hNT").passed
    rep = check_strategy_proofness(inst, "hNT", engine=immediate_acceptance_process)
    assert not rep.passed and rep.witness["individual"] == "i"
    assert rep.witness["misreport_outcome"].institution == "b"


def test_empty_true_list_cannot_gain():
    inst = one_institution([("a", "GC", [], []), ("b", "SC", [], ["SC"])],
                           {"Open": 1, "SC": 1, "ST": 0, "OBC": 0, "EWS": 0})
    rep = check_strategy_proofness(inst, "hT")
    assert rep.passed and rep.cases == deviation_count(1) + deviation_count(2)


def test_deviation_enumeration():
    pairs = ["p", "q", "r"]
    got = list(deviations(pairs))
    assert len(got) == deviation_count(3) == 1 + 3 + 6 + 6
    assert () in got and len(set(got)) == len(got)
    assert deviation_count(6, 2) == 1 + 6 + 30


def test_case_budget_marks_partial():
    rng = random.Random(2)
    inst = desk_instance(rng, 2, 3)
    rep = check_strategy_proofness(inst, "hNT", case_budget=3)
    assert rep.partial and rep.cases == 3


def test_order_independence_report():
    rng = random.Random(4)
    rep = check_order_independence(desk_instance(rng, 2, 3), "mT")
    assert rep.passed and rep.cases == 12


def test_bounds_parsing(monkeypatch):
    assert Bounds.parse("universe_size=5, capacity=3").universe_size == 5
    assert Bounds.parse('{"q_max": 2}').q_max == 2
    with pytest.raises(ValueError):
        Bounds.parse("nonsense=1")
    monkeypatch.setenv(BOUNDS_ENV, "capacity=2,q_max=3")
    b = Bounds.from_env("q_max=4")
    assert (b.capacity, b.q_max, b.universe_size) == (2, 4, 7)


def test_reports_are_deterministic():
    b = Bounds(universe_size=4, universes_per_size=5, exhaustive_size=1)
    one = [r.to_dict() for r in audit_subchoice_axioms("meritorious", b, seed=42)]
    two = [r.to_dict() for r in audit_subchoice_axioms("meritorious", b, seed=42)]
    for r in one + two:
        r.pop("elapsed")
    assert one == two
