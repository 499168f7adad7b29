import itertools
import json
import random

import pytest

from reservematch import (Matching, build_rules, cumulative_offer_process,
                          eliminates_justified_envy, is_stable)
from reservematch.families import desk_instance

from conftest import C, load_fixture, one_institution

x1, x2 = C("i", "Open"), C("i", "SC")
y1, y2 = C("j", "Open"), C("j", "SC")


def test_cop_trace_on_two_person_example(two_person):
    res = cumulative_offer_process(two_person, "hNT")
    assert res.matching.contracts == {x2, y1}
    steps = [(s.proposer, s.contract, s.held, s.rejected) for s in res.trace]
    assert steps == [
        ("i", x2, {x2}, frozenset()),
        ("j", y2, {x2}, {y2}),
        ("j", y1, {x2, y1}, {y2}),
    ]
    lines = [json.loads(l) for l in res.trace_lines().splitlines()]
    assert lines[1]["rejected"] == [["j", "s", "SC"]]


def test_stability_verdicts(two_person):
    v = is_stable({x1, y1}, two_person, "hNT")
    assert not v and v.block == (y2,) and v.witness == (y2,)
    assert is_stable({x1, y2}, two_person, "hNT").stable
    assert is_stable({x2, y1}, two_person, "hNT").stable


def test_envy_verdicts(two_person):
    assert eliminates_justified_envy({x1, y1}, two_person) == (True, None)
    assert eliminates_justified_envy({x1, y2}, two_person) == (False, (x1, y2))
    assert eliminates_justified_envy({x1}, two_person) == (True, None)


def test_lone_applicant_is_matched_in_one_step():
    inst = one_institution([("a", "GC", [], ["Open"])], {"Open": 1})
    res = cumulative_offer_process(inst)
    assert res.matching.contracts == {C("a", "Open")} and len(res.trace) == 1


def test_empty_lists():
    inst = load_fixture("empty_prefs.json")
    res = cumulative_offer_process(inst, "mT")
    assert len(res.matching) == 0 and res.trace == []
    assert is_stable(res.matching, inst, "mT").stable


def test_block_cap_must_be_positive(two_person):
    with pytest.raises(ValueError):
        is_stable(set(), two_person, "hNT", block_cap=0)


def test_reported_individual_rationality_and_rejection(two_person):
    inst = two_person.with_preferences("i", [("s", x1.category)])
    v = is_stable({x2}, inst, "hNT")
    assert v.unacceptable == (x2,)


def stability_oracle(Y, inst, rules):
    """Direct check of the three stability conditions, enumerating every candidate blocking set."""
    Y = frozenset(Y)
    own = {c.individual: c for c in Y}
    for c in Y:
        if inst.individuals[c.individual].rank_of(c.institution, c.category) is None:
            return False
    for s, rule in rules.items():
        Ys = frozenset(c for c in Y if c.institution == s)
        if rule(Ys) != Ys:
            return False
    others = [c for c in inst.all_contracts() if c not in Y]
    for k in range(1, len(others) + 1):
        for Z in itertools.combinations(others, k):
            people = [z.individual for z in Z]
            if len(set(people)) != len(people):
                continue
            better = True
            for z in Z:
                ind = inst.individuals[z.individual]
                r = ind.rank_of(z.institution, z.category)
                cur = own.get(z.individual)
                limit = len(ind.preferences) if cur is None else ind.rank_of(cur.institution, cur.category)
                if r is None or r >= limit:
                    better = False
                    break
            if not better:
                continue
            if all(frozenset(z for z in Z if z.institution == s) <=
                   rules[s](frozenset(c for c in Y if c.institution == s) |
                            frozenset(z for z in Z if z.institution == s))
                   for s in {z.institution for z in Z}):
                return False
    return True


def feasible_matchings(inst):
    people = sorted(inst.individuals)
    options = [[None] + [c for c in inst.all_contracts() if c.individual == i] for i in people]
    for pick in itertools.product(*options):
        yield frozenset(c for c in pick if c is not None)


@pytest.mark.parametrize("variant", ["hNT", "mT"])
def test_stability_agrees_with_definition_oracle(variant):
    rng = random.Random(11)
    checked = 0
    for _ in range(25):
        inst = desk_instance(rng, 2, 3)
        rules = build_rules(inst, variant)
        for Y in feasible_matchings(inst):
            got = is_stable(Y, inst, rules=rules, block_cap=3).stable
            assert got == stability_oracle(Y, inst, rules), sorted(Y)
            checked += 1
    assert checked > 500


def test_cop_outcomes_on_small_markets():
    rng = random.Random(5)
    for _ in range(60):
        inst = desk_instance(rng, 2, 3)
        for variant in ("hNT", "hT", "mNT", "mT"):
            rules = build_rules(inst, variant)
            m = cumulative_offer_process(inst, rules=rules).matching
            assert is_stable(m, inst, rules=rules, block_cap=3).stable
            assert eliminates_justified_envy(m, inst)[0]
            for order, seed in [("highest", None), ("random", 1), ("random", 2)]:
                assert cumulative_offer_process(inst, rules=rules, order=order,
                                                seed=seed).matching == m


def test_callable_proposer_order(two_person):
    res = cumulative_offer_process(two_person, "hNT", order=lambda free: free[-1])
    assert res.trace[0].proposer == "j"
    assert res.matching == Matching(frozenset({x2, y1}))
