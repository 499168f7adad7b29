import itertools

from hypothesis import given, settings, strategies as st

from reservematch import (Category, Contract, SubChoiceInput, hierarchical_subchoice,
                          max_horizontal_utilization, merit_subchoice, meritorious_subchoice)
from reservematch.subchoice import resolve


def offers(names):
    return frozenset(Contract(n, "s", Category.OPEN) for n in names)


def who(chosen):
    return {c.individual for c in chosen}


def make(names, capacity, reservations=None, hierarchy=None, types=None):
    return SubChoiceInput(offers(names), capacity, reservations or {}, hierarchy or {},
                          {n: k for k, n in enumerate(names)}, types or {})


# independent oracles -------------------------------------------------------

def utilization_oracle(types, reservations):
    """Try every assignment of individuals to a held type or to nothing."""
    people = list(types)
    best = 0
    for choice in itertools.product(*[[None] + sorted(types[p]) for p in people]):
        used = {}
        for h in choice:
            if h is not None:
                used[h] = used.get(h, 0) + 1
        if all(n <= reservations.get(h, 0) for h, n in used.items()):
            best = max(best, sum(n for n in used.values()))
    return best


def undominated_oracle(names, capacity, reservations, types):
    """All reservation-satisfying sets of the q-acceptant size that nobody dominates."""
    k = min(capacity, len(names))
    rank = {n: i for i, n in enumerate(names)}

    def ok(S):
        return all(sum(h in types.get(i, ()) for i in S) >=
                   min(q, sum(h in types.get(i, ()) for i in names))
                   for h, q in reservations.items())

    def dominates(A, B):
        a, b = sorted(rank[i] for i in A), sorted(rank[i] for i in B)
        return a != b and all(x <= y for x, y in zip(a, b))

    feasible = [set(S) for S in itertools.combinations(names, k) if ok(S)]
    return [S for S in feasible if not any(dominates(T, S) for T in feasible)]


# hierarchical ---------------------------------------------------------------

def test_pure_merit_without_types():
    inp = make(["i1", "i2", "i3"], 2)
    assert who(hierarchical_subchoice(inp)) == {"i1", "i2"}


def test_single_type_reservation():
    types = {"i3": frozenset({"h"})}
    inp = make(["i1", "i2", "i3"], 2, {"h": 1}, {"h": None}, types)
    assert undominated_oracle(["i1", "i2", "i3"], 2, {"h": 1}, types) == [{"i1", "i3"}]
    assert who(hierarchical_subchoice(inp)) == {"i3", "i1"}


def test_nested_types_staged():
    # merit a > c > b > d; w contains dw
    names = ["a", "c", "b", "d"]
    types = {"a": frozenset({"w"}), "b": frozenset({"w", "dw"}), "d": frozenset({"w"})}
    res = {"w": 2, "dw": 1}
    inp = make(names, 3, res, {"w": None, "dw": "w"}, types)
    assert undominated_oracle(names, 3, res, types) == [{"a", "b", "c"}]
    assert who(hierarchical_subchoice(inp)) == {"b", "a", "c"}


def test_unacceptable_individuals_are_never_chosen():
    inp = SubChoiceInput(offers(["x", "y"]), 2, {}, {}, {"x": 0}, {})
    for rule in (hierarchical_subchoice, meritorious_subchoice, merit_subchoice):
        assert who(rule(inp)) == {"x"}


def test_stops_when_capacity_runs_out():
    types = {"i2": frozenset({"a", "b"}), "i3": frozenset({"a", "c"})}
    hierarchy = {"a": None, "b": "a", "c": "a"}
    inp = make(["i1", "i2", "i3"], 1, {"a": 1, "b": 1, "c": 1}, hierarchy, types)
    assert who(hierarchical_subchoice(inp)) == {"i2"}


def test_zero_capacity_and_empty_offers():
    assert hierarchical_subchoice(make(["a"], 0)) == frozenset()
    assert meritorious_subchoice(make([], 3)) == frozenset()


# utilization ----------------------------------------------------------------

def test_utilization_examples():
    assert max_horizontal_utilization({}, {"h1": 1}) == 0
    assert max_horizontal_utilization({"i1": {"h1"}, "i2": {"h1"}}, {"h1": 1}) == 1
    t = {"i1": {"h1", "h2"}, "i2": {"h2"}}
    assert utilization_oracle(t, {"h1": 1, "h2": 1}) == 2
    assert max_horizontal_utilization(t, {"h1": 1, "h2": 1}) == 2


type_sets = st.frozensets(st.sampled_from("abc"), max_size=3)


@settings(max_examples=300, deadline=None)
@given(st.lists(type_sets, max_size=6), st.fixed_dictionaries(
    {"a": st.integers(0, 2), "b": st.integers(0, 2), "c": st.integers(0, 2)}))
def test_utilization_matches_assignment_oracle(held, reservations):
    people = {f"i{k}": t for k, t in enumerate(held)}
    assert max_horizontal_utilization(people, reservations) == utilization_oracle(people, reservations)


# meritorious ----------------------------------------------------------------

def test_meritorious_without_reservations_is_top_q():
    assert who(meritorious_subchoice(make(["a", "b", "c", "d"], 3))) == {"a", "b", "c"}


def test_meritorious_skips_useless_holder():
    types = {"i1": frozenset({"h1"}), "i2": frozenset({"h1"}), "i3": frozenset({"h2"})}
    inp = make(["i1", "i2", "i3"], 2, {"h1": 1, "h2": 1}, {"h1": None, "h2": None}, types)
    assert who(meritorious_subchoice(inp)) == {"i1", "i3"}


def test_meritorious_reassigns_along_augmenting_path():
    types = {"i1": frozenset({"h1", "h2"}), "i2": frozenset({"h2"})}
    inp = make(["i1", "i2", "i3"], 2, {"h1": 1, "h2": 1}, {"h1": None, "h2": None}, types)
    assert utilization_oracle({k: types[k] for k in ("i1", "i2")}, {"h1": 1, "h2": 1}) == 2
    assert who(meritorious_subchoice(inp)) == {"i1", "i2"}


@settings(max_examples=300, deadline=None)
@given(st.lists(type_sets, min_size=0, max_size=7), st.integers(0, 5),
       st.fixed_dictionaries({"a": st.integers(0, 2), "b": st.integers(0, 2),
                              "c": st.integers(0, 2)}))
def test_meritorious_reaches_maximum_utilization(held, capacity, reservations):
    names = [f"i{k}" for k in range(len(held))]
    types = dict(zip(names, held))
    inp = make(names, capacity, reservations, {h: None for h in "abc"}, types)
    out = meritorious_subchoice(inp)
    assert len(out) == min(capacity, len(names))
    got = max_horizontal_utilization({i: types[i] for i in who(out)}, reservations)
    assert got == min(max_horizontal_utilization(types, reservations), capacity)


def test_meritorious_equals_hierarchical_for_one_type():
    # with a single type both rules count a holder once
    for held in itertools.product([frozenset(), frozenset({"h"})], repeat=5):
        names = [f"i{k}" for k in range(5)]
        types = dict(zip(names, held))
        for q in range(6):
            for k in range(3):
                inp = make(names, q, {"h": k}, {"h": None}, types)
                assert hierarchical_subchoice(inp) == meritorious_subchoice(inp)


def test_rule_registry():
    assert resolve("hierarchical") is hierarchical_subchoice
    assert resolve("control-complement").__name__ == "complement_rule"
