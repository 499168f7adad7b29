"""Exhaustive property checks over small universes.

Every check returns an :class:`AuditReport`.  Subset-based checks first
tabulate the rule on every subset of the universe (as bitmasks) and then
test the axiom against the table, so each rule evaluation happens once.
"""
from __future__ import annotations

import enum
import itertools
import json
import math
import os
import random
import time
from dataclasses import asdict, dataclass, fields, replace
from typing import Callable, Iterable, Mapping, Sequence

from .choice import (GLChoice, VARIANTS, build_rules, is_fair_violation,
                     make_overall_rule, transfer_capacity_identity, transfer_monotonicity_cases)
from .com import cumulative_offer_process, eliminates_justified_envy, is_stable
from .families import (SubUniverse, desk_family, institution_universe, laminar_family,
                       small_subchoice_universes, subchoice_universes)
from .model import (Category, ChoiceConfig, Contract, GENERAL, Instance, Matching,
                    TransferKind, TransferPolicy, VERTICAL, validate_instance)
from .subchoice import SubChoiceInput, hierarchical_subchoice, meritorious_subchoice

BOUNDS_ENV = "RESERVEMATCH_BOUNDS"


# ---------------------------------------------------------------------------
# reports

def jsonable(value):
    if isinstance(value, Contract):
        return [value.individual, value.institution, value.category.value]
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, Mapping):
        return {str(jsonable(k)) if not isinstance(k, str) else k: jsonable(v)
                for k, v in value.items()}
    if isinstance(value, (frozenset, set)):
        return sorted((jsonable(v) for v in value), key=lambda v: json.dumps(v))
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    return value


@dataclass
class AuditReport:
    name: str
    universe: str = ""
    cases: int = 0
    passed: bool = True
    witness: object = None
    skipped: int = 0
    #: closed-form number of cases, when the universe has one
    expected_cases: "int | None" = None
    #: True when a budget cut the enumeration short
    partial: bool = False
    elapsed: float = 0.0

    def __bool__(self) -> bool:
        return self.passed

    def fail(self, witness) -> None:
        if self.passed:
            self.passed = False
            self.witness = witness

    def absorb(self, other: "AuditReport", where=None) -> None:
        """Fold a sub-report into this one, keeping the first witness."""
        self.cases += other.cases
        self.skipped += other.skipped
        self.partial = self.partial or other.partial
        if self.expected_cases is not None:
            self.expected_cases = (None if other.expected_cases is None
                                   else self.expected_cases + other.expected_cases)
        if not other.passed:
            self.fail({"where": where, "witness": other.witness} if where is not None
                      else other.witness)

    @property
    def count_ok(self) -> bool:
        return self.expected_cases is None or self.expected_cases == self.cases

    def to_dict(self) -> dict:
        out = asdict(self)
        out["witness"] = jsonable(self.witness)
        out["verdict"] = "pass" if self.passed else "fail"
        out["elapsed"] = round(self.elapsed, 3)
        return out

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        extra = f", skipped {self.skipped}" if self.skipped else ""
        extra += ", partial" if self.partial else ""
        return f"{verdict} {self.name}: {self.cases} cases{extra} ({self.universe})"


class _Timer:
    def __init__(self, report: AuditReport):
        self.report = report

    def __enter__(self):
        self.start = time.perf_counter()
        return self.report

    def __exit__(self, *exc):
        self.report.elapsed += time.perf_counter() - self.start
        return False


# ---------------------------------------------------------------------------
# subset-table checks

Chooser = Callable[[frozenset], frozenset]


def _bits(universe: Sequence[Contract]) -> dict:
    return {c: 1 << k for k, c in enumerate(universe)}


def _subset(mask: int, universe: Sequence) -> frozenset:
    return frozenset(c for k, c in enumerate(universe) if mask >> k & 1)


def _table(choose: Chooser, universe: Sequence[Contract]) -> list:
    bit = _bits(universe)
    table = []
    for mask in range(1 << len(universe)):
        out = choose(_subset(mask, universe))
        m = 0
        for c in out:
            if c not in bit or not mask & bit[c]:
                raise ValueError(f"rule chose {c} which was not offered")
            m |= bit[c]
        table.append(m)
    return table


def check_substitutability(choose: Chooser, universe: Sequence[Contract],
                           name: str = "substitutability") -> AuditReport:
    """A contract rejected from ``X+y`` stays rejected from ``X+x+y``."""
    universe = list(universe)
    n = len(universe)
    rep = AuditReport(name, f"{n} contracts", expected_cases=n * (n - 1) * 2 ** max(n - 2, 0))
    with _Timer(rep):
        t = _table(choose, universe)
        for X in range(1 << n):
            free = [1 << k for k in range(n) if not X >> k & 1]
            for y in free:
                rejected = not t[X | y] & y
                for x in free:
                    if x == y:
                        continue
                    rep.cases += 1
                    if rejected and t[X | x | y] & y and rep.passed:
                        rep.fail({"X": _subset(X, universe), "x": universe[x.bit_length() - 1],
                                  "y": universe[y.bit_length() - 1],
                                  "C(X+y)": _subset(t[X | y], universe),
                                  "C(X+x+y)": _subset(t[X | x | y], universe)})
    return rep


def check_size_monotonicity(choose: Chooser, universe: Sequence[Contract],
                            name: str = "size_monotonicity") -> AuditReport:
    """Adding an offer never shrinks the chosen set."""
    universe = list(universe)
    n = len(universe)
    rep = AuditReport(name, f"{n} contracts", expected_cases=n * 2 ** max(n - 1, 0))
    with _Timer(rep):
        t = _table(choose, universe)
        for X in range(1 << n):
            for k in range(n):
                x = 1 << k
                if X & x:
                    continue
                rep.cases += 1
                if bin(t[X]).count("1") > bin(t[X | x]).count("1"):
                    rep.fail({"X": _subset(X, universe), "x": universe[k],
                              "C(X)": _subset(t[X], universe),
                              "C(X+x)": _subset(t[X | x], universe)})
    return rep


def check_irc(choose: Chooser, universe: Sequence[Contract],
              name: str = "irc") -> AuditReport:
    """Removing a rejected contract leaves the choice unchanged."""
    universe = list(universe)
    n = len(universe)
    rep = AuditReport(name, f"{n} contracts", expected_cases=n * 2 ** max(n - 1, 0))
    with _Timer(rep):
        t = _table(choose, universe)
        for X in range(1 << n):
            for k in range(n):
                z = 1 << k
                if X & z:
                    continue
                rep.cases += 1
                if not t[X | z] & z and t[X | z] != t[X]:
                    rep.fail({"X": _subset(X, universe), "z": universe[k],
                              "C(X)": _subset(t[X], universe),
                              "C(X+z)": _subset(t[X | z], universe)})
    return rep


def check_quota_monotonicity(choose_q: Callable[[frozenset, int], frozenset],
                             universe: Sequence[Contract], q_max: int,
                             name: str = "quota_monotonicity") -> AuditReport:
    """``C(Y,q)`` grows with ``q``, by at most the capacity added."""
    universe = list(universe)
    n = len(universe)
    pairs = [(q, r) for q in range(q_max + 1) for r in range(q + 1, q_max + 1)]
    rep = AuditReport(name, f"{n} contracts, q <= {q_max}", expected_cases=len(pairs) * 2 ** n)
    with _Timer(rep):
        tables = [_table(lambda X, q=q: choose_q(X, q), universe) for q in range(q_max + 1)]
        for Y in range(1 << n):
            for q, r in pairs:
                rep.cases += 1
                small, big = tables[q][Y], tables[r][Y]
                if small & ~big or bin(big).count("1") - bin(small).count("1") > r - q:
                    rep.fail({"Y": _subset(Y, universe), "q": q, "q'": r,
                              "C(Y,q)": _subset(small, universe),
                              "C(Y,q')": _subset(big, universe)})
    return rep


def check_completion_relation(rule: GLChoice, universe: Sequence[Contract],
                              name: str = "completion") -> AuditReport:
    """The completion agrees with the rule unless it holds two contracts of someone."""
    universe = list(universe)
    n = len(universe)
    rep = AuditReport(name, f"{n} contracts at {rule.institution.id}", expected_cases=2 ** n)
    with _Timer(rep):
        for mask in range(1 << n):
            X = _subset(mask, universe)
            rep.cases += 1
            full = rule.complete(X)
            if full == rule(X):
                continue
            people = [c.individual for c in full]
            if len(people) == len(set(people)):
                rep.fail({"X": X, "C(X)": rule(X), "completion(X)": full})
    return rep


def check_transfer_monotonicity(config: "ChoiceConfig | TransferPolicy",
                                capacities: Mapping[Category, int] | None = None,
                                bound: int = 4, category_count: int | None = None) -> AuditReport:
    """Both monotonicity conditions plus the zero-vacancy capacity identity.

    All vacancy vectors ``r <= r~`` with entries up to ``bound`` are tried at
    every position after the first.
    """
    if isinstance(config, TransferPolicy):
        precedence = tuple(VERTICAL)
        if config.kind is TransferKind.OBC_DERESERVATION:
            precedence += (Category.DERESERVED,)
        config = ChoiceConfig(precedence, {}, config)
    if category_count is not None and category_count != len(config.precedence):
        raise ValueError("category_count does not match the precedence order")
    if capacities is None:
        capacities = {c: 2 for c in VERTICAL}
    per_coord = (bound + 1) * (bound + 2) // 2
    k = len(config.precedence)
    rep = AuditReport("transfer_monotonicity",
                      f"{config.transfer.kind.value}, {k} categories, vacancies <= {bound}",
                      expected_cases=1 + sum(per_coord ** j for j in range(1, k)))
    with _Timer(rep):
        rep.cases += 1
        if not transfer_capacity_identity(config, capacities):
            rep.fail({"identity": "zero-vacancy capacities do not sum to the total"})
        for j, r, rt, problem in transfer_monotonicity_cases(config, capacities, bound):
            rep.cases += 1
            if problem:
                rep.fail({"category": config.precedence[j], "r": r, "r~": rt, "problem": problem})
    return rep


# ---------------------------------------------------------------------------
# merit dominance

class Dominance(str, enum.Enum):
    I_DOMINATES = "IdominatesJ"
    J_DOMINATES = "JdominatesI"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


def _rank_map(merit) -> dict:
    if isinstance(merit, Mapping):
        return dict(merit)
    return {i: k for k, i in enumerate(merit)}


def merit_based_compare(I: Iterable, J: Iterable, merit) -> Dominance:
    """Positionwise comparison of two equal-size sets sorted by merit.

    ``merit`` is a best-first sequence or a rank mapping (0 is best).
    """
    rank = _rank_map(merit)
    a = sorted(rank[i] for i in I)
    b = sorted(rank[j] for j in J)
    if len(a) != len(b):
        raise ValueError(f"sets differ in size ({len(a)} vs {len(b)})")
    if a == b:
        return Dominance.EQUAL
    if all(x <= y for x, y in zip(a, b)):
        return Dominance.I_DOMINATES
    if all(y <= x for x, y in zip(a, b)):
        return Dominance.J_DOMINATES
    return Dominance.INCOMPARABLE


def merit_compare_by_bijection(I: Iterable, J: Iterable, merit) -> Dominance:
    """Same comparison straight from the bijection definition (slow oracle)."""
    rank = _rank_map(merit)
    I, J = sorted(I), sorted(J)
    if len(I) != len(J):
        raise ValueError(f"sets differ in size ({len(I)} vs {len(J)})")
    if set(I) == set(J):
        return Dominance.EQUAL

    def dominates(A, B):
        for perm in itertools.permutations(B):
            pairs = list(zip(A, perm))
            if all(rank[a] <= rank[b] for a, b in pairs) and any(rank[a] < rank[b] for a, b in pairs):
                return True
        return False

    if dominates(I, J):
        return Dominance.I_DOMINATES
    if dominates(J, I):
        return Dominance.J_DOMINATES
    return Dominance.INCOMPARABLE


def check_dominance_reduction(population: Sequence[str], max_size: int = 5) -> AuditReport:
    """The sorted reduction agrees with the bijection oracle on every pair of sets."""
    population = list(population)
    rep = AuditReport("dominance_reduction", f"{len(population)} individuals, |I| <= {max_size}")
    expected = 0
    with _Timer(rep):
        for k in range(max_size + 1):
            subsets = list(itertools.combinations(population, k))
            expected += len(subsets) ** 2
            for I in subsets:
                for J in subsets:
                    rep.cases += 1
                    fast = merit_based_compare(I, J, population)
                    slow = merit_compare_by_bijection(I, J, population)
                    if fast is not slow:
                        rep.fail({"I": I, "J": J, "sorted": fast, "bijection": slow})
    rep.expected_cases = expected
    return rep


def satisfies_reservations(chosen: Iterable[str], offered: Iterable[str],
                           reservations: Mapping[str, int], types: Mapping[str, frozenset]) -> bool:
    """Every type gets its reserved seats, or all its offered holders."""
    chosen, offered = list(chosen), list(offered)
    for h, k in reservations.items():
        if k <= 0:
            continue
        have = sum(1 for i in chosen if h in types.get(i, ()))
        avail = sum(1 for i in offered if h in types.get(i, ()))
        if have < min(k, avail):
            return False
    return True


def check_merit_undominated(output: Iterable, offers: Iterable, reservations: Mapping[str, int],
                            capacity: int, merit, types: Mapping[str, frozenset]) -> AuditReport:
    """Brute force: the output is the only undominated reservation-satisfying set.

    Offers and output may be contracts or individual ids.  Sets of the
    output's size are enumerated; when none satisfies the reservations the
    case is counted as skipped.
    """
    def ids(xs):
        return [x.individual if isinstance(x, Contract) else x for x in xs]

    out, pool = sorted(ids(output)), sorted(ids(offers))
    rank = _rank_map(merit)
    pool = [i for i in pool if i in rank]
    rep = AuditReport("merit_undominated", f"{len(pool)} offers, capacity {capacity}")
    with _Timer(rep):
        if len(out) != min(capacity, len(pool)):
            rep.cases += 1
            rep.fail({"output": out, "reason": "output size is not min(capacity, acceptable offers)"})
            return rep
        feasible = [c for c in itertools.combinations(pool, len(out))
                    if satisfies_reservations(c, pool, reservations, types)]
        if not feasible:
            rep.skipped += 1
            return rep
        undominated = []
        for a in feasible:
            rep.cases += 1
            if not any(merit_based_compare(b, a, rank) is Dominance.I_DOMINATES for b in feasible):
                undominated.append(sorted(a))
        if undominated != [out]:
            rep.fail({"output": out, "undominated": undominated, "offers": pool,
                      "reservations": dict(reservations), "capacity": capacity})
    return rep


# ---------------------------------------------------------------------------
# market-level checks

def _outcome_rank(contract, prefs: Sequence) -> int:
    """Position of the contract in a preference list; outside option is ``len``."""
    if contract is None:
        return len(prefs)
    key = (contract.institution, contract.category)
    return prefs.index(key) if key in prefs else len(prefs) + 1


Engine = Callable[..., Matching]


def _cop(instance: Instance, rules) -> Matching:
    return cumulative_offer_process(instance, rules=rules).matching


def deviations(pairs: Sequence, depth: int | None = None):
    """Every ordered list of distinct pairs of length at most ``depth``, empty included."""
    d = len(pairs) if depth is None else min(depth, len(pairs))
    for k in range(d + 1):
        yield from itertools.permutations(pairs, k)


def deviation_count(n_pairs: int, depth: int | None = None) -> int:
    d = n_pairs if depth is None else min(depth, n_pairs)
    return sum(math.perm(n_pairs, k) for k in range(d + 1))


def check_strategy_proofness(instance: Instance, variant: str | None = None,
                             depth: int | None = None, case_budget: int = 100_000,
                             engine: Engine = _cop, rules=None) -> AuditReport:
    """No individual gains by reporting any other list over her admissible pairs."""
    rules = rules if rules is not None else build_rules(instance, variant)
    truthful = engine(instance, rules)
    rep = AuditReport("strategy_proofness",
                      f"{len(instance.institutions)}x{len(instance.individuals)}, "
                      f"depth {'full' if depth is None else depth}")
    with _Timer(rep):
        for i, ind in instance.individuals.items():
            prefs = list(ind.preferences)
            honest = _outcome_rank(truthful.of(i), prefs)
            for lie in deviations(instance.admissible_pairs(i), depth):
                if rep.cases >= case_budget:
                    rep.partial = True
                    return rep
                rep.cases += 1
                got = engine(instance.with_preferences(i, lie), rules).of(i)
                if _outcome_rank(got, prefs) < honest:
                    rep.fail({"individual": i, "truthful": prefs, "report": list(lie),
                              "truthful_outcome": truthful.of(i), "misreport_outcome": got})
                    return rep
    return rep


def check_order_independence(instance: Instance, variant: str | None = None,
                             seeds: Iterable[int] = range(10), rules=None) -> AuditReport:
    rules = rules if rules is not None else build_rules(instance, variant)
    base = cumulative_offer_process(instance, rules=rules, order="lowest").matching
    rep = AuditReport("order_independence", "lowest, highest and seeded random orders")
    with _Timer(rep):
        runs = [("highest", None)] + [("random", s) for s in seeds]
        rep.cases += 1
        for order, seed in runs:
            rep.cases += 1
            other = cumulative_offer_process(instance, rules=rules, order=order, seed=seed).matching
            if other != base:
                rep.fail({"order": order, "seed": seed, "lowest": base.contracts,
                          "other": other.contracts})
    return rep


def check_com_outcome(instance: Instance, variant: str | None = None, rules=None,
                      block_cap: int | None = None) -> AuditReport:
    """The COP outcome is stable and envy-free.

    ``block_cap`` bounds the blocking-set search; a cap of at least the
    number of individuals makes it exhaustive.
    """
    rules = rules if rules is not None else build_rules(instance, variant)
    m = cumulative_offer_process(instance, rules=rules).matching
    rep = AuditReport("stability_and_envy", "COP outcome")
    with _Timer(rep):
        rep.cases += 1
        verdict = is_stable(m, instance, rules=rules, block_cap=block_cap)
        rep.partial = not verdict.exhaustive
        if not verdict:
            rep.fail({"matching": m.contracts, "reason": verdict.reason, "witness": verdict.witness})
            return rep
        rep.cases += 1
        ok, pair = eliminates_justified_envy(m, instance)
        if not ok:
            rep.fail({"matching": m.contracts, "envy": pair})
    return rep


def immediate_acceptance_process(instance: Instance, rules) -> Matching:
    """Faulty engine: acceptances are final and rejected proposers move on.

    Each round every unmatched individual proposes her next contract and
    each institution fills only its leftover seats from the new proposals.
    It is not strategy-proof and serves as a negative control.
    """
    lists = {i: instance.contracts_of(i) for i in instance.individuals}
    pointer = {i: 0 for i in instance.individuals}
    accepted: dict = {s: set() for s in instance.institutions}
    matched: set = set()
    while True:
        proposals: dict = {}
        for i in sorted(instance.individuals):
            if i not in matched and pointer[i] < len(lists[i]):
                x = lists[i][pointer[i]]
                pointer[i] += 1
                proposals.setdefault(x.institution, set()).add(x)
        if not proposals:
            break
        for s, new in proposals.items():
            rule = rules[s]
            left = dict(rule.capacities)
            for c in accepted[s]:
                left[c.category] = left.get(c.category, 0) - 1
            take = GLChoice(instance, s, rule.config, left)(new)
            accepted[s] |= take
            matched |= {c.individual for c in take}
    return Matching(frozenset().union(*accepted.values()))


# ---------------------------------------------------------------------------
# bounds

@dataclass(frozen=True)
class Bounds:
    universe_size: int = 7
    individuals: int = 6
    capacity: int = 4
    q_max: int = 5
    vacancy_bound: int = 4
    #: seeded sub-choice universes per size above the exhaustive range
    universes_per_size: int = 150
    exhaustive_size: int = 2
    #: seeded type assignments per (shape, reservations, capacity, size)
    laminar_samples: int = 64
    institution_universes: int = 1000
    desk_institutions: int = 2
    desk_individuals: int = 3
    desk_instances: int = 1500
    large_institutions: int = 3
    large_individuals: int = 6
    large_instances: int = 40
    deviation_depth: int = 2
    random_orders: int = 10
    case_budget: int = 200_000

    @classmethod
    def overrides(cls, text: str | None) -> dict:
        """Parse ``key=value,...`` or a JSON object into validated overrides."""
        if not text or not text.strip():
            return {}
        text = text.strip()
        if text.startswith("{"):
            raw = json.loads(text)
        else:
            raw = {}
            for part in text.split(","):
                if part.strip():
                    key, sep, value = part.partition("=")
                    if not sep:
                        raise ValueError(f"bound {part.strip()!r} is not key=value")
                    raw[key.strip()] = value.strip()
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValueError(f"unknown bound(s): {', '.join(unknown)}")
        return {k: int(v) for k, v in raw.items()}

    @classmethod
    def parse(cls, text: str | None) -> "Bounds":
        return cls(**cls.overrides(text))

    @classmethod
    def from_env(cls, override: str | None = None) -> "Bounds":
        """Defaults, then the environment variable, then ``override``."""
        return cls(**{**cls.overrides(os.environ.get(BOUNDS_ENV)), **cls.overrides(override)})


# ---------------------------------------------------------------------------
# family audits

SUBCHOICE_KINDS = {"hierarchical": hierarchical_subchoice, "meritorious": meritorious_subchoice}


def _subchoice_universes(bounds: Bounds, laminar: bool, seed: int):
    yield from small_subchoice_universes(bounds.exhaustive_size, laminar, bounds.capacity)
    for size in range(bounds.exhaustive_size + 1, bounds.universe_size + 1):
        yield from subchoice_universes(size, laminar, bounds.universes_per_size,
                                       seed * 1000 + size, bounds.capacity)


def audit_subchoice_axioms(rule_name: str, bounds: Bounds = Bounds(), seed: int = 0,
                           rule=None) -> list:
    """Substitutability, size and quota monotonicity of one sub-choice rule."""
    rule = rule or SUBCHOICE_KINDS[rule_name]
    laminar = rule is hierarchical_subchoice
    kind = "laminar" if laminar else "arbitrary"
    sub = AuditReport(f"substitutability[{rule_name}]", f"{kind} universes", expected_cases=0)
    size = AuditReport(f"size_monotonicity[{rule_name}]", f"{kind} universes", expected_cases=0)
    quota = AuditReport(f"quota_monotonicity[{rule_name}]", f"{kind} universes", expected_cases=0)
    for su in _subchoice_universes(bounds, laminar, seed):
        U = su.contracts
        choose = (lambda X, su=su: rule(su.input(X)))
        sub.absorb(check_substitutability(choose, U), su.describe())
        size.absorb(check_size_monotonicity(choose, U), su.describe())
        quota.absorb(check_quota_monotonicity(lambda X, q, su=su: rule(su.input(X, q)),
                                              U, bounds.q_max), su.describe())
    return [sub, size, quota]


def audit_transfer_policies(bounds: Bounds = Bounds()) -> list:
    caps = {Category.OPEN: 3, Category.SC: 1, Category.ST: 1, Category.OBC: 2, Category.EWS: 1}
    out = []
    for variant in ("hNT", "hT"):
        rep = check_transfer_monotonicity(make_overall_rule(variant), caps, bounds.vacancy_bound)
        rep.name = f"transfer_monotonicity[{'none' if variant == 'hNT' else 'obc_dereservation'}]"
        out.append(rep)
    return out


def audit_reservation_optimality(bounds: Bounds = Bounds(), seed: int = 0) -> AuditReport:
    """Hierarchical output is the unique undominated reservation-satisfying set."""
    rep = AuditReport("merit_undominated[hierarchical]",
                      f"laminar instances, <= {bounds.individuals} individuals, "
                      f"capacity <= {bounds.capacity}")
    with _Timer(rep):
        for su in laminar_family(bounds.individuals, bounds.capacity,
                                 per_shape_cap=bounds.laminar_samples, seed=seed):
            inp = su.input(su.contracts)
            out = hierarchical_subchoice(inp)
            one = check_merit_undominated(out, su.contracts, su.reservations, su.capacity,
                                          inp.merit, inp.types)
            one.elapsed = 0.0
            # one instance is one case; count it once whatever the brute force size
            rep.cases += 1
            rep.skipped += one.skipped
            if not one.passed:
                rep.fail({"instance": su.describe(), "detail": one.witness})
    return rep


def check_declaration_order(su: SubUniverse) -> AuditReport:
    """Hierarchical output does not depend on the order sibling types are declared.

    Only meaningful when some reservation-satisfying set exists; otherwise
    the reservations compete for too few seats and the case is skipped.
    """
    rep = AuditReport("declaration_order", f"{len(su.hierarchy)} types",
                      expected_cases=math.factorial(len(su.hierarchy)))
    with _Timer(rep):
        inp = su.input(su.contracts)
        base = hierarchical_subchoice(inp)
        probe = check_merit_undominated(base, su.contracts, su.reservations, su.capacity,
                                        inp.merit, inp.types)
        if probe.skipped:
            rep.skipped += 1
            rep.expected_cases = 0
            return rep
        for perm in itertools.permutations(su.hierarchy):
            rep.cases += 1
            h = {t: su.hierarchy[t] for t in perm}
            out = hierarchical_subchoice(replace(inp, hierarchy=h))
            if out != base:
                rep.fail({"instance": su.describe(), "order": list(perm),
                          "declared": base, "permuted": out})
    return rep


def audit_declaration_order(bounds: Bounds = Bounds(), seed: int = 0) -> AuditReport:
    rep = AuditReport("declaration_order[hierarchical]", "laminar instances with 2+ types",
                      expected_cases=0)
    for su in laminar_family(bounds.individuals, bounds.capacity,
                             per_shape_cap=bounds.laminar_samples, seed=seed):
        if len(su.hierarchy) >= 2:
            rep.absorb(check_declaration_order(su), su.describe())
    return rep


def embed_universe(su: SubUniverse, variant: str | None = None) -> Instance:
    """One-institution instance around a sub-choice universe.

    Individuals alternate general, OBC and SC membership; every category
    gets the universe's capacity and its reservations where they fit.
    """
    memberships = [None, Category.OBC, Category.SC]
    people = []
    for k, types in enumerate(su.types):
        m = memberships[k % 3]
        people.append({"id": f"i{k}", "vertical": GENERAL if m is None else m.value,
                       "horizontal": sorted(types), "preferences": []})
    caps = {c.value: 0 for c in VERTICAL}
    reservations = {}
    roots = sum(k for h, k in su.reservations.items() if su.hierarchy.get(h) is None)
    for c in (Category.OPEN, Category.OBC, Category.SC):
        caps[c.value] = su.capacity if c is Category.OPEN else max(1, su.capacity // 2)
        if roots <= caps[c.value]:
            reservations[c.value] = dict(su.reservations)
    raw = {"horizontal_types": [{"id": h, "contains": [c for c, p in su.hierarchy.items() if p == h]}
                                for h in su.hierarchy],
           "institutions": [{"id": "s", "capacity": caps, "horizontal_reservations": reservations,
                             "merit": [p["id"] for p in people]}],
           "individuals": people}
    return validate_instance(raw)


def audit_fairness(bounds: Bounds = Bounds(), seed: int = 0,
                   variants: Sequence[str] = VARIANTS) -> list:
    reports = {v: AuditReport(f"fairness[{v}]", "embedded laminar family") for v in variants}
    start = time.perf_counter()
    for su in laminar_family(bounds.individuals, bounds.capacity,
                             per_shape_cap=bounds.laminar_samples, seed=seed):
        inst = embed_universe(su)
        offers = offered_to(inst, "s")
        for v in variants:
            rule = GLChoice(inst, "s", make_overall_rule(v, inst))
            reports[v].cases += 1
            w = is_fair_violation(offers, rule)
            if w is not None:
                reports[v].fail({"instance": su.describe(), "x": w[0], "y": w[1]})
    for r in reports.values():
        r.elapsed = time.perf_counter() - start
    return list(reports.values())


def audit_completion(bounds: Bounds = Bounds(), seed: int = 0,
                     variants: Sequence[str] = VARIANTS) -> list:
    """Completion relation, IRC, substitutability and size monotonicity of completions."""
    rng = random.Random(seed)
    names = ("completion", "irc", "substitutability", "size_monotonicity")
    reports = {n: AuditReport(f"{n}[completion]", "institution universes", expected_cases=0)
               for n in names}
    for _ in range(bounds.institution_universes):
        inst = institution_universe(rng, bounds.universe_size)
        U = sorted(offered_to(inst, "s"))
        for v in variants:
            try:
                rule = GLChoice(inst, "s", make_overall_rule(v, inst))
            except ValueError:
                continue
            where = {"variant": v, "instance": _instance_brief(inst)}
            reports["completion"].absorb(check_completion_relation(rule, U), where)
            reports["irc"].absorb(check_irc(rule.complete, U), where)
            reports["substitutability"].absorb(check_substitutability(rule.complete, U), where)
            reports["size_monotonicity"].absorb(check_size_monotonicity(rule.complete, U), where)
    return list(reports.values())


def offered_to(inst: Instance, sid: str) -> frozenset:
    """Every admissible contract naming the institution."""
    return frozenset(Contract(i, s, c) for i in inst.individuals
                     for s, c in inst.admissible_pairs(i) if s == sid)


def _instance_brief(inst: Instance) -> dict:
    from .model import instance_to_dict

    return instance_to_dict(inst)


def desk_instances(bounds: Bounds = Bounds(), seed: int = 0) -> list:
    """The seeded market family: small exhaustive-deviation and larger bounded ones."""
    small = list(desk_family(bounds.desk_instances, seed, n_institutions=bounds.desk_institutions,
                             n_individuals=bounds.desk_individuals))
    large = list(desk_family(bounds.large_instances, seed + 1,
                             n_institutions=bounds.large_institutions,
                             n_individuals=bounds.large_individuals))
    return [(inst, None) for inst in small] + [(inst, bounds.deviation_depth) for inst in large]


def audit_markets(bounds: Bounds = Bounds(), seed: int = 0,
                  variants: Sequence[str] = VARIANTS, checks=("stability", "strategy_proofness",
                                                              "order_independence")) -> list:
    reports = {}
    if "stability" in checks:
        reports["stability"] = AuditReport("stability_and_envy[COM]", "desk markets")
    if "strategy_proofness" in checks:
        reports["strategy_proofness"] = AuditReport("strategy_proofness[COM]", "desk markets")
    if "order_independence" in checks:
        reports["order_independence"] = AuditReport("order_independence[COP]", "desk markets")
    start = time.perf_counter()
    for inst, depth in desk_instances(bounds, seed):
        for v in variants:
            rules = build_rules(inst, v)
            where = {"variant": v, "instance": _instance_brief(inst)}
            if "stability" in reports:
                reports["stability"].absorb(
                    check_com_outcome(inst, rules=rules, block_cap=max(1, len(inst.individuals))),
                    where)
            if "strategy_proofness" in reports:
                reports["strategy_proofness"].absorb(
                    check_strategy_proofness(inst, depth=depth, rules=rules,
                                             case_budget=bounds.case_budget), where)
            if "order_independence" in reports:
                reports["order_independence"].absorb(
                    check_order_independence(inst, rules=rules, seeds=range(bounds.random_orders)),
                    where)
    for r in reports.values():
        r.elapsed = time.perf_counter() - start
    return list(reports.values())
