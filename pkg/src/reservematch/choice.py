"""Generalized lexicographic choice rules.

An institution's overall rule runs its categories in precedence order.  Each
category applies its sub-choice rule to the contracts naming it, restricted
to individuals nobody has chosen yet, with a capacity the transfer policy
derives from the vacancies left by earlier categories.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

from .model import (Category, ChoiceConfig, DEFAULT_PRECEDENCE, Instance, Institution,
                    SubChoiceKind, TransferKind, TransferPolicy, VERTICAL, is_chain)
from .subchoice import SubChoiceInput, merit_subchoice, resolve

VARIANTS = ("hNT", "hT", "mNT", "mT")


@dataclass(frozen=True)
class CategoryStep:
    category: Category
    capacity: int
    offered: frozenset
    chosen: frozenset

    @property
    def vacancies(self) -> int:
        return self.capacity - len(self.chosen)


class GLChoice:
    """The overall choice rule of one institution.

    Calling the object runs the rule on a set of offers; :meth:`complete`
    runs the completion, which leaves an individual's other contracts in
    play after one of them is chosen.  Results are memoized per offer set.
    """

    def __init__(self, instance: Instance, institution: "str | Institution",
                 config: ChoiceConfig | None = None,
                 capacities: Mapping[Category, int] | None = None):
        inst = institution if isinstance(institution, Institution) else instance.institutions[institution]
        self.institution = inst
        self.config = config or inst.config
        self.capacities = dict(capacities or inst.capacities)
        self.merit = inst.merit_rank()
        self.types = {i.id: i.types for i in instance.individuals.values()}
        self.general = {i.id for i in instance.individuals.values() if i.is_general}
        self.hierarchy = instance.parents()
        self.rules = {c: (merit_subchoice if c is Category.DERESERVED
                          else resolve(self.config.kind(c)))
                      for c in self.config.precedence}
        self.reservations = {c: dict(inst.reservations.get(c, {})) for c in self.config.precedence}
        self._choose = lru_cache(maxsize=None)(self._run_chosen)
        self._complete = lru_cache(maxsize=None)(self._run_completion)

    def __call__(self, offers: Iterable) -> frozenset:
        return self._choose(frozenset(offers))

    def complete(self, offers: Iterable) -> frozenset:
        return self._complete(frozenset(offers))

    def steps(self, offers: Iterable, completion: bool = False) -> list:
        """Per-category record of the staged computation."""
        return self._run(frozenset(offers), completion)

    def subchoice_input(self, category: Category, contracts: Iterable, capacity: int) -> SubChoiceInput:
        return SubChoiceInput(frozenset(contracts), capacity, self.reservations.get(category, {}),
                              self.hierarchy, self.merit, self.types)

    def _run_chosen(self, offers: frozenset) -> frozenset:
        return frozenset().union(*(s.chosen for s in self._run(offers, False)))

    def _run_completion(self, offers: frozenset) -> frozenset:
        return frozenset().union(*(s.chosen for s in self._run(offers, True)))

    def _run(self, offers: frozenset, completion: bool) -> list:
        sid = self.institution.id
        for c in offers:
            if c.institution != sid:
                raise ValueError(f"offer {c} does not name institution {sid!r}")
        precedence = self.config.precedence
        remaining = set(offers)
        vacancies: list = []
        steps = []
        for pos, category in enumerate(precedence):
            capacity = self.config.transfer.capacity(pos, precedence, vacancies, self.capacities)
            if category is Category.DERESERVED:
                offered = {c for c in remaining if c.category is Category.OPEN}
                if self.config.dereserved_scope == "general":
                    offered = {c for c in offered if c.individual in self.general}
            else:
                offered = {c for c in remaining if c.category is category}
            chosen = self.rules[category](self.subchoice_input(category, offered, capacity))
            steps.append(CategoryStep(category, capacity, frozenset(offered), chosen))
            vacancies.append(capacity - len(chosen))
            if completion:
                remaining -= chosen
            else:
                picked = {c.individual for c in chosen}
                remaining = {c for c in remaining if c.individual not in picked}
        return steps


def gl_choose(offers: Iterable, instance: Instance, institution: str,
              config: ChoiceConfig | None = None) -> frozenset:
    return GLChoice(instance, institution, config)(offers)


def completion_choose(offers: Iterable, instance: Instance, institution: str,
                      config: ChoiceConfig | None = None) -> frozenset:
    return GLChoice(instance, institution, config).complete(offers)


def make_overall_rule(variant: str, instance: Instance | None = None) -> ChoiceConfig:
    """ChoiceConfig of one of the four named overall rules.

    ``variant`` is ``hNT``, ``hT``, ``mNT`` or ``mT``: hierarchical or
    meritorious sub-choice in every category, with no transfer or with
    vacant OBC seats de-reserved into a final open-to-all category.
    Passing ``instance`` checks that hierarchical variants see nested types.
    """
    key = variant.replace("ⓗ", "h").replace("ⓜ", "m")
    if key not in VARIANTS:
        raise ValueError(f"unknown rule variant {variant!r}; expected one of {VARIANTS}")
    kind = SubChoiceKind.HIERARCHICAL if key[0] == "h" else SubChoiceKind.MERITORIOUS
    if kind is SubChoiceKind.HIERARCHICAL and instance is not None:
        parents = instance.parents()
        bad = [i.id for i in instance.individuals.values() if not is_chain(i.types, parents)]
        if bad:
            raise ValueError(f"hierarchical rule needs nested horizontal types; individuals "
                             f"{', '.join(bad)} hold overlapping unnested types")
    if key.endswith("NT"):
        precedence = DEFAULT_PRECEDENCE
        transfer = TransferPolicy(TransferKind.NONE)
    else:
        precedence = DEFAULT_PRECEDENCE + (Category.DERESERVED,)
        transfer = TransferPolicy(TransferKind.OBC_DERESERVATION)
    return ChoiceConfig(precedence, {c: kind.value for c in precedence}, transfer)


def build_rules(instance: Instance, variant: str | None = None) -> dict:
    """One GLChoice per institution, from ``variant`` or the instance's own configs."""
    cfg = make_overall_rule(variant, instance) if variant else None
    return {sid: GLChoice(instance, sid, cfg) for sid in instance.institutions}


def is_fair_violation(offers: Iterable, rule: GLChoice):
    """Witness ``(x, y)`` that the rule is unfair on ``offers``, else None.

    ``x``'s individual is wholly rejected while ``y`` is chosen for the same
    category although ``i(y)`` has lower merit and no horizontal type that
    ``i(x)`` lacks.
    """
    offers = frozenset(offers)
    chosen = rule(offers)
    chosen_ids = {c.individual for c in chosen}
    merit, types = rule.merit, rule.types
    worst = len(merit)
    for x in sorted(offers):
        if x.individual in chosen_ids:
            continue
        rank_x = merit.get(x.individual, worst)
        for y in sorted(chosen):
            if y.category is not x.category:
                continue
            if merit.get(y.individual, worst) <= rank_x:
                continue
            if types.get(y.individual, frozenset()) <= types.get(x.individual, frozenset()):
                return x, y
    return None


# ---------------------------------------------------------------------------
# transfer policy monotonicity

def transfer_monotonicity_cases(config: ChoiceConfig, capacities: Mapping[Category, int],
                                bound: int):
    """Yield ``(j, r, r_tilde, problem)`` over all vacancy pairs ``r_tilde >= r``.

    ``problem`` is None when both monotonicity conditions hold for position
    ``j`` (0-based, so ``j >= 1``), else a short description.
    """
    precedence = config.precedence
    q = config.transfer.capacity
    for j in range(1, len(precedence)):
        pairs_1d = [(a, b) for a in range(bound + 1) for b in range(a, bound + 1)]
        for combo in itertools.product(pairs_1d, repeat=j):
            r = tuple(p[0] for p in combo)
            rt = tuple(p[1] for p in combo)
            problem = None
            if q(j, precedence, rt, capacities) < q(j, precedence, r, capacities):
                problem = "capacity decreases when vacancies grow"
            else:
                gained = sum(q(m, precedence, rt, capacities) - q(m, precedence, r, capacities)
                             for m in range(1, j + 1))
                if gained > sum(b - a for a, b in zip(r, rt)):
                    problem = f"capacity gain {gained} exceeds vacancy increase"
            yield j, r, rt, problem


def transfer_capacity_identity(config: ChoiceConfig, capacities: Mapping[Category, int]) -> bool:
    precedence = config.precedence
    total = sum(config.transfer.capacity(k, precedence, (0,) * k, capacities)
                for k in range(len(precedence)))
    return total == sum(capacities.get(c, 0) for c in VERTICAL)


def transfer_monotonicity_witness(config: ChoiceConfig, capacities: Mapping[Category, int],
                                  bound: int | None = None):
    """First violation of transfer monotonicity, or None."""
    if bound is None:
        keys = [v for entries in config.transfer.table.values() for key in entries for v in key]
        bound = min(max(keys, default=0) + 1, 4)
    if not transfer_capacity_identity(config, capacities):
        return "capacities at zero vacancies do not sum to the institution's capacity"
    for j, r, rt, problem in transfer_monotonicity_cases(config, capacities, bound):
        if problem:
            return f"{config.precedence[j].value} at r={r}, r~={rt}: {problem}"
    return None


def custom_policy(table: Mapping[Category, Mapping[Sequence[int], int]],
                  precedence: Sequence[Category] = DEFAULT_PRECEDENCE) -> ChoiceConfig:
    """Hierarchical config with a custom transfer table (handy for experiments)."""
    tp = TransferPolicy(TransferKind.CUSTOM,
                        {c: {tuple(k): v for k, v in entries.items()} for c, entries in table.items()})
    return ChoiceConfig(tuple(precedence),
                        {c: SubChoiceKind.HIERARCHICAL.value for c in precedence}, tp)
