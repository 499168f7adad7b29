"""Enumerated and seeded instance families used by the audits.

Individuals are named so that sorting by name is sorting by merit
(``i0`` best), which lets small universes stand in for every relabeling.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Iterator, Mapping

from .model import (Category, Contract, GENERAL, Instance, RESERVED, VERTICAL,
                    expand_institution_ranking, statutory_capacities, validate_instance)
from .subchoice import SubChoiceInput

#: every containment forest on at most three types, as type -> parent
FOREST_SHAPES = (
    {},
    {"a": None},
    {"a": None, "b": None},
    {"a": None, "b": "a"},
    {"a": None, "b": None, "c": None},
    {"a": None, "b": "a", "c": None},
    {"a": None, "b": "a", "c": "b"},
    {"a": None, "b": "a", "c": "a"},
)


def upward_closure(h: str, parents: Mapping) -> frozenset:
    out = {h}
    p = parents.get(h)
    while p is not None:
        out.add(p)
        p = parents.get(p)
    return frozenset(out)


def nested_type_options(parents: Mapping) -> list:
    """Type sets an individual may hold under a laminar forest."""
    return [frozenset()] + [upward_closure(h, parents) for h in parents]


def any_type_options(parents: Mapping) -> list:
    types = list(parents)
    return [frozenset(c) for r in range(len(types) + 1) for c in itertools.combinations(types, r)]


def consistent_reservations(parents: Mapping, capacity: int, max_kappa: int = 2) -> Iterator[dict]:
    """All reservation vectors with child <= parent and roots summing to <= capacity."""
    types = list(parents)
    for values in itertools.product(range(max_kappa + 1), repeat=len(types)):
        kappa = dict(zip(types, values))
        if any(p is not None and kappa[h] > kappa[p] for h, p in parents.items()):
            continue
        if sum(kappa[h] for h, p in parents.items() if p is None) > capacity:
            continue
        yield kappa


def ind_name(k: int) -> str:
    return f"i{k}"


@dataclass(frozen=True)
class SubUniverse:
    """Offers to one category: individuals in merit order and their types."""

    types: tuple
    reservations: Mapping = field(default_factory=dict)
    hierarchy: Mapping = field(default_factory=dict)
    capacity: int = 1
    category: Category = Category.OPEN

    @property
    def contracts(self) -> tuple:
        return tuple(Contract(ind_name(k), "s", self.category) for k in range(len(self.types)))

    def input(self, offers, capacity: int | None = None) -> SubChoiceInput:
        n = len(self.types)
        return SubChoiceInput(frozenset(offers), self.capacity if capacity is None else capacity,
                              self.reservations, self.hierarchy,
                              {ind_name(k): k for k in range(n)},
                              {ind_name(k): self.types[k] for k in range(n)})

    def describe(self) -> dict:
        return {"types": [sorted(t) for t in self.types], "reservations": dict(self.reservations),
                "hierarchy": dict(self.hierarchy), "capacity": self.capacity}


def laminar_family(max_individuals: int = 6, max_capacity: int = 4, max_kappa: int = 2,
                   per_shape_cap: int = 64, seed: int = 0) -> Iterator[SubUniverse]:
    """Nested-type single-category instances with consistent reservations.

    Every forest shape, reservation vector and capacity is covered; type
    assignments are enumerated completely while there are at most
    ``per_shape_cap`` of them and sampled (seeded) beyond that.
    """
    rng = random.Random(seed)
    for parents in FOREST_SHAPES:
        options = nested_type_options(parents)
        for capacity in range(1, max_capacity + 1):
            for kappa in consistent_reservations(parents, capacity, max_kappa):
                for n in range(1, max_individuals + 1):
                    total = len(options) ** n
                    if total <= per_shape_cap:
                        assignments = itertools.product(options, repeat=n)
                    else:
                        assignments = (tuple(rng.choice(options) for _ in range(n))
                                       for _ in range(per_shape_cap))
                    for types in assignments:
                        yield SubUniverse(tuple(types), kappa, parents, capacity)


def subchoice_universes(size: int, laminar: bool, count: int, seed: int,
                        max_capacity: int = 4) -> Iterator[SubUniverse]:
    """Seeded universes of exactly ``size`` contracts for axiom checks.

    Laminar universes draw nested type sets and consistent reservations;
    otherwise types are arbitrary subsets and reservations unconstrained.
    """
    rng = random.Random(seed)
    for _ in range(count):
        parents = rng.choice(FOREST_SHAPES)
        capacity = rng.randint(0, max_capacity)
        if laminar:
            options = nested_type_options(parents)
            kappas = list(consistent_reservations(parents, max(capacity, 1)))
            kappa = rng.choice(kappas)
        else:
            options = any_type_options(parents)
            kappa = {h: rng.randint(0, 2) for h in parents}
            parents = {h: None for h in parents}
        types = tuple(rng.choice(options) for _ in range(size))
        yield SubUniverse(types, kappa, parents, capacity)


def small_subchoice_universes(max_size: int = 2, laminar: bool = True,
                              max_capacity: int = 4) -> Iterator[SubUniverse]:
    """Every universe up to ``max_size`` contracts.

    Laminar universes range over every forest shape and consistent
    reservation vector (each at most 2).  Arbitrary universes range over up
    to three unrelated types with reservations of 0 or 1.
    """
    if laminar:
        shapes = [(p, nested_type_options(p), list(consistent_reservations(p, 4)))
                  for p in FOREST_SHAPES]
    else:
        shapes = []
        for n_types in range(4):
            p = {h: None for h in "abc"[:n_types]}
            kappas = [dict(zip(p, v)) for v in itertools.product(range(2), repeat=n_types)]
            shapes.append((p, any_type_options(p), kappas))
    for parents, options, kappas in shapes:
        for capacity in range(0, max_capacity + 1):
            for kappa in kappas:
                if laminar and sum(k for h, k in kappa.items() if parents[h] is None) > max(capacity, 1):
                    continue
                for n in range(1, max_size + 1):
                    for types in itertools.product(options, repeat=n):
                        yield SubUniverse(tuple(types), kappa, parents, capacity)


# ---------------------------------------------------------------------------
# whole instances

def _raw_individual(k: int, member, types, prefs) -> dict:
    return {"id": ind_name(k), "vertical": GENERAL if member is None else member.value,
            "horizontal": sorted(types), "preferences": [[s, c.value] for s, c in prefs]}


def institution_universe(rng: random.Random, max_contracts: int = 7, laminar: bool = True) -> Instance:
    """One institution whose full contract set has at most ``max_contracts`` contracts."""
    parents = rng.choice(FOREST_SHAPES[:4])
    options = nested_type_options(parents) if laminar else any_type_options(parents)
    members = [None, Category.SC, Category.OBC]
    inds = []
    used = 0
    k = 0
    while True:
        member = rng.choice(members)
        need = 1 if member is None else 2
        if used + need > max_contracts:
            break
        inds.append((k, member, rng.choice(options)))
        used += need
        k += 1
        if rng.random() < 0.15:
            break
    caps = {c: 0 for c in VERTICAL}
    caps[Category.OPEN] = rng.randint(0, 2)
    caps[Category.SC] = rng.randint(0, 2)
    caps[Category.OBC] = rng.randint(0, 2)
    reservations = {}
    for c in (Category.OPEN, Category.SC, Category.OBC):
        kappas = list(consistent_reservations(parents, caps[c], 1))
        reservations[c.value] = rng.choice(kappas) if kappas else {}
    raw = {
        "horizontal_types": [{"id": h, "contains": [c for c, p in parents.items() if p == h]}
                             for h in parents],
        "institutions": [{"id": "s", "capacity": {c.value: n for c, n in caps.items()},
                          "horizontal_reservations": reservations,
                          "merit": [ind_name(k) for k, _, _ in inds]}],
        "individuals": [_raw_individual(k, m, t, []) for k, m, t in inds],
    }
    return validate_instance(raw)


def desk_instance(rng: random.Random, n_institutions: int = 2, n_individuals: int = 3,
                  laminar: bool = True, members=(None, Category.SC, Category.OBC),
                  max_category_capacity: int = 1, unacceptable_rate: float = 0.1) -> Instance:
    """Small random market with arbitrary (not necessarily expanded) preferences."""
    parents = rng.choice(FOREST_SHAPES[:4])
    options = nested_type_options(parents) if laminar else any_type_options(parents)
    sids = [f"s{k}" for k in range(n_institutions)]
    people = []
    for k in range(n_individuals):
        member = rng.choice(members)
        pairs = []
        for s in sids:
            pairs.append((s, Category.OPEN))
            if member is not None:
                pairs.append((s, member))
        rng.shuffle(pairs)
        prefs = pairs[:rng.randint(0, len(pairs))]
        people.append((k, member, rng.choice(options), prefs))
    insts = []
    for s in sids:
        caps = {c: rng.randint(0, max_category_capacity) for c in VERTICAL}
        caps[Category.OPEN] = rng.randint(0, max_category_capacity + 1)
        if sum(caps.values()) == 0:
            caps[Category.OPEN] = 1
        reservations = {}
        for c in VERTICAL:
            kappas = list(consistent_reservations(parents, caps[c], 1))
            pick = rng.choice(kappas) if kappas else {}
            if any(pick.values()):
                reservations[c.value] = pick
        merit = [ind_name(k) for k in range(n_individuals)]
        rng.shuffle(merit)
        merit = [i for i in merit if rng.random() >= unacceptable_rate]
        insts.append({"id": s, "capacity": {c.value: n for c, n in caps.items()},
                      "horizontal_reservations": reservations, "merit": merit})
    raw = {
        "horizontal_types": [{"id": h, "contains": [c for c, p in parents.items() if p == h]}
                             for h in parents],
        "institutions": insts,
        "individuals": [_raw_individual(k, m, t, p) for k, m, t, p in people],
    }
    if not laminar:
        raw["institutions"] = [dict(i, rule={"subchoice": "meritorious"}) for i in insts]
    return validate_instance(raw)


def desk_family(count: int, seed: int, **kw) -> Iterator[Instance]:
    rng = random.Random(seed)
    for _ in range(count):
        yield desk_instance(rng, **kw)


def generate_instance(n_institutions: int, n_individuals: int, n_types: int = 0,
                      laminar: bool = True, seed: int = 0, capacity: int | None = None,
                      variant: str = "hNT") -> dict:
    """Random valid instance document at statutory category shares.

    Each institution gets ``capacity`` seats (default: individuals divided
    evenly across institutions) split by statutory shares, a random strict
    merit order, and small consistent horizontal reservations.  Preferences
    come from random institution rankings expanded with random disclosure.
    """
    if n_institutions < 1:
        raise ValueError("need at least one institution")
    if n_types > 0 and n_individuals == 0:
        raise ValueError("horizontal types requested but there are no individuals to hold them")
    if capacity is None:
        capacity = max(1, n_individuals // n_institutions)
    rng = random.Random(seed)
    names = [f"h{k}" for k in range(n_types)]
    parents: dict = {}
    for k, h in enumerate(names):
        parents[h] = rng.choice([None] + names[:k]) if laminar and k else None
    options = nested_type_options(parents) if laminar else any_type_options(parents)
    caps = statutory_capacities(capacity) if capacity >= 4 else \
        {c: (capacity if c is Category.OPEN else 0) for c in VERTICAL}
    member_weights = [(None, 0.405), (Category.SC, 0.15), (Category.ST, 0.075),
                      (Category.OBC, 0.27), (Category.EWS, 0.10)]
    sids = [f"s{k}" for k in range(n_institutions)]
    people = []
    for k in range(n_individuals):
        member = rng.choices([m for m, _ in member_weights], [w for _, w in member_weights])[0]
        types = rng.choice(options) if rng.random() < 0.4 else frozenset()
        ranking = rng.sample(sids, rng.randint(1, len(sids)))
        prefs = expand_institution_ranking(ranking, member, disclose=rng.random() < 0.7)
        people.append(_raw_individual(k, member, types, prefs))
    insts = []
    variant_rule = {"hNT": ("hierarchical", "none"), "hT": ("hierarchical", "obc_dereservation"),
                    "mNT": ("meritorious", "none"), "mT": ("meritorious", "obc_dereservation")}
    sub, transfer = variant_rule[variant if laminar else "m" + variant[1:]]
    for s in sids:
        reservations = {}
        for c in VERTICAL:
            kappas = [kp for kp in consistent_reservations(parents, caps[c], 2) if any(kp.values())]
            if kappas and rng.random() < 0.5:
                reservations[c.value] = rng.choice(kappas)
        merit = [p["id"] for p in people]
        rng.shuffle(merit)
        insts.append({"id": s, "total_capacity": capacity,
                      "capacity": {c.value: caps[c] for c in VERTICAL},
                      "horizontal_reservations": reservations, "merit": merit,
                      "rule": {"subchoice": sub, "transfer": transfer}})
    raw = {"horizontal_types": [{"id": h, "contains": [c for c, p in parents.items() if p == h]}
                                for h in names],
           "institutions": insts, "individuals": people}
    return raw


RESERVED_MEMBERS = RESERVED
