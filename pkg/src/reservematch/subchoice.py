"""Per-category sub-choice rules.

Both rules take the contracts offered to one vertical category of one
institution together with a dynamic capacity, and return the chosen subset.

* :func:`hierarchical_subchoice` counts a chosen individual against every
  horizontal type she holds; it needs nested (laminar) types.
* :func:`meritorious_subchoice` counts her against one type only, via a
  maximum-cardinality assignment of individuals to reserved slots.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .model import Contract

CONTROL_PREFIX = "control-"


@dataclass(frozen=True)
class SubChoiceInput:
    contracts: frozenset
    capacity: int
    #: horizontal type -> reserved seats in this category
    reservations: Mapping[str, int] = field(default_factory=dict)
    #: containment forest as type -> parent (None for roots), declaration order
    hierarchy: Mapping[str, "str | None"] = field(default_factory=dict)
    #: individual -> merit position (0 is best); absent means unacceptable
    merit: Mapping[str, int] = field(default_factory=dict)
    #: individual -> horizontal types held
    types: Mapping[str, frozenset] = field(default_factory=dict)

    def ranked(self) -> list:
        """Acceptable contracts, best merit first."""
        ok = [c for c in self.contracts if c.individual in self.merit]
        ok.sort(key=lambda c: self.merit[c.individual])
        return ok

    def types_of(self, individual: str) -> frozenset:
        return self.types.get(individual, frozenset())


def hierarchical_subchoice(inp: SubChoiceInput) -> frozenset:
    """Staged selection over nested horizontal types.

    At each stage every unprocessed type that contains no unprocessed type
    takes its highest-merit holders up to its remaining reservation; the
    seats it fills are deducted from the total and from the reservation of
    every type containing it.  Remaining seats then go by merit.
    """
    pool = inp.ranked()
    remaining = inp.capacity
    chosen: list = []
    if remaining <= 0 or not pool:
        return frozenset()

    parents = dict(inp.hierarchy)
    for h in inp.reservations:
        parents.setdefault(h, None)
    kappa = {h: inp.reservations.get(h, 0) for h in parents}
    unprocessed = list(parents)
    children: dict = {h: set() for h in parents}
    for h, p in parents.items():
        if p is not None:
            if p not in children:
                raise ValueError(f"type {h!r} has undeclared parent {p!r}")
            children[p].add(h)

    while unprocessed:
        stage = [h for h in unprocessed if not (children[h] & set(unprocessed))]
        if not stage:
            raise ValueError("horizontal hierarchy contains a cycle")
        for h in stage:
            unprocessed.remove(h)
            quota = min(max(kappa[h], 0), remaining)
            if quota == 0:
                continue
            take = [c for c in pool if h in inp.types_of(c.individual)][:quota]
            if not take:
                continue
            chosen.extend(take)
            taken = set(take)
            pool = [c for c in pool if c not in taken]
            remaining -= len(take)
            p = parents[h]
            while p is not None:
                kappa[p] -= len(take)
                p = parents[p]
            if remaining == 0 or not pool:
                return frozenset(chosen)

    chosen.extend(pool[:remaining])
    return frozenset(chosen)


def max_horizontal_utilization(individuals: Mapping[str, Iterable[str]] | Iterable,
                               reservations: Mapping[str, int]) -> int:
    """Maximum number of reserved slots that can be filled one-to-one.

    ``individuals`` maps each individual to the horizontal types she holds
    (an iterable of ``(id, types)`` pairs is accepted too).  Slot type ``h``
    offers ``reservations[h]`` seats; an individual fills at most one seat,
    of a type she holds.  Solved by augmenting paths on the bipartite graph
    individuals x slot types with type capacities.
    """
    items = individuals.items() if isinstance(individuals, Mapping) else individuals
    adj = []
    for _, types in items:
        adj.append([h for h in types if reservations.get(h, 0) > 0])
    cap = {h: k for h, k in reservations.items() if k > 0}
    holders: dict = {h: [] for h in cap}  # type -> indices of individuals assigned

    def augment(u: int, seen: set) -> bool:
        for h in adj[u]:
            if h in seen:
                continue
            seen.add(h)
            if len(holders[h]) < cap[h]:
                holders[h].append(u)
                return True
            for v in list(holders[h]):
                if augment(v, seen):
                    holders[h].remove(v)
                    holders[h].append(u)
                    return True
        return False

    size = 0
    for u in range(len(adj)):
        if adj[u] and augment(u, set()):
            size += 1
    return size


def _utilization(contracts: Iterable[Contract], inp: SubChoiceInput) -> int:
    return max_horizontal_utilization(
        [(c.individual, inp.types_of(c.individual)) for c in contracts], inp.reservations)


def meritorious_subchoice(inp: SubChoiceInput) -> frozenset:
    """One-to-one horizontal matching followed by merit fill.

    Phase 1 repeatedly adds the highest-merit individual whose addition
    raises the maximum number of filled reserved slots, at most as many
    times as there are reserved slots.  Phase 2 fills what is left by merit.
    """
    pool = inp.ranked()
    if inp.capacity <= 0 or not pool:
        return frozenset()
    chosen: list = []
    current = 0
    budget = sum(k for k in inp.reservations.values() if k > 0)
    for _ in range(budget):
        if len(chosen) >= inp.capacity:
            break
        pick = None
        for c in pool:
            if not inp.types_of(c.individual):
                continue
            if _utilization(chosen + [c], inp) == current + 1:
                pick = c
                break
        if pick is None:
            break
        chosen.append(pick)
        pool.remove(pick)
        current += 1
    chosen.extend(pool[:inp.capacity - len(chosen)])
    return frozenset(chosen)


def merit_subchoice(inp: SubChoiceInput) -> frozenset:
    """Top-``capacity`` acceptable contracts by merit, reservations ignored."""
    if inp.capacity <= 0:
        return frozenset()
    return frozenset(inp.ranked()[:inp.capacity])


SubChoiceRule = Callable[[SubChoiceInput], frozenset]

SUBCHOICE_RULES: dict = {
    "hierarchical": hierarchical_subchoice,
    "meritorious": meritorious_subchoice,
}

#: rules kept out of instance files unless they opt in; see harness
CONTROL_RULES: dict = {}


def register_control(name: str, rule: SubChoiceRule) -> None:
    if not name.startswith(CONTROL_PREFIX):
        raise ValueError(f"control rule names start with {CONTROL_PREFIX!r}")
    CONTROL_RULES[name] = rule


def resolve(kind: str) -> SubChoiceRule:
    if kind in SUBCHOICE_RULES:
        return SUBCHOICE_RULES[kind]
    if kind.startswith(CONTROL_PREFIX):
        from . import controls  # noqa: F401  registers the controls

        if kind in CONTROL_RULES:
            return CONTROL_RULES[kind]
    raise KeyError(f"unknown sub-choice rule {kind!r}")
