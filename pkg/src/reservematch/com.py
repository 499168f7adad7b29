"""The cumulative offer process and predicates on its outcomes."""
from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .choice import GLChoice, build_rules
from .model import Category, Contract, Instance, Matching

EXHAUSTIVE_LIMIT = 12
DEFAULT_CAP = 3


@dataclass(frozen=True)
class Step:
    step: int
    proposer: str
    contract: Contract
    institution: str
    held: frozenset
    rejected: frozenset

    def to_record(self) -> dict:
        return {"step": self.step, "proposer": self.proposer,
                "contract": _contract_raw(self.contract), "institution": self.institution,
                "held": [_contract_raw(c) for c in sorted(self.held)],
                "rejected": [_contract_raw(c) for c in sorted(self.rejected)]}


@dataclass
class CopResult:
    matching: Matching
    trace: list
    #: cumulative offers each institution has received
    pools: dict = field(default_factory=dict)

    def trace_lines(self) -> str:
        return "".join(json.dumps(s.to_record()) + "\n" for s in self.trace)


def _contract_raw(c: Contract) -> list:
    return [c.individual, c.institution, c.category.value]


def contract_from_raw(raw: Sequence) -> Contract:
    return Contract(str(raw[0]), str(raw[1]), Category.parse(raw[2]))


def _proposer_picker(order: "str | Callable", seed: int | None):
    if callable(order):
        return order
    if order == "lowest":
        return lambda free: min(free)
    if order == "highest":
        return lambda free: max(free)
    if order == "random":
        rng = random.Random(seed)
        return lambda free: rng.choice(sorted(free))
    raise ValueError(f"unknown proposer order {order!r}")


def cumulative_offer_process(instance: Instance, variant: str | None = None,
                             rules: Mapping[str, GLChoice] | None = None,
                             order: "str | Callable" = "lowest",
                             seed: int | None = None) -> CopResult:
    """Run the cumulative offer process.

    While some individual holds no contract and has contracts she has not yet
    proposed, one of them (chosen by ``order``: ``lowest``/``highest`` id,
    ``random`` with ``seed``, or a callable over the sorted free ids) proposes
    her next contract.  Its institution adds it to everything it has ever
    been offered and holds its choice from that pool.
    """
    if rules is None:
        rules = build_rules(instance, variant)
    pick = _proposer_picker(order, seed)
    lists = {i: instance.contracts_of(i) for i in instance.individuals}
    pointer = {i: 0 for i in instance.individuals}
    pools: dict = {s: frozenset() for s in instance.institutions}
    held: dict = {s: frozenset() for s in instance.institutions}
    trace: list = []
    step = 0
    while True:
        holding = {c.individual for cs in held.values() for c in cs}
        free = [i for i in instance.individuals
                if i not in holding and pointer[i] < len(lists[i])]
        if not free:
            break
        i = pick(sorted(free))
        x = lists[i][pointer[i]]
        pointer[i] += 1
        s = x.institution
        pools[s] = pools[s] | {x}
        held[s] = rules[s](pools[s])
        step += 1
        trace.append(Step(step, i, x, s, held[s], pools[s] - held[s]))
    outcome = frozenset().union(*held.values())
    return CopResult(Matching(outcome), trace, pools)


def com_outcome(instance: Instance, rules: Mapping[str, GLChoice], **kw) -> Matching:
    return cumulative_offer_process(instance, rules=rules, **kw).matching


@dataclass(frozen=True)
class StabilityVerdict:
    """Outcome of :func:`is_stable`; each condition reports its own witness."""

    stable: bool
    #: contracts the individual ranks below her outside option
    unacceptable: tuple = ()
    #: contracts an institution would not choose from its own assignment
    rejected: tuple = ()
    #: a blocking set, empty if none was found within ``block_cap``
    block: tuple = ()
    block_cap: int = 0
    exhaustive: bool = True

    def __bool__(self) -> bool:
        return self.stable

    @property
    def witness(self) -> tuple:
        return self.block or self.rejected or self.unacceptable

    @property
    def reason(self) -> str:
        if self.stable:
            return ""
        parts = []
        if self.unacceptable:
            parts.append("individual rationality")
        if self.rejected:
            parts.append("institution rejects part of its assignment")
        if self.block:
            parts.append("blocked")
        return ", ".join(parts)


def default_block_cap(instance: Instance) -> int:
    n = len(instance.all_contracts())
    return n if n <= EXHAUSTIVE_LIMIT else DEFAULT_CAP


def is_stable(matching: "Matching | Iterable", instance: Instance,
              variant: str | None = None, block_cap: int | None = None,
              rules: Mapping[str, GLChoice] | None = None) -> StabilityVerdict:
    """Check individual rationality, choice consistency and absence of blocks.

    All three conditions are evaluated.  Blocking sets hold at most one
    contract per individual, each strictly preferred by its individual to
    her current assignment; every institution involved must choose all of
    its part of the block from the matching plus the block.  Sets of up to
    ``block_cap`` contracts are searched, smallest first.
    """
    y = matching.contracts if isinstance(matching, Matching) else frozenset(matching)
    Matching(frozenset(y))
    if rules is None:
        rules = build_rules(instance, variant)
    if block_cap is None:
        block_cap = default_block_cap(instance)
    if block_cap < 1:
        raise ValueError("block_cap must be at least 1")

    current = {c.individual: c for c in y}
    unacceptable = tuple(c for c in sorted(y)
                         if instance.individuals[c.individual].rank_of(c.institution, c.category) is None)
    rejected: list = []
    for s, rule in rules.items():
        y_s = frozenset(c for c in y if c.institution == s)
        rejected.extend(sorted(y_s - rule(y_s)))

    better = []
    for i, ind in instance.individuals.items():
        own = current.get(i)
        limit = ind.rank_of(own.institution, own.category) if own else len(ind.preferences)
        if limit is None:
            limit = len(ind.preferences)
        opts = [Contract(i, s, cat) for s, cat in ind.preferences[:limit]]
        if opts:
            better.append(opts)
    exhaustive = block_cap >= len(better)
    block: tuple = ()
    for size in range(1, min(block_cap, len(better)) + 1):
        for group in itertools.combinations(better, size):
            for z in itertools.product(*group):
                if _blocks(z, y, rules):
                    block = tuple(z)
                    break
            if block:
                break
        if block:
            break
    stable = not (unacceptable or rejected or block)
    return StabilityVerdict(stable, unacceptable, tuple(rejected), block, block_cap, exhaustive)


def _blocks(z: Sequence[Contract], y: frozenset, rules: Mapping[str, GLChoice]) -> bool:
    for s in {c.institution for c in z}:
        z_s = frozenset(c for c in z if c.institution == s)
        y_s = frozenset(c for c in y if c.institution == s)
        if not z_s <= rules[s](y_s | z_s):
            return False
    return True


def eliminates_justified_envy(matching: "Matching | Iterable", instance: Instance):
    """Return ``(True, None)`` or ``(False, (x, y))`` where ``i(x)`` justly envies ``y``.

    ``i(x)`` prefers ``y``'s institution and category to her own, ranks
    above ``i(y)`` at ``y``'s institution, and holds every horizontal type
    ``i(y)`` holds.
    """
    contracts = matching.contracts if isinstance(matching, Matching) else frozenset(matching)
    contracts = sorted(contracts)
    for x in contracts:
        ix = instance.individuals[x.individual]
        own = ix.rank_of(x.institution, x.category)
        for y in contracts:
            if y.individual == x.individual:
                continue
            theirs = ix.rank_of(y.institution, y.category)
            if theirs is None or (own is not None and theirs >= own):
                continue
            merit = instance.institutions[y.institution].merit_rank()
            worst = len(merit)
            if merit.get(x.individual, worst) < merit.get(y.individual, worst) \
                    and instance.individuals[y.individual].types <= ix.types:
                return False, (x, y)
    return True, None
