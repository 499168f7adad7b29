"""Deliberately broken sub-choice rules.

Each one violates exactly the property named in its docstring, so the
property checks can be shown to catch it.  They are registered under the
``control-`` prefix and are only accepted in instance files that set
``"negative_control": true``.
"""
from __future__ import annotations

from .subchoice import SubChoiceInput, register_control


def complement_rule(inp: SubChoiceInput) -> frozenset:
    """Complementarity: the top two are taken only together.

    With a single acceptable offer nothing is chosen, so adding a second
    offer can make the first chosen, which breaks substitutability.
    """
    ranked = inp.ranked()
    if inp.capacity < 2 or len(ranked) < 2:
        return frozenset()
    return frozenset(ranked[:inp.capacity])


def reverse_merit_rule(inp: SubChoiceInput) -> frozenset:
    """Fills seats from the bottom of the merit order (unfair)."""
    if inp.capacity <= 0:
        return frozenset()
    ranked = inp.ranked()
    return frozenset(ranked[::-1][:inp.capacity])


def quota_swap_rule(inp: SubChoiceInput) -> frozenset:
    """Takes the top ``q`` when ``q`` is odd and the next ``q`` when even."""
    ranked = inp.ranked()
    q = inp.capacity
    if q <= 0:
        return frozenset()
    if q % 2:
        return frozenset(ranked[:q])
    return frozenset(ranked[1:q + 1])


def even_empty_rule(inp: SubChoiceInput) -> frozenset:
    """Chooses nothing from an even number of offers (not size monotonic)."""
    ranked = inp.ranked()
    if len(inp.contracts) % 2 == 0:
        return frozenset()
    return frozenset(ranked[:inp.capacity])


CONTROLS = {
    "control-complement": complement_rule,
    "control-reverse-merit": reverse_merit_rule,
    "control-quota-swap": quota_swap_rule,
    "control-even-empty": even_empty_rule,
}

for _name, _rule in CONTROLS.items():
    register_control(_name, _rule)
