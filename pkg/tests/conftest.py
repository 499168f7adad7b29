import json
from pathlib import Path

import pytest

from reservematch import Category, Contract, validate_instance

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

O, SC, OBC = Category.OPEN, Category.SC, Category.OBC


def fixture_path(name: str) -> Path:
    return FIXTURES / name


def load_fixture(name: str):
    return validate_instance(json.loads(fixture_path(name).read_text()))


def one_institution(people, capacity, merit=None, reservations=None, rule=None, types=()):
    """Single-institution instance from (id, membership, horizontal, prefs) tuples."""
    raw = {
        "horizontal_types": [{"id": h, "contains": list(c)} for h, c in types],
        "institutions": [{"id": "s", "capacity": capacity,
                          "horizontal_reservations": reservations or {},
                          "merit": merit or [p[0] for p in people]}],
        "individuals": [{"id": i, "vertical": m, "horizontal": list(h),
                         "preferences": [["s", c] for c in prefs]}
                        for i, m, h, prefs in people],
    }
    if rule:
        raw["institutions"][0]["rule"] = rule
    return validate_instance(raw)


def C(i, cat, s="s"):
    return Contract(i, s, Category.parse(cat))


@pytest.fixture
def two_person():
    return load_fixture("two_person.json")
