"""Domain types, instance validation and the preference language.

An instance is a set of individuals (vertical membership, horizontal types,
ranked (institution, category) pairs) and a set of institutions (vertical
capacities, horizontal reservations per category, a strict merit order and
the configuration of their choice rule).  Everything here is immutable once
validated.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, NamedTuple, Sequence

FORMAT_VERSION = 1


class Category(str, enum.Enum):
    OPEN = "Open"
    SC = "SC"
    ST = "ST"
    OBC = "OBC"
    EWS = "EWS"
    DERESERVED = "DeReserved"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, value: "str | Category") -> "Category":
        if isinstance(value, Category):
            return value
        key = str(value).strip().lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        if key == "o":
            return cls.OPEN
        raise ValueError(f"unknown category {value!r}")


VERTICAL = (Category.OPEN, Category.SC, Category.ST, Category.OBC, Category.EWS)
RESERVED = (Category.SC, Category.ST, Category.OBC, Category.EWS)

#: membership value of individuals outside every reserved category
GENERAL = "GC"

#: statutory shares of reserved categories; the open category takes the rest
STATUTORY_SHARES = {
    Category.SC: 0.15,
    Category.ST: 0.075,
    Category.OBC: 0.27,
    Category.EWS: 0.10,
}


class Contract(NamedTuple):
    individual: str
    institution: str
    category: Category

    def __str__(self) -> str:
        return f"({self.individual},{self.institution},{self.category.value})"


#: ranked (institution, category) pairs, most preferred first
PreferenceList = tuple  # tuple[tuple[str, Category], ...]


class SubChoiceKind(str, enum.Enum):
    HIERARCHICAL = "hierarchical"
    MERITORIOUS = "meritorious"


class TransferKind(str, enum.Enum):
    NONE = "none"
    OBC_DERESERVATION = "obc_dereservation"
    CUSTOM = "custom"


@dataclass(frozen=True)
class TransferPolicy:
    """Capacity functions feeding later categories with earlier vacancies.

    ``table`` is only used by ``CUSTOM``: it maps a category to a mapping from
    the vacancy vector of all preceding categories to that category's
    capacity.  Missing vectors fall back to the all-zero entry, and a missing
    all-zero entry falls back to the category's vertical capacity.
    """

    kind: TransferKind = TransferKind.NONE
    table: Mapping[Category, Mapping[tuple, int]] = field(default_factory=dict)

    def capacity(self, position: int, precedence: Sequence[Category],
                 vacancies: Sequence[int], base: Mapping[Category, int]) -> int:
        category = precedence[position]
        if position == 0:
            return base.get(category, 0)
        if self.kind is TransferKind.NONE:
            return base.get(category, 0)
        if self.kind is TransferKind.OBC_DERESERVATION:
            if category is Category.DERESERVED:
                return vacancies[precedence.index(Category.OBC)]
            return base.get(category, 0)
        entries = self.table.get(category)
        if entries is None:
            return base.get(category, 0)
        zero = (0,) * position
        default = entries.get(zero, base.get(category, 0))
        return entries.get(tuple(vacancies[:position]), default)


DEFAULT_PRECEDENCE = VERTICAL


@dataclass(frozen=True)
class ChoiceConfig:
    precedence: tuple = DEFAULT_PRECEDENCE
    subchoice: Mapping[Category, str] = field(
        default_factory=lambda: {c: SubChoiceKind.HIERARCHICAL.value for c in VERTICAL})
    transfer: TransferPolicy = field(default_factory=TransferPolicy)
    #: who competes for de-reserved seats: "all" (every unchosen individual's
    #: open contract) or "general" (GC individuals only)
    dereserved_scope: str = "all"

    def kind(self, category: Category) -> str:
        if category is Category.DERESERVED:
            return self.subchoice.get(category, self.subchoice.get(Category.OPEN, "hierarchical"))
        return self.subchoice.get(category, SubChoiceKind.HIERARCHICAL.value)


@dataclass(frozen=True)
class Individual:
    id: str
    membership: "Category | None"  # None means general category
    types: frozenset = frozenset()
    preferences: tuple = ()

    @property
    def is_general(self) -> bool:
        return self.membership is None

    def eligible(self, category: Category) -> bool:
        if category in (Category.OPEN, Category.DERESERVED):
            return True
        return self.membership is category

    def rank_of(self, institution: str, category: Category) -> "int | None":
        """Position of (institution, category) in the list, None if unacceptable."""
        try:
            return self.preferences.index((institution, category))
        except ValueError:
            return None


@dataclass(frozen=True)
class Institution:
    id: str
    capacities: Mapping[Category, int]
    reservations: Mapping[Category, Mapping[str, int]]
    merit: tuple
    config: ChoiceConfig = field(default_factory=ChoiceConfig)

    @property
    def total_capacity(self) -> int:
        return sum(self.capacities.get(c, 0) for c in VERTICAL)

    def merit_rank(self) -> dict:
        return {ind: pos for pos, ind in enumerate(self.merit)}


@dataclass(frozen=True)
class Instance:
    #: declared containment forest: type -> direct children, declaration order
    horizontal_types: Mapping[str, tuple]
    institutions: Mapping[str, Institution]
    individuals: Mapping[str, Individual]
    negative_control: bool = False
    warnings: tuple = field(default=(), compare=False)

    def parents(self) -> dict:
        out = {h: None for h in self.horizontal_types}
        for h, children in self.horizontal_types.items():
            for c in children:
                out[c] = h
        return out

    def contracts_of(self, individual: str) -> list:
        ind = self.individuals[individual]
        return [Contract(individual, s, c) for s, c in ind.preferences]

    def all_contracts(self) -> list:
        """Every admissible contract, whether or not it is ranked."""
        out = []
        for ind in self.individuals.values():
            for s in self.institutions:
                out.append(Contract(ind.id, s, Category.OPEN))
                if ind.membership is not None:
                    out.append(Contract(ind.id, s, ind.membership))
        return out

    def admissible_pairs(self, individual: str) -> list:
        ind = self.individuals[individual]
        pairs = []
        for s in self.institutions:
            pairs.append((s, Category.OPEN))
            if ind.membership is not None:
                pairs.append((s, ind.membership))
        return pairs

    def with_preferences(self, individual: str, preferences: Iterable) -> "Instance":
        inds = dict(self.individuals)
        old = inds[individual]
        inds[individual] = Individual(old.id, old.membership, old.types, tuple(preferences))
        return Instance(self.horizontal_types, self.institutions, inds,
                        self.negative_control, self.warnings)

    def with_config(self, configs: Mapping[str, ChoiceConfig]) -> "Instance":
        insts = {}
        for sid, inst in self.institutions.items():
            cfg = configs.get(sid, inst.config)
            insts[sid] = Institution(inst.id, inst.capacities, inst.reservations, inst.merit, cfg)
        return Instance(self.horizontal_types, insts, self.individuals,
                        self.negative_control, self.warnings)


@dataclass(frozen=True)
class Matching:
    contracts: frozenset

    def __post_init__(self):
        seen = set()
        for c in self.contracts:
            if c.individual in seen:
                raise ValueError(f"infeasible matching: {c.individual} holds two contracts")
            seen.add(c.individual)

    def of(self, individual: str) -> "Contract | None":
        for c in self.contracts:
            if c.individual == individual:
                return c
        return None

    def at(self, institution: str) -> frozenset:
        return frozenset(c for c in self.contracts if c.institution == institution)

    def __iter__(self):
        return iter(sorted(self.contracts))

    def __len__(self) -> int:
        return len(self.contracts)


class ValidationError(ValueError):
    """Raised with the complete list of violations of an instance."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def expand_institution_ranking(ranking: Sequence[str], membership: "Category | str | None",
                               disclose: bool = True) -> PreferenceList:
    """Translate a ranking over institutions into (institution, category) pairs.

    A reserved-category member who discloses membership is considered for the
    open seat of each institution first and then for its reserved seat;
    otherwise only open seats are listed.
    """
    if len(set(ranking)) != len(ranking):
        raise ValueError("ranking lists an institution twice")
    member = _parse_membership(membership)
    out = []
    for s in ranking:
        out.append((s, Category.OPEN))
        if disclose and member is not None:
            out.append((s, member))
    return tuple(out)


def statutory_capacities(total: int) -> dict:
    """Vertical capacities at statutory shares, residual to the open category."""
    caps = {c: int(share * total + 0.5) for c, share in STATUTORY_SHARES.items()}
    reserved = sum(caps.values())
    if reserved > total:
        raise ValueError(f"capacity {total} too small for statutory shares")
    caps[Category.OPEN] = total - reserved
    return {c: caps[c] for c in VERTICAL}


def is_chain(types: Iterable[str], parents: Mapping[str, "str | None"]) -> bool:
    """True when every pair of types is related by declared containment."""
    types = list(types)
    for a in types:
        anc_a = set(ancestors(a, parents)) | {a}
        for b in types:
            if b not in anc_a and a not in ancestors(b, parents):
                return False
    return True


def ancestors(h: str, parents: Mapping[str, "str | None"]) -> list:
    out = []
    p = parents.get(h)
    while p is not None:
        out.append(p)
        p = parents.get(p)
    return out


def laminar_violations(instance: Instance) -> list:
    parents = instance.parents()
    return [ind.id for ind in instance.individuals.values()
            if not is_chain(ind.types, parents)]


# ---------------------------------------------------------------------------
# parsing and validation

def _parse_membership(value) -> "Category | None":
    if value is None:
        return None
    if isinstance(value, Category):
        return value
    if str(value).upper() in (GENERAL, "GENERAL"):
        return None
    return Category.parse(value)


def _parse_transfer(raw, errors: list, where: str) -> TransferPolicy:
    if raw is None or raw == TransferKind.NONE.value:
        return TransferPolicy()
    if isinstance(raw, str):
        try:
            return TransferPolicy(TransferKind(raw))
        except ValueError:
            errors.append(f"{where}: unknown transfer policy {raw!r}")
            return TransferPolicy()
    if isinstance(raw, Mapping):
        try:
            kind = TransferKind(raw.get("kind", "custom"))
        except ValueError:
            errors.append(f"{where}: unknown transfer policy {raw.get('kind')!r}")
            return TransferPolicy()
        table = {}
        for cat, entries in (raw.get("table") or {}).items():
            try:
                category = Category.parse(cat)
                table[category] = {
                    tuple(int(v) for v in key.split(",") if v.strip() != ""): int(q)
                    for key, q in entries.items()}
            except (ValueError, AttributeError) as exc:
                errors.append(f"{where}: bad transfer table entry for {cat!r}: {exc}")
        return TransferPolicy(kind, table)
    errors.append(f"{where}: malformed transfer policy")
    return TransferPolicy()


def _parse_config(raw, errors: list, where: str) -> ChoiceConfig:
    raw = raw or {}
    transfer = _parse_transfer(raw.get("transfer"), errors, where)
    if "precedence" in raw and raw["precedence"] is not None:
        try:
            precedence = tuple(Category.parse(c) for c in raw["precedence"])
        except ValueError as exc:
            errors.append(f"{where}: {exc}")
            precedence = DEFAULT_PRECEDENCE
    else:
        precedence = DEFAULT_PRECEDENCE
        if transfer.kind is TransferKind.OBC_DERESERVATION:
            precedence = DEFAULT_PRECEDENCE + (Category.DERESERVED,)
    sub = raw.get("subchoice", SubChoiceKind.HIERARCHICAL.value)
    if isinstance(sub, str):
        subchoice = {c: sub for c in precedence}
    else:
        subchoice = {}
        for cat, kind in sub.items():
            try:
                subchoice[Category.parse(cat)] = kind
            except ValueError as exc:
                errors.append(f"{where}: {exc}")
        for c in precedence:
            subchoice.setdefault(c, SubChoiceKind.HIERARCHICAL.value)
    scope = raw.get("dereserved_scope", "all")
    if scope not in ("all", "general"):
        errors.append(f"{where}: dereserved_scope must be 'all' or 'general'")
    return ChoiceConfig(precedence, subchoice, transfer, scope)


def _check_config(cfg: ChoiceConfig, inst_caps: Mapping, negative_control: bool,
                  errors: list, where: str) -> None:
    from .subchoice import SUBCHOICE_RULES, CONTROL_PREFIX

    seen = set()
    for c in cfg.precedence:
        if c in seen:
            errors.append(f"{where}: precedence lists {c.value} twice")
        seen.add(c)
    missing = [c.value for c in VERTICAL if c not in seen]
    if missing:
        errors.append(f"{where}: precedence omits {', '.join(missing)}")
    has_d = Category.DERESERVED in seen
    if has_d != (cfg.transfer.kind is TransferKind.OBC_DERESERVATION):
        errors.append(f"{where}: DeReserved misuse: it must appear exactly when "
                      "the transfer policy is OBC de-reservation")
    for c in cfg.precedence:
        kind = cfg.kind(c)
        if kind.startswith(CONTROL_PREFIX):
            if not negative_control:
                errors.append(f"{where}: negative-control rule {kind!r} requires "
                              "negative_control: true")
            from . import controls  # noqa: F401  registers the controls
            from .subchoice import CONTROL_RULES

            if kind not in CONTROL_RULES:
                errors.append(f"{where}: unknown sub-choice rule {kind!r}")
            continue
        if kind not in SUBCHOICE_RULES:
            errors.append(f"{where}: unknown sub-choice rule {kind!r}")
    if cfg.transfer.kind is TransferKind.CUSTOM and not errors:
        from .choice import transfer_monotonicity_witness

        witness = transfer_monotonicity_witness(cfg, inst_caps)
        if witness is not None:
            errors.append(f"{where}: custom transfer policy is not monotonic: {witness}")


def validate_instance(raw: "Mapping[str, Any] | Instance") -> Instance:
    """Build a validated :class:`Instance` or raise :class:`ValidationError`.

    Accepts either the JSON document (as parsed) or an existing instance, in
    which case it is re-checked and returned unchanged.
    """
    if isinstance(raw, Instance):
        raw = instance_to_dict(raw)
    if not isinstance(raw, Mapping):
        raise ValidationError(["instance document must be an object"])
    errors: list = []
    warnings: list = []
    negative_control = bool(raw.get("negative_control", False))
    version = raw.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        errors.append(f"unsupported format_version {version!r} (this build reads {FORMAT_VERSION})")

    # horizontal types form a forest
    forest: dict = {}
    parents: dict = {}
    for decl in raw.get("horizontal_types", []) or []:
        hid = str(decl["id"])
        if hid in forest:
            errors.append(f"horizontal type {hid!r} declared twice")
        forest[hid] = tuple(str(c) for c in decl.get("contains", []) or [])
    for h, children in forest.items():
        for c in children:
            if c not in forest:
                errors.append(f"non-laminar declared forest: {h!r} contains undeclared type {c!r}")
                continue
            if c in parents and parents[c] != h:
                errors.append(f"non-laminar declared forest: {c!r} has two parents "
                              f"({parents[c]!r}, {h!r})")
            parents[c] = h
    for h in forest:
        parents.setdefault(h, None)
        seen = {h}
        p = parents.get(h)
        while p is not None:
            if p in seen:
                errors.append(f"non-laminar declared forest: containment cycle through {h!r}")
                break
            seen.add(p)
            p = parents.get(p)

    # individuals
    individuals: dict = {}
    for rawi in raw.get("individuals", []) or []:
        iid = str(rawi["id"])
        if iid in individuals:
            errors.append(f"individual {iid!r} declared twice")
        try:
            member = _parse_membership(rawi.get("vertical", GENERAL))
        except ValueError as exc:
            errors.append(f"individual {iid!r}: {exc}")
            member = None
        if member in (Category.OPEN, Category.DERESERVED):
            errors.append(f"individual {iid!r}: membership cannot be {member.value}"
                          + (" (DeReserved misuse)" if member is Category.DERESERVED else ""))
            member = None
        types = frozenset(str(h) for h in rawi.get("horizontal", []) or [])
        for h in sorted(types - set(forest)):
            errors.append(f"individual {iid!r}: undeclared horizontal type {h!r}")
        prefs = []
        for pair in rawi.get("preferences", []) or []:
            s, cat = pair
            try:
                category = Category.parse(cat)
            except ValueError as exc:
                errors.append(f"individual {iid!r}: {exc}")
                continue
            prefs.append((str(s), category))
        individuals[iid] = Individual(iid, member, types, tuple(prefs))

    # institutions
    institutions: dict = {}
    for raws in raw.get("institutions", []) or []:
        sid = str(raws["id"])
        where = f"institution {sid!r}"
        if sid in institutions:
            errors.append(f"{where} declared twice")
        caps = {}
        for cat, n in (raws.get("capacity") or {}).items():
            try:
                category = Category.parse(cat)
            except ValueError as exc:
                errors.append(f"{where}: {exc}")
                continue
            if category is Category.DERESERVED:
                errors.append(f"{where}: DeReserved misuse: no capacity may be declared for it")
                continue
            if int(n) < 0:
                errors.append(f"{where}: negative capacity for {category.value}")
            caps[category] = int(n)
        caps = {c: caps.get(c, 0) for c in VERTICAL}
        total = raws.get("total_capacity")
        if total is not None and int(total) != sum(caps.values()):
            errors.append(f"{where}: capacity-sum mismatch: total {total} but vertical "
                          f"capacities sum to {sum(caps.values())}")
        reservations = {}
        for cat, table in (raws.get("horizontal_reservations") or {}).items():
            try:
                category = Category.parse(cat)
            except ValueError as exc:
                errors.append(f"{where}: {exc}")
                continue
            if category is Category.DERESERVED:
                errors.append(f"{where}: DeReserved misuse: no reservations may be declared for it")
                continue
            reservations[category] = {str(h): int(k) for h, k in table.items()}
        for category, table in reservations.items():
            for h, k in table.items():
                if h not in forest:
                    errors.append(f"{where}: reservation for undeclared type {h!r}")
                if k < 0:
                    errors.append(f"{where}: negative reservation for {h!r}")
                p = parents.get(h)
                if p is not None and k > table.get(p, 0):
                    errors.append(f"{where}: kappa consistency violation in {category.value}: "
                                  f"{h!r} reserves {k} > parent {p!r} reserves {table.get(p, 0)}")
            root_sum = sum(k for h, k in table.items() if parents.get(h) is None)
            if root_sum > caps.get(category, 0):
                errors.append(f"{where}: kappa consistency violation in {category.value}: "
                              f"root reservations {root_sum} exceed capacity {caps.get(category, 0)}")
        merit = tuple(str(i) for i in raws.get("merit", []) or [])
        if len(set(merit)) != len(merit):
            dups = sorted({i for i in merit if merit.count(i) > 1})
            errors.append(f"{where}: duplicate merit entry {', '.join(dups)}")
        for i in merit:
            if i not in individuals:
                errors.append(f"{where}: merit lists unknown individual {i!r}")
        cfg = _parse_config(raws.get("rule"), errors, where)
        _check_config(cfg, caps, negative_control, errors, where)
        institutions[sid] = Institution(sid, caps, reservations, merit, cfg)

    # preferences refer to admissible pairs
    for ind in individuals.values():
        seen = set()
        for s, cat in ind.preferences:
            if (s, cat) in seen:
                errors.append(f"individual {ind.id!r}: duplicate preference pair ({s}, {cat.value})")
            seen.add((s, cat))
            if s not in institutions:
                errors.append(f"individual {ind.id!r}: preference names unknown institution {s!r}")
            if not (cat is Category.OPEN or cat is ind.membership):
                errors.append(f"individual {ind.id!r}: inadmissible preference pair ({s}, {cat.value})")

    # hierarchical rules need nested types on the population
    for sid, inst in institutions.items():
        uses_h = any(inst.config.kind(c) == SubChoiceKind.HIERARCHICAL.value
                     for c in inst.config.precedence)
        if uses_h:
            bad = [i.id for i in individuals.values() if not is_chain(i.types, parents)]
            if bad:
                errors.append(f"institution {sid!r}: hierarchical rule on non-laminar types "
                              f"(individuals {', '.join(bad)})")

    # declared containment should agree with the population (warn only)
    for h, children in forest.items():
        for c in children:
            holders_c = {i.id for i in individuals.values() if c in i.types}
            holders_h = {i.id for i in individuals.values() if h in i.types}
            if not holders_c <= holders_h:
                warnings.append(f"type {h!r} declared to contain {c!r} but individuals "
                                f"{', '.join(sorted(holders_c - holders_h))} hold {c!r} without {h!r}")
            elif holders_c and holders_c == holders_h:
                warnings.append(f"type {h!r} contains {c!r} only weakly on this population")

    if errors:
        raise ValidationError(errors)
    return Instance(forest, institutions, individuals, negative_control, tuple(warnings))


# ---------------------------------------------------------------------------
# serialization

def _transfer_to_raw(t: TransferPolicy):
    if t.kind is not TransferKind.CUSTOM:
        return t.kind.value
    return {"kind": "custom",
            "table": {c.value: {",".join(str(v) for v in key): q for key, q in entries.items()}
                      for c, entries in t.table.items()}}


def config_to_dict(cfg: ChoiceConfig) -> dict:
    kinds = {cfg.kind(c) for c in cfg.precedence}
    if len(kinds) == 1:
        sub = kinds.pop()
    else:
        sub = {c.value: cfg.kind(c) for c in cfg.precedence}
    out = {"subchoice": sub, "transfer": _transfer_to_raw(cfg.transfer),
           "precedence": [c.value for c in cfg.precedence]}
    if cfg.dereserved_scope != "all":
        out["dereserved_scope"] = cfg.dereserved_scope
    return out


def instance_to_dict(instance: Instance) -> dict:
    """Canonical JSON document for an instance."""
    out = {"format_version": FORMAT_VERSION}
    if instance.negative_control:
        out["negative_control"] = True
    out["horizontal_types"] = [{"id": h, "contains": list(children)}
                               for h, children in instance.horizontal_types.items()]
    out["institutions"] = [
        {"id": s.id,
         "total_capacity": s.total_capacity,
         "capacity": {c.value: s.capacities.get(c, 0) for c in VERTICAL},
         "horizontal_reservations": {c.value: dict(table) for c, table in s.reservations.items()},
         "merit": list(s.merit),
         "rule": config_to_dict(s.config)}
        for s in instance.institutions.values()]
    out["individuals"] = [
        {"id": i.id,
         "vertical": GENERAL if i.membership is None else i.membership.value,
         "horizontal": sorted(i.types),
         "preferences": [[s, c.value] for s, c in i.preferences]}
        for i in instance.individuals.values()]
    return out
