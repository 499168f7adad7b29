"""Command-line entry points.

Exit codes: 0 success, 1 audit failure, 2 invalid input, 3 I/O or parse error.
"""
from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
import tempfile
from dataclasses import asdict
from pathlib import Path

from . import harness
from .choice import GLChoice, VARIANTS, build_rules, is_fair_violation
from .com import cumulative_offer_process, eliminates_justified_envy, is_stable
from .families import generate_instance
from .model import (Category, Contract, Instance, ValidationError, instance_to_dict,
                    validate_instance)
from .subchoice import SubChoiceInput, hierarchical_subchoice, resolve

EXIT_OK, EXIT_AUDIT, EXIT_INVALID, EXIT_IO = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def read_json(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_IO, f"{path}: malformed JSON: {exc}") from exc


def load_instance(path: str) -> Instance:
    raw = read_json(path)
    try:
        return validate_instance(raw)
    except ValidationError as exc:
        raise CliError(EXIT_INVALID, "\n".join(f"{path}: {e}" for e in exc.errors)) from exc


def write_atomic(path: str, text: str) -> None:
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent or ".", prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _rules(instance: Instance, variant: str | None) -> dict:
    try:
        return build_rules(instance, variant)
    except ValueError as exc:
        raise CliError(EXIT_INVALID, str(exc)) from exc


# ---------------------------------------------------------------------------
# validate

def cmd_validate(args) -> int:
    inst = load_instance(args.path)
    for w in inst.warnings:
        _err(f"{args.path}: warning: {w}")
    print(f"{args.path}: valid ({len(inst.institutions)} institutions, "
          f"{len(inst.individuals)} individuals)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# match

def fill_table(rule: GLChoice, pool: frozenset) -> list:
    """Per category of the rule run on ``pool``: capacity, fills, vacancies, transfers."""
    rows = []
    for step in rule.steps(pool):
        base = rule.capacities.get(step.category, 0)
        rows.append({"category": step.category.value, "base_capacity": base,
                     "capacity": step.capacity, "filled": len(step.chosen),
                     "vacancies": step.vacancies, "transferred_in": step.capacity - base})
    return rows


def run_report(instance: Instance, variant: str | None, check_stability: bool,
               check_envy: bool, trace_path: str | None = None, block_cap: int | None = None,
               order: str = "lowest", seed: int | None = None) -> dict:
    rules = _rules(instance, variant)
    result = cumulative_offer_process(instance, rules=rules, order=order, seed=seed)
    m = result.matching
    matching = {}
    for i in instance.individuals:
        c = m.of(i)
        matching[i] = None if c is None else {"institution": c.institution,
                                              "category": c.category.value}
    institutions = {}
    for sid, rule in rules.items():
        rows = fill_table(rule, result.pools[sid])
        institutions[sid] = {"filled": len(m.at(sid)), "categories": rows}
    verdicts = {}
    if check_stability:
        v = is_stable(m, instance, rules=rules, block_cap=block_cap)
        verdicts["stable"] = v.stable
        verdicts["stability_exhaustive"] = v.exhaustive
        if not v.stable:
            verdicts["stability_reason"] = v.reason
            verdicts["stability_witness"] = harness.jsonable(v.witness)
    if check_envy:
        ok, pair = eliminates_justified_envy(m, instance)
        verdicts["envy_free"] = ok
        if not ok:
            verdicts["envy_witness"] = harness.jsonable(pair)
    if trace_path:
        write_atomic(trace_path, result.trace_lines())
    return {"rule": variant or "instance", "matching": matching, "institutions": institutions,
            "verdicts": verdicts, "steps": len(result.trace), "trace": trace_path}


def render_report(report: dict) -> str:
    lines = [f"rule: {report['rule']}   proposals: {report['steps']}", "", "matching"]
    width = max([len(i) for i in report["matching"]] + [10])
    for i, a in report["matching"].items():
        where = "unmatched" if a is None else f"{a['institution']} / {a['category']}"
        lines.append(f"  {i:<{width}}  {where}")
    for sid, info in report["institutions"].items():
        lines += ["", f"institution {sid} (filled {info['filled']})",
                  f"  {'category':<11}{'base':>6}{'cap':>6}{'filled':>8}{'vacant':>8}{'moved in':>10}"]
        for r in info["categories"]:
            lines.append(f"  {r['category']:<11}{r['base_capacity']:>6}{r['capacity']:>6}"
                         f"{r['filled']:>8}{r['vacancies']:>8}{r['transferred_in']:>10}")
    if report["verdicts"]:
        lines += ["", "verdicts"]
        lines += [f"  {k}: {json.dumps(v)}" for k, v in report["verdicts"].items()]
    if report["trace"]:
        lines += ["", f"trace: {report['trace']}"]
    return "\n".join(lines) + "\n"


def cmd_match(args) -> int:
    inst = load_instance(args.path)
    report = run_report(inst, args.rule, args.check_stability, args.check_envy, args.trace,
                        args.block_cap, args.order, args.seed)
    sys.stdout.write(render_report(report) if args.pretty else dump(report))
    return EXIT_OK


# ---------------------------------------------------------------------------
# audit

CHECKS = ("substitutability", "size_monotonicity", "quota_monotonicity", "transfer_monotonicity",
          "merit_undominated", "declaration_order", "dominance", "completion", "irc", "fairness", "stability",
          "strategy_proofness", "order_independence")


def _category_universe(inst: Instance, sid: str, cat: Category, limit: int):
    merit = inst.institutions[sid].merit_rank()
    worst = len(merit)
    U = sorted((Contract(i, sid, cat) for i in inst.individuals
                if (sid, cat) in inst.admissible_pairs(i)),
               key=lambda c: (merit.get(c.individual, worst), c.individual))
    return U[:limit], len(U) > limit


def _sub_input(inst: Instance, sid: str, cat: Category, X, q: int) -> SubChoiceInput:
    s = inst.institutions[sid]
    return SubChoiceInput(frozenset(X), q, s.reservations.get(cat, {}), inst.parents(),
                          s.merit_rank(), {i.id: i.types for i in inst.individuals.values()})


def audit_instance(inst: Instance, checks, bounds: harness.Bounds, variant: str | None) -> list:
    """Run the named checks on one instance, one merged report per check."""
    reports = []
    rules = _rules(inst, variant) if variant else None
    configs = {sid: (rules[sid].config if rules else s.config)
               for sid, s in inst.institutions.items()}

    def merged(name: str) -> harness.AuditReport:
        rep = harness.AuditReport(name, "instance")
        reports.append(rep)
        return rep

    for name in ("substitutability", "size_monotonicity", "quota_monotonicity"):
        if name not in checks:
            continue
        rep = merged(name)
        for sid, s in inst.institutions.items():
            for cat in configs[sid].precedence:
                if cat is Category.DERESERVED:
                    continue
                kind = configs[sid].kind(cat)
                rule = resolve(kind)
                U, cut = _category_universe(inst, sid, cat, bounds.universe_size)
                q = s.capacities.get(cat, 0)
                where = {"institution": sid, "category": cat.value, "rule": kind}
                if name == "substitutability":
                    one = harness.check_substitutability(
                        lambda X, sid=sid, cat=cat, q=q, r=rule: r(_sub_input(inst, sid, cat, X, q)), U)
                elif name == "size_monotonicity":
                    one = harness.check_size_monotonicity(
                        lambda X, sid=sid, cat=cat, q=q, r=rule: r(_sub_input(inst, sid, cat, X, q)), U)
                else:
                    one = harness.check_quota_monotonicity(
                        lambda X, qq, sid=sid, cat=cat, r=rule: r(_sub_input(inst, sid, cat, X, qq)),
                        U, bounds.q_max)
                one.partial = one.partial or cut
                rep.absorb(one, where)
    if "transfer_monotonicity" in checks:
        rep = merged("transfer_monotonicity")
        for sid, s in inst.institutions.items():
            rep.absorb(harness.check_transfer_monotonicity(configs[sid], s.capacities,
                                                           bounds.vacancy_bound), {"institution": sid})
    if "merit_undominated" in checks:
        rep = merged("merit_undominated")
        for sid, s in inst.institutions.items():
            for cat in configs[sid].precedence:
                if cat is Category.DERESERVED or configs[sid].kind(cat) != "hierarchical":
                    continue
                # any offer set is a valid case, so large categories are cut
                # to their best-ranked offers
                U, cut = _category_universe(inst, sid, cat, bounds.individuals)
                inp = _sub_input(inst, sid, cat, U, s.capacities.get(cat, 0))
                rep.partial = rep.partial or cut
                one = harness.check_merit_undominated(hierarchical_subchoice(inp), U,
                                                      inp.reservations, inp.capacity,
                                                      inp.merit, inp.types)
                rep.absorb(one, {"institution": sid, "category": cat.value})
    if "declaration_order" in checks:
        rep = merged("declaration_order")
        forest = inst.parents()
        for sid, s in inst.institutions.items():
            for cat in configs[sid].precedence:
                if cat is Category.DERESERVED or configs[sid].kind(cat) != "hierarchical":
                    continue
                U, cut = _category_universe(inst, sid, cat, bounds.individuals)
                inp = _sub_input(inst, sid, cat, U, s.capacities.get(cat, 0))
                rep.partial = rep.partial or cut
                base = hierarchical_subchoice(inp)
                for perm in itertools.permutations(forest):
                    rep.cases += 1
                    out = hierarchical_subchoice(SubChoiceInput(
                        inp.contracts, inp.capacity, inp.reservations,
                        {t: forest[t] for t in perm}, inp.merit, inp.types))
                    if out != base:
                        rep.fail({"institution": sid, "category": cat.value, "order": perm,
                                  "declared": base, "permuted": out})
    gl = {sid: GLChoice(inst, sid, configs[sid]) for sid in inst.institutions}
    for name in ("completion", "irc"):
        if name not in checks:
            continue
        rep = merged(name)
        for sid, rule in gl.items():
            U = sorted(harness.offered_to(inst, sid))
            cut = len(U) > bounds.universe_size
            U = U[:bounds.universe_size]
            one = (harness.check_completion_relation(rule, U) if name == "completion"
                   else harness.check_irc(rule.complete, U))
            one.partial = one.partial or cut
            rep.absorb(one, {"institution": sid})
    if "fairness" in checks:
        rep = merged("fairness")
        for sid, rule in gl.items():
            U = sorted(harness.offered_to(inst, sid))
            rep.partial = rep.partial or len(U) > bounds.universe_size
            U = U[:bounds.universe_size]
            for k in range(len(U) + 1):
                for X in itertools.combinations(U, k):
                    rep.cases += 1
                    w = is_fair_violation(X, rule)
                    if w is not None:
                        rep.fail({"institution": sid, "offers": X, "x": w[0], "y": w[1]})
    if "stability" in checks:
        merged("stability").absorb(harness.check_com_outcome(inst, rules=gl))
    if "strategy_proofness" in checks:
        longest = max((len(inst.admissible_pairs(i)) for i in inst.individuals), default=0)
        depth = None if longest <= 4 else bounds.deviation_depth
        merged("strategy_proofness").absorb(harness.check_strategy_proofness(
            inst, depth=depth, rules=gl, case_budget=bounds.case_budget))
    if "order_independence" in checks:
        merged("order_independence").absorb(harness.check_order_independence(
            inst, rules=gl, seeds=range(bounds.random_orders)))
    if "dominance" in checks:
        pop = sorted(inst.individuals)[:6]
        reports.append(harness.check_dominance_reduction(pop, min(5, len(pop))))
    # a check with nothing to examine (say, no hierarchical category) is not reported
    return [r for r in reports if r.cases or not r.passed]


def audit_generated(checks, bounds: harness.Bounds, seed: int) -> list:
    """Run the named checks over the enumerated and seeded families."""
    out = []
    wanted = set(checks)
    axioms = {"substitutability", "size_monotonicity", "quota_monotonicity"}
    if wanted & axioms:
        for kind in ("hierarchical", "meritorious"):
            out += [r for r in harness.audit_subchoice_axioms(kind, bounds, seed)
                    if r.name.split("[")[0] in wanted]
    if "transfer_monotonicity" in wanted:
        out += harness.audit_transfer_policies(bounds)
    if "merit_undominated" in wanted:
        out.append(harness.audit_reservation_optimality(bounds, seed))
    if "declaration_order" in wanted:
        out.append(harness.audit_declaration_order(bounds, seed))
    if "dominance" in wanted:
        out.append(harness.check_dominance_reduction([f"i{k}" for k in range(1, 7)], 5))
    if wanted & {"completion", "irc"}:
        # the completion check also covers substitutability and size
        # monotonicity of the completed rules
        out += [r for r in harness.audit_completion(bounds, seed)
                if "completion" in wanted or r.name.startswith("irc")]
    if "fairness" in wanted:
        out += harness.audit_fairness(bounds, seed)
    market = [c for c in ("stability", "strategy_proofness", "order_independence") if c in wanted]
    if market:
        out += harness.audit_markets(bounds, seed, checks=market)
    return out


def _parse_checks(text: str) -> list:
    names = [c.strip() for c in text.split(",") if c.strip()]
    if names == ["all"]:
        return list(CHECKS)
    unknown = [c for c in names if c not in CHECKS]
    if unknown:
        raise CliError(EXIT_INVALID, f"unknown check(s): {', '.join(unknown)}; "
                                     f"choose from {', '.join(CHECKS)} or all")
    return names


def cmd_audit(args) -> int:
    checks = _parse_checks(args.checks)
    try:
        bounds = harness.Bounds.from_env(args.bounds)
    except (ValueError, TypeError) as exc:
        raise CliError(EXIT_INVALID, f"bad bounds: {exc}") from exc
    if args.gen == (args.path is not None):
        raise CliError(EXIT_INVALID, "give either an instance path or --gen")
    if args.gen:
        reports = audit_generated(checks, bounds, args.seed)
        subject = {"generated": True, "seed": args.seed}
    else:
        paths = sorted(Path(args.path).glob("*.json")) if Path(args.path).is_dir() else [Path(args.path)]
        reports = []
        for p in paths:
            inst = load_instance(str(p))
            for r in audit_instance(inst, checks, bounds, args.rule):
                r.universe = f"{p.name}"
                reports.append(r)
        subject = {"path": args.path}
    passed = all(r.passed for r in reports)
    doc = {"subject": subject, "bounds": asdict(bounds), "passed": passed,
           "checks": [r.to_dict() for r in reports]}
    text = dump(doc)
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    for r in reports:
        _err(r.line())
    if not passed:
        first = next(r for r in reports if not r.passed)
        _err(f"first failing check {first.name}: witness "
             f"{json.dumps(harness.jsonable(first.witness))}")
        return EXIT_AUDIT
    return EXIT_OK


# ---------------------------------------------------------------------------
# gen and replay

def cmd_gen(args) -> int:
    try:
        raw = generate_instance(args.institutions, args.individuals, args.types, args.laminar,
                                args.seed, args.capacity, args.rule)
        inst = validate_instance(raw)
    except ValueError as exc:
        raise CliError(EXIT_INVALID, f"cannot generate: {exc}") from exc
    text = dump(instance_to_dict(inst))
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        lines = Path(args.path).read_text(encoding="utf-8").splitlines()
        records = [json.loads(l) for l in lines if l.strip()]
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_IO, f"cannot read trace {args.path}: {exc}") from exc

    def fmt(c):
        return f"({c[0]},{c[1]},{c[2]})"

    for r in records:
        held = " ".join(fmt(c) for c in r["held"]) or "-"
        rejected = " ".join(fmt(c) for c in r["rejected"]) or "-"
        print(f"{r['step']:>4}  {r['proposer']} proposes {fmt(r['contract'])}  "
              f"{r['institution']} holds {held}  rejects {rejected}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reservematch",
                                description="Matching with vertical and horizontal reservations.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check an instance file")
    v.add_argument("path")
    v.set_defaults(func=cmd_validate)

    m = sub.add_parser("match", help="run the cumulative offer mechanism")
    m.add_argument("path")
    m.add_argument("--rule", choices=VARIANTS,
                   help="overall choice rule for every institution (default: per instance file)")
    m.add_argument("--check-stability", action="store_true")
    m.add_argument("--check-envy", action="store_true")
    m.add_argument("--block-cap", type=int, default=None,
                   help="largest blocking set searched (default exhaustive up to 12 contracts)")
    m.add_argument("--trace", metavar="OUT", help="write the proposal trace as JSON lines")
    m.add_argument("--order", choices=("lowest", "highest", "random"), default="lowest")
    m.add_argument("--seed", type=int, default=None)
    m.add_argument("--pretty", action="store_true", help="aligned text instead of JSON")
    m.set_defaults(func=cmd_match)

    a = sub.add_parser("audit", help="run property checks")
    a.add_argument("path", nargs="?", help="instance file or directory of instance files")
    a.add_argument("--gen", action="store_true", help="audit the enumerated and seeded families")
    a.add_argument("--checks", default="all", help=f"comma list from: {', '.join(CHECKS)}, or all")
    a.add_argument("--bounds", default=None, help="overrides such as universe_size=6,capacity=3")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--rule", choices=VARIANTS, default=None)
    a.add_argument("--out", help="write the report here instead of standard output")
    a.set_defaults(func=cmd_audit)

    g = sub.add_parser("gen", help="generate a random valid instance")
    g.add_argument("--institutions", "-m", type=int, default=2)
    g.add_argument("--individuals", "-n", type=int, default=6)
    g.add_argument("--types", "-k", type=int, default=0)
    g.add_argument("--laminar", action=argparse.BooleanOptionalAction, default=True)
    g.add_argument("--capacity", type=int, default=None, help="seats per institution")
    g.add_argument("--rule", choices=VARIANTS, default="hNT")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", "-o")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("replay", help="render a trace file")
    r.add_argument("path")
    r.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        _err(str(exc))
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
