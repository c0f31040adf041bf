"""Command line front end: ``branchrate {rate,solve,catalog,figure,verify}``."""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Sequence

import numpy as np

from .asymptotics import (DEFAULT_TOL, RuleRateRow, certify_gamma, composite_rate, load_rule_set, optimize_rule,
                          optimize_simple_rule, rule_rates_csv)
from .graphs import ParseError, parse_dimacs
from .hs import (Catalog, alpha_hs, generate_catalog, optimize_catalog_gammas,
                 parse_hypergraph)
from .recurrence import dp_eval
from .vc import ALGORITHMS, alpha_approx, build_recurrence, tune_config

VC_ALGOS = ALGORITHMS
CURVES = VC_ALGOS + ("vc_best", "3hs")


class ManifestError(ValueError):
    pass


@dataclass
class RunManifest:
    subcommand: str
    inputs: list[str] = field(default_factory=list)
    alphas: list[float] = field(default_factory=list)
    delta: int | None = None
    tol: float = DEFAULT_TOL
    seed: int = 0
    out: str | None = None
    algo: str | None = None

    def validate(self):
        hs = self.algo == "3hs"
        upper = 3.0 if hs else 2.0
        for a in self.alphas:
            if not 1 < a < upper:
                raise ManifestError(f"alpha={a} outside (1, {upper:g}) for {self.algo or 'rules'}")
        if any(b <= a for a, b in zip(self.alphas, self.alphas[1:])):
            raise ManifestError("alpha grid must be strictly increasing")
        return self


def parse_alpha_grid(text: str) -> list[float]:
    """``"1.2,1.3"`` or an inclusive range ``"start:stop:step"``."""
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        if step <= 0:
            raise ManifestError("grid step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(count)]
    return [float(x) for x in text.split(",") if x.strip()]


def _alphas(args) -> list[float]:
    if getattr(args, "alpha_grid", None):
        return parse_alpha_grid(args.alpha_grid)
    if getattr(args, "alpha", None) is not None:
        return [args.alpha]
    raise ManifestError("give --alpha or --alpha-grid")


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _fmt(x: float) -> str:
    return f"{x:.12g}"


# ---------------------------------------------------------------------------
# rates


def _catalog_for(args) -> Catalog:
    if getattr(args, "catalog", None):
        return Catalog.from_json(Path(args.catalog).read_text())
    return generate_catalog(args.delta or 3)


def algo_rate(algo: str, alpha: float, delta: int | None, tol: float, catalog: Catalog | None = None):
    """Return ``(m, worst_rule, gamma)`` for one algorithm at one ratio."""
    if algo == "3hs":
        opt = optimize_catalog_gammas(catalog, alpha, tol)
        i = int(np.argmax([r.m_star for r in opt.per_entry]))
        return opt.m, f"G{i}", opt.per_entry[i].gamma_star
    if algo == "vc_best":
        rows = [algo_rate(a, alpha, delta, tol) for a in ("enhanced_vc3star", "better_vc")]
        return min(rows, key=lambda r: r[0])
    tuned = tune_config(algo, alpha, delta or 100, tol)
    return tuned.m, tuned.worst_rule, tuned.rules[tuned.worst_rule].gamma_star


def _safe_rate(algo, delta, tol, catalog, alpha):
    try:
        return algo_rate(algo, alpha, delta, tol, catalog), None
    except Exception as exc:  # surfaced per row; the grid continues
        return None, f"{type(exc).__name__}: {exc}"


def _grid_rates(man: RunManifest, catalog, jobs: int) -> list:
    """Evaluate every grid row, in parallel when ``jobs > 1``; results keep grid order."""
    fn = partial(_safe_rate, man.algo, man.delta, man.tol, catalog)
    if jobs <= 1 or len(man.alphas) <= 1:
        return [fn(a) for a in man.alphas]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, man.alphas))


def cmd_rate(args) -> int:
    failed = False
    if args.rules:
        rules = load_rule_set(Path(args.rules).read_text())
        man = RunManifest("rate", [args.rules], _alphas(args), tol=args.tol, out=args.out).validate()
        rows = []
        for a in man.alphas:
            for rule in rules:
                if rule.gamma is not None:
                    res = certify_gamma(rule, rule.gamma, a, args.tol)
                else:
                    res = optimize_rule(rule, a, args.tol)
                rows.append(RuleRateRow(rule.name, a, res))
        _emit(rule_rates_csv(rows), man.out)
        return 0
    man = RunManifest("rate", [], _alphas(args), args.delta, args.tol, args.seed, args.out, args.algo).validate()
    catalog = _catalog_for(args) if man.algo == "3hs" else None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "m", "base", "worst_rule", "gamma", "error"])
    for a, (row, err) in zip(man.alphas, _grid_rates(man, catalog, args.jobs)):
        if err is None:
            m, worst, gamma = row
            w.writerow([_fmt(a), _fmt(m), _fmt(math.exp(m)), worst, " ".join(_fmt(g) for g in gamma), ""])
        else:
            failed = True
            w.writerow([_fmt(a), "nan", "nan", "", "", err])
    _emit(buf.getvalue(), man.out)
    return 1 if failed else 0


def cmd_figure(args) -> int:
    man = RunManifest("figure", [], _alphas(args), args.delta, args.tol, args.seed, args.out, args.algo).validate()
    catalog = _catalog_for(args) if man.algo == "3hs" else None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "base"])
    failed = False
    for a, (row, err) in zip(man.alphas, _grid_rates(man, catalog, args.jobs)):
        if err is None:
            w.writerow([_fmt(a), _fmt(math.exp(row[0]))])
        else:
            failed = True
            print(f"alpha={a}: {err}", file=sys.stderr)
            w.writerow([_fmt(a), "nan"])
    _emit(buf.getvalue(), man.out)
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# solve and catalog


def cmd_solve(args) -> int:
    man = RunManifest("solve", [args.input], [args.alpha], args.delta, args.tol, args.seed, args.out, args.algo)
    man.validate()
    text = Path(args.input).read_text()
    t0 = time.perf_counter()
    if args.algo == "3hs":
        h = parse_hypergraph(text)
        cat = optimize_catalog_gammas(_catalog_for(args), args.alpha, args.tol).catalog
        res = alpha_hs(h, args.k, args.alpha, cat, repeat_multiplier=args.repeat, seed=args.seed)
        found = res.hitting_set
    else:
        g = parse_dimacs(text)
        cfg = tune_config(args.algo, args.alpha, args.delta or 100, args.tol).config
        res = alpha_approx(g, args.k, args.alpha, args.algo, cfg, repeat_multiplier=args.repeat, seed=args.seed)
        found = res.cover
    wall = time.perf_counter() - t0
    lines = [
        f"algo={args.algo}",
        f"budget={res.budget}",
        f"p={res.r:.6g}",
        f"trials={res.trials}",
        f"size={len(found) if found is not None else 'none'}",
        f"success={'true' if res.success else 'false'}",
        "solution=" + (" ".join(str(v + 1) for v in sorted(found)) if found is not None else ""),
    ]
    _emit("\n".join(lines) + "\n", man.out)
    print(f"wall_time={wall:.3f}s", file=sys.stderr)
    if found is None:
        print("certain failure: p(floor(alpha k), k) = 0", file=sys.stderr)
    return 0 if res.success else 1


def cmd_catalog(args) -> int:
    delta = args.delta or 3
    cat = generate_catalog(delta, max_delta=7 if args.tier == "full" else 5)
    if args.alpha is not None:
        cat = optimize_catalog_gammas(cat, args.alpha, args.tol).catalog
    if args.out:
        Path(args.out).write_text(cat.to_json())
    print(f"delta={delta} entries={len(cat.entries)} max_m={max(e.m for e in cat.entries)}")
    return 0


# ---------------------------------------------------------------------------
# verify


def _verify_checks(tier: str, seed: int) -> list:
    from .verify import (CheckReport, convergence_check, make_planted_vc, monte_carlo_bound_check,
                         rules_mapping_infimum)
    from .recurrence import naive_eval

    checks = []
    vc3 = optimize_simple_rule(1, 3, 0, 0, 1.5)
    checks.append(CheckReport("vc3_base", abs(vc3.base - 1.043642) <= 5e-4, vc3.base, 1.043642))
    tuned = tune_config("vc3", 1.5)
    rec = build_recurrence("vc3", tuned.config)
    M, _ = composite_rate(rec, 1.5)
    checks.append(convergence_check(rec, 1.5, M, (250, 500, 1000)))
    worst = 0.0
    for b in range(0, 5):
        for k in range(0, 5):
            exact = math.exp(dp_eval(rec, 4, 4).log_value(b, k))
            worst = max(worst, abs(naive_eval(rec, b, k) - exact), abs(rules_mapping_infimum(rec, b, k) - exact))
    checks.append(CheckReport("oracle_equivalence", worst <= 1e-9, worst, 1e-9))
    inst = make_planted_vc(24, 8, 0.2, seed)
    trials = 20000 if tier == "full" else 2000
    checks.append(monte_carlo_bound_check("vc3", inst, 12, trials, seed, tuned.config, rec, "monte_carlo_vc3"))
    if tier == "full":
        cat = generate_catalog(7, max_delta=7)
        opt = optimize_catalog_gammas(cat, 2.0)
        checks.append(CheckReport("hs_delta7_base", abs(opt.base - 1.0659) <= 2e-3, opt.base, 1.0659))
    return checks


def cmd_verify(args) -> int:
    checks = _verify_checks(args.tier, args.seed)
    text = "".join(c.line() + "\n" for c in checks)
    _emit(text, args.out)
    return 0 if all(c.passed for c in checks) else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="branchrate", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, algo_choices=None, algo_required=False):
        if algo_choices:
            sp.add_argument("--algo", choices=algo_choices, required=algo_required)
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--alpha-grid")
        sp.add_argument("--delta", type=int)
        sp.add_argument("--tol", type=float, default=DEFAULT_TOL)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--tier", choices=("default", "full"), default="default")
        sp.add_argument("--out")
        sp.add_argument("--catalog", help="catalog JSON to reuse instead of regenerating")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for alpha-grid rows")

    sp = sub.add_parser("rate", help="optimized rates per alpha")
    common(sp, VC_ALGOS + ("3hs", "vc_best"))
    sp.add_argument("--rules", help="rule-set JSON instead of a built-in algorithm")
    sp.set_defaults(func=cmd_rate)

    sp = sub.add_parser("solve", help="run the repeated randomized solver on an instance")
    common(sp, VC_ALGOS + ("3hs",), algo_required=True)
    sp.add_argument("--input", required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--repeat", type=float, default=1.0, help="repetition multiplier c in ceil(c / p)")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("catalog", help="generate the small-hypergraph catalog")
    common(sp)
    sp.set_defaults(func=cmd_catalog)

    sp = sub.add_parser("figure", help="emit (alpha, base) curve data")
    common(sp, CURVES, algo_required=True)
    sp.set_defaults(func=cmd_figure)

    sp = sub.add_parser("verify", help="run self-checks and print CHECK lines")
    common(sp)
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "rate" and not args.rules and not args.algo:
        parser.error("rate needs --algo or --rules")
    if args.command == "solve" and args.alpha is None:
        parser.error("solve needs --alpha")
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except (ManifestError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
