"""Batch command line: scenario generation, ensemble runs, permutation
experiments, and report summaries.

All randomness flows from one required --seed; identical invocations are
byte-identical whatever the --jobs value.  Exit codes: 0 success, 2 bad
configuration, 3 scenario generator starvation, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import functools
import json
import sys
from pathlib import Path

from .configs import ConfigError, default_start_level, design_from_config
from .core import Scenario, ScenarioError
from .scenarios import (
    GeneratorStarvedError,
    SceneConfig,
    calibrate_fixed_scenario,
    mtd_exclusion_filter,
    random_scenario,
    standard_scenarios,
    stratified_ensemble,
)
from .simulate import (
    EnsembleReport,
    run_ensemble,
    run_permutation_ensemble,
    run_rng,
    summarize_ensemble,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STARVED = 3
EXIT_IO = 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO)
    except json.JSONDecodeError as exc:
        raise CliError(f"{path} is not valid JSON: {exc}", EXIT_CONFIG)


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO)


def _scenario_lines(scenarios, header: dict) -> str:
    lines = [json.dumps(header, sort_keys=True)]
    lines.extend(json.dumps(sc.to_dict(), sort_keys=True) for sc in scenarios)
    return "\n".join(lines) + "\n"


def read_scenario_file(path: str) -> list[Scenario]:
    scenarios = []
    try:
        with open(path) as fh:
            for i, line in enumerate(fh):
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                if i == 0 and obj.get("kind") == "header":
                    continue
                scenarios.append(Scenario.from_dict(obj))
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO)
    except (json.JSONDecodeError, ScenarioError, KeyError) as exc:
        raise CliError(f"bad scenario file {path}: {exc}", EXIT_CONFIG)
    return scenarios


def _filtered_draws(cfg, count, rng, post_filter, retries_per: int = 100_000):
    scenarios = []
    for _ in range(count):
        for _ in range(retries_per):
            sc = random_scenario(cfg, rng)
            if post_filter is None or post_filter(sc):
                scenarios.append(sc)
                break
        else:
            raise GeneratorStarvedError(
                f"post-filter rejected {retries_per} scenarios in a row")
    return scenarios


def cmd_gen_scenarios(args) -> int:
    cfg_dict = _load_json(args.config) if args.config else {}
    if args.levels is not None:
        cfg_dict["nlev"] = args.levels
    if "nlev" not in cfg_dict:
        raise CliError("number of levels required (--levels or config nlev)",
                       EXIT_CONFIG)
    try:
        cfg = SceneConfig(**cfg_dict)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad generator config: {exc}", EXIT_CONFIG)

    post_filter = None
    if args.mtd_window:
        lo, hi = args.mtd_window
        post_filter = functools.partial(
            mtd_exclusion_filter, window=(lo, hi), edge=args.mtd_edge)

    rng = run_rng(args.seed, 0, purpose=9)
    try:
        if args.quotas:
            if len(args.quotas) != cfg.nlev:
                raise CliError("need one quota per level", EXIT_CONFIG)
            scenarios = stratified_ensemble(cfg, args.quotas, rng,
                                            post_filter=post_filter)
        else:
            scenarios = _filtered_draws(cfg, args.count, rng, post_filter)
    except GeneratorStarvedError as exc:
        raise CliError(str(exc), EXIT_STARVED)

    header = {"kind": "header", "seed": args.seed, "config": cfg.to_dict(),
              "count": len(scenarios)}
    _write_text(Path(args.out), _scenario_lines(scenarios, header))
    print(f"wrote {len(scenarios)} scenarios to {args.out}")
    return EXIT_OK


def _fixed_scenarios(spec: dict) -> list[Scenario]:
    levels = spec.get("levels", 6)
    target = spec.get("target", 0.3)
    if "families" in spec:
        from .core import DoseGrid

        grid = DoseGrid(levels)
        out = []
        for item in spec["families"]:
            out.append(calibrate_fixed_scenario(
                item["family"], grid, target, item["mtd"]))
        return out
    return list(standard_scenarios(levels, target).values())


def _resolve_scenarios(spec: dict, seed: int) -> list[Scenario]:
    src = spec.get("scenarios", {"source": "fixed"})
    kind = src.get("source")
    if kind == "file":
        return read_scenario_file(src["path"])
    if kind == "fixed":
        return _fixed_scenarios({**spec, **src})
    if kind == "generator":
        cfg = SceneConfig(**src.get("config", {"nlev": spec.get("levels", 6)}))
        post = None
        if "mtd_window" in src:
            post = functools.partial(mtd_exclusion_filter,
                                     window=tuple(src["mtd_window"]),
                                     edge=src.get("mtd_edge", 0.0))
        rng = run_rng(seed, 0, purpose=9)
        try:
            if "quotas" in src:
                return stratified_ensemble(cfg, src["quotas"], rng, post_filter=post)
            return _filtered_draws(cfg, int(src.get("count", 100)), rng, post)
        except GeneratorStarvedError as exc:
            raise CliError(str(exc), EXIT_STARVED)
    raise CliError(f"unknown scenario source '{kind}'", EXIT_CONFIG)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return f"{x:.6f}"
    if x is None:
        return ""
    return str(x)


RUN_COLUMNS = ["run_id", "scenario_id", "design", "n_star", "settling_cohort",
               "incoherent", "dlts", "selected_half", "selected_full",
               "correct_half", "correct_full"]


def runs_to_csv(metrics) -> str:
    lines = [",".join(RUN_COLUMNS)]
    for m in metrics:
        lines.append(",".join(_fmt(v) for v in (
            m.run_id, m.scenario_id, m.design, m.n_star, m.settling_cohort,
            m.incoherent_count, m.total_dlts, m.selected_at_half,
            m.selected_mtd, m.correct_half, m.correct_full)))
    return "\n".join(lines) + "\n"


def hist_to_csv(report: EnsembleReport) -> str:
    lines = ["n_star_value,count"]
    for k in sorted(report.nstar_hist):
        lines.append(f"{k},{report.nstar_hist[k]}")
    return "\n".join(lines) + "\n"


SUMMARY_COLUMNS = ["design", "n_runs", "success_half", "success_full",
                   "high_nstar_prop", "low_nstar_prop", "high_tox_prop",
                   "incoherent_prop", "mean_nstar"]


def summary_to_csv(reports: list[EnsembleReport]) -> str:
    lines = [",".join(SUMMARY_COLUMNS)]
    for r in reports:
        lines.append(",".join(_fmt(getattr(r, c)) for c in SUMMARY_COLUMNS))
    return "\n".join(lines) + "\n"


def cmd_run(args) -> int:
    spec = _load_json(args.spec)
    if args.m is not None:
        spec["m"] = args.m
    levels = spec.get("levels")
    target = spec.get("target", 0.3)
    n_cohorts = spec.get("n_cohorts", 16)
    scenarios = _resolve_scenarios(spec, args.seed)
    if scenarios:
        levels = scenarios[0].grid.levels
    elif levels is None:
        raise CliError("levels required when no scenarios are given", EXIT_CONFIG)
    start = spec.get("start_level", default_start_level(levels))
    runs_per = int(spec.get("m", 1)) if spec.get("scenarios", {}).get(
        "source", "fixed") in ("fixed", "file") else 1
    designs = spec.get("designs")
    if not designs:
        raise CliError("spec must list at least one design", EXIT_CONFIG)

    out_dir = Path(args.out)
    reports = []
    try:
        for dcfg in designs:
            name = dcfg.get("name", dcfg.get("design"))
            design_from_config(dcfg, target)  # validate before the long run
            metrics = run_ensemble(
                {k: v for k, v in dcfg.items() if k != "name"}, target,
                scenarios, master_seed=args.seed, n_cohorts=n_cohorts,
                start_level=start, runs_per_scenario=runs_per, jobs=args.jobs)
            if metrics:
                report = summarize_ensemble(metrics, n_cohorts, levels, design=name)
            else:
                report = None  # nothing to run is not an error
            base = out_dir / name
            if args.format in ("csv", "both"):
                _write_text(base / "runs.csv", runs_to_csv(metrics))
                if report is not None:
                    _write_text(base / "nstar_hist.csv", hist_to_csv(report))
            if args.format in ("json", "both"):
                payload = report.to_dict() if report is not None else {
                    "design": name, "n_runs": 0}
                _write_text(base / "report.json",
                            json.dumps(payload, sort_keys=True, indent=1))
            if report is not None:
                reports.append(report)
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_CONFIG)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG)

    if reports:
        _write_text(out_dir / "summary.csv", summary_to_csv(reports))
        _write_text(out_dir / "summary.json", json.dumps(
            [r.to_dict() for r in reports], sort_keys=True, indent=1))
    print(f"wrote reports for {len(reports)} designs to {out_dir}")
    return EXIT_OK


def cmd_permute(args) -> int:
    design_cfg = _load_json(args.design_config)
    scenarios = read_scenario_file(args.scenario)
    if len(scenarios) != 1:
        raise CliError("permutation experiment takes exactly one scenario",
                       EXIT_CONFIG)
    scenario = scenarios[0]
    try:
        design = design_from_config(design_cfg, scenario.target)
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_CONFIG)
    rng = run_rng(args.seed, 0, purpose=8)
    n_cohorts = args.n_cohorts or (32 // design.cohort_size)
    start = args.start or default_start_level(scenario.grid.levels)
    metrics = run_permutation_ensemble(design, scenario, args.m, rng,
                                       n_cohorts=n_cohorts, start_level=start)
    report = summarize_ensemble(metrics, n_cohorts, scenario.grid.levels,
                                design=design.name)
    out_dir = Path(args.out)
    if args.format in ("csv", "both"):
        _write_text(out_dir / "runs.csv", runs_to_csv(metrics))
        _write_text(out_dir / "nstar_hist.csv", hist_to_csv(report))
    if args.format in ("json", "both"):
        _write_text(out_dir / "report.json",
                    json.dumps(report.to_dict(), sort_keys=True, indent=1))
    print(f"wrote permutation ensemble ({args.m} runs) to {out_dir}")
    return EXIT_OK


def cmd_report(args) -> int:
    reports = []
    for path in args.reports:
        obj = _load_json(path)
        rows = obj if isinstance(obj, list) else [obj]
        for row in rows:
            row.pop("nstar_hist", None)
            row.pop("settle_table", None)
            reports.append(row)
    if args.format == "json":
        print(json.dumps(reports, sort_keys=True, indent=1))
    else:
        cols = SUMMARY_COLUMNS
        print(",".join(cols))
        for r in reports:
            print(",".join(_fmt(r.get(c)) for c in cols))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dosefind",
        description="Dose-finding design simulation and reporting")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-scenarios", help="write a JSON-lines scenario file")
    g.add_argument("--levels", type=int)
    g.add_argument("--config", help="generator config JSON file")
    g.add_argument("--quotas", type=int, nargs="+",
                   help="per-MTD-level scenario quotas")
    g.add_argument("--count", type=int, default=100,
                   help="scenario count when no quotas are given")
    g.add_argument("--mtd-window", type=float, nargs=2, metavar=("LO", "HI"),
                   help="extra screen: true MTD rate must fall inside")
    g.add_argument("--mtd-edge", type=float, default=0.0,
                   help="extra screen: runner-up margin beyond the MTD")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_scenarios)

    r = sub.add_parser("run", help="run design ensembles from a spec file")
    r.add_argument("--spec", required=True, help="run spec JSON file")
    r.add_argument("--seed", type=int, required=True)
    r.add_argument("--m", type=int, help="override runs per scenario")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--format", choices=("csv", "json", "both"), default="both")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("permute", help="fixed-threshold order-permutation runs")
    m.add_argument("--design-config", required=True)
    m.add_argument("--scenario", required=True, help="single-scenario file")
    m.add_argument("--m", type=int, default=1000)
    m.add_argument("--n-cohorts", type=int)
    m.add_argument("--start", type=int)
    m.add_argument("--seed", type=int, required=True)
    m.add_argument("--format", choices=("csv", "json", "both"), default="both")
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_permute)

    rep = sub.add_parser("report", help="print a combined summary table")
    rep.add_argument("reports", nargs="+", help="report.json files")
    rep.add_argument("--format", choices=("csv", "json"), default="csv")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GeneratorStarvedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STARVED


if __name__ == "__main__":
    sys.exit(main())
