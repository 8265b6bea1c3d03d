"""Command-line entry point ``kgres``.

Verbs::

    kgres run CONFIG | --scenario NAME      run one scenario (or many with --batch)
    kgres check-condition CONFIG | --scenario NAME [--k K] [--search]
    kgres reduce CONFIG | --scenario NAME   print the reduced nonlinearity
    kgres scenarios [--write DIR]           list (or dump) the built-in scenarios
    kgres fit RUN_DIR                       re-fit an existing run directory

The exit status is 0 only when every requested check passes.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ConfigError, ScenarioConfig
from .condition import SearchOptions, check_condition, search_matrix
from .reduced import ReducedSystem, describe_reduced
from .scenarios import builtin_scenarios, get_scenario

log = logging.getLogger("kgres")


def _load(args) -> ScenarioConfig:
    if getattr(args, "scenario", None):
        return get_scenario(args.scenario)
    if not getattr(args, "config", None):
        raise ConfigError("", "give a config file or --scenario NAME")
    return ScenarioConfig.load(args.config)


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    changes = {}
    if getattr(args, "T", None) is not None:
        changes["time.T"] = args.T
    if getattr(args, "points", None) is not None:
        changes["grid.points"] = args.points
    if getattr(args, "half_length", None) is not None:
        changes["grid.half_length"] = args.half_length
    if getattr(args, "epsilon", None) is not None:
        changes["data.epsilon"] = args.epsilon
    if getattr(args, "no_profile", False):
        changes["diagnostics.profile.enabled"] = False
    return cfg.replace(**changes) if changes else cfg


def _emit(args, payload) -> None:
    if not args.quiet:
        print(json.dumps(payload, indent=2, default=str))


def _run_one(cfg_text: str, out_dir: str, threads: int | None) -> dict:
    from .pipeline import run_scenario

    cfg = ScenarioConfig.from_text(cfg_text)
    outcome = run_scenario(cfg, out_dir, workers=threads)
    return {
        "scenario": cfg.name,
        "directory": str(outcome.directory),
        "passed": outcome.passed,
        "stages": {k: v["status"] for k, v in outcome.stages.items()},
        "failed_claims": [c.name for c in outcome.claims if not c.passed],
    }


def cmd_run(args) -> int:
    out_root = Path(args.out or "runs")
    if args.batch:
        cfgs = [get_scenario(n) if not Path(n).exists() else ScenarioConfig.load(n) for n in args.batch]
        cfgs = [_apply_overrides(c, args) for c in cfgs]
        names = [c.name for c in cfgs]
        if len(set(names)) != len(names):
            raise ConfigError("--batch", "scenario names must be distinct (each gets its own directory)")
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futs = [pool.submit(_run_one, c.to_text(), str(out_root / c.name), args.threads) for c in cfgs]
            results = [f.result() for f in futs]
        _emit(args, results)
        return 0 if all(r["passed"] for r in results) else 1
    cfg = _apply_overrides(_load(args), args)
    out_dir = Path(args.out) if args.out else Path(cfg.output or out_root / cfg.name)
    res = _run_one(cfg.to_text(), str(out_dir), args.threads)
    _emit(args, res)
    return 0 if res["passed"] else 1


def cmd_check_condition(args) -> int:
    cfg = _load(args)
    sys_ = ReducedSystem(cfg.masses, cfg.nonlinearity)
    k = args.k if args.k is not None else cfg.condition.k
    payload = {"scenario": cfg.name, "k": k}
    ok = True
    A = cfg.condition.condition_matrix()
    if A is not None:
        rep = check_condition(A, sys_, k=k)
        payload["check"] = rep.to_json()
        ok = ok and rep.passed
    if args.search or A is None:
        res = search_matrix(sys_, k, SearchOptions())
        payload["search"] = res.to_json()
        ok = ok and res.success
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "condition.json").write_text(json.dumps(payload, indent=2, default=str) + "\n")
    _emit(args, payload)
    return 0 if ok else 1


def cmd_reduce(args) -> int:
    cfg = _load(args)
    sys_ = ReducedSystem(cfg.masses, cfg.nonlinearity)
    resonant = {
        f"F{j + 1}": [[a + 1 for a in triple] for triple in sys_.table.resonant_set(j)] for j in range(sys_.n)
    }
    _emit(args, {"scenario": cfg.name, "masses": cfg.masses.to_strings(), "resonant_triples": resonant, "reduced": describe_reduced(sys_)})
    return 0


def cmd_scenarios(args) -> int:
    items = builtin_scenarios()
    if args.write:
        d = Path(args.write)
        d.mkdir(parents=True, exist_ok=True)
        for s in items:
            (d / f"{s.name}.json").write_text(s.to_text(), encoding="utf-8")
    _emit(args, [{"name": s.name, "masses": s.masses.to_strings(), "claim": s.fits.claim, "description": s.description} for s in items])
    return 0


def cmd_fit(args) -> int:
    from .pipeline import refit

    claims, fits = refit(args.run_dir)
    _emit(args, {"claims": [c.__dict__ for c in claims], "fits": fits})
    return 0 if all(c.passed for c in claims) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kgres", description="Cubic Klein-Gordon systems with mass resonance")
    p.add_argument("--out", help="output directory")
    p.add_argument("--quiet", action="store_true", help="suppress JSON output")
    p.add_argument("--threads", type=int, default=None, help="FFT worker threads per run")
    sub = p.add_subparsers(dest="verb", required=True)

    def source(sp):
        sp.add_argument("config", nargs="?", help="JSON scenario config")
        sp.add_argument("--scenario", help="built-in scenario name")

    r = sub.add_parser("run", help="run a scenario")
    source(r)
    r.add_argument("--batch", nargs="+", metavar="NAME_OR_FILE", help="run several scenarios concurrently")
    r.add_argument("--jobs", type=int, default=None, help="concurrent runs in batch mode")
    r.add_argument("--T", type=float, help="override the final time")
    r.add_argument("--points", type=int, help="override the grid size")
    r.add_argument("--half-length", type=float, help="override the box half length")
    r.add_argument("--epsilon", type=float, help="override the data amplitude")
    r.add_argument("--no-profile", action="store_true", help="skip amplitude extraction")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check-condition", help="check or search the structural condition")
    source(c)
    c.add_argument("--k", type=int, choices=(0, 1, 3))
    c.add_argument("--search", action="store_true", help="also search for a matrix")
    c.set_defaults(func=cmd_check_condition)

    d = sub.add_parser("reduce", help="print the reduced nonlinearity")
    source(d)
    d.set_defaults(func=cmd_reduce)

    s = sub.add_parser("scenarios", help="list built-in scenarios")
    s.add_argument("--write", metavar="DIR", help="write each scenario config to DIR")
    s.set_defaults(func=cmd_scenarios)

    f = sub.add_parser("fit", help="re-fit an existing run directory")
    f.add_argument("run_dir")
    f.set_defaults(func=cmd_fit)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, KeyError, FileNotFoundError) as exc:
        print(f"kgres: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
