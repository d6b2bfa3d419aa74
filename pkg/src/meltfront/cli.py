"""Command-line entry point, configuration files, and run artifacts.

Subcommands: ``simulate`` (particle runs), ``solve`` (mean-field minimal
solution), ``kalpha``, ``gamma-linear``, ``critical`` (R-process samples),
``experiment <id>``, and ``check-density``.  Every data file starts with a
header carrying the schema version, the full config echo, and the seed; a
run manifest indexes the outputs with content hashes.  Outputs contain no
timestamps and floats are written via ``repr``, so two runs from the same
manifest are byte-identical.

Exit codes: 0 success, 1 configuration error (including usage errors),
2 numeric failure (explosion without a cap, window exhaustion).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from .closed_form import gamma_linear, k_alpha
from .critical_limit import sample_r
from .densities import (Constant, DensitySpec, GapDensity, HeavyTail,
                        TravellingWave, check_conditions, density_from_dict,
                        density_to_dict)
from .errors import ConfigError, NumericalError
from .experiments import (exp_critical, exp_gap_density, exp_polynomial,
                          exp_rate, exp_similarity)
from .mean_field import (GammaEvalConfig, physical_jump_size, solve_minimal,
                         sqrt_time_grid)
from .particle_sim import EventLog, SimConfig, run_euler, run_exact
from .sampling import SeedSpec

__all__ = ["RunConfig", "load_config", "save_manifest", "main"]

SCHEMA_VERSION = 1
WORKERS_ENV = "MELTFRONT_WORKERS"


@dataclass
class RunConfig:
    """Everything a run needs; serializable and echoed into every output."""

    subcommand: str
    density: dict | None = None
    scheme: str = "exact"
    dt: float | None = None
    horizon: float = 1.0
    rate_scale: float = 100.0
    jump_unit: float = 0.01
    replicas: int = 1
    seed: int = 0
    out_dir: str = "."
    workers: int | None = None
    explosion_cap: float | None = None
    grid_points: int = 200
    paths: int = 20000
    dx: float = 1e-3
    times: list | None = None
    experiment: str | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config field {unknown[0]!r}"
                              + (f" (and {len(unknown) - 1} more)"
                                 if len(unknown) > 1 else ""))
        if "subcommand" not in data:
            raise ConfigError("missing required config field 'subcommand'")
        return cls(**data)


def load_config(path: str) -> RunConfig:
    """Strict JSON config: unknown fields rejected, parse errors located."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(
            f"{path}: malformed config at line {e.lineno}, column {e.colno}: "
            f"{e.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return RunConfig.from_dict(data)


def _json_default(o):
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, default=_json_default)


def _header_lines(config: RunConfig) -> list[str]:
    echo = json.dumps(config.to_dict(), sort_keys=True)
    return [f"# schema={SCHEMA_VERSION}",
            f"# seed={config.seed}",
            f"# config={echo}"]


def _write_csv(path: str, config: RunConfig, columns: list[str],
               rows) -> None:
    lines = _header_lines(config)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_json(path: str, config: RunConfig, payload: dict) -> None:
    doc = {"schema": SCHEMA_VERSION, "seed": config.seed,
           "config": config.to_dict()}
    doc.update(payload)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dump_json(doc) + "\n")


def save_manifest(out_dir: str, config: RunConfig, outputs: list[str]) -> str:
    """Index the run's files with content hashes; returns the manifest path."""
    index = []
    for name in outputs:
        with open(os.path.join(out_dir, name), "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
        index.append({"file": name, "sha256": digest})
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dump_json({"schema": SCHEMA_VERSION,
                             "config": config.to_dict(),
                             "outputs": index}) + "\n")
    return path


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as ConfigError (exit code 1)."""

    def error(self, message):
        raise ConfigError(f"{message}\n{self.format_usage().rstrip()}")


def _add_density_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", choices=["constant", "travelling-wave",
                                        "gap", "heavy-tail"],
                   help="initial density family")
    p.add_argument("--a", type=float, help="level for the constant family")
    p.add_argument("--v", type=float, help="wave speed for travelling-wave")
    p.add_argument("--l", type=float, help="ladder ratio for the gap family")
    p.add_argument("--alpha", type=float, help="gap thinning for the gap family")
    p.add_argument("--beta", type=float, help="tail exponent for heavy-tail")
    p.add_argument("--density-json", help="full density spec as JSON")


def _density_from_args(args) -> dict | None:
    if getattr(args, "density_json", None):
        try:
            spec = json.loads(args.density_json)
        except json.JSONDecodeError as e:
            raise ConfigError(f"--density-json: {e.msg}") from None
        return density_to_dict(density_from_dict(spec))  # validate + normalize
    fam = getattr(args, "family", None)
    if fam is None:
        return None
    if fam == "constant":
        if args.a is None:
            raise ConfigError("constant family needs --a")
        return density_to_dict(Constant(args.a))
    if fam == "travelling-wave":
        if args.v is None:
            raise ConfigError("travelling-wave family needs --v")
        return density_to_dict(TravellingWave(args.v))
    if fam == "gap":
        if args.l is None or args.alpha is None:
            raise ConfigError("gap family needs --l and --alpha")
        return density_to_dict(GapDensity(args.l, args.alpha))
    if args.beta is None:
        raise ConfigError("heavy-tail family needs --beta")
    return density_to_dict(HeavyTail(args.beta))


def _build_parser() -> _Parser:
    top = _Parser(prog="meltfront",
                  description="Brownian particles against a jumping barrier: "
                              "simulation, mean-field solver, scaling limits.")
    sub = top.add_subparsers(dest="subcommand")

    def common(p, scheme_default="exact"):
        p.add_argument("--config", help="JSON config file (flags override)")
        p.add_argument("--out-dir", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--replicas", type=int, default=None)
        p.add_argument("--workers", type=int, default=None,
                       help=f"worker count (default ${WORKERS_ENV} or cores)")
        p.add_argument("--horizon", type=float, default=None)
        p.add_argument("--scheme", choices=["exact", "euler"], default=None)
        p.add_argument("--dt", type=float, default=None)
        p.add_argument("--rate-scale", type=float, default=None)
        p.add_argument("--jump-unit", type=float, default=None)
        p.add_argument("--explosion-cap", type=float, default=None)
        p.add_argument("--grid-points", type=int, default=None)
        p.add_argument("--paths", type=int, default=None)
        p.add_argument("--dx", type=float, default=None)
        p.add_argument("--times", default=None,
                       help="comma-separated evaluation times")

    p = sub.add_parser("simulate", help="run the particle system")
    _add_density_flags(p)
    common(p)

    p = sub.add_parser("solve", help="mean-field minimal solution")
    _add_density_flags(p)
    common(p)

    p = sub.add_parser("kalpha", help="similarity constant for level a")
    p.add_argument("a", type=float)

    p = sub.add_parser("gamma-linear", help="expected absorbed mass for a "
                                            "linear barrier ct+d")
    p.add_argument("c", type=float)
    p.add_argument("d", type=float)
    p.add_argument("t", type=float)

    p = sub.add_parser("critical", help="sample the critical limit process R")
    common(p)

    p = sub.add_parser("experiment", help="run a canned experiment")
    p.add_argument("id", choices=["similarity", "rate", "critical",
                                  "gap-density", "polynomial"])
    _add_density_flags(p)
    common(p)

    p = sub.add_parser("check-density", help="condition report for a density")
    _add_density_flags(p)
    common(p)
    return top


def _merge_config(args) -> RunConfig:
    """Config file first, then command-line overrides."""
    if getattr(args, "config", None):
        cfg = load_config(args.config)
        cfg = dataclasses.replace(cfg, subcommand=args.subcommand)
    else:
        cfg = RunConfig(subcommand=args.subcommand)
    density = _density_from_args(args)
    if density is not None:
        cfg = dataclasses.replace(cfg, density=density)
    for flag, field_name in [("out_dir", "out_dir"), ("seed", "seed"),
                             ("replicas", "replicas"), ("workers", "workers"),
                             ("horizon", "horizon"), ("scheme", "scheme"),
                             ("dt", "dt"), ("rate_scale", "rate_scale"),
                             ("jump_unit", "jump_unit"),
                             ("explosion_cap", "explosion_cap"),
                             ("grid_points", "grid_points"),
                             ("paths", "paths"), ("dx", "dx")]:
        val = getattr(args, flag, None)
        if val is not None:
            cfg = dataclasses.replace(cfg, **{field_name: val})
    if getattr(args, "times", None) is not None:
        try:
            times = [float(x) for x in str(args.times).split(",") if x]
        except ValueError:
            raise ConfigError(f"--times: not a comma-separated float list: "
                              f"{args.times!r}") from None
        cfg = dataclasses.replace(cfg, times=times)
    if getattr(args, "id", None) is not None:
        cfg = dataclasses.replace(cfg, experiment=args.id)
    return cfg


def _resolve_workers(cfg: RunConfig) -> int:
    if cfg.workers is not None:
        return max(1, cfg.workers)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"${WORKERS_ENV} must be an integer, "
                              f"got {env!r}") from None
    return max(1, os.cpu_count() or 1)


def _require_density(cfg: RunConfig) -> DensitySpec:
    if cfg.density is None:
        raise ConfigError("no density given: use --family/--density-json "
                          "or a config file")
    return density_from_dict(cfg.density)


# ---------------------------------------------------------------------------
# subcommand bodies
# ---------------------------------------------------------------------------

def _cmd_simulate(cfg: RunConfig) -> int:
    density = _require_density(cfg)
    report = check_conditions(density)
    if report.blowup_witness is not None and cfg.explosion_cap is None:
        raise ConfigError(
            f"density admits blow-up (witness at x="
            f"{report.blowup_witness:g}): set --explosion-cap to proceed")
    os.makedirs(cfg.out_dir, exist_ok=True)
    outputs = []
    finals = []
    for rep in range(cfg.replicas):
        sim = SimConfig(density=density, rate_scale=cfg.rate_scale,
                        jump_unit=cfg.jump_unit, horizon=cfg.horizon,
                        seed=SeedSpec(cfg.seed, rep), scheme=cfg.scheme,
                        dt=cfg.dt if cfg.scheme == "euler" else None,
                        explosion_cap=cfg.explosion_cap)
        log: EventLog = run_exact(sim) if cfg.scheme == "exact" else run_euler(sim)
        rows = []
        for i, ev in enumerate(log.events):
            rows.append((i, float(ev.time), float(ev.barrier_before), ev.k,
                         float(ev.barrier_before + ev.k * cfg.jump_unit)))
        name = f"events_r{rep}.csv"
        _write_csv(os.path.join(cfg.out_dir, name), cfg,
                   ["event_index", "time", "barrier_before", "k",
                    "barrier_after"], rows)
        outputs.append(name)
        finals.append({"replica": rep, "final_barrier": float(log.final_barrier),
                       "events": len(log.events), "terminal": log.terminal})
    _write_json(os.path.join(cfg.out_dir, "summary.json"), cfg,
                {"replicas": finals})
    outputs.append("summary.json")
    save_manifest(cfg.out_dir, cfg, outputs)
    return 0


def _cmd_solve(cfg: RunConfig) -> int:
    density = _require_density(cfg)
    grid = sqrt_time_grid(cfg.horizon, cfg.grid_points)
    sol = solve_minimal(density, grid,
                        GammaEvalConfig(paths=cfg.paths, seed=SeedSpec(cfg.seed)),
                        explosion_cap=cfg.explosion_cap)
    os.makedirs(cfg.out_dir, exist_ok=True)
    _write_csv(os.path.join(cfg.out_dir, "solution.csv"), cfg,
               ["t", "barrier"],
               list(zip(map(float, sol.path.grid), map(float, sol.path.values))))
    _write_json(os.path.join(cfg.out_dir, "summary.json"), cfg, {
        "converged": sol.converged, "iterations": sol.iterations,
        "residual": sol.residual, "exploded": sol.exploded,
        "explosion_time": sol.explosion_time,
        "jumps": [{"time": j.time, "before": j.before, "after": j.after,
                   "raw_size": j.raw_size, "physical_size": j.physical_size}
                  for j in sol.jumps],
    })
    save_manifest(cfg.out_dir, cfg, ["solution.csv", "summary.json"])
    return 0


def _cmd_critical(cfg: RunConfig) -> int:
    times = cfg.times if cfg.times else [cfg.horizon]
    samples = sample_r(times, cfg.replicas, SeedSpec(cfg.seed), dx=cfg.dx)
    os.makedirs(cfg.out_dir, exist_ok=True)
    rows = [(rep, float(t), float(samples[rep, j]))
            for rep in range(cfg.replicas) for j, t in enumerate(times)]
    _write_csv(os.path.join(cfg.out_dir, "r_samples.csv"), cfg,
               ["replica", "t", "R_t"], rows)
    _write_json(os.path.join(cfg.out_dir, "summary.json"), cfg, {
        "medians": {repr(float(t)): float(np.median(samples[:, j]))
                    for j, t in enumerate(times)},
    })
    save_manifest(cfg.out_dir, cfg, ["r_samples.csv", "summary.json"])
    return 0


def _cmd_experiment(cfg: RunConfig) -> int:
    workers = _resolve_workers(cfg)
    seed = SeedSpec(cfg.seed)
    if cfg.experiment == "similarity":
        summary = exp_similarity(replicas=cfg.replicas, seed=seed,
                                 workers=workers)
    elif cfg.experiment == "rate":
        summary = exp_rate(replicas=cfg.replicas, seed=seed, workers=workers)
    elif cfg.experiment == "critical":
        summary = exp_critical(replicas=cfg.replicas, seed=seed,
                               workers=workers)
    elif cfg.experiment == "gap-density":
        density = density_from_dict(cfg.density) if cfg.density else None
        summary = exp_gap_density(density=density, seed=seed)
    elif cfg.experiment == "polynomial":
        summary = exp_polynomial(seed=seed)
    else:  # argparse restricts choices; keep a guard for load_config paths
        raise ConfigError(f"unknown experiment id {cfg.experiment!r}")
    os.makedirs(cfg.out_dir, exist_ok=True)
    doc = summary.to_dict()
    records = doc.pop("records")
    _write_json(os.path.join(cfg.out_dir, "summary.json"), cfg, doc)
    outputs = ["summary.json"]
    if records:
        columns = sorted({k for r in records for k in r})
        rows = [tuple(r.get(c, "") for c in columns) for r in records]
        _write_csv(os.path.join(cfg.out_dir, "records.csv"), cfg, columns, rows)
        outputs.append("records.csv")
    save_manifest(cfg.out_dir, cfg, outputs)
    print(f"experiment {summary.experiment}: {summary.verdict}")
    for name, v in summary.verdicts.items():
        print(f"  {name}: {v}")
    return 0


def _cmd_check_density(cfg: RunConfig) -> int:
    density = _require_density(cfg)
    report = check_conditions(density)
    doc = report.summary()
    doc["physical_jump_size"] = physical_jump_size(density)
    print(_dump_json(doc))
    if cfg.out_dir != ".":
        os.makedirs(cfg.out_dir, exist_ok=True)
        _write_json(os.path.join(cfg.out_dir, "report.json"), cfg, doc)
        save_manifest(cfg.out_dir, cfg, ["report.json"])
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.subcommand is None:
            parser.print_usage(sys.stderr)
            return 1
        if args.subcommand == "kalpha":
            print(f"{k_alpha(args.a):.12f}")
            return 0
        if args.subcommand == "gamma-linear":
            print(f"{gamma_linear(args.c, args.d, args.t):.12f}")
            return 0
        cfg = _merge_config(args)
        if args.subcommand == "simulate":
            return _cmd_simulate(cfg)
        if args.subcommand == "solve":
            return _cmd_solve(cfg)
        if args.subcommand == "critical":
            return _cmd_critical(cfg)
        if args.subcommand == "experiment":
            return _cmd_experiment(cfg)
        return _cmd_check_density(cfg)
    except (ConfigError, ValueError) as e:
        # ValueError covers domain errors from direct library calls
        # (kalpha out of [0, 1), unknown density family in --density-json).
        print(f"error: {e}", file=sys.stderr)
        return 1
    except NumericalError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
