"""Command-line entry point: generate, run, score and batch.

Settings resolve as command-line flag > BARNAV_* environment variable >
JSON config file > built-in default.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from . import __version__
from .bench import (EpisodeRecord, SuiteConfig, fold_records, load_records, report_csv, report_markdown,
                    run_trials, write_artifacts, write_records)
from .errors import BarnavError
from .fsm import ControllerConfig
from .safety import SafetyMode
from .sim import SimConfig
from .worldgen import GenParams, WorldSpec, difficulty_terciles, generate_batch

ENV_PREFIX = "BARNAV_"
MANIFEST = "manifest.json"
DIFFICULTIES = ("easy", "med", "hard")


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    worlds: str | None = None
    out: str | None = None
    count: int = 10
    difficulty: str | None = None
    trials: int = 1
    policy: str = "pursuit"
    safety: str = "fi"
    seed: int = 0
    jobs: int = 1
    fi_offset: float = 0.04
    traces: bool = True
    costmap_pgm: bool = False
    path_csv: bool = False
    fsm_log: bool = False
    # partial overrides of the underlying dataclasses, validated by field name
    sim: dict = field(default_factory=dict)
    controller: dict = field(default_factory=dict)
    generator: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.trials < 1 or self.jobs < 1 or self.count < 1:
            raise ConfigError("trials, jobs and count must be >= 1")
        if self.policy != "pursuit":
            raise ConfigError(f"unknown policy {self.policy!r}")
        try:
            SafetyMode(self.safety)
        except ValueError:
            raise ConfigError(f"unknown safety mode {self.safety!r}") from None
        if self.difficulty is not None and self.difficulty not in DIFFICULTIES:
            raise ConfigError(f"unknown difficulty {self.difficulty!r}")
        for name, cls in (("sim", SimConfig), ("controller", ControllerConfig), ("generator", GenParams)):
            _check_keys(getattr(self, name), {f.name for f in fields(cls)}, name)
        try:
            self.sim_config()
            self.controller_config()
            self.gen_params()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def sim_config(self) -> SimConfig:
        kw = dict(self.sim)
        for key in ("accel_limits", "start_jitter"):
            if isinstance(kw.get(key), list):
                kw[key] = tuple(kw[key])
        if "lidar" in kw:
            raise ConfigError("lidar settings are fixed")
        return replace(SimConfig(), **kw)

    def controller_config(self) -> ControllerConfig:
        return replace(ControllerConfig(), **self.controller)

    def gen_params(self) -> GenParams:
        return replace(GenParams(), **self.generator)

    def suite_config(self, safety: str | None = None) -> SuiteConfig:
        return SuiteConfig(
            trials=self.trials, policy=self.policy, safety=safety or self.safety, root_seed=self.seed,
            controller=self.controller_config(), sim=self.sim_config(), fi_offset=self.fi_offset,
            traces=self.traces, costmap_pgm=self.costmap_pgm, path_csv=self.path_csv, fsm_log=self.fsm_log,
        )


def _check_keys(d, allowed, where) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown {where} keys: {', '.join(unknown)}")


def _coerce(name: str, raw: str):
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    if kind == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{ENV_PREFIX}{name.upper()} expects a boolean")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "dict":
        return json.loads(raw)
    return raw


def resolve_config(cli: dict, config_file: str | None, environ=os.environ) -> RunConfig:
    names = {f.name for f in fields(RunConfig)}
    merged: dict = {}
    if config_file:
        try:
            data = json.loads(Path(config_file).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_file}: {exc}") from None
        _check_keys(data, names, "config")
        merged.update(data)
    for name in sorted(names):
        raw = environ.get(ENV_PREFIX + name.upper())
        if raw is not None:
            try:
                merged[name] = _coerce(name, raw)
            except (ValueError, json.JSONDecodeError) as exc:
                raise ConfigError(f"bad {ENV_PREFIX}{name.upper()}: {exc}") from None
    merged.update({k: v for k, v in cli.items() if k in names and v is not None})
    try:
        cfg = RunConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg.validate()
    return cfg


def effective_config(cfg: RunConfig) -> dict:
    """Every setting in play, built-in defaults included."""
    return {
        **{k: v for k, v in asdict(cfg).items() if k not in ("sim", "controller", "generator")},
        "sim": {k: v for k, v in asdict(cfg.sim_config()).items() if k not in ("seed", "timeout")},
        "controller": asdict(cfg.controller_config()),
        "generator": {k: v for k, v in asdict(cfg.gen_params()).items() if k != "seed"},
    }


# world files -----------------------------------------------------------------

def write_worlds(cfg: RunConfig, out_dir: Path) -> list[WorldSpec]:
    """Generate a batch and write the worlds, then the manifest last."""
    worlds, failures = [], []
    base = cfg.gen_params()
    for i in range(cfg.count):
        try:
            worlds.extend(generate_batch(1, cfg.seed, base, start_index=i))
        except BarnavError as exc:
            failures.append(f"world_{i:04d}: {type(exc).__name__}: {exc}")
    if failures:
        raise ConfigError("generation failed:\n  " + "\n  ".join(failures))
    tiers = difficulty_terciles([w.path_length for w in worlds])
    keep = [(w, t) for w, t in zip(worlds, tiers) if cfg.difficulty in (None, t)]
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for w, tier in keep:
        name = f"{w.world_id}.json"
        (out_dir / name).write_text(w.to_json(), encoding="utf-8")
        entries.append({"world_id": w.world_id, "file": name, "path_length": w.path_length,
                        "optimal_time": w.optimal_time, "difficulty": tier})
    manifest = {"root_seed": cfg.seed, "count": cfg.count, "difficulty": cfg.difficulty, "worlds": entries}
    (out_dir / MANIFEST).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    # everything written must load back
    for e in entries:
        WorldSpec.load(out_dir / e["file"])
    return [w for w, _ in keep]


def load_worlds(path: str) -> list[WorldSpec]:
    d = Path(path)
    if d.is_file():
        files = [d]
    elif (d / MANIFEST).is_file():
        manifest = json.loads((d / MANIFEST).read_text(encoding="utf-8"))
        files = [d / e["file"] for e in manifest["worlds"]]
    elif d.is_dir():
        files = sorted(p for p in d.glob("*.json") if p.name != MANIFEST)
    else:
        raise ConfigError(f"world path {d} does not exist")
    missing = [str(f) for f in files if not f.is_file()]
    if missing:
        raise ConfigError(f"missing world files: {', '.join(missing)}")
    if not files:
        raise ConfigError(f"no world files in {d}")
    try:
        return [WorldSpec.load(f) for f in files]
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"corrupt world file: {exc}") from None


# subcommands ------------------------------------------------------------------

def _run_one(cfg: RunConfig, worlds, out_dir: Path, safety: str, verbose: bool = True):
    suite = cfg.suite_config(safety)
    outputs = run_trials(worlds, suite, cfg.jobs)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_artifacts(outputs, out_dir)
    write_records([o.record for o in outputs], out_dir / "records")
    records = load_records(out_dir / "records")
    report = fold_records(records, suite.method)
    if verbose:
        for e in report.envs:
            outcomes = ",".join(t.outcome for t in e.trials)
            print(f"{e.world_id} OT={e.optimal_time:.3f} score={e.score:.4f} [{outcomes}]")
        if cfg.fsm_log:
            for o in outputs:
                log = o.artifacts.get(f"fsm/{o.record.world_id}_t{o.record.trial_index:03d}.log")
                if log:
                    print(f"# {o.record.world_id} trial {o.record.trial_index}\n{log}", end="")
    return report


def cmd_generate(cfg: RunConfig, args) -> int:
    if not cfg.out:
        raise ConfigError("generate needs --out")
    worlds = write_worlds(cfg, Path(cfg.out))
    print(f"wrote {len(worlds)} worlds to {cfg.out}")
    return 0


def cmd_run(cfg: RunConfig, args) -> int:
    if not cfg.worlds or not cfg.out:
        raise ConfigError("run needs --worlds and --out")
    worlds = load_worlds(cfg.worlds)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(effective_config(cfg), indent=1, sort_keys=True) + "\n",
                                     encoding="utf-8")
    report = _run_one(cfg, worlds, out, cfg.safety)
    print(f"aggregate {report.method} {report.aggregate!r}")
    return 0


def cmd_score(cfg: RunConfig, args) -> int:
    results = Path(args.results)
    src = results / "records" if (results / "records").is_dir() else results
    try:
        records = load_records(src)
    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"corrupt record in {src}: {exc}") from None
    method = args.method or _method_from(results, records)
    report = fold_records(records, method)
    if args.format == "md":
        text, name = report_markdown([report]), "report.md"
    else:
        text, name = report_csv(report), "report.csv"
    (results / name).write_text(text, encoding="utf-8")
    print(text, end="")
    print(f"aggregate {report.aggregate!r}")
    return 0


def _method_from(results: Path, records: list[EpisodeRecord]) -> str:
    cfg_file = results / "config.json"
    if cfg_file.is_file():
        c = json.loads(cfg_file.read_text(encoding="utf-8"))
        return f"{c.get('policy', 'pursuit')}+{c.get('safety', '?')}"
    return results.name or "results"


def cmd_batch(cfg: RunConfig, args) -> int:
    if not cfg.out:
        raise ConfigError("batch needs --out")
    out = Path(cfg.out)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    for m in modes:
        try:
            SafetyMode(m)
        except ValueError:
            raise ConfigError(f"unknown safety mode {m!r}") from None
    worlds = write_worlds(cfg, out / "worlds")
    (out / "config.json").write_text(json.dumps(effective_config(cfg), indent=1, sort_keys=True) + "\n",
                                     encoding="utf-8")
    reports = [_run_one(cfg, worlds, out / m, m, verbose=False) for m in modes]
    md = report_markdown(reports)
    (out / "report.md").write_text(md, encoding="utf-8")
    print(md, end="")
    for r in reports:
        print(f"aggregate {r.method} {r.aggregate!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="barnav", description="Deterministic 2D navigation benchmark.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--print-config", action="store_true", help="print the effective configuration and exit")
    sub = p.add_subparsers(dest="command")

    def common(sp, run=False, gen=False):
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        if gen:
            sp.add_argument("--count", type=int)
            sp.add_argument("--difficulty", choices=DIFFICULTIES)
        if run:
            sp.add_argument("--trials", type=int)
            sp.add_argument("--policy", choices=("pursuit",))
            sp.add_argument("--jobs", type=int)
            sp.add_argument("--fi-offset", type=float)
            sp.add_argument("--no-traces", dest="traces", action="store_const", const=False)
            sp.add_argument("--costmap-pgm", action="store_const", const=True, help="dump the final costmap")
            sp.add_argument("--path-csv", action="store_const", const=True, help="dump the initial global path")
            sp.add_argument("--fsm-log", action="store_const", const=True, help="verbose FSM transition log")

    g = sub.add_parser("generate", help="write a batch of worlds and a manifest")
    common(g, gen=True)
    r = sub.add_parser("run", help="run seeded trials over a world directory")
    common(r, run=True)
    r.add_argument("--worlds")
    r.add_argument("--safety", choices=[m.value for m in SafetyMode])
    s = sub.add_parser("score", help="score stored episode records")
    s.add_argument("--results", required=True)
    s.add_argument("--format", choices=("csv", "md"), default="csv")
    s.add_argument("--method", help="row label in the report")
    b = sub.add_parser("batch", help="generate, run every safety mode and rank them")
    common(b, run=True, gen=True)
    b.add_argument("--modes", default="none,fi,mpc")
    return p


COMMANDS = {"generate": cmd_generate, "run": cmd_run, "score": cmd_score, "batch": cmd_batch}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(vars(args), args.config)
        if args.print_config:
            print(json.dumps(effective_config(cfg), indent=1, sort_keys=True))
            return 0
        if args.command is None:
            parser.print_help(sys.stderr)
            return 2
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
