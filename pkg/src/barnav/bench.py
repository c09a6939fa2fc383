"""Trial batches over world suites, per-world and aggregate scoring, and reports."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .episode import Outcome, run_episode, start_pose
from .errors import InvalidOptimalTime, InvalidPathLength
from .fsm import ControllerConfig, FsmController
from .planner import GlobalPlanner
from .rng import derive_seed
from .safety import ForwardSafety, SafetyMode
from .sim import SimConfig
from .worldgen import MAX_SPEED, WorldSpec

RECORD_SCHEMA_VERSION = 1
REPORT_HEADER = ("Rank.", "Team/Method", "Score")
POLICIES = ("pursuit",)


def score_trial(success: bool, actual_time: float, optimal_time: float) -> float:
    """OT / clip(AT, 4 OT, 8 OT) on success, else 0."""
    if not optimal_time > 0:
        raise InvalidOptimalTime(f"optimal time must be positive, got {optimal_time!r}")
    if actual_time < 0:
        raise ValueError(f"actual time must be non-negative, got {actual_time!r}")
    if not success:
        return 0.0
    return optimal_time / min(max(actual_time, 4.0 * optimal_time), 8.0 * optimal_time)


def optimal_time(path_length: float) -> float:
    """Traversal time at the platform's top speed."""
    if not path_length > 0:
        raise InvalidPathLength(f"path length must be positive, got {path_length!r}")
    return path_length / MAX_SPEED


def trial_timeout(ot: float) -> float:
    # past 8 OT a success already scores the floor value
    return 8.0 * ot + 10.0


@dataclass
class EpisodeRecord:
    world_id: str
    trial_index: int
    outcome: str
    actual_time: float
    optimal_time: float
    trace_path: str | None = None
    fsm_summary: dict[str, float] = field(default_factory=dict)
    seed: int = 0
    loop_detected: bool = False
    error: str | None = None

    def __post_init__(self):
        self.outcome = Outcome(self.outcome).value
        self.actual_time = float(self.actual_time)
        self.optimal_time = float(self.optimal_time)
        if self.actual_time < 0:
            raise ValueError("actual_time must be non-negative")

    @property
    def success(self) -> bool:
        return self.outcome == Outcome.SUCCESS.value

    @property
    def score(self) -> float:
        return score_trial(self.success, self.actual_time, self.optimal_time)

    def to_dict(self) -> dict:
        return {"schema_version": RECORD_SCHEMA_VERSION, **asdict(self)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeRecord":
        d = dict(d)
        if d.pop("schema_version", None) != RECORD_SCHEMA_VERSION:
            raise ValueError("unsupported record schema_version")
        return cls(**d)

    @property
    def filename(self) -> str:
        return f"{self.world_id}_t{self.trial_index:03d}.json"


@dataclass
class EnvScore:
    world_id: str
    optimal_time: float
    trials: list[EpisodeRecord]

    @property
    def score(self) -> float:
        if not self.trials:
            return 0.0
        return math.fsum(t.score for t in self.trials) / len(self.trials)

    def count(self, outcome: Outcome) -> int:
        return sum(1 for t in self.trials if t.outcome == outcome.value)


@dataclass
class SuiteReport:
    method: str
    envs: list[EnvScore]

    @property
    def aggregate(self) -> float:
        if not self.envs:
            return 0.0
        return math.fsum(e.score for e in self.envs) / len(self.envs)

    def count(self, outcome: Outcome) -> int:
        return sum(e.count(outcome) for e in self.envs)

    @property
    def records(self) -> list[EpisodeRecord]:
        return [r for e in self.envs for r in e.trials]


def fold_records(records, method: str = "pursuit") -> SuiteReport:
    """Group records by world and order everything by key, so input order never matters."""
    by_world: dict[str, list[EpisodeRecord]] = {}
    for r in records:
        by_world.setdefault(r.world_id, []).append(r)
    envs = []
    for wid in sorted(by_world):
        trials = sorted(by_world[wid], key=lambda r: r.trial_index)
        envs.append(EnvScore(wid, trials[0].optimal_time, trials))
    return SuiteReport(method, envs)


@dataclass(frozen=True)
class SuiteConfig:
    trials: int = 1
    policy: str = "pursuit"
    safety: str = "fi"
    root_seed: int = 0
    controller: ControllerConfig = ControllerConfig()
    sim: SimConfig = SimConfig()
    fi_offset: float = 0.04
    # optional per-episode artifacts, returned to the caller rather than written by workers
    traces: bool = False
    costmap_pgm: bool = False
    path_csv: bool = False
    fsm_log: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")
        SafetyMode(self.safety)

    @property
    def method(self) -> str:
        return f"{self.policy}+{self.safety}"


@dataclass
class TrialOutput:
    record: EpisodeRecord
    # relative file name -> contents
    artifacts: dict[str, str | bytes] = field(default_factory=dict)


def trial_seed(root_seed: int, world_id: str, trial: int) -> int:
    return derive_seed(root_seed, "trial", world_id, trial)


def path_csv(path) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("x", "y", "s"))
    for (x, y), s in zip(path.waypoints, path.cumulative_arclength):
        w.writerow((repr(float(x)), repr(float(y)), repr(float(s))))
    return buf.getvalue()


def run_trial(world: WorldSpec, trial: int, cfg: SuiteConfig) -> TrialOutput:
    """One seeded episode; exceptions become an errored failure row."""
    seed = trial_seed(cfg.root_seed, world.world_id, trial)
    ot = world.optimal_time
    stem = f"{world.world_id}_t{trial:03d}"
    try:
        sim = replace(cfg.sim, seed=seed, timeout=trial_timeout(ot))
        safety = ForwardSafety(cfg.safety, offset=cfg.fi_offset)
        controller = FsmController(cfg.controller, safety=safety)
        planner = GlobalPlanner(world.grid, world.goal)
        res = run_episode(world, controller, sim, planner=planner)
    except Exception as exc:  # recorded per row, the suite keeps going
        rec = EpisodeRecord(world.world_id, trial, Outcome.TIMEOUT.value, 0.0, ot, seed=seed,
                            error=f"{type(exc).__name__}: {exc}")
        return TrialOutput(rec)
    out = TrialOutput(EpisodeRecord(world.world_id, trial, res.outcome.value, res.actual_time, ot,
                                    fsm_summary=res.fsm_summary(), seed=seed,
                                    loop_detected=res.loop_detected))
    if cfg.traces:
        out.record.trace_path = f"traces/{stem}.csv"
        out.artifacts[out.record.trace_path] = res.trace_csv()
    if cfg.costmap_pgm and res.costmap is not None:
        out.artifacts[f"costmaps/{stem}.pgm"] = res.costmap.to_pgm()
    if cfg.path_csv:
        initial = planner.plan(start_pose(world, sim))
        if initial is not None:
            out.artifacts[f"paths/{stem}.csv"] = path_csv(initial)
    if cfg.fsm_log:
        out.artifacts[f"fsm/{stem}.log"] = res.transition_log()
    return out


def _run_job(args):
    return run_trial(*args)


def run_trials(worlds: list[WorldSpec], cfg: SuiteConfig = SuiteConfig(), jobs: int = 1) -> list[TrialOutput]:
    """Every (world, trial) pair, in key order whatever the worker count."""
    if not worlds:
        raise ValueError("need at least one world")
    ids = [w.world_id for w in worlds]
    if len(set(ids)) != len(ids):
        raise ValueError("world ids must be unique within a suite")
    jobs_list = [(w, k, cfg) for w in worlds for k in range(cfg.trials)]
    if jobs > 1 and len(jobs_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_job, jobs_list, chunksize=1))
    return [_run_job(j) for j in jobs_list]


def run_suite(worlds: list[WorldSpec], cfg: SuiteConfig = SuiteConfig(), jobs: int = 1) -> SuiteReport:
    return fold_records([o.record for o in run_trials(worlds, cfg, jobs)], cfg.method)


def write_artifacts(outputs, out_dir) -> list[Path]:
    out = Path(out_dir)
    paths = []
    for o in outputs:
        for rel, data in o.artifacts.items():
            p = out / rel
            p.parent.mkdir(parents=True, exist_ok=True)
            if isinstance(data, bytes):
                p.write_bytes(data)
            else:
                p.write_text(data, encoding="utf-8")
            paths.append(p)
    return paths


def _fmt_score(x: float) -> str:
    return f"{x:.4f}"


def report_rows(reports: list[SuiteReport]) -> list[tuple[int, str, float]]:
    """Methods ranked by aggregate, ties broken by name."""
    ranked = sorted(reports, key=lambda r: (-r.aggregate, r.method))
    return [(i + 1, r.method, r.aggregate) for i, r in enumerate(ranked)]


def report_csv(report: SuiteReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("world_id", "optimal_time", "trials", "success", "collision", "timeout", "score"))
    for e in report.envs:
        w.writerow((e.world_id, repr(e.optimal_time), len(e.trials), e.count(Outcome.SUCCESS),
                    e.count(Outcome.COLLISION), e.count(Outcome.TIMEOUT), repr(e.score)))
    w.writerow(("aggregate", "", len(report.records), report.count(Outcome.SUCCESS),
                report.count(Outcome.COLLISION), report.count(Outcome.TIMEOUT), repr(report.aggregate)))
    return buf.getvalue()


def report_markdown(reports: list[SuiteReport]) -> str:
    lines = ["| " + " | ".join(REPORT_HEADER) + " |", "|---|---|---|"]
    for rank, method, score in report_rows(reports):
        lines.append(f"| {rank} | {method} | {_fmt_score(score)} |")
    return "\n".join(lines) + "\n"


def write_records(records, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for r in records:
        p = out / r.filename
        p.write_text(r.to_json(), encoding="utf-8")
        paths.append(p)
    return paths


def load_records(results_dir) -> list[EpisodeRecord]:
    d = Path(results_dir)
    if not d.is_dir():
        raise FileNotFoundError(f"results directory {d} does not exist")
    files = sorted(d.glob("*_t[0-9][0-9][0-9].json"))
    if not files:
        raise FileNotFoundError(f"no episode records in {d}")
    return [EpisodeRecord.from_dict(json.loads(f.read_text(encoding="utf-8"))) for f in files]
