"""Batch experiment runner: configs, seeded runs, regret CSVs and summaries."""
from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .equilibria import KINDS
from .exceptions import InsufficientData, ParseError, ValidationError
from .game import JointPolicy, MGSpec, validate_policy, validate_spec
from .instances import InstanceDescriptor, from_params
from .learner import run, snapshot_grid
from .regret import (RegretLedger, accumulate, certify_approx, episode_gaps, evaluate_snapshots,
                     write_csv)

log = logging.getLogger(__name__)

CONFIG_FIELDS = {
    "instance", "K", "solver", "C", "delta", "snapshot_stride", "seeds", "output_dir",
    "regret_kinds", "mode", "policy", "workers", "slope_window",
}
MIN_SLOPE_POINTS = 8


@dataclass
class ExperimentConfig:
    instance: dict
    K: int
    solver: str = "cce"
    C: float = 1.0
    delta: float = 0.1
    snapshot_stride: int = 1
    seeds: list = field(default_factory=lambda: [0])
    output_dir: str = "runs"
    regret_kinds: list = None
    mode: str = "learn"
    policy: object = None
    workers: int = 1
    slope_window: float = 0.5

    def __post_init__(self):
        if self.regret_kinds is None:
            self.regret_kinds = [self.solver]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunSummary:
    per_seed: list
    aggregate: dict
    grid: str
    wall_time: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        # wall time is kept out of the summary document so reruns are byte-identical
        return {"grid": self.grid, "per_seed": self.per_seed, "aggregate": self.aggregate,
                "failures": self.failures}


def _problems(cfg: ExperimentConfig, base: Path) -> list[str]:
    out = []
    if not isinstance(cfg.K, int) or isinstance(cfg.K, bool) or cfg.K < 1:
        out.append("K must be an integer >= 1")
    if cfg.solver not in KINDS:
        out.append(f"solver must be one of {list(KINDS)}")
    if not isinstance(cfg.seeds, list) or not cfg.seeds:
        out.append("seeds must be a nonempty list")
    elif not all(isinstance(s, int) for s in cfg.seeds):
        out.append("seeds must be integers")
    if not (isinstance(cfg.C, (int, float)) and cfg.C > 0):
        out.append("C must be positive")
    if not (isinstance(cfg.delta, (int, float)) and 0 < cfg.delta <= 1):
        out.append("delta must lie in (0, 1]")
    if not isinstance(cfg.snapshot_stride, int) or cfg.snapshot_stride < 1:
        out.append("snapshot_stride must be an integer >= 1")
    if not isinstance(cfg.workers, int) or cfg.workers < 1:
        out.append("workers must be an integer >= 1")
    if not 0 < cfg.slope_window <= 1:
        out.append("slope_window must lie in (0, 1]")
    if not isinstance(cfg.regret_kinds, list) or not cfg.regret_kinds or any(
            k not in KINDS for k in cfg.regret_kinds):
        out.append(f"regret_kinds must be a nonempty list drawn from {list(KINDS)}")
    if cfg.mode not in ("learn", "static"):
        out.append("mode must be 'learn' or 'static'")
    if cfg.mode == "static" and cfg.policy is None:
        out.append("static mode needs a policy")
    inst = cfg.instance
    if not isinstance(inst, dict):
        out.append("instance must be an object")
    elif "path" in inst:
        if not (base / inst["path"]).exists():
            out.append(f"instance file {inst['path']!r} does not exist")
    elif "kind" not in inst:
        out.append("instance needs either 'path' or 'kind' + 'params'")
    if isinstance(cfg.policy, dict) and "path" in cfg.policy and not (base / cfg.policy["path"]).exists():
        out.append(f"policy file {cfg.policy['path']!r} does not exist")
    return out


def config_from_dict(doc: dict, base: Path | str = ".") -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ParseError("config must be a JSON object")
    unknown = sorted(set(doc) - CONFIG_FIELDS)
    if unknown:
        raise ParseError(f"unknown config field(s): {', '.join(unknown)}")
    for required in ("instance", "K"):
        if required not in doc:
            raise ParseError(f"missing required field {required!r}")
    base = Path(base)
    cfg = ExperimentConfig(**doc)
    problems = _problems(cfg, base)
    if problems:
        raise ValidationError(problems)
    # paths are pinned relative to the config file
    if "path" in cfg.instance:
        cfg.instance = {**cfg.instance, "path": str(base / cfg.instance["path"])}
    if isinstance(cfg.policy, dict) and "path" in cfg.policy:
        cfg.policy = {**cfg.policy, "path": str(base / cfg.policy["path"])}
    return cfg


def load_config(path) -> ExperimentConfig:
    """Parse and validate a JSON experiment config, filling every default explicitly."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(doc, path.parent)


def resolve_instance(inst: dict) -> tuple[MGSpec, InstanceDescriptor | None]:
    if "path" in inst:
        spec = MGSpec.from_json(Path(inst["path"]))
        desc = None
    else:
        desc = from_params(inst["kind"], inst.get("params", {}))
        spec = desc.spec
    return spec, desc


def resolve_policy(policy, desc: InstanceDescriptor | None) -> JointPolicy:
    if isinstance(policy, str):
        if desc is None or policy not in desc.fixtures and f"{policy}_policy" not in desc.fixtures:
            raise ValidationError([f"named policy {policy!r} not provided by the instance"])
        return desc.fixtures.get(policy) or desc.fixtures[f"{policy}_policy"]
    if isinstance(policy, dict) and "path" in policy:
        return JointPolicy.from_dict(json.loads(Path(policy["path"]).read_text()))
    return JointPolicy.from_dict(policy)


def fit_slope(ks, values, window: float = 0.5) -> float:
    """Least-squares slope of log(value) against log(k) over the last ``window`` of the grid."""
    ks = np.asarray(ks, dtype=float)
    values = np.asarray(values, dtype=float)
    if ks.size < MIN_SLOPE_POINTS:
        raise InsufficientData(f"need at least {MIN_SLOPE_POINTS} points, got {ks.size}")
    start = ks.size - max(2, int(np.ceil(ks.size * window)))
    k, v = ks[start:], values[start:]
    if np.any(v <= 0) or np.any(k <= 0):
        raise InsufficientData("slope fit needs positive episodes and values")
    slope, _ = np.polyfit(np.log(k), np.log(v), 1)
    return float(slope)


def _write_series(path: Path, ks, vals) -> None:
    with open(path, "w") as fh:
        for k, v in zip(ks, vals):
            fh.write(f"{int(k)} {float(v)!r}\n")


def _seed_job(cfg: ExperimentConfig, seed: int, out_dir: str) -> dict:
    """One seed: learn (or replay a fixed policy), evaluate regret, write artifacts."""
    t0 = time.perf_counter()
    spec, desc = resolve_instance(cfg.instance)
    out = Path(out_dir)
    record = {"seed": seed, "kinds": {}}
    grid = snapshot_grid(cfg.K, cfg.snapshot_stride)
    if cfg.mode == "learn":
        res = run(spec, cfg.K, cfg.solver, cfg.C, cfg.delta, seed, cfg.snapshot_stride)
        certified = set(res.certified_episodes)
        delta_v = {k: float(res.delta_v[k - 1]) for k in grid}
        record["delta_v"] = float(res.certified.delta_v)
        record["raw_gap"] = float(res.certified.raw_gap)
        record["certified_episode"] = int(res.certified.episode)
    else:
        policy = resolve_policy(cfg.policy, desc)
        certified, delta_v = set(), {}
    for kind in cfg.regret_kinds:
        if cfg.mode == "learn":
            ledger = evaluate_snapshots(spec, res.snapshots, kind)
            eps_final = certify_approx(spec, res.certified.policy, kind)
        else:
            gaps = episode_gaps(spec, policy, kind)
            ledger = RegretLedger(kind, np.asarray(spec.betas, dtype=float), spec.H)
            prev = 0
            for k in grid:
                accumulate(ledger, k, gaps, weight=k - prev)
                prev = k
            eps_final = float(ledger.balanced_inc[-1])
        eps_rows = {k: ledger.balanced_inc[i] for i, k in enumerate(ledger.episodes) if k in certified}
        stem = f"seed{seed}_{kind}"
        with open(out / f"{stem}.csv", "w", newline="") as fh:
            write_csv(ledger, fh, eps_rows, delta_v)
        for col in ("naive_cum", "balanced_cum"):
            _write_series(out / f"{stem}_{col}.dat", ledger.episodes, ledger.series(col))
        info = {
            "naive_cum": float(ledger.naive_cum[-1]),
            "balanced_cum": float(ledger.balanced_cum[-1]),
            "eps_certified": float(eps_final),
            "phi_star": ledger.phi_star,
        }
        try:
            info["slope"] = fit_slope(ledger.episodes, ledger.balanced_cum, cfg.slope_window)
        except InsufficientData:
            info["slope"] = None
        record["kinds"][kind] = info
    record["wall_time"] = time.perf_counter() - t0
    return record


def _stats(xs) -> dict:
    xs = [x for x in xs if x is not None]
    if not xs:
        return {"median": None, "min": None, "max": None}
    return {"median": float(np.median(xs)), "min": float(np.min(xs)), "max": float(np.max(xs))}


def run_experiment(cfg: ExperimentConfig, out_dir=None, workers: int | None = None) -> RunSummary:
    """Run every seed, write per-seed CSVs/series plus ``summary.json``."""
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec, _ = resolve_instance(cfg.instance)
    problems = validate_spec(spec)
    if cfg.instance.get("params", {}).get("check_reward_range", True) is False:
        problems = [p for p in problems if not p.startswith("reward ")]
    if problems:
        raise ValidationError(problems)
    if cfg.mode == "static":
        pol_problems = validate_policy(resolve_policy(cfg.policy, resolve_instance(cfg.instance)[1]), spec)
        if pol_problems:
            raise ValidationError(pol_problems)
    workers = workers or cfg.workers
    records, failures = {}, []
    if workers > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {seed: pool.submit(_seed_job, cfg, seed, str(out)) for seed in cfg.seeds}
            for seed, fut in futures.items():
                try:
                    records[seed] = fut.result()
                except Exception as exc:  # recorded per seed, surfaced via failures
                    failures.append({"seed": seed, "error": f"{type(exc).__name__}: {exc}"})
    else:
        for seed in cfg.seeds:
            try:
                records[seed] = _seed_job(cfg, seed, str(out))
            except Exception as exc:
                log.exception("seed %s failed", seed)
                failures.append({"seed": seed, "error": f"{type(exc).__name__}: {exc}"})
    ordered = [records[s] for s in cfg.seeds if s in records]
    wall = {str(r["seed"]): r.pop("wall_time") for r in ordered}
    aggregate = {}
    for kind in cfg.regret_kinds:
        aggregate[kind] = {
            key: _stats([r["kinds"][kind][key] for r in ordered])
            for key in ("naive_cum", "balanced_cum", "eps_certified", "slope")
        }
    if cfg.mode == "learn":
        aggregate["delta_v"] = _stats([r["delta_v"] for r in ordered])
    grid = "every_episode" if cfg.snapshot_stride == 1 else (
        f"subsampled_stride_{cfg.snapshot_stride}_piecewise_constant")
    summary = RunSummary(ordered, aggregate, grid, wall, failures)
    with open(out / "summary.json", "w") as fh:
        json.dump(summary.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "timing.json", "w") as fh:
        json.dump(wall, fh, indent=2)
        fh.write("\n")
    return summary
