"""Config-driven experiment runs, front files and metric reports.

An experiment config names a problem, the objective set, a training setup
and a sweep (learning rates x seeds x smoothing blends). One invocation
trains every sweep cell twice, once vanilla and once with per-objective
Adam smoothing, and writes:

    out_dir/
      manifest.json                 config hash, version, all output paths
      runs/<run_id>/front.csv       that run's archived Pareto points
      runs/<run_id>/history.csv     per-evaluation training trace
      runs/<run_id>/summary.json    terminal stationarity, baselines
      vanilla/merged_front.csv      non-dominated merge across the sweep
      adamized/merged_front.csv

Vanilla and adamized runs of the same sweep cell share the same derived
seed, so they start from the same parameters and see the same batches;
the smoothing is the only difference. Nothing here depends on wall-clock
time or absolute paths, which is what makes reruns bit-identical.
"""

from __future__ import annotations

import concurrent.futures
import csv
import hashlib
import json
import os
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

import mograd
from mograd.data import (
    build_split,
    load_prices_csv,
    load_ratings_csv,
    save_prices_csv,
    save_ratings_csv,
    synth_dataset,
)
from mograd.engine import TrainConfig, train
from mograd.numerics import derive_seed
from mograd.pareto import coverage, hypervolume, non_dominated_filter, spacing
from mograd.problems import QuadraticProblem
from mograd.recsys import OBJECTIVES, Architecture, RecsysProblem


class ConfigError(ValueError):
    """Invalid experiment configuration (as opposed to a failed run)."""


class ModelSection(BaseModel):
    model_config = ConfigDict(extra="forbid")
    hidden: list[int] = [64]
    latent: int = Field(default=16, ge=1)
    variational: bool = False
    dropout: float = Field(default=0.0, ge=0.0, lt=1.0)


class QuadraticSection(BaseModel):
    model_config = ConfigDict(extra="forbid")
    type: Literal["quadratic"]
    centers: list[list[float]] = [[0.0, 0.0], [2.0, 0.0]]
    noise_sigma: float = Field(default=0.0, ge=0.0)
    batches_per_epoch: int = Field(default=1, ge=1)
    init_scale: float = Field(default=2.0, gt=0.0)


class _RecsysCommon(BaseModel):
    model_config = ConfigDict(extra="forbid")
    threshold: float = 3.5
    mask_fraction: float = Field(default=0.2, gt=0.0, lt=1.0)
    ratios: tuple[float, float, float] = (0.90, 0.05, 0.05)
    beta: float = Field(default=0.0, ge=0.0)
    data_seed: Optional[int] = None
    model: ModelSection = ModelSection()


class SynthRecsysSection(_RecsysCommon):
    type: Literal["synthetic_recsys"]
    num_users: int = Field(default=2000, ge=1)
    num_items: int = Field(default=200, ge=1)
    interactions_per_user: float = Field(default=18.0, ge=2.0)
    clusters: int = Field(default=4, ge=1)
    price_mu: float = 3.0
    price_sigma: float = Field(default=0.5, ge=0.0)


class CsvRecsysSection(_RecsysCommon):
    type: Literal["recsys_csv"]
    ratings_csv: str
    prices_csv: Optional[str] = None


ProblemSection = Union[QuadraticSection, SynthRecsysSection, CsvRecsysSection]


class TrainSection(BaseModel):
    model_config = ConfigDict(extra="forbid")
    epochs: int = Field(default=10, ge=1)
    batch_size: int = Field(default=128, ge=1)
    eval_every: int = Field(default=0, ge=0)
    stationarity_tol: float = Field(default=1e-6, gt=0.0)
    reset_moments_each_epoch: bool = False


class AdamizeSection(BaseModel):
    model_config = ConfigDict(extra="forbid")
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    epsilon: float = Field(default=1e-8, gt=0.0)


class SweepSection(BaseModel):
    model_config = ConfigDict(extra="forbid")
    learning_rates: list[float] = Field(min_length=1)
    seeds: list[int] = Field(min_length=1)
    lambdas: list[float] = [1.0]


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    problem: ProblemSection = Field(discriminator="type")
    objectives: list[str] = ["relevance", "revenue"]
    k: int = Field(default=10, ge=1)
    seed: int
    train: TrainSection = TrainSection()
    adamize: AdamizeSection = AdamizeSection()
    sweep: SweepSection
    out_dir: str


class SynthDataConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    num_users: int = Field(ge=1)
    num_items: int = Field(ge=1)
    seed: int
    interactions_per_user: float = Field(default=18.0, ge=2.0)
    clusters: int = Field(default=4, ge=1)
    price_mu: float = 3.0
    price_sigma: float = Field(default=0.5, ge=0.0)
    out_dir: str


def _format_validation_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def load_config(source: dict) -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.model_validate(source)
    except ValidationError as exc:
        raise ConfigError(f"invalid config: {_format_validation_error(exc)}") from exc
    if cfg.problem.type != "quadratic":
        names = cfg.objectives
        if len(names) < 2:
            raise ConfigError("objectives: need at least two")
        if len(set(names)) != len(names):
            raise ConfigError(f"objectives: duplicates in {names}")
        unknown = [n for n in names if n not in OBJECTIVES]
        if unknown:
            raise ConfigError(
                f"objectives: unknown {unknown}; choose from {list(OBJECTIVES)}"
            )
    for lr in cfg.sweep.learning_rates:
        if lr <= 0.0:
            raise ConfigError(f"sweep.learning_rates: must be > 0, got {lr}")
    for lam in cfg.sweep.lambdas:
        if not 0.0 <= lam <= 1.0:
            raise ConfigError(f"sweep.lambdas: must be in [0, 1], got {lam}")
    return cfg


def load_synth_config(source: dict) -> SynthDataConfig:
    try:
        return SynthDataConfig.model_validate(source)
    except ValidationError as exc:
        raise ConfigError(f"invalid config: {_format_validation_error(exc)}") from exc


def config_hash(cfg: ExperimentConfig) -> str:
    """Hash of the config contents, excluding where the outputs land."""
    payload = cfg.model_dump()
    payload.pop("out_dir", None)
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def build_problem(cfg: ExperimentConfig):
    p = cfg.problem
    if p.type == "quadratic":
        return QuadraticProblem(
            np.asarray(p.centers, dtype=np.float64),
            noise_sigma=p.noise_sigma,
            batches_per_epoch=p.batches_per_epoch,
            init_scale=p.init_scale,
        )
    data_seed = p.data_seed if p.data_seed is not None else derive_seed(cfg.seed, "data")
    if p.type == "synthetic_recsys":
        synth = synth_dataset(
            num_users=p.num_users,
            num_items=p.num_items,
            seed=data_seed,
            interactions_per_user=p.interactions_per_user,
            clusters=p.clusters,
            price_mu=p.price_mu,
            price_sigma=p.price_sigma,
        )
        table, prices = synth.table, synth.prices
    else:
        if not os.path.exists(p.ratings_csv):
            raise ConfigError(f"ratings_csv: no such file: {p.ratings_csv}")
        table = load_ratings_csv(p.ratings_csv)
        prices = None
        if p.prices_csv is not None:
            if not os.path.exists(p.prices_csv):
                raise ConfigError(f"prices_csv: no such file: {p.prices_csv}")
            prices = load_prices_csv(p.prices_csv)
    dataset = build_split(
        table,
        prices=prices,
        threshold=p.threshold,
        ratios=p.ratios,
        mask_fraction=p.mask_fraction,
        seed=data_seed,
    )
    arch = Architecture(
        n_items=len(dataset.items),
        hidden=tuple(p.model.hidden),
        latent=p.model.latent,
        variational=p.model.variational,
        dropout=p.model.dropout,
    )
    return RecsysProblem(dataset, arch, cfg.objectives, k=cfg.k, beta=p.beta)


# --- front CSV I/O ---------------------------------------------------------


def write_front_csv(path, names, points) -> None:
    points = np.asarray(points, dtype=np.float64).reshape(-1, len(names))
    rows = sorted(tuple(row) for row in points.tolist())
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"obj_{n}" for n in names])
        for row in rows:
            writer.writerow([repr(v) for v in row])


def read_front_csv(path):
    """Returns (objective names, (k, n) point array)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty front file") from None
        if not header or not all(col.startswith("obj_") for col in header):
            raise ValueError(f"{path}: expected obj_<name> columns, got {header}")
        names = [col[len("obj_") :] for col in header]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(names):
                raise ValueError(f"{path}:{lineno}: expected {len(names)} columns")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad float: {exc}") from exc
    points = np.asarray(rows, dtype=np.float64).reshape(-1, len(names))
    return names, points


def merge_fronts(fronts):
    """Merge (names, points) pairs into one filtered, sorted front."""
    if not fronts:
        raise ValueError("nothing to merge")
    names = fronts[0][0]
    for other_names, _ in fronts[1:]:
        if other_names != names:
            raise ValueError(
                f"inconsistent objective names: {names} vs {other_names}"
            )
    stacked = [pts for _, pts in fronts if pts.size]
    if not stacked:
        return names, np.empty((0, len(names)))
    merged = non_dominated_filter(np.vstack(stacked))
    order = sorted(range(merged.shape[0]), key=lambda i: tuple(merged[i]))
    return names, merged[order]


# --- sweep execution -------------------------------------------------------


def _history_rows(history):
    names = history.objective_names
    header = (
        ["epoch", "batch"]
        + [f"loss_{n}" for n in names]
        + [f"metric_{n}" for n in names]
        + [f"alpha_{n}" for n in names]
        + ["d_norm"]
    )
    rows = [header]
    for rec in history.records:
        rows.append(
            [rec.epoch, rec.batch]
            + [repr(v) for v in rec.losses]
            + [repr(v) for v in rec.metrics]
            + [repr(v) for v in rec.alphas]
            + [repr(rec.d_norm)]
        )
    return rows


def _execute_run(problem, cfg: ExperimentConfig, spec: dict, out_dir: str) -> dict:
    run_dir = os.path.join(out_dir, "runs", spec["id"])
    os.makedirs(run_dir, exist_ok=True)
    train_cfg = TrainConfig(
        epochs=cfg.train.epochs,
        batch_size=cfg.train.batch_size,
        learning_rate=spec["learning_rate"],
        seed=spec["run_seed"],
        adamize_on=spec["variant"] == "adamized",
        beta1=cfg.adamize.beta1,
        beta2=cfg.adamize.beta2,
        epsilon=cfg.adamize.epsilon,
        lam=spec["lambda"] if spec["lambda"] is not None else 1.0,
        stationarity_tol=cfg.train.stationarity_tol,
        eval_every=cfg.train.eval_every,
        reset_moments_each_epoch=cfg.train.reset_moments_each_epoch,
    )
    archive, history = train(problem, train_cfg)
    names = history.objective_names

    write_front_csv(os.path.join(run_dir, "front.csv"), names, archive.points)
    with open(os.path.join(run_dir, "history.csv"), "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(_history_rows(history))
    summary = {
        "id": spec["id"],
        "variant": spec["variant"],
        "learning_rate": spec["learning_rate"],
        "seed": spec["seed"],
        "lambda": spec["lambda"],
        "run_seed": spec["run_seed"],
        "baselines": list(history.baselines),
        "final_d_norm": history.final_d_norm,
        "stationary": history.stationary,
        "archive_points": len(archive),
    }
    with open(os.path.join(run_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"points": archive.points, "names": names, "summary": summary}


def plan_runs(cfg: ExperimentConfig) -> list[dict]:
    """The sweep as run specs; vanilla/adamized cells share run seeds."""
    specs = []
    for lr in cfg.sweep.learning_rates:
        for seed in cfg.sweep.seeds:
            run_seed = derive_seed(cfg.seed, "run", repr(float(lr)), seed)
            specs.append(
                {
                    "id": f"vanilla_lr{lr!r}_s{seed}",
                    "variant": "vanilla",
                    "learning_rate": float(lr),
                    "seed": int(seed),
                    "lambda": None,
                    "run_seed": run_seed,
                }
            )
            for lam in cfg.sweep.lambdas:
                specs.append(
                    {
                        "id": f"adamized_lr{lr!r}_s{seed}_lam{lam!r}",
                        "variant": "adamized",
                        "learning_rate": float(lr),
                        "seed": int(seed),
                        "lambda": float(lam),
                        "run_seed": run_seed,
                    }
                )
    return specs


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> tuple[dict, bool]:
    """Execute the full sweep; returns (manifest, all runs succeeded)."""
    if jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {jobs}")
    out_dir = cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    problem = build_problem(cfg)
    specs = plan_runs(cfg)

    results: list = [None] * len(specs)
    if jobs == 1:
        for idx, spec in enumerate(specs):
            try:
                results[idx] = _execute_run(problem, cfg, spec, out_dir)
            except Exception as exc:  # keep sweeping, report at the end
                results[idx] = {"error": f"{type(exc).__name__}: {exc}"}
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {
                pool.submit(_execute_run, problem, cfg, spec, out_dir): idx
                for idx, spec in enumerate(specs)
            }
            for fut in concurrent.futures.as_completed(futures):
                idx = futures[fut]
                try:
                    results[idx] = fut.result()
                except Exception as exc:
                    results[idx] = {"error": f"{type(exc).__name__}: {exc}"}

    runs = []
    failures = []
    merged_paths = {}
    for variant in ("vanilla", "adamized"):
        fronts = []
        for spec, res in zip(specs, results):
            if spec["variant"] != variant or "error" in res:
                continue
            fronts.append((res["names"], res["points"]))
        if fronts:
            names, merged = merge_fronts(fronts)
            os.makedirs(os.path.join(out_dir, variant), exist_ok=True)
            rel = os.path.join(variant, "merged_front.csv")
            write_front_csv(os.path.join(out_dir, rel), names, merged)
            merged_paths[variant] = rel

    for spec, res in zip(specs, results):
        rel_dir = os.path.join("runs", spec["id"])
        entry = {
            "id": spec["id"],
            "variant": spec["variant"],
            "learning_rate": spec["learning_rate"],
            "seed": spec["seed"],
            "lambda": spec["lambda"],
            "run_seed": spec["run_seed"],
            "dir": rel_dir,
        }
        if "error" in res:
            entry["status"] = "failed"
            entry["error"] = res["error"]
            failures.append({"id": spec["id"], "error": res["error"]})
        else:
            entry["status"] = "ok"
            entry["front"] = os.path.join(rel_dir, "front.csv")
            entry["history"] = os.path.join(rel_dir, "history.csv")
            entry["summary"] = os.path.join(rel_dir, "summary.json")
        runs.append(entry)

    problem_info = {"type": cfg.problem.type}
    if hasattr(problem, "dataset"):
        problem_info["dataset"] = problem.dataset.summary()
        problem_info["n_params"] = problem.dim
    else:
        problem_info["dim"] = problem.dim
        problem_info["objectives"] = list(problem.objective_names)

    manifest = {
        "config_hash": config_hash(cfg),
        "version": mograd.__version__,
        "seed": cfg.seed,
        "objectives": list(getattr(problem, "objective_names")),
        "problem": problem_info,
        "runs": runs,
        "merged_fronts": merged_paths,
        "failures": failures,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest, not failures


def write_synth_data(cfg: SynthDataConfig) -> dict:
    """Generate a synthetic dataset and write its CSVs plus a manifest."""
    synth = synth_dataset(
        num_users=cfg.num_users,
        num_items=cfg.num_items,
        seed=cfg.seed,
        interactions_per_user=cfg.interactions_per_user,
        clusters=cfg.clusters,
        price_mu=cfg.price_mu,
        price_sigma=cfg.price_sigma,
    )
    os.makedirs(cfg.out_dir, exist_ok=True)
    save_ratings_csv(synth.table, os.path.join(cfg.out_dir, "ratings.csv"))
    save_prices_csv(synth.prices, os.path.join(cfg.out_dir, "prices.csv"))
    manifest = {
        "params": synth.params,
        "files": {"ratings": "ratings.csv", "prices": "prices.csv"},
    }
    with open(os.path.join(cfg.out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


# --- metric reports --------------------------------------------------------


def axis_ranges(fronts) -> list[list[float]]:
    """Per-axis [min, max] over the union of the given point arrays."""
    nonempty = [pts for pts in fronts if pts.size]
    if not nonempty:
        raise ValueError("no points to take axis ranges over")
    stacked = np.vstack(nonempty)
    return [[float(stacked[:, j].min()), float(stacked[:, j].max())] for j in
            range(stacked.shape[1])]


def normalize_points(points: np.ndarray, ranges) -> np.ndarray:
    out = np.empty_like(points)
    for j, (lo, hi) in enumerate(ranges):
        if hi - lo > 0:
            out[:, j] = (points[:, j] - lo) / (hi - lo)
        else:
            out[:, j] = 0.5
    return out


def _front_metrics(points: np.ndarray) -> dict:
    report: dict = {}
    report["hypervolume"] = hypervolume(points) if points.size else 0.0
    filtered = non_dominated_filter(points) if points.size else points
    if filtered.shape[0] >= 2:
        report["spacing"] = spacing(filtered)
    else:
        report["spacing"] = None
        report["spacing_note"] = "undefined (|front| < 2)"
    return report


def metrics_report(front, second=None) -> dict:
    """Hypervolume/spacing per front, coverage both ways when two are given.

    ``front``/``second`` are (label, names, points) triples. Metrics are
    reported on the raw axes and again after min-max normalization by the
    union axis ranges, which are included for provenance.
    """
    fronts = [front] if second is None else [front, second]
    names = fronts[0][1]
    for _, other_names, _ in fronts[1:]:
        if other_names != names:
            raise ValueError(
                f"objective names differ between fronts: {names} vs {other_names}"
            )
    ranges = axis_ranges([pts for _, _, pts in fronts])
    report = {"objectives": names, "axis_ranges": ranges, "fronts": []}
    for label, _, pts in fronts:
        entry = {
            "label": label,
            "points": int(pts.shape[0]),
            "raw": _front_metrics(pts),
            "normalized": _front_metrics(normalize_points(pts, ranges)),
        }
        report["fronts"].append(entry)
    if second is not None:
        a_label, _, a_pts = fronts[0]
        b_label, _, b_pts = fronts[1]
        if a_pts.size == 0 or b_pts.size == 0:
            raise ValueError("coverage needs two non-empty fronts")
        report["coverage"] = {
            f"C({a_label}, {b_label})": coverage(a_pts, b_pts),
            f"C({b_label}, {a_label})": coverage(b_pts, a_pts),
        }
    return report


def compare_report(vanilla, adamized) -> dict:
    """Side-by-side variant comparison from two (names, points) fronts."""
    names_v, pts_v = vanilla
    names_a, pts_a = adamized
    if names_v != names_a:
        raise ValueError(
            f"objective names differ between variants: {names_v} vs {names_a}"
        )
    if pts_v.size == 0 or pts_a.size == 0:
        raise ValueError("both variants need a non-empty merged front")
    ranges = axis_ranges([pts_v, pts_a])
    report = {
        "objectives": names_v,
        "axis_ranges": ranges,
        "variants": {
            "vanilla": {
                "points": int(pts_v.shape[0]),
                "raw": _front_metrics(pts_v),
                "normalized": _front_metrics(normalize_points(pts_v, ranges)),
            },
            "adamized": {
                "points": int(pts_a.shape[0]),
                "raw": _front_metrics(pts_a),
                "normalized": _front_metrics(normalize_points(pts_a, ranges)),
            },
        },
        "coverage": {
            "C(adamized, vanilla)": coverage(pts_a, pts_v),
            "C(vanilla, adamized)": coverage(pts_v, pts_a),
        },
    }
    return report
