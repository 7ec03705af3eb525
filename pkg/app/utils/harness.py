# app/utils/harness.py
"""
Monte Carlo study driver.

Every replication r owns the stream RandomStream(seed).split([REPLICATION, r]).
Its derived seed is written on each emitted row, and
run_replication(cfg, r) recomputes the same rows from that seed alone.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
import orjson
import pandas as pd
from scipy.stats import norm

from app.core.config import validate_config, with_defaults
from app.core.dataset import TargetPoint
from app.core.random_stream import DATA, REPLICATION, SMOOTHING, TARGETS, TRUTH, RandomStream
from app.schemas.experiment import EvalRow, ExperimentConfig, TruthRow
from app.utils.forest import fit_bootstrap_forest, fit_forest, point_estimate, predict_matrix
from app.utils.sampling import plan_for_config
from app.utils.sim_models import generate
from app.utils.variance import forest_variance_estimate, smoothed_variance_estimate

logger = logging.getLogger(__name__)

RESULT_COLUMNS = [
    "target_id",
    "rep",
    "estimator",
    "point",
    "vh",
    "vs",
    "var_raw",
    "var",
    "clipped",
    "ci_low",
    "ci_high",
    "seed",
]

ProgressCallback = Callable[[int, int, int], None]


def resolve_targets(spec: str, d: int, rs: RandomStream) -> list[TargetPoint]:
    if spec == "center":
        return [TargetPoint(np.full(d, 0.5))]
    if spec.startswith("random:"):
        count = int(spec.split(":", 1)[1])
        points = rs.generator().uniform(0.0, 1.0, size=(count, d))
        return [TargetPoint(p) for p in points]
    if spec.startswith("file:"):
        frame = pd.read_csv(spec.split(":", 1)[1])
        return [TargetPoint(row) for row in frame.to_numpy(dtype=float)]
    raise ValueError(f"Unknown target spec '{spec}'")


def experiment_targets(cfg: ExperimentConfig) -> list[TargetPoint]:
    targets = resolve_targets(cfg.targets, cfg.d, RandomStream(cfg.seed).split([TARGETS]))
    for t in targets:
        t.check_dimension(cfg.d)
    return targets


def _checked_forest_config(cfg: ExperimentConfig):
    fcfg = cfg.forest_config()
    validate_config(fcfg, cfg.n, cfg.d)
    return with_defaults(fcfg, cfg.n, cfg.d)


def _truth_points(cfg: ExperimentConfig, targets: list[TargetPoint], start: int, stop: int) -> np.ndarray:
    fcfg = _checked_forest_config(cfg)
    model = cfg.sim_model()
    out = np.empty((stop - start, len(targets)))
    for row, t in enumerate(range(start, stop)):
        rs = RandomStream(cfg.seed).split([TRUTH, t])
        data = generate(model, cfg.n, rs.split([DATA]))
        forest = fit_forest(data, plan_for_config(data.n, fcfg, rs), fcfg, rs)
        out[row] = [point_estimate(predict_matrix(forest, x)) for x in targets]
    return out


def ground_truth(cfg: ExperimentConfig, targets: list[TargetPoint] | None = None) -> list[TruthRow]:
    """Mean and variance of the forest prediction over n_truth fresh datasets and forests."""
    targets = experiment_targets(cfg) if targets is None else targets

    if cfg.workers <= 1 or cfg.n_truth < 2 * cfg.workers:
        points = _truth_points(cfg, targets, 0, cfg.n_truth)
    else:
        bounds = np.linspace(0, cfg.n_truth, cfg.workers + 1, dtype=int)
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = pool.map(
                _truth_points,
                *zip(*[(cfg, targets, int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:])]),
            )
            points = np.vstack(list(chunks))

    ddof = 1 if cfg.n_truth > 1 else 0
    return [
        TruthRow(
            target_id=j,
            truth_mean=float(np.mean(points[:, j])),
            truth_var=float(np.var(points[:, j], ddof=ddof)),
            n_truth=cfg.n_truth,
        )
        for j in range(len(targets))
    ]


def replication_seed(cfg: ExperimentConfig, rep_id: int) -> int:
    return RandomStream(cfg.seed).split([REPLICATION, rep_id]).derive_seed()


def run_replication(
    cfg: ExperimentConfig, rep_id: int, targets: list[TargetPoint] | None = None, seed: int | None = None
) -> list[dict]:
    """Rows for one replication: fresh data, one forest, each estimator at each target."""
    targets = experiment_targets(cfg) if targets is None else targets
    seed = replication_seed(cfg, rep_id) if seed is None else seed
    fcfg = _checked_forest_config(cfg)

    rs = RandomStream(seed)
    data = generate(cfg.sim_model(), cfg.n, rs.split([DATA]))
    forest = fit_forest(data, plan_for_config(data.n, fcfg, rs), fcfg, rs)
    boot = fit_bootstrap_forest(data, fcfg, rs) if cfg.uses_bootstrap else None

    rows = []
    for target_id, x in enumerate(targets):
        reports = [forest_variance_estimate(forest, x, boot)]
        if cfg.smoothing > 0:
            reports.append(
                smoothed_variance_estimate(
                    forest,
                    x,
                    data,
                    cfg.smoothing,
                    rs.split([SMOOTHING, target_id]),
                    boot_forest=boot,
                    refit=cfg.smooth_refit,
                )
            )
        for report in reports:
            if report.clipped:
                logger.debug("rep %d target %d: %s estimate clipped at 0", rep_id, target_id, report.mode.value)
            rows.append(
                {"target_id": target_id, "rep": rep_id, "estimator": report.mode.value}
                | report.csv_fields()
                | {"seed": seed}
            )
    return rows


def aggregate(records: pd.DataFrame | Iterable[dict], truth: list[TruthRow], alpha: float) -> list[EvalRow]:
    """Fold replication rows into one EvalRow per (target, estimator); row order does not matter."""
    frame = records if isinstance(records, pd.DataFrame) else pd.DataFrame(list(records), columns=RESULT_COLUMNS)
    frame = frame.sort_values(["target_id", "estimator", "rep"], kind="mergesort")
    by_target = {t.target_id: t for t in truth}
    z = float(norm.ppf(1.0 - alpha / 2.0))

    rows = []
    for (target_id, estimator), group in frame.groupby(["target_id", "estimator"], sort=True):
        t = by_target[int(target_id)]
        estimates = group["var_raw"].to_numpy(dtype=float)
        points = group["point"].to_numpy(dtype=float)
        covered = (group["ci_low"].to_numpy(dtype=float) <= t.truth_mean) & (
            t.truth_mean <= group["ci_high"].to_numpy(dtype=float)
        )
        oracle_covered = np.abs(points - t.truth_mean) <= z * math.sqrt(t.truth_var)
        mean_estimate = float(np.mean(estimates))
        degenerate = t.truth_var <= 0.0
        if degenerate:
            logger.warning("⚠️ target %d has zero true variance; relative bias left undefined", t.target_id)
        rows.append(
            EvalRow(
                target_id=t.target_id,
                estimator=str(estimator),
                truth_mean=t.truth_mean,
                truth_var=t.truth_var,
                mean_estimate=mean_estimate,
                sd_estimate=float(np.std(estimates, ddof=1)) if estimates.size > 1 else 0.0,
                relative_bias=None if degenerate else (mean_estimate - t.truth_var) / t.truth_var,
                coverage=float(np.mean(covered)),
                oracle_coverage=float(np.mean(oracle_covered)),
                sd_point=float(np.std(points, ddof=1)) if points.size > 1 else 0.0,
                n_reps=int(group["rep"].nunique()),
                degenerate=degenerate,
            )
        )
    return rows


def _read_exact(path: Path | str) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


def summarize_results(results_csv: Path | str, truth_csv: Path | str, alpha: float) -> list[EvalRow]:
    """Rebuild the summary from emitted files; equals the summary written by run_experiment."""
    truth = [TruthRow(**row) for row in _read_exact(truth_csv).to_dict(orient="records")]
    return aggregate(_read_exact(results_csv), truth, alpha)


def _write_rows(path: Path, rows: list[dict], header: bool) -> None:
    pd.DataFrame(rows, columns=RESULT_COLUMNS).to_csv(path, mode="w" if header else "a", header=header, index=False)


@dataclass
class ExperimentResult:
    truth: list[TruthRow]
    records: pd.DataFrame
    summary: list[EvalRow]


def run_experiment(
    cfg: ExperimentConfig, out_dir: Path | str | None = None, progress: ProgressCallback | None = None
) -> ExperimentResult:
    """
    Ground truth, then n_mc replications, then the summary fold.

    With out_dir set, writes config.json, truth.csv, results.csv (appended as
    replications finish, so an interrupted run keeps what it has) and
    summary.csv.
    """
    _checked_forest_config(cfg)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_bytes(orjson.dumps(cfg.model_dump(mode="json"), option=orjson.OPT_INDENT_2))

    targets = experiment_targets(cfg)
    logger.info("🚀 experiment: %s n=%d k=%d, %d targets, %d replications", cfg.model.value, cfg.n, cfg.k, len(targets), cfg.n_mc)

    truth = ground_truth(cfg, targets)
    if out is not None:
        pd.DataFrame([t.model_dump() for t in truth]).to_csv(out / "truth.csv", index=False)
    logger.info("✅ ground truth from %d fits", cfg.n_truth)

    collected: dict[int, list[dict]] = {}
    results_path = out / "results.csv" if out is not None else None

    def _collect(rep_id: int, rows: list[dict]) -> None:
        collected[rep_id] = rows
        if results_path is not None:
            _write_rows(results_path, rows, header=len(collected) == 1)
        if progress is not None:
            progress(rep_id, len(collected), cfg.n_mc)
        logger.debug("replication %d done (%d/%d)", rep_id, len(collected), cfg.n_mc)

    try:
        if cfg.workers <= 1:
            for rep_id in range(cfg.n_mc):
                _collect(rep_id, run_replication(cfg, rep_id, targets))
        else:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                futures = {pool.submit(run_replication, cfg, r, targets): r for r in range(cfg.n_mc)}
                for future in as_completed(futures):
                    _collect(futures[future], future.result())
    except KeyboardInterrupt:
        logger.warning("🛑 interrupted after %d/%d replications; partial results kept", len(collected), cfg.n_mc)
        raise

    records = pd.DataFrame(
        [row for rep_id in sorted(collected) for row in collected[rep_id]], columns=RESULT_COLUMNS
    )
    summary = aggregate(records, truth, cfg.alpha)
    if out is not None:
        pd.DataFrame([row.model_dump() for row in summary]).to_csv(out / "summary.csv", index=False)
    logger.info("✅ experiment finished: %d summary rows", len(summary))
    return ExperimentResult(truth, records, summary)
