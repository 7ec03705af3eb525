import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from app.core.errors import InvalidConfig
from app.core.random_stream import RandomStream
from app.schemas.experiment import ExperimentConfig
from app.utils.harness import (
    RESULT_COLUMNS,
    aggregate,
    ground_truth,
    resolve_targets,
    run_experiment,
    run_replication,
    summarize_results,
)
from app.utils.sim_models import SimModelName


def tiny(**overrides) -> ExperimentConfig:
    base = dict(
        model=SimModelName.MARS,
        n=24,
        k=6,
        m=2,
        b=4,
        mtry=3,
        nodesize=2,
        n_mc=4,
        n_truth=5,
        targets="random:2",
        seed=13,
    )
    return ExperimentConfig(**(base | overrides))


def test_target_specs(tmp_path):
    rs = RandomStream(0)
    assert resolve_targets("center", 6, rs)[0].tolist() == [0.5] * 6
    random_targets = resolve_targets("random:3", 6, rs)
    assert len(random_targets) == 3
    assert all(0.0 <= v <= 1.0 for t in random_targets for v in t.tolist())

    path = tmp_path / "targets.csv"
    pd.DataFrame([[0.1] * 6, [0.9] * 6], columns=[f"x{j}" for j in range(1, 7)]).to_csv(path, index=False)
    from_file = resolve_targets(f"file:{path}", 6, rs)
    assert [t.tolist() for t in from_file] == [[0.1] * 6, [0.9] * 6]


def test_invalid_target_spec():
    with pytest.raises(ValidationError):
        tiny(targets="everywhere")


def test_forest_config_switches_to_bootstrap_above_half():
    assert tiny().forest_config().mode.value == "matched"
    big_k = tiny(k=18).forest_config()
    assert (big_k.mode.value, big_k.m) == ("subset", 1)


def test_ground_truth_is_deterministic():
    cfg = tiny()
    assert ground_truth(cfg) == ground_truth(cfg)


def test_noise_free_constant_model_has_zero_truth_variance():
    truth = ground_truth(tiny(model=SimModelName.CONSTANT, sigma=0.0))
    assert all(t.truth_var == 0.0 and t.truth_mean == 0.0 for t in truth)


def test_invalid_forest_settings_are_rejected():
    with pytest.raises(InvalidConfig):
        run_replication(tiny(k=10, m=3), 0)


def test_experiment_writes_tidy_files(tmp_path):
    cfg = tiny(smoothing=2)
    seen = []
    result = run_experiment(cfg, tmp_path, progress=lambda rep, done, total: seen.append((done, total)))

    for name in ("config.json", "truth.csv", "results.csv", "summary.csv"):
        assert (tmp_path / name).exists()
    results = pd.read_csv(tmp_path / "results.csv")
    assert list(results.columns) == RESULT_COLUMNS
    assert len(results) == cfg.n_mc * 2 * 2
    assert set(results["estimator"]) == {"matched", "smoothed"}
    assert seen[-1] == (cfg.n_mc, cfg.n_mc)

    assert len(result.summary) == 4
    for row in result.summary:
        assert 0.0 <= row.coverage <= 1.0
        assert row.n_reps == cfg.n_mc


def test_summary_is_reproduced_from_emitted_files(tmp_path):
    cfg = tiny()
    result = run_experiment(cfg, tmp_path)
    rebuilt = summarize_results(tmp_path / "results.csv", tmp_path / "truth.csv", cfg.alpha)
    assert [r.model_dump() for r in rebuilt] == [r.model_dump() for r in result.summary]


def test_replication_replays_from_its_seed(tmp_path):
    cfg = tiny()
    result = run_experiment(cfg, tmp_path)
    recorded = result.records[result.records["rep"] == 2].to_dict(orient="records")
    replayed = run_replication(cfg, 2, seed=int(recorded[0]["seed"]))
    assert replayed == recorded


def test_aggregation_ignores_row_order():
    cfg = tiny()
    truth = ground_truth(cfg)
    rows = [row for rep in range(cfg.n_mc) for row in run_replication(cfg, rep)]
    forward = aggregate(rows, truth, cfg.alpha)
    backward = aggregate(list(reversed(rows)), truth, cfg.alpha)
    assert forward == backward


def test_degenerate_truth_is_flagged_not_nan(tmp_path):
    result = run_experiment(tiny(model=SimModelName.CONSTANT, sigma=0.0), tmp_path)
    for row in result.summary:
        assert row.degenerate
        assert row.relative_bias is None
        assert row.mean_estimate == 0.0


def test_large_subsamples_use_bootstrap_trees():
    rows = run_replication(tiny(k=16, b=6), 0)
    assert {r["estimator"] for r in rows} == {"bootstrap"}
    assert all(np.isfinite(r["var_raw"]) for r in rows)


def test_worker_pool_matches_serial_run():
    serial = run_experiment(tiny(workers=1))
    pooled = run_experiment(tiny(workers=2))
    assert serial.summary == pooled.summary


def test_interrupted_run_keeps_finished_replications(tmp_path):
    def stop_after_two(rep, done, total):
        if done == 2:
            raise KeyboardInterrupt

    with pytest.raises(KeyboardInterrupt):
        run_experiment(tiny(), tmp_path, progress=stop_after_two)
    results = pd.read_csv(tmp_path / "results.csv")
    assert sorted(results["rep"].unique().tolist()) == [0, 1]
    assert not (tmp_path / "summary.csv").exists()
