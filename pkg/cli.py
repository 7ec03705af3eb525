# cli.py
from pathlib import Path
from typing import Optional

import orjson
import pandas as pd
import typer
import yaml
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from app.core.config import DEFAULT_ALPHA, ForestConfig
from app.core.errors import MatchVarError
from app.core.logging_setup import configure_logging
from app.core.settings import get_settings
from app.schemas.experiment import EvalRow, ExperimentConfig
from app.utils.csv_io import load_schema, run_predict_pipeline
from app.utils.harness import run_experiment, run_replication, summarize_results
from app.utils.oracle import format_tap, run_identity_checks
from app.utils.sim_models import SimModelName

app = typer.Typer(help="Matched-group variance estimates for subbagged forests.", no_args_is_help=True)
console = Console()

DOMAIN_ERROR_EXIT = 2


def _fail(e: MatchVarError):
    console.print(f"[bold red]{e.code}[/]: {escape(e.message)}")
    raise typer.Exit(DOMAIN_ERROR_EXIT)


def _summary_table(rows: list[EvalRow]) -> Table:
    table = Table(title="Summary")
    for column in ("target", "estimator", "truth var", "mean est.", "rel. bias", "coverage", "oracle cov."):
        table.add_column(column, justify="right")
    for r in rows:
        bias = "n/a" if r.relative_bias is None else f"{100 * r.relative_bias:+.1f}%"
        table.add_row(
            str(r.target_id),
            r.estimator,
            f"{r.truth_var:.4g}",
            f"{r.mean_estimate:.4g}",
            bias,
            f"{r.coverage:.3f}",
            f"{r.oracle_coverage:.3f}",
        )
    return table


def _load_experiment(config: Optional[Path], overrides: dict) -> ExperimentConfig:
    base = yaml.safe_load(config.read_text()) if config else {}
    base = base or {}
    base.update({key: value for key, value in overrides.items() if value is not None})
    return ExperimentConfig.model_validate(base)


@app.command()
def simulate(
    config: Optional[Path] = typer.Option(None, "--config", exists=True, help="YAML experiment file"),
    model: Optional[SimModelName] = typer.Option(None),
    n: Optional[int] = typer.Option(None),
    k: Optional[int] = typer.Option(None),
    m: Optional[int] = typer.Option(None),
    b: Optional[int] = typer.Option(None),
    mtry: Optional[int] = typer.Option(None),
    nodesize: Optional[int] = typer.Option(None),
    kernel: Optional[str] = typer.Option(None, help="tree | mean | one_nn"),
    nmc: Optional[int] = typer.Option(None, help="Monte Carlo replications"),
    ntruth: Optional[int] = typer.Option(None, help="Ground-truth replications"),
    targets: Optional[str] = typer.Option(None, help="random:<count> | center | file:<path>"),
    alpha: Optional[float] = typer.Option(None),
    smooth: Optional[int] = typer.Option(None, help="Smoothing neighbours N"),
    smooth_refit: Optional[bool] = typer.Option(None, "--smooth-refit/--no-smooth-refit"),
    sigma: Optional[float] = typer.Option(None),
    seed: Optional[int] = typer.Option(None),
    workers: Optional[int] = typer.Option(None),
    out: Path = typer.Option(Path("results"), "--out", help="Output directory"),
):
    """Run a Monte Carlo bias/coverage study and write tidy CSVs."""
    configure_logging(get_settings().log_level)
    cfg = _load_experiment(
        config,
        {
            "model": model,
            "n": n,
            "k": k,
            "m": m,
            "b": b,
            "mtry": mtry,
            "nodesize": nodesize,
            "kernel": kernel,
            "n_mc": nmc,
            "n_truth": ntruth,
            "targets": targets,
            "alpha": alpha,
            "smoothing": smooth,
            "smooth_refit": smooth_refit,
            "sigma": sigma,
            "seed": seed,
            "workers": workers,
        },
    )
    try:
        result = run_experiment(cfg, out)
    except MatchVarError as e:
        _fail(e)
    console.print(_summary_table(result.summary))
    console.print(f"💾 results in {out}")


@app.command()
def replay(
    out: Path = typer.Argument(..., help="Directory written by simulate"),
    rep: int = typer.Option(..., help="Replication id to recompute"),
):
    """Recompute one replication from the seed ledger and compare it with results.csv."""
    configure_logging(get_settings().log_level)
    cfg = ExperimentConfig.model_validate(orjson.loads((out / "config.json").read_bytes()))
    recorded = pd.read_csv(out / "results.csv", float_precision="round_trip")
    recorded = recorded[recorded["rep"] == rep]
    if recorded.empty:
        console.print(f"[red]replication {rep} is not in {out / 'results.csv'}[/]")
        raise typer.Exit(1)
    try:
        rows = run_replication(cfg, rep, seed=int(recorded["seed"].iloc[0]))
    except MatchVarError as e:
        _fail(e)
    fresh = pd.DataFrame(rows)
    recorded = recorded.sort_values(["target_id", "estimator"]).reset_index(drop=True)
    fresh = fresh.sort_values(["target_id", "estimator"]).reset_index(drop=True)
    same = all(recorded[c].tolist() == fresh[c].tolist() for c in ("point", "vh", "vs", "var_raw"))
    console.print("✅ identical" if same else "❌ replication differs from the recorded rows")
    raise typer.Exit(0 if same else 1)


@app.command()
def summarize(
    out: Path = typer.Argument(..., help="Directory written by simulate"),
    alpha: float = typer.Option(DEFAULT_ALPHA),
):
    """Rebuild the summary table from results.csv and truth.csv."""
    rows = summarize_results(out / "results.csv", out / "truth.csv", alpha)
    console.print(_summary_table(rows))


@app.command()
def predict(
    train: Path = typer.Option(..., exists=True, help="Training CSV with a header row"),
    schema: Path = typer.Option(..., exists=True, help="Schema JSON"),
    targets: Path = typer.Option(..., exists=True, help="Target CSV"),
    k: int = typer.Option(...),
    m: int = typer.Option(2),
    b: int = typer.Option(500),
    mtry: Optional[int] = typer.Option(None),
    nodesize: Optional[int] = typer.Option(None),
    alpha: float = typer.Option(DEFAULT_ALPHA),
    smooth: int = typer.Option(0),
    smooth_refit: bool = typer.Option(False, "--smooth-refit"),
    seed: int = typer.Option(0),
    workers: int = typer.Option(1),
    out: Path = typer.Option(Path("predictions.csv")),
):
    """Predictions with variance estimates and normal confidence intervals."""
    configure_logging(get_settings().log_level)
    try:
        cfg = ForestConfig(
            k=k,
            m=m,
            b=b,
            mtry=mtry,
            nodesize=nodesize,
            alpha=alpha,
            smoothing_neighbors=smooth,
            smooth_refit=smooth_refit,
            seed=seed,
        )
        frame = run_predict_pipeline(train, load_schema(schema), targets, cfg, out, workers=workers)
    except MatchVarError as e:
        _fail(e)
    console.print(frame.to_string(index=False))


@app.command("oracle-check")
def oracle_check(max_n: int = typer.Option(24, "--max-n")):
    """Exact combinatorial identities in rational arithmetic, printed as TAP."""
    checks = run_identity_checks(max_n)
    console.print(format_tap(checks), markup=False, highlight=False)
    raise typer.Exit(0 if all(c.passed for c in checks) else 1)


@app.command()
def serve(host: str = "0.0.0.0", port: int = 8000):
    """Run the HTTP/WebSocket service."""
    import uvicorn

    uvicorn.run("main:app", host=host, port=port)


if __name__ == "__main__":
    app()
