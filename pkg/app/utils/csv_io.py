# app/utils/csv_io.py
"""
CSV ingestion and the predict-with-intervals pipeline.

Categorical features are ordinal-coded in first-appearance order of the
training file. Missing cells ("", NA, NaN, null) follow the per-column
policy of the schema; targets reuse the training codes and fill values.
"""
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import IO

import numpy as np
import pandas as pd

from app.core.config import ForestConfig, SamplingMode, validate_config, with_defaults
from app.core.dataset import Dataset, TargetPoint, as_target
from app.core.errors import MalformedCsv, NonFiniteValue, UnknownCategory, UnknownColumn
from app.core.random_stream import SMOOTHING, RandomStream
from app.schemas.csv_schema import ColumnKind, ColumnSpec, CsvSchema, MissingPolicy
from app.schemas.variance import VarianceReport
from app.utils.forest import fit_bootstrap_forest, fit_forest
from app.utils.sampling import plan_for_config
from app.utils.variance import forest_variance_estimate, smoothed_variance_estimate

logger = logging.getLogger(__name__)

MISSING_TOKENS = frozenset({"", "NA", "NaN", "nan", "null", "NULL"})

CsvSource = Path | str | IO


@dataclass(frozen=True)
class FeatureEncoder:
    """What targets need from the training file: category codes and fill values."""

    levels: dict[str, tuple[str, ...]]
    fill: dict[str, float]

    def code(self, column: str, level: str) -> int:
        try:
            return self.levels[column].index(level)
        except ValueError:
            raise UnknownCategory(f"column '{column}': level '{level}' was not seen in training") from None


def load_schema(path: Path | str) -> CsvSchema:
    return CsvSchema.model_validate_json(Path(path).read_bytes())


def _load_frame(source: CsvSource, required: list[str]) -> pd.DataFrame:
    # index_col=False stops pandas from taking an extra leading field as the row index;
    # the data loss it warns about instead is an error here
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", pd.errors.ParserWarning)
            frame = pd.read_csv(source, dtype=str, keep_default_na=False, index_col=False)
    except pd.errors.ParserWarning as exc:
        raise MalformedCsv(f"rows have more fields than the header: {exc}") from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise MalformedCsv(f"cannot parse CSV: {exc}") from exc

    absent = [name for name in required if name not in frame.columns]
    if absent:
        raise UnknownColumn(f"columns {absent} are declared in the schema but missing from the CSV header")

    # keep_default_na=False leaves empty cells as ""; NaN only marks rows with too few fields.
    short = frame.isna().any(axis=1).to_numpy()
    if short.any():
        raise MalformedCsv(f"row {int(np.argmax(short)) + 2} has fewer fields than the header")
    return frame


def _missing_mask(raw: pd.Series) -> np.ndarray:
    return raw.str.strip().isin(MISSING_TOKENS).to_numpy()


def _parse_numeric(name: str, raw: pd.Series, missing: np.ndarray) -> np.ndarray:
    values = pd.to_numeric(raw.str.strip().where(~missing), errors="coerce").to_numpy(dtype=float)
    bad = np.isnan(values) & ~missing
    if bad.any():
        row = int(np.argmax(bad))
        raise MalformedCsv(f"column '{name}', row {row + 2}: cannot parse '{raw.iloc[row]}' as a number")
    if np.isinf(values).any():
        raise NonFiniteValue(f"column '{name}' contains infinite values")
    return values


def _training_column(name: str, spec: ColumnSpec, raw: pd.Series, encoder: FeatureEncoder) -> np.ndarray:
    missing = _missing_mask(raw)
    if missing.any() and spec.missing is MissingPolicy.ERROR:
        raise MalformedCsv(f"column '{name}' has {int(missing.sum())} missing value(s) and policy 'error'")

    if spec.kind is ColumnKind.CATEGORICAL:
        stripped = raw.str.strip()
        levels = tuple(pd.unique(stripped[~missing]))
        encoder.levels[name] = levels
        lookup = {level: code for code, level in enumerate(levels)}
        encoder.fill[name] = 0.0
        return np.array([0.0 if m else float(lookup[v]) for v, m in zip(stripped, missing)])

    values = _parse_numeric(name, raw, missing)
    if spec.missing is MissingPolicy.MEAN:
        if missing.all():
            raise MalformedCsv(f"column '{name}' has no observed values to impute from")
        encoder.fill[name] = float(np.mean(values[~missing]))
    else:
        encoder.fill[name] = 0.0
    values[missing] = encoder.fill[name]
    return values


def read_training_csv(source: CsvSource, schema: CsvSchema) -> tuple[Dataset, FeatureEncoder]:
    features = schema.feature_columns
    response = schema.response_column
    frame = _load_frame(source, features + [response])

    encoder = FeatureEncoder(levels={}, fill={})
    columns = [_training_column(name, schema[name], frame[name], encoder) for name in features]
    y = _training_column(response, schema[response], frame[response], encoder)

    logger.info("📥 read %d rows, %d features (%d categorical)", len(frame), len(features), len(encoder.levels))
    data = Dataset(features=np.column_stack(columns), response=y, feature_names=tuple(features))
    return data, encoder


def read_csv(source: CsvSource, schema: CsvSchema) -> Dataset:
    return read_training_csv(source, schema)[0]


def read_targets(source: CsvSource, schema: CsvSchema, encoder: FeatureEncoder) -> list[TargetPoint]:
    """Target rows need the feature columns only; a response column, if present, is ignored."""
    features = schema.feature_columns
    frame = _load_frame(source, features)

    columns = []
    for name in features:
        spec = schema[name]
        raw = frame[name]
        missing = _missing_mask(raw)
        if missing.any() and spec.missing is MissingPolicy.ERROR:
            raise MalformedCsv(f"target column '{name}' has missing values and policy 'error'")
        if spec.kind is ColumnKind.CATEGORICAL:
            values = np.array(
                [encoder.fill[name] if m else float(encoder.code(name, v)) for v, m in zip(raw.str.strip(), missing)]
            )
        else:
            values = _parse_numeric(name, raw, missing)
            values[missing] = encoder.fill[name]
        columns.append(values)

    return [TargetPoint(row) for row in np.column_stack(columns)]


def write_dataset_csv(data: Dataset, path: Path | str, response_name: str = "y") -> None:
    names = data.feature_names or tuple(f"x{j + 1}" for j in range(data.d))
    frame = pd.DataFrame(data.features, columns=list(names))
    frame[response_name] = data.response
    frame.to_csv(path, index=False)


def prediction_config(cfg: ForestConfig, n: int) -> ForestConfig:
    """Matched configs with k > n/2 switch to the subset plan with bootstrap trees."""
    if cfg.mode is SamplingMode.MATCHED and 2 * cfg.k > n:
        logger.info("k=%d > n/2: using independent subsets with bootstrap trees", cfg.k)
        return cfg.model_copy(update={"mode": SamplingMode.SUBSET, "m": 1})
    return cfg


def predict_with_intervals(
    data: Dataset, cfg: ForestConfig, targets: list[TargetPoint | np.ndarray], workers: int = 1
) -> list[VarianceReport]:
    """One forest fit, one VarianceReport per target."""
    targets = [as_target(x) for x in targets]
    cfg = prediction_config(cfg, data.n)
    validate_config(cfg, data.n, data.d)
    cfg = with_defaults(cfg, data.n, data.d)
    for x in targets:
        x.check_dimension(data.d)

    rs = RandomStream(cfg.seed)
    forest = fit_forest(data, plan_for_config(data.n, cfg, rs), cfg, rs, workers=workers)
    boot = None if cfg.mode is SamplingMode.MATCHED else fit_bootstrap_forest(data, cfg, rs, workers=workers)

    reports = []
    for j, x in enumerate(targets):
        if cfg.smoothing_neighbors > 0:
            report = smoothed_variance_estimate(
                forest, x, data, cfg.smoothing_neighbors, rs.split([SMOOTHING, j]), boot_forest=boot, refit=cfg.smooth_refit
            )
        else:
            report = forest_variance_estimate(forest, x, boot)
        reports.append(report)

    clipped = sum(r.clipped for r in reports)
    if clipped:
        logger.warning("⚠️ %d of %d variance estimates were negative and clipped at 0", clipped, len(reports))
    return reports


def reports_frame(reports: list[VarianceReport]) -> pd.DataFrame:
    return pd.DataFrame(
        [{"target_id": j} | r.csv_fields() | {"alpha": r.alpha, "mode": r.mode.value} for j, r in enumerate(reports)]
    )


def predict_from_csv(
    train: CsvSource, schema: CsvSchema, targets: CsvSource, cfg: ForestConfig, workers: int = 1
) -> list[VarianceReport]:
    data, encoder = read_training_csv(train, schema)
    points = read_targets(targets, schema, encoder)
    return predict_with_intervals(data, cfg, points, workers=workers)


def run_predict_pipeline(
    train: CsvSource,
    schema: CsvSchema,
    targets: CsvSource,
    cfg: ForestConfig,
    out: Path | str | None = None,
    workers: int = 1,
) -> pd.DataFrame:
    frame = reports_frame(predict_from_csv(train, schema, targets, cfg, workers=workers))
    if out is not None:
        frame.to_csv(out, index=False)
        logger.info("💾 wrote %d predictions to %s", len(frame), out)
    return frame
