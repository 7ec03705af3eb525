# app/routes/predict.py
import asyncio
import io
import logging

from fastapi import APIRouter, Depends, File, HTTPException, Query, UploadFile
from pydantic import ValidationError

from app.core.config import DEFAULT_ALPHA, ForestConfig
from app.core.errors import MatchVarError
from app.core.settings import get_settings
from app.dependencies.api_auth import http_auth
from app.schemas.csv_schema import CsvSchema
from app.schemas.variance import PredictionRow
from app.utils.csv_io import predict_from_csv

logger = logging.getLogger(__name__)

router = APIRouter(tags=["Prediction"])


@router.post(
    "/predict",
    summary="Forest predictions with variance estimates and confidence intervals",
    description="Fit one subbagged forest on the training CSV and report a VarianceReport per target row.",
    response_model=list[PredictionRow],
)
async def predict(
    train: UploadFile = File(..., description="Training CSV with a header row"),
    schema: UploadFile = File(..., description="Schema JSON {column: {role, kind, missing}}"),
    targets: UploadFile = File(..., description="Target CSV with the feature columns"),
    k: int = Query(..., description="Subsample size per tree"),
    m: int = Query(2, description="Subsamples per matched group"),
    b: int = Query(500, description="Number of groups"),
    mtry: int | None = Query(None),
    nodesize: int | None = Query(None),
    alpha: float = Query(DEFAULT_ALPHA, gt=0.0, lt=1.0),
    smooth: int = Query(0, ge=0, description="Number of smoothing neighbours"),
    smooth_refit: bool = Query(False),
    seed: int = Query(0, ge=0),
    _auth=Depends(http_auth),
):
    try:
        csv_schema = CsvSchema.model_validate_json(await schema.read())
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
        train_bytes = io.BytesIO(await train.read())
        target_bytes = io.BytesIO(await targets.read())
        reports = await asyncio.to_thread(
            predict_from_csv, train_bytes, csv_schema, target_bytes, cfg, get_settings().workers
        )
        return [PredictionRow(target_id=j, **r.model_dump()) for j, r in enumerate(reports)]
    except MatchVarError as e:
        raise HTTPException(status_code=422, detail=e.as_detail())
    except ValidationError as e:
        raise HTTPException(status_code=422, detail={"code": "invalid_request", "message": str(e)})
    except Exception as e:
        logger.error(f"❌ Prediction failed: {e}")
        raise HTTPException(status_code=500, detail=f"Prediction error: {e}")
