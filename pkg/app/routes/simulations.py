# app/routes/simulations.py
from fastapi import APIRouter, Depends, HTTPException

from app.core.errors import MatchVarError
from app.dependencies.api_auth import http_auth
from app.schemas.experiment import ExperimentConfig, SimulationStatus
from simulation_control import get_run, list_runs, start_simulation

router = APIRouter(tags=["Simulations"])


@router.post(
    "/simulations",
    summary="Start a Monte Carlo study",
    status_code=202,
    response_model=SimulationStatus,
)
async def create_simulation(cfg: ExperimentConfig, _auth=Depends(http_auth)):
    try:
        return await start_simulation(cfg)
    except MatchVarError as e:
        raise HTTPException(status_code=422, detail=e.as_detail())


@router.get("/simulations", summary="List simulation runs", response_model=list[SimulationStatus])
async def get_simulations():
    return list_runs()


@router.get("/simulations/{run_id}", summary="Status and summary of one run", response_model=SimulationStatus)
async def get_simulation(run_id: str):
    status = get_run(run_id)
    if status is None:
        raise HTTPException(status_code=404, detail=f"Simulation {run_id} not found")
    return status
