# simulation_control.py
import asyncio
import logging
import uuid
from pathlib import Path

from app.core.config import validate_config
from app.core.settings import get_settings
from app.core.ws_broadcaster import run_progress_broadcaster
from app.schemas.experiment import ExperimentConfig, RunState, SimulationStatus
from app.utils.harness import run_experiment

logger = logging.getLogger(__name__)

# In-memory run registry
SIMULATION_RUNS: dict[str, SimulationStatus] = {}
_RUN_TASKS: dict[str, asyncio.Task] = {}


def get_run(run_id: str) -> SimulationStatus | None:
    return SIMULATION_RUNS.get(run_id)


def list_runs() -> list[SimulationStatus]:
    return list(SIMULATION_RUNS.values())


async def start_simulation(cfg: ExperimentConfig) -> SimulationStatus:
    """Validate, register and launch a run in a worker thread; returns immediately."""
    validate_config(cfg.forest_config(), cfg.n, cfg.d)

    run_id = uuid.uuid4().hex[:12]
    out_dir = Path(get_settings().results_dir) / run_id
    status = SimulationStatus(run_id=run_id, total=cfg.n_mc, config=cfg, out_dir=str(out_dir))
    SIMULATION_RUNS[run_id] = status

    _RUN_TASKS[run_id] = asyncio.create_task(_run(status, out_dir))
    logger.info(f"🚀 Simulation {run_id} queued ({cfg.n_mc} replications)")
    return status


async def _run(status: SimulationStatus, out_dir: Path):
    loop = asyncio.get_running_loop()
    run_id = status.run_id

    def progress(rep_id: int, completed: int, total: int):
        status.completed = completed
        asyncio.run_coroutine_threadsafe(
            run_progress_broadcaster.broadcast(
                run_id, {"event": "progress", "rep": rep_id, "completed": completed, "total": total}
            ),
            loop,
        )

    status.state = RunState.RUNNING
    try:
        result = await asyncio.to_thread(run_experiment, status.config, out_dir, progress)
        status.summary = result.summary
        status.state = RunState.DONE
        logger.info(f"✅ Simulation {run_id} finished")
        await run_progress_broadcaster.broadcast(run_id, {"event": "done", "completed": status.completed})
    except Exception as e:
        status.state = RunState.FAILED
        status.error = str(e)
        logger.error(f"❌ Simulation {run_id} failed: {e}")
        await run_progress_broadcaster.broadcast(run_id, {"event": "failed", "error": str(e)})
    finally:
        _RUN_TASKS.pop(run_id, None)


async def cancel_all():
    """Cancel pending run tasks on shutdown; worker threads finish their current replication."""
    for run_id, task in list(_RUN_TASKS.items()):
        task.cancel()
        status = SIMULATION_RUNS.get(run_id)
        if status and status.state is not RunState.DONE:
            status.state = RunState.FAILED
            status.error = "cancelled on shutdown"
    _RUN_TASKS.clear()
