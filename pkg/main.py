# main.py
import logging
from contextlib import asynccontextmanager

import psutil
from fastapi import FastAPI
from fastapi.responses import Response

from app.core.logging_setup import configure_logging
from app.core.settings import get_settings
from app.routes import oracle_check, predict, simulations, simulations_ws
from simulation_control import cancel_all, list_runs


@asynccontextmanager
async def lifespan(app: FastAPI):
    configure_logging(get_settings().log_level)
    logging.getLogger(__name__).info("\U0001F680 matchvar service is running. POST /simulations or /predict to begin.")
    yield
    await cancel_all()


app = FastAPI(title="matchvar", lifespan=lifespan)

# ✅ Include API routers
app.include_router(predict.router)
app.include_router(oracle_check.router)
app.include_router(simulations.router)
app.include_router(simulations_ws.router)


@app.get("/")
def root():
    return {"status": "matchvar is running. Upload data via /predict or start a study via /simulations."}


@app.get("/stats")
def system_stats():
    p = psutil.Process()
    mem = round(p.memory_info().rss / 1024 / 1024, 2)
    cpu = p.cpu_percent(interval=0.1)
    threads = p.num_threads()
    return {
        "memory_mb": mem,
        "cpu_percent": cpu,
        "threads": threads,
        "pid": p.pid,
        "runs": len(list_runs()),
    }


@app.get("/favicon.ico")
def favicon():
    return Response(content="", media_type="image/x-icon")
