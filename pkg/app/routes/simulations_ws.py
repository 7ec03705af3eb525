# app/routes/simulations_ws.py
import logging

from fastapi import APIRouter, Depends, WebSocket, WebSocketDisconnect

from app.core.ws_broadcaster import run_progress_broadcaster
from app.dependencies.api_auth import websocket_auth
from simulation_control import get_run

logger = logging.getLogger(__name__)

router = APIRouter(tags=["Simulations WebSocket"])


@router.websocket("/ws/simulations/{run_id}")
async def simulation_progress_websocket(websocket: WebSocket, run_id: str, auth=Depends(websocket_auth)):
    await websocket.accept()
    status = get_run(run_id)
    if not status:
        await websocket.send_json({"error": f"Simulation {run_id} not found"})
        await websocket.close()
        return

    logger.info(f"🔌 WebSocket subscribed to simulation {run_id}")
    run_progress_broadcaster.subscribe(run_id, websocket)
    await websocket.send_json(
        {"run_id": run_id, "event": "status", "state": status.state.value, "completed": status.completed, "total": status.total}
    )

    try:
        while True:
            # clients only listen; reads detect disconnects
            await websocket.receive_text()
    except WebSocketDisconnect:
        logger.info(f"🔌 WebSocket disconnected from simulation {run_id}")
        run_progress_broadcaster.unsubscribe(websocket)
