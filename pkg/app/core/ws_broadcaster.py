# app/core/ws_broadcaster.py
import logging
from collections import defaultdict

from fastapi import WebSocket

logger = logging.getLogger(__name__)


class RunProgressBroadcaster:
    """Fans progress messages of a simulation run out to the sockets subscribed to it."""

    def __init__(self):
        self.subscriptions: dict[str, set[WebSocket]] = defaultdict(set)

    def subscribe(self, run_id: str, ws: WebSocket):
        self.subscriptions[run_id].add(ws)

    def unsubscribe(self, ws: WebSocket):
        for key in list(self.subscriptions):
            self.subscriptions[key].discard(ws)
            if not self.subscriptions[key]:
                del self.subscriptions[key]

    def subscriber_count(self, run_id: str) -> int:
        return len(self.subscriptions.get(run_id, ()))

    async def broadcast(self, run_id: str, message: dict):
        dead = set()

        for ws in list(self.subscriptions.get(run_id, [])):
            try:
                await ws.send_json({"run_id": run_id, **message})
            except Exception as e:
                logger.warning(f"⚠️ Error sending to WebSocket: {e}")
                dead.add(ws)

        # Remove dead sockets
        for ws in dead:
            self.subscriptions[run_id].discard(ws)
        if run_id in self.subscriptions and not self.subscriptions[run_id]:
            del self.subscriptions[run_id]


run_progress_broadcaster = RunProgressBroadcaster()
