# app/dependencies/api_auth.py
from fastapi import Header, HTTPException, WebSocket, WebSocketException, status

from app.core.settings import get_settings


def _expected() -> str:
    return f"Bearer {get_settings().api_token}"


async def http_auth(authorization: str | None = Header(None)):
    if not authorization or authorization != _expected():
        raise HTTPException(status_code=status.HTTP_401_UNAUTHORIZED, detail="Invalid or missing bearer token")
    return authorization


async def websocket_auth(websocket: WebSocket):
    token = websocket.headers.get("Authorization")

    if not token or token != _expected():
        raise WebSocketException(code=status.WS_1008_POLICY_VIOLATION)
    return token
