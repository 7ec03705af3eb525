# app/routes/oracle_check.py
import asyncio

from fastapi import APIRouter, Query

from app.utils.oracle import format_tap, run_identity_checks

router = APIRouter(tags=["Oracle"])


@router.get(
    "/oracle-check",
    summary="Exact combinatorial identity checks",
    description="Runs the rational-arithmetic identities for every 2 <= 2k <= n <= max_n.",
)
async def oracle_check(max_n: int = Query(24, ge=4, le=40)):
    checks = await asyncio.to_thread(run_identity_checks, max_n)
    return {
        "max_n": max_n,
        "passed": all(c.passed for c in checks),
        "checks": checks,
        "tap": format_tap(checks),
    }
