# app/core/logging_setup.py
import logging

from rich.logging import RichHandler

_configured = False


def configure_logging(level: str | int = "INFO") -> None:
    global _configured
    if _configured:
        logging.getLogger().setLevel(level)
        return

    logging.basicConfig(
        level=level,
        format="%(name)s: %(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=True, show_path=False)],
    )
    logging.getLogger("uvicorn.access").setLevel(logging.WARNING)
    _configured = True
