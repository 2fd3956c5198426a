"""Analyst review backend: event-sourced store plus HTTP service."""

from .store import (  # noqa: F401
    ConflictError,
    MonitoringSite,
    ReviewError,
    ReviewEvent,
    ReviewStore,
    TransitionError,
)
from .service import create_app  # noqa: F401
