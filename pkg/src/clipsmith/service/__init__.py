"""Job-oriented HTTP service: filesystem-persisted pipeline orchestration."""

from .jobs import JobManifest, JobStore, STATES
from .app import create_app

__all__ = ["JobManifest", "JobStore", "STATES", "create_app"]
