"""HTTP facade over the simulator: one-shot runs, experiments, and
long-lived interactive sessions."""

from .app import create_app

__all__ = ["create_app"]
