"""Command-line surface and the blind teleoperation service."""

from .protocol import PROTOCOL_VERSION, validate_message
from .server import SessionEngine, create_app

__all__ = ["PROTOCOL_VERSION", "validate_message", "SessionEngine", "create_app"]
