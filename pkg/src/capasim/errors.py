"""Exception types shared across the simulator."""

from __future__ import annotations


class CapasimError(Exception):
    """Base class for all domain errors raised by this package."""

    def as_record(self) -> dict:
        """Machine-readable error record (used by the CLI)."""
        return {"type": type(self).__name__, "message": str(self)}


class ConfigError(CapasimError):
    """Invalid scenario configuration; carries the offending key path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")

    def as_record(self) -> dict:
        record = super().as_record()
        record["path"] = self.path
        return record


class ContractViolation(CapasimError):
    """An operation was called outside its contract (e.g. acting for a done agent)."""


class OracleUnavailableError(CapasimError):
    """The exact solver refused to run because the state space is too large."""


class UndefinedMetricError(CapasimError):
    """A capability score was requested for a capability with no evaluation links."""
