from __future__ import annotations

from dataclasses import dataclass


class SignalDQNError(Exception): ...


class ConfigurationError(SignalDQNError): ...


class UnknownApproachError(SignalDQNError): ...


class UnsupportedSizeError(SignalDQNError): ...


class ShapeMismatchError(SignalDQNError): ...


class CheckpointError(SignalDQNError): ...


@dataclass
class SafetyViolationError(SignalDQNError):
    t: int
    approaches: tuple[int, ...]

    def __str__(self) -> str:
        return f"[t={self.t}] conflicting greens on approaches {list(self.approaches)}"


@dataclass
class RuleViolationError(SignalDQNError):
    action: str
    reason: str

    def __str__(self) -> str:
        return f"{self.action} rejected: {self.reason}"


@dataclass
class OversaturatedError(SignalDQNError):
    flow_ratio: float

    def __str__(self) -> str:
        return f"sum of critical flow ratios {self.flow_ratio:.3f} >= 1, no finite cycle exists"


@dataclass
class NonFiniteLossError(SignalDQNError):
    loss: float
    step: int | None = None
    detail: str | None = None

    def __str__(self) -> str:
        where = f" at step {self.step}" if self.step is not None else ""
        extra = f" ({self.detail})" if self.detail else ""
        return f"non-finite loss {self.loss!r}{where}{extra}"
