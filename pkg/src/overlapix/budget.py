from __future__ import annotations

import os
import time

from .exceptions import TimeBudgetExceeded

ENV_VAR = "OVERLAPIX_TIME_BUDGET_SECS"


def budget_from_env(default: float | None = None) -> float | None:
    raw = os.environ.get(ENV_VAR)
    if raw is None or not raw.strip():
        return default
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"{ENV_VAR} must be a number of seconds, got {raw!r}") from None
    return value if value > 0 else None


class Budget:
    """Wall-clock and node-count guard for exponential searches.

    ``tick()`` is cheap; the clock is only read every 1024 ticks.
    """

    __slots__ = ("seconds", "max_nodes", "nodes", "_deadline", "label")

    def __init__(self, seconds: float | None = None, max_nodes: int | None = None, label="search"):
        self.seconds = seconds
        self.max_nodes = max_nodes
        self.nodes = 0
        self.label = label
        self._deadline = None if seconds is None else time.monotonic() + seconds

    @classmethod
    def coerce(cls, budget, label="search") -> Budget:
        if isinstance(budget, Budget):
            return budget
        if budget is None:
            return cls(budget_from_env(), label=label)
        return cls(float(budget), label=label)

    def tick(self, n: int = 1) -> None:
        self.nodes += n
        if self.max_nodes is not None and self.nodes > self.max_nodes:
            raise TimeBudgetExceeded(f"{self.label}: node budget of {self.max_nodes} exceeded")
        if self._deadline is not None and self.nodes & 1023 == 0:
            self.check()

    def check(self) -> None:
        if self._deadline is not None and time.monotonic() > self._deadline:
            raise TimeBudgetExceeded(f"{self.label}: time budget of {self.seconds:g}s exceeded")
