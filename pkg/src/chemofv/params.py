"""Model parameters: motility laws, scheme coefficients, time-step schedules."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Motility", "SchemeParams", "total_time"]


@dataclass(frozen=True)
class Motility:
    """Cell motility gamma(s): decaying exponential or algebraic 1/(c + s^k)."""

    kind: str  # "exponential" | "algebraic"
    c: float = 1.0
    k: float = 2.0

    def __post_init__(self):
        if self.kind not in ("exponential", "algebraic"):
            raise ValueError(f"unknown motility kind {self.kind!r}")
        if self.kind == "algebraic":
            if not self.c > 0:
                raise ValueError("algebraic motility needs c > 0")
            if not self.k >= 1:
                raise ValueError("algebraic motility needs k >= 1")

    @classmethod
    def exponential(cls) -> "Motility":
        return cls("exponential")

    @classmethod
    def algebraic(cls, c: float = 1.0, k: float = 2.0) -> "Motility":
        return cls("algebraic", c=c, k=k)

    def __call__(self, s):
        if self.kind == "exponential":
            return np.exp(-np.asarray(s, dtype=float))
        return 1.0 / (self.c + np.asarray(s, dtype=float) ** self.k)

    @property
    def entropy_dissipative(self) -> bool:
        """Only the exponential motility carries the entropy guarantee."""
        return self.kind == "exponential"


def total_time(schedule) -> float:
    return float(sum(dt * n for dt, n in schedule))


@dataclass(frozen=True)
class SchemeParams:
    """Coefficients eps >= 0, delta > 0, beta > 0, the motility, and the
    time-step schedule as (dt, step count) segments."""

    eps: float
    delta: float
    beta: float
    motility: Motility = field(default_factory=Motility.exponential)
    schedule: tuple = ()
    solver_tol: float = 1e-10

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.delta == 0:
            warnings.warn(
                "delta = 0 is a very degenerate regime; no stability guarantee applies",
                stacklevel=2,
            )
        norm = []
        for dt, n in self.schedule:
            if dt <= 0 or n < 0:
                raise ValueError("schedule needs dt > 0 and step count >= 0")
            norm.append((float(dt), int(n)))
        object.__setattr__(self, "schedule", tuple(norm))
        if self.solver_tol <= 0:
            raise ValueError("solver_tol must be positive")

    def with_schedule(self, schedule) -> "SchemeParams":
        return SchemeParams(
            eps=self.eps,
            delta=self.delta,
            beta=self.beta,
            motility=self.motility,
            schedule=tuple(schedule),
            solver_tol=self.solver_tol,
        )
