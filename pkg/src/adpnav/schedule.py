"""Fidelity schedules: how a rollout horizon is cut into integration intervals.

Every builder evaluates cumulative times t_0 = 0, t_1, ..., t_N = T and
differences them, so schedules built from the same time grid are identical
bit for bit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams

DDP_T = 2.0
DDP_N = 20
DDP_P = 1.7


class ScheduleKind(enum.Enum):
    FIXED = "fixed"
    DECREMENTAL = "decremental"
    BLENDED = "blended"
    INCREMENTAL = "incremental"
    UNCONSTRAINED = "unconstrained"


@dataclass(frozen=True, eq=False)
class FidelitySchedule:
    intervals: np.ndarray
    kind: ScheduleKind

    def __post_init__(self) -> None:
        iv = np.array(self.intervals, dtype=float)
        if iv.ndim != 1 or iv.size < 1:
            raise InvalidParams("a schedule needs at least one interval")
        if not np.all(iv > 0):
            raise InvalidParams("schedule intervals must be positive")
        iv.setflags(write=False)
        object.__setattr__(self, "intervals", iv)

    @property
    def total(self) -> float:
        return float(self.intervals.sum())

    @property
    def n(self) -> int:
        return int(self.intervals.size)

    @property
    def times(self) -> np.ndarray:
        """Interval boundary times, starting at 0."""
        return np.concatenate(([0.0], np.cumsum(self.intervals)))

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FidelitySchedule):
            return NotImplemented
        return self.kind == other.kind and np.array_equal(self.intervals, other.intervals)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class ScheduleParams:
    T: float
    N: int
    p: float
    alpha: float

    def validate(self) -> None:
        if not (self.T > 0 and math.isfinite(self.T)):
            raise InvalidParams(f"T must be positive, got {self.T}")
        if int(self.N) != self.N or self.N < 1:
            raise InvalidParams(f"N must be a positive integer, got {self.N}")
        if not self.p >= 1:
            raise InvalidParams(f"p must be >= 1, got {self.p}")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidParams(f"alpha must lie in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class ActionBounds:
    T: tuple[float, float] = (1.0, 3.0)
    N: tuple[int, int] = (5, 30)
    p: tuple[float, float] = (1.0, 3.0)
    alpha: tuple[float, float] = (0.0, 1.0)


def _times(T: float, N: int, p: float, alpha: float) -> np.ndarray:
    frac = np.arange(N + 1, dtype=float) / N
    return alpha * frac * T + (1.0 - alpha) * frac**p * T


def _check(T: float, N: int, p: float, alpha: float = 0.0) -> None:
    ScheduleParams(T, N, p, alpha).validate()


def fixed_schedule(T: float, N: int) -> FidelitySchedule:
    """Uniform intervals T/N."""
    _check(T, N, 1.0)
    frac = np.arange(N + 1, dtype=float) / N
    return FidelitySchedule(np.diff(frac * T), ScheduleKind.FIXED)


def ddp_schedule(T: float = DDP_T, N: int = DDP_N, p: float = DDP_P) -> FidelitySchedule:
    """Hand-crafted decremental schedule: t_i = (i/N)^p * T."""
    _check(T, N, p)
    return FidelitySchedule(np.diff(_times(T, N, p, 0.0)), ScheduleKind.DECREMENTAL)


def blended_schedule(params: ScheduleParams) -> FidelitySchedule:
    """t_i = alpha*(i/N)*T + (1-alpha)*(i/N)^p*T, intervals are the differences."""
    params.validate()
    t = _times(params.T, int(params.N), params.p, params.alpha)
    return FidelitySchedule(np.diff(t), ScheduleKind.BLENDED)


def incremental_schedule(params: ScheduleParams) -> FidelitySchedule:
    """The blended schedule read backwards: coarse first, fine last."""
    iv = blended_schedule(params).intervals[::-1]
    return FidelitySchedule(iv, ScheduleKind.INCREMENTAL)


def unconstrained_schedule(raw, T: float = DDP_T) -> FidelitySchedule:
    """Softmax of raw interval scores scaled to the horizon T."""
    raw = np.clip(np.asarray(raw, dtype=float), -1.0, 1.0)
    z = np.exp(raw - raw.max())
    return FidelitySchedule(T * z / z.sum(), ScheduleKind.UNCONSTRAINED)


def _affine(u: float, lo: float, hi: float) -> float:
    return float(lo + (u + 1.0) * 0.5 * (hi - lo))


def decode_action(raw, bounds: ActionBounds = ActionBounds()) -> ScheduleParams:
    """Map a policy output in [-1, 1]^4 to schedule parameters (saturating)."""
    r = np.clip(np.asarray(raw, dtype=float).reshape(4), -1.0, 1.0)
    n = int(math.floor(_affine(r[1], *bounds.N) + 0.5))
    return ScheduleParams(
        T=_affine(r[0], *bounds.T),
        N=n,
        p=_affine(r[2], *bounds.p),
        alpha=_affine(r[3], *bounds.alpha),
    )


def encode_params(params: ScheduleParams, bounds: ActionBounds = ActionBounds()) -> np.ndarray:
    """Inverse of :func:`decode_action` up to the rounding of N."""

    def inv(x: float, lo: float, hi: float) -> float:
        return 2.0 * (x - lo) / (hi - lo) - 1.0

    return np.array(
        [
            inv(params.T, *bounds.T),
            inv(params.N, *bounds.N),
            inv(params.p, *bounds.p),
            inv(params.alpha, *bounds.alpha),
        ]
    )
