"""Aging-based bandwidth prediction and three-level alert classification."""

from __future__ import annotations

import copy
import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Optional, Tuple

import numpy as np

DEFAULT_SMOOTHING = 0.5
DEFAULT_WINDOW = 60


class DomainError(ValueError):
    pass


class Unseeded(RuntimeError):
    pass


class InsufficientData(RuntimeError):
    pass


class NoSnapshot(RuntimeError):
    pass


class AlertLevel(enum.IntEnum):
    NORMAL = 0
    LEVEL1 = 1
    LEVEL2 = 2
    LEVEL3 = 3


@dataclass
class AgingPredictor:
    """Exponential "aging" estimate of the next interval's load, in percent.

    ``s`` is ``None`` until the first observation, which seeds the estimate
    directly.  The sliding ``window`` of raw observations backs :meth:`sigma`.
    """

    x: float = DEFAULT_SMOOTHING
    s: Optional[float] = None
    window_size: int = DEFAULT_WINDOW
    window: Deque[float] = field(default_factory=deque)
    saved: Optional[Tuple[Optional[float], Deque[float]]] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if not 0.0 <= self.x <= 1.0:
            raise DomainError(f"smoothing factor {self.x} outside [0, 1]")
        if self.window_size < 2:
            raise DomainError("window must hold at least 2 samples")
        if self.s is not None and not 0.0 <= self.s <= 100.0:
            raise DomainError(f"prediction {self.s} outside [0, 100]")
        self.window = deque(self.window, maxlen=self.window_size)

    @property
    def seeded(self) -> bool:
        return self.s is not None

    def update(self, observed_load: float) -> "AgingPredictor":
        if not 0.0 <= observed_load <= 100.0 or math.isnan(observed_load):
            raise DomainError(f"observed load {observed_load} outside [0, 100]")
        if self.s is None:
            self.s = float(observed_load)
        else:
            self.s = self.x * self.s + (1.0 - self.x) * observed_load
        self.window.append(float(observed_load))
        return self

    def alpha(self) -> float:
        if self.s is None:
            raise Unseeded("no observation yet")
        return self.s

    def mean(self) -> float:
        if not self.window:
            raise InsufficientData("empty window")
        return sum(self.window) / len(self.window)

    def sigma(self) -> float:
        """Sample standard deviation (n - 1 denominator) of the window."""
        n = len(self.window)
        if n < 2:
            raise InsufficientData(f"need 2 samples, have {n}")
        # Welford keeps this stable for long flat windows
        mean = 0.0
        m2 = 0.0
        for k, v in enumerate(self.window, 1):
            d = v - mean
            mean += d / k
            m2 += d * (v - mean)
        return math.sqrt(max(m2, 0.0) / (n - 1))

    @property
    def has_snapshot(self) -> bool:
        return self.saved is not None

    def snapshot_alpha(self) -> "AgingPredictor":
        self.saved = (self.s, copy.copy(self.window))
        return self

    def restore_alpha(self) -> "AgingPredictor":
        if self.saved is None:
            raise NoSnapshot("restore requested without a snapshot")
        self.s, window = self.saved
        self.window = deque(window, maxlen=self.window_size)
        self.saved = None
        return self

    def discard_snapshot(self) -> None:
        self.saved = None

    def state(self):
        return self.x, self.s, tuple(self.window)


@dataclass(frozen=True)
class AlertThresholds:
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 100.0:
            raise DomainError(f"alpha {self.alpha} outside [0, 100]")
        if self.beta < 0.0:
            raise DomainError(f"beta {self.beta} is negative")
        if self.beta > (100.0 - self.alpha) / 3.0 + 1e-12:
            raise DomainError(f"beta {self.beta} exceeds (100 - alpha) / 3")

    def bound(self, level: int) -> float:
        return self.alpha + level * self.beta


def compute_beta(alpha: float, sigma: float) -> float:
    if not 0.0 <= alpha <= 100.0:
        raise DomainError(f"alpha {alpha} outside [0, 100]")
    if sigma < 0.0:
        raise DomainError(f"sigma {sigma} is negative")
    return min((100.0 - alpha) / 3.0, sigma)


def classify(real_load: float, thresholds: AlertThresholds) -> AlertLevel:
    a, b = thresholds.alpha, thresholds.beta
    if b == 0.0:
        # coincident thresholds: any excess over the prediction is an emergency
        return AlertLevel.LEVEL3 if real_load > a else AlertLevel.NORMAL
    if real_load >= a + 3 * b:
        return AlertLevel.LEVEL3
    if real_load >= a + 2 * b:
        return AlertLevel.LEVEL2
    if real_load >= a + b:
        return AlertLevel.LEVEL1
    return AlertLevel.NORMAL


def classify_many(real_load, alpha, beta) -> np.ndarray:
    """Vectorised :func:`classify` over broadcastable arrays."""
    load = np.asarray(real_load, dtype=float)
    a = np.asarray(alpha, dtype=float)
    b = np.asarray(beta, dtype=float)
    graded = np.select(
        [load >= a + 3 * b, load >= a + 2 * b, load >= a + b],
        [3, 2, 1],
        default=0,
    )
    degenerate = np.where(load > a, 3, 0)
    return np.where(b == 0.0, degenerate, graded).astype(np.int8)
