"""Monte Carlo value with standard error, and chunked accumulators."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MCValue:
    """Monte Carlo estimate and its standard error (0 for exact values)."""

    value: float
    se: float = 0.0
    draws: int = 0

    def __float__(self) -> float:
        return self.value

    def within(self, other: float, k: float = 3.0) -> bool:
        return abs(self.value - other) <= k * self.se


class MeanAccumulator:
    """Running sums for the mean of a stream of chunks."""

    def __init__(self):
        self.n = 0
        self.s = 0.0
        self.ss = 0.0

    def add(self, v: np.ndarray) -> None:
        self.n += v.shape[0]
        self.s += float(np.sum(v))
        self.ss += float(np.sum(v * v))

    def result(self) -> MCValue:
        m = self.s / self.n
        var = max(self.ss / self.n - m * m, 0.0)
        return MCValue(m, math.sqrt(var / self.n), self.n)


class RatioAccumulator:
    """Self-normalized ratio sum(w f) / sum(w) with a delta-method standard error."""

    def __init__(self):
        self.n = 0
        self.sw = self.swf = self.sww = self.swwf = self.swwff = 0.0

    def add(self, w: np.ndarray, f: np.ndarray) -> None:
        wf = w * f
        self.n += w.shape[0]
        self.sw += float(np.sum(w))
        self.swf += float(np.sum(wf))
        self.sww += float(np.sum(w * w))
        self.swwf += float(np.sum(w * wf))
        self.swwff += float(np.sum(wf * wf))

    def result(self) -> MCValue:
        n = self.n
        r = self.swf / self.sw
        # mean of (w (f - r))^2, expanded
        m2 = (self.swwff - 2.0 * r * self.swwf + r * r * self.sww) / n
        wbar = self.sw / n
        return MCValue(r, math.sqrt(max(m2, 0.0) / n) / wbar, n)
