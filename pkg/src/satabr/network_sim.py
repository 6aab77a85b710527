"""Bandwidth trace playback with embedded outages.

Bandwidth is a step function of the sample times; the last sample holds
forever.  Each outage is extended by ``reestablish_delay_s`` of dead time
(the application-layer reconnect observed after short outages), and
overlapping extended intervals are merged.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .outage_model import OutageEvent

__all__ = [
    "EmptyTrace",
    "StarvedForever",
    "NetworkTrace",
    "DownloadResult",
    "effective_bandwidth",
    "download_chunk",
    "synthesize_bandwidth",
    "read_bandwidth_csv",
    "write_bandwidth_csv",
]

DEFAULT_REESTABLISH_S = 2.0


class EmptyTrace(ValueError):
    pass


class StarvedForever(RuntimeError):
    """The trace ends at zero bandwidth, so a download can never finish."""


@dataclass(frozen=True)
class NetworkTrace:
    samples: tuple[tuple[float, float], ...]
    outages: tuple[OutageEvent, ...] = ()
    reestablish_delay_s: float = DEFAULT_REESTABLISH_S
    _times: list[float] = field(init=False, repr=False, compare=False)
    _rates: list[float] = field(init=False, repr=False, compare=False)
    _dead_starts: list[float] = field(init=False, repr=False, compare=False)
    _dead_ends: list[float] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        samples = tuple((float(t), float(b)) for t, b in self.samples)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "outages", tuple(sorted(self.outages)))
        if self.reestablish_delay_s < 0:
            raise ValueError("reestablish_delay_s must be >= 0")
        times = [t for t, _ in samples]
        rates = [b for _, b in samples]
        if any(b < 0 for b in rates):
            raise ValueError("bandwidth must be non-negative")
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise ValueError("sample times must be strictly increasing")
        starts: list[float] = []
        ends: list[float] = []
        for o in self.outages:
            end = o.end_s + self.reestablish_delay_s
            if starts and o.onset_s <= ends[-1]:
                ends[-1] = max(ends[-1], end)
            else:
                starts.append(o.onset_s)
                ends.append(end)
        object.__setattr__(self, "_times", times)
        object.__setattr__(self, "_rates", rates)
        object.__setattr__(self, "_dead_starts", starts)
        object.__setattr__(self, "_dead_ends", ends)

    @classmethod
    def constant(
        cls,
        kbps: float,
        outages: Sequence[OutageEvent] = (),
        reestablish_delay_s: float = DEFAULT_REESTABLISH_S,
    ) -> "NetworkTrace":
        return cls(((0.0, kbps),), tuple(outages), reestablish_delay_s)

    @property
    def dead_intervals(self) -> list[tuple[float, float]]:
        """Merged ``[start, end)`` intervals of zero connectivity."""
        return list(zip(self._dead_starts, self._dead_ends))

    def dead_interval_at(self, t: float) -> tuple[float, float] | None:
        j = bisect_right(self._dead_starts, t) - 1
        if j >= 0 and t < self._dead_ends[j]:
            return self._dead_starts[j], self._dead_ends[j]
        return None

    def _rate_at(self, t: float) -> tuple[float, float]:
        """Step value at ``t`` and the time of the next sample change."""
        i = bisect_right(self._times, t) - 1
        nxt = self._times[i + 1] if i + 1 < len(self._times) else math.inf
        return self._rates[max(i, 0)], nxt


@dataclass(frozen=True)
class DownloadResult:
    finish_t_s: float
    avg_throughput_kbps: float
    stalled_by_outage: bool


def effective_bandwidth(trace: NetworkTrace, t: float) -> float:
    if not trace.samples:
        raise EmptyTrace("trace has no bandwidth samples")
    if trace.dead_interval_at(t) is not None:
        return 0.0
    return trace._rate_at(t)[0]


def download_chunk(trace: NetworkTrace, start_t: float, size_kbits: float) -> DownloadResult:
    """Integrate the effective bandwidth from ``start_t`` until ``size_kbits`` arrive."""
    if not trace.samples:
        raise EmptyTrace("trace has no bandwidth samples")
    if not size_kbits > 0:
        raise ValueError("size_kbits must be positive")
    starts, ends = trace._dead_starts, trace._dead_ends
    t = float(start_t)
    remaining = float(size_kbits)
    hit_outage = False
    while True:
        j = bisect_right(starts, t) - 1
        if j >= 0 and t < ends[j]:
            hit_outage = True
            t = ends[j]
            continue
        rate, next_sample = trace._rate_at(t)
        next_dead = starts[j + 1] if j + 1 < len(starts) else math.inf
        seg_end = min(next_sample, next_dead)
        if rate > 0.0 and remaining <= rate * (seg_end - t):
            t += remaining / rate
            break
        if math.isinf(seg_end):
            raise StarvedForever(f"bandwidth is zero from t={t} onwards")
        remaining -= rate * (seg_end - t)
        t = seg_end
    elapsed = t - start_t
    return DownloadResult(t, size_kbits / elapsed, hit_outage)


def synthesize_bandwidth(
    duration_s: float,
    rng: np.random.Generator,
    median_kbps: float = 60_000.0,
    sigma: float = 0.5,
    interval_s: float = 5.0,
    floor_kbps: float = 2_000.0,
) -> list[tuple[float, float]]:
    """Piecewise-constant log-normal bandwidth, redrawn every ``interval_s``."""
    n = int(math.ceil(duration_s / interval_s)) + 1
    draws = median_kbps * np.exp(sigma * rng.standard_normal(n))
    draws = np.maximum(draws, floor_kbps)
    return [(i * interval_s, round(float(b), 3)) for i, b in enumerate(draws)]


def read_bandwidth_csv(path: str | Path) -> list[tuple[float, float]]:
    with open(path, newline="") as fh:
        return [(float(r["t_s"]), float(r["bandwidth_kbps"])) for r in csv.DictReader(fh)]


def write_bandwidth_csv(path: str | Path, samples: Sequence[tuple[float, float]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_s", "bandwidth_kbps"])
        for t, b in samples:
            w.writerow([f"{t:.3f}", f"{b:.3f}"])
