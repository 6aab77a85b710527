"""Synthetic LEO handover outage traces.

Outages are modelled as two independent pieces: *occurrence*, a Bernoulli
trial at every Starlink handover slot (seconds 12, 27, 42 and 57 of each
minute) whose firing probability is modulated by hour of day, and
*duration*, a Normal Inverse Gaussian (NIG) law.

NIG parameters follow the (alpha, beta, mu, delta) convention, spelled
``tail``, ``asym``, ``loc`` and ``scale`` here.  A draw is the normal
variance-mean mixture ``loc + asym * W + sqrt(W) * Z`` with
``W ~ IG(scale / gamma, scale**2)`` and ``gamma = sqrt(tail**2 - asym**2)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate, optimize, special

__all__ = [
    "NigParams",
    "OccurrenceParams",
    "OutageEvent",
    "NonConvergence",
    "EmptyBins",
    "DEFAULT_NIG",
    "DEFAULT_P_SLOT",
    "DEFAULT_DIURNAL",
    "DEFAULT_OCCURRENCE",
    "DURATION_QUANTILE_TARGETS",
    "sample_inverse_gaussian",
    "sample_outage_duration",
    "sample_outage_durations",
    "nig_pdf",
    "nig_cdf",
    "calibrate_nig",
    "evaluate_fit_sse",
    "sample_occurrences",
    "synthesize_outage_trace",
    "read_outage_csv",
    "write_outage_csv",
    "read_targets_csv",
]


class NonConvergence(RuntimeError):
    """Calibration could not bring the quantile residual under tolerance."""


class EmptyBins(ValueError):
    """A histogram specification with no usable width."""


@dataclass(frozen=True)
class NigParams:
    tail: float
    asym: float
    loc: float
    scale: float

    def __post_init__(self) -> None:
        if not (self.tail > 0 and self.scale > 0 and abs(self.asym) < self.tail):
            raise ValueError(f"invalid NIG parameters: {self}")

    @property
    def gamma(self) -> float:
        return math.sqrt(self.tail * self.tail - self.asym * self.asym)

    @property
    def mean(self) -> float:
        return self.loc + self.scale * self.asym / self.gamma

    @property
    def variance(self) -> float:
        return self.scale * self.tail**2 / self.gamma**3


# Hour-of-day shape: flat overnight and through the working day, a ramp from
# 15:00, a 2.5x peak at 20:00 and a decay back to baseline by 01:00.  The raw
# shape is rescaled to mean 1 so p_slot keeps its per-hour meaning on average.
_DIURNAL_SHAPE = (
    1.3, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0,
    1.0, 1.0, 1.0, 1.3, 1.6, 1.9, 2.2, 2.35, 2.5, 2.2, 1.9, 1.6,
)
DEFAULT_DIURNAL: tuple[float, ...] = tuple(
    v * 24.0 / sum(_DIURNAL_SHAPE) for v in _DIURNAL_SHAPE
)

# 240 slots per hour; 1 - (1 - p)**240 = 0.8
DEFAULT_P_SLOT = 1.0 - 0.2 ** (1.0 / 240.0)

HANDOVER_OFFSETS_S = (12.0, 27.0, 42.0, 57.0)


@dataclass(frozen=True)
class OccurrenceParams:
    p_slot: float = DEFAULT_P_SLOT
    slot_offsets_s: tuple[float, ...] = HANDOVER_OFFSETS_S
    diurnal_table: tuple[float, ...] = DEFAULT_DIURNAL

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_slot <= 1.0:
            raise ValueError(f"p_slot must be in [0, 1], got {self.p_slot}")
        offs = self.slot_offsets_s
        if not offs or any(not 0.0 <= o < 60.0 for o in offs):
            raise ValueError("slot offsets must lie in [0, 60)")
        if any(b <= a for a, b in zip(offs, offs[1:])):
            raise ValueError("slot offsets must be strictly increasing")
        table = self.diurnal_table
        if len(table) != 24 or any(v < 0 for v in table):
            raise ValueError("diurnal_table needs 24 non-negative entries")
        if abs(sum(table) / 24.0 - 1.0) > 1e-9:
            raise ValueError("diurnal_table must average 1.0")

    @classmethod
    def flat(cls, p_slot: float = DEFAULT_P_SLOT) -> "OccurrenceParams":
        return cls(p_slot=p_slot, diurnal_table=(1.0,) * 24)


@dataclass(frozen=True, order=True)
class OutageEvent:
    onset_s: float
    duration_s: float = field(compare=False)

    def __post_init__(self) -> None:
        if self.onset_s < 0 or not self.duration_s > 0:
            raise ValueError(f"invalid outage {self}")

    @property
    def end_s(self) -> float:
        return self.onset_s + self.duration_s


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample_inverse_gaussian(mean, shape, rng: np.random.Generator, size=None):
    """Inverse-Gaussian draw(s) by the Michael-Schucany-Haas transformation.

    A chi-square(1) variate ``y = z**2`` gives the smaller root of the
    quadratic; a uniform decides between that root and ``mean**2 / root``.
    Returns a float when ``size`` is None, else an array.
    """
    if not (mean > 0 and shape > 0):
        raise ValueError("inverse Gaussian needs mean > 0 and shape > 0")
    z = rng.standard_normal(size)
    u = rng.random(size)
    y = z * z
    my = mean * y
    root = mean + mean * my / (2.0 * shape) - mean / (2.0 * shape) * np.sqrt(
        4.0 * shape * my + my * my
    )
    # root can underflow to 0 for huge y; the other root then dominates anyway
    root = np.maximum(root, np.finfo(float).tiny)
    x = np.where(u <= mean / (mean + root), root, mean * mean / root)
    return float(x) if size is None else x


def _nig_raw(params: NigParams, rng: np.random.Generator, n: int) -> np.ndarray:
    w = sample_inverse_gaussian(params.scale / params.gamma, params.scale**2, rng, size=n)
    z = rng.standard_normal(n)
    return params.loc + params.asym * w + np.sqrt(w) * z


def sample_outage_durations(params: NigParams, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` NIG draws, non-positive values redrawn until all are > 0."""
    out = _nig_raw(params, rng, n)
    bad = np.flatnonzero(out <= 0.0)
    while bad.size:
        out[bad] = _nig_raw(params, rng, bad.size)
        bad = bad[out[bad] <= 0.0]
    return out


def sample_outage_duration(params: NigParams, rng: np.random.Generator) -> float:
    while True:
        x = float(_nig_raw(params, rng, 1)[0])
        if x > 0.0:
            return x


# ---------------------------------------------------------------------------
# Density, CDF, calibration, goodness of fit
# ---------------------------------------------------------------------------

def nig_pdf(x, params: NigParams):
    a, b, mu, d = params.tail, params.asym, params.loc, params.scale
    dx = np.asarray(x, dtype=float) - mu
    s = np.sqrt(d * d + dx * dx)
    # k1e(z) = K1(z) * exp(z) keeps the exponent bounded in the tails
    log_rest = d * params.gamma + b * dx - a * s
    return a * d * special.k1e(a * s) / (np.pi * s) * np.exp(log_rest)


def nig_cdf(x: float, params: NigParams, positive: bool = False) -> float:
    """CDF by adaptive quadrature of :func:`nig_pdf`.

    The integral is split at ``loc`` so the peak is never straddled by one
    infinite-range panel.  With ``positive=True`` this is the CDF of the law
    conditioned on ``X > 0``, which is what the duration sampler draws from.
    """
    if positive:
        f0 = nig_cdf(0.0, params)
        if x <= 0.0:
            return 0.0
        return (nig_cdf(x, params) - f0) / (1.0 - f0)
    f = lambda t: float(nig_pdf(t, params))  # noqa: E731
    mu = params.loc
    if x <= mu:
        val, _ = integrate.quad(f, -np.inf, x, limit=200)
        return min(max(val, 0.0), 1.0)
    upper, _ = integrate.quad(f, x, np.inf, limit=200)
    return min(max(1.0 - upper, 0.0), 1.0)


# Measured anchors: 87.33 % below 2 s and 2.73 % above 5 s.  The 0.5 s anchor
# is ours and only pins down the body of the distribution.
DURATION_QUANTILE_TARGETS: tuple[tuple[float, float], ...] = (
    (0.5, 0.35),
    (2.0, 0.8733),
    (5.0, 0.9727),
)


def _unpack(theta: np.ndarray) -> NigParams:
    tail = math.exp(theta[0])
    asym = tail * math.tanh(theta[1])
    return NigParams(tail=tail, asym=asym, loc=float(theta[2]), scale=math.exp(theta[3]))


def _pack(p: NigParams) -> np.ndarray:
    return np.array([math.log(p.tail), math.atanh(p.asym / p.tail), p.loc, math.log(p.scale)])


# Four parameters against three anchors leave one direction free; this start
# lands on a fit with ~4 % of raw mass below zero.
_CALIBRATION_START = NigParams(tail=1.5, asym=1.3, loc=0.6, scale=0.2)


def calibrate_nig(
    quantile_targets: Sequence[tuple[float, float]],
    start: NigParams | None = None,
    tol: float = 1e-3,
    max_iter: int = 4000,
    positive: bool = True,
) -> tuple[NigParams, float]:
    """Fit NIG parameters to ``(value_s, cumulative_prob)`` targets.

    Minimizes the sum of squared CDF mismatches with Nelder-Mead over an
    unconstrained reparametrization.  By default the CDF is the one
    conditioned on ``X > 0`` since durations are redrawn until positive.
    Returns ``(params, residual)`` where residual is the root of the summed
    squares.  Raises :class:`NonConvergence` when it stays above ``tol``.
    """
    targets = sorted((float(v), float(p)) for v, p in quantile_targets)
    if len(targets) < 3:
        raise ValueError("need at least 3 quantile targets")
    probs = [p for _, p in targets]
    if any(not 0.0 < p < 1.0 for p in probs):
        raise ValueError("cumulative probabilities must lie in (0, 1)")
    if len({v for v, _ in targets}) != len(targets):
        raise ValueError("duplicate target values")

    def loss(theta: np.ndarray) -> float:
        try:
            params = _unpack(theta)
        except (ValueError, OverflowError):
            return 1e6
        if not math.isfinite(params.gamma) or params.gamma <= 0:
            return 1e6
        return sum((nig_cdf(v, params, positive) - p) ** 2 for v, p in targets)

    x0 = _pack(start or _CALIBRATION_START)
    res = optimize.minimize(
        loss,
        x0,
        method="Nelder-Mead",
        options={"maxiter": max_iter, "xatol": 1e-8, "fatol": 1e-12},
    )
    params = _unpack(res.x)
    residual = math.sqrt(loss(res.x))
    if residual > tol:
        raise NonConvergence(f"quantile residual {residual:.3g} > {tol:g} ({params})")
    return params, residual


def evaluate_fit_sse(
    samples: Sequence[float],
    params: NigParams,
    bins: int | Sequence[float] = 50,
    range_s: tuple[float, float] | None = None,
) -> float:
    """Sum over bins of (empirical density - NIG density at bin centre)**2.

    ``bins`` is either a bin count (with ``range_s``, defaulting to the
    sample range) or explicit edges.  Both densities are normalized to unit
    mass over the binned range.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 100:
        raise ValueError("need at least 100 samples")
    if np.isscalar(bins):
        if int(bins) < 1:
            raise EmptyBins("bin count must be positive")
        lo, hi = range_s if range_s is not None else (float(x.min()), float(x.max()))
        if not hi > lo:
            raise EmptyBins(f"degenerate bin range [{lo}, {hi}]")
        edges = np.linspace(lo, hi, int(bins) + 1)
    else:
        edges = np.asarray(bins, dtype=float)
        if edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise EmptyBins("bin edges must be strictly increasing")
    widths = np.diff(edges)
    counts, _ = np.histogram(x, bins=edges)
    if counts.sum() == 0:
        raise EmptyBins("no samples fall inside the binned range")
    emp = counts / (counts.sum() * widths)
    centres = 0.5 * (edges[:-1] + edges[1:])
    model = nig_pdf(centres, params)
    model = model / np.sum(model * widths)
    return float(np.sum((emp - model) ** 2))


# ---------------------------------------------------------------------------
# Occurrence and full traces
# ---------------------------------------------------------------------------

def _slot_times(offsets: Sequence[float], horizon_s: float) -> np.ndarray:
    minutes = np.arange(int(math.ceil(horizon_s / 60.0)) + 1, dtype=float)
    t = (minutes[:, None] * 60.0 + np.asarray(offsets, dtype=float)[None, :]).ravel()
    return t[t < horizon_s]


def sample_occurrences(
    params: OccurrenceParams,
    start_hour: float,
    horizon_s: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Onset times (seconds from trace start) of handover slots that fail."""
    if not 0.0 <= start_hour < 24.0:
        raise ValueError("start_hour must be in [0, 24)")
    if horizon_s <= 0:
        return np.empty(0)
    t = _slot_times(params.slot_offsets_s, horizon_s)
    hours = np.floor(start_hour + t / 3600.0).astype(int) % 24
    prob = np.minimum(1.0, params.p_slot * np.asarray(params.diurnal_table)[hours])
    fired = rng.random(t.size) < prob
    return t[fired]


def _drop_overlaps(onsets: Iterable[float], durations: Iterable[float]) -> list[OutageEvent]:
    events: list[OutageEvent] = []
    busy_until = -math.inf
    for onset, dur in zip(onsets, durations):
        if onset < busy_until:
            continue
        events.append(OutageEvent(float(onset), float(dur)))
        busy_until = onset + dur
    return events


def synthesize_outage_trace(
    occ: OccurrenceParams,
    dur: NigParams,
    start_hour: float,
    horizon_s: float,
    rng: np.random.Generator,
) -> list[OutageEvent]:
    onsets = sample_occurrences(occ, start_hour, horizon_s, rng)
    if onsets.size == 0:
        return []
    durations = sample_outage_durations(dur, rng, onsets.size)
    return _drop_overlaps(onsets, durations)


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------

def write_outage_csv(path: str | Path, events: Sequence[OutageEvent]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["onset_s", "duration_s"])
        for e in events:
            w.writerow([f"{e.onset_s:.6f}", f"{e.duration_s:.6f}"])


def read_outage_csv(path: str | Path) -> list[OutageEvent]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    events = sorted(OutageEvent(float(r["onset_s"]), float(r["duration_s"])) for r in rows)
    for a, b in zip(events, events[1:]):
        if a.end_s > b.onset_s:
            raise ValueError(f"{path}: outages overlap at {b.onset_s}")
    return events


def read_targets_csv(path: str | Path) -> list[tuple[float, float]]:
    with open(path, newline="") as fh:
        return [(float(r["value_s"]), float(r["cum_prob"])) for r in csv.DictReader(fh)]


# Output of scripts/calibrate_nig.py for DURATION_QUANTILE_TARGETS
# (zero-conditioned CDF, residual ~1e-10).
DEFAULT_NIG = NigParams(
    tail=1.584213037444542,
    asym=1.4053079134069917,
    loc=0.3633808196760251,
    scale=0.3598710140482732,
)
DEFAULT_OCCURRENCE = OccurrenceParams()
