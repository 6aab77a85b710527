"""Live player state and the per-chunk QoE model.

All times are seconds of wall clock or of video content; bitrates are kbps.
The chunk QoE below, with its rebuffer estimate from the buffer-health
slack, is the objective the SARA optimizer maximizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np

__all__ = [
    "SPEED_MIN",
    "SPEED_MAX",
    "DEFAULT_LADDER_KBPS",
    "UnknownBitrate",
    "Quality",
    "QoEParams",
    "VideoManifest",
    "PlayerState",
    "OutagePrediction",
    "NO_OUTAGE",
    "quality",
    "quality_table",
    "max_downloadable_chunks",
    "buffer_slack",
    "buffer_health_ok",
    "rebuffer_duration",
    "latency_penalty",
    "chunk_qoe",
    "session_qoe",
    "advance_playback",
]

SPEED_MIN = 0.95
SPEED_MAX = 1.03
DEFAULT_LADDER_KBPS = (1000.0, 2500.0, 5000.0, 8000.0)


class UnknownBitrate(ValueError):
    pass


class Quality(str, Enum):
    LINEAR = "linear"
    LOG = "log"


@dataclass(frozen=True)
class QoEParams:
    """Weights of the per-chunk QoE.

    ``eta`` is on the quality scale (1.0 by default for both variants).
    ``smooth_on_quality`` selects |q(b) - q(b')| for the bitrate smoothness
    term; when False the raw kbps difference is used instead.
    """

    omega: float = 4.33
    rho: float = 1.0
    eta: float = 1.0
    iota: float = 1.0
    gamma_s: float = 2.0
    ltb0_s: float = 3.0
    quality: Quality = Quality.LINEAR
    smooth_on_quality: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "quality", Quality(self.quality))
        for name in ("omega", "rho", "eta", "iota", "gamma_s"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        if not self.ltb0_s > 0:
            raise ValueError("ltb0_s must be > 0")

    @classmethod
    def linear(cls, **kw) -> "QoEParams":
        return cls(**{"omega": 4.33, "quality": Quality.LINEAR, **kw})

    @classmethod
    def log(cls, **kw) -> "QoEParams":
        return cls(**{"omega": 2.66, "quality": Quality.LOG, **kw})


@dataclass(frozen=True)
class VideoManifest:
    ladder_kbps: tuple[float, ...] = DEFAULT_LADDER_KBPS
    chunk_s: float = 0.5
    total_chunks: int = 1200

    def __post_init__(self) -> None:
        ladder = tuple(float(b) for b in self.ladder_kbps)
        object.__setattr__(self, "ladder_kbps", ladder)
        if not ladder or ladder[0] <= 0 or any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise ValueError("ladder must be positive and strictly increasing")
        if not self.chunk_s > 0 or self.total_chunks < 1:
            raise ValueError("chunk_s must be > 0 and total_chunks >= 1")


@dataclass(frozen=True)
class OutagePrediction:
    present: bool = False
    o_t_s: float = 0.0
    o_d_s: float = 0.0

    def __post_init__(self) -> None:
        if self.present and (self.o_t_s < 0 or not self.o_d_s > 0):
            raise ValueError(f"invalid prediction {self}")


NO_OUTAGE = OutagePrediction()


@dataclass(frozen=True)
class PlayerState:
    buffer_s: float
    ltb_s: float
    speed: float = 1.0
    prev_speed: float = 1.0
    prev_bitrate_kbps: float = DEFAULT_LADDER_KBPS[0]
    rebuffer_total_s: float = 0.0
    wall_clock_s: float = 0.0
    next_chunk: int = 0
    stalled: bool = False
    stall_events: int = 0

    def __post_init__(self) -> None:
        if self.buffer_s < 0:
            raise ValueError("buffer_s must be >= 0")
        if not SPEED_MIN - 1e-12 <= self.speed <= SPEED_MAX + 1e-12:
            raise ValueError(f"speed {self.speed} outside [{SPEED_MIN}, {SPEED_MAX}]")
        if self.ltb_s < self.buffer_s - 1e-9:
            raise ValueError("buffer cannot extend past the live edge")


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------

def quality(params: QoEParams, ladder: Sequence[float], bitrate_kbps: float) -> float:
    if bitrate_kbps not in ladder:
        raise UnknownBitrate(f"{bitrate_kbps} kbps is not on the ladder {tuple(ladder)}")
    if params.quality is Quality.LINEAR:
        return bitrate_kbps / 1000.0
    return math.log(bitrate_kbps / min(ladder))


def quality_table(params: QoEParams, ladder: Sequence[float]) -> np.ndarray:
    """q(b) for every ladder rung, in ladder order."""
    return np.array([quality(params, ladder, b) for b in ladder])


def max_downloadable_chunks(xi_kbps: float, o_t_s: float, bitrate_kbps: float, alpha_s: float) -> int:
    """Whole chunks that can finish before an outage ``o_t_s`` away.

    Bounded both by throughput and by what the broadcaster produces.
    """
    if o_t_s <= 0:
        return 0
    by_rate = math.floor(xi_kbps * o_t_s / (bitrate_kbps * alpha_s))
    by_edge = math.floor(o_t_s / alpha_s)
    return max(0, min(by_rate, by_edge))


def buffer_slack(C_s, theta, alpha_s, beta, o: OutagePrediction, gamma_s):
    """Playable content left after the outage, minus the safety buffer."""
    return (C_s + theta * alpha_s) / beta - o.o_t_s - o.o_d_s - gamma_s


def buffer_health_ok(C_s, theta, alpha_s, beta, o: OutagePrediction, gamma_s) -> bool:
    if not o.present:
        return True
    return bool(buffer_slack(C_s, theta, alpha_s, beta, o, gamma_s) >= 0.0)


def rebuffer_duration(C_s, theta, alpha_s, beta, o: OutagePrediction, gamma_s) -> float:
    if not o.present:
        return 0.0
    return max(-buffer_slack(C_s, theta, alpha_s, beta, o, gamma_s), 0.0)


def latency_penalty(ltb_s: float, ltb0_s: float) -> float:
    return max(ltb_s - ltb0_s, 0.0)


def chunk_qoe(
    params: QoEParams,
    ladder: Sequence[float],
    b_k: float,
    b_prev: float,
    beta_k: float,
    beta_prev: float,
    T_k: float,
    ltb_k: float,
) -> float:
    q = quality(params, ladder, b_k)
    if params.smooth_on_quality:
        smooth = abs(q - quality(params, ladder, b_prev))
    else:
        smooth = abs(b_k - b_prev)
    return (
        q
        - params.omega * T_k
        - params.rho * smooth
        - params.eta * abs(beta_k - beta_prev)
        - params.iota * latency_penalty(ltb_k, params.ltb0_s)
    )


def session_qoe(per_chunk: Sequence[float]) -> float:
    return sum(per_chunk, 0.0)


# ---------------------------------------------------------------------------
# Playback evolution
# ---------------------------------------------------------------------------

def advance_playback(state: PlayerState, wall_dt_s: float, content_added_s: float) -> PlayerState:
    """Add content, then play (or stall) for ``wall_dt_s`` seconds.

    While content remains the buffer drains at ``speed`` and latency moves by
    ``1 - speed`` per second; once it runs dry the player stalls and both
    rebuffer time and latency grow at rate 1.
    """
    if wall_dt_s < 0 or content_added_s < 0:
        raise ValueError("wall_dt_s and content_added_s must be >= 0")
    buffer = state.buffer_s + content_added_s
    stalled = state.stalled and content_added_s == 0.0
    ltb = state.ltb_s
    rebuffer = state.rebuffer_total_s
    events = state.stall_events
    speed = state.speed

    play = 0.0
    if buffer > 0.0:
        play = min(wall_dt_s, buffer / speed)
        if play < wall_dt_s:
            buffer = 0.0
        else:
            buffer = max(buffer - speed * play, 0.0)
        ltb += (1.0 - speed) * play
    idle = wall_dt_s - play
    if idle > 0.0:
        if not stalled:
            events += 1
        stalled = True
        rebuffer += idle
        ltb += idle

    return replace(
        state,
        buffer_s=buffer,
        ltb_s=ltb,
        rebuffer_total_s=rebuffer,
        wall_clock_s=state.wall_clock_s + wall_dt_s,
        stalled=stalled,
        stall_events=events,
    )
