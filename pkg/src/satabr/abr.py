"""Classical ABR baselines behind one input record.

Every selector reads an :class:`AbrInputs`; SARA biases an algorithm only by
rescaling the buffer and/or throughput fields it consumes (see
:func:`apply_scalars`).  The ``*_indices`` functions are the array forms
used to score many candidate scalings at once; the scalar selectors wrap
them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np

from . import _kernels as _k
from .player import DEFAULT_LADDER_KBPS, QoEParams, quality_table

__all__ = [
    "EmptyHistory",
    "AbrKind",
    "AbrInputs",
    "AbrParams",
    "apply_scalars",
    "bba_select",
    "bola_select",
    "bola_v_for_top",
    "harmonic_mean",
    "mpc_throughput_estimate",
    "robust_mpc_select",
    "rate_select",
    "dynamic_mode",
    "dynamic_select",
    "select_bitrate",
    "select_indices",
    "abr_config_vector",
    "smoothness_values",
    "KIND_CODES",
    "MODE_CODES",
]


class EmptyHistory(ValueError):
    pass


class AbrKind(str, Enum):
    BBA = "bba"
    BOLA = "bola"
    RATE = "rate"
    ROBUST_MPC = "robustmpc"
    DYNAMIC = "dynamic"

    @property
    def family(self) -> str:
        if self in (AbrKind.BBA, AbrKind.BOLA):
            return "buffer"
        if self is AbrKind.RATE:
            return "throughput"
        return "hybrid"

    @property
    def uses_buffer(self) -> bool:
        return self.family != "throughput"

    @property
    def uses_throughput(self) -> bool:
        return self.family != "buffer"


KIND_CODES = {
    AbrKind.BBA: _k.BBA,
    AbrKind.BOLA: _k.BOLA,
    AbrKind.RATE: _k.RATE,
    AbrKind.ROBUST_MPC: _k.ROBUST_MPC,
    AbrKind.DYNAMIC: _k.DYNAMIC,
}


@dataclass(frozen=True)
class AbrInputs:
    """What an ABR sees at a decision point.

    ``throughput_kbps`` is the headline estimate (last measured chunk), and
    may be pre-scaled.  ``throughput_history`` is always raw; algorithms that
    derive their own estimate from it multiply by ``rate_scale``, the product
    of throughput scalars applied so far.
    """

    buffer_s: float
    throughput_kbps: float
    throughput_history: tuple[float, ...]
    prev_bitrate_kbps: float
    ladder: tuple[float, ...] = DEFAULT_LADDER_KBPS
    chunk_s: float = 0.5
    ltb_s: float = 3.0
    rate_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.buffer_s < 0:
            raise ValueError("buffer_s must be >= 0")
        if not self.throughput_history:
            raise EmptyHistory("throughput history is empty")


# Top rung chosen from 2.5 s of buffer with gamma_p = 1.4; see bola_v_for_top.
_BOLA_GAMMA_P = 1.4


def bola_v_for_top(
    buffer_top_s: float,
    gamma_p: float,
    ladder: Sequence[float] = DEFAULT_LADDER_KBPS,
    chunk_s: float = 0.5,
) -> float:
    """BOLA control weight V that moves the choice onto the top rung at ``buffer_top_s``.

    BOLA switches from rung M-1 to M where the two objectives are equal,
    i.e. at ``Q = V * (gamma_p * chunk_s + (b_M v_{M-1} - b_{M-1} v_M) / (b_M - b_{M-1}))``
    with ``Q`` the buffer in chunks.
    """
    b = [float(x) for x in ladder]
    v = [math.log(x / b[0]) for x in b]
    crossing = (b[-1] * v[-2] - b[-2] * v[-1]) / (b[-1] - b[-2])
    return (buffer_top_s / chunk_s) / (gamma_p * chunk_s + crossing)


@dataclass(frozen=True)
class AbrParams:
    bba_reservoir_s: float = 1.0
    bba_cushion_s: float = 2.0
    # 2.4999 rather than 2.5 keeps the crossing strictly below 2.5 s of buffer
    bola_v: float = bola_v_for_top(2.4999, _BOLA_GAMMA_P)
    bola_gamma_p: float = _BOLA_GAMMA_P
    rate_safety: float = 0.9
    dynamic_switch_s: float = 1.5
    mpc_horizon: int = 5
    mpc_window: int = 5

    def __post_init__(self) -> None:
        if self.bba_reservoir_s < 0 or not self.bba_cushion_s > 0:
            raise ValueError("BBA needs reservoir >= 0 and cushion > 0")
        if not (self.bola_v > 0 and self.bola_gamma_p > 0):
            raise ValueError("BOLA needs V > 0 and gamma_p > 0")
        if not 0 < self.rate_safety <= 1:
            raise ValueError("rate_safety must be in (0, 1]")
        if not self.dynamic_switch_s > 0:
            raise ValueError("dynamic_switch_s must be > 0")
        if self.mpc_horizon < 1 or self.mpc_window < 1:
            raise ValueError("MPC horizon and window must be >= 1")


def apply_scalars(inputs: AbrInputs, s_b: float, s_r: float, kind: AbrKind) -> AbrInputs:
    kind = AbrKind(kind)
    if not (0.0 <= s_b <= 1.0 and 0.0 <= s_r <= 1.0):
        raise ValueError("scalars must lie in [0, 1]")
    changes = {}
    if kind.uses_buffer and s_b != 1.0:
        changes["buffer_s"] = inputs.buffer_s * s_b
    if kind.uses_throughput and s_r != 1.0:
        changes["throughput_kbps"] = inputs.throughput_kbps * s_r
        changes["rate_scale"] = inputs.rate_scale * s_r
    return replace(inputs, **changes) if changes else inputs


# ---------------------------------------------------------------------------
# Array forms
# ---------------------------------------------------------------------------

MODE_CODES = {None: _k.MODE_NONE, "bola": _k.MODE_BOLA, "rate": _k.MODE_RATE}


def _ladder_arrays(ladder) -> tuple[np.ndarray, np.ndarray]:
    lad = np.asarray(ladder, dtype=float)
    return lad, np.log(lad / lad[0])


def abr_config_vector(params: AbrParams) -> np.ndarray:
    """Parameters in the order the compiled selectors expect."""
    return np.array(
        [
            params.bba_reservoir_s,
            params.bba_cushion_s,
            params.bola_v,
            params.bola_gamma_p,
            params.rate_safety,
            params.dynamic_switch_s,
            float(params.mpc_horizon),
        ]
    )


def _single_rule(code: int, values, ladder, chunk_s: float, cfg: np.ndarray) -> np.ndarray:
    lad, util = _ladder_arrays(ladder)
    v = np.ascontiguousarray(values, dtype=float).ravel()
    dummy = np.zeros(lad.size)
    return _k.select_batch(code, v, v, v, lad, util, dummy, dummy, 0.0, float(chunk_s), cfg, _k.MODE_NONE, 0.0, 0.0)


def bba_indices(buffers, ladder, reservoir_s, cushion_s) -> np.ndarray:
    cfg = abr_config_vector(AbrParams(bba_reservoir_s=reservoir_s, bba_cushion_s=cushion_s))
    return _single_rule(_k.BBA, buffers, ladder, 1.0, cfg)


def bola_indices(buffers, ladder, chunk_s, V, gamma_p) -> np.ndarray:
    cfg = abr_config_vector(AbrParams(bola_v=V, bola_gamma_p=gamma_p))
    return _single_rule(_k.BOLA, buffers, ladder, chunk_s, cfg)


def rate_indices(throughputs, ladder, safety) -> np.ndarray:
    cfg = abr_config_vector(AbrParams(rate_safety=safety))
    return _single_rule(_k.RATE, throughputs, ladder, 1.0, cfg)


def harmonic_mean(history: Sequence[float]) -> float:
    if len(history) == 0:
        raise EmptyHistory("harmonic mean of an empty history")
    if any(x <= 0 for x in history):
        raise ValueError("throughput samples must be positive")
    return len(history) / sum(1.0 / x for x in history)


def mpc_throughput_estimate(history: Sequence[float], window: int = 5) -> float:
    """Harmonic mean of the last ``window`` samples, discounted by the worst
    relative error that same predictor made over the last ``window`` samples."""
    hist = list(history)
    hm = harmonic_mean(hist[-window:])
    worst = 0.0
    for i in range(max(1, len(hist) - window), len(hist)):
        pred = harmonic_mean(hist[max(0, i - window) : i])
        worst = max(worst, abs(pred - hist[i]) / hist[i])
    return hm / (1.0 + worst)


def smoothness_values(inputs: AbrInputs, qoe: QoEParams) -> tuple[np.ndarray, float]:
    """Per-rung values the smoothness penalty differences, and the previous one."""
    qs = quality_table(qoe, inputs.ladder)
    if qoe.smooth_on_quality:
        return qs, float(qs[inputs.ladder.index(inputs.prev_bitrate_kbps)])
    return np.asarray(inputs.ladder, dtype=float), float(inputs.prev_bitrate_kbps)


def mpc_indices(buffers, xis, inputs: AbrInputs, qoe: QoEParams, horizon: int) -> np.ndarray:
    lad = np.asarray(inputs.ladder, dtype=float)
    svals, prev_s = smoothness_values(inputs, qoe)
    return _k.mpc_first_choice(
        np.ascontiguousarray(buffers, dtype=float),
        np.ascontiguousarray(xis, dtype=float),
        lad * inputs.chunk_s,
        quality_table(qoe, inputs.ladder),
        svals,
        prev_s,
        float(inputs.chunk_s),
        int(horizon),
        float(qoe.omega),
        float(qoe.rho),
    )


def dynamic_mode(buffer_s, switch_buffer_s: float, prev_mode: str | None = None):
    """'bola' or 'rate' for each buffer level, with 10 % hysteresis around the switch."""
    code = MODE_CODES[prev_mode]
    buf = np.asarray(buffer_s, dtype=float)
    use_bola = np.array([_k.dynamic_uses_bola(float(b), switch_buffer_s, code) for b in buf.ravel()])
    modes = np.where(use_bola, "bola", "rate").reshape(buf.shape)
    return str(modes) if modes.ndim == 0 else modes


def select_indices(
    kind: AbrKind,
    inputs: AbrInputs,
    params: AbrParams,
    qoe: QoEParams,
    buffers,
    throughputs,
    rate_scales,
    dynamic_prev: str | None = None,
) -> np.ndarray:
    """Ladder indices chosen for arrays of (possibly scaled) buffer/throughput."""
    kind = AbrKind(kind)
    lad, util = _ladder_arrays(inputs.ladder)
    bufs = np.ascontiguousarray(buffers, dtype=float)
    xis = np.ascontiguousarray(throughputs, dtype=float)
    if kind is AbrKind.ROBUST_MPC:
        est = mpc_throughput_estimate(inputs.throughput_history, params.mpc_window)
        mpc_xis = est * np.asarray(rate_scales, dtype=float)
    else:
        mpc_xis = xis
    svals, prev_s = smoothness_values(inputs, qoe)
    return _k.select_batch(
        KIND_CODES[kind],
        bufs,
        xis,
        mpc_xis,
        lad,
        util,
        quality_table(qoe, inputs.ladder),
        svals,
        prev_s,
        float(inputs.chunk_s),
        abr_config_vector(params),
        MODE_CODES[dynamic_prev],
        float(qoe.omega),
        float(qoe.rho),
    )


# ---------------------------------------------------------------------------
# Scalar selectors
# ---------------------------------------------------------------------------

def bba_select(inputs: AbrInputs, reservoir_s: float = 1.0, cushion_s: float = 2.0) -> float:
    i = bba_indices([inputs.buffer_s], inputs.ladder, reservoir_s, cushion_s)[0]
    return inputs.ladder[i]


def bola_select(inputs: AbrInputs, V: float = AbrParams.bola_v, gamma_p: float = _BOLA_GAMMA_P) -> float:
    """BOLA-BASIC.  Returns the lowest rung when no rung has a positive objective."""
    i = bola_indices([inputs.buffer_s], inputs.ladder, inputs.chunk_s, V, gamma_p)[0]
    return inputs.ladder[i]


def rate_select(inputs: AbrInputs, safety: float = 0.9) -> float:
    return inputs.ladder[rate_indices([inputs.throughput_kbps], inputs.ladder, safety)[0]]


def robust_mpc_select(
    inputs: AbrInputs,
    horizon: int = 5,
    qoe: QoEParams | None = None,
    window: int = 5,
) -> float:
    qoe = qoe or QoEParams()
    est = mpc_throughput_estimate(inputs.throughput_history, window) * inputs.rate_scale
    i = mpc_indices([inputs.buffer_s], [est], inputs, qoe, horizon)[0]
    return inputs.ladder[i]


def dynamic_select(
    inputs: AbrInputs,
    switch_buffer_s: float = 1.5,
    prev_mode: str | None = None,
    params: AbrParams | None = None,
) -> float:
    params = params or AbrParams()
    if dynamic_mode(inputs.buffer_s, switch_buffer_s, prev_mode) == "bola":
        return bola_select(inputs, params.bola_v, params.bola_gamma_p)
    return rate_select(inputs, params.rate_safety)


def select_bitrate(
    kind: AbrKind,
    inputs: AbrInputs,
    params: AbrParams,
    qoe: QoEParams,
    dynamic_prev: str | None = None,
) -> float:
    idx = select_indices(
        kind,
        inputs,
        params,
        qoe,
        [inputs.buffer_s],
        [inputs.throughput_kbps],
        [inputs.rate_scale],
        dynamic_prev,
    )[0]
    return inputs.ladder[idx]
