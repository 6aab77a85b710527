"""SARA: outage-aware scaling of ABR inputs plus playback-speed control.

Per chunk, a particle swarm searches the decision box
``s_b, s_r in [0, 1]`` and ``beta in [0.95, 1.03]``.  Every candidate is
scored by running the wrapped ABR on the scaled inputs and pricing the
resulting bitrate with the chunk QoE, where the rebuffer term is the
full-outage estimate from the buffer slack.  The session loop then feeds the
winning scalars to the ABR and plays at the winning speed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _kernels as _k
from .abr import (
    KIND_CODES,
    MODE_CODES,
    AbrInputs,
    AbrKind,
    AbrParams,
    abr_config_vector,
    apply_scalars,
    dynamic_mode,
    mpc_throughput_estimate,
    select_bitrate,
    smoothness_values,
)
from .network_sim import NetworkTrace, download_chunk
from .player import (
    SPEED_MAX,
    SPEED_MIN,
    OutagePrediction,
    PlayerState,
    QoEParams,
    Quality,
    VideoManifest,
    advance_playback,
    chunk_qoe,
    quality_table,
)
from .predictor import NullPredictor, Predictor

__all__ = [
    "ControlDecision",
    "NEUTRAL",
    "Particle",
    "PsoParams",
    "ScoreOptions",
    "PsoResult",
    "buffer_pressure_offset",
    "make_scorer",
    "candidate_scores",
    "candidate_score",
    "pso_search",
    "sara_optimize",
    "ChunkRecord",
    "SessionLog",
    "run_session",
]

LOWER = np.array([0.0, 0.0, SPEED_MIN])
UPPER = np.array([1.0, 1.0, SPEED_MAX])
MAX_PRESSURE = -0.2


def _clip(v: float, lo: float, hi: float) -> float:
    return min(max(float(v), lo), hi)


@dataclass(frozen=True)
class ControlDecision:
    s_b: float = 1.0
    s_r: float = 1.0
    beta: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "s_b", _clip(self.s_b, 0.0, 1.0))
        object.__setattr__(self, "s_r", _clip(self.s_r, 0.0, 1.0))
        object.__setattr__(self, "beta", _clip(self.beta, SPEED_MIN, SPEED_MAX))

    def as_array(self) -> np.ndarray:
        return np.array([self.s_b, self.s_r, self.beta])


NEUTRAL = ControlDecision()


@dataclass
class Particle:
    """Single-particle view of the swarm (the optimizer itself works on arrays)."""

    pos: np.ndarray
    vel: np.ndarray
    best_pos: np.ndarray
    best_score: float


@dataclass(frozen=True)
class PsoParams:
    iterations: int = 50
    particles: int = 30
    aggressiveness: float = 0.1
    w1: float = 0.7
    w2: float = 1.5
    w3: float = 1.5
    offset_on_speed: bool = False

    def __post_init__(self) -> None:
        if self.iterations < 0 or self.particles < 1:
            raise ValueError("need iterations >= 0 and particles >= 1")
        if not self.aggressiveness > 0:
            raise ValueError("aggressiveness must be > 0")
        if min(self.w1, self.w2, self.w3) < 0:
            raise ValueError("PSO weights must be >= 0")


@dataclass(frozen=True)
class ScoreOptions:
    """Knobs of the single-chunk score.

    ``latency_lookahead_chunks`` sets how far ahead the latency term projects
    ltb at the candidate speed.  ``scaled_throughput_in_theta`` chooses
    whether the chunk budget before an outage uses the scaled or the raw
    throughput.
    """

    latency_lookahead_chunks: int = 4
    scaled_throughput_in_theta: bool = True

    def __post_init__(self) -> None:
        if self.latency_lookahead_chunks < 1:
            raise ValueError("latency_lookahead_chunks must be >= 1")


def buffer_pressure_offset(C_s: float, o: OutagePrediction) -> float:
    """Negative drift added to the scalar positions when the buffer cannot
    cover the time until the outage."""
    if not o.present or C_s >= o.o_t_s:
        return 0.0
    if C_s <= 0.0:
        return MAX_PRESSURE
    return max((C_s - o.o_t_s) / C_s, MAX_PRESSURE)


def _score_args(
    state: PlayerState,
    inputs: AbrInputs,
    o: OutagePrediction,
    kind: AbrKind,
    qoe: QoEParams,
    abr_params: AbrParams,
    options: ScoreOptions,
    dynamic_prev: str | None,
) -> tuple:
    """Everything the compiled scorer needs that is fixed for one decision."""
    kind = AbrKind(kind)
    alpha = inputs.chunk_s
    ladder = np.asarray(inputs.ladder, dtype=float)
    qtab = quality_table(qoe, inputs.ladder)
    svals, _ = smoothness_values(inputs, qoe)
    # smoothness is measured from the state's previous bitrate
    if qoe.smooth_on_quality:
        prev_s = float(qtab[inputs.ladder.index(state.prev_bitrate_kbps)])
    else:
        prev_s = float(state.prev_bitrate_kbps)
    base_tab = qtab - qoe.rho * np.abs(svals - prev_s)
    mpc_est = 0.0
    if kind is AbrKind.ROBUST_MPC:
        mpc_est = mpc_throughput_estimate(inputs.throughput_history, abr_params.mpc_window)
    edge_cap = float(math.floor(o.o_t_s / alpha)) if o.present and o.o_t_s > 0 else 0.0
    ctx = np.array(
        [
            qoe.omega,
            qoe.rho,
            qoe.eta,
            qoe.iota,
            qoe.gamma_s,
            state.ltb_s,
            qoe.ltb0_s,
            options.latency_lookahead_chunks * alpha,
            state.speed,
            1.0 if o.present else 0.0,
            o.o_t_s,
            o.o_d_s,
            edge_cap,
            1.0 if options.scaled_throughput_in_theta else 0.0,
        ]
    )
    return (
        KIND_CODES[kind],
        kind.uses_buffer,
        kind.uses_throughput,
        float(inputs.buffer_s),
        float(inputs.throughput_kbps),
        float(inputs.rate_scale),
        float(mpc_est),
        ladder,
        np.log(ladder / ladder[0]),
        qtab,
        svals,
        prev_s,
        base_tab,
        float(alpha),
        abr_config_vector(abr_params),
        MODE_CODES[dynamic_prev],
        ctx,
    )


def make_scorer(
    state: PlayerState,
    inputs: AbrInputs,
    o: OutagePrediction,
    kind: AbrKind,
    qoe: QoEParams,
    abr_params: AbrParams = AbrParams(),
    options: ScoreOptions = ScoreOptions(),
    dynamic_prev: str | None = None,
):
    """Return ``f(decisions) -> scores`` for one decision point;
    ``decisions`` is an ``(n, 3)`` array of rows ``(s_b, s_r, beta)``."""
    args = _score_args(state, inputs, o, kind, qoe, abr_params, options, dynamic_prev)

    def score(decisions: np.ndarray) -> np.ndarray:
        d = np.ascontiguousarray(np.atleast_2d(np.asarray(decisions, dtype=float)))
        return _k.score_batch(d, *args)

    return score


def candidate_scores(
    decisions: np.ndarray,
    state: PlayerState,
    inputs: AbrInputs,
    o: OutagePrediction,
    kind: AbrKind,
    qoe: QoEParams,
    abr_params: AbrParams = AbrParams(),
    options: ScoreOptions = ScoreOptions(),
    dynamic_prev: str | None = None,
) -> np.ndarray:
    """Chunk QoE of each row ``(s_b, s_r, beta)`` of ``decisions``."""
    return make_scorer(state, inputs, o, kind, qoe, abr_params, options, dynamic_prev)(decisions)


def candidate_score(
    decision: ControlDecision,
    state: PlayerState,
    inputs: AbrInputs,
    o: OutagePrediction,
    kind: AbrKind,
    qoe: QoEParams,
    abr_params: AbrParams = AbrParams(),
    options: ScoreOptions = ScoreOptions(),
    dynamic_prev: str | None = None,
) -> float:
    row = decision.as_array()[None, :]
    return float(candidate_scores(row, state, inputs, o, kind, qoe, abr_params, options, dynamic_prev)[0])


@dataclass(frozen=True)
class PsoResult:
    decision: ControlDecision
    score: float
    best_history: tuple[float, ...]


def pso_search(
    state: PlayerState,
    inputs: AbrInputs,
    o: OutagePrediction,
    kind: AbrKind,
    qoe: QoEParams,
    pso: PsoParams,
    rng: np.random.Generator,
    abr_params: AbrParams = AbrParams(),
    options: ScoreOptions = ScoreOptions(),
    dynamic_prev: str | None = None,
) -> PsoResult:
    """Particle swarm over the decision box.

    All uniforms are drawn up front: one ``(R, 6)`` block for the initial
    positions and velocities, then ``(N, R, 2)`` for the per-iteration
    ``r1, r2`` pairs.  That is exactly the sequence a serial loop over
    iterations and particles would draw.
    """
    R, N = pso.particles, pso.iterations
    init = rng.random((R, 6))
    draws = rng.random((N, R, 2))
    O = buffer_pressure_offset(inputs.buffer_s, o)
    offset = np.array([O, O, O if pso.offset_on_speed else 0.0])
    args = _score_args(state, inputs, o, kind, qoe, abr_params, options, dynamic_prev)
    best, score, history = _k.pso_run(
        init, draws, LOWER, UPPER, pso.aggressiveness, pso.w1, pso.w2, pso.w3, offset, *args
    )
    return PsoResult(ControlDecision(*best), float(score), tuple(history.tolist()))


def sara_optimize(
    state: PlayerState,
    inputs: AbrInputs,
    o: OutagePrediction,
    kind: AbrKind,
    qoe: QoEParams,
    pso: PsoParams,
    rng: np.random.Generator,
    abr_params: AbrParams = AbrParams(),
    options: ScoreOptions = ScoreOptions(),
    dynamic_prev: str | None = None,
) -> ControlDecision:
    return pso_search(state, inputs, o, kind, qoe, pso, rng, abr_params, options, dynamic_prev).decision


# ---------------------------------------------------------------------------
# Session loop
# ---------------------------------------------------------------------------

CSV_COLUMNS = (
    "k",
    "wall_t_s",
    "bitrate_kbps",
    "s_b",
    "s_r",
    "beta",
    "buffer_s",
    "ltb_s",
    "rebuffer_chunk_s",
    "qoe_chunk",
)


@dataclass(frozen=True)
class ChunkRecord:
    k: int
    wall_t_s: float
    bitrate_kbps: float
    s_b: float
    s_r: float
    beta: float
    buffer_s: float
    ltb_s: float
    rebuffer_chunk_s: float
    qoe_chunk: float
    qoe_lin: float
    qoe_log: float

    def csv_row(self) -> list[str]:
        return [
            str(self.k),
            f"{self.wall_t_s:.6f}",
            f"{self.bitrate_kbps:.0f}",
            f"{self.s_b:.6f}",
            f"{self.s_r:.6f}",
            f"{self.beta:.6f}",
            f"{self.buffer_s:.6f}",
            f"{self.ltb_s:.6f}",
            f"{self.rebuffer_chunk_s:.6f}",
            f"{self.qoe_chunk:.6f}",
        ]


@dataclass
class SessionLog:
    records: list[ChunkRecord] = field(default_factory=list)
    rebuffer_total_s: float = 0.0
    stall_events: int = 0
    speed_deviation_s: float = 0.0
    wall_time_s: float = 0.0
    optimizer_calls: int = 0

    @property
    def bitrates(self) -> list[float]:
        return [r.bitrate_kbps for r in self.records]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in self.records:
                w.writerow(r.csv_row())


def run_session(
    manifest: VideoManifest,
    trace: NetworkTrace,
    kind: AbrKind,
    abr_params: AbrParams,
    predictor: Predictor | None,
    qoe: QoEParams,
    pso: PsoParams,
    rng: np.random.Generator,
    sara: bool = True,
    options: ScoreOptions = ScoreOptions(),
    initial_buffer_s: float = 2.0,
    ltb_tolerance_s: float = 0.05,
    history_len: int = 10,
    prefer_autonomy: bool = True,
) -> SessionLog:
    """Play ``manifest`` over ``trace`` live, with or without SARA.

    When nothing is forecast and latency is within ``ltb_tolerance_s`` of the
    target, SARA returns the neutral decision without searching, leaving
    the ABR fully in charge.  With ``prefer_autonomy`` the swarm's scalars
    are dropped whenever unscaled inputs score at least as well at the same
    speed.
    """
    kind = AbrKind(kind)
    predictor = predictor or NullPredictor()
    alpha = manifest.chunk_s
    ladder = manifest.ladder_kbps
    q_lin = QoEParams(**{**qoe.__dict__, "quality": Quality.LINEAR})
    q_log = QoEParams(**{**qoe.__dict__, "quality": Quality.LOG})
    if qoe.quality is Quality.LINEAR:
        q_lin = qoe
    else:
        q_log = qoe

    state = PlayerState(
        buffer_s=min(initial_buffer_s, qoe.ltb0_s),
        ltb_s=qoe.ltb0_s,
        prev_bitrate_kbps=ladder[0],
    )
    history = [ladder[0]]
    dyn_mode: str | None = None
    log = SessionLog()

    for k in range(manifest.total_chunks):
        reb_start = state.rebuffer_total_s
        speed_before = state.speed
        wait = alpha - (state.ltb_s - state.buffer_s)
        if wait > 1e-12:
            state = advance_playback(state, wait, 0.0)
            if speed_before != 1.0:
                log.speed_deviation_s += wait
        t = state.wall_clock_s

        inputs = AbrInputs(
            buffer_s=state.buffer_s,
            throughput_kbps=history[-1],
            throughput_history=tuple(history[-history_len:]),
            prev_bitrate_kbps=state.prev_bitrate_kbps,
            ladder=ladder,
            chunk_s=alpha,
            ltb_s=state.ltb_s,
        )

        decision = NEUTRAL
        if sara:
            o = predictor.predict(t)
            if o.present or state.ltb_s > qoe.ltb0_s + ltb_tolerance_s:
                res = pso_search(state, inputs, o, kind, qoe, pso, rng, abr_params, options, dyn_mode)
                decision = res.decision
                log.optimizer_calls += 1
                if prefer_autonomy and (decision.s_b < 1.0 or decision.s_r < 1.0):
                    # scalars are only worth applying if they strictly beat the ABR's own pick
                    own = ControlDecision(1.0, 1.0, decision.beta)
                    if candidate_score(own, state, inputs, o, kind, qoe, abr_params, options, dyn_mode) >= res.score:
                        decision = own

        abr_in = inputs
        if decision.s_b < 1.0 or decision.s_r < 1.0:
            abr_in = apply_scalars(inputs, decision.s_b, decision.s_r, kind)
        bitrate = select_bitrate(kind, abr_in, abr_params, qoe, dyn_mode)
        if kind is AbrKind.DYNAMIC:
            dyn_mode = dynamic_mode(abr_in.buffer_s, abr_params.dynamic_switch_s, dyn_mode)

        state = replace(state, speed=decision.beta, prev_speed=state.speed)
        res = download_chunk(trace, t, bitrate * alpha)
        dl_time = res.finish_t_s - t
        state = advance_playback(state, dl_time, 0.0)
        state = advance_playback(state, 0.0, alpha)
        if decision.beta != 1.0:
            log.speed_deviation_s += dl_time
        history.append(res.avg_throughput_kbps)
        if len(history) > history_len:
            del history[0]

        T_k = state.rebuffer_total_s - reb_start
        args = (ladder, bitrate, state.prev_bitrate_kbps, state.speed, state.prev_speed, T_k, state.ltb_s)
        lin = chunk_qoe(q_lin, *args)
        lg = chunk_qoe(q_log, *args)
        log.records.append(
            ChunkRecord(
                k=k,
                wall_t_s=t,
                bitrate_kbps=bitrate,
                s_b=decision.s_b,
                s_r=decision.s_r,
                beta=decision.beta,
                buffer_s=state.buffer_s,
                ltb_s=state.ltb_s,
                rebuffer_chunk_s=T_k,
                qoe_chunk=lin if qoe.quality is Quality.LINEAR else lg,
                qoe_lin=lin,
                qoe_log=lg,
            )
        )
        state = replace(state, prev_bitrate_kbps=bitrate, next_chunk=k + 1)

    log.rebuffer_total_s = state.rebuffer_total_s
    log.stall_events = state.stall_events
    log.wall_time_s = state.wall_clock_s
    return log
