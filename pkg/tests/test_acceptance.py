"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line."""

import itertools
import math

import numpy as np

from satabr.abr import AbrInputs, AbrKind, AbrParams, mpc_throughput_estimate, robust_mpc_select
from satabr.cli import main
from satabr.harness import load_config, run_matrix, write_outputs
from satabr.network_sim import NetworkTrace, synthesize_bandwidth
from satabr.outage_model import DEFAULT_NIG, OccurrenceParams, OutageEvent, sample_occurrences, sample_outage_durations
from satabr.player import (
    DEFAULT_LADDER_KBPS as LADDER,
    OutagePrediction,
    PlayerState,
    QoEParams,
    VideoManifest,
    buffer_health_ok,
    chunk_qoe,
    latency_penalty,
    max_downloadable_chunks,
    quality,
    rebuffer_duration,
)
from satabr.predictor import NullPredictor, OraclePredictor
from satabr.sara import (
    PsoParams,
    buffer_pressure_offset,
    candidate_score,
    candidate_scores,
    run_session,
    sara_optimize,
)

FOUR_ABRS = (AbrKind.BBA, AbrKind.BOLA, AbrKind.ROBUST_MPC, AbrKind.DYNAMIC)
QOE = QoEParams.linear()


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol


def test_criterion_1_formula_units(criterion):
    with criterion(1, "hand-evaluated formula examples", limit_s=1.0) as c:
        c.notes.append("14 examples")
        c.check("theta 6", max_downloadable_chunks(8000, 3, 2500, 0.5) == 6, show=False)
        c.check("theta 0", max_downloadable_chunks(1000, 2, 8000, 0.5) == 0, show=False)
        c.check("theta no time", max_downloadable_chunks(8000, 0, 2500, 0.5) == 0, show=False)
        o21 = OutagePrediction(True, 2.0, 1.0)
        c.check("health true", buffer_health_ok(3.5, 4, 0.5, 1.0, o21, 2.0) is True, show=False)
        c.check("health false", buffer_health_ok(2.0, 4, 0.5, 1.0, o21, 2.0) is False, show=False)
        o12 = OutagePrediction(True, 1.0, 2.0)
        c.check("T = 3", close(rebuffer_duration(1.0, 2, 0.5, 1.0, o12, 2.0), 3.0), show=False)
        c.check("T clamped", rebuffer_duration(3.5, 4, 0.5, 1.0, o21, 2.0) == 0.0, show=False)
        c.check("T slow", close(rebuffer_duration(1.0, 2, 0.5, 0.95, o12, 2.0), 5.0 - 2.0 / 0.95), show=False)
        c.check("L 1.5", close(latency_penalty(4.5, 3.0), 1.5), show=False)
        c.check("Q 3.67", close(chunk_qoe(QOE, LADDER, 8000, 8000, 1, 1, 1, 3), 8.0 - 4.33), show=False)
        c.check("Q 0", close(chunk_qoe(QOE, LADDER, 2500, 5000, 1, 1, 0, 3), 0.0), show=False)
        c.check("q log", close(quality(QoEParams.log(), LADDER, 8000), math.log(8.0)), show=False)
        c.check("O -0.2", close(buffer_pressure_offset(1.0, OutagePrediction(True, 2.0, 1.0)), -0.2), show=False)
        c.check("O -1/9", close(buffer_pressure_offset(9.0, OutagePrediction(True, 10.0, 1.0)), -1.0 / 9.0), show=False)


def test_criterion_2_distribution_fidelity(criterion):
    with criterion(2, "NIG quantiles and hourly outage probability", limit_s=30.0) as c:
        d = sample_outage_durations(DEFAULT_NIG, np.random.default_rng(2), 100_000)
        below, above = float(np.mean(d < 2.0)), float(np.mean(d > 5.0))
        c.check("P(d<2s)", abs(below - 0.8733) <= 0.02, f"{below:.4f}")
        c.check("P(d>5s)", abs(above - 0.0273) <= 0.01, f"{above:.4f}")
        rng = np.random.default_rng(3)
        occ = OccurrenceParams.flat()
        hit = np.mean([sample_occurrences(occ, 0.0, 3600.0, rng).size > 0 for _ in range(10_000)])
        c.check("P(>=1 per hour)", abs(hit - 0.80) <= 0.02, f"{hit:.4f}")


def random_state(i: int):
    r = np.random.default_rng(1000 + i)
    buf = float(r.uniform(0.0, 3.0))
    ltb = buf + float(r.uniform(0.0, 3.0))
    prev = float(r.choice(LADDER))
    hist = tuple(float(x) for x in r.uniform(1500.0, 15000.0, 6))
    state = PlayerState(buffer_s=buf, ltb_s=ltb, speed=float(r.uniform(0.95, 1.03)), prev_bitrate_kbps=prev)
    inputs = AbrInputs(buf, hist[-1], hist, prev, LADDER, 0.5, ltb)
    o = OutagePrediction(True, float(r.uniform(0.0, 10.0)), float(r.uniform(0.2, 6.0))) if r.random() < 0.7 \
        else OutagePrediction()
    return state, inputs, o, FOUR_ABRS[i % 4]


def test_criterion_3_pso_vs_grid(criterion):
    grid = np.array(list(itertools.product(np.linspace(0, 1, 21), np.linspace(0, 1, 21), np.linspace(0.95, 1.03, 17))))
    with criterion(3, "PSO within 1% of the 21x21x17 grid optimum on 20 states", limit_s=60.0) as c:
        worst = math.inf
        for i in range(20):
            state, inputs, o, kind = random_state(i)
            g = candidate_scores(grid, state, inputs, o, kind, QOE)
            d = sara_optimize(state, inputs, o, kind, QOE, PsoParams(), np.random.default_rng(i))
            s = candidate_score(d, state, inputs, o, kind, QOE)
            span = g.max() - g.min()
            worst = min(worst, (s - g.max()) / span if span > 0 else s - g.max())
            c.check(f"state {i} ({kind.value})", s >= g.max() - 0.01 * span, f"pso {s:.4f} grid {g.max():.4f}",
                    show=False)
        c.notes.append(f"worst (pso - grid max) = {worst:+.4f} of grid range")


def mpc_brute_force(buf, xi, ladder, prev, qoe, horizon, alpha=0.5):
    best, first = -math.inf, None
    qp = quality(qoe, ladder, prev)
    for seq in itertools.product(range(len(ladder)), repeat=horizon):
        b, last, total = buf, qp, 0.0
        for m in seq:
            q = quality(qoe, ladder, ladder[m])
            dt = ladder[m] * alpha / xi
            rb = max(dt - b, 0.0)
            b = max(b - dt, 0.0) + alpha
            total += q - qoe.omega * rb - qoe.rho * abs(q - last)
            last = q
        if total > best:
            best, first = total, seq[0]
    return ladder[first]


def test_criterion_4_mpc_oracle(criterion):
    with criterion(4, "RobustMPC equals brute force on 100 instances (M=3, H=3)", limit_s=10.0) as c:
        mismatches = 0
        for i in range(100):
            r = np.random.default_rng(500 + i)
            ladder = tuple(float(x) for x in sorted(r.choice(np.arange(500, 12001, 250), 3, replace=False)))
            qoe = QoEParams.linear() if i % 2 == 0 else QoEParams.log()
            hist = tuple(float(x) for x in r.uniform(200.0, 15000.0, 6))
            prev = float(r.choice(ladder))
            x = AbrInputs(float(r.uniform(0.0, 4.0)), hist[-1], hist, prev, ladder)
            want = mpc_brute_force(x.buffer_s, mpc_throughput_estimate(hist), ladder, prev, qoe, 3)
            mismatches += robust_mpc_select(x, 3, qoe) != want
        c.check("mismatches", mismatches == 0, f"{mismatches}/100")


def test_criterion_5_baseline_equivalence(criterion):
    with criterion(5, "no-outage SARA sessions match bare ABR bitrates") as c:
        rng = np.random.default_rng(5)
        traces = {
            "flat": NetworkTrace.constant(50_000.0),
            "variable": NetworkTrace(tuple(synthesize_bandwidth(700.0, rng, floor_kbps=20_000.0)), ()),
        }
        manifest = VideoManifest(total_chunks=1200)
        for (name, trace), kind in itertools.product(traces.items(), FOUR_ABRS):
            logs = [
                run_session(manifest, trace, kind, AbrParams(), NullPredictor(), QOE, PsoParams(),
                            np.random.default_rng(0), sara=sara)
                for sara in (False, True)
            ]
            at_target = all(abs(r.ltb_s - QOE.ltb0_s) <= 0.05 for log in logs for r in log.records)
            c.check(f"{name}/{kind.value} ltb at target", at_target, show=False)
            c.check(f"{name}/{kind.value} bitrates", logs[0].bitrates == logs[1].bitrates, show=False)
        c.notes.append("2 traces x 4 ABRs x 1200 chunks identical")


def test_criterion_6_constructed_outage(criterion):
    with criterion(6, "single 2-s outage absorbed by SARA+BBA (1-s reconnect)") as c:
        manifest = VideoManifest(total_chunks=240)
        for onset in (60.0, 60.2, 75.37):
            trace = NetworkTrace.constant(100_000.0, [OutageEvent(onset, 2.0)], reestablish_delay_s=1.0)
            logs = {
                sara: run_session(manifest, trace, AbrKind.BBA, AbrParams(), OraclePredictor(trace.outages),
                                  QOE, PsoParams(), np.random.default_rng(0), sara=sara)
                for sara in (False, True)
            }
            bare, wrapped = logs[False].rebuffer_total_s, logs[True].rebuffer_total_s
            c.check(f"onset {onset}", bare > 0 and wrapped == 0, f"bare {bare:.3f}s sara {wrapped:.3f}s")


ENSEMBLE = """
[experiment]
seeds = {seeds}
abrs = bba, bola, robustmpc, dynamic
predictors = oracle, noisy
output_dir = out

[manifest]
duration_s = {duration}
"""


def test_criterion_7_headline_direction(criterion, tmp_path):
    cfg_path = tmp_path / "ensemble.ini"
    cfg_path.write_text(ENSEMBLE.format(seeds=", ".join(map(str, range(50))), duration=600))
    with criterion(7, "50-seed ensemble: oracle >= 20% less rebuffering, noisy > 0", limit_s=600.0) as c:
        cfg = load_config(cfg_path)
        rows = write_outputs(cfg.output_dir, *run_matrix(cfg))
        overall = {r.predictor: r for r in rows if r.abr == "overall"}
        o, n = overall["oracle"], overall["noisy"]
        c.check("oracle rebuffer reduction", o.rebuffer_reduction_pct >= 20.0, f"{o.rebuffer_reduction_pct:.2f}%")
        c.check("oracle bitrate delta", o.bitrate_delta_pct >= -2.0, f"{o.bitrate_delta_pct:+.2f}%")
        c.check("oracle ltb delta", o.ltb_delta_pct <= 2.0, f"{o.ltb_delta_pct:+.2f}%")
        c.check("noisy rebuffer reduction", n.rebuffer_reduction_pct > 0.0, f"{n.rebuffer_reduction_pct:.2f}%")


def test_criterion_8_determinism(criterion, tmp_path):
    cfg_path = tmp_path / "det.ini"
    cfg_path.write_text(ENSEMBLE.format(seeds="0, 1, 2", duration=120))
    with criterion(8, "repeated full-matrix runs are byte-identical") as c:
        dirs = [tmp_path / "a", tmp_path / "b"]
        for d in dirs:
            assert main(["run", "--config", str(cfg_path), "--out", str(d)]) == 0
        files = [sorted(p.relative_to(d) for p in d.rglob("*") if p.is_file()) for d in dirs]
        c.check("same file set", files[0] == files[1], f"{len(files[0])} files")
        diff = [str(f) for f in files[0] if (dirs[0] / f).read_bytes() != (dirs[1] / f).read_bytes()]
        c.check("identical bytes", not diff, ", ".join(diff[:3]))
