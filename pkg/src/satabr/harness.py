"""Experiment runner over the ABR x variant x predictor x seed matrix, plus
aggregate reporting.

Random streams.  Every seed ``s`` owns independent generators built from
``SeedSequence([s, i])``:

* ``i = 0``: trace synthesis (start hour, outages, then bandwidth);
* ``i = 1``: the particle swarm, recreated fresh for every run;
* ``i = 2``: the noisy predictor, recreated fresh for every run.

Bare runs do not depend on the predictor, so one bare run per (abr, seed)
is paired with every +SARA run of that (abr, seed).
"""

from __future__ import annotations

import configparser
import csv
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .abr import AbrKind, AbrParams
from .network_sim import (
    DEFAULT_REESTABLISH_S,
    NetworkTrace,
    read_bandwidth_csv,
    synthesize_bandwidth,
    write_bandwidth_csv,
)
from .outage_model import (
    DEFAULT_NIG,
    DEFAULT_OCCURRENCE,
    DEFAULT_P_SLOT,
    NigParams,
    OccurrenceParams,
    OutageEvent,
    read_outage_csv,
    synthesize_outage_trace,
    write_outage_csv,
)
from .player import DEFAULT_LADDER_KBPS, QoEParams, Quality, VideoManifest
from .predictor import (
    DEFAULT_FALSE_ALARM_RATE,
    NoisyPredictor,
    NoisyPredictorParams,
    NullPredictor,
    OraclePredictor,
    Predictor,
)
from .sara import PsoParams, ScoreOptions, SessionLog, run_session

__all__ = [
    "ConfigError",
    "IoError",
    "UnpairedRuns",
    "CONFIG_SCHEMA",
    "ExperimentConfig",
    "load_config",
    "config_help",
    "RunSummary",
    "build_trace",
    "run_matrix",
    "summarize",
    "AggregateRow",
    "write_outputs",
    "write_summary_csv",
    "read_summary_csv",
    "write_cdf_files",
    "format_report",
    "write_synthetic_traces",
]

STREAM_TRACE, STREAM_PSO, STREAM_PREDICTOR = 0, 1, 2
OUTAGE_MARGIN_S = 300.0


class ConfigError(ValueError):
    """Invalid configuration; the message starts with ``section.key``."""


class IoError(OSError):
    """A referenced input file is missing or unreadable."""


class UnpairedRuns(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config schema
# ---------------------------------------------------------------------------

def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in _strs(text))


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in _strs(text))


def _strs(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.replace("\n", ",").split(",") if x.strip())


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class Key:
    name: str
    parse: Callable[[str], Any]
    default: str
    doc: str


_N = DEFAULT_NIG
CONFIG_SCHEMA: dict[str, tuple[Key, ...]] = {
    "experiment": (
        Key("seeds", _ints, "0", "comma-separated integer seeds"),
        Key("output_dir", str, "out", "output directory (relative to the config file)"),
        Key("abrs", _strs, "bba, bola, robustmpc, dynamic", "ABRs: bba, bola, rate, robustmpc, dynamic"),
        Key("variants", _strs, "bare, sara", "variants to run: bare and/or sara"),
        Key("predictors", _strs, "oracle", "predictors for +SARA runs: oracle, noisy, none"),
    ),
    "manifest": (
        Key("ladder_kbps", _floats, ", ".join(f"{b:g}" for b in DEFAULT_LADDER_KBPS), "bitrate ladder"),
        Key("chunk_s", float, "0.5", "chunk duration alpha"),
        Key("duration_s", float, "600", "video duration per session"),
    ),
    "trace": (
        Key("bandwidth_files", _strs, "", "bandwidth CSVs (t_s,bandwidth_kbps), cycled over seeds; empty = synthetic"),
        Key("bandwidth_median_kbps", float, "60000", "synthetic bandwidth: log-normal median"),
        Key("bandwidth_sigma", float, "0.5", "synthetic bandwidth: log-normal sigma"),
        Key("bandwidth_interval_s", float, "5", "synthetic bandwidth: resampling interval"),
        Key("bandwidth_floor_kbps", float, "2000", "synthetic bandwidth: lower clamp"),
        Key("outages", str, "synth", "outage source: synth, files or none"),
        Key("outage_files", _strs, "", "outage CSVs (onset_s,duration_s), cycled over seeds"),
        Key("diurnal", str, "peaked", "hourly intensity table: peaked (evening peak) or flat"),
        Key("p_slot", float, repr(DEFAULT_P_SLOT), "failure probability per handover slot"),
        Key("start_hour", str, "random", "local hour at session start, or 'random' (drawn per seed)"),
        Key("reestablish_delay_s", float, str(DEFAULT_REESTABLISH_S), "dead time added after each outage"),
        Key("nig_tail", float, repr(_N.tail), "NIG alpha"),
        Key("nig_asym", float, repr(_N.asym), "NIG beta"),
        Key("nig_loc", float, repr(_N.loc), "NIG mu"),
        Key("nig_scale", float, repr(_N.scale), "NIG delta"),
    ),
    "qoe": (
        Key("variant", str, "linear", "quality function: linear or log"),
        Key("omega", str, "auto", "rebuffer weight; auto = 4.33 (linear) or 2.66 (log)"),
        Key("rho", float, "1", "bitrate smoothness weight"),
        Key("eta", float, "1", "speed smoothness weight"),
        Key("iota", float, "1", "latency weight"),
        Key("gamma_s", float, "2", "safety buffer"),
        Key("ltb0_s", float, "3", "target latency to broadcaster"),
        Key("smoothness", str, "quality", "smoothness on quality or bitrate"),
    ),
    "abr": (
        Key("bba_reservoir_s", float, "1", "BBA reservoir"),
        Key("bba_cushion_s", float, "2", "BBA cushion"),
        Key("bola_v", float, repr(AbrParams().bola_v), "BOLA control weight V"),
        Key("bola_gamma_p", float, repr(AbrParams().bola_gamma_p), "BOLA gamma_p"),
        Key("rate_safety", float, "0.9", "throughput rule safety factor"),
        Key("dynamic_switch_s", float, "1.5", "Dynamic buffer switch point"),
        Key("mpc_horizon", int, "5", "RobustMPC lookahead chunks"),
        Key("mpc_window", int, "5", "RobustMPC throughput window"),
    ),
    "sara": (
        Key("iterations", int, "50", "PSO iterations N"),
        Key("particles", int, "30", "PSO particles R"),
        Key("aggressiveness", float, "0.1", "PSO initial velocity scale A"),
        Key("w1", float, "0.7", "PSO inertia weight"),
        Key("w2", float, "1.5", "PSO personal-best weight"),
        Key("w3", float, "1.5", "PSO global-best weight"),
        Key("offset_on_speed", _bool, "false", "also add the pressure offset O to the speed update"),
        Key("latency_lookahead_chunks", int, "4", "chunks ahead used to project latency at the candidate speed"),
        Key("scaled_throughput_in_theta", _bool, "true", "chunk budget before an outage uses scaled throughput"),
        Key("ltb_tolerance_s", float, "0.05", "latency slack before SARA engages without a forecast"),
        Key("prefer_autonomy", _bool, "true", "drop scalars that do not strictly improve the score"),
        Key("initial_buffer_s", float, "2", "buffer at session start"),
    ),
    "predictor": (
        Key("horizon_s", float, "120", "forecast horizon"),
        Key("cadence_s", float, "5", "noisy predictor refresh period"),
        Key("recall", float, "0.3823", "noisy predictor per-outage recall"),
        Key("window_accuracy_target", float, "0.7943", "accuracy the false-alarm rate was tuned for"),
        Key("false_alarm_rate_per_s", float, repr(DEFAULT_FALSE_ALARM_RATE), "noisy predictor false alarms"),
        Key("onset_noise_std_s", float, "1", "noisy predictor onset error std"),
        Key("duration_noise_std_s", float, "0.5", "noisy predictor duration error std"),
    ),
}


def config_help() -> str:
    lines = ["Config keys (INI sections; defaults in brackets):"]
    for section, keys in CONFIG_SCHEMA.items():
        lines.append(f"  [{section}]")
        for k in keys:
            lines.append(f"    {k.name} [{k.default}]: {k.doc}")
    return "\n".join(lines)


@dataclass(frozen=True)
class ExperimentConfig:
    manifest: VideoManifest = field(default_factory=VideoManifest)
    seeds: tuple[int, ...] = (0,)
    abrs: tuple[AbrKind, ...] = (AbrKind.BBA, AbrKind.BOLA, AbrKind.ROBUST_MPC, AbrKind.DYNAMIC)
    variants: tuple[str, ...] = ("bare", "sara")
    predictors: tuple[str, ...] = ("oracle",)
    output_dir: Path = Path("out")
    bandwidth_files: tuple[Path, ...] = ()
    bandwidth_median_kbps: float = 60_000.0
    bandwidth_sigma: float = 0.5
    bandwidth_interval_s: float = 5.0
    bandwidth_floor_kbps: float = 2_000.0
    outage_source: str = "synth"
    outage_files: tuple[Path, ...] = ()
    occurrence: OccurrenceParams = DEFAULT_OCCURRENCE
    durations: NigParams = DEFAULT_NIG
    start_hour: float | None = None
    reestablish_delay_s: float = DEFAULT_REESTABLISH_S
    qoe: QoEParams = field(default_factory=QoEParams)
    abr: AbrParams = field(default_factory=AbrParams)
    pso: PsoParams = field(default_factory=PsoParams)
    score: ScoreOptions = field(default_factory=ScoreOptions)
    ltb_tolerance_s: float = 0.05
    prefer_autonomy: bool = True
    initial_buffer_s: float = 2.0
    noisy: NoisyPredictorParams = field(default_factory=NoisyPredictorParams)

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ConfigError("experiment.seeds: at least one seed is required")
        if not self.abrs:
            raise ConfigError("experiment.abrs: at least one ABR is required")
        bad = set(self.variants) - {"bare", "sara"}
        if bad or not self.variants:
            raise ConfigError(f"experiment.variants: expected bare and/or sara, got {self.variants}")
        bad = set(self.predictors) - {"oracle", "noisy", "none"}
        if bad or not self.predictors:
            raise ConfigError(f"experiment.predictors: unknown {sorted(bad) or 'empty list'}")
        if self.outage_source not in ("synth", "files", "none"):
            raise ConfigError(f"trace.outages: expected synth, files or none, got {self.outage_source!r}")
        if self.outage_source == "files" and not self.outage_files:
            raise ConfigError("trace.outage_files: required when trace.outages = files")
        for key, paths in (("trace.bandwidth_files", self.bandwidth_files), ("trace.outage_files", self.outage_files)):
            for p in paths:
                if not Path(p).is_file():
                    raise ConfigError(f"{key}: file not found: {p}")
        if self.start_hour is not None and not 0 <= self.start_hour < 24:
            raise ConfigError("trace.start_hour: must be in [0, 24) or 'random'")


def _section_values(parser: configparser.ConfigParser, section: str) -> dict[str, Any]:
    known = {k.name: k for k in CONFIG_SCHEMA[section]}
    raw = dict(parser[section]) if parser.has_section(section) else {}
    unknown = set(raw) - set(known)
    if unknown:
        raise ConfigError(f"{section}.{sorted(unknown)[0]}: unknown key")
    out = {}
    for name, key in known.items():
        text = raw.get(name, key.default)
        try:
            out[name] = key.parse(text)
        except ValueError as exc:
            raise ConfigError(f"{section}.{name}: {exc}") from None
    return out


def _wrap(path: str, build: Callable[[], Any]) -> Any:
    try:
        return build()
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_config(path: str | Path, output_dir: str | Path | None = None) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise IoError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.read(path)
    unknown = set(parser.sections()) - set(CONFIG_SCHEMA)
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown section")
    v = {s: _section_values(parser, s) for s in CONFIG_SCHEMA}
    base = path.parent

    def rel(p: str | Path) -> Path:
        p = Path(p)
        return p if p.is_absolute() else base / p

    ex, man, tr, q, a, s, pr = (v[k] for k in ("experiment", "manifest", "trace", "qoe", "abr", "sara", "predictor"))
    manifest = _wrap(
        "manifest",
        lambda: VideoManifest(man["ladder_kbps"], man["chunk_s"], max(1, round(man["duration_s"] / man["chunk_s"]))),
    )
    abrs = _wrap("experiment.abrs", lambda: tuple(AbrKind(x) for x in ex["abrs"]))
    if tr["diurnal"] not in ("peaked", "flat"):
        raise ConfigError("trace.diurnal: expected peaked or flat")
    occurrence = _wrap(
        "trace.p_slot",
        lambda: OccurrenceParams(
            p_slot=tr["p_slot"],
            diurnal_table=DEFAULT_OCCURRENCE.diurnal_table if tr["diurnal"] == "peaked" else (1.0,) * 24,
        ),
    )
    durations = _wrap("trace.nig", lambda: NigParams(tr["nig_tail"], tr["nig_asym"], tr["nig_loc"], tr["nig_scale"]))
    start = tr["start_hour"].strip().lower()
    start_hour = None if start == "random" else _wrap("trace.start_hour", lambda: float(start))

    variant = _wrap("qoe.variant", lambda: Quality(q["variant"]))
    qkw = {k: q[k] for k in ("rho", "eta", "iota", "gamma_s", "ltb0_s")}
    if q["omega"].strip().lower() != "auto":
        qkw["omega"] = _wrap("qoe.omega", lambda: float(q["omega"]))
    if q["smoothness"] not in ("quality", "bitrate"):
        raise ConfigError("qoe.smoothness: expected quality or bitrate")
    qkw["smooth_on_quality"] = q["smoothness"] == "quality"
    qoe = _wrap("qoe", lambda: QoEParams.linear(**qkw) if variant is Quality.LINEAR else QoEParams.log(**qkw))

    abr = _wrap("abr", lambda: AbrParams(**a))
    pso = _wrap("sara", lambda: PsoParams(**{k: s[k] for k in ("iterations", "particles", "aggressiveness",
                                                                 "w1", "w2", "w3", "offset_on_speed")}))
    score = _wrap("sara", lambda: ScoreOptions(s["latency_lookahead_chunks"], s["scaled_throughput_in_theta"]))
    noisy = _wrap("predictor", lambda: NoisyPredictorParams(**pr))

    return ExperimentConfig(
        manifest=manifest,
        seeds=ex["seeds"],
        abrs=abrs,
        variants=ex["variants"],
        predictors=ex["predictors"],
        output_dir=Path(output_dir) if output_dir is not None else rel(ex["output_dir"]),
        bandwidth_files=tuple(rel(p) for p in tr["bandwidth_files"]),
        bandwidth_median_kbps=tr["bandwidth_median_kbps"],
        bandwidth_sigma=tr["bandwidth_sigma"],
        bandwidth_interval_s=tr["bandwidth_interval_s"],
        bandwidth_floor_kbps=tr["bandwidth_floor_kbps"],
        outage_source=tr["outages"],
        outage_files=tuple(rel(p) for p in tr["outage_files"]),
        occurrence=occurrence,
        durations=durations,
        start_hour=start_hour,
        reestablish_delay_s=tr["reestablish_delay_s"],
        qoe=qoe,
        abr=abr,
        pso=pso,
        score=score,
        ltb_tolerance_s=s["ltb_tolerance_s"],
        prefer_autonomy=s["prefer_autonomy"],
        initial_buffer_s=s["initial_buffer_s"],
        noisy=noisy,
    )


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------

def _stream(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def build_trace(cfg: ExperimentConfig, seed: int, seed_index: int = 0) -> NetworkTrace:
    """Bandwidth plus outages for one seed (deterministic in the seed)."""
    rng = _stream(seed, STREAM_TRACE)
    horizon = cfg.manifest.total_chunks * cfg.manifest.chunk_s + OUTAGE_MARGIN_S
    hour = cfg.start_hour if cfg.start_hour is not None else float(rng.integers(24))
    outages: list[OutageEvent] = []
    if cfg.outage_source == "synth":
        outages = synthesize_outage_trace(cfg.occurrence, cfg.durations, hour, horizon, rng)
    elif cfg.outage_source == "files":
        p = cfg.outage_files[seed_index % len(cfg.outage_files)]
        try:
            outages = read_outage_csv(p)
        except (OSError, KeyError, ValueError) as exc:
            raise IoError(f"{p}: {exc}") from None
    if cfg.bandwidth_files:
        p = cfg.bandwidth_files[seed_index % len(cfg.bandwidth_files)]
        try:
            samples = read_bandwidth_csv(p)
        except (OSError, KeyError, ValueError) as exc:
            raise IoError(f"{p}: {exc}") from None
    else:
        samples = synthesize_bandwidth(
            horizon,
            rng,
            cfg.bandwidth_median_kbps,
            cfg.bandwidth_sigma,
            cfg.bandwidth_interval_s,
            cfg.bandwidth_floor_kbps,
        )
    return NetworkTrace(tuple(samples), tuple(outages), cfg.reestablish_delay_s)


def _predictor(cfg: ExperimentConfig, kind: str, trace: NetworkTrace, seed: int) -> Predictor:
    if kind == "oracle":
        return OraclePredictor(trace.outages, cfg.noisy.horizon_s)
    if kind == "noisy":
        return NoisyPredictor(trace.outages, cfg.noisy, _stream(seed, STREAM_PREDICTOR), cfg.durations)
    return NullPredictor()


@dataclass(frozen=True)
class RunSummary:
    abr: str
    variant: str
    predictor: str
    seed: int
    chunks: int
    mean_bitrate_kbps: float
    rebuffer_total_s: float
    rebuffer_mean_s: float
    rebuffer_events: int
    mean_ltb_s: float
    speed_dev_fraction: float
    qoe_lin: float
    qoe_log: float
    optimizer_calls: int

    @property
    def run_id(self) -> str:
        return f"{self.abr}_{self.variant}_{self.predictor}_seed{self.seed}"

    @classmethod
    def from_log(cls, abr: str, variant: str, predictor: str, seed: int, log: SessionLog) -> "RunSummary":
        recs = log.records
        events = log.stall_events
        return cls(
            abr=abr,
            variant=variant,
            predictor=predictor,
            seed=seed,
            chunks=len(recs),
            mean_bitrate_kbps=float(np.mean([r.bitrate_kbps for r in recs])),
            rebuffer_total_s=log.rebuffer_total_s,
            rebuffer_mean_s=log.rebuffer_total_s / events if events else 0.0,
            rebuffer_events=events,
            mean_ltb_s=float(np.mean([r.ltb_s for r in recs])),
            speed_dev_fraction=log.speed_deviation_s / log.wall_time_s if log.wall_time_s > 0 else 0.0,
            qoe_lin=math.fsum(r.qoe_lin for r in recs),
            qoe_log=math.fsum(r.qoe_log for r in recs),
            optimizer_calls=log.optimizer_calls,
        )


def run_one(
    cfg: ExperimentConfig, abr: AbrKind, variant: str, predictor: str, seed: int, trace: NetworkTrace
) -> SessionLog:
    return run_session(
        cfg.manifest,
        trace,
        abr,
        cfg.abr,
        _predictor(cfg, predictor, trace, seed),
        cfg.qoe,
        cfg.pso,
        _stream(seed, STREAM_PSO),
        sara=variant == "sara",
        options=cfg.score,
        initial_buffer_s=cfg.initial_buffer_s,
        ltb_tolerance_s=cfg.ltb_tolerance_s,
        prefer_autonomy=cfg.prefer_autonomy,
    )


def run_matrix(cfg: ExperimentConfig) -> tuple[list[RunSummary], dict[str, SessionLog]]:
    """Every (seed, abr, variant[, predictor]) session, in a fixed order."""
    summaries: list[RunSummary] = []
    logs: dict[str, SessionLog] = {}
    for i, seed in enumerate(cfg.seeds):
        trace = build_trace(cfg, seed, i)
        for abr in cfg.abrs:
            runs = []
            if "bare" in cfg.variants:
                runs.append(("bare", "-"))
            if "sara" in cfg.variants:
                runs.extend(("sara", p) for p in cfg.predictors)
            for variant, pred in runs:
                log = run_one(cfg, abr, variant, pred, seed, trace)
                s = RunSummary.from_log(abr.value, variant, pred, seed, log)
                summaries.append(s)
                logs[s.run_id] = log
    return summaries, logs


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AggregateRow:
    predictor: str
    abr: str
    pairs: int
    rebuffer_pairs: int
    already_zero: int
    rebuffer_reduction_pct: float
    event_reduction_pct: float
    bitrate_delta_pct: float
    ltb_delta_pct: float
    speed_dev_delta: float


def _mean(xs: Sequence[float]) -> float:
    return float(np.mean(xs)) if len(xs) else math.nan


def _pct_reduction(bare: float, sara: float) -> float:
    return (bare - sara) / bare * 100.0


def _pct_delta(bare: float, sara: float) -> float:
    return (sara - bare) / bare * 100.0 if bare != 0 else 0.0


def summarize(summaries: Sequence[RunSummary]) -> list[AggregateRow]:
    """Per-ABR and overall comparison of +SARA against bare runs.

    Percentages are computed per (abr, seed) pair and then averaged.  Pairs
    whose bare run never rebuffered are left out of the rebuffer reduction
    and counted as ``already_zero``; likewise for rebuffer events.  The
    overall row averages the per-ABR figures.
    """
    bare = {(s.abr, s.seed): s for s in summaries if s.variant == "bare"}
    sara = [s for s in summaries if s.variant == "sara"]
    if not sara:
        raise UnpairedRuns("no +SARA runs to compare")
    paired_keys = set()
    groups: dict[tuple[str, str], list[tuple[RunSummary, RunSummary]]] = {}
    for s in sara:
        b = bare.get((s.abr, s.seed))
        if b is None:
            raise UnpairedRuns(f"no bare run for abr={s.abr} seed={s.seed}")
        paired_keys.add((s.abr, s.seed))
        groups.setdefault((s.predictor, s.abr), []).append((b, s))
    missing = set(bare) - paired_keys
    if missing:
        abr, seed = sorted(missing)[0]
        raise UnpairedRuns(f"no +SARA run for abr={abr} seed={seed}")

    rows: list[AggregateRow] = []
    predictors = sorted({p for p, _ in groups})
    for pred in predictors:
        per_abr = []
        for (p, abr), pairs in sorted(groups.items()):
            if p != pred:
                continue
            reb = [_pct_reduction(b.rebuffer_total_s, s.rebuffer_total_s) for b, s in pairs if b.rebuffer_total_s > 0]
            ev = [_pct_reduction(b.rebuffer_events, s.rebuffer_events) for b, s in pairs if b.rebuffer_events > 0]
            row = AggregateRow(
                predictor=pred,
                abr=abr,
                pairs=len(pairs),
                rebuffer_pairs=len(reb),
                already_zero=len(pairs) - len(reb),
                rebuffer_reduction_pct=_mean(reb),
                event_reduction_pct=_mean(ev),
                bitrate_delta_pct=_mean([_pct_delta(b.mean_bitrate_kbps, s.mean_bitrate_kbps) for b, s in pairs]),
                ltb_delta_pct=_mean([_pct_delta(b.mean_ltb_s, s.mean_ltb_s) for b, s in pairs]),
                speed_dev_delta=_mean([s.speed_dev_fraction - b.speed_dev_fraction for b, s in pairs]),
            )
            per_abr.append(row)
            rows.append(row)

        def over(attr: str) -> float:
            vals = [getattr(r, attr) for r in per_abr if not math.isnan(getattr(r, attr))]
            return _mean(vals)

        rows.append(
            AggregateRow(
                predictor=pred,
                abr="overall",
                pairs=sum(r.pairs for r in per_abr),
                rebuffer_pairs=sum(r.rebuffer_pairs for r in per_abr),
                already_zero=sum(r.already_zero for r in per_abr),
                rebuffer_reduction_pct=over("rebuffer_reduction_pct"),
                event_reduction_pct=over("event_reduction_pct"),
                bitrate_delta_pct=over("bitrate_delta_pct"),
                ltb_delta_pct=over("ltb_delta_pct"),
                speed_dev_delta=over("speed_dev_delta"),
            )
        )
    return rows


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------

_SUMMARY_FIELDS = [f.name for f in fields(RunSummary)]
_INT_FIELDS = {"seed", "chunks", "rebuffer_events", "optimizer_calls"}
_STR_FIELDS = {"abr", "variant", "predictor"}


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_summary_csv(path: str | Path, summaries: Sequence[RunSummary]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_SUMMARY_FIELDS)
        for s in summaries:
            w.writerow([_fmt(x) for x in asdict(s).values()])


def read_summary_csv(path: str | Path) -> list[RunSummary]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise IoError(f"{path}: {exc}") from None
    out = []
    for r in rows:
        kw = {}
        for k in _SUMMARY_FIELDS:
            v = r[k]
            kw[k] = v if k in _STR_FIELDS else int(v) if k in _INT_FIELDS else float(v)
        out.append(RunSummary(**kw))
    return out


CDF_METRICS = ("rebuffer_total_s", "mean_bitrate_kbps", "mean_ltb_s", "speed_dev_fraction")


def write_cdf_files(directory: str | Path, summaries: Sequence[RunSummary]) -> list[Path]:
    """Empirical CDF over runs of each metric, one file per (metric, abr, variant, predictor)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    groups: dict[tuple[str, str, str], list[RunSummary]] = {}
    for s in summaries:
        groups.setdefault((s.abr, s.variant, s.predictor), []).append(s)
    written = []
    for (abr, variant, pred), runs in sorted(groups.items()):
        tag = f"{abr}_{variant}" if variant == "bare" else f"{abr}_{variant}_{pred}"
        for metric in CDF_METRICS:
            values = np.sort([getattr(r, metric) for r in runs])
            n = values.size
            path = directory / f"{metric}__{tag}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["value", "cum_fraction"])
                for i, v in enumerate(values, start=1):
                    w.writerow([repr(float(v)), repr(i / n)])
            written.append(path)
    return written


def _cell(x: float, digits: int = 2) -> str:
    return "n/a" if math.isnan(x) else f"{x:.{digits}f}"


def format_report(rows: Sequence[AggregateRow]) -> str:
    head = (
        "SARA vs bare ABR. Percentages are computed per (abr, seed) pair, then averaged;\n"
        "the overall row averages the ABRs. Pairs whose bare run had no rebuffering are\n"
        "excluded from the reduction columns and counted under already_zero.\n"
        "speed_dev_delta is the change in the fraction of wall time spent at speed != 1.\n\n"
    )
    cols = ("predictor", "abr", "pairs", "already_zero", "rebuf_red_%", "events_red_%",
            "bitrate_d_%", "ltb_d_%", "speed_dev_d")
    table = [cols]
    for r in rows:
        table.append(
            (
                r.predictor,
                r.abr,
                str(r.pairs),
                str(r.already_zero),
                _cell(r.rebuffer_reduction_pct),
                _cell(r.event_reduction_pct),
                _cell(r.bitrate_delta_pct),
                _cell(r.ltb_delta_pct),
                _cell(r.speed_dev_delta, 4),
            )
        )
    widths = [max(len(row[i]) for row in table) for i in range(len(cols))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in table]
    return head + "\n".join(lines) + "\n"


def write_outputs(
    out_dir: str | Path, summaries: Sequence[RunSummary], logs: dict[str, SessionLog] | None = None
) -> list[AggregateRow]:
    """Write chunk logs, summary.csv, CDF files and report.txt into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if logs:
        chunk_dir = out / "chunks"
        chunk_dir.mkdir(exist_ok=True)
        for run_id, log in logs.items():
            log.write_csv(chunk_dir / f"{run_id}.csv")
    write_summary_csv(out / "summary.csv", summaries)
    write_cdf_files(out / "cdf", summaries)
    variants = {s.variant for s in summaries}
    if variants != {"bare", "sara"}:
        (out / "report.txt").write_text("No comparison: both bare and sara runs are needed.\n")
        return []
    rows = summarize(summaries)
    (out / "report.txt").write_text(format_report(rows))
    return rows


def write_synthetic_traces(cfg: ExperimentConfig, out_dir: str | Path) -> list[Path]:
    """Materialize each seed's bandwidth and outage trace as CSV files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for i, seed in enumerate(cfg.seeds):
        trace = build_trace(cfg, seed, i)
        bw = out / f"bandwidth_seed{seed}.csv"
        ot = out / f"outages_seed{seed}.csv"
        write_bandwidth_csv(bw, trace.samples)
        write_outage_csv(ot, trace.outages)
        written += [bw, ot]
    return written
