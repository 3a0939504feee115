"""Monte Carlo harness: configuration, paired trials, PUPE and run-time report."""
from __future__ import annotations

import csv
import dataclasses
import functools
import hashlib
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml
from statsmodels.stats.proportion import proportion_confint

from . import streams
from .activity_detection import ADConfig
from .channel import simulate_slot
from .codebook import generate_codebook
from .errors import InvalidConfig, NumericalFailure
from .pipeline import decode
from .tree_code import DEFAULT_WIDTH_CAP, ParityGenerators, ParityProfile, encode_indices

log = logging.getLogger(__name__)

N0 = 1.0
MODES = ("baseline", "scld")
TIMING_FIELDS = ("mean_decode_seconds", "runtime_ratio", "wall_seconds")
CSV_COLUMNS = (
    "ka", "m", "mode", "trials", "pupe", "pupe_ci_lo", "pupe_ci_hi",
    "mean_decode_seconds", "mean_support_sum", "runtime_ratio",
)


def _ints(value) -> tuple:
    if isinstance(value, (int, np.integer)):
        return (int(value),)
    return tuple(int(v) for v in value)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment.  ``K_a`` and ``M`` may be lists; every pair is simulated."""

    B: int = 96
    L: int = 32
    n: int = 100
    M: tuple = (50,)
    K_a: tuple = (25,)
    EbN0_dB: float = 0.0
    parity_profile: tuple = (0,) + (9,) * 28 + (12,) * 3
    subblock_length: Optional[int] = None
    delta: int = 5
    max_passes: int = 10
    rel_tol: float = 1e-6
    coordinate_order: str = "shuffled"
    refresh_every: int = 5
    modes: tuple = MODES
    saturate: bool = False
    trials: int = 100
    seed: int = 0
    threads: int = 1
    width_cap: int = DEFAULT_WIDTH_CAP
    failure_threshold: float = 0.0
    K_tot: Optional[int] = None

    def __post_init__(self):
        set_ = functools.partial(object.__setattr__, self)
        try:
            set_("M", _ints(self.M))
            set_("K_a", _ints(self.K_a))
            set_("parity_profile", _ints(self.parity_profile))
            set_("modes", tuple(str(m) for m in ([self.modes] if isinstance(self.modes, str) else self.modes)))
            # YAML reads "1e-6" as a string, so coerce scalars explicitly
            for name in ("EbN0_dB", "rel_tol", "failure_threshold"):
                set_(name, float(getattr(self, name)))
            for name in ("B", "L", "n", "delta", "max_passes", "refresh_every", "trials", "seed", "threads", "width_cap"):
                set_(name, int(getattr(self, name)))
        except (TypeError, ValueError) as exc:
            raise InvalidConfig(str(exc)) from exc
        if len(self.parity_profile) != self.L:
            raise InvalidConfig(f"parity profile has {len(self.parity_profile)} entries, L = {self.L}")
        if self.subblock_length is None:
            total = self.B + sum(self.parity_profile)
            if total % self.L:
                raise InvalidConfig("B + sum(parity) is not a multiple of L; set subblock_length")
            set_("subblock_length", total // self.L)
        try:
            prof = self.profile
        except ValueError as exc:
            raise InvalidConfig(str(exc)) from exc
        if prof.B != self.B:
            raise InvalidConfig(f"profile carries {prof.B} information bits, B = {self.B}")
        if not self.modes or any(m not in MODES for m in self.modes):
            raise InvalidConfig(f"modes must be a non-empty subset of {MODES}")
        if self.n < 1 or min(self.M) < 1 or min(self.K_a) < 1 or self.trials < 1 or self.threads < 1:
            raise InvalidConfig("n, M, K_a, trials and threads must be positive")
        try:
            self.ad_config
        except ValueError as exc:
            raise InvalidConfig(str(exc)) from exc

    @property
    def profile(self) -> ParityProfile:
        return ParityProfile.uniform(self.parity_profile, self.subblock_length)

    @property
    def ad_config(self) -> ADConfig:
        return ADConfig(
            max_passes=self.max_passes, rel_tol=self.rel_tol, delta=self.delta,
            order=self.coordinate_order, refresh_every=self.refresh_every,
        )

    @property
    def N(self) -> int:
        return self.n * self.L

    @property
    def power(self) -> float:
        """Per-symbol power from ``Eb/N0 = N P / (B N0)``."""
        return self.B * 10 ** (self.EbN0_dB / 10) * N0 / self.N

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise InvalidConfig(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise InvalidConfig(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise InvalidConfig("config must be a key-value mapping")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class Setup:
    profile: ParityProfile
    gens: ParityGenerators
    codebooks: tuple


@functools.lru_cache(maxsize=2)
def _setup(seed: int, n: int, power: float, profile: ParityProfile) -> Setup:
    gens = ParityGenerators.generate(profile, seed)
    books = tuple(generate_codebook(seed, n, v, power, slot=l) for l, v in enumerate(profile.lengths))
    return Setup(profile, gens, books)


def build_setup(config: ExperimentConfig) -> Setup:
    """Generators and codebooks shared by all users, trials and decoders."""
    return _setup(config.seed, config.n, config.power, config.profile)


def pupe(sent, recovered) -> float:
    """Fraction of active users whose payload is missing from ``recovered``."""
    sent = list(sent)
    return count_missed(sent, recovered) / len(sent)


def count_missed(sent, recovered) -> int:
    got = {np.asarray(w, dtype=np.uint8).tobytes() for w in recovered}
    return sum(np.asarray(w, dtype=np.uint8).tobytes() not in got for w in sent)


@dataclass
class TrialResult:
    trial: int
    ka: int
    m: int
    missed: dict = field(default_factory=dict)
    failed: dict = field(default_factory=dict)
    seconds: dict = field(default_factory=dict)
    support_sum: dict = field(default_factory=dict)
    died_at: dict = field(default_factory=dict)
    support_law: dict = field(default_factory=dict)
    obs_hash: str = ""


def draw_payloads(config: ExperimentConfig, ka: int, trial: int) -> np.ndarray:
    rng = streams.generator(config.seed, streams.PAYLOADS, ka, trial)
    return rng.integers(0, 2, size=(ka, config.B), dtype=np.uint8)


def simulate_frame(config: ExperimentConfig, setup: Setup, payloads: np.ndarray, m: int, trial: int) -> list:
    ka = payloads.shape[0]
    idx = encode_indices(payloads, setup.gens)
    return [
        simulate_slot(setup.codebooks[l], idx[:, l], m, N0, streams.generator(config.seed, streams.CHANNEL, ka, m, trial, l))
        for l in range(setup.profile.L)
    ]


def observation_hash(observations) -> str:
    h = hashlib.sha256()
    for obs in observations:
        h.update(np.ascontiguousarray(obs.Y).tobytes())
    return h.hexdigest()


def run_trial(config: ExperimentConfig, trial_index: int, ka: Optional[int] = None, m: Optional[int] = None) -> TrialResult:
    """Draw payloads, simulate one frame, and decode it with every requested mode.

    Fully determined by ``(config, trial_index, ka, m)``; all modes see the
    same observations.
    """
    ka = config.K_a[0] if ka is None else ka
    m = config.M[0] if m is None else m
    setup = build_setup(config)
    payloads = draw_payloads(config, ka, trial_index)
    obs = simulate_frame(config, setup, payloads, m, trial_index)
    order_seed = streams.seed_sequence(config.seed, streams.COORD_ORDER, ka, m, trial_index)

    res = TrialResult(trial_index, ka, m, obs_hash=observation_hash(obs))
    for mode in config.modes:
        try:
            out = decode(
                mode, obs, setup.codebooks, setup.gens, ka, config.ad_config, N0,
                seed=order_seed, width_cap=config.width_cap, saturate=config.saturate,
            )
        except NumericalFailure as exc:
            log.warning("trial %d (ka=%d, m=%d) %s: %s", trial_index, ka, m, mode, exc)
            res.failed[mode] = True
            res.missed[mode] = ka
            res.seconds[mode] = 0.0
            res.support_sum[mode] = 0
            res.died_at[mode] = None
            res.support_law[mode] = None
            continue
        res.failed[mode] = False
        res.missed[mode] = count_missed(payloads, out.recovered)
        res.seconds[mode] = out.seconds
        res.support_sum[mode] = int(sum(out.support_sizes))
        res.died_at[mode] = out.died_at
        res.support_law[mode] = out.support_law_holds(setup.profile)
    return res


def _trial_job(args):
    return run_trial(*args)


def wilson_interval(failures: int, total: int) -> tuple[float, float]:
    lo, hi = proportion_confint(failures, total, alpha=0.05, method="wilson")
    return float(lo), float(hi)


@dataclass
class ExperimentReport:
    config: dict
    points: list
    failure_rate: float
    wall_seconds: float = 0.0

    def to_json(self, include_timing: bool = True) -> str:
        data = dataclasses.asdict(self)
        if not include_timing:
            data = _strip_timing(data)
        return json.dumps(data, indent=2, sort_keys=True)

    def to_csv(self, include_timing: bool = True) -> str:
        buf = io.StringIO()
        cols = [c for c in CSV_COLUMNS if include_timing or c not in TIMING_FIELDS]
        writer = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for p in self.points:
            writer.writerow({k: p[k] for k in cols})
        return buf.getvalue()

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json() + "\n")
        (out / "results.csv").write_text(self.to_csv())
        return out


def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k not in TIMING_FIELDS}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


def aggregate(config: ExperimentConfig, ka: int, m: int, results: list) -> list:
    """One summary row per mode for a single (K_a, M) point."""
    results = sorted(results, key=lambda r: r.trial)
    rows = []
    for mode in config.modes:
        missed = [r.missed[mode] for r in results]
        total = len(results) * ka
        lo, hi = wilson_interval(sum(missed), total)
        rows.append({
            "ka": ka,
            "m": m,
            "mode": mode,
            "trials": len(results),
            "pupe": sum(missed) / total,
            "pupe_ci_lo": lo,
            "pupe_ci_hi": hi,
            "mean_decode_seconds": float(np.mean([r.seconds[mode] for r in results])),
            "mean_support_sum": float(np.mean([r.support_sum[mode] for r in results])),
            "failures": sum(r.failed[mode] for r in results),
            "support_law_violations": sum(r.support_law[mode] is False for r in results),
            "missed_per_trial": missed,
            "runtime_ratio": None,
        })
    by_mode = {r["mode"]: r for r in rows}
    if set(MODES) <= set(by_mode):
        base = by_mode["baseline"]["mean_decode_seconds"]
        ratio = by_mode["scld"]["mean_decode_seconds"] / base if base > 0 else None
        for r in rows:
            r["runtime_ratio"] = ratio
    return rows


def run_experiment(config: ExperimentConfig, progress=None) -> ExperimentReport:
    """All trials for every (K_a, M) pair; trials run on ``config.threads`` worker processes."""

    t0 = time.perf_counter()
    jobs = [(config, t, ka, m) for ka in config.K_a for m in config.M for t in range(config.trials)]
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(_trial_job, jobs, chunksize=1))
    else:
        results = []
        for job in jobs:
            results.append(_trial_job(job))
            if progress:
                progress(results[-1])

    points, failures, runs = [], 0, 0
    for ka in config.K_a:
        for m in config.M:
            sub = [r for r in results if r.ka == ka and r.m == m]
            points.extend(aggregate(config, ka, m, sub))
            failures += sum(sum(r.failed.values()) for r in sub)
            runs += len(sub) * len(config.modes)
    return ExperimentReport(config.to_dict(), points, failures / runs, time.perf_counter() - t0)
