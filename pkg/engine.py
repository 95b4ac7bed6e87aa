"""Seeded Monte-Carlo trials, aggregation and parameter sweeps."""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from channel import ChannelRealization, draw_realization, linear_to_db
from errors import SchemeError, SweepError
from models import SystemConfig
from power import energy_efficiency, total_power_w
from schemes import (SCHEMES, TRIS_SCHEMES, assemble_sinr, check_surface_amplitude, decoding_fractions, device_rates,
                     oma_rates, order_devices_and_allocate, scheme_budgets, tris_state_for)

logger = logging.getLogger(__name__)

CI_Z = 1.96
ACCESS_MODES = ("noma", "oma")

Variant = Tuple[str, str]  # (scheme, access)


@dataclass(frozen=True)
class TrialMetrics:
    trial: int
    scheme: str
    access: str
    sinr: Tuple[float, ...]
    rates: Tuple[float, ...]
    sum_rate: float
    energy_efficiency: float


@dataclass(frozen=True)
class AggregateMetrics:
    scheme: str
    access: str
    n_trials: int
    sum_rate_mean: float
    sum_rate_ci: float
    ee_mean: float
    ee_ci: float
    sinr_db_mean: Tuple[float, ...]  # 10*log10 of the mean linear SINR, per device


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Generator for trial t, independent of how many trials run or in which order"""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def _check_variant(scheme: str, access: str):
    if scheme not in SCHEMES:
        raise SchemeError(f"Unknown scheme: {scheme} (expected one of {', '.join(SCHEMES)})")
    if access not in ACCESS_MODES:
        raise SchemeError(f"Unknown access mode: {access}")


def evaluate_realization(real: ChannelRealization, cfg: SystemConfig, scheme: str,
                         access: Optional[str] = None, trial: int = 0) -> TrialMetrics:
    """SINR, rates and EE of one scheme on an already drawn realization"""
    access = access or cfg.access
    _check_variant(scheme, access)

    tris = tris_state_for(cfg, scheme, real) if scheme in TRIS_SCHEMES else None
    budgets = scheme_budgets(scheme, real, cfg, tris)

    if access == "oma":
        sinrs = [assemble_sinr(b, 1.0, 0.0).sinr for b in budgets]
        rates = oma_rates(sinrs, cfg.l_devices)
    else:
        ordering = order_devices_and_allocate([b.signal for b in budgets], cfg.alloc.alpha)
        sinrs = [
            assemble_sinr(b, *decoding_fractions(i, ordering.fractions, cfg.sic_mode)).sinr
            for i, b in enumerate(budgets)
        ]
        rates = device_rates(sinrs)

    rates = tuple(float(r) for r in rates)
    sum_rate = math.fsum(rates)
    return TrialMetrics(
        trial=trial,
        scheme=scheme,
        access=access,
        sinr=tuple(float(s) for s in sinrs),
        rates=rates,
        sum_rate=sum_rate,
        energy_efficiency=energy_efficiency(sum_rate, total_power_w(scheme, cfg)),
    )


def run_trial(cfg: SystemConfig, scheme: str, rng: np.random.Generator, trial: int = 0,
              access: Optional[str] = None) -> TrialMetrics:
    real = draw_realization(cfg, rng)
    return evaluate_realization(real, cfg, scheme, access, trial)


def _paired_trial(cfg: SystemConfig, variants: Sequence[Variant], seed: int, trial: int) -> List[TrialMetrics]:
    # one draw shared by every variant
    real = draw_realization(cfg, trial_rng(seed, trial))
    return [evaluate_realization(real, cfg, scheme, access, trial) for scheme, access in variants]


def _half_width(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(CI_Z * values.std(ddof=1) / math.sqrt(values.size))


def aggregate(trials: Sequence[TrialMetrics]) -> AggregateMetrics:
    """Reduce trial metrics in the order given"""
    if not trials:
        raise SchemeError("Cannot aggregate zero trials")
    sum_rates = np.array([t.sum_rate for t in trials])
    ees = np.array([t.energy_efficiency for t in trials])
    sinrs = np.array([t.sinr for t in trials])
    mean_sinr = sinrs.mean(axis=0)
    return AggregateMetrics(
        scheme=trials[0].scheme,
        access=trials[0].access,
        n_trials=len(trials),
        sum_rate_mean=float(sum_rates.mean()),
        sum_rate_ci=_half_width(sum_rates),
        ee_mean=float(ees.mean()),
        ee_ci=_half_width(ees),
        sinr_db_mean=tuple(linear_to_db(s) if s > 0 else -math.inf for s in mean_sinr),
    )


def monte_carlo_paired(cfg: SystemConfig, variants: Sequence[Variant], n_trials: int, seed: int,
                       threads: int = 1) -> Dict[Variant, AggregateMetrics]:
    """Run every (scheme, access) variant on the same n_trials channel draws"""
    if n_trials < 1:
        raise SchemeError(f"n_trials must be >= 1, got {n_trials}")
    if seed < 0:
        raise SchemeError(f"seed must be >= 0, got {seed}")
    if not variants:
        raise SchemeError("At least one scheme is required")
    for scheme, access in variants:
        _check_variant(scheme, access)
    for scheme in dict.fromkeys(s for s, _ in variants if s in TRIS_SCHEMES):
        check_surface_amplitude(cfg, scheme)

    started = time.perf_counter()
    run = lambda t: _paired_trial(cfg, variants, seed, t)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_trial = list(pool.map(run, range(n_trials)))
    else:
        per_trial = [run(t) for t in range(n_trials)]

    results = {variant: aggregate([trial[k] for trial in per_trial]) for k, variant in enumerate(variants)}
    logger.debug(
        f"{n_trials} trials x {len(variants)} variants (seed={seed}, threads={threads}) "
        f"in {time.perf_counter() - started:.2f}s"
    )
    return results


def monte_carlo(cfg: SystemConfig, scheme: str, n_trials: int, seed: int, threads: int = 1,
                access: Optional[str] = None) -> AggregateMetrics:
    variant = (scheme, access or cfg.access)
    return monte_carlo_paired(cfg, [variant], n_trials, seed, threads)[variant]


def _integer(axis: str, value: float) -> int:
    if float(value) != int(value):
        raise SweepError(f"Axis {axis} needs integer values, got {value}")
    return int(value)


AXES = {
    "p_t_dbm": lambda v: {"p_t_dbm": float(v)},
    "p_both_dbm": lambda v: {"p_t_dbm": float(v), "p_u_dbm": float(v)},
    "n_elements": lambda v: {"n_elements": _integer("n_elements", v)},
    "m_antennas": lambda v: {"m_antennas": _integer("m_antennas", v)},
    "rho": lambda v: {"tris.rho": float(v)},
    "hwi_k": lambda v: {"hwi.k_su_sq": float(v), "hwi.k_ud_sq": float(v), "hwi.k_sd_sq": float(v)},
    "sigma_e_sq": lambda v: {"csi.sigma_e_sq": float(v)},
}


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: Tuple[float, ...]
    base: SystemConfig
    schemes: Tuple[str, ...] = ("active_tris",)
    trials: int = 10_000
    seed: int = 0
    # empty means the base config's access mode
    access: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.axis not in AXES:
            raise SweepError(f"Unknown sweep axis: {self.axis} (expected one of {', '.join(AXES)})")
        if not self.values:
            raise SweepError("Sweep needs at least one axis value")
        steps = np.diff(np.asarray(self.values, dtype=float))
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise SweepError(f"Axis values must be strictly monotone, got {list(self.values)}")
        if not self.schemes:
            raise SweepError("Sweep needs at least one scheme")
        if self.axis == "rho":
            passive = "passive_tris" in self.schemes or self.base.tris.mode == "passive"
            over = [v for v in self.values if v > 1]
            if passive and over:
                raise SweepError(f"rho={over[0]} is not admissible for a passive TRIS (rho <= 1)")

    @property
    def variants(self) -> List[Variant]:
        accesses = self.access or (self.base.access,)
        return [(scheme, access) for scheme in self.schemes for access in accesses]

    def config_at(self, value: float) -> SystemConfig:
        return self.base.with_overrides(AXES[self.axis](value))


@dataclass
class SweepRow:
    value: float
    config: SystemConfig
    metrics: AggregateMetrics


@dataclass
class SweepTable:
    spec: SweepSpec
    rows: List[SweepRow] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        records = []
        for row in self.rows:
            m = row.metrics
            record = {
                self.spec.axis: row.value,
                "scheme": m.scheme,
                "access": m.access,
                "n": row.config.n_elements,
                "m": row.config.m_antennas,
                "k_sq": row.config.hwi.k_su_sq,
                "sigma_e_sq": row.config.csi.sigma_e_sq,
                "trials": m.n_trials,
                "sum_rate_mean": m.sum_rate_mean,
                "sum_rate_ci": m.sum_rate_ci,
                "ee_mean": m.ee_mean,
                "ee_ci": m.ee_ci,
            }
            for i, s in enumerate(m.sinr_db_mean):
                record[f"sinr_db_{i}"] = s
            records.append(record)
        return pd.DataFrame.from_records(records)


def sweep(spec: SweepSpec, threads: int = 1) -> SweepTable:
    """Every axis value reuses the same seed, so rows are paired draw for draw"""
    table = SweepTable(spec=spec)
    variants = spec.variants
    for value in spec.values:
        cfg = spec.config_at(value)
        results = monte_carlo_paired(cfg, variants, spec.trials, spec.seed, threads)
        for variant in variants:
            table.rows.append(SweepRow(value=value, config=cfg, metrics=results[variant]))
        logger.info(f"{spec.axis}={value}: " + ", ".join(
            f"{s}/{a} sum_rate={results[(s, a)].sum_rate_mean:.6g}" for s, a in variants
        ))
    return table
