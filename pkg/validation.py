"""Analytic spot checks and property checks behind the ``validate`` command."""
import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Callable, List

import numpy as np
import pandas as pd

import channel
from engine import evaluate_realization, trial_rng
from models import SystemConfig
from power import total_power_w
from schemes import (assemble_sinr, cascade_gain, configure_tris_phases, decoding_fractions, scheme_budgets,
                     tas_select, tris_state_for)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Check:
    name: str
    expected: float
    actual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.actual)) and abs(self.actual - self.expected) <= self.tolerance


def _flag(name: str, ok: bool) -> Check:
    return Check(name, 1.0, 1.0 if ok else 0.0, 0.0)


def pathloss_checks() -> List[Check]:
    pl = SystemConfig().haps_pl
    return [
        Check("fspl(20 km, 3000 MHz) [dB]", 128.013, channel.fspl_db(20, 3000), 0.01),
        Check("uav_pl(200 m, 3 GHz, no shadowing) [dB]", 88.165, channel.pathloss_uav_ground_db(200, 3, 200), 0.01),
        Check("uav_shadow_std(200 m) [dB]", 1.2395, channel.uav_shadow_std_db(200), 0.01),
        Check("los_probability(40 deg)", 0.6216, channel.los_probability(40, pl), 1e-3),
        Check("scintillation(40 deg) [dB]", 0.2225, channel.scintillation_db(40, pl), 1e-3),
        Check("haps_pl(20 km, 40 deg, blended) [dB]", 153.70, channel.pathloss_haps_db(20, 3000, 40, pl), 0.01),
    ]


def rician_moment_checks(samples: int = 100_000, seed: int = 0) -> List[Check]:
    checks = []
    for z in (0.0, 1.0, 10.0, 1e12):
        rng = np.random.default_rng(seed)
        h = channel.sample_rician(0.0, z, samples, 1, rng)
        checks.append(Check(f"E|h|^2 for Z={z:g} (0 dB loss)", 1.0, float(np.mean(np.abs(h) ** 2)), 0.02))
    return checks


def phase_alignment_check(draws: int = 20, candidates: int = 1000, n: int = 8, seed: int = 1) -> Check:
    rng = np.random.default_rng(seed)
    worst_margin = math.inf
    for _ in range(draws):
        h_su = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        h_ud = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        aligned = np.abs(np.sum(configure_tris_phases(h_su, h_ud, 1.0).coefficients * h_su * h_ud)) ** 2
        theta = rng.uniform(-np.pi, np.pi, size=(candidates, n))
        best_random = np.max(np.abs(np.exp(1j * theta) @ (h_su * h_ud)) ** 2)
        worst_margin = min(worst_margin, aligned - best_random)
    return _flag("aligned phases beat random phases", worst_margin >= 0)


def degenerate_equivalence_check(trials: int = 50, seed: int = 2) -> Check:
    """Active surface at unity gain with no added noise or power must equal the passive one"""
    cfg = SystemConfig().with_overrides({
        "tris.rho": 1.0, "tris.sigma_r_sq_dbm": -math.inf,
        "power.p_ris_act_dbm": -math.inf, "power.p_dc_dbm": -math.inf,
    })
    identical = True
    for t in range(trials):
        real = channel.draw_realization(cfg, trial_rng(seed, t))
        active = evaluate_realization(real, cfg, "active_tris", trial=t)
        passive = evaluate_realization(real, cfg, "passive_tris", trial=t)
        identical &= dataclasses.replace(active, scheme="passive_tris") == passive
    return _flag("active(rho=1, no noise) == passive", identical)


def sic_mode_check(seed: int = 3) -> Check:
    """Both SIC readings agree for the device holding the largest fraction"""
    cfg = SystemConfig()
    real = channel.draw_realization(cfg, trial_rng(seed, 0))
    budgets = scheme_budgets("active_tris", real, cfg, tris_state_for(cfg, "active_tris", real))
    fractions = np.array(cfg.alloc.alpha)
    strongest = int(np.argmax(fractions))
    sic = assemble_sinr(budgets[strongest], *decoding_fractions(strongest, fractions, "sic"))
    literal = assemble_sinr(budgets[strongest], *decoding_fractions(strongest, fractions, "paper-literal"))
    return _flag("sic == paper-literal for the strongest-power device", sic == literal)


def power_checks() -> List[Check]:
    cfg = SystemConfig(n_elements=4)
    return [
        Check("total_power(passive_tris, N=4) [W]", 0.118974, total_power_w("passive_tris", cfg), 1e-6),
        Check("total_power(active_tris, N=4) [W]", 0.134785, total_power_w("active_tris", cfg), 1e-6),
        Check("total_power(af) [W]", 0.209487, total_power_w("af", cfg), 1e-6),
    ]


def selection_checks() -> List[Check]:
    h = np.array([[1, 1.3], [1, 0]], dtype=complex)
    state = configure_tris_phases(np.exp(1j * np.array([0.3, 1.0])), np.exp(1j * np.array([0.2, -0.5])), 1.0)
    gain = cascade_gain(np.ones(2), state, np.ones(2))
    return [
        Check("tas_select(column norms [1.414, 1.3])", 0.0, float(tas_select(h)), 0.0),
        Check("tris phase theta_0 [rad]", -0.5, float(state.theta[0]), 1e-12),
        Check("tris phase theta_1 [rad]", -0.5, float(state.theta[1]), 1e-12),
        Check("cascade gain, unit channels, theta=-0.5", 4.0, gain, 1e-12),
    ]


SUITE: List[Callable[[], object]] = [
    pathloss_checks,
    rician_moment_checks,
    phase_alignment_check,
    degenerate_equivalence_check,
    sic_mode_check,
    power_checks,
    selection_checks,
]


def run_checks() -> List[Check]:
    checks = []
    for step in SUITE:
        result = step()
        checks.extend(result if isinstance(result, list) else [result])
    failed = [c.name for c in checks if not c.passed]
    logger.info(f"Validation: {len(checks) - len(failed)}/{len(checks)} checks passed")
    return checks


def report(checks: List[Check]) -> pd.DataFrame:
    return pd.DataFrame.from_records([
        {"check": c.name, "expected": c.expected, "actual": c.actual, "tolerance": c.tolerance,
         "status": "PASS" if c.passed else "FAIL"}
        for c in checks
    ])
