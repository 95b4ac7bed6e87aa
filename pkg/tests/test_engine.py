import dataclasses
import logging
import math

import numpy as np
import pytest

from channel import draw_realization
from engine import (SweepSpec, aggregate, evaluate_realization, monte_carlo, monte_carlo_paired, run_trial, sweep,
                    trial_rng)
from errors import SchemeError, SweepError
from models import SystemConfig
from power import total_power_w


def test_run_trial_is_deterministic(default_cfg):
    a = run_trial(default_cfg, "active_tris", trial_rng(5, 3), trial=3)
    b = run_trial(default_cfg, "active_tris", trial_rng(5, 3), trial=3)
    assert a == b
    assert a.sum_rate == pytest.approx(sum(a.rates))
    assert all(math.isfinite(r) and r >= 0 for r in a.rates + a.sinr)


def test_trial_streams_differ_per_trial(default_cfg):
    a = run_trial(default_cfg, "af", trial_rng(0, 0))
    b = run_trial(default_cfg, "af", trial_rng(0, 1))
    assert a.sum_rate != b.sum_rate


def test_single_device_af_matches_hand_chain(single_device_cfg):
    cfg = single_device_cfg
    real = draw_realization(cfg, trial_rng(1, 0))
    metrics = run_trial(cfg, "af", trial_rng(1, 0))

    g_su = 10 ** (-real.pl_su_db / 10)
    g_ud = 10 ** (-real.pl_ud_db[0] / 10)
    g_sd = 10 ** (-real.pl_sd_db[0] / 10)
    p_t, p_u, noise = cfg.p_t_w, cfg.p_u_w, cfg.noise_w
    lam_sq = 1 / (g_su * p_t + noise)
    sinr = (lam_sq * p_u * p_t * g_su * g_ud + g_sd * p_t) / ((1 + g_ud * lam_sq * p_u) * noise)

    assert metrics.sinr[0] == pytest.approx(sinr, rel=1e-9)
    assert metrics.sum_rate == pytest.approx(math.log2(1 + sinr), rel=1e-9)
    assert metrics.energy_efficiency == pytest.approx(metrics.sum_rate / total_power_w("af", cfg), rel=1e-12)


def test_unity_active_surface_matches_passive():
    cfg = SystemConfig().with_overrides({
        "tris.rho": 1.0, "tris.sigma_r_sq_dbm": -math.inf,
        "power.p_ris_act_dbm": -math.inf, "power.p_dc_dbm": -math.inf,
    })
    for t in range(50):
        active = run_trial(cfg, "active_tris", trial_rng(11, t), trial=t)
        passive = run_trial(cfg, "passive_tris", trial_rng(11, t), trial=t)
        assert dataclasses.replace(active, scheme="passive_tris") == passive


def test_oma_splits_time_and_drops_interference(default_cfg):
    real = draw_realization(default_cfg, trial_rng(2, 0))
    oma = evaluate_realization(real, default_cfg, "direct", access="oma")
    assert oma.access == "oma"
    assert oma.rates == pytest.approx(tuple(np.log2(1 + np.array(oma.sinr)) / 2), rel=1e-9)


def test_unknown_scheme_and_access(default_cfg):
    with pytest.raises(SchemeError):
        run_trial(default_cfg, "laser", trial_rng(0, 0))
    with pytest.raises(SchemeError):
        run_trial(default_cfg, "af", trial_rng(0, 0), access="cdma")


def test_monte_carlo_single_trial(default_cfg):
    agg = monte_carlo(default_cfg, "active_tris", 1, seed=4)
    trial = run_trial(default_cfg, "active_tris", trial_rng(4, 0))
    assert agg.n_trials == 1
    assert agg.sum_rate_mean == trial.sum_rate
    assert agg.ee_mean == trial.energy_efficiency
    assert agg.sum_rate_ci == 0.0 and agg.ee_ci == 0.0


def test_monte_carlo_rejects_zero_trials(default_cfg):
    with pytest.raises(SchemeError):
        monte_carlo(default_cfg, "af", 0, seed=0)


def test_monte_carlo_same_for_any_thread_count(default_cfg):
    one = monte_carlo(default_cfg, "af", 64, seed=9, threads=1)
    many = monte_carlo(default_cfg, "af", 64, seed=9, threads=8)
    assert one == many


def test_confidence_half_width_shrinks_with_trials():
    cfg = SystemConfig(n_elements=4)
    small = monte_carlo(cfg, "direct", 1000, seed=3)
    large = monte_carlo(cfg, "direct", 4000, seed=3)
    assert small.sum_rate_ci / large.sum_rate_ci == pytest.approx(2.0, rel=0.1)


def test_paired_variants_share_draws(default_cfg):
    variants = [("active_tris", "noma"), ("active_tris", "oma"), ("af", "noma")]
    paired = monte_carlo_paired(default_cfg, variants, 20, seed=6)
    for scheme, access in variants:
        assert paired[(scheme, access)] == monte_carlo(default_cfg, scheme, 20, seed=6, access=access)


def test_aggregate_reports_mean_sinr_in_db(default_cfg):
    trials = [run_trial(default_cfg, "direct", trial_rng(0, t), trial=t) for t in range(5)]
    agg = aggregate(trials)
    expected = 10 * np.log10(np.mean([t.sinr for t in trials], axis=0))
    assert agg.sinr_db_mean == pytest.approx(tuple(expected))
    with pytest.raises(SchemeError):
        aggregate([])


def test_sum_rate_increases_with_power_without_impairments():
    cfg = SystemConfig(n_elements=4).with_overrides({"hwi.k_su_sq": 0.0, "hwi.k_ud_sq": 0.0, "hwi.k_sd_sq": 0.0})
    spec = SweepSpec(axis="p_both_dbm", values=(0.0, 10.0, 20.0, 30.0), base=cfg,
                     schemes=("direct", "af", "passive_tris", "active_tris"), trials=100, seed=1)
    frame = sweep(spec).to_frame()
    for _, curve in frame.groupby("scheme"):
        means = curve.sort_values("p_both_dbm")["sum_rate_mean"].to_numpy()
        assert np.all(np.diff(means) > 0)


def test_sweep_table_shape():
    spec = SweepSpec(axis="p_both_dbm", values=(0.0, 10.0, 20.0, 30.0), base=SystemConfig(n_elements=4),
                     schemes=("af", "active_tris"), trials=5, seed=0)
    table = sweep(spec)
    frame = table.to_frame()
    assert len(table.rows) == 8
    assert frame.shape[0] == 8
    assert {"p_both_dbm", "scheme", "access", "n", "m", "sum_rate_mean", "sum_rate_ci", "ee_mean"} <= set(frame)
    assert set(frame["scheme"]) == {"af", "active_tris"}
    assert table.rows[2].config.p_u_dbm == 10.0


@pytest.mark.parametrize("axis, value, field", [
    ("n_elements", 8, lambda c: c.n_elements),
    ("m_antennas", 2, lambda c: c.m_antennas),
    ("rho", 6.0, lambda c: c.tris.rho),
    ("hwi_k", 0.01, lambda c: (c.hwi.k_su_sq, c.hwi.k_ud_sq, c.hwi.k_sd_sq)),
    ("sigma_e_sq", 0.01, lambda c: c.csi.sigma_e_sq),
    ("p_t_dbm", 30.0, lambda c: (c.p_t_dbm, c.p_u_dbm)),
])
def test_sweep_axes_override_the_right_fields(axis, value, field):
    spec = SweepSpec(axis=axis, values=(value,), base=SystemConfig(), trials=1)
    expected = {
        "hwi_k": (0.01, 0.01, 0.01),
        "p_t_dbm": (30.0, 20.0),
    }.get(axis, value)
    assert field(spec.config_at(value)) == expected


def test_sweep_rejects_bad_specs():
    base = SystemConfig()
    with pytest.raises(SweepError):
        SweepSpec(axis="temperature", values=(1.0,), base=base)
    with pytest.raises(SweepError):
        SweepSpec(axis="p_t_dbm", values=(0.0, 10.0, 5.0), base=base)
    with pytest.raises(SweepError):
        SweepSpec(axis="p_t_dbm", values=(), base=base)
    with pytest.raises(SweepError):
        SweepSpec(axis="rho", values=(1.0, 2.0, 4.0), base=base, schemes=("passive_tris",))
    passive = base.with_overrides({"tris.mode": "passive", "tris.rho": 1.0})
    with pytest.raises(SweepError):
        SweepSpec(axis="rho", values=(1.0, 2.0), base=passive)
    with pytest.raises(SweepError):
        SweepSpec(axis="n_elements", values=(4.5,), base=base, trials=1).config_at(4.5)


def test_sweep_accepts_decreasing_values():
    spec = SweepSpec(axis="sigma_e_sq", values=(0.01, 0.0), base=SystemConfig(n_elements=4), trials=2)
    assert [row.value for row in sweep(spec).rows] == [0.01, 0.0]


def test_raised_active_amplitude_is_reported_once_per_run(caplog):
    cfg = SystemConfig(n_elements=4, tris={"mode": "passive", "rho": 0.5})
    with caplog.at_level(logging.WARNING):
        monte_carlo_paired(cfg, [("active_tris", "noma"), ("active_tris", "oma"), ("af", "noma")], 2, seed=0)
    assert sum("outside the active range" in r.getMessage() for r in caplog.records) == 1


def test_negative_seed_is_rejected(default_cfg):
    with pytest.raises(SchemeError):
        monte_carlo(default_cfg, "af", 1, seed=-1)
