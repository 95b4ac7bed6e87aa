import pandas as pd
import pytest
import yaml

from errors import SimulationError
from figures import FIGURES, RHO_AXIS, figure_command, replay, run_figure, sweep_command
from engine import SweepSpec
from models import SystemConfig


def test_registry_covers_every_figure():
    assert set(FIGURES) == {"fig2", "fig3", "fig4", "fig5", "fig6a", "fig6b", "schemes", "schemes_ee"}


def test_fig2_columns():
    frame = run_figure("fig2", SystemConfig(), trials=2, seed=0)
    assert list(frame.columns) == ["p_dbm", "scheme", "n", "m", "sum_rate_mean", "sum_rate_ci"]
    assert len(frame) == 7 * 2 * 4
    assert set(zip(frame["n"], frame["m"])) == {(4, 1), (4, 4), (30, 1), (30, 4)}


def test_fig5_passive_cells_above_unity_are_absent():
    frame = run_figure("fig5", SystemConfig(), trials=2, seed=0)
    passive = frame[frame["scheme"] == "passive_tris"]
    assert len(passive) == 4 * len(RHO_AXIS)
    assert passive[passive["rho"] == 1.0]["ee_mean"].notna().all()
    assert passive[passive["rho"] > 1.0]["ee_mean"].isna().all()
    assert frame[frame["scheme"] == "active_tris"]["ee_mean"].notna().all()


def test_fig6a_rows_are_paired():
    frame = run_figure("fig6a", SystemConfig(), trials=3, seed=0)
    assert set(frame["access"]) == {"noma", "oma"}
    counts = frame.groupby(["p_dbm", "k_sq", "sigma_e_sq"])["access"].nunique()
    assert (counts == 2).all()


def test_unknown_figure():
    with pytest.raises(SimulationError):
        run_figure("fig9", SystemConfig(), trials=1, seed=0)


def test_figure_artifacts_and_replay(tmp_path):
    csv = figure_command("fig4", SystemConfig(), tmp_path / "a", trials=3, seed=5)
    original = csv.read_bytes()
    assert b"\r\n" not in original
    assert original.startswith(b"p_dbm,scheme,n,m,k_sq,ee_mean,ee_ci\n")

    manifest_path = tmp_path / "a" / "fig4.manifest.yaml"
    manifest = yaml.safe_load(manifest_path.read_text())
    assert manifest["figure"] == "fig4"
    assert manifest["seed"] == 5 and manifest["trials"] == 3
    assert manifest["csv"] == "fig4.csv"

    script = (tmp_path / "a" / "fig4_plot.py").read_text()
    assert 'pd.read_csv("fig4.csv")' in script

    replayed = replay(manifest_path, tmp_path / "b", threads=4)
    assert replayed.read_bytes() == original


def test_figure_csv_is_identical_across_thread_counts(tmp_path):
    one = figure_command("fig2", SystemConfig(), tmp_path / "one", trials=4, seed=1, threads=1)
    eight = figure_command("fig2", SystemConfig(), tmp_path / "eight", trials=4, seed=1, threads=8)
    assert one.read_bytes() == eight.read_bytes()


def test_sweep_artifacts_replay(tmp_path):
    spec = SweepSpec(axis="n_elements", values=(4.0, 8.0), base=SystemConfig(), schemes=("active_tris", "af"),
                     trials=3, seed=2, access=("noma", "oma"))
    csv = sweep_command(spec, tmp_path, name="n_sweep")
    frame = pd.read_csv(csv)
    assert len(frame) == 2 * 2 * 2
    assert list(frame["n"].unique()) == [4, 8]
    replayed = replay(tmp_path / "n_sweep.manifest.yaml", tmp_path / "again")
    assert replayed.read_bytes() == csv.read_bytes()


@pytest.mark.parametrize("name", ["schemes", "schemes_ee"])
def test_four_scheme_figures_serve_three_devices(name):
    for group in FIGURES[name].groups:
        cfg = SystemConfig().with_overrides(group.overrides)
        assert cfg.l_devices == 3
        assert cfg.m_antennas == 4


def test_schemes_ee_rows():
    frame = run_figure("schemes_ee", SystemConfig(), trials=1, seed=0)
    assert list(frame.columns) == ["rho", "scheme", "access", "n", "k_sq", "ee_mean", "ee_ci"]
    assert set(frame["n"]) == {4, 400}
    assert set(frame["scheme"]) == {"direct", "af", "passive_tris", "active_tris"}
    assert len(frame) == len(RHO_AXIS) * 4 * 2 * 2 * 2

    passive = frame[frame["scheme"] == "passive_tris"]
    assert passive[passive["rho"] > 1.0]["ee_mean"].isna().all()
    # schemes without a surface do not depend on rho
    flat = frame[frame["scheme"].isin(["direct", "af"])]
    assert (flat.groupby(["scheme", "access", "n", "k_sq"])["ee_mean"].nunique() == 1).all()
