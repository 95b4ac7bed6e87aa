"""Figure registry and the CSV / manifest / plot-script artifacts every run leaves behind."""
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from string import Template
from typing import Dict, List, Optional, Tuple

import pandas as pd
import yaml

from engine import SweepSpec, sweep
from errors import ConfigError, SimulationError
from models import SystemConfig, __version__, build_config

logger = logging.getLogger(__name__)

P_AXIS_DBM = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0)
RHO_AXIS = (1.0, 2.0, 4.0, 6.0, 8.0, 10.0)
HWI_LEVELS = (0.0, 0.01)
CSI_LEVELS = (0.0, 0.01)
# three devices for the four-scheme comparisons; the third sits between the default two
THREE_USERS = {
    "l_devices": 3,
    "geometry.d_sd_m": [20_200.0, 20_150.0, 20_100.0],
    "geometry.d_ud_m": [200.0, 150.0, 100.0],
    "alloc.alpha": [0.6, 0.3, 0.1],
}
CSV_FLOAT_FORMAT = "%.9g"

AXIS_COLUMNS = {"p_both_dbm": "p_dbm", "p_t_dbm": "p_dbm"}


@dataclass(frozen=True)
class Group:
    """One block of curves: config overrides plus the schemes drawn with them"""

    overrides: Dict[str, object]
    schemes: Tuple[str, ...]
    access: Tuple[str, ...] = ()
    # subset of the figure axis actually simulated; the rest is written as absent
    values: Optional[Tuple[float, ...]] = None


@dataclass(frozen=True)
class FigureDef:
    name: str
    title: str
    axis: str
    values: Tuple[float, ...]
    metric: str  # sum_rate | ee
    keys: Tuple[str, ...]
    groups: Tuple[Group, ...] = field(default_factory=tuple)

    @property
    def x_column(self) -> str:
        return AXIS_COLUMNS.get(self.axis, self.axis)

    @property
    def columns(self) -> List[str]:
        return [self.x_column, *self.keys, f"{self.metric}_mean", f"{self.metric}_ci"]


def _hwi(k: float) -> Dict[str, float]:
    return {"hwi.k_su_sq": k, "hwi.k_ud_sq": k, "hwi.k_sd_sq": k}


def _nm_groups(schemes, n_values=(4, 30), m_values=(1, 4), hwi=(None,)):
    groups = []
    for n in n_values:
        for m in m_values:
            for k in hwi:
                overrides = {"n_elements": n, "m_antennas": m}
                if k is not None:
                    overrides.update(_hwi(k))
                groups.append(Group(overrides=overrides, schemes=schemes))
    return tuple(groups)


def _access_groups(schemes, n: int, m: int, csi_levels, extra=None) -> Tuple[Group, ...]:
    return tuple(
        Group(overrides={**(extra or {}), "n_elements": n, "m_antennas": m, **_hwi(k), "csi.sigma_e_sq": e},
              schemes=schemes, access=("noma", "oma"))
        for k in HWI_LEVELS for e in csi_levels
    )


def _fig5_groups() -> Tuple[Group, ...]:
    groups = []
    for n in (4, 30):
        for m in (1, 4):
            overrides = {"n_elements": n, "m_antennas": m, **_hwi(0.01)}
            groups.append(Group(overrides=overrides, schemes=("active_tris",)))
            groups.append(Group(overrides=overrides, schemes=("passive_tris",), values=(1.0,)))
    return tuple(groups)


def _scheme_rho_groups() -> Tuple[Group, ...]:
    # direct and AF ignore rho, so their rows repeat across the axis as flat reference lines
    groups = []
    for n in (4, 400):
        for k in HWI_LEVELS:
            overrides = {**THREE_USERS, "n_elements": n, "m_antennas": 4, **_hwi(k)}
            groups.append(Group(overrides=overrides, schemes=("direct", "af", "active_tris"), access=("noma", "oma")))
            groups.append(Group(overrides=overrides, schemes=("passive_tris",), access=("noma", "oma"),
                                values=(1.0,)))
    return tuple(groups)


FIGURES: Dict[str, FigureDef] = {
    f.name: f for f in (
        FigureDef("fig2", "Sum rate vs P: active TRIS vs AF", "p_both_dbm", P_AXIS_DBM, "sum_rate",
                  ("scheme", "n", "m"), _nm_groups(("active_tris", "af"))),
        FigureDef("fig3", "Energy efficiency vs P: active TRIS vs AF under HWI", "p_both_dbm", P_AXIS_DBM, "ee",
                  ("scheme", "n", "m", "k_sq"), _nm_groups(("active_tris", "af"), hwi=HWI_LEVELS)),
        FigureDef("fig4", "Energy efficiency vs P: active vs passive TRIS", "p_both_dbm", P_AXIS_DBM, "ee",
                  ("scheme", "n", "m", "k_sq"),
                  _nm_groups(("active_tris", "passive_tris"), n_values=(4,), hwi=HWI_LEVELS)),
        FigureDef("fig5", "Energy efficiency vs rho", "rho", RHO_AXIS, "ee",
                  ("scheme", "n", "m"), _fig5_groups()),
        FigureDef("fig6a", "Sum rate vs P: NOMA vs OMA, HWI and imperfect CSI", "p_both_dbm", P_AXIS_DBM,
                  "sum_rate", ("scheme", "access", "k_sq", "sigma_e_sq"),
                  _access_groups(("active_tris",), 30, 4, CSI_LEVELS)),
        FigureDef("fig6b", "Energy efficiency vs P: NOMA vs OMA, HWI and imperfect CSI", "p_both_dbm", P_AXIS_DBM,
                  "ee", ("scheme", "access", "k_sq", "sigma_e_sq"),
                  _access_groups(("active_tris",), 30, 4, CSI_LEVELS)),
        FigureDef("schemes", "Sum rate vs P: direct, AF, passive and active TRIS", "p_both_dbm", P_AXIS_DBM,
                  "sum_rate", ("scheme", "access", "k_sq"),
                  _access_groups(("direct", "af", "passive_tris", "active_tris"), 60, 4, (0.0,), THREE_USERS)),
        FigureDef("schemes_ee", "Energy efficiency vs rho: direct, AF, passive and active TRIS", "rho", RHO_AXIS,
                  "ee", ("scheme", "access", "n", "k_sq"), _scheme_rho_groups()),
    )
}


def _absent_rows(fig: FigureDef, group: Group, cfg: SystemConfig, present) -> pd.DataFrame:
    """Placeholder rows (metric left empty) for axis values a group cannot reach"""
    missing = [v for v in fig.values if v not in present]
    accesses = group.access or (cfg.access,)
    rows = [
        {fig.axis: v, "scheme": s, "access": a, "n": cfg.n_elements, "m": cfg.m_antennas,
         "k_sq": cfg.hwi.k_su_sq, "sigma_e_sq": cfg.csi.sigma_e_sq,
         f"{fig.metric}_mean": math.nan, f"{fig.metric}_ci": math.nan}
        for v in missing for s in group.schemes for a in accesses
    ]
    return pd.DataFrame.from_records(rows)


def run_figure(name: str, base: SystemConfig, trials: int, seed: int, threads: int = 1) -> pd.DataFrame:
    fig = FIGURES.get(name)
    if fig is None:
        raise SimulationError(f"Unknown figure id: {name} (expected one of {', '.join(FIGURES)})")

    frames = []
    for group in fig.groups:
        cfg = base.with_overrides(group.overrides)
        values = group.values or fig.values
        spec = SweepSpec(axis=fig.axis, values=values, base=cfg, schemes=group.schemes,
                         trials=trials, seed=seed, access=group.access)
        frames.append(sweep(spec, threads=threads).to_frame())
        if group.values is not None:
            frames.append(_absent_rows(fig, group, cfg, set(values)))

    table = pd.concat(frames, ignore_index=True).rename(columns={fig.axis: fig.x_column})
    logger.info(f"{name}: {len(table)} rows from {len(fig.groups)} curve groups")
    return table[fig.columns]


def write_csv(frame: pd.DataFrame, path: Path):
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, na_rep="", lineterminator="\n")


def write_manifest(path: Path, manifest: dict):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        yaml.safe_dump(manifest, f, sort_keys=False)


PLOT_TEMPLATE = Template('''"""Plot $csv"""
import matplotlib.pyplot as plt
import pandas as pd

KEYS = $keys

df = pd.read_csv("$csv").dropna(subset=["$y"])
fig, ax = plt.subplots(figsize=(7, 5))
for values, curve in df.groupby(KEYS):
    label = ", ".join(f"{k}={v}" for k, v in zip(KEYS, values))
    ax.errorbar(curve["$x"], curve["$y"], yerr=curve["$ci"], marker="o", capsize=2, label=label)
ax.set_xlabel("$x")
ax.set_ylabel("$y")
ax.set_title("$title")
ax.grid(True, alpha=0.3)
ax.legend(fontsize="small")
fig.tight_layout()
fig.savefig("$png", dpi=150)
''')


def write_plot_script(path: Path, csv_name: str, x: str, metric: str, keys, title: str):
    script = PLOT_TEMPLATE.substitute(
        csv=csv_name, keys=repr(list(keys)), x=x, y=f"{metric}_mean", ci=f"{metric}_ci",
        title=title, png=Path(csv_name).with_suffix(".png").name,
    )
    path.write_text(script, encoding="utf-8", newline="\n")


def base_manifest(kind: str, base: SystemConfig, trials: int, seed: int) -> dict:
    return {
        "kind": kind,
        "version": __version__,
        "seed": seed,
        "trials": trials,
        "config": base.model_dump(),
    }


def emit(out_dir, name: str, frame: pd.DataFrame, manifest: dict, x: str, metric: str, keys, title: str) -> Path:
    """Write <name>.csv, <name>.manifest.yaml and <name>_plot.py; returns the CSV path"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{name}.csv"
    write_csv(frame, csv_path)
    write_manifest(out_dir / f"{name}.manifest.yaml", {**manifest, "csv": csv_path.name})
    write_plot_script(out_dir / f"{name}_plot.py", csv_path.name, x, metric, keys, title)
    logger.info(f"Wrote {csv_path} ({len(frame)} rows)")
    return csv_path


def figure_command(name: str, base: SystemConfig, out_dir, trials: int, seed: int, threads: int = 1) -> Path:
    started = time.perf_counter()
    frame = run_figure(name, base, trials, seed, threads)
    fig = FIGURES[name]
    manifest = base_manifest("figure", base, trials, seed)
    manifest.update({
        "figure": name,
        "schemes": sorted({s for g in fig.groups for s in g.schemes}),
        "axis": {"name": fig.axis, "values": list(fig.values)},
        "duration_s": round(time.perf_counter() - started, 3),
    })
    return emit(out_dir, name, frame, manifest, fig.x_column, fig.metric, fig.keys, fig.title)


SWEEP_KEYS = ("scheme", "access", "n", "m")

def sweep_command(spec: SweepSpec, out_dir, name: str = None, threads: int = 1) -> Path:
    started = time.perf_counter()
    frame = sweep(spec, threads=threads).to_frame()
    name = name or f"sweep_{spec.axis}"
    manifest = base_manifest("sweep", spec.base, spec.trials, spec.seed)
    manifest.update({
        "name": name,
        "schemes": list(spec.schemes),
        "access": list(spec.access),
        "axis": {"name": spec.axis, "values": list(spec.values)},
        "duration_s": round(time.perf_counter() - started, 3),
    })
    return emit(out_dir, name, frame, manifest, spec.axis, "sum_rate", SWEEP_KEYS,
                f"Sum rate vs {spec.axis}")


def load_manifest(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            manifest = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"Could not read manifest {path}: {e}") from e
    missing = [k for k in ("kind", "seed", "trials", "config", "axis") if k not in (manifest or {})]
    if missing:
        raise ConfigError(f"Manifest {path} is missing: {', '.join(missing)}")
    return manifest


def replay(path, out_dir=None, threads: int = 1) -> Path:
    """Re-run the figure or sweep recorded in a manifest and rewrite its CSV"""
    manifest = load_manifest(path)
    out_dir = Path(out_dir) if out_dir else Path(path).parent
    base = build_config(manifest["config"], source=str(path))
    trials, seed = int(manifest["trials"]), int(manifest["seed"])

    if manifest["kind"] == "figure":
        return figure_command(manifest["figure"], base, out_dir, trials, seed, threads)
    if manifest["kind"] == "sweep":
        spec = SweepSpec(
            axis=manifest["axis"]["name"], values=tuple(manifest["axis"]["values"]), base=base,
            schemes=tuple(manifest["schemes"]), trials=trials, seed=seed, access=tuple(manifest.get("access", ())),
        )
        return sweep_command(spec, out_dir, name=manifest.get("name"), threads=threads)
    raise ConfigError(f"Unknown manifest kind: {manifest['kind']}")
