import logging
import math
from typing import List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from channel import dbm_to_watts
from errors import ConfigError

logger = logging.getLogger(__name__)

__version__ = "0.3.0"

ALPHA_SUM_TOL = 1e-12


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    def problems(self) -> List[str]:
        return []

    @model_validator(mode="after")
    def _check_section(self):
        # runs per section, so one bad section does not hide another's problems
        found = self.problems()
        if found:
            raise ValueError("; ".join(found))
        return self


class Geometry(_Section):
    """Link distances and angles, stored in SI units"""

    d_su_m: float = Field(20_000.0, gt=0)
    d_sd_m: List[float] = Field(default_factory=lambda: [20_200.0, 20_100.0])
    d_ud_m: List[float] = Field(default_factory=lambda: [200.0, 100.0])
    uav_altitude_m: float = Field(200.0, gt=0)
    elevation_su_deg: float = Field(40.0, gt=0, le=90)
    elevation_sd_deg: float = Field(40.0, gt=0, le=90)
    carrier_freq_hz: float = Field(3.0e9, gt=0)

    def problems(self) -> List[str]:
        return [
            f"geometry.{name}: all distances must be > 0, got {getattr(self, name)}"
            for name in ("d_sd_m", "d_ud_m") if any(v <= 0 for v in getattr(self, name))
        ]

    @property
    def d_su_km(self) -> float:
        return self.d_su_m / 1000

    @property
    def carrier_freq_mhz(self) -> float:
        return self.carrier_freq_hz / 1e6

    @property
    def carrier_freq_ghz(self) -> float:
        return self.carrier_freq_hz / 1e9


class HapsPathLossParams(_Section):
    """Environment parameters of the HAPS LoS/NLoS path-loss model"""

    b1: float = 9.668
    b2: float = 0.547
    b3: float = -10.58
    clutter_loss_los_db: float = Field(0.0, ge=0)
    clutter_loss_nlos_db: float = Field(14.42, ge=0)
    atmo_gas_db: float = 10.0
    # None means 14.7 * elevation^-1.136, evaluated per link
    scintillation_db: Optional[float] = None
    building_entry_db: float = 10.0
    shadow_std_los_db: float = Field(0.0, ge=0)
    shadow_std_nlos_db: float = Field(0.0, ge=0)
    los_mode: Literal["blend", "bernoulli"] = "blend"
    direct_blockage_db: float = Field(0.0, ge=0)


class RicianParams(_Section):
    z_su: float = Field(10.0, ge=0)
    z_ud: float = Field(10.0, ge=0)
    z_sd: float = Field(10.0, ge=0)
    los_profile: Literal["ones", "ramp"] = "ones"
    los_phase_step: float = 0.0


class CsiErrorModel(_Section):
    """Estimation error on the HAPS -> device link only"""

    sigma_e_sq: float = Field(0.0, ge=0)
    relative: bool = False
    # independent_estimate: the fading draw is the receiver estimate and the true channel is estimate + error.
    # perturbed_estimate: the fading draw is the true channel and the estimate is channel - error.
    error_model: Literal["independent_estimate", "perturbed_estimate"] = "independent_estimate"


class HwiProfile(_Section):
    k_su_sq: float = Field(1e-6, ge=0)
    k_ud_sq: float = Field(1e-6, ge=0)
    k_sd_sq: float = Field(1e-6, ge=0)


class NomaAllocation(_Section):
    """Power fractions, largest first; the largest goes to the weakest device"""

    alpha: List[float] = Field(default_factory=lambda: [0.7, 0.3])

    def problems(self) -> List[str]:
        found = []
        if not self.alpha:
            return ["alloc.alpha: at least one fraction is required"]
        if any(a <= 0 for a in self.alpha):
            found.append(f"alloc.alpha: every fraction must be > 0, got {self.alpha}")
        total = math.fsum(self.alpha)
        if total > 1 + ALPHA_SUM_TOL:
            found.append(f"alloc.alpha: fractions exceed 1 (sum={total:.12g})")
        elif total < 1 - ALPHA_SUM_TOL:
            found.append(f"alloc.alpha: fractions sum to {total:.12g}, expected 1")
        if any(a <= b for a, b in zip(self.alpha, self.alpha[1:])):
            found.append(f"alloc.alpha: fractions must be strictly descending, got {self.alpha}")
        return found


class TrisSettings(_Section):
    mode: Literal["passive", "active"] = "active"
    rho: float = Field(4.0, gt=0)
    # None means the active-element noise equals the receiver noise floor
    sigma_r_sq_dbm: Optional[float] = None

    def problems(self) -> List[str]:
        if self.mode == "passive" and self.rho > 1:
            return [f"tris.mode=passive requires tris.rho <= 1, got tris.rho={self.rho}"]
        if self.mode == "active" and self.rho < 1:
            return [f"tris.mode=active requires tris.rho >= 1, got tris.rho={self.rho}"]
        return []

    def rho_for(self, mode: str) -> float:
        """Amplitude admissible for the given surface mode"""
        return min(self.rho, 1.0) if mode == "passive" else max(self.rho, 1.0)


class PowerConsumptionParams(_Section):
    p_ris_act_dbm: float = 5.0
    p_sw_dbm: float = 5.0
    p_dc_dbm: float = 5.0
    p_c_dbm: float = 5.0
    p_iotgd_dbm: float = 5.0

    @property
    def p_ris_act_w(self) -> float:
        return dbm_to_watts(self.p_ris_act_dbm)

    @property
    def p_sw_w(self) -> float:
        return dbm_to_watts(self.p_sw_dbm)

    @property
    def p_dc_w(self) -> float:
        return dbm_to_watts(self.p_dc_dbm)

    @property
    def p_c_w(self) -> float:
        return dbm_to_watts(self.p_c_dbm)

    @property
    def p_iotgd_w(self) -> float:
        return dbm_to_watts(self.p_iotgd_dbm)


class SystemConfig(_Section):
    """Full scenario: one HAPS with M antennas, one UAV, N TRIS elements, L devices"""

    m_antennas: int = Field(4, ge=1)
    n_elements: int = Field(30, ge=1)
    l_devices: int = Field(2, ge=1)
    p_t_dbm: float = 20.0
    p_u_dbm: float = 20.0
    noise_dbm: float = -94.0
    access: Literal["noma", "oma"] = "noma"
    sic_mode: Literal["sic", "paper-literal"] = "sic"
    geometry: Geometry = Field(default_factory=Geometry)
    rician: RicianParams = Field(default_factory=RicianParams)
    haps_pl: HapsPathLossParams = Field(default_factory=HapsPathLossParams)
    hwi: HwiProfile = Field(default_factory=HwiProfile)
    csi: CsiErrorModel = Field(default_factory=CsiErrorModel)
    tris: TrisSettings = Field(default_factory=TrisSettings)
    alloc: NomaAllocation = Field(default_factory=NomaAllocation)
    power: PowerConsumptionParams = Field(default_factory=PowerConsumptionParams)

    def problems(self) -> List[str]:
        return _device_count_problems(self.l_devices, {
            "geometry.d_sd_m": self.geometry.d_sd_m,
            "geometry.d_ud_m": self.geometry.d_ud_m,
            "alloc.alpha": self.alloc.alpha,
        })

    @property
    def p_t_w(self) -> float:
        return dbm_to_watts(self.p_t_dbm)

    @property
    def p_u_w(self) -> float:
        return dbm_to_watts(self.p_u_dbm)

    @property
    def noise_w(self) -> float:
        return dbm_to_watts(self.noise_dbm)

    @property
    def sigma_r_sq_w(self) -> float:
        if self.tris.sigma_r_sq_dbm is None:
            return self.noise_w
        return dbm_to_watts(self.tris.sigma_r_sq_dbm)

    def with_overrides(self, overrides: dict) -> "SystemConfig":
        """Copy with dotted-key overrides applied, e.g. {"hwi.k_su_sq": 0.01}"""
        data = self.model_dump()
        for dotted, value in overrides.items():
            node = data
            *parents, leaf = dotted.split(".")
            for key in parents:
                node = node.get(key) if isinstance(node, dict) else None
            if not isinstance(node, dict) or leaf not in node:
                raise ConfigError(f"Unknown configuration field: {dotted}")
            node[leaf] = value
        return build_config(data, source="<overrides>")


def _device_count_problems(l_devices: int, per_device: dict) -> List[str]:
    found = []
    for name, values in per_device.items():
        if len(values) != l_devices:
            what = "fractions" if name == "alloc.alpha" else "entries"
            found.append(f"{name}: expected {l_devices} {what} (one per device), got {len(values)}")
    return found


def _raw_device_count_problems(data: dict) -> List[str]:
    """Per-device length checks on the unvalidated mapping.

    Field errors stop pydantic before the model-level check runs, so these are
    recomputed here wherever the raw values are usable.
    """
    l_devices = data.get("l_devices", SystemConfig.model_fields["l_devices"].default)
    geometry, alloc = data.get("geometry") or {}, data.get("alloc") or {}
    if type(l_devices) is not int or l_devices < 1 or not isinstance(geometry, dict) or not isinstance(alloc, dict):
        return []
    geo_defaults, alloc_defaults = Geometry.model_construct(), NomaAllocation.model_construct()
    per_device = {
        "geometry.d_sd_m": geometry.get("d_sd_m", geo_defaults.d_sd_m),
        "geometry.d_ud_m": geometry.get("d_ud_m", geo_defaults.d_ud_m),
        "alloc.alpha": alloc.get("alpha", alloc_defaults.alpha),
    }
    return _device_count_problems(l_devices, {k: v for k, v in per_device.items() if isinstance(v, list)})


def _format_validation_error(err: ValidationError) -> List[str]:
    problems = []
    for item in err.errors():
        loc = ".".join(str(p) for p in item["loc"])
        msg = item["msg"]
        if not msg.startswith("Value error, "):
            problems.append(f"{loc}: {msg}" if loc else msg)
            continue
        # our own checks name their fields already
        for part in msg[len("Value error, "):].split("; "):
            part = part.strip()
            problems.append(part if not loc or part.startswith(f"{loc}.") else f"{loc}: {part}")
    return problems


def build_config(data: dict, source: str = "<dict>") -> SystemConfig:
    try:
        return SystemConfig.model_validate(data or {})
    except ValidationError as e:
        problems = _format_validation_error(e)
        if isinstance(data, dict):
            problems.extend(p for p in _raw_device_count_problems(data) if p not in problems)
        logger.debug(f"Config {source} rejected: {problems}")
        raise ConfigError(f"Invalid configuration in {source}: " + "; ".join(problems), problems) from e


def parse_config(path) -> SystemConfig:
    """Load and validate a YAML scenario file; missing keys take the defaults"""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"Could not parse {path}{where}: {getattr(e, 'problem', e)}") from e
    except OSError as e:
        raise ConfigError(f"Could not read {path}: {e}") from e

    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"Could not parse {path}: top level must be a mapping, got {type(data).__name__}")

    config = build_config(data or {}, source=str(path))
    logger.info(f"Loaded configuration from {path} (M={config.m_antennas}, N={config.n_elements}, L={config.l_devices})")
    return config
