"""Large-scale path loss, Rician small-scale fading and CSI-error sampling.

All sampling functions take an explicit ``numpy.random.Generator`` and are pure
functions of (inputs, generator state).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Tuple

import numpy as np

from errors import ChannelDomainError

if TYPE_CHECKING:
    from models import CsiErrorModel, HapsPathLossParams, RicianParams, SystemConfig

logger = logging.getLogger(__name__)

FSPL_CONSTANT_DB = 32.45
UAV_PL_INTERCEPT_DB = 28.0
UAV_PL_DISTANCE_SLOPE = 22.0
UAV_SHADOW_STD_SCALE_DB = 4.64
UAV_SHADOW_STD_DECAY = 0.0066
SCINTILLATION_SCALE_DB = 14.7
SCINTILLATION_EXPONENT = -1.136

# One independent child stream per link family, so the draws of one link never
# depend on the dimensions of another (paired comparisons across N, M, schemes).
STREAMS = ("shadowing", "haps_uav", "uav_ground", "direct", "csi")


def db_to_linear(x_db: float) -> float:
    return 10 ** (x_db / 10)


def linear_to_db(x: float) -> float:
    return 10 * math.log10(x)


def dbm_to_watts(x_dbm: float) -> float:
    return db_to_linear(x_dbm) / 1000


def fspl_db(d_km: float, f_mhz: float) -> float:
    """Free-space loss with distance in km and frequency in MHz"""
    if d_km <= 0 or f_mhz <= 0:
        raise ChannelDomainError(f"FSPL needs positive distance and frequency, got d={d_km} km, f={f_mhz} MHz")
    return FSPL_CONSTANT_DB + 20 * math.log10(f_mhz) + 20 * math.log10(d_km)


def los_probability(elevation_deg: float, params: "HapsPathLossParams") -> float:
    """b1*elev^b2 + b3 read as a percentage and clamped to [0, 1]"""
    if not 0 < elevation_deg <= 90:
        raise ChannelDomainError(f"Elevation must lie in (0, 90] degrees, got {elevation_deg}")
    raw = params.b1 * elevation_deg ** params.b2 + params.b3
    return min(max(raw / 100, 0.0), 1.0)


def scintillation_db(elevation_deg: float, params: "HapsPathLossParams") -> float:
    if params.scintillation_db is not None:
        return params.scintillation_db
    return SCINTILLATION_SCALE_DB * elevation_deg ** SCINTILLATION_EXPONENT


def uav_shadow_std_db(altitude_m: float) -> float:
    return UAV_SHADOW_STD_SCALE_DB * math.exp(-UAV_SHADOW_STD_DECAY * altitude_m)


def pathloss_uav_ground_db(d_m: float, f_ghz: float, altitude_m: float,
                           rng: Optional[np.random.Generator] = None) -> float:
    """Urban UAV -> ground loss (d in metres, f in GHz); rng=None disables shadowing"""
    if d_m <= 0 or f_ghz <= 0:
        raise ChannelDomainError(f"UAV path loss needs positive distance and frequency, got d={d_m} m, f={f_ghz} GHz")
    loss = UAV_PL_INTERCEPT_DB + UAV_PL_DISTANCE_SLOPE * math.log10(d_m) + 20 * math.log10(f_ghz)
    if rng is not None:
        loss += rng.normal(0.0, uav_shadow_std_db(altitude_m))
    return loss


def pathloss_haps_db(d_km: float, f_mhz: float, elevation_deg: float, params: "HapsPathLossParams",
                     rng: Optional[np.random.Generator] = None, extra_db: float = 0.0) -> float:
    """LoS/NLoS HAPS loss; rng=None gives the deterministic (chi=0, blended) value"""
    p_los = los_probability(elevation_deg, params)
    free_space = fspl_db(d_km, f_mhz)
    attenuation = params.atmo_gas_db + scintillation_db(elevation_deg, params) + params.building_entry_db + extra_db

    chi_los = chi_nlos = 0.0
    if rng is not None:
        chi_los = rng.normal(0.0, params.shadow_std_los_db)
        chi_nlos = rng.normal(0.0, params.shadow_std_nlos_db)

    zeta_los = free_space + params.clutter_loss_los_db + chi_los + attenuation
    zeta_nlos = free_space + params.clutter_loss_nlos_db + chi_nlos + attenuation

    if params.los_mode == "bernoulli" and rng is not None:
        return zeta_los if rng.random() < p_los else zeta_nlos
    return p_los * zeta_los + (1 - p_los) * zeta_nlos


def los_component(rows: int, cols: int, params: Optional["RicianParams"] = None) -> np.ndarray:
    """Unit-modulus LoS matrix: all ones, or a phase ramp step*(r + c)"""
    if params is None or params.los_profile == "ones":
        return np.ones((rows, cols), dtype=complex)
    r = np.arange(rows)[:, None]
    c = np.arange(cols)[None, :]
    return np.exp(1j * params.los_phase_step * (r + c))


def sample_rician(pathloss_db: float, z_factor: float, rows: int, cols: int,
                  rng: np.random.Generator, los: Optional[np.ndarray] = None) -> np.ndarray:
    if rows < 1 or cols < 1:
        raise ChannelDomainError(f"Channel dimensions must be >= 1, got {rows}x{cols}")
    if z_factor < 0:
        raise ChannelDomainError(f"Rician factor must be >= 0, got {z_factor}")

    if math.isinf(z_factor):
        los_weight, nlos_weight = 1.0, 0.0
    else:
        los_weight = math.sqrt(z_factor / (z_factor + 1))
        nlos_weight = math.sqrt(1 / (z_factor + 1))

    if los is None:
        los = np.ones((rows, cols), dtype=complex)

    # Real/imaginary pairs interleaved so a smaller array is a prefix of a larger one
    g = rng.standard_normal((rows, cols, 2))
    nlos = (g[..., 0] + 1j * g[..., 1]) / math.sqrt(2)

    gain = math.sqrt(db_to_linear(-pathloss_db))
    return gain * (los_weight * los + nlos_weight * nlos)


def apply_csi_error(h_true: np.ndarray, model: "CsiErrorModel", rng: np.random.Generator,
                    pathloss_db: Optional[float] = None) -> Tuple[np.ndarray, float]:
    """Return the receiver's estimate h_true - dh with dh ~ CN(0, var) and the variance var"""
    variance = model.sigma_e_sq
    if variance < 0:
        raise ChannelDomainError(f"CSI error variance must be >= 0, got {variance}")
    if model.relative:
        if pathloss_db is None:
            raise ChannelDomainError("Relative CSI error needs the link path loss")
        variance = variance * db_to_linear(-pathloss_db)

    h_true = np.asarray(h_true, dtype=complex)
    if variance == 0:
        return h_true.copy(), 0.0

    g = rng.standard_normal(h_true.shape + (2,))
    delta = math.sqrt(variance / 2) * (g[..., 0] + 1j * g[..., 1])
    return h_true - delta, variance


@dataclass(frozen=True)
class ChannelRealization:
    """One Monte-Carlo draw of every link, large-scale loss already applied"""

    h_su_af: np.ndarray     # (M,)   HAPS -> UAV, AF relay
    H_su: np.ndarray        # (N, M) HAPS -> TRIS
    h_ud_af: np.ndarray     # (L,)   UAV -> device, AF relay
    h_ud_ris: np.ndarray    # (L, N) TRIS -> device
    h_sd_hat: np.ndarray    # (L, M) estimated HAPS -> device
    h_sd: np.ndarray        # (L, M) true HAPS -> device
    csi_err_var: np.ndarray  # (L,)
    pl_su_db: float
    pl_ud_db: np.ndarray
    pl_sd_db: np.ndarray

    @property
    def dims(self) -> Tuple[int, int, int]:
        n, m = self.H_su.shape
        return m, n, self.h_sd_hat.shape[0]

    def check(self, cfg: "SystemConfig"):
        expected = (cfg.m_antennas, cfg.n_elements, cfg.l_devices)
        if self.dims != expected:
            raise ChannelDomainError(f"Realization dimensions (M, N, L)={self.dims} do not match config {expected}")
        for name in ("h_su_af", "H_su", "h_ud_af", "h_ud_ris", "h_sd_hat", "h_sd", "csi_err_var"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ChannelDomainError(f"Non-finite entries in {name}")


def draw_realization(cfg: "SystemConfig", rng: np.random.Generator) -> ChannelRealization:
    """Draw path losses, fading and CSI error for every link of the scenario"""
    streams = dict(zip(STREAMS, rng.spawn(len(STREAMS))))
    geo = cfg.geometry
    m, n, l_dev = cfg.m_antennas, cfg.n_elements, cfg.l_devices

    pl_su = pathloss_haps_db(geo.d_su_km, geo.carrier_freq_mhz, geo.elevation_su_deg, cfg.haps_pl,
                             rng=streams["shadowing"])
    pl_sd = np.array([
        pathloss_haps_db(d / 1000, geo.carrier_freq_mhz, geo.elevation_sd_deg, cfg.haps_pl,
                         rng=streams["shadowing"], extra_db=cfg.haps_pl.direct_blockage_db)
        for d in geo.d_sd_m
    ])
    pl_ud = np.array([
        pathloss_uav_ground_db(d, geo.carrier_freq_ghz, geo.uav_altitude_m, rng=streams["shadowing"])
        for d in geo.d_ud_m
    ])

    z = cfg.rician
    haps_uav = streams["haps_uav"]
    h_su_af = sample_rician(pl_su, z.z_su, 1, m, haps_uav, los_component(1, m, z))[0]
    H_su = sample_rician(pl_su, z.z_su, n, m, haps_uav, los_component(n, m, z))

    uav_ground = streams["uav_ground"]
    h_ud_af = np.array([sample_rician(pl, z.z_ud, 1, 1, uav_ground)[0, 0] for pl in pl_ud])
    h_ud_ris = np.vstack([sample_rician(pl, z.z_ud, 1, n, uav_ground, los_component(1, n, z)) for pl in pl_ud])

    h_sd_hat = np.empty((l_dev, m), dtype=complex)
    h_sd = np.empty((l_dev, m), dtype=complex)
    csi_err_var = np.empty(l_dev)
    independent = cfg.csi.error_model == "independent_estimate"
    for i, pl in enumerate(pl_sd):
        drawn = sample_rician(pl, z.z_sd, 1, m, streams["direct"], los_component(1, m, z))[0]
        other, csi_err_var[i] = apply_csi_error(drawn, cfg.csi, streams["csi"], pathloss_db=pl)
        # the error is circularly symmetric, so drawn - error and drawn + error have the same law
        h_sd_hat[i], h_sd[i] = (drawn, other) if independent else (other, drawn)

    realization = ChannelRealization(
        h_su_af=h_su_af, H_su=H_su, h_ud_af=h_ud_af, h_ud_ris=h_ud_ris, h_sd_hat=h_sd_hat, h_sd=h_sd,
        csi_err_var=csi_err_var, pl_su_db=pl_su, pl_ud_db=pl_ud, pl_sd_db=pl_sd,
    )
    realization.check(cfg)
    logger.debug(f"Drew realization: PL_su={pl_su:.2f} dB, PL_sd={np.round(pl_sd, 2)}, PL_ud={np.round(pl_ud, 2)}")
    return realization
