"""Antenna selection, TRIS phase configuration and per-device SINR for every scheme.

Distortion and estimation-error noises enter as variance terms, so every SINR is
deterministic once a channel realization is fixed.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from channel import ChannelRealization
from errors import SchemeError
from models import SystemConfig

logger = logging.getLogger(__name__)

SCHEMES = ("direct", "af", "passive_tris", "active_tris")
TRIS_SCHEMES = ("passive_tris", "active_tris")
SIC_MODES = ("sic", "paper-literal")


def wrap_phase(x):
    """Map angles to [-pi, pi)"""
    return (np.asarray(x) + np.pi) % (2 * np.pi) - np.pi


@dataclass(frozen=True)
class TrisState:
    rho: float
    theta: np.ndarray
    mode: str = "passive"
    sigma_r_sq: float = 0.0

    def __post_init__(self):
        if self.mode not in ("passive", "active"):
            raise SchemeError(f"Unknown TRIS mode: {self.mode}")
        problems = []
        if self.rho <= 0:
            problems.append(f"rho must be > 0, got {self.rho}")
        if self.mode == "passive" and self.rho > 1:
            problems.append(f"passive TRIS needs rho <= 1, got rho={self.rho}")
        if self.mode == "passive" and self.sigma_r_sq != 0:
            problems.append(f"passive TRIS adds no thermal noise, got sigma_r_sq={self.sigma_r_sq}")
        # rho == 1 is the unity-gain boundary of an active surface
        if self.mode == "active" and self.rho < 1:
            problems.append(f"active TRIS needs rho >= 1, got rho={self.rho}")
        if self.sigma_r_sq < 0:
            problems.append(f"sigma_r_sq must be >= 0, got {self.sigma_r_sq}")
        theta = np.asarray(self.theta, dtype=float)
        if theta.size and (theta.min() < -np.pi or theta.max() >= np.pi):
            problems.append("theta must lie in [-pi, pi)")
        if problems:
            raise SchemeError("Inconsistent TRIS state: " + "; ".join(problems))

    @property
    def n_elements(self) -> int:
        return int(np.asarray(self.theta).size)

    @property
    def coefficients(self) -> np.ndarray:
        """Diagonal of the transmission matrix psi"""
        return self.rho * np.exp(1j * np.asarray(self.theta))


@dataclass(frozen=True)
class SinrBreakdown:
    sinr: float
    numerator: float
    interference: float
    hwi_distortion: float
    csi_term: float
    noise_terms: float
    ris_noise: float = 0.0

    @property
    def denominator(self) -> float:
        return self.interference + self.hwi_distortion + self.csi_term + self.noise_terms + self.ris_noise


@dataclass(frozen=True)
class LinkBudget:
    """Per-device powers before NOMA fractions are applied"""

    signal: float
    hwi_distortion: float
    csi_term: float
    noise_terms: float
    ris_noise: float = 0.0


@dataclass(frozen=True)
class Ordering:
    order: np.ndarray      # device indices, weakest first
    fractions: np.ndarray  # power fraction per device index


def tas_select(H) -> int:
    """Index of the transmit antenna (column) with the largest 2-norm; ties go to the lowest index"""
    H = np.atleast_2d(np.asarray(H))
    if H.size == 0:
        raise SchemeError("Antenna selection needs at least one antenna")
    return int(np.argmax(np.linalg.norm(H, axis=0)))


def af_amplification(h_su_selected: complex, p_t: float, sigma_sq: float) -> float:
    if sigma_sq <= 0:
        raise SchemeError(f"AF gain needs positive noise power, got {sigma_sq}")
    if p_t < 0:
        raise SchemeError(f"Transmit power must be >= 0, got {p_t}")
    return math.sqrt(1 / (abs(h_su_selected) ** 2 * p_t + sigma_sq))


def configure_tris_phases(h_su_col, h_ud, rho: float, mode: str = None, sigma_r_sq: float = 0.0) -> TrisState:
    """Co-phase every cascade term h_su,n * h_ud,n so they add coherently"""
    h_su_col = np.ravel(np.asarray(h_su_col))
    h_ud = np.ravel(np.asarray(h_ud))
    if h_su_col.size != h_ud.size or h_su_col.size == 0:
        raise SchemeError(f"TRIS channels must have equal non-zero length, got {h_su_col.size} and {h_ud.size}")
    if mode is None:
        mode = "passive" if rho <= 1 else "active"
    theta = wrap_phase(-(np.angle(h_su_col) + np.angle(h_ud)))
    return TrisState(rho=rho, theta=theta, mode=mode, sigma_r_sq=sigma_r_sq)


def cascade_gain(h_su_col, tris: TrisState, h_ud) -> float:
    """|sum_n rho e^{j theta_n} h_su,n h_ud,n|^2"""
    h_su_col = np.ravel(np.asarray(h_su_col))
    h_ud = np.ravel(np.asarray(h_ud))
    if not (h_su_col.size == h_ud.size == tris.n_elements):
        raise SchemeError(
            f"TRIS dimension mismatch: h_su={h_su_col.size}, h_ud={h_ud.size}, elements={tris.n_elements}"
        )
    return float(abs(np.sum(tris.coefficients * h_su_col * h_ud)) ** 2)


def check_surface_amplitude(cfg: SystemConfig, scheme: str) -> float:
    """Amplitude a TRIS scheme will run with, logged when it differs from tris.rho"""
    if scheme not in TRIS_SCHEMES:
        raise SchemeError(f"{scheme} does not use a TRIS")
    mode = "passive" if scheme == "passive_tris" else "active"
    rho = cfg.tris.rho_for(mode)
    if rho != cfg.tris.rho:
        # a unit-amplitude passive baseline next to an amplifying surface is the usual comparison
        level = logging.WARNING if mode == "active" else logging.DEBUG
        logger.log(level, f"{scheme}: tris.rho={cfg.tris.rho} is outside the {mode} range, using rho={rho}")
    return rho


def tris_state_for(cfg: SystemConfig, scheme: str, real: ChannelRealization) -> TrisState:
    """Surface configuration for one trial.

    The configured rho is limited to the scheme's admissible range. One phase
    vector serves every device, so it is aligned to the device whose best
    possible cascade is weakest.
    """
    if scheme not in TRIS_SCHEMES:
        raise SchemeError(f"{scheme} does not use a TRIS")
    mode = "passive" if scheme == "passive_tris" else "active"
    rho = cfg.tris.rho_for(mode)
    sigma_r_sq = cfg.sigma_r_sq_w if mode == "active" else 0.0

    h_su_col = real.H_su[:, tas_select(real.H_su)]
    coherent = np.abs(real.h_ud_ris) @ np.abs(h_su_col)
    target = int(np.argmin(coherent))
    return configure_tris_phases(h_su_col, real.h_ud_ris[target], rho, mode=mode, sigma_r_sq=sigma_r_sq)


def _direct_gain(real: ChannelRealization, device: int, use_tas: bool = True) -> float:
    h_sd = real.h_sd_hat[device]
    j = tas_select(h_sd) if use_tas else 0
    return float(abs(h_sd[j]) ** 2)


def _csi_term(real: ChannelRealization, cfg: SystemConfig, device: int) -> float:
    return float(real.csi_err_var[device]) * cfg.p_t_w * (1 + cfg.hwi.k_sd_sq)


def af_budget(real: ChannelRealization, cfg: SystemConfig, device: int) -> LinkBudget:
    p_t, p_u, noise = cfg.p_t_w, cfg.p_u_w, cfg.noise_w
    h_su = real.h_su_af[tas_select(real.h_su_af)]
    lam_sq = af_amplification(h_su, p_t, noise) ** 2
    g_su = abs(h_su) ** 2
    g_ud = abs(real.h_ud_af[device]) ** 2
    g_sd = _direct_gain(real, device)

    relay = lam_sq * p_u * p_t * g_su * g_ud
    return LinkBudget(
        signal=relay + g_sd * p_t,
        hwi_distortion=relay * cfg.hwi.k_su_sq + g_ud * cfg.hwi.k_ud_sq * p_u + g_sd * cfg.hwi.k_sd_sq * p_t,
        csi_term=_csi_term(real, cfg, device),
        noise_terms=(1 + g_ud * lam_sq * p_u) * noise,
    )


def tris_budget(real: ChannelRealization, tris: TrisState, cfg: SystemConfig, device: int) -> LinkBudget:
    p_t = cfg.p_t_w
    h_su_col = real.H_su[:, tas_select(real.H_su)]
    h_ud = real.h_ud_ris[device]
    g_cascade = cascade_gain(h_su_col, tris, h_ud)
    g_sd = _direct_gain(real, device)

    return LinkBudget(
        signal=g_cascade * p_t + g_sd * p_t,
        hwi_distortion=g_cascade * p_t * cfg.hwi.k_su_sq + p_t * g_sd * cfg.hwi.k_sd_sq,
        csi_term=_csi_term(real, cfg, device),
        noise_terms=cfg.noise_w,
        ris_noise=tris.sigma_r_sq * float(np.sum(np.abs(tris.coefficients * h_ud) ** 2)),
    )


def direct_budget(real: ChannelRealization, cfg: SystemConfig, device: int) -> LinkBudget:
    """Single-antenna HAPS serving the device with no UAV"""
    p_t = cfg.p_t_w
    g_sd = _direct_gain(real, device, use_tas=False)
    return LinkBudget(
        signal=g_sd * p_t,
        hwi_distortion=g_sd * cfg.hwi.k_sd_sq * p_t,
        csi_term=_csi_term(real, cfg, device),
        noise_terms=cfg.noise_w,
    )


def scheme_budgets(scheme: str, real: ChannelRealization, cfg: SystemConfig, tris: TrisState = None) -> List[LinkBudget]:
    devices = range(cfg.l_devices)
    if scheme == "af":
        return [af_budget(real, cfg, i) for i in devices]
    if scheme in TRIS_SCHEMES:
        if tris is None:
            raise SchemeError(f"{scheme} needs a configured TRIS state")
        return [tris_budget(real, tris, cfg, i) for i in devices]
    if scheme == "direct":
        return [direct_budget(real, cfg, i) for i in devices]
    raise SchemeError(f"Unknown scheme: {scheme}")


def decoding_fractions(device: int, fractions: Sequence[float], sic_mode: str) -> Tuple[float, float]:
    """(fraction decoded, fraction still interfering) for one device"""
    fractions = np.asarray(fractions, dtype=float)
    if sic_mode == "sic":
        own = fractions[device]
        return float(own), float(np.sum(fractions[fractions < own]))
    if sic_mode == "paper-literal":
        k = int(np.argmax(fractions))
        return float(fractions[k]), float(np.sum(np.delete(fractions, k)))
    raise SchemeError(f"Unknown SIC mode: {sic_mode}")


def assemble_sinr(budget: LinkBudget, decoded: float, interfering: float) -> SinrBreakdown:
    numerator = decoded * budget.signal
    interference = interfering * budget.signal
    denominator = interference + budget.hwi_distortion + budget.csi_term + budget.noise_terms + budget.ris_noise
    if denominator <= 0:
        raise SchemeError("SINR denominator must be positive; check the noise power")
    return SinrBreakdown(
        sinr=numerator / denominator,
        numerator=numerator,
        interference=interference,
        hwi_distortion=budget.hwi_distortion,
        csi_term=budget.csi_term,
        noise_terms=budget.noise_terms,
        ris_noise=budget.ris_noise,
    )


def _check_device(cfg: SystemConfig, device: int, fractions: Sequence[float]):
    if not 0 <= device < cfg.l_devices or len(fractions) != cfg.l_devices:
        raise SchemeError(f"Device {device} / {len(fractions)} fractions inconsistent with L={cfg.l_devices}")


def sinr_af(real: ChannelRealization, cfg: SystemConfig, device: int, fractions: Sequence[float],
            sic_mode: str = None) -> SinrBreakdown:
    _check_device(cfg, device, fractions)
    decoded, interfering = decoding_fractions(device, fractions, sic_mode or cfg.sic_mode)
    return assemble_sinr(af_budget(real, cfg, device), decoded, interfering)


def sinr_tris(real: ChannelRealization, tris: TrisState, cfg: SystemConfig, device: int,
              fractions: Sequence[float], sic_mode: str = None) -> SinrBreakdown:
    _check_device(cfg, device, fractions)
    decoded, interfering = decoding_fractions(device, fractions, sic_mode or cfg.sic_mode)
    return assemble_sinr(tris_budget(real, tris, cfg, device), decoded, interfering)


def order_devices_and_allocate(gains: Sequence[float], alpha: Sequence[float]) -> Ordering:
    """Weakest device first; alpha (largest first) handed out in that order"""
    gains = np.asarray(gains, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if gains.size != alpha.size:
        raise SchemeError(f"{gains.size} channel gains but {alpha.size} power fractions")
    order = np.argsort(gains, kind="stable")
    fractions = np.empty_like(alpha)
    fractions[order] = alpha
    return Ordering(order=order, fractions=fractions)


def device_rates(sinrs: Sequence[float]) -> np.ndarray:
    sinrs = np.asarray(sinrs, dtype=float)
    if np.any(sinrs < 0):
        raise SchemeError(f"SINR must be >= 0, got {sinrs}")
    return np.log1p(sinrs) / math.log(2)


def sum_rate(sinrs: Sequence[float]) -> float:
    return float(np.sum(device_rates(sinrs)))


def oma_rates(sinrs_full: Sequence[float], l_devices: int) -> np.ndarray:
    """TDMA: each device owns 1/L of the time at full power"""
    if l_devices < 1:
        raise SchemeError(f"OMA needs at least one device, got L={l_devices}")
    return device_rates(sinrs_full) / l_devices
