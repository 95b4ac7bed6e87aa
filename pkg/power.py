from errors import PowerModelError
from models import SystemConfig


def relay_overhead_w(scheme: str, cfg: SystemConfig) -> float:
    """Power drawn by whatever sits on the UAV (0 for the direct link)"""
    p = cfg.power
    n = cfg.n_elements
    if scheme == "af":
        return cfg.p_u_w + p.p_c_w
    if scheme == "passive_tris":
        return n * p.p_sw_w
    if scheme == "active_tris":
        return p.p_ris_act_w + n * p.p_sw_w + n * p.p_dc_w
    if scheme == "direct":
        return 0.0
    raise PowerModelError(f"Unknown scheme for the power model: {scheme}")


def total_power_w(scheme: str, cfg: SystemConfig) -> float:
    """P_t + relay overhead + per-device dissipation, summed in watts"""
    return cfg.p_t_w + relay_overhead_w(scheme, cfg) + cfg.l_devices * cfg.power.p_iotgd_w


def energy_efficiency(sum_rate_bpshz: float, total_power_w: float) -> float:
    if total_power_w <= 0:
        raise PowerModelError(f"Total power must be > 0 W, got {total_power_w}")
    return sum_rate_bpshz / total_power_w
