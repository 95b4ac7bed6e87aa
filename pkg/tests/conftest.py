import numpy as np
import pytest

from channel import ChannelRealization
from models import SystemConfig, build_config


@pytest.fixture
def default_cfg():
    return SystemConfig()


@pytest.fixture
def single_device_cfg():
    """One device, ideal hardware, perfect CSI, pure line-of-sight fading"""
    return build_config({
        "l_devices": 1,
        "geometry": {"d_sd_m": [20_200.0], "d_ud_m": [200.0]},
        "alloc": {"alpha": [1.0]},
        "hwi": {"k_su_sq": 0.0, "k_ud_sq": 0.0, "k_sd_sq": 0.0},
        "rician": {"z_su": float("inf"), "z_ud": float("inf"), "z_sd": float("inf")},
    })


def make_realization(h_su_af, H_su, h_ud_af, h_ud_ris, h_sd_hat, csi_err_var=None):
    h_sd_hat = np.atleast_2d(np.asarray(h_sd_hat, dtype=complex))
    l_dev = h_sd_hat.shape[0]
    return ChannelRealization(
        h_su_af=np.asarray(h_su_af, dtype=complex),
        H_su=np.atleast_2d(np.asarray(H_su, dtype=complex)),
        h_ud_af=np.asarray(h_ud_af, dtype=complex),
        h_ud_ris=np.atleast_2d(np.asarray(h_ud_ris, dtype=complex)),
        h_sd_hat=h_sd_hat,
        h_sd=h_sd_hat.copy(),
        csi_err_var=np.zeros(l_dev) if csi_err_var is None else np.asarray(csi_err_var, dtype=float),
        pl_su_db=0.0,
        pl_ud_db=np.zeros(l_dev),
        pl_sd_db=np.zeros(l_dev),
    )
