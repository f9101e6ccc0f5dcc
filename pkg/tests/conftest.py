import numpy as np
import pytest

from ruralmimo.scenario import validate

BASELINE_HTBS = dict(
    carrier_frequency_mhz=700,
    bandwidth_mhz=10,
    duplex="FDD",
    bs_type="HTBS",
    bs_height_m=150,
    user_height_m=8,
    num_users=20,
    m_horizontal=32,
    m_vertical=8,
    dual_polarized=True,
    eirp_max_dbm=40,
    power_ratio_delta_db=20,
)


@pytest.fixture
def htbs_doc():
    return dict(BASELINE_HTBS)


@pytest.fixture
def htbs():
    return validate(BASELINE_HTBS)


@pytest.fixture
def small_scenario():
    """Cheap scenario for Monte Carlo plumbing tests."""
    return validate({**BASELINE_HTBS, "m_horizontal": 4, "m_vertical": 2, "num_users": 4})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
