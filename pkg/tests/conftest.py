import pytest

from cdistab import (
    LyapunovContext,
    ModifiedSaturation,
    arctan_saturation,
    standard_saturation,
    tanh_saturation,
)


@pytest.fixture(scope="session")
def std_sat():
    return standard_saturation()


@pytest.fixture(scope="session")
def tanh_sat():
    return tanh_saturation()


@pytest.fixture(scope="session")
def arctan_norm_sat():
    return arctan_saturation().normalized()


@pytest.fixture(scope="session")
def std_ms(std_sat):
    return ModifiedSaturation(std_sat)


@pytest.fixture(scope="session")
def tanh_ms(tanh_sat):
    return ModifiedSaturation(tanh_sat)


@pytest.fixture(scope="session")
def arctan_ms(arctan_norm_sat):
    return ModifiedSaturation(arctan_norm_sat)


@pytest.fixture(scope="session")
def std_ctx(std_ms):
    return LyapunovContext(std_ms)


@pytest.fixture(scope="session")
def tanh_ctx(tanh_ms):
    return LyapunovContext(tanh_ms)
