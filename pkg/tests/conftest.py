import numpy as np
import pytest

from stableop.measure import OperatorSpec, SphericalMeasure
from stableop.modulus import Modulus, upgrade_modulus
from stableop.zeta import build_zeta_pub

IOTA = 1.0 / 6.0


@pytest.fixture(scope="session")
def omega_power():
    return Modulus.power(0.3)


@pytest.fixture(scope="session")
def omega_logpow():
    return Modulus.log_power(2.0)


@pytest.fixture(scope="session")
def upgraded_power(omega_power):
    return upgrade_modulus(omega_power, IOTA)


@pytest.fixture(scope="session")
def upgraded_logpow(omega_logpow):
    return upgrade_modulus(omega_logpow, IOTA)


@pytest.fixture(scope="session")
def zeta_pub_06(upgraded_power):
    return build_zeta_pub(upgraded_power, IOTA, 1.0, 0.6)


@pytest.fixture(scope="session")
def nopub_zeta_06(upgraded_power):
    from stableop.zeta import build_zeta_nopub
    return build_zeta_nopub(upgraded_power, 0.6, IOTA, 1.0)


@pytest.fixture(scope="session")
def uniform_1d():
    return SphericalMeasure.uniform(1, 1.0)


@pytest.fixture(scope="session")
def uniform_2d():
    return SphericalMeasure.uniform(2, 1.0)


@pytest.fixture(scope="session")
def axes_2d():
    return SphericalMeasure.axes(2, 1.0)
