import numpy as np
import pytest

from stableop.modulus import Modulus, upgrade_modulus
from stableop.zeta import (ZetaProfile, a_s_threshold, build_zeta_nopub,
                           build_zeta_pub, check_zeta, f_inverse,
                           touching_function_params, touching_gap)

IOTA = 1.0 / 6.0


def test_f_inverse_inverts(omega_power):
    # f(t) = t omega(t) = t^1.3 for the power modulus
    for y in (1e-6, 1e-3, 0.1):
        t = f_inverse(omega_power, y)
        assert t * float(omega_power(np.array([t]))[0]) == pytest.approx(
            y, rel=1e-8)
        assert t == pytest.approx(y ** (1.0 / 1.3), rel=1e-8)


def test_build_zeta_requires_upgrade(omega_power):
    with pytest.raises(ValueError):
        build_zeta_pub(omega_power, IOTA, 1.0, 0.6)


@pytest.mark.parametrize("s", [0.3, 0.6, 0.9])
def test_pub_profile_checks(upgraded_power, s):
    z = build_zeta_pub(upgraded_power, IOTA, 1.0, s)
    assert z.t0 > 0
    rep = check_zeta(z)
    bad = {k: v for k, v in rep.items()
           if isinstance(v, dict) and not v.get("ok", True)}
    assert not bad, bad


def test_pub_profile_logpow(upgraded_logpow):
    z = build_zeta_pub(upgraded_logpow, IOTA, 1.0, 0.5)
    rep = check_zeta(z)
    bad = {k: v for k, v in rep.items()
           if isinstance(v, dict) and not v.get("ok", True)}
    assert not bad, bad


def test_touching_constraint_and_gap(zeta_pub_06):
    z = zeta_pub_06
    s = 0.6
    for t in np.geomspace(1e-3, z.t0 * 0.9, 5):
        a, kappa = touching_function_params(z, s, float(t))
        assert kappa * (1.0 - a) ** s == pytest.approx(1.0, abs=1e-10)
        r = np.concatenate([np.linspace(1e-4, 1.0, 200),
                            np.linspace(1.0001, 1.1, 60)])
        rep = touching_gap(z, s, float(t), r)
        assert rep["gap"].min() >= -1e-12
        assert rep["claimB_ratio_inf"] > 0
        assert rep["constraint_residual"] <= 1e-10


def test_a_s_threshold_bounds():
    for s in (0.55, 0.7, 0.9):
        a = a_s_threshold(s, IOTA)
        assert 0 < a < 1


def test_nopub_profile(nopub_zeta_06):
    z = nopub_zeta_06
    assert z.t1 is not None and z.t1 > 0
    assert z.t0 > 0
    g = np.geomspace(max(z.t0 * 1e-3, 1e-60), 2.0, 200)
    v = z.value(g)
    assert np.all(v > 0)
    assert np.all(np.diff(v) >= -1e-12 * v[:-1])
    rep = check_zeta(z)
    bad = {k: d for k, d in rep.items()
           if isinstance(d, dict) and not d.get("ok", True)}
    assert not bad, bad
