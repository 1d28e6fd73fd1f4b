import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stableop.modulus import (Modulus, check_modulus_properties,
                              dini_2s_integral, dini_integral,
                              dini2s_monotone_in_s, modulus_from_json,
                              upgrade_modulus)

IOTA = 1.0 / 6.0


def cap_modulus():
    fn = lambda t: np.minimum(np.asarray(t, dtype=float), 1.0)
    fn_u = lambda u: np.exp(-np.asarray(u, dtype=float))
    return Modulus.from_callable(fn, name="cap", fn_u=fn_u)


def test_power_values(omega_power):
    t = np.array([1e-6, 1e-2, 1.0])
    assert np.allclose(omega_power(t), t ** 0.3, rtol=1e-12)


def test_dini_integral_power_oracle(omega_power):
    rep = dini_integral(omega_power)
    assert rep.finite
    assert rep.value == pytest.approx(1.0 / 0.3, rel=1e-3)


def test_dini_integral_logpow_oracle(omega_logpow):
    rep = dini_integral(omega_logpow)
    assert rep.finite
    assert rep.value == pytest.approx(1.0, rel=1e-3)


def test_dini_integral_borderline_divergent():
    assert not dini_integral(Modulus.log_power(1.0)).finite


def test_dini_2s_verdicts(omega_power):
    # power moduli integrate; (1+ln(1/t))^(-p) needs 2 s p > 1
    assert dini_2s_integral(omega_power, 0.3).finite
    assert not dini_2s_integral(Modulus.log_power(1.0), 0.3).finite
    assert dini_2s_integral(Modulus.log_power(2.0), 0.3).finite


def test_dini2s_monotone_in_s(omega_power):
    assert dini2s_monotone_in_s(omega_power, 0.3, 0.5)


@pytest.mark.parametrize("base", ["power", "logpow", "cap"])
def test_upgrade_dominates_and_properties(base, omega_power, omega_logpow):
    ob = {"power": omega_power, "logpow": omega_logpow,
          "cap": cap_modulus()}[base]
    om = upgrade_modulus(ob, IOTA)
    t = np.geomspace(1e-9, 5.0, 600)
    assert np.all(om(t) >= ob(t) * (1.0 - 1e-10))
    rep = check_modulus_properties(om, IOTA)
    for key in ("monotone", "concave", "power_quotient_decreasing",
                "second_order_bound"):
        assert rep[key]["ok"], (key, rep[key])
    # the upgrade preserves the Dini verdict
    assert dini_integral(om).finite == dini_integral(ob).finite


def test_upgrade_preserves_2s_dini_verdict(omega_power):
    s0 = 0.3
    om = upgrade_modulus(omega_power, IOTA, mode="dini2s", s0=s0)
    assert dini_2s_integral(om, s0).finite


def test_upgrade_rejects_bad_floor(omega_power):
    with pytest.raises(ValueError):
        upgrade_modulus(omega_power, IOTA, t_floor=0.5)


def test_table_modulus_interpolates():
    t = np.geomspace(1e-8, 10.0, 300)
    m = Modulus.table(t, t ** 0.5)
    q = np.geomspace(1e-7, 5.0, 50)
    assert np.allclose(m(q), q ** 0.5, rtol=1e-4)


def test_modulus_from_json():
    assert modulus_from_json({"type": "power", "alpha": 0.4}).kind == "power"
    assert modulus_from_json({"type": "log_power", "p": 2.0}) is not None
    m = modulus_from_json({"type": "cap"})
    assert float(m(np.array([2.0]))[0]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        modulus_from_json({"type": "mystery"})


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.95))
def test_power_modulus_monotone_concave(alpha):
    m = Modulus.power(alpha)
    t = np.geomspace(1e-8, 1.0, 200)
    w = m(t)
    assert np.all(np.diff(w) >= -1e-15)
    mid = 0.5 * (t[:-2] + t[2:])
    assert np.all(m(mid) >= 0.5 * (w[:-2] + w[2:]) - 1e-12)
