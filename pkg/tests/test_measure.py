import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma

from stableop.measure import (OperatorSpec, SphericalMeasure, limit_matrix,
                              measure_from_json, nondegeneracy_constant,
                              pub_bound_check, total_mass)


def test_total_mass_uniform(uniform_2d):
    assert total_mass(uniform_2d) == pytest.approx(1.0, abs=1e-12)
    assert total_mass(SphericalMeasure.uniform(1, 2.5)) == pytest.approx(2.5)


def test_quadrature_weights_sum_to_mass(uniform_2d, axes_2d):
    for mu in (uniform_2d, axes_2d, SphericalMeasure.uniform(1, 3.0)):
        _, w = mu.quadrature_pairs()
        assert np.sum(w) == pytest.approx(total_mass(mu), rel=1e-12)


@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
def test_nondegeneracy_uniform_closed_form(uniform_2d, s):
    exact = gamma(s + 0.5) / (np.sqrt(np.pi) * gamma(s + 1.0))
    assert nondegeneracy_constant(uniform_2d, s) == pytest.approx(
        exact, rel=1e-10)


@pytest.mark.parametrize("s", [0.3, 0.7])
def test_nondegeneracy_axes_oracle(axes_2d, s):
    # 4 atoms of weight 1 on +-e1, +-e2; the directional integral is
    # 2(|cos phi|^(2s) + |sin phi|^(2s)), minimized on an axis or diagonal
    phi = np.linspace(0.0, np.pi / 2, 100001)
    f = 2.0 * (np.abs(np.cos(phi)) ** (2 * s)
               + np.abs(np.sin(phi)) ** (2 * s))
    assert nondegeneracy_constant(axes_2d, s) == pytest.approx(
        float(f.min()), rel=1e-6)


def test_limit_matrix_uniform_identity(uniform_2d):
    A = limit_matrix(uniform_2d)
    assert np.allclose(A, np.eye(2) * 0.25, atol=1e-12)


def test_limit_matrix_axes(axes_2d):
    A = limit_matrix(axes_2d)
    assert np.allclose(A, np.eye(2) * 1.0, atol=1e-12)


def test_pub_bound_1d_relaxation():
    mu = SphericalMeasure.uniform(1, 1.0)
    ok_tight, ratio = pub_bound_check(mu, 0.5, 0.5)
    ok_loose, _ = pub_bound_check(mu, 0.5, 2.0)
    assert ratio > 0
    assert ok_loose


def test_pub_bound_atoms_2d_fail(axes_2d):
    ok, ratio = pub_bound_check(axes_2d, 0.5, 100.0)
    assert not ok and ratio == np.inf


def test_operator_spec_validation(uniform_1d, axes_2d):
    with pytest.raises(ValueError):
        OperatorSpec(s=1.2, measure=uniform_1d)
    with pytest.raises(ValueError):
        OperatorSpec(s=0.5, measure=axes_2d, pub_flag=True)
    spec = OperatorSpec(s=0.5, measure=uniform_1d)
    assert spec.mass == pytest.approx(1.0)


def test_measure_from_json_roundtrip():
    mu = measure_from_json({"variant": "uniform", "d": 2, "mass": 2.0})
    assert mu.variant == "uniform" and total_mass(mu) == pytest.approx(2.0)
    mu = measure_from_json({"variant": "atoms", "d": 2,
                            "atoms": [{"dir": [1, 0], "w": 1.0},
                                      {"dir": [0, 1], "w": 1.0}]})
    assert total_mass(mu) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        measure_from_json({"variant": "nope"})


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(0.0, 2 * np.pi),
                          st.floats(0.1, 2.0)),
                min_size=2, max_size=6),
       st.floats(0.2, 0.9))
def test_nondegeneracy_bounded_by_mass(atoms, s):
    pairs = [((np.cos(a), np.sin(a)), w) for a, w in atoms]
    mu = SphericalMeasure.atoms(2, pairs)
    lam = nondegeneracy_constant(mu, s)
    assert 0.0 <= lam <= total_mass(mu) + 1e-9


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(0.0, 2 * np.pi),
                          st.floats(0.1, 2.0)),
                min_size=1, max_size=6))
def test_limit_matrix_psd_half_mass_trace(atoms):
    pairs = [((np.cos(a), np.sin(a)), w) for a, w in atoms]
    mu = SphericalMeasure.atoms(2, pairs)
    A = limit_matrix(mu)
    assert np.allclose(A, A.T)
    assert np.linalg.eigvalsh(A).min() >= -1e-12
    assert np.trace(A) == pytest.approx(0.5 * total_mass(mu), rel=1e-10)
