import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stableop.measure import OperatorSpec, SphericalMeasure
from stableop.operator import (EvaluationPlan, ProfiledFunction, _ray_integral,
                               apply, apply_1d, frac_lap_1d,
                               interior_holder_check, subharmonicity_margin,
                               tail_term)


def ball_kinks(x, th):
    roots = np.roots([1.0, 2.0 * float(x @ th), float(x @ x) - 1.0])
    return [float(np.real(r)) for r in roots
            if abs(np.imag(r)) < 1e-12 and np.real(r) > 0]


def psi_profile():
    return ProfiledFunction(
        fn=lambda p: np.maximum(1.0 - (p ** 2).sum(axis=1), 0.0),
        growth=0.0, kink_radii=ball_kinks)


def test_constant_annihilated(uniform_2d):
    one = ProfiledFunction(fn=lambda p: np.ones(len(p)), growth=0.0)
    spec = OperatorSpec(s=0.5, measure=uniform_2d)
    v, _ = apply(spec, one, np.zeros(2))
    assert abs(v) <= 1e-12


@pytest.mark.parametrize("s", [0.2, 0.8])
def test_anchor_point(uniform_2d, s):
    spec = OperatorSpec(s=s, measure=uniform_2d)
    v, err = apply(spec, psi_profile(), np.zeros(2))
    exact = spec.mass / s
    assert v == pytest.approx(exact, rel=1e-8)
    assert err < 1e-6 * exact


def test_linearity(uniform_1d):
    spec = OperatorSpec(s=0.5, measure=uniform_1d)
    u1 = ProfiledFunction(fn=lambda p: np.exp(-p[:, 0] ** 2), growth=0.0)
    u2 = ProfiledFunction(fn=lambda p: np.cos(p[:, 0])
                          * np.exp(-p[:, 0] ** 2), growth=0.0)
    a, b = 2.5, -1.25
    comb = ProfiledFunction(
        fn=lambda p: a * np.exp(-p[:, 0] ** 2)
        + b * np.cos(p[:, 0]) * np.exp(-p[:, 0] ** 2), growth=0.0)
    x = np.array([0.3])
    v1, _ = apply(spec, u1, x)
    v2, _ = apply(spec, u2, x)
    vc, _ = apply(spec, comb, x)
    assert vc == pytest.approx(a * v1 + b * v2, abs=1e-10)


@pytest.mark.parametrize("s", [0.4, 0.7])
def test_scaling_covariance(uniform_1d, s):
    # u_lam(x) = u(lam x) gives (A u_lam)(x) = lam^(2s) (A u)(lam x)
    spec = OperatorSpec(s=s, measure=uniform_1d)
    lam = 1.7
    u = ProfiledFunction(fn=lambda p: np.exp(-p[:, 0] ** 2), growth=0.0)
    ul = ProfiledFunction(fn=lambda p: np.exp(-(lam * p[:, 0]) ** 2),
                          growth=0.0)
    x = np.array([0.2])
    v, _ = apply(spec, ul, x)
    vl, _ = apply(spec, u, lam * x)
    assert v == pytest.approx(lam ** (2 * s) * vl, rel=1e-8)


def test_translation_invariance(uniform_1d):
    spec = OperatorSpec(s=0.5, measure=uniform_1d)
    c = 0.37
    u = ProfiledFunction(fn=lambda p: np.exp(-p[:, 0] ** 2), growth=0.0)
    ut = ProfiledFunction(fn=lambda p: np.exp(-(p[:, 0] - c) ** 2),
                          growth=0.0)
    v, _ = apply(spec, u, np.array([0.1]))
    vt, _ = apply(spec, ut, np.array([0.1 + c]))
    assert vt == pytest.approx(v, rel=1e-10)


def test_s_to_1_limit_matches_second_order(uniform_2d):
    # at s near 1 the anchor value mass/s approaches the second-order
    # prediction -A : D^2 psi = mass for the limit matrix A
    spec = OperatorSpec(s=0.999, measure=uniform_2d)
    v, _ = apply(spec, psi_profile(), np.zeros(2))
    assert v == pytest.approx(spec.mass, rel=5e-3)


def test_growth_guard(uniform_1d):
    u = ProfiledFunction(fn=lambda p: np.abs(p[:, 0]), growth=1.2)
    spec = OperatorSpec(s=0.5, measure=uniform_1d)
    with pytest.raises(ValueError):
        apply(spec, u, np.zeros(1))


def test_radial_calibration():
    # integral of r^2 r^(-1-2s) over (0,1] against the closed form
    s = 0.7
    plan = EvaluationPlan(s, r_cut=1.0)
    main, _ = _ray_integral(lambda r: r ** 2, s, plan.edges_v, plan.gauss_n)
    core = (1.0 - s) * plan.r_min ** (2.0 - 2.0 * s) / (2.0 - 2.0 * s)
    exact = (1.0 - s) / (2.0 - 2.0 * s)
    assert abs(main + core - exact) <= 1e-10


@pytest.mark.parametrize("s", [0.3, 0.7])
def test_power_profile_harmonicity(s):
    # (-Delta)^s of t_+^s vanishes on the positive axis
    u = ProfiledFunction(
        fn=lambda p: np.maximum(p[:, 0], 0.0) ** s, growth=s,
        kink_radii=lambda x, th: ([abs(-x[0] / th[0])] if th[0] != 0 else []))
    worst = 0.0
    for t in np.geomspace(0.1, 10.0, 8):
        v, _ = frac_lap_1d(s, u, float(t))
        worst = max(worst, abs(v) * t ** s)
    assert worst <= 1e-4


def test_apply_1d_doubles_frac_lap():
    # apply_1d carries two unit atoms, frac_lap_1d one
    s = 0.5
    u = lambda r: np.exp(-r ** 2)
    t = 0.4
    v2, _ = apply_1d(s, u, t)
    v1, _ = frac_lap_1d(s, u, t)
    assert v2 == pytest.approx(2.0 * v1, rel=1e-12)


def test_tail_term_constant(uniform_1d):
    one = ProfiledFunction(fn=lambda p: np.ones(len(p)), growth=0.0)
    spec = OperatorSpec(s=0.5, measure=uniform_1d)
    assert tail_term(spec, one, np.zeros(1)) == pytest.approx(1.0, rel=1e-8)


def test_interior_holder_power_profile():
    s = 0.6
    x = np.linspace(-1.0, 1.0, 2001).reshape(-1, 1)

    class Field:
        points = x
        values = np.maximum(x[:, 0], 0.0) ** s

    assert interior_holder_check(Field, s) == pytest.approx(1.0, rel=1e-2)


def test_subharmonicity_negative(zeta_pub_06):
    tg = np.geomspace(1e-3, zeta_pub_06.t0 * 0.99, 10)
    rep = subharmonicity_margin(0.6, zeta_pub_06, tg)
    assert rep["all_negative"]
    assert rep["inf_neg_ratio"] > 0


@settings(max_examples=15, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(0.25, 0.85))
def test_odd_part_cancels(x0, s):
    # symmetric second differences never see the odd part around x
    mu = SphericalMeasure.uniform(1, 1.0)
    spec = OperatorSpec(s=s, measure=mu)
    u = ProfiledFunction(
        fn=lambda p: (p[:, 0] - x0) * np.exp(-(p[:, 0] - x0) ** 2),
        growth=0.0)
    v, _ = apply(spec, u, np.array([x0]))
    assert abs(v) <= 1e-9
