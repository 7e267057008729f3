"""Tests for the pseudo-inverse stack: projection, radial root-find,
layerwise inversion, saturation, and the full composite.

The oracle everywhere is the forward observability map: points of the
working set are pushed through S_t/T_t and must come back.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ringobs import (
    AssumptionViolation,
    InputSignal,
    ModelParams,
    NumericFailure,
    PolarState,
    SelectivityDistribution,
    SigmoidSpec,
    circular_input,
    constant_input,
    gamma,
)
from ringobs.inverse import (
    BumpSpec,
    InverseConfig,
    invert_S,
    phi,
    project_Pi,
    pseudo_inverse,
    saturate,
    solve_rho,
)
from ringobs.observability import S_map, T_map

T0 = 0.3


def make_setup(mu=2.0, j0=-1.0, tau=1.0):
    par = ModelParams(
        j0=j0, j1=1.5, tau=tau,
        sigmoid=SigmoidSpec(mu=mu),
        dist=SelectivityDistribution.dirac(1.0),
    )
    sig = circular_input(0.8, 0.375, 1.0)
    cfg = InverseConfig(delta=0.2, eta=1e-3, R=2.0)
    return cfg, par, sig


def sample_working_state(rng, cfg):
    v0 = rng.uniform(cfg.delta, cfg.R) * rng.choice([-1.0, 1.0])
    rho = rng.uniform(cfg.eta, cfg.R)
    ang = rng.uniform(0, 2 * np.pi)
    mag = rng.uniform(0, cfg.R)
    return PolarState(v0, rho, (mag * np.cos(ang), mag * np.sin(ang)))


# ---------------------------------------------------------------------------
# InverseConfig / BumpSpec
# ---------------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        InverseConfig(delta=0.1, eta=0.0, R=2.0)
    with pytest.raises(ValueError):
        InverseConfig(delta=0.1, eta=3.0, R=2.0)
    with pytest.raises(ValueError):
        InverseConfig(delta=0.0, eta=0.1, R=2.0)
    with pytest.raises(ValueError):
        InverseConfig(delta=0.1, eta=0.1, R=2.0, rho_tol=0.0)


def test_bump_profile():
    b = BumpSpec(R=2.0)
    assert b.value(0.0) == 1.0
    assert b.value(1.0) == 1.0
    assert b.value(-0.7) == 1.0
    assert b.value(2.0) == 0.0
    assert b.value(2.5) == 0.0
    assert b.value(-3.0) == 0.0
    mid = b.value(1.5)
    assert mid == pytest.approx(0.5, abs=1e-12)  # smoothstep symmetry
    # monotone descent on the ramp
    xs = np.linspace(1.0, 2.0, 41)
    vals = [b.value(x) for x in xs]
    assert all(a >= c for a, c in zip(vals, vals[1:]))
    # flat (C^1) junctions at both plateau ends
    h = 1e-5
    assert abs(b.value(1.0) - b.value(1.0 + h)) < 1e-9
    assert abs(b.value(2.0 - h) - b.value(2.0)) < 1e-9


# ---------------------------------------------------------------------------
# project_Pi
# ---------------------------------------------------------------------------


def test_project_clamp_examples():
    cfg, par, sig = make_setup()
    z = np.array([0.0, 0.1, 3.0, -2.0])
    out = project_Pi(cfg, par, sig, z, +1.0, T0)
    assert out[0] == cfg.delta
    assert out[2] == 3.0 and out[3] == -2.0
    out = project_Pi(cfg, par, sig, z, -1.0, T0)
    assert out[0] == -cfg.delta
    # far outside the ball
    out = project_Pi(cfg, par, sig, np.array([9.0, 0, 0, 0]), +1.0, T0)
    assert out[0] == cfg.R


def test_project_fixed_point_on_forward_images():
    cfg, par, sig = make_setup()
    rng = np.random.default_rng(17)
    for _ in range(100):
        X = sample_working_state(rng, cfg)
        z = S_map(par, sig, X, T0)
        out = project_Pi(cfg, par, sig, z, np.sign(X.v0), T0)
        np.testing.assert_allclose(out, z, atol=1e-13)


@given(
    z=st.lists(st.floats(-10, 10), min_size=4, max_size=4),
    ys=st.sampled_from([-1.0, 1.0]),
)
@settings(max_examples=80, deadline=None)
def test_project_idempotent(z, ys):
    cfg, par, sig = make_setup()
    once = project_Pi(cfg, par, sig, np.array(z), ys, T0)
    twice = project_Pi(cfg, par, sig, once, ys, T0)
    np.testing.assert_array_equal(once, twice)


def test_project_tau_band():
    # the band is expressed in z1 units, so tau rescales it
    cfg, par1, sig = make_setup(tau=1.0)
    _, par5, _ = make_setup(tau=5.0)
    z = np.array([0.5, -4.0, 0.0, 0.0])  # z1 far below any band
    out1 = project_Pi(cfg, par1, sig, z, +1.0, T0)
    out5 = project_Pi(cfg, par5, sig, z, +1.0, T0)
    i0 = sig.value(T0)[0]
    # both clamp to the same w endpoint; z1 = (w - z0 + I0)/tau
    w1 = 1.0 * out1[1] + out1[0] - i0
    w5 = 5.0 * out5[1] + out5[0] - i0
    assert w1 == pytest.approx(w5, abs=1e-12)
    assert out5[1] == pytest.approx(out1[1] / 5.0, abs=1e-12)


# ---------------------------------------------------------------------------
# solve_rho
# ---------------------------------------------------------------------------


def test_solve_rho_endpoint():
    cfg, par, sig = make_setup()
    w = par.j0 * gamma(par, 0, 0, 0.5, cfg.eta)
    assert solve_rho(cfg, par, sig, 0.5, w, T0) == pytest.approx(cfg.eta, abs=1e-9)


def test_solve_rho_round_trip():
    cfg, par, sig = make_setup()
    rng = np.random.default_rng(23)
    for _ in range(50):
        v0 = rng.uniform(cfg.delta, cfg.R) * rng.choice([-1.0, 1.0])
        rho_true = rng.uniform(cfg.eta, cfg.R)
        w = par.j0 * gamma(par, 0, 0, v0, rho_true)
        rho = solve_rho(cfg, par, sig, v0, w, T0)
        assert rho == pytest.approx(rho_true, abs=1e-10)


def test_solve_rho_residual_bound():
    cfg, par, sig = make_setup()
    rng = np.random.default_rng(29)
    bound = 10 * cfg.rho_tol * abs(par.j0) * par.sigmoid.mu
    for _ in range(25):
        v0 = rng.uniform(cfg.delta, cfg.R)
        w = par.j0 * gamma(par, 0, 0, v0, rng.uniform(cfg.eta, cfg.R))
        rho = solve_rho(cfg, par, sig, v0, w, T0)
        assert abs(par.j0 * gamma(par, 0, 0, v0, rho) - w) <= bound


def test_solve_rho_band_orientation():
    # for v0 > 0 and J0 < 0 the band is increasing in rho (Gamma_0^0
    # decreases, J0 flips it): endpoint values straddle interior ones
    cfg, par, sig = make_setup(j0=-1.0)
    v0 = cfg.delta
    lo = par.j0 * gamma(par, 0, 0, v0, cfg.eta)
    hi = par.j0 * gamma(par, 0, 0, v0, cfg.R)
    assert lo < hi
    mid = par.j0 * gamma(par, 0, 0, v0, 1.0)
    assert lo < mid < hi


def test_solve_rho_out_of_band_error():
    cfg, par, sig = make_setup()
    with pytest.raises(NumericFailure):
        solve_rho(cfg, par, sig, 0.5, 5.0, T0)


# ---------------------------------------------------------------------------
# invert_S
# ---------------------------------------------------------------------------


def test_invert_round_trip_500():
    cfg, par, sig = make_setup()
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(500):
        X = sample_working_state(rng, cfg)
        z = S_map(par, sig, X, T0)
        Xr = invert_S(cfg, par, sig, z, T0)
        err = max(
            abs(Xr.v0 - X.v0),
            abs(Xr.rho - X.rho),
            float(np.max(np.abs(Xr.zeta - X.zeta))),
        )
        worst = max(worst, err)
    assert worst < 1e-8


def test_invert_round_trip_tau():
    cfg, par, sig = make_setup(tau=2.5)
    rng = np.random.default_rng(43)
    for _ in range(50):
        X = sample_working_state(rng, cfg)
        z = S_map(par, sig, X, T0)
        Xr = invert_S(cfg, par, sig, z, T0)
        assert abs(Xr.v0 - X.v0) < 1e-8
        assert abs(Xr.rho - X.rho) < 1e-8
        np.testing.assert_allclose(Xr.zeta, X.zeta, atol=1e-8)


def test_invert_diagonal_zeta_recovery():
    # I_(1:2) = (a, 0) with derivative (0, b): the angular solve is
    # diagonal, zeta = (s/a, u/b)
    a, b = 0.4, 0.7

    def jet(t):
        out = np.zeros((4, 3))
        out[0] = (0.6, a, 0.0)
        out[1] = (0.0, 0.0, b)
        return out

    sig = InputSignal(jet=jet, c=0.6, mu_wedge=a * b, sup_norm=1.0)
    cfg, par, _ = make_setup()
    X = PolarState(0.8, 0.9, (0.3, -1.1))
    z = S_map(par, sig, X, T0)
    Xr = invert_S(cfg, par, sig, z, T0)
    np.testing.assert_allclose(Xr.zeta, X.zeta, atol=1e-10)


def test_invert_singular_wedge_error():
    cfg, par, _ = make_setup()
    # parallel modulation and derivative: wedge identically zero
    def jet(t):
        out = np.zeros((4, 3))
        out[0] = (0.6, 0.3, 0.3)
        out[1] = (0.0, 0.1, 0.1)
        return out

    sig = InputSignal(jet=jet, c=0.6, mu_wedge=0.09, sup_norm=1.0)
    z = np.array([0.5, -0.3, 0.2, 0.1])
    with pytest.raises(AssumptionViolation):
        invert_S(cfg, par, sig, z, T0)


def test_invert_constant_input_singular():
    cfg, par, _ = make_setup()
    sig = constant_input(0.6, (0.3, 0.1))
    X = PolarState(0.8, 0.9, (0.6, -0.8))
    z = S_map(par, sig, X, T0)
    with pytest.raises(AssumptionViolation):
        invert_S(cfg, par, sig, z, T0)


# ---------------------------------------------------------------------------
# saturate / phi
# ---------------------------------------------------------------------------


def test_saturate_identity_and_zeroing():
    b = BumpSpec(R=2.0)
    X = PolarState(0.5, 1.0, (0.6, -0.8))  # |zeta| = 1 = R - 1
    Xs = saturate(b, X)
    np.testing.assert_array_equal(Xs.zeta, X.zeta)
    X = PolarState(0.5, 1.0, (2.0, 0.0))  # |zeta| = 2 = R
    Xs = saturate(b, X)
    np.testing.assert_array_equal(Xs.zeta, (0.0, 0.0))
    X = PolarState(0.5, 1.0, (1.5, 0.0))  # on the ramp
    Xs = saturate(b, X)
    assert 0.0 < np.linalg.norm(Xs.zeta) < 1.5
    # direction preserved
    assert Xs.zeta[1] == 0.0 and Xs.zeta[0] > 0.0


def test_saturate_continuous_in_magnitude():
    b = BumpSpec(R=2.0)
    mags = np.linspace(0.5, 2.5, 101)
    outs = [
        np.linalg.norm(saturate(b, PolarState(0.1, 1.0, (m, 0.0))).zeta)
        for m in mags
    ]
    jumps = np.abs(np.diff(outs))
    assert np.max(jumps) < 0.15  # no discontinuity at ramp ends


def test_phi_examples():
    assert np.array_equal(
        phi(PolarState(1.0, 2.0, (3.0, 4.0))), np.array([1.0, 6.0, 8.0])
    )
    X = PolarState.from_cartesian((0.4, -1.2, 0.5))
    np.testing.assert_allclose(phi(X), (0.4, -1.2, 0.5), atol=1e-14)


# ---------------------------------------------------------------------------
# pseudo_inverse (the composite)
# ---------------------------------------------------------------------------


def test_pseudo_inverse_round_trip():
    cfg, par, sig = make_setup()
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(300):
        v0 = rng.uniform(cfg.delta, cfg.R) * rng.choice([-1.0, 1.0])
        r12 = rng.uniform(cfg.eta, cfg.R)
        ang = rng.uniform(0, 2 * np.pi)
        v = np.array([v0, r12 * math.cos(ang), r12 * math.sin(ang)])
        z = T_map(par, sig, v, T0)
        u = pseudo_inverse(cfg, par, sig, z, np.sign(v0), T0)
        worst = max(worst, float(np.max(np.abs(u - v))))
    assert worst < 1e-8


def test_pseudo_inverse_shrunken_radial():
    cfg, par, sig = make_setup()
    for frac in (0.5, 0.25):
        v = np.array([0.7, cfg.eta * frac, 0.0])
        z = T_map(par, sig, v, T0)
        u = pseudo_inverse(cfg, par, sig, z, 1.0, T0)
        assert np.linalg.norm(u - v) <= cfg.eta
        assert u[0] == v[0]


def test_pseudo_inverse_wrong_sign_clamp():
    cfg, par, sig = make_setup()
    v = np.array([-1.0, 0.5, 0.2])
    z = T_map(par, sig, v, T0)
    u = pseudo_inverse(cfg, par, sig, z, +1.0, T0)
    assert u[0] == cfg.delta


def test_pseudo_inverse_codomain():
    cfg, par, sig = make_setup()
    rng = np.random.default_rng(5)
    for _ in range(300):
        z = rng.uniform(-5, 5, size=4)
        u = pseudo_inverse(cfg, par, sig, z, rng.choice([-1.0, 1.0]), T0)
        assert cfg.delta - 1e-12 <= abs(u[0]) <= cfg.R + 1e-12
        assert math.hypot(u[1], u[2]) <= cfg.R**2 + 1e-9


def test_pseudo_inverse_lipschitz_probe():
    cfg, par, sig = make_setup()

    def max_ratio(rho_tol):
        c = InverseConfig(
            delta=cfg.delta, eta=cfg.eta, R=cfg.R, rho_tol=rho_tol
        )
        rng = np.random.default_rng(123)
        worst = 0.0
        for _ in range(1000):
            z = rng.uniform(-3, 3, size=4)
            dz = rng.normal(size=4)
            dz *= rng.uniform(0, 1) / np.linalg.norm(dz)
            ys = rng.choice([-1.0, 1.0])
            u1 = pseudo_inverse(c, par, sig, z, ys, T0)
            u2 = pseudo_inverse(c, par, sig, z + dz, ys, T0)
            d = float(np.linalg.norm(dz))
            if d > 1e-12:
                worst = max(worst, float(np.linalg.norm(u1 - u2)) / d)
        return worst

    l_fine = max_ratio(1e-12)
    assert l_fine < 50.0  # empirical constant ~8 for this configuration
    l_coarse = max_ratio(1e-10)
    assert l_coarse == pytest.approx(l_fine, rel=0.05)  # refinement-stable
