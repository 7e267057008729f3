"""Agreement between the compiled chunk drivers and the reference backend.

The pure-Python reference is the semantic oracle: every compiled kernel
must reproduce it within tolerances set by the only legitimate
differences — quadrature summation order (BLAS versus plain loops) and
the radial root-find's termination point (both within ``rho_tol``).
Trajectory-level tests run the same scenario through both backends via
the dispatch environment switch.

Tolerances trace to measurements on the built extension: Gamma blocks
agree to ~1e-15 absolute, plant fields to ~4e-16, drives to ~3e-15
relative, and full canonical trajectories (4000 steps through both
switches) to ~4e-10 in the estimate; each bound below carries at least
an order of magnitude of slack over the measured worst case.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ringobs import _backend, _purepy
from ringobs.inverse import InverseConfig, pseudo_inverse, solve_rho
from ringobs.model import (
    InputSignal,
    ModelParams,
    PolarState,
    SelectivityDistribution,
    SigmoidSpec,
    circular_input,
    constant_input,
    f_cartesian,
    gamma_block,
)
from ringobs.observability import L4h_polar, T_map
from ringobs.sim import Scenario, run_scenario

pytestmark = pytest.mark.filterwarnings("ignore:.*exceeds the working radius")


def _steep_params() -> ModelParams:
    """Thresholded steep sigmoid on the fine orientation grid."""
    return ModelParams(
        j0=-1.0,
        j1=1.5,
        tau=1.0,
        sigmoid=SigmoidSpec(mu=10.0, transform=(1.0, 0.0, 10.0)),
        theta_nodes=256,
    )


def _mild_params() -> ModelParams:
    """Odd moderate-gain sigmoid, everywhere radially informative."""
    return ModelParams(j0=1.2, j1=0.7, tau=1.0, sigmoid=SigmoidSpec(mu=2.0))


def _multinode_params() -> ModelParams:
    """Three-node selectivity law exercising the distribution loop."""
    return ModelParams(
        j0=-0.8,
        j1=1.1,
        tau=1.3,
        sigmoid=SigmoidSpec(mu=3.0, transform=(0.5, 0.5, 1.0)),
        dist=SelectivityDistribution.from_nodes((0.5, 1.0, 1.5), (0.25, 0.5, 0.25)),
        theta_nodes=64,
    )


@pytest.fixture
def compiled_env(monkeypatch):
    """Clear the dispatch override so the compiled backend is eligible."""
    monkeypatch.delenv("RINGOBS_FORCE_PUREPY", raising=False)


def test_compiled_backend_is_available(compiled_env):
    # The extension is part of this package's build; a missing compiled
    # core is a build failure, not an optional feature to skip.
    assert _backend.compiled_available()


def test_dispatch_prefers_compiled_for_builtin_inputs(compiled_env):
    core = pytest.importorskip("ringobs._core")
    p = _mild_params()
    assert _backend.get_backend(p, circular_input(1.0, 0.3, 0.7)) is core
    assert _backend.get_backend(p, constant_input(0.9)) is core


def test_dispatch_falls_back_for_custom_jets(compiled_env):
    pytest.importorskip("ringobs._core")

    def jet(t):
        out = np.zeros((4, 3))
        out[0] = (1.0, 0.2 * np.cos(t), 0.2 * np.sin(t))
        return out

    custom = InputSignal(jet=jet, c=1.0, mu_wedge=0.0, sup_norm=1.2)
    assert _backend.get_backend(_mild_params(), custom) is _purepy


def test_dispatch_honors_force_purepy(monkeypatch):
    pytest.importorskip("ringobs._core")
    monkeypatch.setenv("RINGOBS_FORCE_PUREPY", "1")
    assert not _backend.compiled_available()
    assert _backend.get_backend(_mild_params(), constant_input(0.9)) is _purepy


# ---------------------------------------------------------------------------
# Kernel-level agreement
# ---------------------------------------------------------------------------


def test_gamma_blocks_agree():
    core = pytest.importorskip("ringobs._core")
    sig = circular_input(0.1, 0.1, 0.5)
    for params in (_steep_params(), _mild_params(), _multinode_params()):
        for v0 in (-3.0, -0.7, 0.0, 0.4, 1.0, 2.9):
            for rho in (0.0, 1e-3, 0.6, 1.4, 3.2):
                ref = gamma_block(params, v0, rho, pmax=3, jmax=3)
                got = core.gamma_probe(params, sig, v0, rho, 3, 3)
                # Third-order moments reach O(mu^3); summation order
                # contributes machine-relative noise on that scale.
                np.testing.assert_allclose(got, ref, rtol=1e-13, atol=1e-13)


@settings(max_examples=150, deadline=None)
@given(
    v0=st.floats(-4.0, 4.0),
    rho=st.floats(0.0, 4.0),
    pmax=st.integers(0, 3),
    jmax=st.integers(0, 3),
)
def test_gamma_agreement_property(v0, rho, pmax, jmax):
    core = pytest.importorskip("ringobs._core")
    params = _mild_params()
    sig = constant_input(1.0)
    ref = gamma_block(params, v0, rho, pmax=pmax, jmax=jmax)
    got = core.gamma_probe(params, sig, v0, rho, pmax, jmax)
    np.testing.assert_allclose(got, ref, rtol=0.0, atol=1e-13)


def test_plant_field_agrees():
    core = pytest.importorskip("ringobs._core")
    sig = circular_input(0.1, 0.1, 2.0 * np.pi / 10.0)
    rng = np.random.default_rng(7)
    for params in (_steep_params(), _mild_params(), _multinode_params()):
        for _ in range(25):
            v = rng.uniform(-3.5, 3.5, size=3)
            t = float(rng.uniform(0.0, 10.0))
            ref = f_cartesian(params, sig, v, t)
            got = core.plant_field_probe(params, sig, v, t)
            np.testing.assert_allclose(got, ref, rtol=0.0, atol=5e-14)


def test_plant_field_agrees_on_axis():
    # rho = 0 takes the continuous-extension branch in both backends.
    core = pytest.importorskip("ringobs._core")
    params = _mild_params()
    sig = constant_input(0.6)
    v = np.array([1.3, 0.0, 0.0])
    ref = f_cartesian(params, sig, v, 0.0)
    got = core.plant_field_probe(params, sig, v, 0.0)
    np.testing.assert_allclose(got, ref, rtol=0.0, atol=5e-15)
    assert got[1] == 0.0 and got[2] == 0.0


def test_drive_agrees():
    core = pytest.importorskip("ringobs._core")
    sig = circular_input(0.1, 0.1, 2.0 * np.pi / 10.0)
    rng = np.random.default_rng(11)
    for params in (_steep_params(), _mild_params()):
        for _ in range(25):
            v0 = float(rng.uniform(-3.0, 3.0))
            rho = float(rng.uniform(1e-3, 3.0))
            zeta = rng.uniform(-1.0, 1.0, size=2)
            t = float(rng.uniform(0.0, 10.0))
            ref = L4h_polar(params, sig, PolarState(v0, rho, zeta), t)
            got = core.drive_probe(params, sig, v0, rho, zeta, t)
            assert got == pytest.approx(ref, rel=1e-10, abs=1e-10)


def test_radial_solve_within_shared_tolerance():
    core = pytest.importorskip("ringobs._core")
    params = _mild_params()
    sig = circular_input(1.4, 0.25, 0.9)
    cfg = InverseConfig(delta=0.2, eta=1e-3, R=2.0)
    for v0 in (-1.1, 0.8, 1.7):
        for rho_true in (0.01, 0.4, 1.1, 1.9):
            w = params.j0 * gamma_block(params, v0, rho_true, pmax=0, jmax=0)[0, 0]
            ref = solve_rho(cfg, params, sig, v0, w, 0.0)
            got = core.solve_rho_probe(cfg, params, sig, v0, w)
            # Each solver terminates within rho_tol of the root of its
            # own floating-point residual; where the radial slope is
            # shallow (small rho), the backends' ~1e-15 residual
            # discrepancy shifts that root by noise/slope, so only the
            # well-conditioned radii admit the tight bound.
            assert abs(got - rho_true) <= 1e-9
            assert abs(got - ref) <= 1e-9
            if rho_true >= 0.4:
                assert abs(got - rho_true) <= 2.0 * cfg.rho_tol
                assert abs(got - ref) <= 3.0 * cfg.rho_tol


def test_reconstruction_agrees_and_round_trips():
    core = pytest.importorskip("ringobs._core")
    params = _mild_params()
    sig = circular_input(1.4, 0.25, 0.9)
    cfg = InverseConfig(delta=0.2, eta=1e-3, R=2.0)
    rng = np.random.default_rng(23)
    for _ in range(50):
        v0 = float(rng.choice([-1.0, 1.0]) * rng.uniform(cfg.delta, cfg.R))
        rho = float(rng.uniform(cfg.eta, cfg.R))
        ang = float(rng.uniform(0.0, 2.0 * np.pi))
        v = np.array([v0, rho * np.cos(ang), rho * np.sin(ang)])
        t = float(rng.uniform(0.0, 7.0))
        z = T_map(params, sig, v, t)
        ref = pseudo_inverse(cfg, params, sig, z, v[0], t)
        got = core.reconstruct_probe(cfg, params, sig, z, v[0], t)
        np.testing.assert_allclose(got, ref, rtol=0.0, atol=1e-9)
        np.testing.assert_allclose(got, v, rtol=0.0, atol=1e-8)


# ---------------------------------------------------------------------------
# Chunk drivers against the reference loop
# ---------------------------------------------------------------------------


def _plant_scenario(params, sig, v0, t_end, dt):
    return Scenario(params=params, input_signal=sig, v0_init=v0, t_end=t_end, dt=dt)


def _run_both(monkeypatch, scenario):
    monkeypatch.setenv("RINGOBS_FORCE_PUREPY", "1")
    ref = run_scenario(scenario)
    monkeypatch.delenv("RINGOBS_FORCE_PUREPY")
    got = run_scenario(scenario)
    return ref, got


def test_plant_trajectories_agree(monkeypatch):
    pytest.importorskip("ringobs._core")
    s = _plant_scenario(
        _steep_params(),
        circular_input(0.1, 0.1, 2.0 * np.pi / 10.0),
        [-3.0, 2.5, -2.0],
        t_end=1.0,
        dt=1e-3,
    )
    ref, got = _run_both(monkeypatch, s)
    assert np.array_equal(ref.t, got.t)
    np.testing.assert_allclose(got.v, ref.v, rtol=0.0, atol=1e-13)
    np.testing.assert_allclose(got.y, ref.y, rtol=0.0, atol=1e-13)


def test_constant_input_plant_agrees(monkeypatch):
    pytest.importorskip("ringobs._core")
    s = _plant_scenario(
        _multinode_params(),
        constant_input(0.8, (0.2, -0.1)),
        [0.5, -0.4, 0.3],
        t_end=2.0,
        dt=1e-2,
    )
    ref, got = _run_both(monkeypatch, s)
    np.testing.assert_allclose(got.v, ref.v, rtol=0.0, atol=1e-13)


def test_cosim_trajectories_agree_through_both_switches(monkeypatch):
    # Canonical-geometry scenario on a coarse grid: crosses z->v at
    # t ~ 1.08 and v->z at t ~ 1.66, so the comparison covers both jump
    # maps, both integration modes, and the post-switch convergence.
    pytest.importorskip("ringobs._core")
    params = _steep_params()
    sig = circular_input(0.1, 0.1, 2.0 * np.pi / 10.0)
    cfg = InverseConfig(delta=0.3, eta=1e-3, R=3.4072)
    s = Scenario(
        params=params,
        input_signal=sig,
        v0_init=[-3.0, 2.5, -2.0],
        t_end=2.0,
        dt=1e-3,
        vhat0_init=[-5.0, 2.0, -1.0],
        observer_cfg=cfg,
        l=15.0,
    )
    ref, got = _run_both(monkeypatch, s)
    assert ref.aborted is None and got.aborted is None
    assert got.switch_log == ref.switch_log
    assert len(got.switch_log) == 2
    assert np.array_equal(ref.mode, got.mode)
    np.testing.assert_allclose(got.v, ref.v, rtol=0.0, atol=1e-12)
    np.testing.assert_allclose(got.v_hat, ref.v_hat, rtol=0.0, atol=1e-8)
    np.testing.assert_allclose(got.err, ref.err, rtol=0.0, atol=1e-8)
    # Embedded coordinates exist on exactly the same rows.
    assert np.array_equal(np.isnan(ref.z_hat), np.isnan(got.z_hat))
    both = ~np.isnan(ref.z_hat)
    np.testing.assert_allclose(
        got.z_hat[both], ref.z_hat[both], rtol=1e-7, atol=1e-7
    )


def test_wedge_violation_aborts_identically(monkeypatch):
    # A constant input has zero persistence wedge: the first embedded
    # step must fail the angular-system check in either backend, with
    # the same diagnostic.
    pytest.importorskip("ringobs._core")
    params = _mild_params()
    sig = constant_input(1.0, (0.3, 0.1))
    cfg = InverseConfig(delta=0.2, eta=1e-3, R=2.0)
    s = Scenario(
        params=params,
        input_signal=sig,
        v0_init=[1.0, 0.3, 0.2],
        t_end=0.5,
        dt=1e-2,
        vhat0_init=[0.8, 0.2, 0.1],
        observer_cfg=cfg,
        l=10.0,
    )
    ref, got = _run_both(monkeypatch, s)
    assert ref.aborted is not None and got.aborted is not None
    assert ref.aborted == got.aborted
    assert "input wedge" in got.aborted
    assert ref.n_rows() == got.n_rows() == 1


def test_plant_chunk_row_protocol_matches():
    core = pytest.importorskip("ringobs._core")
    params = _mild_params()
    sig = circular_input(1.0, 0.3, 0.7)
    n = 12
    k0 = 3
    out = {}
    for backend in (_purepy, core):
        out_t = np.full(n + k0 + 1, np.nan)
        out_v = np.full((n + k0 + 1, 3), np.nan)
        out_y = np.full(n + k0 + 1, np.nan)
        progress = np.zeros(1, dtype=np.int64)
        n_done, reason, v_end = backend.plant_chunk(
            np.array([0.4, -0.2, 0.6]), k0, n, 1e-2, params, sig,
            out_t, out_v, out_y, progress,
        )
        assert (n_done, reason) == (n, _purepy.END)
        assert progress[0] == n
        assert np.all(np.isnan(out_t[: k0 + 1])) and np.all(np.isnan(out_t[k0 + n + 1 :]))
        out[backend.NAME] = (out_t, out_v, out_y, v_end)
    ref, got = out[_purepy.NAME], out[core.NAME]
    assert np.array_equal(ref[0][k0 + 1 :], got[0][k0 + 1 :])
    np.testing.assert_allclose(got[1][k0 + 1 :], ref[1][k0 + 1 :], rtol=0.0, atol=1e-14)
    np.testing.assert_allclose(got[3], ref[3], rtol=0.0, atol=1e-14)


def test_cosim_chunk_returns_switch_unconsumed():
    core = pytest.importorskip("ringobs._core")
    params = _mild_params()
    sig = circular_input(1.4, 0.25, 0.9)
    cfg = InverseConfig(delta=0.2, eta=1e-3, R=2.0)
    from ringobs.observer import gain_matrix

    gain = gain_matrix(10.0)
    n = 8
    shape = n + 1
    out_t = np.full(shape, np.nan)
    out_v = np.full((shape, 3), np.nan)
    out_y = np.full(shape, np.nan)
    out_vhat = np.full((shape, 3), np.nan)
    out_zhat = np.full((shape, 4), np.nan)
    out_mode = np.full(shape, _purepy.MODE_V, dtype=np.int8)
    out_err = np.full(shape, np.nan)
    progress = np.zeros(1, dtype=np.int64)
    # Plant output starts inside the threshold band while the requested
    # mode is embedded: the driver must return SWITCH without stepping.
    v = np.array([0.05, 0.4, 0.1])
    z = np.array([0.05, 0.0, 0.0, 0.0])
    vhat = np.array([0.1, 0.3, 0.2])
    n_done, reason, v_out, z_out, vhat_out = core.cosim_chunk(
        _purepy.MODE_Z, v, z, vhat, 0, n, 1e-2, cfg, params, sig, gain,
        out_t, out_v, out_y, out_vhat, out_zhat, out_mode, out_err, progress,
    )
    assert (n_done, reason) == (0, _purepy.SWITCH)
    assert np.array_equal(v_out, v) and np.array_equal(z_out, z)
    assert np.array_equal(vhat_out, vhat)
    assert np.all(np.isnan(out_t))
