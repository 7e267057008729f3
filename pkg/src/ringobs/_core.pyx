# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled co-simulation chunk drivers.

C port of the pure-Python reference backend: the same fixed-step loops
(plant alone, or plant + hybrid observer), the same step protocol
(mode-change requests return with the step unconsumed, jump maps stay
with the caller), and the same failure taxonomy.  The port holds to the
reference semantics operation by operation: clamps and comparisons keep
IEEE ordered-comparison behavior, every branch guard (``rho > 0``
extensions, the sign-preserving radial-sensitivity floor, the wedge
check) is reproduced, and the ``tanh`` evaluations go through the same
NumPy ufunc as the reference, batched over each orientation grid, so the
node values agree bitwise.  The remaining differences are summation
order in the quadrature accumulators and the radial root-find (below),
both far inside the tolerances the observer is specified to.

The radial solve keeps the bracketed search of the reference but adds a
warm start and safeguarded Newton steps (the bracket endpoints still
bound the root; forced interval halving on alternate iterations
preserves the bisection worst case).  Its result agrees with the
reference bisection to the shared ``rho_tol``.

Only the tagged analytic input families ("circular", "constant") are
supported; a custom jet is a Python callable per stage and falls back to
the reference backend via :func:`supports`.
"""

import numpy as np

from libc.math cimport (
    NAN,
    copysign,
    cos,
    fabs,
    hypot,
    isfinite,
    pow as cpow,
    sin,
    sqrt,
)

from ringobs.errors import AssumptionViolation, NumericFailure
from ringobs.model import _cos2theta

NAME = "compiled"

MODE_Z = 0
MODE_V = 1

#: Chunk exit reasons (same values as the reference backend).
END = "end"
SWITCH = "switch"
OBSERVER_NONFINITE = "observer-nonfinite"
PLANT_NONFINITE = "plant-nonfinite"

#: Input families with closed-form jets available to the compiled loops.
_BUILTIN_KINDS = ("circular", "constant")

_KIND_CIRCULAR = 0
_KIND_CONSTANT = 1


def supports(params, input_signal) -> bool:
    """True when the compiled loops can run this model/input pair.

    Every model family is supported; the input must be one of the tagged
    built-in kinds, because a custom jet is an arbitrary Python callable
    that would re-enter the interpreter at every Runge-Kutta stage.
    """
    return input_signal.kind in _BUILTIN_KINDS


cdef class _Ctx:
    """Unpacked scenario constants plus per-chunk scratch buffers.

    Rebuilt at every chunk entry (cheap against chunk length); the
    radial-solve warm start therefore never leaks state across calls.
    """

    # model
    cdef double j0, j1, tau, mu, mu2, mu3, mu4, s1, s2, h0
    cdef Py_ssize_t n_theta, n_r
    cdef double[::1] r_nodes
    cdef double[::1] weights
    cdef double[::1] cos2
    # input
    cdef int kind
    cdef double ip0, ip1, ip2, ip3
    cdef double mu_wedge
    # inversion geometry
    cdef double delta, eta, R, rho_tol
    cdef int max_iter
    # observer gain
    cdef double K0, K1, K2, K3
    # batched tanh workspace (args/results share the reference ufunc)
    cdef object np_tanh
    cdef object arg1_obj, res1_obj, arg2_obj, res2_obj
    cdef double[::1] arg1
    cdef double[::1] res1
    cdef double[::1] arg2
    cdef double[::1] res2
    # radial-solve warm start
    cdef double warm_rho
    cdef bint warm_valid


cdef _Ctx _make_ctx(params, input_signal, cfg, gain):
    cdef _Ctx c = _Ctx()
    spec = params.sigmoid
    c.j0 = params.j0
    c.j1 = params.j1
    c.tau = params.tau
    c.mu = spec.mu
    c.mu2 = cpow(c.mu, 2.0)
    c.mu3 = cpow(c.mu, 3.0)
    c.mu4 = cpow(c.mu, 4.0)
    s1, s2, h0 = spec.transform
    c.s1 = s1
    c.s2 = s2
    c.h0 = h0
    c.r_nodes = np.asarray(params.dist.r_nodes, dtype=np.float64)
    c.weights = np.asarray(params.dist.weights, dtype=np.float64)
    c.n_r = c.r_nodes.shape[0]
    c.n_theta = params.theta_nodes
    c.cos2 = np.array(_cos2theta(params.theta_nodes), dtype=np.float64)

    kind = input_signal.kind
    kp = input_signal.kernel_params
    if kind == "circular":
        c.kind = _KIND_CIRCULAR
        c.ip0, c.ip1, c.ip2, c.ip3 = kp
    elif kind == "constant":
        c.kind = _KIND_CONSTANT
        c.ip0, c.ip1, c.ip2 = kp
        c.ip3 = 0.0
    else:
        raise ValueError(f"compiled backend cannot drive input kind {kind!r}")
    c.mu_wedge = input_signal.mu_wedge

    if cfg is not None:
        c.delta = cfg.delta
        c.eta = cfg.eta
        c.R = cfg.R
        c.rho_tol = cfg.rho_tol
        c.max_iter = cfg.max_iter
    else:
        c.delta = c.eta = c.R = c.rho_tol = 0.0
        c.max_iter = 0
    if gain is not None:
        K = gain.K
        c.K0 = K[0]
        c.K1 = K[1]
        c.K2 = K[2]
        c.K3 = K[3]
    else:
        c.K0 = c.K1 = c.K2 = c.K3 = 0.0

    c.np_tanh = np.tanh
    c.arg1_obj = np.empty(c.n_theta)
    c.res1_obj = np.empty(c.n_theta)
    c.arg2_obj = np.empty(2 * c.n_theta)
    c.res2_obj = np.empty(2 * c.n_theta)
    c.arg1 = c.arg1_obj
    c.res1 = c.res1_obj
    c.arg2 = c.arg2_obj
    c.res2 = c.res2_obj
    c.warm_rho = 0.0
    c.warm_valid = False
    return c


# ---------------------------------------------------------------------------
# Input jets
# ---------------------------------------------------------------------------


cdef void _jet4(_Ctx c, double t, double* J):
    """Fill ``J[12]`` with the rows ``I, dI, d2I, d3I`` (3 columns each)."""
    cdef double a, ca, sa, amp, om
    cdef int i
    if c.kind == _KIND_CIRCULAR:
        a = c.ip2 * t + c.ip3
        ca = cos(a)
        sa = sin(a)
        amp = c.ip1
        om = c.ip2
        J[0] = c.ip0
        J[1] = amp * ca
        J[2] = amp * sa
        J[3] = 0.0
        J[4] = -amp * om * sa
        J[5] = amp * om * ca
        J[6] = 0.0
        J[7] = -amp * cpow(om, 2.0) * ca
        J[8] = -amp * cpow(om, 2.0) * sa
        J[9] = 0.0
        J[10] = amp * cpow(om, 3.0) * sa
        J[11] = -amp * cpow(om, 3.0) * ca
    else:
        J[0] = c.ip0
        J[1] = c.ip1
        J[2] = c.ip2
        for i in range(3, 12):
            J[i] = 0.0


# ---------------------------------------------------------------------------
# Selectivity-orientation averages (the Gamma family)
# ---------------------------------------------------------------------------


cdef int _tanh_pass(_Ctx c, double v0, double rr) except -1:
    """``res1 = tanh(mu (v0 + rr cos2theta) - h0)`` over the grid."""
    cdef Py_ssize_t k
    for k in range(c.n_theta):
        c.arg1[k] = c.mu * (v0 + rr * c.cos2[k]) - c.h0
    c.np_tanh(c.arg1_obj, c.res1_obj)
    return 0


cdef int _gamma_block(
    _Ctx c, double v0, double rho, int pmax, int jmax, double* out
) except -1:
    """All ``Gamma_p^j(v0, rho)`` for ``p <= pmax``, ``j <= jmax``.

    ``out`` is row-major with ``jmax + 1`` columns.  One batched tanh
    pass per selectivity node; accumulators run in plain loop order.
    """
    cdef Py_ssize_t i, k
    cdef int p, j, ncol = jmax + 1
    cdef double acc[5][4]
    cdef double sig[5]
    cdef double r, w, rr, t, u, cv, cj, rwj
    cdef double n1 = <double> c.n_theta
    for p in range(pmax + 1):
        for j in range(ncol):
            out[p * ncol + j] = 0.0
    for i in range(c.n_r):
        r = c.r_nodes[i]
        w = c.weights[i]
        rr = r * rho
        _tanh_pass(c, v0, rr)
        for p in range(pmax + 1):
            for j in range(ncol):
                acc[p][j] = 0.0
        for k in range(c.n_theta):
            t = c.res1[k]
            u = 1.0 - t * t
            sig[0] = c.s1 * t + c.s2
            if pmax >= 1:
                sig[1] = c.s1 * c.mu * u
            if pmax >= 2:
                sig[2] = -2.0 * c.s1 * c.mu2 * t * u
            if pmax >= 3:
                sig[3] = -2.0 * c.s1 * c.mu3 * u * (1.0 - 3.0 * t * t)
            if pmax >= 4:
                sig[4] = 8.0 * c.s1 * c.mu4 * t * u * (2.0 - 3.0 * t * t)
            cv = c.cos2[k]
            cj = 1.0
            for j in range(ncol):
                for p in range(pmax + 1):
                    acc[p][j] += sig[p] * cj
                cj *= cv
        for j in range(ncol):
            rwj = w * cpow(r, <double> j)
            for p in range(pmax + 1):
                out[p * ncol + j] += (rwj * acc[p][j]) / n1
    return 0


cdef int _gamma00_pair(
    _Ctx c, double v0, double rho_a, double rho_b, double* g_a, double* g_b
) except -1:
    """``Gamma_0^0`` at two radii sharing one batched tanh call."""
    cdef Py_ssize_t i, k
    cdef double r, w, rra, rrb, acc_a, acc_b
    cdef double n1 = <double> c.n_theta
    g_a[0] = 0.0
    g_b[0] = 0.0
    for i in range(c.n_r):
        r = c.r_nodes[i]
        w = c.weights[i]
        rra = r * rho_a
        rrb = r * rho_b
        for k in range(c.n_theta):
            c.arg2[k] = c.mu * (v0 + rra * c.cos2[k]) - c.h0
            c.arg2[c.n_theta + k] = c.mu * (v0 + rrb * c.cos2[k]) - c.h0
        c.np_tanh(c.arg2_obj, c.res2_obj)
        acc_a = 0.0
        acc_b = 0.0
        for k in range(c.n_theta):
            acc_a += c.s1 * c.res2[k] + c.s2
            acc_b += c.s1 * c.res2[c.n_theta + k] + c.s2
        g_a[0] += (w * acc_a) / n1
        g_b[0] += (w * acc_b) / n1
    return 0


cdef int _gamma11_pass(
    _Ctx c, double v0, double rho, double* g00, double* g11
) except -1:
    """``Gamma_0^0`` and ``Gamma_1^1`` (value and radial slope data) in
    one tanh pass."""
    cdef Py_ssize_t i, k
    cdef double r, w, rr, t, u, acc00, acc11
    cdef double n1 = <double> c.n_theta
    g00[0] = 0.0
    g11[0] = 0.0
    for i in range(c.n_r):
        r = c.r_nodes[i]
        w = c.weights[i]
        rr = r * rho
        _tanh_pass(c, v0, rr)
        acc00 = 0.0
        acc11 = 0.0
        for k in range(c.n_theta):
            t = c.res1[k]
            u = 1.0 - t * t
            acc00 += c.s1 * t + c.s2
            acc11 += (c.s1 * c.mu * u) * c.cos2[k]
        g00[0] += (w * acc00) / n1
        g11[0] += ((w * r) * acc11) / n1
    return 0


# ---------------------------------------------------------------------------
# Plant field and Runge-Kutta steps
# ---------------------------------------------------------------------------


cdef int _f_cart(_Ctx c, double* v, double t, double* out) except -1:
    """Cartesian plant field ``(-v + Psi(v) + I(t)) / tau``."""
    cdef double J[12]
    cdef double G[2]
    cdef double rho, q1
    _jet4(c, t, J)
    rho = hypot(v[1], v[2])
    _gamma_block(c, v[0], rho, 0, 1, G)
    out[0] = (-v[0] + c.j0 * G[0] + J[0]) / c.tau
    if rho > 0.0:
        q1 = c.j1 * G[1]
        out[1] = (-v[1] + q1 * (v[1] / rho) + J[1]) / c.tau
        out[2] = (-v[2] + q1 * (v[2] / rho) + J[2]) / c.tau
    else:
        out[1] = (-v[1] + 0.0 + J[1]) / c.tau
        out[2] = (-v[2] + 0.0 + J[2]) / c.tau
    return 0


cdef int _rk4_v(_Ctx c, double* x, double t, double dt, double* xout) except -1:
    """Classical four-stage step of the plant field."""
    cdef double k1[3]
    cdef double k2[3]
    cdef double k3[3]
    cdef double k4[3]
    cdef double st[3]
    cdef int i
    _f_cart(c, x, t, k1)
    for i in range(3):
        st[i] = x[i] + 0.5 * dt * k1[i]
    _f_cart(c, st, t + 0.5 * dt, k2)
    for i in range(3):
        st[i] = x[i] + 0.5 * dt * k2[i]
    _f_cart(c, st, t + 0.5 * dt, k3)
    for i in range(3):
        st[i] = x[i] + dt * k3[i]
    _f_cart(c, st, t + dt, k4)
    for i in range(3):
        xout[i] = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return 0


# ---------------------------------------------------------------------------
# Pseudo-inverse of the observability map
# ---------------------------------------------------------------------------


cdef int _project(_Ctx c, double* z, double y_sign, double* zp) except -1:
    """Clamp ``z`` onto the necessary conditions of the working set's
    image: output component into the sign band, first derivative into
    the reachable band of ``J0 Gamma_0^0(z0, .)``.

    Clamps are written as ordered comparisons so a NaN passes through
    exactly as it does in the reference backend.  ``I_0`` is constant in
    time for both built-in input families.
    """
    cdef double z0 = z[0]
    cdef double lo_g, hi_g, lo, hi, w
    if y_sign >= 0.0:
        if c.delta > z0:
            z0 = c.delta
        if c.R < z0:
            z0 = c.R
    else:
        if -c.R > z0:
            z0 = -c.R
        if -c.delta < z0:
            z0 = -c.delta
    zp[0] = z0
    _gamma00_pair(c, z0, c.eta, c.R, &lo_g, &hi_g)
    lo = c.j0 * lo_g
    hi = c.j0 * hi_g
    if hi < lo:
        lo, hi = hi, lo
    w = c.tau * z[1] + z0 - c.ip0
    if lo > w:
        w = lo
    if hi < w:
        w = hi
    zp[1] = (w - z0 + c.ip0) / c.tau
    zp[2] = z[2]
    zp[3] = z[3]
    return 0


cdef double _solve_rho(_Ctx c, double v0, double w) except? -1.0:
    """Radius with ``J0 Gamma_0^0(v0, rho) = w`` on ``[eta, R]``.

    Bracketed search with the reference endpoint handling (exact hits,
    the clamped-endpoint slack rule, the non-bracketing failure).  The
    interior iteration warm-starts from the previous solve of the same
    chunk and takes Newton steps off the one-pass radial slope
    ``J0 Gamma_1^1``, safeguarded by the bracket; alternate iterations
    force an interval halving, so the bisection worst case (and the
    ``max_iter`` failure contract) is preserved.  Accepts a point once
    the Newton increment is below ``rho_tol / 4``, or returns the
    bracket midpoint once the bracket is below ``rho_tol`` — the same
    guarantee the reference bisection provides.
    """
    cdef double a = c.eta
    cdef double b = c.R
    cdef double fa, fb, fx, dfx, x, xn, step, slack, g_a, g_b, g00, g11
    cdef int it
    cdef bint newton_ok

    _gamma00_pair(c, v0, a, b, &g_a, &g_b)
    fa = c.j0 * g_a - w
    fb = c.j0 * g_b - w
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0.0:
        slack = 10.0 * c.rho_tol * fabs(c.j0) * c.mu
        if (fabs(fa) if fabs(fa) <= fabs(fb) else fabs(fb)) <= slack:
            return a if fabs(fa) <= fabs(fb) else b
        raise NumericFailure(
            f"rho target {w} outside the reachable band at v0={v0} "
            "(projection not applied?)"
        )

    if c.warm_valid and a < c.warm_rho < b:
        x = c.warm_rho
    else:
        x = 0.5 * (a + b)

    for it in range(c.max_iter):
        if b - a <= c.rho_tol:
            break
        _gamma11_pass(c, v0, x, &g00, &g11)
        fx = c.j0 * g00 - w
        if fx == 0.0:
            c.warm_rho = x
            c.warm_valid = True
            return x
        if (fx > 0.0) == (fb > 0.0):
            b = x
            fb = fx
        else:
            a = x
            fa = fx
        if b - a <= c.rho_tol:
            break
        dfx = c.j0 * g11
        newton_ok = dfx != 0.0 and isfinite(dfx)
        xn = 0.0
        if newton_ok:
            step = fx / dfx
            xn = x - step
            if not (a < xn < b):
                newton_ok = False
            elif fabs(step) <= 0.25 * c.rho_tol:
                c.warm_rho = xn
                c.warm_valid = True
                return xn
        if newton_ok and (it & 1) == 0:
            x = xn
        else:
            x = 0.5 * (a + b)
    else:
        raise NumericFailure(
            f"rho root-find did not reach tol {c.rho_tol} in {c.max_iter} "
            "iterations"
        )
    c.warm_rho = 0.5 * (a + b)
    c.warm_valid = True
    return c.warm_rho


cdef int _invert_state(
    _Ctx c, double* zp, double t, double* J, double* G, double* X
) except -1:
    """Layerwise inverse at a projected point; fills the extended polar
    state ``X = (v0, rho, zeta0, zeta1)``.

    Also returns (in ``G``, row-major 4x4) the full Gamma block at the
    recovered ``(v0, rho)``, which the caller reuses for the drive —
    the saturation stage touches only ``zeta``, never ``(v0, rho)``.
    """
    cdef double v0 = zp[0]
    cdef double w = c.tau * zp[1] + v0 - J[0]
    cdef double rho = _solve_rho(c, v0, w)
    cdef double g11, g11_floor, F0, F1, s, LF1, q, sigma_rho, u, det, wedge_floor
    _gamma_block(c, v0, rho, 3, 3, G)
    g11 = c.j0 * G[5]
    g11_floor = 1e-13 * fabs(c.j0) * c.mu
    if fabs(g11) < g11_floor:
        g11 = copysign(g11_floor, g11)
    F0 = zp[1]
    # second-derivative layer: tau z2 = (-1 + J0 G10) F0 + J0 G11 F1 + dI0
    F1 = (c.tau * zp[2] - (-1.0 + c.j0 * G[4]) * F0 - J[3]) / g11
    s = c.tau * F1 + rho - c.j1 * G[1]
    # third-derivative layer: tau z3 = (-1 + J0 G10) z2 + J0 G20 F0^2
    #   + 2 J0 G21 F0 F1 + J0 G22 F1^2 + J0 G11 LF1 + d2I0
    LF1 = (
        c.tau * zp[3]
        - (-1.0 + c.j0 * G[4]) * zp[2]
        - c.j0 * G[8] * F0 * F0
        - 2.0 * c.j0 * G[9] * F0 * F1
        - c.j0 * G[10] * F1 * F1
        - J[6]
    ) / g11
    q = cpow(J[1], 2.0) + cpow(J[2], 2.0)
    sigma_rho = (q - s * s) / (c.tau * rho)
    u = c.tau * LF1 - c.j1 * G[5] * F0 - (-1.0 + c.j1 * G[6]) * F1 - sigma_rho
    det = J[1] * J[5] - J[2] * J[4]
    wedge_floor = 0.5 * c.mu_wedge
    if wedge_floor < 1e-300:
        wedge_floor = 1e-300
    if fabs(det) < wedge_floor or det == 0.0:
        raise AssumptionViolation(
            f"input wedge {det} at t={t} below half the certified bound "
            f"{c.mu_wedge}; angular system singular"
        )
    if not (isfinite(v0) and isfinite(rho)):
        raise ValueError("polar state must be finite")
    X[0] = v0
    X[1] = rho
    X[2] = (s * J[5] - u * J[2]) / det
    X[3] = (J[1] * u - J[4] * s) / det
    return 0


cdef void _saturate(_Ctx c, double* X):
    """Scale the angular block by the quintic cut-off of its magnitude."""
    cdef double m = hypot(X[2], X[3])
    cdef double p, sd
    if m <= c.R - 1.0:
        p = 1.0
    elif m >= c.R:
        p = 0.0
    else:
        sd = m - (c.R - 1.0)
        p = 1.0 - sd * sd * sd * (10.0 - 15.0 * sd + 6.0 * sd * sd)
    X[2] = p * X[2]
    X[3] = p * X[3]


cdef int _pseudo_inverse(
    _Ctx c, double* z, double y_sign, double t, double* vhat
) except -1:
    """Full reconstruction ``Phi(Sat(Sinv_t(Pi_t(z))))`` into ``vhat[3]``."""
    cdef double J[12]
    cdef double zp[4]
    cdef double G[16]
    cdef double X[4]
    _jet4(c, t, J)
    _project(c, z, y_sign, zp)
    _invert_state(c, zp, t, J, G, X)
    _saturate(c, X)
    vhat[0] = X[0]
    vhat[1] = X[1] * X[2]
    vhat[2] = X[1] * X[3]
    return 0


# ---------------------------------------------------------------------------
# Fourth Lie derivative (the embedded-mode drive)
# ---------------------------------------------------------------------------


cdef double _l4h_from_G(
    _Ctx c, double* G, double* J, double v0, double rho, double ze0, double ze1
):
    """``L^4 h`` at the extended polar point, from its cached Gamma block.

    Same expansion as the analytic reference: polar field, one-step
    total derivatives, Gamma-cache derivatives along the flow, closing
    with the fourth derivative.  ``rho = 0`` takes the aligned-lift
    limits (never reached from the saturated reconstruction, whose
    ``rho >= eta > 0``).
    """
    cdef double tau = c.tau
    cdef double c1 = 1.0 / tau
    cdef double j0 = c.j0
    cdef double j1 = c.j1
    cdef double s, u, w2, q, p1, qd, F0, F1, sigma_rho, du, s_dot, LF0, LF1
    cdef double dG10, dG11, dG12, dG20, dG21, dG22, S3, dsigma_rho, L2F1
    s = J[1] * ze0 + J[2] * ze1
    u = J[4] * ze0 + J[5] * ze1
    w2 = J[7] * ze0 + J[8] * ze1
    q = cpow(J[1], 2.0) + cpow(J[2], 2.0)
    p1 = J[1] * J[4] + J[2] * J[5]
    qd = 2.0 * p1
    F0 = c1 * (-v0 + j0 * G[0] + J[0])
    F1 = c1 * (-rho + j1 * G[1] + s)
    if rho > 0.0:
        sigma_rho = (q - s * s) / (tau * rho)
        du = w2 + (p1 - s * u) / (tau * rho)
    else:
        sigma_rho = 0.0
        du = w2
    s_dot = u + sigma_rho
    LF0 = c1 * ((-1.0 + j0 * G[4]) * F0 + j0 * G[5] * F1 + J[3])
    LF1 = c1 * (j1 * G[5] * F0 + (-1.0 + j1 * G[6]) * F1 + sigma_rho + u)
    dG10 = G[8] * F0 + G[9] * F1
    dG11 = G[9] * F0 + G[10] * F1
    dG12 = G[10] * F0 + G[11] * F1
    dG20 = G[12] * F0 + G[13] * F1
    dG21 = G[13] * F0 + G[14] * F1
    dG22 = G[14] * F0 + G[15] * F1
    S3 = c1 * (
        (-1.0 + j0 * G[4]) * LF0
        + j0 * G[8] * F0 * F0
        + 2.0 * j0 * G[9] * F0 * F1
        + j0 * G[10] * F1 * F1
        + j0 * G[5] * LF1
        + J[6]
    )
    if rho > 0.0:
        dsigma_rho = (qd - 2.0 * s * s_dot) / (tau * rho) - sigma_rho * F1 / rho
    else:
        dsigma_rho = 0.0
    L2F1 = c1 * (
        j1 * dG11 * F0
        + j1 * G[5] * LF0
        + (-1.0 + j1 * G[6]) * LF1
        + j1 * dG12 * F1
        + dsigma_rho
        + du
    )
    return c1 * (
        (-1.0 + j0 * G[4]) * S3
        + j0 * dG10 * LF0
        + j0 * dG20 * F0 * F0
        + 2.0 * j0 * G[8] * F0 * LF0
        + 2.0 * j0 * dG21 * F0 * F1
        + 2.0 * j0 * G[9] * (LF0 * F1 + F0 * LF1)
        + j0 * dG22 * F1 * F1
        + 2.0 * j0 * G[10] * F1 * LF1
        + j0 * dG11 * LF1
        + j0 * G[5] * L2F1
        + J[9]
    )


# ---------------------------------------------------------------------------
# Observer field and step
# ---------------------------------------------------------------------------


cdef int _z_rhs(_Ctx c, double* z, double y, double t, double* out) except -1:
    """Embedded-coordinate observer field
    ``A z + L4h(Sat(Sinv_t(Pi_t(z))), t) W - K (z0 - y)``.

    As in the reference, the drive is evaluated at the saturated *polar*
    reconstruction (radial estimate retained even while the angular
    cut-off is active), reusing the Gamma block from the inversion.
    """
    cdef double J[12]
    cdef double zp[4]
    cdef double G[16]
    cdef double X[4]
    cdef double drive, e
    _jet4(c, t, J)
    _project(c, z, y, zp)
    _invert_state(c, zp, t, J, G, X)
    _saturate(c, X)
    drive = _l4h_from_G(c, G, J, X[0], X[1], X[2], X[3])
    e = z[0] - y
    out[0] = z[1] - c.K0 * e
    out[1] = z[2] - c.K1 * e
    out[2] = z[3] - c.K2 * e
    out[3] = drive - c.K3 * e
    return 0


cdef int _rk4_z(
    _Ctx c, double* z, double y, double t, double dt, double* zout
) except -1:
    """Four-stage step of the embedded observer field, output held."""
    cdef double k1[4]
    cdef double k2[4]
    cdef double k3[4]
    cdef double k4[4]
    cdef double st[4]
    cdef int i
    _z_rhs(c, z, y, t, k1)
    for i in range(4):
        st[i] = z[i] + 0.5 * dt * k1[i]
    _z_rhs(c, st, y, t + 0.5 * dt, k2)
    for i in range(4):
        st[i] = z[i] + 0.5 * dt * k2[i]
    _z_rhs(c, st, y, t + 0.5 * dt, k3)
    for i in range(4):
        st[i] = z[i] + dt * k3[i]
    _z_rhs(c, st, y, t + dt, k4)
    for i in range(4):
        zout[i] = z[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return 0


# ---------------------------------------------------------------------------
# Probes (testing access to the internal kernels)
# ---------------------------------------------------------------------------


def gamma_probe(params, input_signal, v0, rho, pmax=3, jmax=3):
    """Gamma block as computed by the compiled kernels, for comparison
    against the analytic module."""
    cdef _Ctx c = _make_ctx(params, input_signal, None, None)
    cdef double out[20]
    cdef int p, j
    if not (0 <= pmax <= 4 and 0 <= jmax <= 3):
        raise ValueError(f"probe orders out of range: pmax={pmax}, jmax={jmax}")
    _gamma_block(c, v0, rho, pmax, jmax, out)
    res = np.empty((pmax + 1, jmax + 1))
    for p in range(pmax + 1):
        for j in range(jmax + 1):
            res[p, j] = out[p * (jmax + 1) + j]
    return res


def solve_rho_probe(cfg, params, input_signal, v0, w):
    """Radius recovered by the compiled radial solve (cold start)."""
    cdef _Ctx c = _make_ctx(params, input_signal, cfg, None)
    return _solve_rho(c, v0, w)


def reconstruct_probe(cfg, params, input_signal, z, y_sign, t):
    """Cartesian reconstruction by the compiled pseudo-inverse."""
    cdef _Ctx c = _make_ctx(params, input_signal, cfg, None)
    cdef double zz[4]
    cdef double vh[3]
    cdef int i
    z = np.asarray(z, dtype=float).reshape(4)
    for i in range(4):
        zz[i] = z[i]
    _pseudo_inverse(c, zz, y_sign, t, vh)
    return np.array([vh[0], vh[1], vh[2]])


def drive_probe(params, input_signal, v0, rho, zeta, t):
    """Fourth Lie derivative at an extended polar point, compiled path."""
    cdef _Ctx c = _make_ctx(params, input_signal, None, None)
    cdef double J[12]
    cdef double G[16]
    zeta = np.asarray(zeta, dtype=float).reshape(2)
    _jet4(c, t, J)
    _gamma_block(c, v0, rho, 3, 3, G)
    return _l4h_from_G(c, G, J, v0, rho, zeta[0], zeta[1])


def plant_field_probe(params, input_signal, v, t):
    """Plant vector field by the compiled kernels."""
    cdef _Ctx c = _make_ctx(params, input_signal, None, None)
    cdef double vv[3]
    cdef double out[3]
    cdef int i
    v = np.asarray(v, dtype=float).reshape(3)
    for i in range(3):
        vv[i] = v[i]
    _f_cart(c, vv, t, out)
    return np.array([out[0], out[1], out[2]])


# ---------------------------------------------------------------------------
# Chunk drivers
# ---------------------------------------------------------------------------


def plant_chunk(v, k0, n_max, dt, params, input_signal, out_t, out_v, out_y, progress):
    """Advance the plant ``n_max`` steps from step index ``k0``.

    Writes rows ``k0+1 .. k0+n_done``; ``progress[0]`` tracks completed
    steps for callers recovering from an exception.  Returns
    ``(n_done, reason, v)``.
    """
    cdef _Ctx c = _make_ctx(params, input_signal, None, None)
    cdef double[::1] t_view = out_t
    cdef double[:, ::1] v_view = out_v
    cdef double[::1] y_view = out_y
    cdef long[::1] prog = progress
    cdef double vv[3]
    cdef double vn[3]
    cdef Py_ssize_t i, k, row
    cdef long kk0 = k0
    cdef long nn = n_max
    cdef double ddt = dt
    v = np.asarray(v, dtype=float).reshape(3)
    vv[0] = v[0]
    vv[1] = v[1]
    vv[2] = v[2]
    for i in range(nn):
        prog[0] = i
        k = kk0 + i
        _rk4_v(c, vv, (<double> k) * ddt, ddt, vn)
        if not (isfinite(vn[0]) and isfinite(vn[1]) and isfinite(vn[2])):
            return i, PLANT_NONFINITE, np.array([vv[0], vv[1], vv[2]])
        vv[0] = vn[0]
        vv[1] = vn[1]
        vv[2] = vn[2]
        row = k + 1
        t_view[row] = (<double> row) * ddt
        v_view[row, 0] = vv[0]
        v_view[row, 1] = vv[1]
        v_view[row, 2] = vv[2]
        y_view[row] = vv[0]
    prog[0] = nn
    return nn, END, np.array([vv[0], vv[1], vv[2]])


def cosim_chunk(
    mode,
    v,
    z,
    vhat,
    k0,
    n_max,
    dt,
    cfg,
    params,
    input_signal,
    gain,
    out_t,
    out_v,
    out_y,
    out_vhat,
    out_zhat,
    out_mode,
    out_err,
    progress,
):
    """Co-integrate plant and observer up to ``n_max`` steps from ``k0``.

    Same protocol as the reference backend: the output sample ``y = v0``
    is taken at each step start and held through the observer stages; a
    sample on the far side of the threshold band returns ``SWITCH`` with
    the step unconsumed (jump maps are the caller's); embedded mode
    refreshes the estimate through the pseudo-inverse at ``t + dt``.
    Rows ``k0+1 .. k0+n_done`` are written.
    """
    cdef _Ctx c = _make_ctx(params, input_signal, cfg, gain)
    cdef double[::1] t_view = out_t
    cdef double[:, ::1] v_view = out_v
    cdef double[::1] y_view = out_y
    cdef double[:, ::1] vhat_view = out_vhat
    cdef double[:, ::1] zhat_view = out_zhat
    cdef signed char[::1] mode_view = out_mode
    cdef double[::1] err_view = out_err
    cdef long[::1] prog = progress
    cdef double vv[3]
    cdef double vn[3]
    cdef double vh[3]
    cdef double vhn[3]
    cdef double zz[4]
    cdef double zn[4]
    cdef double d0, d1, d2
    cdef Py_ssize_t i, k, row
    cdef long kk0 = k0
    cdef long nn = n_max
    cdef double ddt = dt
    cdef double t, y, gap
    cdef int mode_c = mode
    cdef int desired
    cdef bint have_z = z is not None
    cdef int j

    v = np.asarray(v, dtype=float).reshape(3)
    vhat = np.asarray(vhat, dtype=float).reshape(3)
    for j in range(3):
        vv[j] = v[j]
        vh[j] = vhat[j]
    if have_z:
        z = np.asarray(z, dtype=float).reshape(4)
        for j in range(4):
            zz[j] = z[j]
    elif mode_c == MODE_Z:
        raise ValueError("embedded mode needs an embedded state z")

    for i in range(nn):
        prog[0] = i
        k = kk0 + i
        t = (<double> k) * ddt
        y = vv[0]
        gap = fabs(y) - c.delta
        desired = MODE_Z if gap > 0.0 else (MODE_V if gap < 0.0 else mode_c)
        if desired != mode_c:
            return (
                i,
                SWITCH,
                np.array([vv[0], vv[1], vv[2]]),
                np.array([zz[0], zz[1], zz[2], zz[3]]) if have_z else None,
                np.array([vh[0], vh[1], vh[2]]),
            )
        if mode_c == MODE_Z:
            _rk4_z(c, zz, y, t, ddt, zn)
            if not (
                isfinite(zn[0])
                and isfinite(zn[1])
                and isfinite(zn[2])
                and isfinite(zn[3])
            ):
                return (
                    i,
                    OBSERVER_NONFINITE,
                    np.array([vv[0], vv[1], vv[2]]),
                    np.array([zz[0], zz[1], zz[2], zz[3]]),
                    np.array([vh[0], vh[1], vh[2]]),
                )
            for j in range(4):
                zz[j] = zn[j]
            _pseudo_inverse(c, zz, y, t + ddt, vh)
        else:
            _rk4_v(c, vh, t, ddt, vhn)
            if not (isfinite(vhn[0]) and isfinite(vhn[1]) and isfinite(vhn[2])):
                return (
                    i,
                    OBSERVER_NONFINITE,
                    np.array([vv[0], vv[1], vv[2]]),
                    None,
                    np.array([vh[0], vh[1], vh[2]]),
                )
            for j in range(3):
                vh[j] = vhn[j]
        _rk4_v(c, vv, t, ddt, vn)
        if not (isfinite(vn[0]) and isfinite(vn[1]) and isfinite(vn[2])):
            return (
                i,
                PLANT_NONFINITE,
                np.array([vv[0], vv[1], vv[2]]),
                np.array([zz[0], zz[1], zz[2], zz[3]]) if have_z else None,
                np.array([vh[0], vh[1], vh[2]]),
            )
        for j in range(3):
            vv[j] = vn[j]
        row = k + 1
        t_view[row] = (<double> row) * ddt
        v_view[row, 0] = vv[0]
        v_view[row, 1] = vv[1]
        v_view[row, 2] = vv[2]
        y_view[row] = vv[0]
        vhat_view[row, 0] = vh[0]
        vhat_view[row, 1] = vh[1]
        vhat_view[row, 2] = vh[2]
        if mode_c == MODE_Z:
            for j in range(4):
                zhat_view[row, j] = zz[j]
        else:
            for j in range(4):
                zhat_view[row, j] = NAN
        mode_view[row] = mode_c
        d0 = vh[0] - vv[0]
        d1 = vh[1] - vv[1]
        d2 = vh[2] - vv[2]
        err_view[row] = sqrt(d0 * d0 + d1 * d1 + d2 * d2)
    prog[0] = nn
    return (
        nn,
        END,
        np.array([vv[0], vv[1], vv[2]]),
        np.array([zz[0], zz[1], zz[2], zz[3]]) if have_z else None,
        np.array([vh[0], vh[1], vh[2]]),
    )
