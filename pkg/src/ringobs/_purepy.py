"""Pure-Python co-simulation chunk drivers.

Reference backend for the fixed-step integration loops: each driver
advances plant (and observer) over many steps in one call, writing one
output row per step into caller-allocated arrays.  The compiled backend
exposes the same entry points; this module keeps the semantics
definitive by looping the public vector fields and stepping maps.

Chunk drivers return early (without consuming the step) when the output
sample requests an observer mode change, so the caller can apply the
jump maps at the step boundary; they never apply jumps themselves.

Mode codes in the ``out_mode`` array: 0 = embedded ("z"), 1 =
free-running ("v").
"""

from __future__ import annotations

import numpy as np

from ringobs.inverse import pseudo_inverse
from ringobs.model import f_cartesian
from ringobs.observer import _rk4, z_mode_rhs

NAME = "purepy"

MODE_Z = 0
MODE_V = 1

#: Chunk exit reasons.
END = "end"
SWITCH = "switch"
OBSERVER_NONFINITE = "observer-nonfinite"
PLANT_NONFINITE = "plant-nonfinite"


def supports(params, input_signal) -> bool:
    """The reference backend handles every model and input."""
    return True


def plant_chunk(v, k0, n_max, dt, params, input_signal, out_t, out_v, out_y, progress):
    """Advance the plant ``n_max`` steps from step index ``k0``.

    Writes rows ``k0+1 .. k0+n_done`` of ``out_t``/``out_v``/``out_y``;
    ``progress[0]`` tracks completed steps for callers recovering from
    an exception.  Returns ``(n_done, reason, v)``.
    """
    v = np.array(v, dtype=float)
    field = lambda x, s: f_cartesian(params, input_signal, x, s)
    for i in range(n_max):
        progress[0] = i
        k = k0 + i
        v_next = _rk4(field, v, k * dt, dt)
        if not np.all(np.isfinite(v_next)):
            return i, PLANT_NONFINITE, v
        v = v_next
        row = k + 1
        out_t[row] = row * dt
        out_v[row] = v
        out_y[row] = v[0]
    progress[0] = n_max
    return n_max, END, v


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

    Each step samples ``y = v0`` at the step start; if the sample's side
    of the output threshold contradicts ``mode`` the driver returns
    ``(steps_done, SWITCH, v, z, vhat)`` with the step unconsumed.  The
    output sample is held constant through the observer stages of its
    step.  Rows ``k0+1 .. k0+n_done`` are written.
    """
    v = np.array(v, dtype=float)
    z = None if z is None else np.array(z, dtype=float)
    vhat = np.array(vhat, dtype=float)
    field = lambda x, s: f_cartesian(params, input_signal, x, s)
    for i in range(n_max):
        progress[0] = i
        k = k0 + i
        t = k * dt
        y = v[0]
        gap = abs(y) - cfg.delta
        desired = MODE_Z if gap > 0.0 else (MODE_V if gap < 0.0 else mode)
        if desired != mode:
            return i, SWITCH, v, z, vhat
        if mode == MODE_Z:
            z_next = _rk4(
                lambda zz, s: z_mode_rhs(cfg, params, input_signal, gain, zz, y, s),
                z,
                t,
                dt,
            )
            if not np.all(np.isfinite(z_next)):
                return i, OBSERVER_NONFINITE, v, z, vhat
            z = z_next
            vhat = pseudo_inverse(cfg, params, input_signal, z, y, t + dt)
        else:
            vhat_next = _rk4(field, vhat, t, dt)
            if not np.all(np.isfinite(vhat_next)):
                return i, OBSERVER_NONFINITE, v, z, vhat
            vhat = vhat_next
        v_next = _rk4(field, v, t, dt)
        if not np.all(np.isfinite(v_next)):
            return i, PLANT_NONFINITE, v, z, vhat
        v = v_next
        row = k + 1
        out_t[row] = row * dt
        out_v[row] = v
        out_y[row] = v[0]
        out_vhat[row] = vhat
        if mode == MODE_Z:
            out_zhat[row] = z
        else:
            out_zhat[row] = np.nan
        out_mode[row] = mode
        out_err[row] = float(np.linalg.norm(vhat - v))
    progress[0] = n_max
    return n_max, END, v, z, vhat
