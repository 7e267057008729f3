"""Fixed-step RK4 co-simulation of plant and observer, scenarios, CSV.

The plant and the observer share one fixed time grid: each step feeds
the observer the output sample ``y(t) = v0(t)`` taken at the step
start (no interpolation), then advances both systems with the classical
Runge-Kutta scheme.  Scenario files are TOML with sections
``model`` / ``input`` / ``observer`` / ``sim``; unknown keys are
rejected so typos cannot silently fall back to defaults.

A nonzero ``model.sigmoid.h0`` in a scenario file configures the
thresholded firing-rate function ``tanh(mu x - h0)`` directly; the
equivalent odd-sigmoid form (threshold absorbed into the drive and the
mean potential shifted) is available separately through the model
transform utilities but is never applied implicitly by the loader.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import tomli

from ringobs import _backend, _purepy
from ringobs.errors import AssumptionViolation, NumericFailure
from ringobs.inverse import InverseConfig
from ringobs.model import (
    InputSignal,
    ModelParams,
    SelectivityDistribution,
    SigmoidSpec,
    circular_input,
    constant_input,
    f_cartesian,
    invariant_radius,
)
from ringobs.observer import ObserverState, _rk4, gain_matrix, observer_init, step_observer

__all__ = [
    "Scenario",
    "TrajectoryRecord",
    "rk4_step",
    "run_scenario",
    "write_csv",
    "read_csv",
    "scenario_from_dict",
    "load_scenario",
    "canonical_scenario",
    "CSV_HEADER",
]

CSV_HEADER = "t,v0,v1,v2,y,vhat0,vhat1,vhat2,zhat0,zhat1,zhat2,zhat3,mode,err"

_MODE_CHAR = {_purepy.MODE_Z: "z", _purepy.MODE_V: "v"}


@dataclass
class Scenario:
    """One co-simulation setup: model, input, initial data, grid.

    ``vhat0_init is None`` runs the plant alone (observer columns stay
    blank in the record); otherwise ``observer_cfg`` and ``l`` must be
    set.
    """

    params: ModelParams
    input_signal: InputSignal
    v0_init: np.ndarray
    t_end: float
    dt: float
    vhat0_init: Optional[np.ndarray] = None
    observer_cfg: Optional[InverseConfig] = None
    l: Optional[float] = None

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end > 0.0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        self.v0_init = np.asarray(self.v0_init, dtype=float).reshape(3)
        if self.vhat0_init is not None:
            self.vhat0_init = np.asarray(self.vhat0_init, dtype=float).reshape(3)
            if self.observer_cfg is None or self.l is None:
                raise ValueError(
                    "observer runs need observer_cfg and l alongside vhat0_init"
                )
        if self.observer_cfg is not None:
            r = float(np.linalg.norm(self.v0_init))
            if r > self.observer_cfg.R:
                warnings.warn(
                    f"|v0_init| = {r:.6g} exceeds the working radius "
                    f"R = {self.observer_cfg.R:.6g}; the reconstruction "
                    "saturates outside that ball",
                    stacklevel=2,
                )

    def n_steps(self) -> int:
        q = self.t_end / self.dt
        return int(math.floor(q + 1e-9 + q * 1e-12))


@dataclass
class TrajectoryRecord:
    """Row-wise co-simulation history on the shared grid.

    ``z_hat`` holds NaN in free-running rows (written as blanks);
    observer arrays are ``None`` for plant-only runs.  ``aborted``
    carries the diagnostic when an observer invariant violation cut the
    run short (the arrays then hold the partial history).
    """

    t: np.ndarray
    v: np.ndarray
    y: np.ndarray
    v_hat: Optional[np.ndarray] = None
    z_hat: Optional[np.ndarray] = None
    mode: Optional[np.ndarray] = None
    err: Optional[np.ndarray] = None
    switch_log: tuple = ()
    aborted: Optional[str] = None

    def n_rows(self) -> int:
        return self.t.shape[0]


def rk4_step(rhs, state, t: float, dt: float):
    """One classical 4-stage Runge-Kutta update of ``state`` at ``t``.

    Raises:
        NumericFailure: a stage value is non-finite.
    """
    x = np.asarray(state, dtype=float)
    k1 = np.asarray(rhs(x, t))
    k2 = np.asarray(rhs(x + 0.5 * dt * k1, t + 0.5 * dt))
    k3 = np.asarray(rhs(x + 0.5 * dt * k2, t + 0.5 * dt))
    k4 = np.asarray(rhs(x + dt * k3, t + dt))
    for name, k in (("k1", k1), ("k2", k2), ("k3", k3), ("k4", k4)):
        if not np.all(np.isfinite(k)):
            raise NumericFailure(f"non-finite RK4 stage {name} at t={t}")
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def run_scenario(s: Scenario) -> TrajectoryRecord:
    """Integrate the scenario on its fixed grid.

    The observer receives ``y = v0`` sampled at each step start; mode
    changes apply the jump maps at step boundaries.  An observer
    invariant violation (third switch request, diverging estimate,
    violated wedge assumption) stops the run and returns the partial
    record with the diagnostic in ``aborted``; plant divergence raises
    ``NumericFailure``.
    """
    n_steps = s.n_steps()
    n = n_steps + 1
    out_t = np.full(n, np.nan)
    out_v = np.full((n, 3), np.nan)
    out_y = np.full(n, np.nan)
    v = np.array(s.v0_init, dtype=float)
    out_t[0] = 0.0
    out_v[0] = v
    out_y[0] = v[0]
    backend = _backend.get_backend(s.params, s.input_signal)
    progress = np.zeros(1, dtype=np.int64)

    if s.vhat0_init is None:
        k = 0
        while k < n_steps:
            n_done, reason, v = backend.plant_chunk(
                v, k, n_steps - k, s.dt, s.params, s.input_signal,
                out_t, out_v, out_y, progress,
            )
            k += n_done
            if reason == _purepy.PLANT_NONFINITE:
                raise NumericFailure(
                    f"plant state became non-finite during the step starting "
                    f"at t={k * s.dt}"
                )
        return TrajectoryRecord(t=out_t, v=out_v, y=out_y)

    cfg = s.observer_cfg
    gain = gain_matrix(s.l)
    out_vhat = np.full((n, 3), np.nan)
    out_zhat = np.full((n, 4), np.nan)
    out_mode = np.full(n, _purepy.MODE_V, dtype=np.int8)
    out_err = np.full(n, np.nan)

    state0 = observer_init(cfg, s.params, s.input_signal, s.vhat0_init, v[0], 0.0)
    mode_code = _purepy.MODE_Z if state0.mode == "z" else _purepy.MODE_V
    z = state0.z_hat
    vhat = state0.v_hat
    log: tuple = ()
    out_vhat[0] = vhat
    if z is not None:
        out_zhat[0] = z
    out_mode[0] = mode_code
    out_err[0] = float(np.linalg.norm(vhat - v))

    plant_field = lambda x, t: f_cartesian(s.params, s.input_signal, x, t)
    k = 0
    aborted: Optional[str] = None
    while k < n_steps:
        progress[0] = 0
        try:
            n_done, reason, v, z, vhat = backend.cosim_chunk(
                mode_code, v, z, vhat, k, n_steps - k, s.dt,
                cfg, s.params, s.input_signal, gain,
                out_t, out_v, out_y, out_vhat, out_zhat, out_mode, out_err,
                progress,
            )
        except AssumptionViolation as exc:
            k += int(progress[0])
            aborted = str(exc)
            break
        k += n_done
        if reason == _purepy.END:
            break
        if reason == _purepy.SWITCH:
            t = k * s.dt
            y = v[0]
            st = ObserverState(
                mode=_MODE_CHAR[mode_code], v_hat=vhat, z_hat=z, switch_log=log
            )
            try:
                st = step_observer(st, cfg, s.params, s.input_signal, gain, y, t, s.dt)
            except AssumptionViolation as exc:
                aborted = str(exc)
                break
            log = st.switch_log
            mode_code = _purepy.MODE_Z if st.mode == "z" else _purepy.MODE_V
            z = st.z_hat
            vhat = st.v_hat
            v_next = _rk4(plant_field, v, t, s.dt)
            if not np.all(np.isfinite(v_next)):
                raise NumericFailure(
                    f"plant state became non-finite during the step starting at t={t}"
                )
            v = v_next
            row = k + 1
            out_t[row] = row * s.dt
            out_v[row] = v
            out_y[row] = v[0]
            out_vhat[row] = vhat
            if z is not None:
                out_zhat[row] = z
            out_mode[row] = mode_code
            out_err[row] = float(np.linalg.norm(vhat - v))
            k += 1
        elif reason == _purepy.OBSERVER_NONFINITE:
            aborted = (
                f"observer state diverged during the step starting at t={k * s.dt} "
                "(non-finite estimate)"
            )
            break
        elif reason == _purepy.PLANT_NONFINITE:
            raise NumericFailure(
                f"plant state became non-finite during the step starting at t={k * s.dt}"
            )

    rows = k + 1 if aborted is not None else n
    mode_arr = np.array([_MODE_CHAR[int(c)] for c in out_mode[:rows]], dtype="<U1")
    return TrajectoryRecord(
        t=out_t[:rows],
        v=out_v[:rows],
        y=out_y[:rows],
        v_hat=out_vhat[:rows],
        z_hat=out_zhat[:rows],
        mode=mode_arr,
        err=out_err[:rows],
        switch_log=log,
        aborted=aborted,
    )


# ---------------------------------------------------------------------------
# CSV persistence
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return "%.17g" % x


def write_csv(rec: TrajectoryRecord, path, stride: int = 100) -> None:
    """Write the record as CSV: header, then every ``stride``-th row plus
    the final row.  Blank cells stand for fields without a value
    (embedded coordinates while free-running; all observer columns in a
    plant-only record)."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    n = rec.n_rows()
    idx = list(range(0, n, stride))
    if idx[-1] != n - 1:
        idx.append(n - 1)
    has_obs = rec.v_hat is not None
    lines = [CSV_HEADER]
    for i in idx:
        cells = [
            _fmt(rec.t[i]),
            _fmt(rec.v[i, 0]),
            _fmt(rec.v[i, 1]),
            _fmt(rec.v[i, 2]),
            _fmt(rec.y[i]),
        ]
        if has_obs:
            cells += [_fmt(rec.v_hat[i, j]) for j in range(3)]
            cells += [
                "" if math.isnan(rec.z_hat[i, j]) else _fmt(rec.z_hat[i, j])
                for j in range(4)
            ]
            cells.append(str(rec.mode[i]))
            cells.append(_fmt(rec.err[i]))
        else:
            cells += [""] * 9
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path) -> TrajectoryRecord:
    """Read a trajectory CSV back into arrays (blanks become NaN; a file
    with entirely blank observer columns yields a plant-only record)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header in {path}: {header!r}")
        t_l, v_l, y_l, vhat_l, zhat_l, mode_l, err_l = [], [], [], [], [], [], []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            c = line.split(",")
            if len(c) != 14:
                raise ValueError(f"malformed CSV row in {path}: {line!r}")
            t_l.append(float(c[0]))
            v_l.append([float(c[1]), float(c[2]), float(c[3])])
            y_l.append(float(c[4]))
            vhat_l.append([float(x) if x else math.nan for x in c[5:8]])
            zhat_l.append([float(x) if x else math.nan for x in c[8:12]])
            mode_l.append(c[12])
            err_l.append(float(c[13]) if c[13] else math.nan)
    vhat = np.array(vhat_l)
    plant_only = bool(np.all(np.isnan(vhat)))
    return TrajectoryRecord(
        t=np.array(t_l),
        v=np.array(v_l),
        y=np.array(y_l),
        v_hat=None if plant_only else vhat,
        z_hat=None if plant_only else np.array(zhat_l),
        mode=None if plant_only else np.array(mode_l, dtype="<U1"),
        err=None if plant_only else np.array(err_l),
    )


# ---------------------------------------------------------------------------
# Scenario files
# ---------------------------------------------------------------------------

_SCHEMA = {
    "model": {
        "j0": None,
        "j1": None,
        "tau": None,
        "theta_nodes": None,
        "sigmoid": {"mu": None, "h0": None},
        "dist": {"type": None, "r0": None, "nodes": None, "weights": None},
    },
    "input": {
        "type": None,
        "epsilon": None,
        "beta": None,
        "omega": None,
        "phase": None,
        "i0_offset": None,
        "i0": None,
        "i1": None,
        "i2": None,
    },
    "observer": {
        "delta": None,
        "eta": None,
        "R": None,
        "l": None,
        "rho_tol": None,
        "max_iter": None,
    },
    "sim": {"t_end": None, "dt": None, "v0_init": None, "vhat0_init": None},
}


def _check_keys(d: dict, schema: dict, prefix: str = "") -> None:
    for key, val in d.items():
        path = f"{prefix}{key}"
        if key not in schema:
            raise ValueError(f"unknown configuration key: {path}")
        sub = schema[key]
        if isinstance(sub, dict):
            if not isinstance(val, dict):
                raise ValueError(f"configuration key {path} must be a table")
            _check_keys(val, sub, prefix=path + ".")


def _require(table: dict, key: str, section: str):
    if key not in table:
        raise ValueError(f"missing configuration key: {section}.{key}")
    return table[key]


def scenario_from_dict(conf: dict) -> Scenario:
    """Build a scenario from a nested configuration dictionary.

    Unknown keys raise ``ValueError``.  ``model.sigmoid.h0`` selects the
    thresholded firing-rate function ``tanh(mu x - h0)``.  ``observer.R``
    defaults to the plant's invariant radius for the configured model
    and input.
    """
    _check_keys(conf, _SCHEMA)
    model = conf.get("model", {})
    sig = model.get("sigmoid", {})
    mu = float(_require(sig, "mu", "model.sigmoid"))
    h0 = float(sig.get("h0", 0.0))
    dist_conf = model.get("dist", {})
    dist_type = _require(dist_conf, "type", "model.dist")
    if dist_type == "dirac":
        dist = SelectivityDistribution.dirac(float(_require(dist_conf, "r0", "model.dist")))
    elif dist_type == "nodes":
        dist = SelectivityDistribution.from_nodes(
            _require(dist_conf, "nodes", "model.dist"),
            _require(dist_conf, "weights", "model.dist"),
        )
    else:
        raise ValueError(f"unknown model.dist.type: {dist_type!r}")
    params = ModelParams(
        j0=float(_require(model, "j0", "model")),
        j1=float(_require(model, "j1", "model")),
        tau=float(_require(model, "tau", "model")),
        sigmoid=SigmoidSpec(mu=mu, transform=(1.0, 0.0, h0)),
        dist=dist,
        theta_nodes=int(model.get("theta_nodes", 128)),
    )

    inp = conf.get("input", {})
    in_type = _require(inp, "type", "input")
    if in_type == "circular":
        signal = circular_input(
            epsilon=float(_require(inp, "epsilon", "input")),
            beta=float(_require(inp, "beta", "input")),
            omega=float(_require(inp, "omega", "input")),
            i0_offset=float(inp.get("i0_offset", 0.0)),
            phase=float(inp.get("phase", 0.0)),
        )
    elif in_type == "constant":
        signal = constant_input(
            float(_require(inp, "i0", "input")),
            (float(inp.get("i1", 0.0)), float(inp.get("i2", 0.0))),
        )
    else:
        raise ValueError(f"unknown input.type: {in_type!r}")

    obs = conf.get("observer", None)
    cfg = None
    l = None
    if obs is not None:
        R = float(obs["R"]) if "R" in obs else invariant_radius(params, signal)
        cfg = InverseConfig(
            delta=float(_require(obs, "delta", "observer")),
            eta=float(_require(obs, "eta", "observer")),
            R=R,
            rho_tol=float(obs.get("rho_tol", 1e-12)),
            max_iter=int(obs.get("max_iter", 200)),
        )
        l = float(_require(obs, "l", "observer"))

    simc = conf.get("sim", {})
    vhat0 = simc.get("vhat0_init", None)
    return Scenario(
        params=params,
        input_signal=signal,
        v0_init=np.asarray(_require(simc, "v0_init", "sim"), dtype=float),
        t_end=float(_require(simc, "t_end", "sim")),
        dt=float(_require(simc, "dt", "sim")),
        vhat0_init=None if vhat0 is None else np.asarray(vhat0, dtype=float),
        observer_cfg=cfg,
        l=l,
    )


def load_scenario(path) -> Scenario:
    """Load a TOML scenario file (sections model/input/observer/sim)."""
    with open(path, "rb") as fh:
        conf = tomli.load(fh)
    return scenario_from_dict(conf)


def canonical_dict() -> dict:
    """Configuration of the reference two-switch estimation scenario."""
    return {
        "model": {
            "j0": -1.0,
            "j1": 1.5,
            "tau": 1.0,
            "theta_nodes": 256,
            "sigmoid": {"mu": 10.0, "h0": 10.0},
            "dist": {"type": "dirac", "r0": 1.0},
        },
        "input": {
            "type": "circular",
            "epsilon": 0.1,
            "beta": 0.1,
            "omega": 2.0 * math.pi / 10.0,
        },
        "observer": {"delta": 0.3, "eta": 1e-3, "l": 15.0},
        "sim": {
            "t_end": 4.0,
            "dt": 1e-5,
            "v0_init": [-3.0, 2.5, -2.0],
            "vhat0_init": [-5.0, 2.0, -1.0],
        },
    }


def canonical_scenario() -> Scenario:
    """Reference scenario: thresholded-sigmoid plant with slowly rotating
    modulated input, observer gain l = 15, two mode switches expected."""
    return scenario_from_dict(canonical_dict())
