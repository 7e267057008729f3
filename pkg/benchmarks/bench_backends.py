"""Benchmark the compiled chunk drivers against the reference backend.

Runs the bundled demonstration scenario through both backends on the
same grid and reports wall time, steps per second, and speedup, plus a
microbenchmark of the ring-coupling moment kernel that dominates the
cost profile.  Backend selection uses the same environment switch the
library honors (``RINGOBS_FORCE_PUREPY``), so each timed run exercises
the exact dispatch path users get.

Usage::

    python3 benchmarks/bench_backends.py [--dt 1e-3] [--t-end 4.0]
"""

import argparse
import os
import time

import numpy as np

from ringobs import _backend
from ringobs.model import gamma_block
from ringobs.sim import canonical_scenario, run_scenario


def _time_scenario(scenario, force_purepy: bool) -> tuple[float, object]:
    """Run ``scenario`` once under the selected backend, returning seconds."""
    if force_purepy:
        os.environ["RINGOBS_FORCE_PUREPY"] = "1"
    else:
        os.environ.pop("RINGOBS_FORCE_PUREPY", None)
    t0 = time.perf_counter()
    rec = run_scenario(scenario)
    return time.perf_counter() - t0, rec


def _bench_gamma(params, n_calls: int = 200) -> tuple[float, float]:
    """Per-call seconds for the full moment block, reference vs compiled."""
    import ringobs._core as core
    from ringobs.model import circular_input

    sig = circular_input(0.09, 0.01, 2.0 * np.pi / 10.0)
    t0 = time.perf_counter()
    for i in range(n_calls):
        gamma_block(params, -1.5 + 1e-3 * i, 1.2, pmax=3, jmax=3)
    t_ref = (time.perf_counter() - t0) / n_calls
    t0 = time.perf_counter()
    for i in range(n_calls):
        core.gamma_probe(params, sig, -1.5 + 1e-3 * i, 1.2, 3, 3)
    t_core = (time.perf_counter() - t0) / n_calls
    return t_ref, t_core


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dt", type=float, default=1e-3, help="step size (default 1e-3)")
    ap.add_argument(
        "--t-end", type=float, default=4.0, help="horizon in time units (default 4)"
    )
    args = ap.parse_args(argv)

    s = canonical_scenario()
    s = type(s)(
        params=s.params,
        input_signal=s.input_signal,
        v0_init=s.v0_init,
        t_end=args.t_end,
        dt=args.dt,
        vhat0_init=s.vhat0_init,
        observer_cfg=s.observer_cfg,
        l=s.l,
    )
    n_steps = s.n_steps()

    if not _backend.compiled_available():
        print("compiled backend unavailable; nothing to compare")
        return 1

    t_core, rec_core = _time_scenario(s, force_purepy=False)
    t_ref, rec_ref = _time_scenario(s, force_purepy=True)
    os.environ.pop("RINGOBS_FORCE_PUREPY", None)

    drift = float(np.max(np.abs(rec_core.v_hat - rec_ref.v_hat)))
    print(f"scenario: {n_steps} steps, dt={args.dt:g}, t_end={args.t_end:g}")
    print(
        f"  reference backend: {t_ref:8.3f} s  ({n_steps / t_ref:10.0f} steps/s)"
    )
    print(
        f"  compiled backend:  {t_core:8.3f} s  ({n_steps / t_core:10.0f} steps/s)"
    )
    print(f"  speedup: {t_ref / t_core:.1f}x")
    print(f"  max |v_hat| disagreement: {drift:.3e}")
    print(f"  switch logs identical: {rec_core.switch_log == rec_ref.switch_log}")

    g_ref, g_core = _bench_gamma(s.params)
    print("moment-block kernel (4x4, 256 orientation nodes):")
    print(f"  reference: {g_ref * 1e6:8.2f} us/call")
    print(f"  compiled:  {g_core * 1e6:8.2f} us/call")
    print(f"  speedup: {g_ref / g_core:.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
