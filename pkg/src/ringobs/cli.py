"""Command-line interface: simulate, observe, and audit scenario files.

Subcommands operate on TOML scenario files (sections ``model`` /
``input`` / ``observer`` / ``sim``) and write CSV/JSON artifacts:

- ``simulate``          plant-only trajectory CSV
- ``observe``           plant + observer co-simulation CSV and a
                        text summary (switch times, terminal error)
- ``check-input``       print the input's observability certificates
- ``gamma-table``       tabulate the ring-coupling kernel moments
- ``invert``            reconstruct a state from embedded coordinates,
                        or probe the round-trip error randomly
- ``reproduce-figure``  run the reference two-switch scenario and write
                        the trajectory/log-error files for the figure
                        renderer

Exit codes: 0 success, 2 configuration or I/O error, 3 violated model
assumption, 4 numeric failure.  ``--set section.key=value`` overrides
apply on top of the scenario file and are validated like file keys, so
a typo in an override is rejected rather than silently ignored.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Optional, Sequence

import numpy as np
import tomli

from ringobs.errors import AssumptionViolation, NumericFailure
from ringobs.inverse import pseudo_inverse
from ringobs.model import gamma
from ringobs.observability import T_map, diagnostics, t_delta
from ringobs.sim import (
    Scenario,
    canonical_dict,
    run_scenario,
    scenario_from_dict,
    write_csv,
)

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSUMPTION = 3
EXIT_NUMERIC = 4

_DEFAULT_STRIDE = 100


# ---------------------------------------------------------------------------
# Configuration plumbing
# ---------------------------------------------------------------------------


def _load_conf(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except FileNotFoundError:
        raise ValueError(f"scenario file not found: {path}") from None
    except tomli.TOMLDecodeError as exc:
        raise ValueError(f"invalid TOML in {path}: {exc}") from None


def _parse_override(item: str) -> tuple[list[str], object]:
    """Split ``section.key=value``; the value is parsed as a TOML literal
    (so numbers, booleans, strings, and arrays all work)."""
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise ValueError(f"override must look like section.key=value, got {item!r}")
    try:
        value = tomli.loads(f"v = {raw}")["v"]
    except tomli.TOMLDecodeError:
        value = raw  # bare string
    return key.split("."), value


def _apply_overrides(conf: dict, items: Sequence[str]) -> dict:
    for item in items:
        path, value = _parse_override(item)
        node = conf
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ValueError(f"override path {item!r} crosses a non-table key")
        node[path[-1]] = value
    return conf


def _scenario_from_args(args) -> Scenario:
    conf = _apply_overrides(_load_conf(args.scenario), args.set or [])
    return scenario_from_dict(conf)


def _stride_from_args(args) -> int:
    if getattr(args, "full_resolution", False):
        return 1
    return args.stride


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip() != ""]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip() != ""]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    s = _scenario_from_args(args)
    plant = Scenario(
        params=s.params,
        input_signal=s.input_signal,
        v0_init=s.v0_init,
        t_end=s.t_end,
        dt=s.dt,
    )
    rec = run_scenario(plant)
    write_csv(rec, args.output, stride=_stride_from_args(args))
    print(f"wrote {rec.n_rows()} grid rows to {args.output}")
    return EXIT_OK


def cmd_observe(args) -> int:
    s = _scenario_from_args(args)
    if s.vhat0_init is None:
        raise ValueError(
            "observe needs sim.vhat0_init and an [observer] section in the scenario"
        )
    diag = diagnostics(s.params, s.input_signal, 0.0)
    if s.params.j0 > 0.0 and s.observer_cfg.delta > diag.delta_star:
        print(
            f"warning: observer threshold delta = {s.observer_cfg.delta:g} exceeds "
            f"the certified bound delta_star = {diag.delta_star:g}; the "
            "single-crossing guarantee does not apply"
        )
    rec = run_scenario(s)
    write_csv(rec, args.output, stride=_stride_from_args(args))
    for when, direction in rec.switch_log:
        print(f"switch {direction} at t = {when:g}")
    if not rec.switch_log:
        print("switches: none")
    print(f"terminal error   = {rec.err[-1]:.6e}")
    print(f"max transient    = {np.nanmax(rec.err):.6e}")
    print(f"observer gain l  = {s.l:g}")
    if rec.aborted is not None:
        print(f"aborted: {rec.aborted}")
        return EXIT_ASSUMPTION
    return EXIT_OK


def cmd_check_input(args) -> int:
    s = _scenario_from_args(args)
    grid = np.linspace(0.0, s.t_end, 2001)
    diag = diagnostics(s.params, s.input_signal, 0.0, t_grid=grid)
    wedges = np.array(
        [abs(diagnostics(s.params, s.input_signal, t).wedge) for t in grid]
    )
    min_wedge = float(wedges.min())
    print(f"c_effective = {diag.c_effective:.6g}")
    print(f"min wedge   = {min_wedge:.6e}")
    ok = True
    if diag.c_effective <= 0.0:
        i0_vals = np.array([s.input_signal.value(t)[0] for t in grid])
        bad = grid[int(np.argmax(i0_vals <= 0.0))]
        print(f"violation: mean input I0 <= 0 at t = {bad:g}")
        ok = False
    if min_wedge <= 0.0:
        bad = grid[int(np.argmin(wedges))]
        print(f"violation: persistence wedge vanishes at t = {bad:g}")
        ok = False
    if not ok:
        return EXIT_ASSUMPTION
    print(f"delta_star  = {diag.delta_star:.6g}")
    delta = args.delta if args.delta is not None else 0.5 * diag.delta_star
    print(f"t_delta(delta={delta:.6g}) = {t_delta(delta, diag.delta_star, diag.c_effective):.6g}")
    return EXIT_OK


def cmd_gamma_table(args) -> int:
    s = _scenario_from_args(args)
    spec = s.params.sigmoid
    s1, s2, h0 = spec.transform
    lines = [
        f"# sigma(x) = {s1:g} * tanh({spec.mu:g} x - {h0:g}) + {s2:g}",
        "p,j,v0,rho,gamma",
    ]
    for p in args.p:
        for j in args.j:
            for v0 in args.v0:
                for rho in args.rho:
                    val = gamma(s.params, p, j, v0, rho)
                    lines.append(f"{p},{j},{v0:.17g},{rho:.17g},{val:.17g}")
    text = "\n".join(lines) + "\n"
    if args.output == "-":
        sys.stdout.write(text)
    else:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        print(f"wrote {len(lines) - 2} table rows to {args.output}")
    return EXIT_OK


def cmd_invert(args) -> int:
    s = _scenario_from_args(args)
    if s.observer_cfg is None:
        raise ValueError("invert needs an [observer] section in the scenario")
    cfg = s.observer_cfg
    if args.z is not None:
        z = np.array(_floats(args.z))
        if z.shape != (4,):
            raise ValueError(f"--z needs four comma-separated values, got {args.z!r}")
        y_sign = args.sign if args.sign is not None else (1.0 if z[0] >= 0 else -1.0)
        v = pseudo_inverse(cfg, s.params, s.input_signal, z, y_sign, args.t)
        print(f"v_hat = ({v[0]:.12g}, {v[1]:.12g}, {v[2]:.12g})")
        return EXIT_OK
    # randomized round-trip probe over the invertible region
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.probe):
        sign = rng.choice([-1.0, 1.0])
        v0 = sign * rng.uniform(cfg.delta, cfg.R)
        r = rng.uniform(cfg.eta, cfg.R)
        phi_ang = rng.uniform(0.0, 2.0 * math.pi)
        v = np.array([v0, r * math.cos(phi_ang), r * math.sin(phi_ang)])
        t = rng.uniform(0.0, s.t_end)
        z = T_map(s.params, s.input_signal, v, t)
        back = pseudo_inverse(cfg, s.params, s.input_signal, z, v[0], t)
        worst = max(worst, float(np.max(np.abs(back - v))))
    print(f"max round-trip error over {args.probe} probes: {worst:.6e}")
    return EXIT_OK


def cmd_reproduce_figure(args) -> int:
    conf = canonical_dict()
    if args.dt is not None:
        conf["sim"]["dt"] = args.dt
    if args.t_end is not None:
        conf["sim"]["t_end"] = args.t_end
    s = scenario_from_dict(conf)
    import warnings as _warnings

    with _warnings.catch_warnings():
        # the reference initial state lies outside the certified ball on
        # purpose; the advisory warning is part of the library API, not
        # of this command's contract
        _warnings.simplefilter("ignore")
        rec = run_scenario(s)

    import os

    os.makedirs(args.out_dir, exist_ok=True)
    traj = os.path.join(args.out_dir, "figure_traj.csv")
    logerr = os.path.join(args.out_dir, "figure_logerr.csv")
    summary = os.path.join(args.out_dir, "figure_summary.json")
    write_csv(rec, traj, stride=args.stride)

    n = rec.n_rows()
    idx = list(range(0, n, args.stride))
    if idx[-1] != n - 1:
        idx.append(n - 1)
    lines = ["t,err,log10_err"]
    for i in idx:
        e = float(rec.err[i])
        lines.append(f"{rec.t[i]:.17g},{e:.17g},{math.log10(max(e, 1e-16)):.17g}")
    with open(logerr, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")

    payload = {
        "switches": [
            {"t": float(when), "direction": direction}
            for when, direction in rec.switch_log
        ],
        "terminal_error": float(rec.err[-1]),
        "max_transient_error": float(np.nanmax(rec.err)),
        "t_end": s.t_end,
        "dt": s.dt,
        "l": s.l,
        "delta": s.observer_cfg.delta,
        "aborted": rec.aborted,
    }
    with open(summary, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")

    for when, direction in rec.switch_log:
        print(f"switch {direction} at t = {when:g}")
    print(f"terminal error = {rec.err[-1]:.6e}")
    print(f"wrote {traj}, {logerr}, {summary}")
    if rec.aborted is not None:
        print(f"aborted: {rec.aborted}")
        return EXIT_ASSUMPTION
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_scenario_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("scenario", help="TOML scenario file")
    p.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override a scenario value, e.g. --set observer.l=30 "
        "(repeatable; validated like file keys)",
    )


def _add_stride_args(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument(
        "--stride",
        type=int,
        default=_DEFAULT_STRIDE,
        help=f"write every N-th grid row (default {_DEFAULT_STRIDE})",
    )
    g.add_argument(
        "--full-resolution",
        action="store_true",
        help="write every grid row (equivalent to --stride 1)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ringobs",
        description="Simulate the planar ring-coupling model and estimate its "
        "state online from the mean-activity output.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate the plant alone, write CSV")
    _add_scenario_arg(p)
    p.add_argument("-o", "--output", required=True, help="output CSV path")
    _add_stride_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("observe", help="co-simulate plant and observer, write CSV")
    _add_scenario_arg(p)
    p.add_argument("-o", "--output", required=True, help="output CSV path")
    _add_stride_args(p)
    p.set_defaults(func=cmd_observe)

    p = sub.add_parser(
        "check-input", help="print the input's observability certificates"
    )
    _add_scenario_arg(p)
    p.add_argument(
        "--delta",
        type=float,
        default=None,
        help="output threshold for the crossing-time bound "
        "(default: delta_star / 2)",
    )
    p.set_defaults(func=cmd_check_input)

    p = sub.add_parser("gamma-table", help="tabulate ring-coupling moments")
    _add_scenario_arg(p)
    p.add_argument("-o", "--output", default="-", help="output CSV path (- = stdout)")
    p.add_argument("--p", type=_ints, default=[0, 1, 2, 3], help="derivative orders")
    p.add_argument("--j", type=_ints, default=[0, 1], help="angular moments")
    p.add_argument(
        "--v0", type=_floats, default=[-1.0, -0.5, 0.0, 0.5, 1.0], help="mean levels"
    )
    p.add_argument(
        "--rho", type=_floats, default=[0.0, 0.5, 1.0], help="modulation radii"
    )
    p.set_defaults(func=cmd_gamma_table)

    p = sub.add_parser(
        "invert", help="reconstruct a state from embedded coordinates"
    )
    _add_scenario_arg(p)
    p.add_argument("--z", help="four comma-separated embedded coordinates")
    p.add_argument("--t", type=float, default=0.0, help="evaluation time")
    p.add_argument(
        "--sign", type=float, default=None, help="output sign hint (default: sign of z0)"
    )
    p.add_argument(
        "--probe",
        type=int,
        default=200,
        help="when --z is absent: number of random round-trip probes",
    )
    p.add_argument("--seed", type=int, default=0, help="probe RNG seed")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser(
        "reproduce-figure",
        help="run the reference two-switch scenario, write figure inputs",
    )
    p.add_argument("out_dir", help="directory for figure_traj.csv etc.")
    p.add_argument(
        "--dt", type=float, default=None, help="override the reference grid step"
    )
    p.add_argument(
        "--t-end", type=float, default=None, help="override the reference horizon"
    )
    p.add_argument(
        "--stride",
        type=int,
        default=_DEFAULT_STRIDE,
        help=f"write every N-th grid row (default {_DEFAULT_STRIDE})",
    )
    p.set_defaults(func=cmd_reproduce_figure)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssumptionViolation as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
