"""Tests for the command-line interface: exit codes, overrides, artifacts.

The gamma-table gold values are direct sigmoid evaluations (the closed
form of the zero-radius moment), computed with ``math.tanh`` before
being asserted; everything else checks plumbing contracts (headers,
exit codes, file layout) or compares two CLI runs against each other.
"""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from ringobs.cli import main
from ringobs.model import ModelParams, SelectivityDistribution, SigmoidSpec
from ringobs.observability import T_map
from ringobs.sim import CSV_HEADER, canonical_dict, read_csv, scenario_from_dict

pytestmark = pytest.mark.filterwarnings("ignore:.*exceeds the working radius")


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(float(v)) if isinstance(v, float) else str(v)
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {v!r}")


def _dump_toml(conf: dict) -> str:
    """Serialize the limited scenario schema (two table levels, scalars
    and arrays) to TOML text."""
    lines = []
    for section, table in conf.items():
        flat = {k: v for k, v in table.items() if not isinstance(v, dict)}
        nested = {k: v for k, v in table.items() if isinstance(v, dict)}
        lines.append(f"[{section}]")
        for k, v in flat.items():
            lines.append(f"{k} = {_toml_value(v)}")
        lines.append("")
        for sub, subtable in nested.items():
            lines.append(f"[{section}.{sub}]")
            for k, v in subtable.items():
                lines.append(f"{k} = {_toml_value(v)}")
            lines.append("")
    return "\n".join(lines)


@pytest.fixture()
def canonical_toml(tmp_path):
    path = tmp_path / "scenario.toml"
    path.write_text(_dump_toml(canonical_dict()))
    return str(path)


@pytest.fixture()
def small_toml(tmp_path):
    """A cheap scenario: mild slope, no observer section."""
    conf = {
        "model": {
            "j0": -0.8,
            "j1": 1.1,
            "tau": 1.0,
            "sigmoid": {"mu": 2.0, "h0": 0.0},
            "dist": {"type": "dirac", "r0": 1.0},
        },
        "input": {"type": "circular", "epsilon": 0.5, "beta": 0.4, "omega": 1.0},
        "sim": {"t_end": 0.2, "dt": 1e-2, "v0_init": [0.5, 0.3, -0.2]},
    }
    path = tmp_path / "small.toml"
    path.write_text(_dump_toml(conf))
    return str(path)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def test_simulate_missing_file(tmp_path, capsys):
    missing = str(tmp_path / "nope.toml")
    code = main(["simulate", missing, "-o", str(tmp_path / "out.csv")])
    assert code == 2
    assert "nope.toml" in capsys.readouterr().err


def test_simulate_plant_only_csv(small_toml, tmp_path):
    out = tmp_path / "plant.csv"
    assert main(["simulate", small_toml, "-o", str(out), "--full-resolution"]) == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + 21
    assert lines[1].count(",") == 13
    assert lines[1].endswith("," * 9)  # observer columns blank


def test_simulate_override_equals_file_edit(tmp_path):
    conf = {
        "model": {
            "j0": 0.5,
            "j1": 1.1,
            "tau": 1.0,
            "sigmoid": {"mu": 2.0},
            "dist": {"type": "dirac", "r0": 1.0},
        },
        "input": {"type": "constant", "i0": 0.4},
        "sim": {"t_end": 0.5, "dt": 1e-2, "v0_init": [0.2, 0.1, 0.0]},
    }
    path_a = tmp_path / "a.toml"
    path_a.write_text(_dump_toml(conf))
    conf["model"]["j0"] = -1.0
    path_b = tmp_path / "b.toml"
    path_b.write_text(_dump_toml(conf))
    out_a = tmp_path / "a.csv"
    out_b = tmp_path / "b.csv"
    assert main(["simulate", str(path_a), "--set", "model.j0=-1.0", "-o", str(out_a)]) == 0
    assert main(["simulate", str(path_b), "-o", str(out_b)]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()


def test_unknown_override_key_rejected(small_toml, tmp_path, capsys):
    code = main(
        ["simulate", small_toml, "--set", "model.j0_typo=1.0", "-o", str(tmp_path / "x.csv")]
    )
    assert code == 2
    assert "model.j0_typo" in capsys.readouterr().err


def test_malformed_override_rejected(small_toml, tmp_path, capsys):
    code = main(["simulate", small_toml, "--set", "j0", "-o", str(tmp_path / "x.csv")])
    assert code == 2
    assert "section.key=value" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# observe
# ---------------------------------------------------------------------------


def test_observe_reports_two_switches(canonical_toml, tmp_path, capsys):
    out = tmp_path / "obs.csv"
    code = main(
        ["observe", canonical_toml, "--set", "sim.dt=2e-3", "-o", str(out)]
    )
    assert code == 0
    text = capsys.readouterr().out
    assert "switch z->v at t = 1.08" in text
    assert "switch v->z at t = 1.656" in text
    assert "terminal error" in text and "max transient" in text
    rec = read_csv(out)
    assert rec.v_hat is not None
    assert len(rec.t) == 21  # 2001 rows at the default stride 100, plus the tail


def test_observe_requires_observer_section(small_toml, tmp_path, capsys):
    code = main(["observe", small_toml, "-o", str(tmp_path / "x.csv")])
    assert code == 2
    assert "vhat0_init" in capsys.readouterr().err


def test_observe_gain_override_is_applied(canonical_toml, tmp_path, capsys):
    code = main(
        [
            "observe",
            canonical_toml,
            "--set",
            "sim.t_end=0.05",
            "--set",
            "sim.dt=1e-3",
            "--set",
            "observer.l=30",
            "-o",
            str(tmp_path / "x.csv"),
        ]
    )
    assert code == 0
    assert "observer gain l  = 30" in capsys.readouterr().out


def test_observe_warns_above_certified_threshold(tmp_path, capsys):
    # J0 > 0 and delta far above delta_star = c / (1 + |J0| s1 mu)
    conf = {
        "model": {
            "j0": 1.0,
            "j1": 0.5,
            "tau": 1.0,
            "sigmoid": {"mu": 10.0, "h0": 0.0},
            "dist": {"type": "dirac", "r0": 1.0},
        },
        "input": {"type": "circular", "epsilon": 0.1, "beta": 0.1, "omega": 0.628},
        "observer": {"delta": 0.3, "eta": 1e-3, "l": 5.0},
        "sim": {
            "t_end": 0.05,
            "dt": 1e-3,
            "v0_init": [2.0, 0.5, 0.3],
            "vhat0_init": [1.5, 0.2, 0.1],
        },
    }
    path = tmp_path / "warn.toml"
    path.write_text(_dump_toml(conf))
    code = main(["observe", str(path), "-o", str(tmp_path / "w.csv")])
    assert code == 0
    out = capsys.readouterr().out
    assert "warning" in out and "delta_star" in out


# ---------------------------------------------------------------------------
# check-input
# ---------------------------------------------------------------------------


def test_check_input_reference_values(canonical_toml, capsys):
    assert main(["check-input", canonical_toml]) == 0
    out = capsys.readouterr().out
    assert "c_effective = 0.09" in out
    assert "6.28318" in out  # min wedge (beta eps)^2 omega = 6.283185e-5
    # delta_star = 0.09 / (1 + 1 * 10) = 0.00818...
    assert "delta_star  = 0.00818182" in out
    assert "t_delta" in out


def test_check_input_zero_wedge_fails(tmp_path, capsys):
    conf = {
        "model": {
            "j0": -0.8,
            "j1": 1.1,
            "tau": 1.0,
            "sigmoid": {"mu": 2.0},
            "dist": {"type": "dirac", "r0": 1.0},
        },
        "input": {"type": "constant", "i0": 0.5, "i1": 0.2},
        "sim": {"t_end": 1.0, "dt": 0.01, "v0_init": [0.0, 0.0, 0.0]},
    }
    path = tmp_path / "const.toml"
    path.write_text(_dump_toml(conf))
    assert main(["check-input", str(path)]) == 3
    assert "wedge" in capsys.readouterr().out


def test_check_input_nonpositive_mean_fails(tmp_path, capsys):
    conf = {
        "model": {
            "j0": -0.8,
            "j1": 1.1,
            "tau": 1.0,
            "sigmoid": {"mu": 2.0},
            "dist": {"type": "dirac", "r0": 1.0},
        },
        "input": {"type": "constant", "i0": -0.1},
        "sim": {"t_end": 1.0, "dt": 0.01, "v0_init": [0.0, 0.0, 0.0]},
    }
    path = tmp_path / "neg.toml"
    path.write_text(_dump_toml(conf))
    assert main(["check-input", str(path)]) == 3
    out = capsys.readouterr().out
    assert "I0 <= 0 at t = 0" in out


def test_check_input_delta_outside_bound(canonical_toml, capsys):
    # requesting the crossing bound at delta >= delta_star is a config error
    assert main(["check-input", canonical_toml, "--delta", "0.02"]) == 2
    assert "delta" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# gamma-table
# ---------------------------------------------------------------------------


def test_gamma_table_gold_values(canonical_toml, tmp_path, capsys):
    # Thresholded sigmoid with h0 = 1 in argument units:
    # Gamma_0^0(0.5, 0) = tanh(10 * 0.5 - 1) = tanh(4).
    code = main(
        [
            "gamma-table",
            canonical_toml,
            "--set",
            "model.sigmoid.h0=1.0",
            "--p",
            "0",
            "--j",
            "0",
            "--v0",
            "0.5",
            "--rho",
            "0",
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    lines = out.strip().split("\n")
    assert lines[0].startswith("#") and "tanh(10 x - 1)" in lines[0]
    assert lines[1] == "p,j,v0,rho,gamma"
    val = float(lines[2].split(",")[4])
    assert val == pytest.approx(math.tanh(4.0), abs=1e-12)
    # Odd base (h0 = 0): tanh(5); and the odd-parity zero at v0 = 0.
    code = main(
        [
            "gamma-table",
            canonical_toml,
            "--set",
            "model.sigmoid.h0=0.0",
            "--p",
            "0",
            "--j",
            "0",
            "--v0",
            "0.5,0.0",
            "--rho",
            "0,1.0",
        ]
    )
    assert code == 0
    rows = capsys.readouterr().out.strip().split("\n")[2:]
    table = {tuple(r.split(",")[:4]): float(r.split(",")[4]) for r in rows}
    assert table[("0", "0", "0.5", "0")] == pytest.approx(math.tanh(5.0), abs=1e-12)
    assert abs(table[("0", "0", "0", "1")]) < 1e-12


def test_gamma_table_node_doubling_stable(tmp_path, capsys):
    # mu = 2 keeps the default grid inside the converged regime for both
    # node counts, so doubling theta_nodes must not move any entry.
    conf = {
        "model": {
            "j0": -1.0,
            "j1": 1.5,
            "tau": 1.0,
            "sigmoid": {"mu": 2.0, "h0": 0.5},
            "dist": {"type": "dirac", "r0": 1.0},
        },
        "input": {"type": "constant", "i0": 0.5},
        "sim": {"t_end": 1.0, "dt": 0.01, "v0_init": [0.0, 0.0, 0.0]},
    }
    path = tmp_path / "g.toml"
    path.write_text(_dump_toml(conf))
    outs = []
    for nodes in (128, 256):
        code = main(
            ["gamma-table", str(path), "--set", f"model.theta_nodes={nodes}"]
        )
        assert code == 0
        rows = capsys.readouterr().out.strip().split("\n")[2:]
        outs.append(np.array([float(r.split(",")[4]) for r in rows]))
    np.testing.assert_allclose(outs[0], outs[1], rtol=0.0, atol=1e-10)


def test_gamma_table_file_output(small_toml, tmp_path):
    out = tmp_path / "gamma.csv"
    assert main(["gamma-table", small_toml, "-o", str(out)]) == 0
    lines = out.read_text().strip().split("\n")
    assert lines[1] == "p,j,v0,rho,gamma"
    assert len(lines) == 2 + 4 * 2 * 5 * 3  # default grid


# ---------------------------------------------------------------------------
# invert
# ---------------------------------------------------------------------------


def test_invert_explicit_state(canonical_toml, capsys):
    s = scenario_from_dict(canonical_dict())
    v = np.array([1.2, 0.4, -0.3])
    z = T_map(s.params, s.input_signal, v, 0.5)
    z_arg = ",".join(f"{x:.17g}" for x in z)
    code = main(["invert", canonical_toml, "--z", z_arg, "--t", "0.5"])
    assert code == 0
    out = capsys.readouterr().out
    nums = out.split("(")[1].rstrip(")\n").split(",")
    np.testing.assert_allclose([float(x) for x in nums], v, atol=1e-8)


def test_invert_probe_round_trip(tmp_path, capsys):
    # A mild slope keeps the radial equation informative over the whole
    # working box, so the round trip must close tightly everywhere.  (At
    # mu = 10 the saturated corners carry no radial information and the
    # probe reports O(1) error there -- by design, it is an audit tool.)
    conf = {
        "model": {
            "j0": -1.0,
            "j1": 1.5,
            "tau": 1.0,
            "sigmoid": {"mu": 2.0},
            "dist": {"type": "dirac", "r0": 1.0},
        },
        "input": {"type": "circular", "epsilon": 0.8, "beta": 0.375, "omega": 1.0},
        "observer": {"delta": 0.2, "eta": 1e-3, "R": 2.0, "l": 5.0},
        "sim": {"t_end": 1.0, "dt": 0.01, "v0_init": [0.5, 0.3, 0.1]},
    }
    path = tmp_path / "probe.toml"
    path.write_text(_dump_toml(conf))
    code = main(["invert", str(path), "--probe", "50", "--seed", "3"])
    assert code == 0
    out = capsys.readouterr().out
    worst = float(out.rsplit(":", 1)[1])
    assert worst < 1e-8


def test_invert_bad_z(canonical_toml, capsys):
    assert main(["invert", canonical_toml, "--z", "1,2,3"]) == 2
    assert "four" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# reproduce-figure
# ---------------------------------------------------------------------------


def test_reproduce_figure_artifacts(tmp_path, capsys):
    out_dir = tmp_path / "fig"
    code = main(
        ["reproduce-figure", str(out_dir), "--dt", "2e-3", "--stride", "10"]
    )
    assert code == 0
    text = capsys.readouterr().out
    assert "switch z->v" in text and "switch v->z" in text

    rec = read_csv(out_dir / "figure_traj.csv")
    assert rec.v_hat is not None and rec.t[-1] == pytest.approx(4.0)

    lines = (out_dir / "figure_logerr.csv").read_text().strip().split("\n")
    assert lines[0] == "t,err,log10_err"
    for row in lines[1:10]:
        t, err, log_err = (float(x) for x in row.split(","))
        assert log_err == math.log10(max(err, 1e-16))

    summary = json.loads((out_dir / "figure_summary.json").read_text())
    assert len(summary["switches"]) == 2
    t1, t2 = (s["t"] for s in summary["switches"])
    assert 0.9 <= t1 <= 1.5 and 1.5 <= t2 <= 2.1
    assert summary["aborted"] is None
    assert summary["terminal_error"] == pytest.approx(rec.err[-1])
