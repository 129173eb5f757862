"""Command-line interface: config handling, outputs, exit codes."""

import hashlib
import json
import subprocess
import textwrap

import pytest

from spinlab.cli import main


def _write_config(path, text):
    path.write_text(textwrap.dedent(text))
    return str(path)


def _read_csv(path):
    lines = path.read_text().strip().split("\n")
    header = lines[0].split(",")
    rows = [[float(x) for x in line.split(",")] for line in lines[1:]]
    return header, rows


P1_CHAIN = """
[chain]
N = 7
protocol = "P1"
spin = "1/2"
delta = 1.0
Delta = 10.0
"""

P2_CHAIN = """
[chain]
N = 7
protocol = "P2"
spin = "1/2"
delta = 1.0
Delta = 10.0
boundary_field = 3.7
"""


def test_evolve_p1_reference(tmp_path, capsys):
    cfg = _write_config(tmp_path / "run.toml", P1_CHAIN + """
[sweep]
t_max = 25.0
dt = 0.02
""")
    out = tmp_path / "out"
    assert main(["evolve", "--config", cfg, "--out", str(out)]) == 0
    assert "peak negativity" in capsys.readouterr().out
    summary = json.loads((out / "summary.json").read_text())
    assert summary["peak"]["value"] == pytest.approx(1.0, abs=0.02)
    assert summary["peak"]["time"] == pytest.approx(22.5, rel=0.02)
    header, rows = _read_csv(out / "trajectory.csv")
    assert header == (
        ["t", "negativity", "fidelity_psi_plus"]
        + [f"n_site_{j}" for j in range(1, 8)]
        + ["bulk_population"]
    )
    assert len(rows) == 1251
    first = dict(zip(header, rows[0]))
    assert first["t"] == 0.0
    assert first["negativity"] == pytest.approx(0.0, abs=1e-12)
    assert first["n_site_1"] == pytest.approx(1.0, abs=1e-12)
    assert first["n_site_7"] == pytest.approx(1.0, abs=1e-12)
    assert first["bulk_population"] == pytest.approx(0.0, abs=1e-12)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "evolve"
    assert manifest["config_hash"] == summary["config_hash"]
    for entry in manifest["outputs"]:
        digest = hashlib.sha256((out / entry["file"]).read_bytes()).hexdigest()
        assert digest == entry["sha256"], entry["file"]


def test_evolve_dt_convergence(tmp_path):
    peaks = {}
    for dt in (0.02, 0.01):
        cfg = _write_config(tmp_path / f"run{dt}.toml", P1_CHAIN + f"""
[sweep]
t_max = 25.0
dt = {dt}
""")
        out = tmp_path / f"out{dt}"
        assert main(["evolve", "--config", cfg, "--out", str(out)]) == 0
        peaks[dt] = json.loads((out / "summary.json").read_text())["peak"]["value"]
    assert abs(peaks[0.02] - peaks[0.01]) < 1e-4


def test_evolve_missing_key_leaves_no_files(tmp_path, capsys):
    cfg = _write_config(tmp_path / "bad.toml", """
[chain]
N = 7
""")
    out = tmp_path / "never"
    assert main(["evolve", "--config", cfg, "--out", str(out)]) == 2
    assert "config error" in capsys.readouterr().err
    assert not out.exists()


def test_evolve_lindblad_path(tmp_path):
    cfg = _write_config(tmp_path / "run.toml", P2_CHAIN + """
[sweep]
t_max = 20.0
dt = 0.05
""")
    out = tmp_path / "out"
    assert main(["evolve", "--config", cfg, "--out", str(out), "--gamma", "0.02"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["chain"]["gamma"] == 0.02
    assert 0.0 < summary["peak"]["value"] < 1.0
    header, rows = _read_csv(out / "trajectory.csv")
    assert "fidelity_psi_plus" in header
    assert len(rows) == 401


def test_evolve_flag_overrides(tmp_path):
    cfg = _write_config(tmp_path / "run.toml", P2_CHAIN + """
[sweep]
t_max = 2.0
dt = 0.1
""")
    out = tmp_path / "out"
    assert main(["evolve", "--config", cfg, "--out", str(out), "--B", "1.5"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["chain"]["boundary_field"] == 1.5


def test_byte_stable_rerun(tmp_path):
    cfg = _write_config(tmp_path / "run.toml", P2_CHAIN + """
[sweep]
t_max = 10.0
dt = 0.05
""")
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["evolve", "--config", cfg, "--out", str(out)]) == 0
        outs.append(out)
    a, b = outs
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
    assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()
    leftovers = [p for p in a.iterdir() if ".tmp" in p.name]
    assert not leftovers


def test_sweep_disorder_csv(tmp_path):
    cfg = _write_config(tmp_path / "run.toml", P2_CHAIN + """
[sweep]
axis = "disorder_diag"
grid = [0.0, 0.5]
realizations = 5
""")
    out = tmp_path / "out"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    header, rows = _read_csv(out / "sweep.csv")
    assert header == ["axis_value", "mean_peak_negativity", "std", "mean_peak_time", "realizations"]
    first = dict(zip(header, rows[0]))
    assert first["axis_value"] == 0.0
    assert first["std"] == 0.0  # zero disorder is deterministic
    assert first["realizations"] == 5
    assert rows[1][2] > 0.0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["master_seed"] == 0


def test_sweep_seed_flag(tmp_path):
    cfg = _write_config(tmp_path / "run.toml", P2_CHAIN + """
[sweep]
axis = "disorder_offdiag"
grid = [0.5]
realizations = 5
""")
    means = {}
    for seed in (0, 7):
        out = tmp_path / f"out{seed}"
        assert main(["sweep", "--config", cfg, "--out", str(out), "--seed", str(seed)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["master_seed"] == seed
        means[seed] = summary["mean_peak_negativity"][0]
    assert means[0] != means[7]


def test_field_scan_matrix_shape(tmp_path):
    cfg = _write_config(tmp_path / "run.toml", P2_CHAIN + """
[sweep]
axis = "boundary_field"
grid_start = 0.0
grid_stop = 6.0
grid_count = 61
t_max = 30.0
dt = 0.05
""")
    out = tmp_path / "out"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "field_scan.csv").read_text().strip().split("\n")
    assert len(lines) == 602  # header + 601 time rows
    header = lines[0].split(",")
    assert len(header) == 62 and header[0] == "t" and header[1] == "B=0"
    assert all(len(line.split(",")) == 62 for line in lines[1:])
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_times"] == 601
    assert 0.0 <= summary["best"]["B"] <= 6.0
    assert summary["best"]["negativity"] > 0.9


def test_scan_field_command_matches_sweep_dispatch(tmp_path):
    body = P2_CHAIN + """
[sweep]
grid = [3.0, 4.0]
t_max = 5.0
dt = 0.1
"""
    cfg = _write_config(tmp_path / "run.toml", body)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["scan-field", "--config", cfg, "--out", str(out1)]) == 0
    cfg2 = _write_config(tmp_path / "run2.toml", body.replace("[sweep]", "[sweep]\naxis = \"boundary_field\""))
    assert main(["sweep", "--config", cfg2, "--out", str(out2)]) == 0
    assert (out1 / "field_scan.csv").read_bytes() == (out2 / "field_scan.csv").read_bytes()


def test_dephasing_sweeps_two_coupling_ratios(tmp_path):
    """P2 entanglement decays slower than P1 under dephasing for both ratios."""
    relative_drop = {}
    for Delta, t_max in ((10.0, 30.0), (30.0, 75.0)):
        # P2 boundary field tuned per ratio through the CLI optimizer
        opt_cfg = _write_config(tmp_path / f"opt{Delta}.toml", f"""
[chain]
N = 7
protocol = "P2"
spin = "1/2"
delta = 1.0
Delta = {Delta}

[sweep]
t_max = 60.0
""")
        opt_out = tmp_path / f"opt_out{Delta}"
        assert main(["optimize-field", "--config", opt_cfg, "--out", str(opt_out)]) == 0
        b_star = json.loads((opt_out / "summary.json").read_text())["B_star"]
        assert 0.0 <= b_star <= 6.0
        for proto, b_field in (("P1", 0.0), ("P2", b_star)):
            cfg = _write_config(tmp_path / f"run{Delta}{proto}.toml", f"""
[chain]
N = 7
protocol = "{proto}"
spin = "1/2"
delta = 1.0
Delta = {Delta}
boundary_field = {b_field}

[sweep]
axis = "dephasing_gamma"
grid = [0.0, 0.02]
t_max = {t_max}
dt = 0.05
""")
            out = tmp_path / f"out{Delta}{proto}"
            assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
            _, rows = _read_csv(out / "sweep.csv")
            relative_drop[(Delta, proto)] = rows[1][1] / rows[0][1]
    for Delta in (10.0, 30.0):
        assert relative_drop[(Delta, "P2")] > relative_drop[(Delta, "P1")], Delta


def test_optimize_field_degenerate_range(tmp_path, capsys):
    cfg = _write_config(tmp_path / "run.toml", P2_CHAIN + """
[sweep]
b_range = [3.7, 3.7]
t_max = 20.0
""")
    out = tmp_path / "out"
    assert main(["optimize-field", "--config", cfg, "--out", str(out)]) == 0
    assert "B* = 3.7" in capsys.readouterr().out
    summary = json.loads((out / "summary.json").read_text())
    assert summary["B_star"] == 3.7
    assert 0.9 < summary["peak"]["value"] <= 1.0


def test_effective_report(tmp_path, capsys):
    cfg = _write_config(tmp_path / "eff.toml", """
[effective]
n_chain = 5
Delta = 10.0
delta = 1.0
B = 3.7
""")
    out = tmp_path / "out"
    assert main(["effective", "--config", cfg, "--out", str(out)]) == 0
    assert "trimer t_E" in capsys.readouterr().out
    report = json.loads((out / "summary.json").read_text())
    assert report["trimer"]["t_entangle"] == pytest.approx(22.5, rel=0.01)
    assert report["trimer"]["t_revival"] == pytest.approx(2 * report["trimer"]["t_entangle"])
    assert report["chi"] == pytest.approx(-0.0208850361, abs=1e-8)
    assert len(report["modes"]["E_k"]) == 5
    assert len(report["chi_per_mode"]) == 5
    assert report["Gamma"] == 0.0
    assert report["mean_bulk_excitation"] > 0.0
    assert report["validity_margin"] > 0.0


def test_effective_zero_coupling(tmp_path):
    cfg = _write_config(tmp_path / "eff.toml", """
[effective]
n_chain = 5
Delta = 10.0
delta = 0.0
B = 3.7
gamma = 0.1
""")
    out = tmp_path / "out"
    assert main(["effective", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "summary.json").read_text())
    assert report["chi"] == 0.0
    assert report["Gamma"] == 0.0
    assert report["trimer"]["eta"] == 0.0
    assert report["trimer"]["t_entangle"] == "inf"


def test_effective_resonance_structured_error(tmp_path, capsys):
    cfg = _write_config(tmp_path / "eff.toml", """
[effective]
n_chain = 5
Delta = 10.0
delta = 1.0
B = 0.0
""")
    assert main(["effective", "--config", cfg, "--out", str(tmp_path / "out")]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["type"] == "resonance"


def test_effective_compare_full_deep_dispersive(tmp_path):
    cfg = _write_config(tmp_path / "eff.toml", """
[effective]
n_chain = 3
Delta = 200.0
delta = 1.0
B = 143.2
compare_full = true
""")
    out = tmp_path / "out"
    assert main(["effective", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "summary.json").read_text())
    assert report["validity_margin"] > 1.0
    ratio = report["full_vs_effective"]["time_ratio"]
    assert abs(ratio - 1.0) <= 0.10


def test_effective_chain_fallback(tmp_path):
    cfg = _write_config(tmp_path / "eff.toml", P2_CHAIN)
    out = tmp_path / "out"
    assert main(["effective", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "summary.json").read_text())
    assert report["inputs"]["n_chain"] == 5  # N - 2
    assert report["inputs"]["B"] == 3.7


def test_validate_cli(capsys):
    assert main(["validate"]) == 0
    assert "6/6 checks passed" in capsys.readouterr().out
    assert main(["validate", "--inject-fault", "dissipator-sign"]) == 1
    assert "5/6 checks passed" in capsys.readouterr().out


def test_unknown_sweep_key(tmp_path, capsys):
    cfg = _write_config(tmp_path / "run.toml", P2_CHAIN + """
[sweep]
axis = "disorder_diag"
grid = [0.0, 0.5]
bogus = 1
""")
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "out")]) == 2
    assert "unknown keys" in capsys.readouterr().err


def test_grid_specification_conflicts(tmp_path, capsys):
    cfg = _write_config(tmp_path / "run.toml", P2_CHAIN + """
[sweep]
axis = "disorder_diag"
grid = [0.0, 0.5]
grid_start = 0.0
grid_stop = 1.0
grid_count = 3
""")
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "o1")]) == 2
    cfg2 = _write_config(tmp_path / "run2.toml", P2_CHAIN + """
[sweep]
axis = "disorder_diag"
""")
    assert main(["sweep", "--config", cfg2, "--out", str(tmp_path / "o2")]) == 2
    capsys.readouterr()


def test_missing_config_file(tmp_path, capsys):
    assert main(["evolve", "--config", str(tmp_path / "nope.toml")]) == 2
    assert "not found" in capsys.readouterr().err


def test_console_script_smoke():
    proc = subprocess.run(
        ["spinlab", "--version"], capture_output=True, text=True, timeout=60
    )
    assert proc.returncode == 0
    assert proc.stdout.strip() == "spinlab 0.1.0"
