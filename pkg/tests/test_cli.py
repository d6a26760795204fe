import json
import subprocess
import sys

import numpy as np
import pytest

from bdfvac import cli
from bdfvac.config import ConfigError, load_config

BASE_CONFIG = """
[lattice]
n_per_axis = 6
box_length = 8.0
cutoff = 1.8

[density]
charge = 1.0
width = 1.1
normalize = true
normalize_range = [2.0, 12.0]

[physics]
alpha = 0.0
kappa = 1.0
mu = -0.25
mu_minus = -0.25
mu_plus = 0.25
kappa_grid = { start = 0.96, stop = 1.04, count = 3 }
bracket = [0.97, 1.03]
bracket_tol = 1e-3

[solver]
x_tol = 1e-9

[output]
directory = "OUTDIR"

[run]
seed = 7
"""


@pytest.fixture()
def config_path(tmp_path):
    def make(text=BASE_CONFIG, name="run.toml"):
        path = tmp_path / name
        path.write_text(text.replace("OUTDIR", str(tmp_path / "out")))
        return str(path)

    return make


def test_config_defaults_and_resolution(config_path):
    cfg = load_config(config_path())
    assert cfg.lattice["n_per_axis"] == 6
    assert cfg.solver["damping"] == 0.7  # default filled in
    resolved = cfg.resolved()
    assert resolved["physics"]["kappa_grid"]["count"] == 3


def test_unknown_key_rejected(config_path):
    bad = BASE_CONFIG.replace("[solver]", "[solver]\nturbo = true")
    with pytest.raises(ConfigError) as err:
        load_config(config_path(bad))
    assert err.value.key == "solver.turbo"


def test_unknown_section_rejected(config_path):
    with pytest.raises(ConfigError) as err:
        load_config(config_path(BASE_CONFIG + "\n[plotting]\nstyle = 'x'\n"))
    assert err.value.key == "plotting"


def test_malformed_config_exit_code(config_path, capsys):
    path = config_path("this is not toml [ ===")
    code = cli.main(["--config", path, "screening-table"])
    assert code == 2
    payload = json.loads(capsys.readouterr().err.strip())
    assert payload["error"] == "config"


def test_missing_config_file(tmp_path, capsys):
    code = cli.main(["--config", str(tmp_path / "nope.toml"), "scf"])
    assert code == 2


def test_screening_table_matches_quadrature(config_path, tmp_path):
    path = config_path()
    assert cli.main(["--config", path, "screening-table"]) == 0
    out = tmp_path / "out" / "screening_table.csv"
    lines = out.read_text().splitlines()
    header = [l for l in lines if l.startswith("#")]
    assert any("Lambda = 1.8" in h for h in header)
    assert any(h.startswith("# config =") for h in header)
    cols = lines[len(header)].split(",")
    assert cols == ["k", "B_Lambda_k", "U_Lambda_k"]
    first = lines[len(header) + 1].split(",")
    from bdfvac.coulomb import b_constant

    assert float(first[0]) == 0.0
    assert float(first[1]) == pytest.approx(b_constant(1.8), rel=1e-10)
    assert float(first[2]) == pytest.approx(0.0, abs=1e-12)
    # schema documentation is generated alongside
    schema = json.loads((tmp_path / "out" / "schema.json").read_text())
    assert "screening_table.csv" in schema


def test_screening_table_deterministic(config_path, tmp_path):
    path = config_path()
    cli.main(["--config", path, "screening-table"])
    first = (tmp_path / "out" / "screening_table.csv").read_bytes()
    cli.main(["--config", path, "screening-table"])
    second = (tmp_path / "out" / "screening_table.csv").read_bytes()
    assert first == second


def test_scf_alpha_zero_matches_linear_scan(config_path, tmp_path):
    path = config_path()
    assert cli.main(["--config", path, "scf"]) == 0
    result = json.loads((tmp_path / "out" / "scf_result.json").read_text())
    assert result["converged"] is True
    assert result["config"]["lattice"]["n_per_axis"] == 6

    assert cli.main(["--config", path, "linear-scan"]) == 0
    scan = (tmp_path / "out" / "linear_scan.csv").read_text().splitlines()
    rows = [l for l in scan if not l.startswith("#")][1:]
    # middle row is kappa = 1.0: the crossing sits at zero by normalization
    mid = rows[1].split(",")
    assert float(mid[0]) == pytest.approx(1.8)  # cutoff column
    assert float(mid[1]) == pytest.approx(1.0)
    assert abs(float(mid[2])) < 1e-6
    assert int(mid[4]) == 2

    # cross-command consistency: the scf energy equals the linear-vacuum energy
    from bdfvac.coulomb import gaussian_density
    from bdfvac.energy import bdf_energy
    from bdfvac.lattice import LatticeSpec, build_lattice
    from bdfvac.spectral import linear_vacuum, normalize_crossing

    lat = build_lattice(LatticeSpec(6, 8.0, 1.8))
    nu, _ = normalize_crossing(gaussian_density(lat, 1.0, 1.1), (-0.25, 0.25),
                               (2.0, 12.0), lat)
    ref = bdf_energy(linear_vacuum(nu, 1.0, -0.25, lat), nu, 0.0, 1.0)
    assert result["energy"]["total"] == pytest.approx(ref.total, abs=1e-9)


def test_state_file_roundtrip(config_path, tmp_path):
    path = config_path(BASE_CONFIG.replace('directory = "OUTDIR"',
                                           'directory = "OUTDIR"\nsave_state = true'))
    assert cli.main(["--config", path, "scf"]) == 0
    from bdfvac.io import load_state

    state = load_state(tmp_path / "out" / "state.npz")
    assert state.provenance == "scf"
    assert state.lattice.n == 6
    assert state.fermi_level == -0.25


def test_pair_production_alpha_zero(config_path, tmp_path):
    path = config_path()
    assert cli.main(["--config", path, "pair-production"]) == 0
    report = json.loads((tmp_path / "out" / "critical_coupling.json").read_text())
    assert report["kappa_c"] == pytest.approx(1.0, abs=1e-3)
    assert report["predicted_ratio"] == 1.0
    scan = (tmp_path / "out" / "pair_scan.csv").read_text().splitlines()
    rows = [l.split(",") for l in scan if not l.startswith("#")][1:]
    assert len(rows) == 3
    f_vals = [float(r[2]) for r in rows]
    assert f_vals[0] > 0 > f_vals[-1]


def test_invariant_suite_reports_table(config_path, tmp_path, monkeypatch, capsys):
    from bdfvac import invariants

    quick = [c for c in invariants.CHECKS if c[0] in ("dirac-square", "b-continuity")]
    monkeypatch.setattr(invariants, "CHECKS", quick)
    path = config_path()
    assert cli.main(["--config", path, "invariant-suite"]) == 0
    text = capsys.readouterr().out
    assert "PASS" in text and "FAIL" not in text
    payload = json.loads((tmp_path / "out" / "invariants.json").read_text())
    assert payload["all_ok"] is True
    assert {r["check"] for r in payload["results"]["n4"]} == {"dirac-square", "b-continuity"}


def test_out_dir_override(config_path, tmp_path):
    path = config_path()
    alt = tmp_path / "elsewhere"
    assert cli.main(["--config", path, "--out", str(alt), "screening-table"]) == 0
    assert (alt / "screening_table.csv").exists()


def test_console_script_runs():
    proc = subprocess.run([sys.executable, "-m", "bdfvac.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "pair-production" in proc.stdout


def test_linear_scan_cutoff_ladder(config_path, tmp_path):
    text = BASE_CONFIG.replace("[physics]", "[physics]\ncutoff_ladder = [1.5, 1.8]")
    path = config_path(text)
    assert cli.main(["--config", path, "linear-scan"]) == 0
    scan = (tmp_path / "out" / "linear_scan.csv").read_text().splitlines()
    rows = [l.split(",") for l in scan if not l.startswith("#")][1:]
    cutoffs = {float(r[0]) for r in rows}
    assert cutoffs == {1.5, 1.8}
    assert len(rows) == 6  # 3 couplings per rung


def test_formats_gate_payloads(config_path, tmp_path):
    text = BASE_CONFIG.replace('formats = ["csv", "json"]', "")
    text = text.replace("[output]", '[output]\nformats = ["json"]')
    path = config_path(text)
    assert cli.main(["--config", path, "screening-table"]) == 0
    assert not (tmp_path / "out" / "screening_table.csv").exists()
    assert (tmp_path / "out" / "schema.json").exists()
