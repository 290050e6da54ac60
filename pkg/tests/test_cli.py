import filecmp
from importlib import resources

import pytest

from platoonlat import cli
from platoonlat.config import ConfigError, load_config

SMALL = """
[path]
type = lane_change
n_changes = 2
change_length_m = 20, 35
straight_length_m = 30

[platoon]
vehicles = 3
strategy = {strategy}
step_m = 0.02

[outputs]
learned = yes
"""


def write(tmp_path, text, name="s.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def run(tmp_path, command, text):
    cfg = write(tmp_path, text)
    out = tmp_path / "out"
    code = cli.main([command, "--config", str(cfg), "--out", str(out), "--quiet"])
    return code, out


# --- configuration ------------------------------------------------------------

def test_defaults_reproduce_reference_gains():
    cfg = load_config("")
    assert cfg.gains.k_p == (0.06, 0.96) and cfg.gains.k_d == (0.0, 0.08)
    assert (cfg.gains.k_lp, cfg.gains.k_ld) == (-0.04, -0.3)
    assert cfg.vehicles == 12 and cfg.step == 0.01 and cfg.design is None


def test_ff_defaults_have_no_learning():
    cfg = load_config("[platoon]\nstrategy = ff\n")
    assert (cfg.gains.k_lp, cfg.gains.k_ld) == (0.0, 0.0)


def test_kff_auto():
    cfg = load_config("[gains]\nk_ff_m = auto\n")
    assert cfg.gains.k_ff == pytest.approx(1.59, abs=5e-3)


@pytest.mark.parametrize("text, line, fragment", [
    ("[vehicle]\nmass_kg = 1896\nmass_g = 3\n", 3, "unknown key 'mass_g'"),
    ("[vehicles]\n", 1, "unknown section"),
    ("[vehicle]\nmass_kg = heavy\n", 2, "bad value"),
    ("[vehicle]\nmass_kg = 1\nmass_kg = 2\n", 3, "duplicate key"),
    ("mass_kg = 1\n", 1, "outside of any section"),
    ("\n[platoon]\nvehicles = 1\n", 3, "at least 2"),
    ("[platoon]\nstrategy = convoy\n", 2, "expected one of"),
    ("[vehicle]\nmass_kg = -5\n", 2, "mass"),
    ("[path]\ntype = lane_change\nlength_m = 10\n", 3, "does not apply"),
    ("[platoon]\noutput = vector\n[gains]\nk_lp_rad_per_m = -0.04\n", 4, "needs 2 value"),
    ("[platoon]\ndelay_s = 0.1\n", 1, "missing key 'spacing_m'"),
])
def test_config_errors_name_the_line(text, line, fragment):
    with pytest.raises(ConfigError) as exc:
        load_config(text, "x.cfg")
    assert str(exc.value).startswith(f"x.cfg:{line}: ")
    assert fragment in str(exc.value)


def test_shipped_configs_load():
    names = [p.name for p in resources.files("platoonlat.data").iterdir() if p.name.endswith(".cfg")]
    assert len(names) >= 5
    for name in names:
        load_config(resources.files("platoonlat.data").joinpath(name).read_text(), name)


# --- exit codes and outputs ------------------------------------------------------

def test_simulate_writes_outputs(tmp_path):
    code, out = run(tmp_path, "simulate", SMALL.format(strategy="lfp"))
    assert code == cli.EXIT_OK
    header = (out / "trajectory.csv").read_text().splitlines()[0]
    assert header == "l_d_m,vehicle,e_lat_m,theta_err_rad,e_lat_prime_m_per_m,theta_err_prime_rad_per_m,u_rad,X_m,Y_m"
    assert (out / "norms.csv").read_text().startswith("vehicle,norm_elat_m_sqrt_m,")
    assert (out / "path.csv").read_text().startswith("l_d_m,X_m,Y_m,theta_rad,kappa_per_m")
    assert (out / "learned_01.csv").read_text().startswith("l_d_m,u_l_rad")
    cert = (out / "certificate.txt").read_text()
    assert "verdict: MARGINAL" in cert and "empirical verdict (lateral output)" in cert


def test_outputs_are_byte_identical_on_rerun(tmp_path):
    text = SMALL.format(strategy="ff")
    cfg = write(tmp_path, text)
    for d in ("a", "b"):
        assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / d), "--quiet"]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", names, shallow=False)
    assert mismatch == [] and errors == [] and len(match) == len(names)


def test_config_error_exit(tmp_path, capsys):
    code, _ = run(tmp_path, "simulate", "[vehicle]\nmass = 1\n")
    assert code == cli.EXIT_CONFIG
    assert "s.cfg:2:" in capsys.readouterr().err
    assert cli.main(["analyze", "--config", str(tmp_path / "missing.cfg")]) == cli.EXIT_CONFIG


def test_infeasible_delay_exit(tmp_path, capsys):
    text = SMALL.format(strategy="lfp").replace("step_m = 0.02", "step_m = 0.02\ndelay_s = 5\nspacing_m = 1")
    code, _ = run(tmp_path, "simulate", text)
    assert code == cli.EXIT_CONFIG
    assert "delay" in capsys.readouterr().err


def test_blowup_exit(tmp_path, capsys):
    text = SMALL.format(strategy="lfp") + "[gains]\nk_elat_rad_per_m = -0.5\n"
    code, _ = run(tmp_path, "simulate", text)
    assert code == cli.EXIT_BLOWUP
    assert "aborted" in capsys.readouterr().err


def test_analyze_precondition_exit(tmp_path):
    code, _ = run(tmp_path, "analyze", "[gains]\nk_elat_rad_per_m = -0.5\n")
    assert code == cli.EXIT_PRECONDITION


def test_analyze_writes_certificate(tmp_path):
    code, out = run(tmp_path, "analyze", "[gains]\nk_ld_rad = 0\n")
    assert code == cli.EXIT_OK
    assert "rule: bode-zero-integral" in (out / "certificate.txt").read_text()


def test_design_exits(tmp_path):
    code, out = run(tmp_path, "design", "[design]\nseed_k_lp = -0.04\nseed_k_ld = -0.3\n")
    assert code == cli.EXIT_OK
    assert "design status: ACCEPTED" in (out / "design.txt").read_text()
    code, out = run(tmp_path, "design", "[design]\nk_ld_min = 0\nk_ld_max = 0\n")
    assert code == cli.EXIT_NOT_FOUND
    assert "design status: NOT-FOUND" in (out / "design.txt").read_text()
    code, _ = run(tmp_path, "design", "")
    assert code == cli.EXIT_CONFIG


def test_module_entry_point_help(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--help"])
    assert exc.value.code == 0
    assert "simulate" in capsys.readouterr().out
