import subprocess
import sys

import pytest

from hyperepp.cli import EXIT_OK, EXIT_USAGE, EXIT_VERIFY, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_coeffs(capsys):
    code, out, _ = run(capsys, "coeffs")
    assert code == EXIT_OK
    assert "eta_PC = 0.709" in out and "eta_SWAP = 0.502997" in out
    code, out, _ = run(capsys, "coeffs", "--convention", "physical")
    assert "eta_PC = 0.657" in out
    code, out, _ = run(capsys, "coeffs", "--ideal")
    assert "T = 1+0j" in out


def test_qnd(capsys):
    code, out, _ = run(capsys, "qnd", "--state", "psi+,phi+", "--ideal")
    assert code == EXIT_OK and "odd pol parity" in out and "1.000000000000" in out
    code, out, _ = run(capsys, "qnd", "--dof", "spa", "--state", "psi+,phi+", "--ideal")
    assert "even spa parity" in out


def test_swap(capsys):
    code, out, _ = run(capsys, "swap", "--ideal", "--a-pol", "0.6,0.8", "--a2-pol", "R")
    assert code == EXIT_OK
    assert "A.pol: [1+0j, 0+0j]" in out and "A'.pol: [0.6+0j, 0.8+0j]" in out
    code, out, _ = run(capsys, "swap", "--kind", "ps", "--a-pol", "R", "--a-spa", "x2")
    assert "A.pol: [0+0j, 1+0j]" in out and "A.spa: [1+0j, 0+0j]" in out
    code, out, _ = run(capsys, "swap", "--kind", "ss", "--ideal", "--a-spa", "x1", "--a2-spa", "x2")
    assert "A.spa: [0+0j, 1+0j]" in out


def test_purify(capsys):
    code, out, _ = run(capsys, "purify", "--F1", "0.8", "--trials", "2000", "--ideal")
    assert code == EXIT_OK and "samples        : 2000" in out and "closed form 0.462400" in out
    code, out, _ = run(capsys, "purify", "--trials", "50", "--engine", "reference", "--no-step2")
    assert code == EXIT_OK and "pumping        : 0/0" in out


def test_sweep_and_figure(capsys, tmp_path):
    out_file = tmp_path / "s.csv"
    code, _, err = run(capsys, "sweep", "--trials", "100", "--F1", "0.7", "0.8", "-o", str(out_file))
    assert code == EXIT_OK and "[sweep] done, 2 points" in err
    assert out_file.read_text().count("\n0.") == 0 and "# trials=100" in out_file.read_text()
    code, out, _ = run(capsys, "figure", "8a")
    assert code == EXIT_OK and "\n2,0.709" in out
    code, out, _ = run(capsys, "figure", "7a", "--fig7a", "product")
    assert "# fig7a=product" in out


def test_config_file_with_flag_override(capsys, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("protocol:\n  trials: 40\n  F1: [0.6]\n")
    code, out, _ = run(capsys, "sweep", "--config", str(cfg), "--trials", "30")
    assert code == EXIT_OK and "# trials=30" in out and "# F1=0.6" in out


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["nonsense"],
        ["coeffs", "--g-ratio", "abc"],
        ["figure", "9z"],
        ["qnd", "--state", "phi+"],
        ["swap", "--a-pol", "1,2,3"],
        ["purify", "--F1", "1.5"],
        ["sweep", "--trials", "0"],
        ["sweep", "--config", "/nonexistent/c.yaml"],
        ["sweep", "--trials", "5", "-o", "/nonexistent/dir/out.csv"],
        ["coeffs", "--gamma", "-1"],
    ],
)
def test_usage_errors_exit_with_1(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == EXIT_USAGE and "error" in err


def test_verify_exit_code_reflects_failures(capsys):
    code, out, _ = run(capsys, "verify", "--trials", "1000")
    lines = out.splitlines()
    assert sum(l.startswith("[") for l in lines) == 14
    failed = [l for l in lines if l.startswith("[FAIL]")]
    assert code == (EXIT_VERIFY if failed else EXIT_OK)
    assert lines[-1].endswith("failed: 6-spot")


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "hyperepp", "coeffs", "--ideal"], capture_output=True, text=True)
    assert r.returncode == 0 and "eta_PC = 1" in r.stdout
    r = subprocess.run([sys.executable, "-m", "hyperepp", "bogus"], capture_output=True, text=True)
    assert r.returncode == 1
