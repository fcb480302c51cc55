"""Command-line front end: end-to-end runs of every subcommand on a
small, weakly interacting 1D problem."""

import numpy as np
import pytest

from spinbdg.cli import main
from spinbdg.io import read_field

BASE = (
    "d = 1\n"
    "L = 16.0\n"
    "N = 32\n"
    "beta_n = 50.0\n"
    "beta_s = -1.0\n"
    "nev = 4\n"
    "tol_ground = 1e-10\n"
    "tol_eig = 1e-8\n"
)


def write_config(tmp_path, extra=""):
    path = tmp_path / "run.cfg"
    path.write_text(BASE + extra)
    return str(path)


class TestArgumentHandling:
    def test_no_command_fails(self, tmp_path, capsys):
        code = main(["--config", write_config(tmp_path)])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_missing_config_file(self, capsys):
        code = main(["--config", "/nonexistent/run.cfg",
                     "--command", "ground"])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_missing_betas(self, tmp_path, capsys):
        path = tmp_path / "run.cfg"
        path.write_text("command = ground\n")
        code = main(["--config", str(path)])
        assert code == 2
        assert "beta_n" in capsys.readouterr().err

    def test_bad_config_line(self, tmp_path, capsys):
        path = tmp_path / "run.cfg"
        path.write_text("nonsense = 1\n")
        code = main(["--config", str(path), "--command", "ground"])
        assert code == 2
        assert "line 1" in capsys.readouterr().err


class TestGroundCommand:
    def test_writes_field_and_reports(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["--config", write_config(tmp_path),
                     "--command", "ground", "--out", str(out)])
        assert code == 0
        captured = capsys.readouterr().out
        assert "energy" in captured
        grid, phi = read_field(str(out / "ground.spn1"))
        assert phi.shape == (3,) + grid.shape
        assert grid.N == 32


@pytest.fixture(scope="module")
def ground_file(tmp_path_factory):
    out = tmp_path_factory.mktemp("ground_out")
    cfg = out / "run.cfg"
    cfg.write_text(BASE + "command = ground\n")
    assert main(["--config", str(cfg), "--out", str(out)]) == 0
    return out / "ground.spn1"


class TestSpectrumCommands:
    def test_bdg_writes_csv(self, tmp_path, ground_file, capsys):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, f"ground = {ground_file}\n")
        code = main(["--config", cfg, "--command", "bdg",
                     "--out", str(out)])
        assert code == 0
        lines = (out / "spectrum.csv").read_text().strip().splitlines()
        assert lines[0] == \
            "index,omega,residual_plus,residual_minus,norm_check"
        assert len(lines) == 5
        omegas = [float(line.split(",")[1]) for line in lines[1:]]
        assert omegas == sorted(omegas)

    def test_verify_passes(self, tmp_path, ground_file, capsys):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, f"ground = {ground_file}\n")
        code = main(["--config", cfg, "--command", "verify",
                     "--out", str(out)])
        captured = capsys.readouterr().out
        assert code == 0
        assert "PASS" in captured
        assert "FAIL" not in captured
        assert "dense oracle agreement" in captured

    def test_perturb_writes_density(self, tmp_path, ground_file, capsys):
        out = tmp_path / "out"
        cfg = write_config(
            tmp_path,
            f"ground = {ground_file}\nmodes = 1,2\nepsilon = 0.1\nt = 0\n")
        code = main(["--config", cfg, "--command", "perturb",
                     "--out", str(out)])
        assert code == 0
        for idx in (1, 2):
            grid, dens = read_field(str(out / f"density_mode{idx}.spn1"))
            assert dens.shape == (3,) + grid.shape
            assert np.all(dens >= 0.0)

    def test_perturb_missing_mode_index(self, tmp_path, ground_file,
                                        capsys):
        out = tmp_path / "out"
        cfg = write_config(tmp_path,
                           f"ground = {ground_file}\nmodes = 99\n")
        code = main(["--config", cfg, "--command", "perturb",
                     "--out", str(out)])
        assert code == 1
        assert "not available" in capsys.readouterr().err


class TestBenchCommand:
    def test_writes_timings(self, tmp_path, capsys):
        out = tmp_path / "out"
        cfg = tmp_path / "run.cfg"
        cfg.write_text("d = 1\nL = 16.0\nN = 64\n"
                       "beta_n = 50.0\nbeta_s = -1.0\n")
        code = main(["--config", str(cfg), "--command", "bench",
                     "--out", str(out)])
        assert code == 0
        lines = (out / "bench.csv").read_text().strip().splitlines()
        assert lines[0] == "dof,nev,seconds,operator_applies"
        assert len(lines) == 6
        assert "slope" in capsys.readouterr().out
