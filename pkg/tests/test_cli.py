import filecmp
from pathlib import Path

import pytest

from pertcv import cli

MOBILITY_CFG = """
[experiment]
type = mobility
seed = 7
replicas = 1
out = results

[mobility]
total_time = 400
eta_values = 0.08
k_q = 5
k_p = 3
t_deco = 2
record_acf = true
acf_stride = 10
"""

CHAIN_CFG = """
[experiment]
type = chain
seed = 3

[chain]
n = 8
b_values = 0.08
total_time = 500
t_left = 3
t_right = 1
t_deco_modified = 4
"""


class TestParsing:
    def test_defaults_are_filled(self):
        cfg = cli.parse_config(MOBILITY_CFG)
        assert cfg.experiment == "mobility"
        assert cfg.seed == 7
        assert cfg.params["gamma"] == 1.0          # default
        assert cfg.params["eta_values"] == [0.08]  # override
        assert cfg.params["record_acf"] is True

    def test_round_trip(self):
        for text in (MOBILITY_CFG, CHAIN_CFG):
            cfg = cli.parse_config(text)
            again = cli.parse_config(cli.serialize_config(cfg))
            assert again == cfg
            assert cli.serialize_config(again) == cli.serialize_config(cfg)

    def test_unknown_key_rejected(self):
        with pytest.raises(cli.ConfigError, match="unknown key"):
            cli.parse_config("[experiment]\ntype = chain\n\n[chain]\nnn = 3\n")

    def test_unknown_experiment_rejected(self):
        with pytest.raises(cli.ConfigError, match="unknown experiment"):
            cli.parse_config("[experiment]\ntype = pendulum\n")

    def test_bad_number_rejected(self):
        with pytest.raises(cli.ConfigError, match="cannot parse"):
            cli.parse_config("[experiment]\ntype = chain\n\n[chain]\nn = many\n")

    def test_wrong_section_rejected(self):
        with pytest.raises(cli.ConfigError, match="unexpected section"):
            cli.parse_config("[experiment]\ntype = chain\n\n[dimer]\nn = 4\n")


class TestValidate:
    def test_clean_config(self):
        assert cli.validate(cli.parse_config(MOBILITY_CFG)) == []

    def test_equilibrium_chain_flags_kappa(self):
        cfg = cli.parse_config("[experiment]\ntype = chain\n\n[chain]\nt_left = 2\nt_right = 2\n")
        notes = cli.validate(cfg)
        assert any("kappa" in n for n in notes)

    def test_negative_dt(self):
        cfg = cli.parse_config(MOBILITY_CFG)
        cfg.params["dt"] = -0.1
        assert any("dt" in n for n in cli.validate(cfg))

    def test_rcut_versus_box(self):
        cfg = cli.parse_config("[experiment]\ntype = dimer\n\n[dimer]\nrcut = 4.5\n")
        assert any("rcut" in n for n in cli.validate(cfg))

    def test_empty_sweep(self):
        cfg = cli.parse_config(MOBILITY_CFG)
        cfg.params["eta_values"] = []
        assert any("eta_values" in n for n in cli.validate(cfg))

    def test_run_rejects_invalid_config(self, tmp_path, capsys):
        cfg = cli.parse_config(MOBILITY_CFG)
        cfg.params["dt"] = -0.1
        assert cli.run(cfg, out_dir=tmp_path) == 1


class TestRun:
    def test_mobility_end_to_end(self, tmp_path):
        cfg = cli.parse_config(MOBILITY_CFG)
        code = cli.run(cfg, out_dir=tmp_path, quiet=True)
        assert code == 0
        table = (tmp_path / "mobility.csv").read_text().splitlines()
        assert table[0] == "eta,observable,mean,mean_err,asym_var,var_err,eff_mobility"
        assert len(table) == 3  # velocity + modified for one eta
        assert (tmp_path / "galerkin_coefficients.csv").exists()
        assert (tmp_path / "acf_mobility_eta0.08_velocity.csv").exists()
        assert (tmp_path / "cumulated_acf_mobility_eta0.08_modified.csv").exists()

    def test_chain_end_to_end_with_kappa(self, tmp_path):
        cfg = cli.parse_config(CHAIN_CFG)
        code = cli.run(cfg, out_dir=tmp_path, quiet=True)
        assert code == 0
        lines = (tmp_path / "chain.csv").read_text().splitlines()
        assert lines[0] == "b,N,TL,TR,observable,mean,mean_err,asym_var,var_err,kappa"
        assert len(lines) == 7  # six observables
        kappa = float(lines[1].split(",")[-1])
        assert kappa == kappa  # not nan out of equilibrium

    def test_dimer_end_to_end(self, tmp_path):
        cfg = cli.parse_config(
            "[experiment]\ntype = dimer\nseed = 5\n\n[dimer]\n"
            "n = 8\nn_steps = 3000\nnu_values = 0.5\nt_deco = 0.5\ndt = 1e-3\n"
        )
        code = cli.run(cfg, out_dir=tmp_path, quiet=True)
        assert code == 0
        lines = (tmp_path / "dimer.csv").read_text().splitlines()
        assert lines[0] == "nu,solvent,mean_len,mean_err,var_plain,var_plain_err,var_cv,var_cv_err"
        assert (tmp_path / "radial_profile.csv").exists()

    def test_selftest_exit_codes(self, tmp_path):
        cfg = cli.parse_config(
            "[experiment]\ntype = selftest-ou\nseed = 11\n\n[selftest-ou]\n"
            "repetitions = 6\ntime_factor = 1e3\nt_deco = 5\ndt = 0.02\n"
        )
        assert cli.run(cfg, out_dir=tmp_path, quiet=True) in (0, 3)
        # a window far smaller than the correlation time truncates the
        # variance to ~2(1-e^{-t_deco}) << 2, so every repetition must miss
        broken = cli.parse_config(
            "[experiment]\ntype = selftest-ou\nseed = 11\n\n[selftest-ou]\n"
            "repetitions = 4\ntime_factor = 1e3\nt_deco = 0.1\ndt = 0.02\n"
        )
        assert cli.run(broken, out_dir=tmp_path, quiet=True) == 3

    def test_reproducible_byte_identical_outputs(self, tmp_path):
        cfg_path = tmp_path / "cfg.ini"
        cfg_path.write_text(MOBILITY_CFG)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["--config", str(cfg_path), "--out", str(out_a), "--quiet"]) == 0
        assert cli.main(["--config", str(cfg_path), "--out", str(out_b), "--quiet"]) == 0
        for name in ("mobility.csv", "galerkin_coefficients.csv"):
            assert filecmp.cmp(out_a / name, out_b / name, shallow=False)
        different = tmp_path / "c"
        assert cli.main(["--config", str(cfg_path), "--out", str(different),
                         "--seed", "99", "--quiet"]) == 0
        assert (out_a / "mobility.csv").read_text() != (different / "mobility.csv").read_text()

    def test_missing_config_file(self, capsys):
        assert cli.main(["--config", "/nonexistent/x.ini"]) == 1

    def test_replica_override(self, tmp_path):
        cfg_path = tmp_path / "cfg.ini"
        cfg_path.write_text(CHAIN_CFG.replace("total_time = 500", "total_time = 300"))
        assert cli.main(["--config", str(cfg_path), "--out", str(tmp_path / "r"),
                         "--replicas", "2", "--quiet"]) == 0
