import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polarbp.cli import (EXIT_CONFIG, EXIT_GRADCHECK, EXIT_IO, EXIT_OK, EXIT_USAGE,
                         run_command)
from polarbp.config import (OUTPUT_ENV, ConfigError, ExperimentConfig, format_config, from_dict,
                            parse_config, to_dict)
from polarbp.polar_core import read_avector


class TestConfig:
    def test_defaults_valid(self):
        cfg = ExperimentConfig().validate()
        assert (cfg.N, cfg.k) == (64, 32)
        assert ExperimentConfig(N=8).validate().k == 4
        assert cfg.train_config().train_snrs == (2.0, 4.0, 5.0)

    def test_parse(self):
        cfg = parse_config("# comment\nN = 16\nk=8\nsnr_db = 1, 2.5\nrate_projection = true\n")
        assert (cfg.N, cfg.k, cfg.snr_db, cfg.rate_projection) == (16, 8, (1.0, 2.5), True)

    @pytest.mark.parametrize("text", ["bogus = 1\n", "N = eight\n", "N 8\n", "merge_phases = yes\n"])
    def test_parse_errors(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    @pytest.mark.parametrize("text", ["k = 65\n", "N = 12\n", "channel = bsc\n", "min_frames = 0\n",
                                      "steps = 1,2\n", "k = -1\n"])
    def test_validation(self, text):
        with pytest.raises(ConfigError):
            parse_config(text).validate()

    def test_empty_train_snrs(self):
        cfg = parse_config("train_snrs = \n")
        with pytest.raises(ConfigError):
            cfg.train_config()

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 10), st.lists(st.floats(-10, 10, allow_nan=False), max_size=4),
           st.floats(1e-6, 1.0), st.booleans(), st.sampled_from(["awgn", "rayleigh"]),
           st.integers(0, 2 ** 40))
    def test_round_trip(self, n, snrs, lr, merge, channel, seed):
        cfg = ExperimentConfig(N=2 ** n, k=1, snr_db=tuple(snrs), lr=lr, merge_phases=merge,
                               channel=channel, seed=seed)
        text = format_config(cfg)
        again = parse_config(text)
        assert again == cfg
        assert format_config(again) == text
        assert from_dict(to_dict(cfg)) == cfg

    def test_output_dir_env(self, monkeypatch, tmp_path):
        monkeypatch.setenv(OUTPUT_ENV, str(tmp_path))
        assert ExperimentConfig().resolved_output_dir() == tmp_path
        assert ExperimentConfig(output_dir="x").resolved_output_dir().name == "x"


def manifest(path):
    return json.loads((path / "manifest.json").read_text())


class TestCli:
    def test_construct_bec_p8(self, tmp_path, capsys):
        out = tmp_path / "c"
        rc = run_command(["construct", "--method", "bhattacharyya-bec", "--eps", "0.5",
                          "--N", "8", "--k", "4", "--out", str(out)])
        assert rc == EXIT_OK
        code, header = read_avector(out / "avector.txt")
        assert code.info_set_1based() == [4, 6, 7, 8]
        assert "[4, 6, 7, 8]" in capsys.readouterr().out
        m = manifest(out)
        assert m["command"] == "construct" and m["config"]["N"] == "8"
        assert set(m["artifacts"]) == {"avector.txt"}
        assert (out / "config.txt").exists()

    def test_gradcheck(self, tmp_path, capsys):
        rc = run_command(["gradcheck", "--N", "8", "--iters", "2", "--out", str(tmp_path)])
        assert rc == EXIT_OK
        line = [l for l in capsys.readouterr().out.splitlines() if "max relative error" in l][0]
        assert float(line.split("=")[1]) < 1e-3

    def test_gradcheck_size_limit(self, tmp_path):
        assert run_command(["gradcheck", "--N", "64", "--out", str(tmp_path)]) != EXIT_OK

    def test_simulate_k_above_n(self, tmp_path):
        out = tmp_path / "sim"
        rc = run_command(["simulate", "--N", "8", "--k", "9", "--out", str(out)])
        assert rc == EXIT_CONFIG
        assert not out.exists()

    def test_usage_errors(self, tmp_path):
        assert run_command(["frobnicate"]) == EXIT_USAGE
        assert run_command([]) == EXIT_USAGE
        assert run_command(["construct", "--nope", "1"]) == EXIT_USAGE

    def test_unknown_set_key(self, tmp_path):
        assert run_command(["construct", "--set", "bogus=1", "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_missing_config_file(self, tmp_path):
        assert run_command(["construct", "--config", str(tmp_path / "none.cfg")]) == EXIT_IO

    def test_missing_avector(self, tmp_path):
        rc = run_command(["simulate", "--avector", str(tmp_path / "none.txt"), "--out", str(tmp_path / "o")])
        assert rc == EXIT_IO

    def test_simulate_and_manifest_rerun(self, tmp_path):
        out = tmp_path / "s1"
        args = ["simulate", "--N", "16", "--k", "8", "--snr", "1,3", "--min-frames", "250",
                "--max-frames", "1000", "--target-errors", "20", "--seed", "5"]
        assert run_command(args + ["--out", str(out)]) == EXIT_OK
        rerun = tmp_path / "s2"
        assert run_command(["simulate", "--manifest", str(out / "manifest.json"), "--workers", "2",
                            "--out", str(rerun)]) == EXIT_OK
        assert (out / "ber.csv").read_bytes() == (rerun / "ber.csv").read_bytes()
        assert manifest(out)["artifacts"] == manifest(rerun)["artifacts"]

    def test_manifest_command_must_match(self, tmp_path):
        out = tmp_path / "c"
        run_command(["construct", "--N", "8", "--k", "4", "--out", str(out)])
        assert run_command(["simulate", "--manifest", str(out / "manifest.json")]) == EXIT_CONFIG

    def test_config_file_and_override(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("N = 8\nk = 4\ndesign = bhattacharyya_bec\ndesign_param = 0.5\n")
        out = tmp_path / "o"
        assert run_command(["construct", "--config", str(cfg), "--k", "2", "--out", str(out)]) == EXIT_OK
        assert read_avector(out / "avector.txt")[0].info_set_1based() == [7, 8]

    def test_compare(self, tmp_path):
        base = tmp_path / "a"
        run_command(["construct", "--N", "16", "--k", "8", "--out", str(base)])
        out = tmp_path / "cmp"
        rc = run_command(["compare", "--N", "16", "--k", "8", "--avector", str(base / "avector.txt"),
                          "--snr", "2", "--max-frames", "500", "--min-frames", "250",
                          "--out", str(out)])
        assert rc == EXIT_OK
        assert "inconclusive" in (out / "compare.txt").read_text()

    def test_train_and_export(self, tmp_path):
        out = tmp_path / "t"
        rc = run_command(["train", "--N", "8", "--k", "4", "--iters", "2", "--steps", "5,10,10",
                          "--batch-size", "8", "--out", str(out)])
        assert rc == EXIT_OK
        assert {"train_log.csv", "avector.txt", "checkpoint_saturation.txt"} <= set(manifest(out)["artifacts"])
        exp = tmp_path / "e"
        rc = run_command(["export", "--N", "8", "--k", "4", "--input",
                          str(out / "checkpoint_saturation.txt"), "--out", str(exp)])
        assert rc == EXIT_OK
        assert (exp / "avector.txt").read_text() == (out / "avector.txt").read_text()

    def test_export_needs_input(self, tmp_path):
        assert run_command(["export", "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_gradcheck_exit_code_constant(self):
        assert EXIT_GRADCHECK == 1
