import json
import math
import time
from pathlib import Path

import pytest
import yaml

from kinopt.cli import main
from kinopt.config import ConfigError, parse_config
from kinopt.runner import PRESETS, derive_seed, load_preset_config, run_scenario

MINIMAL_DSMC = """
model:
  P: {kind: constant}
control:
  kappa: 0.1
scaling:
  epsilon: 0.01
  varsigma: 3.0
run:
  mode: dsmc
  samples: 100000
  t_final: 5.0
  seed: 42
"""


class TestParseConfig:
    def test_minimal_dsmc_valid_with_defaults(self):
        cfg = parse_config(MINIMAL_DSMC)
        assert cfg.mode == "dsmc"
        assert cfg.bins == 50
        assert cfg.repetitions == 1
        assert cfg.out_format == "csv"
        assert cfg.figures is True
        assert cfg.w_d == 0.0

    def test_nu_and_kappa_mutually_exclusive(self):
        text = MINIMAL_DSMC.replace("kappa: 0.1", "kappa: 0.1\n  nu: 0.5")
        with pytest.raises(ConfigError, match="exactly one of nu/kappa"):
            parse_config(text)
        with pytest.raises(ConfigError, match="exactly one of nu/kappa"):
            parse_config(MINIMAL_DSMC.replace("kappa: 0.1", "w_d: 0.1"))

    def test_zero_delta_rejected(self):
        text = MINIMAL_DSMC.replace(
            "P: {kind: constant}", "P: {kind: bounded_confidence, delta: 0.0}"
        )
        with pytest.raises(ConfigError, match="delta"):
            parse_config(text)

    def test_unknown_key_reports_path(self):
        text = MINIMAL_DSMC + "  samplez: 3\n"
        with pytest.raises(ConfigError, match="run.samplez"):
            parse_config(text)

    def test_type_mismatch_reports_field(self):
        with pytest.raises(ConfigError, match="run.samples"):
            parse_config(MINIMAL_DSMC.replace("samples: 100000", "samples: lots"))

    def test_odd_samples_rejected(self):
        with pytest.raises(ConfigError, match="even"):
            parse_config(MINIMAL_DSMC.replace("samples: 100000", "samples: 101"))

    def test_infinite_kappa_accepted(self):
        cfg = parse_config(MINIMAL_DSMC.replace("kappa: 0.1", "kappa: inf"))
        assert math.isinf(cfg.kappa)

    def test_syntax_error_carries_location(self):
        with pytest.raises(ConfigError, match="YAML"):
            parse_config("run: [unclosed")

    def test_round_trip_through_dict(self):
        cfg = parse_config(MINIMAL_DSMC)
        again = parse_config(yaml.safe_dump(cfg.to_dict()))
        assert again == cfg

    def test_micro_requires_nu_and_dt(self):
        text = """
model:
  P: {kind: constant}
control:
  nu: 0.5
run:
  mode: micro
  agents: 10
  t_final: 1.0
  dt: 0.1
"""
        cfg = parse_config(text)
        assert cfg.nu == 0.5
        with pytest.raises(ConfigError, match="dt"):
            parse_config(text.replace("  dt: 0.1\n", ""))


class TestRunScenario:
    def test_steady_mode_emits_analytic_fast(self, tmp_path):
        cfg = parse_config("""
model:
  P: {kind: constant}
  D: {kind: quadratic}
control: {w_d: 0.0, kappa: 1}
scaling: {varsigma: 5.0}
run: {mode: steady, seed: 1}
""")
        t0 = time.perf_counter()
        artifacts = run_scenario(cfg, tmp_path, figures=False)
        assert time.perf_counter() - t0 < 1.0
        lines = Path(artifacts["analytic"]).read_text().strip().splitlines()
        assert lines[0] == "w,f_steady"
        assert len(lines) == 402  # header + 401 grid points
        assert "trace" not in artifacts

    def test_moments_mode_trace(self, tmp_path):
        cfg = parse_config("""
model:
  P: {kind: constant}
  D: {kind: quadratic}
control: {w_d: 0.25, kappa: 1}
scaling: {varsigma: 2.0}
run:
  mode: moments
  t_final: 1.0
  record_dt: 0.1
  initial: {m0: 0.0, E0: 0.5}
""")
        artifacts = run_scenario(cfg, tmp_path, figures=False)
        lines = Path(artifacts["trace"]).read_text().strip().splitlines()
        assert lines[0] == "t,m,E,dist_wd,u_or_rejrate"
        assert len(lines) == 12

    def test_micro_mode_artifacts(self, tmp_path):
        cfg = parse_config("""
model:
  P: {kind: constant}
control: {w_d: 0.0, nu: 0.5}
run:
  mode: micro
  agents: 20
  dt: 0.05
  t_final: 0.5
  seed: 3
""")
        artifacts = run_scenario(cfg, tmp_path, figures=False)
        assert Path(artifacts["trace"]).exists()
        assert Path(artifacts["hist_final"]).exists()

    def test_dsmc_repetitions_add_stderr_column(self, tmp_path):
        cfg = parse_config(MINIMAL_DSMC.replace("samples: 100000", "samples: 2000")
                           .replace("t_final: 5.0", "t_final: 0.2\n  repetitions: 3"))
        artifacts = run_scenario(cfg, tmp_path, figures=False)
        header = Path(artifacts["trace"]).read_text().splitlines()[0]
        assert header == "t,m,E,dist_wd,u_or_rejrate,m_stderr"

    def test_json_format(self, tmp_path):
        cfg = parse_config(MINIMAL_DSMC.replace("samples: 100000", "samples: 500")
                           .replace("t_final: 5.0", "t_final: 0.1")
                           + "output:\n  format: json\n")
        artifacts = run_scenario(cfg, tmp_path, figures=False)
        payload = json.loads(Path(artifacts["trace"]).read_text())
        assert set(payload) == {"t", "m", "E", "dist_wd", "u_or_rejrate"}

    def test_meta_round_trip(self, tmp_path):
        cfg = parse_config(MINIMAL_DSMC.replace("samples: 100000", "samples: 500")
                           .replace("t_final: 5.0", "t_final: 0.1"))
        run_scenario(cfg, tmp_path, figures=False)
        meta = json.loads((tmp_path / "meta.json").read_text())
        assert parse_config(yaml.safe_dump(meta["config"])) == cfg
        assert meta["workers"] == 1

    def test_rerun_byte_identical(self, tmp_path):
        text = MINIMAL_DSMC.replace("samples: 100000", "samples: 2000").replace(
            "t_final: 5.0", "t_final: 0.3"
        ).replace("P: {kind: constant}", "P: {kind: constant}\n  D: {kind: quadratic}")
        cfg = parse_config(text)
        a = run_scenario(cfg, tmp_path / "a", figures=False)
        b = run_scenario(cfg, tmp_path / "b", figures=False)
        for key in ("trace", "hist_final", "analytic"):
            assert Path(a[key]).read_bytes() == Path(b[key]).read_bytes()

    def test_figures_rendered(self, tmp_path):
        cfg = parse_config(MINIMAL_DSMC.replace("samples: 100000", "samples: 500")
                           .replace("t_final: 5.0", "t_final: 0.1"))
        artifacts = run_scenario(cfg, tmp_path)
        assert Path(artifacts["trace_figure"]).stat().st_size > 0
        assert Path(artifacts["hist_figure"]).stat().st_size > 0


class TestPresets:
    def test_all_preset_configs_parse(self):
        for name, members in PRESETS.items():
            for member in members:
                cfg = load_preset_config(member)
                assert cfg.mode in ("micro", "dsmc", "steady", "moments"), member

    def test_seed_derivation_stable(self):
        assert derive_seed(42, "rep0") == derive_seed(42, "rep0")
        assert derive_seed(42, "rep0") != derive_seed(42, "rep1")
        assert derive_seed(42, "rep0") != derive_seed(43, "rep0")


class TestCli:
    def test_validate_ok(self, tmp_path, capsys):
        p = tmp_path / "c.yaml"
        p.write_text(MINIMAL_DSMC)
        assert main(["validate", str(p)]) == 0
        assert "configuration OK" in capsys.readouterr().out

    def test_config_error_exit_code_and_record(self, tmp_path, capsys):
        p = tmp_path / "bad.yaml"
        p.write_text(MINIMAL_DSMC + "  bogus: 1\n")
        assert main(["run", str(p)]) == 2
        record = json.loads(capsys.readouterr().err)
        assert record["error"] == "ConfigError"
        assert "bogus" in record["message"]

    def test_run_writes_artifacts(self, tmp_path, capsys):
        p = tmp_path / "c.yaml"
        p.write_text(MINIMAL_DSMC.replace("samples: 100000", "samples: 500")
                     .replace("t_final: 5.0", "t_final: 0.1"))
        out = tmp_path / "out"
        assert main(["run", str(p), "--out", str(out), "--no-figures"]) == 0
        assert (out / "trace.csv").exists()
        assert (out / "meta.json").exists()

    def test_seed_override(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text(MINIMAL_DSMC.replace("samples: 100000", "samples: 500")
                     .replace("t_final: 5.0", "t_final: 0.1"))
        main(["run", str(p), "--out", str(tmp_path / "s42"), "--no-figures"])
        main(["run", str(p), "--seed", "43", "--out", str(tmp_path / "s43"), "--no-figures"])
        t42 = (tmp_path / "s42" / "trace.csv").read_text()
        t43 = (tmp_path / "s43" / "trace.csv").read_text()
        assert t42 != t43

    def test_preset_list(self, capsys):
        assert main(["preset", "--list"]) == 0
        out = capsys.readouterr().out
        for name in ("fig1", "fig4", "table1"):
            assert name in out

    def test_unknown_preset(self, capsys):
        assert main(["preset", "nope"]) == 2
        assert "unknown preset" in json.loads(capsys.readouterr().err)["message"]

    def test_missing_config_file(self, capsys):
        assert main(["run", "/does/not/exist.yaml"]) == 2
