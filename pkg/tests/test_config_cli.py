import json

import numpy as np
import pytest

from noisescope.analytics import quadratic_strength_fit
from noisescope.cli import main
from noisescope.config import (
    ConfigError,
    load_decay_jobs,
    load_protocol_job,
    load_sweep_job,
    parse_coefficient,
)
from noisescope.noise import Constant, Correlation, Gaussian
from noisescope.sim import FidelityCurve, MeasurementMode, PureBloch

DECAY_CONFIG = """
[system]
n_qubits = 2

[initial_state]
default = "zero"
[[initial_state.override]]
qubit = 1
state = "mixed"

[noise]
correlation = "coherent"
one_body = "constant(0.05)"
[[noise.term]]
qubits = [0, 1]
axes = "XZ"
coeff = "constant(0.02)"

[run]
steps = 4
realizations = 32
seed = 9
measured = [0]
"""

VARIANT_CONFIG = """
[system]
n_qubits = 2

[run]
steps = 5
realizations = 16
seed = 3

[[variant]]
label = "fixed"
[variant.noise]
correlation = "coherent"
[[variant.noise.term]]
qubits = [0]
axes = "Z"
coeff = "constant(0.08)"
[[variant.noise.term]]
qubits = [1]
axes = "Z"
coeff = "constant(0.08)"

[[variant]]
label = "drifting"
[variant.noise]
correlation = "incoherent_short"
[[variant.noise.term]]
qubits = [0]
axes = "Z"
coeff = "gaussian(0, 0.08)"
[[variant.noise.term]]
qubits = [1]
axes = "Z"
coeff = "gaussian(0, 0.08)"
"""

SWEEP_CONFIG = """
[system]
n_qubits = 2

[noise]
correlation = "coherent"
one_body = "constant(@)"

[run]
steps = 1
realizations = 2000
seed = 5

[sweep]
strengths = [0.05, 0.1]
"""

PROTOCOL_CONFIG = """
[system]
n_qubits = 2

[noise]
correlation = "coherent"
two_body = "constant(0.02)"

[protocol]
max_body = 2
realizations = 1500
seed = 11
delta = 0.01
epsilon = 0.05
"""


class TestCoefficientParsing:
    def test_constant(self):
        assert parse_coefficient("constant(0.05)") == Constant(0.05)

    def test_gaussian(self):
        assert parse_coefficient("gaussian(0, 0.05)") == Gaussian(0.0, 0.05)

    def test_sweep_placeholder(self):
        assert parse_coefficient("gaussian(0, @)", strength=0.07) == Gaussian(0.0, 0.07)

    def test_placeholder_outside_sweep_rejected(self):
        with pytest.raises(ConfigError):
            parse_coefficient("constant(@)")

    def test_garbage_rejected(self):
        with pytest.raises(ConfigError):
            parse_coefficient("lognormal(1, 2)")


class TestConfigLoading:
    def test_decay_config(self, tmp_path):
        path = tmp_path / "decay.toml"
        path.write_text(DECAY_CONFIG)
        (job,) = load_decay_jobs(path)
        cfg = job.config
        assert cfg.n_qubits == 2
        assert cfg.noise.n_terms == 7
        assert cfg.initial_state == ("zero", "mixed")
        assert cfg.measured == (0,)
        assert cfg.noise.correlation is Correlation.COHERENT

    def test_variants(self, tmp_path):
        path = tmp_path / "variants.toml"
        path.write_text(VARIANT_CONFIG)
        jobs = load_decay_jobs(path)
        assert [j.label for j in jobs] == ["fixed", "drifting"]
        assert jobs[1].config.noise.correlation is Correlation.INCOHERENT_SHORT

    def test_overrides(self, tmp_path):
        path = tmp_path / "decay.toml"
        path.write_text(DECAY_CONFIG)
        (job,) = load_decay_jobs(path, {"seed": 123, "realizations": 8, "steps": 2})
        assert job.config.seed == 123
        assert job.config.realizations == 8
        assert job.config.steps == 2

    def test_measured_out_of_range_rejected(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text(DECAY_CONFIG.replace("measured = [0]", "measured = [0, 5]"))
        with pytest.raises(ConfigError):
            load_decay_jobs(path)

    def test_duplicate_term_rejected(self, tmp_path):
        bad = DECAY_CONFIG.replace('axes = "XZ"', 'axes = "XI"').replace(
            "qubits = [0, 1]", "qubits = [0, 1]"
        )
        # XI on (0,1) collides with the one_body X term on qubit 0
        path = tmp_path / "bad.toml"
        path.write_text(bad)
        with pytest.raises(ConfigError):
            load_decay_jobs(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text(DECAY_CONFIG + "\n[sweep]\nstrengths = [1]\n")
        (job,) = load_decay_jobs(path)  # extra section ignored by decay loader
        path.write_text(DECAY_CONFIG.replace("steps = 4", "stepz = 4"))
        with pytest.raises(ConfigError):
            load_decay_jobs(path)

    def test_bloch_override(self, tmp_path):
        text = DECAY_CONFIG.replace(
            'state = "mixed"', "theta = 0.5\nphi = 1.0"
        ).replace("measured = [0]", "measured = [0, 1]")
        path = tmp_path / "bloch.toml"
        path.write_text(text)
        (job,) = load_decay_jobs(path)
        assert job.config.initial_state[1] == PureBloch(0.5, 1.0)

    def test_sweep_config(self, tmp_path):
        path = tmp_path / "sweep.toml"
        path.write_text(SWEEP_CONFIG)
        job = load_sweep_job(path)
        assert job.strengths == (0.05, 0.1)
        specs = {t.coeff for t in job.configs[1].noise.terms}
        assert specs == {Constant(0.1)}

    def test_empty_sweep_rejected(self, tmp_path):
        path = tmp_path / "sweep.toml"
        path.write_text(SWEEP_CONFIG.replace("[0.05, 0.1]", "[]"))
        with pytest.raises(ConfigError):
            load_sweep_job(path)

    def test_protocol_config(self, tmp_path):
        path = tmp_path / "protocol.toml"
        path.write_text(PROTOCOL_CONFIG)
        job = load_protocol_job(path)
        assert job.max_body == 2
        assert job.realizations == 1500
        assert job.delta == 0.01
        assert job.measurement_mode is MeasurementMode.EXACT_TRACE

    def test_toml_syntax_error_carries_location(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("[system\nn_qubits = 2\n")
        with pytest.raises(ConfigError):
            load_decay_jobs(path)


class TestCommandLine:
    def test_decay_writes_curve_theory_and_manifest(self, tmp_path, capsys):
        config = tmp_path / "decay.toml"
        config.write_text(VARIANT_CONFIG)
        out = tmp_path / "out"
        assert main(["decay", str(config), "--out", str(out)]) == 0
        for label in ("fixed", "drifting"):
            assert (out / f"{label}_curve.csv").exists()
            assert (out / f"{label}_theory.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "decay"
        assert len(manifest["outputs"]) == 4

    def test_decay_is_bit_reproducible(self, tmp_path):
        config = tmp_path / "decay.toml"
        config.write_text(DECAY_CONFIG)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["decay", str(config), "--out", str(out1)]) == 0
        assert main(["decay", str(config), "--out", str(out2)]) == 0
        assert (out1 / "curve_curve.csv").read_bytes() == (
            out2 / "curve_curve.csv"
        ).read_bytes()

    def test_decay_seed_override_changes_output(self, tmp_path):
        config = tmp_path / "decay.toml"
        config.write_text(DECAY_CONFIG)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["decay", str(config), "--out", str(out1)])
        main(["decay", str(config), "--out", str(out2), "--seed", "77"])
        assert (out1 / "curve_curve.csv").read_bytes() != (
            out2 / "curve_curve.csv"
        ).read_bytes()

    def test_invalid_config_exits_one(self, tmp_path, capsys):
        config = tmp_path / "decay.toml"
        config.write_text(DECAY_CONFIG.replace("measured = [0]", "measured = [9]"))
        assert main(["decay", str(config), "--out", str(tmp_path / "o")]) == 1
        assert "error" in capsys.readouterr().err

    def test_csv_round_trip_fit_matches_in_memory(self, tmp_path):
        config = tmp_path / "decay.toml"
        config.write_text(DECAY_CONFIG)
        out = tmp_path / "out"
        main(["decay", str(config), "--out", str(out)])
        from noisescope.config import load_decay_jobs
        from noisescope.sim import run_experiment
        from noisescope.analytics import saturating_decay_fit

        (job,) = load_decay_jobs(config)
        curve = run_experiment(job.config)
        loaded = FidelityCurve.read_csv(out / "curve_curve.csv")
        mem = saturating_decay_fit(curve.t, curve.mean_f, curve.f0, 4, f_co=0.01)
        disk = saturating_decay_fit(loaded.t, loaded.mean_f, loaded.f0, 4, f_co=0.01)
        assert mem.rate == disk.rate

    def test_gamma_sweep_outputs_and_fit(self, tmp_path, capsys):
        config = tmp_path / "sweep.toml"
        config.write_text(SWEEP_CONFIG)
        out = tmp_path / "out"
        assert main(["gamma-sweep", str(config), "--out", str(out)]) == 0
        rows = (out / "sweep.csv").read_text().strip().splitlines()
        assert rows[0] == "chi,gamma,stderr"
        assert len(rows) == 3
        fit = json.loads((out / "sweep_fit.json").read_text())
        # two pure qubits, three axes each: c ~ 2n = 4
        assert fit["coefficient"] == pytest.approx(4.0, rel=0.15)

    def test_gamma_sweep_zero_strength_row(self, tmp_path):
        config = tmp_path / "sweep.toml"
        config.write_text(SWEEP_CONFIG.replace("[0.05, 0.1]", "[0.0, 0.05]"))
        out = tmp_path / "out"
        main(["gamma-sweep", str(config), "--out", str(out)])
        first = (out / "sweep.csv").read_text().strip().splitlines()[1]
        chi, gamma, _ = first.split(",")
        assert float(chi) == 0.0
        assert abs(float(gamma)) <= 1e-12

    def test_protocol_command(self, tmp_path, capsys):
        config = tmp_path / "protocol.toml"
        config.write_text(PROTOCOL_CONFIG)
        out = tmp_path / "out"
        assert main(["protocol", str(config), "--out", str(out)]) == 0
        report = (out / "report.txt").read_text()
        assert "decay rates" in report
        assert "N_R=18445" in report
        strengths = (out / "strengths.csv").read_text().splitlines()
        assert strengths[0] == "subset,value,stderr,clamped"
        # planted pair (two-body on the only pair of a 2-qubit system)
        planted = [l for l in strengths if l.startswith("0+1,")]
        assert planted
        value = float(planted[0].split(",")[1])
        assert value == pytest.approx(9 * 0.02**2, rel=0.2)

    def test_malformed_protocol_noise_exits_one(self, tmp_path, capsys):
        config = tmp_path / "protocol.toml"
        bad = PROTOCOL_CONFIG + '\n[[noise.term]]\nqubits = [0, 1]\naxes = "XX"\ncoeff = "constant(0.1)"\n'
        config.write_text(bad)
        assert main(["protocol", str(config), "--out", str(tmp_path / "o")]) == 1

    def test_budget_command(self, capsys):
        assert main(["budget", "--delta", "0.01", "--epsilon", "0.05"]) == 0
        assert capsys.readouterr().out.strip() == "18445"

    def test_budget_rejects_bad_epsilon(self, capsys):
        assert main(["budget", "--delta", "0.5", "--epsilon", "1.3"]) == 1
