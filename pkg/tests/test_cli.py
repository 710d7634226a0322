import json
import math
from pathlib import Path

import numpy as np
import pytest

from homlab.cli import main
from homlab.config import (ExperimentConfig, classical_setup, delay_grid, phase_distribution,
                           quantum_params, sample_setting)
from homlab.errors import ConfigError


def write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def load_json(path):
    return json.loads(Path(path).read_text())


# --- config validation ----------------------------------------------------------

@pytest.mark.parametrize("text, field", [
    ('kind = "nope"\n', "kind"),
    ('seed = 1\n', "kind"),
    ('kind = "classical-dip"\nseed = -1\n', "seed"),
    ('kind = "classical-dip"\n[delays]\nvalues = [0.0, -1.0]\n', "delays"),
    ('kind = "classical-dip"\n[delays]\nstart = 0.0\nstop = 1.0\nstep = 0.3\n', "delays.step"),
    ('kind = "classical-dip"\n[phases]\nvalues_pi = [0, 1]\nweights = [0.5]\n', "phases.weights"),
    ('kind = "classical-dip"\n[pulse]\nenvelope_sigma = -1.0\n', "pulse.envelope_sigma"),
    ('kind = "classical-dip"\n[sampling]\nsamples = "lots"\n', "sampling.samples"),
    ('kind = "classical-dip"\n[bogus]\nx = 1\n', "bogus"),
    ('kind = "quantum-dip"\n[quantum]\neta = 1.5\n', "quantum.eta"),
    ('kind = "quantum-dip"\n[quantum]\nnoise = "gaussian"\n', "quantum.noise"),
])
def test_field_level_errors(tmp_path, text, field):
    cfg_path = write(tmp_path, text)
    with pytest.raises(ConfigError) as info:
        cfg = ExperimentConfig.load(cfg_path)
        delay_grid(cfg, default=[0.0])
        phase_distribution(cfg)
        sample_setting(cfg)
        classical_setup(cfg)
        quantum_params(cfg)
        cfg.section("quantum").choice("noise", ("none", "poisson"))
    assert info.value.field == field


def test_delay_grid_units(tmp_path):
    cfg = ExperimentConfig.load(write(tmp_path, 'kind = "classical-dip"\n[delays]\n'
                                                'unit = "ms"\nstart = -7\nstop = 7\nstep = 1\n'))
    np.testing.assert_allclose(delay_grid(cfg), np.arange(-7, 8) * 1e-3)


def test_phase_law_forms(tmp_path):
    cfg = ExperimentConfig.load(write(tmp_path, 'kind = "classical-dip"\n[phases]\n'
                                                'values_pi = [0, 0.5, 1, 1.5]\n'))
    assert phase_distribution(cfg).mean_cos2() == pytest.approx(0.5)
    cfg = ExperimentConfig.load(write(tmp_path, 'kind = "classical-dip"\n[phases]\nkind = "uniform"\n'))
    assert not phase_distribution(cfg).is_discrete


def test_invalid_toml(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(write(tmp_path, "kind = \n"))


# --- end-to-end runs ---------------------------------------------------------------

def test_classical_dip_default_run_is_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["classical-dip", "--out", str(a), "--seed", "5", "--check"]) == 0
    assert main(["classical-dip", "--out", str(b), "--seed", "5", "--check"]) == 0
    for name in ("classical_dip.csv", "classical_dip.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    summary = load_json(a / "classical_dip.json")
    assert summary["seed"] == 5
    lo, hi = summary["visibility_ci"]
    assert lo <= 1.0 <= hi
    assert "checks passed" in capsys.readouterr().out


def test_thread_count_does_not_change_output(tmp_path, monkeypatch):
    cfg = write(tmp_path, 'kind = "classical-dip"\nseed = 3\n[phases]\nkind = "uniform"\n'
                          '[delays]\nunit = "ms"\nvalues = [-3, -2, -1, 0, 1, 2, 3]\n'
                          '[sampling]\nsamples = 150\nn_resamples = 500\n')
    monkeypatch.setenv("HOMLAB_THREADS", "1")
    assert main(["classical-dip", "--config", str(cfg), "--out", str(tmp_path / "one")]) == 0
    monkeypatch.setenv("HOMLAB_THREADS", "4")
    assert main(["classical-dip", "--config", str(cfg), "--out", str(tmp_path / "four")]) == 0
    for name in ("classical_dip.csv", "classical_dip.json"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "four" / name).read_bytes()


@pytest.mark.parametrize("values, target", [("[0, 0.5, 1, 1.5]", 0.5), (None, 0.5)])
def test_half_visibility_laws(tmp_path, values, target):
    phases = f"values_pi = {values}" if values else 'kind = "uniform"'
    cfg = write(tmp_path, f'kind = "classical-dip"\nseed = 2\n[phases]\n{phases}\n'
                          '[sampling]\nn_resamples = 2000\n')
    assert main(["classical-dip", "--config", str(cfg), "--out", str(tmp_path), "--check"]) == 0
    summary = load_json(tmp_path / "classical_dip.json")
    assert summary["target_visibility"] == pytest.approx(target)


def test_auto_samples_respect_pilot_requirement(tmp_path):
    assert main(["min-n", "--out", str(tmp_path / "n"), "--seed", "4"]) == 0
    assert main(["classical-dip", "--out", str(tmp_path / "d"), "--seed", "4"]) == 0
    rows = np.genfromtxt(tmp_path / "n" / "min_n.csv", delimiter=",", names=True)
    used = load_json(tmp_path / "d" / "classical_dip.json")["samples_per_delay"]
    assert np.all(np.array(used) >= rows["n_required"])
    assert np.all(np.array(used) >= 200)


def test_rf_chain_flag(tmp_path):
    assert main(["classical-dip", "--rf-chain", "--samples", "200", "--out", str(tmp_path),
                 "--check"]) == 0
    assert load_json(tmp_path / "classical_dip.json")["rf_chain"] is True


@pytest.mark.parametrize("mode, ratio", [("classical", 0.5), ("quantum", 0.25)])
def test_complementarity(tmp_path, mode, ratio):
    assert main(["complementarity", "--mode", mode, "--out", str(tmp_path), "--check"]) == 0
    assert load_json(tmp_path / f"complementarity_{mode}.json")["ratio"] == pytest.approx(ratio, abs=1e-9)


def test_quantum_complementarity_without_block(tmp_path):
    cfg = write(tmp_path, 'kind = "complementarity-quantum"\n[mzi]\nblocked = "none"\n')
    assert main(["complementarity", "--config", str(cfg), "--out", str(tmp_path), "--check"]) == 0
    assert load_json(tmp_path / "complementarity_quantum.json")["ratio"] == 1.0


def test_quantum_dip_and_fit_pipeline(tmp_path):
    write(tmp_path, 'kind = "quantum-dip"\nseed = 9\noutput = "run"\n[quantum]\n'
                    'scale_k = 2303.0\nt_power = 0.52\neta = 0.9995\nzeta = 0.038\n'
                    'sigma_nm = 0.581\nnoise = "poisson"\n', "q.toml")
    write(tmp_path, 'kind = "fit"\nseed = 9\noutput = "run"\n[fit]\ndata = "run/quantum_dip.csv"\n'
                    'free = ["K", "sigma_omega"]\n[quantum]\nt_power = 0.52\neta = 0.9995\n'
                    'zeta = 0.038\nsigma_nm = 0.581\n', "f.toml")
    assert main(["quantum-dip", "--config", str(tmp_path / "q.toml"), "--check"]) == 0
    assert main(["fit", "--config", str(tmp_path / "f.toml"), "--check"]) == 0
    fit = load_json(tmp_path / "run" / "fit.json")
    assert fit["params"]["K"]["value"] == pytest.approx(2303, rel=0.05)
    assert fit["r_squared"] > 0.99


def test_ideal_quantum_dip(tmp_path):
    assert main(["quantum-dip", "--out", str(tmp_path), "--check"]) == 0
    summary = load_json(tmp_path / "quantum_dip.json")
    assert summary["derived_visibility"] == 1.0
    assert summary["curve_visibility"] == pytest.approx(1.0, abs=1e-6)


def test_mzi_scan(tmp_path):
    assert main(["mzi-scan", "--out", str(tmp_path), "--check"]) == 0
    data = np.genfromtxt(tmp_path / "mzi_scan.csv", delimiter=",", names=True)
    assert len(data) == 100
    np.testing.assert_allclose(data["quantum_coincidence"], np.cos(data["theta_rad"] / 2) ** 2, atol=1e-12)


def test_min_n_from_moments(tmp_path):
    cfg = write(tmp_path, 'kind = "min-n"\n["min-n"]\nmean = 1.0\nstd_dev = 0.1\n')
    assert main(["min-n", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert load_json(tmp_path / "min_n.json")["min_samples"] == 16


def test_bootstrap_on_data(tmp_path):
    (tmp_path / "x.csv").write_text("value\n" + "\n".join(str(v) for v in [5.0] * 4) + "\n")
    assert main(["bootstrap", "--data", str(tmp_path / "x.csv"), "--out", str(tmp_path)]) == 0
    assert load_json(tmp_path / "bootstrap.json")["ci"] == [5.0, 5.0]


def test_config_errors_exit_2(tmp_path, capsys):
    cfg = write(tmp_path, 'kind = "classical-dip"\n[pulse]\namplitude = "loud"\n')
    assert main(["classical-dip", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "pulse.amplitude" in capsys.readouterr().err


def test_kind_must_match_subcommand(tmp_path):
    cfg = write(tmp_path, 'kind = "quantum-dip"\n')
    assert main(["classical-dip", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_failed_check_exits_1(tmp_path):
    # an unattainable bound makes the check fail without any other error
    cfg = write(tmp_path, 'kind = "bootstrap"\n[bootstrap]\ntrials = 20\nsample_size = 10\n'
                          'n_resamples = 200\ncoverage_lo = 1.01\n')
    assert main(["bootstrap", "--config", str(cfg), "--out", str(tmp_path), "--check"]) == 1


def test_usage_errors():
    with pytest.raises(SystemExit):
        main(["classical-dip", "--samples", "1"])
    with pytest.raises(SystemExit):
        main(["classical-dip", "--seed", str(2 ** 64)])
