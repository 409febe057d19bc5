import csv
import json

import pytest

from sqkd import cli
from sqkd.adversary import SearchResult
from sqkd.config import (
    ConfigError,
    ScenarioConfig,
    bundled_scenarios,
    dump_config,
    load_config,
    parse_config,
)
from sqkd.report import INTERVAL_COLUMNS

IDEAL_SMALL = """\
photon_statistics = single
mean_photons = 1.0
efficiency = 1.0
dark_prob_per_gate = 0
circulator_loss_db = 0
visibility = 1.0
n_rounds = 50000
interval_rounds = 10000
"""


def write(tmp_path, text, name="s.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_bundled_scenarios_present():
    assert {"ideal.cfg", "paper.cfg", "backward_attack.cfg"} <= set(bundled_scenarios())
    for name in bundled_scenarios():
        load_config(name)


def test_config_round_trip():
    cfg = ScenarioConfig(visibility=0.1234567890123456789, seed=99, attack="forward_z_intercept_resend")
    assert parse_config(dump_config(cfg)) == cfg


def test_config_parsing_details():
    cfg = parse_config("n_rounds = 1e7\n# comment\nmean_photons = 0.2 ; inline\n".replace(" ; inline", ""))
    assert cfg.n_rounds == 10_000_000 and cfg.mean_photons == 0.2
    with pytest.raises(ConfigError, match="n_rounds"):
        parse_config("n_rounds = 1.5")
    with pytest.raises(ConfigError, match="sections"):
        parse_config("[extra]\nseed = 1")
    with pytest.raises(ConfigError, match="mean_photons"):
        parse_config("mean_photons = nan")


def test_simulate_ideal(tmp_path, capsys):
    code, out, _ = run(["simulate", "--config", "ideal.cfg", "--out", str(tmp_path)], capsys)
    assert code == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["session"]["qber_sift_z"] == 0 and rep["session"]["qber_ctrl_x"] == 0
    assert "qber_sift_z: 0" in out
    with open(tmp_path / "intervals.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == INTERVAL_COLUMNS
    assert len(rows) == 11
    assert (tmp_path / "report.txt").read_text() == out


def test_simulate_is_deterministic(tmp_path, capsys):
    cfg = write(tmp_path, "n_rounds = 200000\ninterval_rounds = 50000\n")
    run(["simulate", "--config", cfg, "--out", str(tmp_path / "a")], capsys)
    run(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--workers", "8"], capsys)
    for name in ("report.txt", "report.json", "intervals.csv", "raw_key.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_flag_overrides_config(tmp_path, capsys):
    cfg = write(tmp_path, "n_rounds = 100000\nseed = 1\n")
    run(["simulate", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "5"], capsys)
    rep = json.loads((tmp_path / "a" / "report.json").read_text())
    assert rep["seed"] == 5 and rep["config"]["seed"] == 5


@pytest.mark.parametrize(
    "text, key",
    [
        ("mean_photonz = 0.1\n", "mean_photonz"),
        ("efficiency = 1.5\n", "efficiency"),
        ("visibility = -0.2\n", "visibility"),
        ("p_ctrl = 2\n", "p_ctrl"),
        ("threshold_ctrl_x = 3\n", "threshold_ctrl_x"),
        ("seed = abc\n", "seed"),
    ],
)
def test_config_errors_name_the_key(tmp_path, capsys, text, key):
    code, _, err = run(["simulate", "--config", write(tmp_path, text), "--out", str(tmp_path)], capsys)
    assert code == 2
    assert key in err


def test_missing_config_file(tmp_path, capsys):
    code, _, err = run(["simulate", "--config", str(tmp_path / "nope.cfg")], capsys)
    assert code == 2 and "not found" in err


def test_zero_rounds_rejected_for_simulate(tmp_path, capsys):
    code, _, _ = run(["simulate", "--config", write(tmp_path, "n_rounds = 0\n"), "--out", str(tmp_path)], capsys)
    assert code == 2


def _attack_eval(tmp_path, capsys, attack, rounds=0):
    cfg = write(tmp_path, IDEAL_SMALL.replace("n_rounds = 50000", f"n_rounds = {rounds}") + f"attack = {attack}\n")
    code, out, err = run(["attack-eval", "--config", cfg, "--out", str(tmp_path)], capsys)
    rep = json.loads((tmp_path / "report.json").read_text()) if code == 0 else None
    return code, rep, err


def test_attack_eval_identity(tmp_path, capsys):
    code, rep, _ = _attack_eval(tmp_path, capsys, "identity", rounds=50000)
    a = rep["attack"]
    assert code == 0
    assert (a["e_ctrl_x"], a["e_sift_z"], a["eve_trace_distance"], a["eve_holevo_bits"]) == (0, 0, 0, 0)
    assert all(c["ok"] for c in rep["monte_carlo"])


def test_attack_eval_backward(tmp_path, capsys):
    code, rep, _ = _attack_eval(tmp_path, capsys, "backward_z_intercept_resend", rounds=50000)
    a = rep["attack"]
    assert code == 0
    assert (a["e_ctrl_x"], a["e_sift_z"]) == pytest.approx((0.5, 0.0), abs=1e-12)
    assert a["eve_trace_distance"] == pytest.approx(1.0, abs=1e-12)


def test_attack_eval_both(tmp_path, capsys):
    code, rep, _ = _attack_eval(tmp_path, capsys, "both_z_intercept_resend")
    assert code == 0 and rep["attack"]["e_ctrl_x"] == pytest.approx(0.5, abs=1e-12)
    assert "monte_carlo" not in rep


def test_attack_eval_unknown_name(tmp_path, capsys):
    code, _, err = _attack_eval(tmp_path, capsys, "photon_splitting")
    assert code == 2
    assert "backward_z_intercept_resend" in err and "identity" in err


def test_attack_eval_requires_attack(tmp_path, capsys):
    code, _, _ = _attack_eval(tmp_path, capsys, "none")
    assert code == 2


def test_attack_eval_flags_disagreement(tmp_path, capsys, monkeypatch):
    real = cli.expected_metrics

    def skewed(*a, **k):
        out = dict(real(*a, **k))
        out["qber_ctrl_x"] = 0.25
        return out

    monkeypatch.setattr(cli, "expected_metrics", skewed)
    code, _, err = _attack_eval(tmp_path, capsys, "backward_z_intercept_resend", rounds=50000)
    assert code == 3 and "3 sigma" in err


def test_generator_attack_from_config(tmp_path, capsys):
    code, rep, _ = _attack_eval(
        tmp_path, capsys, "generator\nancilla_dim = 2\nattack_generator = " + ",".join(["0"] * 32)
    )
    assert code == 0 and rep["attack"]["e_ctrl_x"] == pytest.approx(0.0, abs=1e-15)
    code, _, err = _attack_eval(tmp_path, capsys, "generator\nattack_generator = 1,2,3")
    assert code == 2 and "attack_generator" in err


SWEEP = "opt_starts = 4\nopt_iterations = 60\n"


def test_sweep_zero_budget(tmp_path, capsys):
    code, out, _ = run(
        ["robustness-sweep", "--config", write(tmp_path, SWEEP), "--epsilons", "0", "--out", str(tmp_path)], capsys
    )
    assert code == 0
    rows = list(csv.DictReader((tmp_path / "sweep.csv").open()))
    assert float(rows[0]["best_info_trace_distance"]) <= 1e-6
    assert set(rows[0]) >= {"epsilon", "best_info_trace_distance", "best_info_holevo", "starts", "iterations"}


def test_sweep_rejects_bad_epsilon(tmp_path, capsys):
    code, _, err = run(["robustness-sweep", "--epsilons", "0,0.7", "--out", str(tmp_path)], capsys)
    assert code == 2 and "0.7" in err


def _fake(eps, td):
    return SearchResult(eps, td, td, 0.0, 0.0, None, 4, 10, 4, 0)


def test_sweep_flags_non_monotone_curve(tmp_path, capsys, monkeypatch):
    monkeypatch.setattr(cli, "robustness_sweep", lambda e, d, c: [_fake(0.0, 0.0), _fake(0.1, 0.5), _fake(0.2, 0.4)])
    code, _, err = run(["robustness-sweep", "--epsilons", "0,0.1,0.2", "--out", str(tmp_path)], capsys)
    assert code == 3 and "decreases" in err


def test_sweep_flags_information_at_zero(tmp_path, capsys, monkeypatch):
    monkeypatch.setattr(cli, "robustness_sweep", lambda e, d, c: [_fake(0.0, 1e-3)])
    code, _, _ = run(["robustness-sweep", "--epsilons", "0", "--out", str(tmp_path)], capsys)
    assert code == 3


def test_sweep_divergence_exit(tmp_path, capsys, monkeypatch):
    def boom(*a):
        raise FloatingPointError("non-finite objective")

    monkeypatch.setattr(cli, "robustness_sweep", boom)
    code, _, err = run(["robustness-sweep", "--epsilons", "0", "--out", str(tmp_path)], capsys)
    assert code == 3 and "non-finite" in err


def test_calibrate_perfect_bench(tmp_path, capsys):
    cfg = write(tmp_path, "efficiency = 0.205\ndark_prob_per_gate = 0\ncirculator_loss_db = 0\n")
    code, out, _ = run(["calibrate", "--config", cfg, "--target-contrast", "1.0", "--out", str(tmp_path)], capsys)
    assert code == 0 and "visibility = 1.0" in out


def test_calibrate_bench_round_trip(tmp_path, capsys):
    code, _, _ = run(["calibrate", "--config", "paper.cfg", "--target-contrast", "0.9745", "--out", str(tmp_path)], capsys)
    assert code == 0
    cal = load_config(tmp_path / "calibrated.cfg")
    assert 0.97 < cal.visibility < 0.99
    rep = json.loads((tmp_path / "report.json").read_text())
    assert abs(rep["calibration"]["expected"]["contrast_overall"] - 0.9745) <= 1e-3
    small = (tmp_path / "calibrated.cfg").read_text().replace("n_rounds = 10000000", "n_rounds = 100000")
    out = tmp_path / "sim"
    code, _, _ = run(["simulate", "--config", write(tmp_path, small, "cal.cfg"), "--out", str(out)], capsys)
    assert code == 0


def test_calibrate_rejects_zero_and_unreachable(tmp_path, capsys):
    code, _, _ = run(["calibrate", "--target-contrast", "0", "--out", str(tmp_path)], capsys)
    assert code == 2
    code, _, err = run(["calibrate", "--target-contrast", "0.9999", "--out", str(tmp_path)], capsys)
    assert code == 2 and "achievable range" in err


def test_workers_flag_validation(capsys):
    code, _, _ = run(["simulate", "--workers", "0"], capsys)
    assert code == 2
