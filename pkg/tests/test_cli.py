import json
import math
import subprocess
import sys

import numpy as np
import pytest

from sigmadamp.cli import (
    EXIT_BLOWUP,
    EXIT_OK,
    EXIT_VALIDATION,
    main,
    read_csv,
    run,
    seed_data,
)
from sigmadamp.config import ConfigError, RunConfig, parse_kv

LINEAR = """\
# linear run
grid.dim = 1
grid.points = 256
grid.half_length = 20
grid.sigma = 1
model = linear
data.amplitude = 1.0
data.width = 1.0
time.dt = 0.1
time.t_end = 10
rates.window = [2, 10]
rates.exp_window = [0, 10]
output_dir = out
"""

BLOWUP = """\
grid.dim = 1
grid.points = 256
grid.half_length = 20
model = semilinear_q
p = 2
data.amplitude = 2
time.dt = 0.001
time.t_end = 2
time.sample_every = 10
output_dir = out
"""

NONLINEAR = """\
grid.dim = 1
grid.points = 256
grid.half_length = 20
model = semilinear_q
p = 2
data.amplitude = 0.3
time.dt = 0.01
time.t_end = 5
time.sample_every = 5
rates.window = [1, 5]
output_dir = out
"""


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_linear_run_outputs(tmp_path, capsys):
    cfg = write(tmp_path, LINEAR)
    assert main(["simulate", str(cfg)]) == EXIT_OK
    out = tmp_path / "out"
    header = (out / "observables.csv").read_text().splitlines()
    assert header[0].startswith("t,u_L2,")
    assert len(header) == 102
    # 17 significant digits
    assert header[2].split(",")[0] == "0.10000000000000001"
    ident = {i["name"]: i for i in json.loads((out / "identities.json").read_text())}
    assert ident["w_equals_exp_decay_u1"]["error"] <= 1e-10
    assert all(i["passed"] for i in ident.values())
    rates = json.loads((out / "rates.json").read_text())
    q = [r for r in rates if r["observable"] == "Q_L2"][0]
    assert q["verdict"] == "pass" and abs(q["fitted"] - 1.0) < 1e-6
    assert json.loads((out / "summary.json").read_text())["status"] == "ok"


def test_blowup_exit_and_time(tmp_path, capsys):
    cfg = write(tmp_path, BLOWUP)
    assert main(["simulate", str(cfg)]) == EXIT_BLOWUP
    info = json.loads((tmp_path / "out" / "blowup.json").read_text())
    assert abs(info["estimated_blowup_time"] - math.log(2)) < 1e-3
    assert info["last_valid_time"] < info["detected_at"]
    assert "blow-up" in capsys.readouterr().out


def test_condition_violation_exit(tmp_path, capsys):
    text = "grid.dim = 2\ngrid.points = 64\ngrid.half_length = 20\nmodel = semilinear_u\np = 1.5\ntime.dt = 0.01\ntime.t_end = 1\n"
    assert main(["simulate", str(write(tmp_path, text))]) == EXIT_VALIDATION
    msg = capsys.readouterr().out
    assert "1 + 2*sigma/n" in msg and "p >= 2" in msg
    assert not (tmp_path / "out").exists()


def test_determinism(tmp_path):
    names = ["observables.csv", "rates.json", "identities.json", "summary.json"]
    for text in (LINEAR, NONLINEAR):
        cfg = RunConfig.from_mapping(parse_kv(text))
        run(cfg, tmp_path / "a")
        run(cfg, tmp_path / "b")
        for n in names:
            assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


def test_csv_refit_reproduces_rates(tmp_path, capsys):
    cfg = write(tmp_path, NONLINEAR)
    assert main(["simulate", str(cfg)]) == EXIT_OK
    out = tmp_path / "out"
    assert main(["rates", str(out / "observables.csv"), str(cfg), "--out", str(tmp_path / "refit.json")]) == EXIT_OK
    assert (tmp_path / "refit.json").read_bytes() == (out / "rates.json").read_bytes()
    series = read_csv(out / "observables.csv")
    assert series["Q_L2"].times[-1] == 5.0


def test_rates_from_target_list(tmp_path, capsys):
    cfg = write(tmp_path, LINEAR)
    main(["simulate", str(cfg)])
    targets = tmp_path / "t.json"
    targets.write_text(json.dumps([{"observable": "Q_L2", "model": "exponential", "exponent": 1.0,
                                    "tolerance": 1e-6, "window": [0, 10]}]))
    capsys.readouterr()
    assert main(["rates", str(tmp_path / "out" / "observables.csv"), str(targets)]) == EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    assert rep[0]["verdict"] == "pass"
    targets.write_text(json.dumps([{"observable": "Q_L2", "model": "exponential", "exponent": 1.0}]))
    assert main(["rates", str(tmp_path / "out" / "observables.csv"), str(targets)]) == EXIT_VALIDATION


def test_check_identities_prints_verdicts(tmp_path, capsys):
    cfg = write(tmp_path, LINEAR)
    assert main(["check-identities", str(cfg)]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert any(line.startswith("PASS w_equals_exp_decay_u1") for line in lines)
    assert not (tmp_path / "out" / "rates.json").exists()


def test_bernoulli_identity_in_run(tmp_path):
    cfg = RunConfig.from_mapping(parse_kv(NONLINEAR.replace("time.dt = 0.01", "time.dt = 0.001")
                                          .replace("time.sample_every = 5", "time.sample_every = 50")))
    res = run(cfg, tmp_path / "o")
    assert res.exit_code == EXIT_OK
    ident = {i["name"]: i for i in json.loads((tmp_path / "o" / "identities.json").read_text())}
    assert ident["bernoulli_pointwise"]["error"] <= 1e-4


@pytest.mark.parametrize(
    "text,match",
    [
        ("grid.dim 1\n", "expected 'key = value'"),
        ("grid.dim = 1\ngrid.dim = 2\n", "duplicate"),
        ("1bad = 3\n", "bad key"),
    ],
)
def test_parser_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_kv(text)


def test_parser_values():
    d = parse_kv('a = 1\nb = [1, 2.5]\nc = hello world # note\nd = "x # y"\ne = true\n')
    assert d == {"a": 1, "b": [1, 2.5], "c": "hello world", "d": "x # y", "e": True}


@pytest.mark.parametrize(
    "edit,match",
    [
        ("extra.key = 1\n", "unknown keys"),
        ("data.amplitude = 0\n", "amplitude"),
        ("data.amplitude = -1\n", "amplitude"),
        ("time.dealias = maybe\n", "dealias"),
        ("checks = [\"plots\"]\n", "checks"),
        ("data.center = [0, 0]\n", "center"),
    ],
)
def test_config_validation(edit, match):
    with pytest.raises(ConfigError, match=match):
        RunConfig.from_mapping(parse_kv(LINEAR + edit))


def test_model_and_p_consistency():
    with pytest.raises(ConfigError, match="model"):
        RunConfig.from_mapping(parse_kv(LINEAR.replace("model = linear", "model = cubic")))
    with pytest.raises(ConfigError, match="needs p"):
        RunConfig.from_mapping(parse_kv(LINEAR.replace("model = linear", "model = semilinear_q")))


def test_seed_data_width_check(tmp_path, capsys):
    narrow = LINEAR.replace("data.width = 1.0", "data.width = 0.3")
    with pytest.raises(ConfigError, match="points per e-folding"):
        seed_data(RunConfig.from_mapping(parse_kv(narrow)))
    assert main(["simulate", str(write(tmp_path, narrow))]) == EXIT_VALIDATION


def test_seed_data_shapes():
    cfg = RunConfig.from_mapping(parse_kv(LINEAR + "data.u0_zero = false\ndata.u0_amplitude = 0.5\n"))
    u0, u1 = seed_data(cfg)
    np.testing.assert_allclose(u0.values, 0.5 * u1.values)
    assert np.max(u1.values) == pytest.approx(1.0)
    base = LINEAR + "data.shape = bumps\nseed = 4\n"
    a = seed_data(RunConfig.from_mapping(parse_kv(base)))[1].values
    b = seed_data(RunConfig.from_mapping(parse_kv(base)))[1].values
    c = seed_data(RunConfig.from_mapping(parse_kv(base.replace("seed = 4", "seed = 5"))))[1].values
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert np.max(np.abs(a)) == pytest.approx(1.0)


def test_output_dir_relative_to_config(tmp_path):
    sub = tmp_path / "cfgs"
    sub.mkdir()
    cfg = RunConfig.load(write(sub, LINEAR))
    assert cfg.output_dir == sub / "out"


def test_check_inequalities(tmp_path, capsys):
    params = write(tmp_path, 'checks = ["fgn", "integral_2"]\nfgn.q = 2\nfgn.s = 0\nfgn.trials = 5\nintegral_2.t_max = 20\n', "ineq.cfg")
    assert main(["check-inequalities", str(params)]) == EXIT_OK
    res = json.loads(capsys.readouterr().out)
    assert [r["name"] for r in res] == ["fgn", "integral_ineq_2"]
    assert abs(res[0]["worst_ratio"] - 1.0) < 1e-10
    bad = write(tmp_path, "fgn.r = 2\n", "bad.cfg")
    assert main(["check-inequalities", str(bad)]) == EXIT_VALIDATION


def test_sweep(tmp_path, capsys):
    for i in range(2):
        write(tmp_path, LINEAR.replace("output_dir = out", f"output_dir = out{i}"), f"s{i}.cfg")
    assert main(["sweep", str(tmp_path / "s*.cfg"), "--jobs", "2"]) == EXIT_OK
    assert (tmp_path / "out0" / "summary.json").exists() and (tmp_path / "out1" / "summary.json").exists()
    assert (tmp_path / "out0" / "observables.csv").read_bytes() == (tmp_path / "out1" / "observables.csv").read_bytes()
    write(tmp_path, LINEAR.replace("output_dir = out", "output_dir = out0"), "s2.cfg")
    assert main(["sweep", str(tmp_path / "s*.cfg")]) == EXIT_VALIDATION
    assert "share output_dir" in capsys.readouterr().err
    assert main(["sweep", str(tmp_path / "none*.cfg")]) == EXIT_VALIDATION


def test_missing_config(tmp_path, capsys):
    assert main(["simulate", str(tmp_path / "nope.cfg")]) == EXIT_VALIDATION
    assert "cannot read" in capsys.readouterr().err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "sigmadamp", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("sigmadamp ")
