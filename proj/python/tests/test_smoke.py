import json

import numpy as np
import pytest

import nsr


def test_parse_and_evaluate():
    e = nsr.parse("x1 * sin(x2) + 2")
    X = np.array([[1.0, 0.0], [2.0, np.pi / 2]])
    np.testing.assert_allclose(e(X), [2.0, 4.0])
    assert nsr.parse(e.infix) == e
    assert len(e) == len(e.prefix)
    assert nsr.parse("x1 - x1").simplify().infix == "0"
    assert "C" in nsr.parse("2.5 * x1").skeleton()


def test_parse_error_is_raised():
    with pytest.raises(nsr._core.NsrError):
        nsr.parse("sin(")


def test_too_many_columns():
    with pytest.raises(nsr._core.NsrError):
        nsr.parse("x1")(np.zeros((3, 4)))


def test_sample_pool_is_seeded():
    a = nsr.sample_pool(50, seed=3)
    assert a == nsr.sample_pool(50, seed=3)
    assert a != nsr.sample_pool(50, seed=4)
    assert len(a) == 50


def test_metrics():
    y = np.linspace(1, 2, 100)
    assert nsr.a1_fraction(y, y * 1.01) == 1.0
    assert nsr.r2_score(y, y) == 1.0
    assert nsr.r2_score(y, np.full_like(y, y.mean())) == pytest.approx(0.0)


def test_bundled_suites():
    aif = nsr.load_suite("aif")
    assert len(aif) == 52
    assert len(nsr.load_suite("nguyen")) == 12
    rec = aif[0]
    lo, hi = rec["support"][0]
    assert lo < hi


def test_gp_fits_a_sum():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, size=(64, 2))
    y = X[:, 0] + X[:, 1]
    expr, fit, trace = nsr.gp_fit(X, y, population_size=256, generations=10, seed=1)
    assert len(trace) == 11
    assert trace[-1][1] <= trace[0][1]
    np.testing.assert_allclose(expr(X), y, atol=1e-9)
    assert fit < 1e-9


def test_cli_train_and_regress(tmp_path):
    pool = tmp_path / "pool.jsonl"
    prefix = nsr.parse("x1 + x2").prefix
    pool.write_text("# nsr-pool v1 count=1\n" + json.dumps({"prefix": prefix}) + "\n")
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text("preset = toy\nhidden_dim = 16\nnum_heads = 2\ninducing_points = 4\npma_seeds = 2\nmax_target_len = 12\n")
    code, out, err = nsr.run_cli(
        ["train", "--pool", str(pool), "--model-config", str(cfg), "--steps", "150", "--seed", "41",
         "--set", "learning_rate=1e-2", "--set", "batch_size=4", "--set", "max_points=20",
         "--threads", "1", "--out", str(tmp_path / "m")]
    )
    assert code == 0, err
    assert (tmp_path / "m" / "trace.csv").read_text().startswith("step,train_loss,val_loss,wall_seconds")

    model = nsr.Model.load(str(tmp_path / "m" / "checkpoint.bin"))
    assert model.parameter_count > 0
    rng = np.random.default_rng(1)
    X = rng.uniform(-2, 2, size=(40, 2))
    y = X[:, 0] + X[:, 1]
    r = model.regress(X, y, beam_size=4, restarts=2)
    assert r["mse"] < 1e-10
    np.testing.assert_allclose(r["expression"](X), y, atol=1e-8)
    assert r["candidates"][0]["score"] <= r["candidates"][-1]["score"]


def test_cli_usage_error():
    code, _, err = nsr.run_cli(["gen-pool"])
    assert code == 2
    assert "error" in err
