import json
import math
import os
from pathlib import Path

import pytest

import nrdectl

CONFIGS = Path(os.environ.get("NRDECTL_CONFIGS", Path(__file__).resolve().parents[2] / "configs"))


def test_fbm_covariance_closed_form():
    assert nrdectl.fbm_covariance(0.4, 0.9, 0.5) == pytest.approx(0.4)
    assert nrdectl.fbm_covariance(1.0, 2.0, 0.3) == pytest.approx(2.0**0.6 / 2.0)
    ratio = nrdectl.fgn_autocovariance(1, 0.3, 1.0) / nrdectl.fgn_autocovariance(0, 0.3, 1.0)
    assert ratio == pytest.approx(0.5 * (2.0**0.6 - 2.0))


def test_increments_are_seeded():
    a = nrdectl.sample_increments("fractional", 0.3, 2, 1.0, 8, seed=4, n_paths=3)
    b = nrdectl.sample_increments("fractional", 0.3, 2, 1.0, 8, seed=4, n_paths=3)
    assert a == b
    assert len(a) == 8 and len(a[0]) == 3 and len(a[0][0]) == 2
    with pytest.raises(ValueError):
        nrdectl.sample_increments("levy", 0.3, 1, 1.0, 4, seed=0)


def test_signature_of_l_path():
    points = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]
    assert nrdectl.signature_coeff(points, 2, [0, 1]) == pytest.approx(1.0)
    assert nrdectl.signature_coeff(points, 2, [1, 0]) == pytest.approx(0.0)
    flat = nrdectl.signature(points, 2)
    assert len(flat) == 1 + 2 + 4 and flat[0] == 1.0


def test_shuffle_identity():
    points = [[0.0, 0.0], [0.3, -0.2], [0.1, 0.5], [0.7, 0.4]]
    u, v = [0], [1, 0]
    lhs = nrdectl.signature_coeff(points, 3, u) * nrdectl.signature_coeff(points, 3, v)
    rhs = sum(n * nrdectl.signature_coeff(points, 3, w) for w, n in nrdectl.shuffle(u, v))
    assert lhs == pytest.approx(rhs, abs=1e-12)
    assert sum(n for _, n in nrdectl.shuffle([0, 1], [1, 0])) == math.comb(4, 2)


def test_oracles():
    m = nrdectl.merton()
    assert m["investment"] == pytest.approx(0.05 / 0.09)
    assert m["consumption"] == pytest.approx(0.1)
    assert nrdectl.riccati_value(steps=400) == pytest.approx(nrdectl.riccati_value(steps=800), rel=1e-8)


def test_gradcheck_passes():
    cases = nrdectl.gradcheck(trials=20)
    assert len(cases) == 20 and all(c["passed"] for c in cases)


def test_cli_commands(tmp_path):
    res = nrdectl.run("gradcheck", trials=0)
    assert res["exit_code"] == 0 and "no checks run" in res["log"]
    assert nrdectl.run("train")["exit_code"] == 2
    res = nrdectl.run("sigdemo", n_max=2, samples=200, out=str(tmp_path / "sig"))
    assert res["exit_code"] == 0
    rows = json.loads((tmp_path / "sig" / "sigdemo.json").read_text())["rows"]
    assert [r["N"] for r in rows] == [1, 2]
    with pytest.raises(TypeError):
        nrdectl.run("gradcheck", bogus=1)


def test_bundled_configs_resolve():
    text = nrdectl.load_config(str(CONFIGS / "lq_markov.yaml"), "smoke")
    assert "batches: 50" in text
