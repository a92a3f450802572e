import math

import numpy as np
import pytest
from oracles import naive_rmse

from magsynth import core_image as ci
from magsynth.metrics import MetricReport, evaluate_paths, psnr, psnr_from_rmse, report, rmse


def test_rmse_examples():
    a = np.full((4, 4, 3), 7, dtype=np.uint8)
    assert rmse(a, a) == 0.0
    assert rmse(np.zeros((2, 2, 3), np.uint8), np.full((2, 2, 3), 255, np.uint8)) == 255.0
    assert rmse(np.array([[0, 0]]), np.array([[3, 4]])) == pytest.approx(math.sqrt(12.5), abs=1e-12)


def test_psnr_examples():
    assert psnr_from_rmse(255.0) == 0.0
    assert abs(psnr_from_rmse(25.5) - 20.0) <= 1e-9
    a = np.full((3, 3, 3), 9, np.uint8)
    assert psnr(a, a) == math.inf


def test_shape_mismatch():
    with pytest.raises(ValueError):
        rmse(np.zeros((2, 2, 3), np.uint8), np.zeros((2, 3, 3), np.uint8))
    with pytest.raises(ValueError):
        rmse(np.full((2, 2), 300), np.zeros((2, 2)))


def test_naive_oracle(rng):
    for _ in range(10):
        a = rng.integers(0, 256, (16, 16, 3)).astype(np.uint8)
        b = rng.integers(0, 256, (16, 16, 3)).astype(np.uint8)
        ref = naive_rmse(a, b)
        assert abs(rmse(a, b) - ref) <= 1e-9
        assert abs(psnr(a, b) - 20 * math.log10(255 / ref)) <= 1e-9


def test_psnr_strictly_decreasing():
    values = [psnr_from_rmse(r) for r in np.linspace(0.1, 255, 200)]
    assert all(x > y for x, y in zip(values, values[1:]))


def test_report():
    a = np.zeros((2, 5, 3), np.uint8)
    rep = report(a, a)
    assert rep == MetricReport(0.0, math.inf, 10)
    assert rep.to_dict()["psnr"] is None


def test_evaluate_files_and_dirs(tmp_path, rng):
    pred, gt = tmp_path / "pred", tmp_path / "gt"
    for root in (pred, gt):
        (root / "000000").mkdir(parents=True)
    a = rng.integers(0, 256, (8, 8, 3)).astype(np.uint8)
    b = a.copy()
    b[0, 0, 0] = a[0, 0, 0] ^ 1
    ci.write_png(pred / "000000" / "I_amp.png", a)
    ci.write_png(gt / "000000" / "I_amp.png", b)
    ci.write_png(pred / "same.png", a)
    ci.write_png(gt / "same.png", a)
    ci.write_png(pred / "unmatched.png", a)

    res = evaluate_paths(pred, gt)
    assert res["aggregate"]["n_pairs"] == 2
    assert res["aggregate"]["n_identical"] == 1
    names = {p["name"] for p in res["pairs"]}
    assert names == {"000000/I_amp.png", "same.png"}
    single = evaluate_paths(pred / "000000" / "I_amp.png", gt / "000000" / "I_amp.png")
    assert single["pairs"][0]["rmse"] == pytest.approx(math.sqrt(1 / a.size))


def test_evaluate_errors(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    with pytest.raises(FileNotFoundError):
        evaluate_paths(tmp_path / "a", tmp_path / "b")
    with pytest.raises(FileNotFoundError):
        evaluate_paths(tmp_path / "a", tmp_path / "missing.png")
