import numpy as np
import pytest

import vesselsynth as vs


def test_presets_and_generation():
    gen, noise = vs.preset(2)
    assert gen.line_width == 1
    img, lbl = vs.make_sample(gen, noise, 7)
    assert img.shape == (gen.image_size, gen.image_size)
    assert img.dtype == np.float32 and lbl.dtype == np.uint8
    assert 0.0 <= img.min() and img.max() <= 1.0
    assert 0 < lbl.sum() < lbl.size
    img2, lbl2 = vs.make_sample(gen, noise, 7)
    assert np.array_equal(img, img2) and np.array_equal(lbl, lbl2)


def test_raw_generation_marks_labels_only_where_drawn():
    gen, _ = vs.preset(1)
    img, lbl = vs.generate_raw(gen, 3)
    assert np.all(img[lbl == 0] == 0.0)
    assert np.all(img[lbl == 1] >= gen.gray_lo)


def test_invalid_config_raises():
    gen = vs.GeneratorConfig()
    gen.mean_length = -1.0
    with pytest.raises(vs.ConfigError):
        vs.make_sample(gen, vs.NoiseConfig(), 1)


def test_metrics_against_numpy():
    rng = np.random.default_rng(0)
    truth = (rng.random((30, 40)) < 0.3).astype(np.uint8)
    prob = rng.random((30, 40)).astype(np.float32)
    c = vs.confusion((prob >= 0.5).astype(np.uint8), truth)
    pred = prob >= 0.5
    assert c["tp"] == int(np.sum(pred & (truth == 1)))
    assert c["tn"] == int(np.sum(~pred & (truth == 0)))
    pos, neg = prob[truth == 1], prob[truth == 0]
    mw = (np.sum(pos[:, None] > neg[None, :]) + 0.5 * np.sum(pos[:, None] == neg[None, :])) / (pos.size * neg.size)
    assert vs.auc(prob, truth) == pytest.approx(mw, abs=1e-12)
    curve = vs.roc(prob, truth)
    assert curve.shape[1] == 3
    assert tuple(curve[0, 1:]) == (0.0, 0.0) and tuple(curve[-1, 1:]) == (1.0, 1.0)
    m = vs.evaluate(prob, truth)
    assert m["Sn"] == pytest.approx(c["tp"] / (c["tp"] + c["fn"]))
    assert vs.evaluate(prob, np.zeros_like(truth))["Sn"] is None
    with pytest.raises(vs.MetricError):
        vs.auc(prob, np.zeros_like(truth))


def test_train_and_predict_round_trip(tmp_path):
    code, _, err = vs.run_cli(["train", "--iterations", "2", "--set", "train.batch_size=1", "--out", str(tmp_path)])
    assert code == 0, err
    model = vs.Model.load(tmp_path / "model.vsck")
    assert model.iteration == 2
    assert model.output_size(64) == 54
    assert model.output_size(11) is None
    img = np.full((40, 48), 0.4, dtype=np.float32)
    valid = model.predict(img)
    assert valid.shape == (30, 38)
    mirror = model.predict(img, mode="mirror")
    assert mirror.shape == img.shape
    assert np.all((mirror >= 0) & (mirror <= 1))
    with pytest.raises(vs.ConfigError):
        model.predict(img, mode="same")
    with pytest.raises(vs.DataError):
        vs.Model.load(tmp_path / "missing.vsck")


def test_cli_usage_error_code():
    code, _, _ = vs.run_cli(["train", "--no-such-flag"])
    assert code == 1
