import json

import numpy as np
import pytest

import bwesid


def sine(freq, seconds, rate, amp=0.5):
    t = np.arange(int(seconds * rate)) / rate
    return amp * np.sin(2 * np.pi * freq * t)


def test_wav_round_trip(tmp_path):
    x = sine(440.0, 0.5, 16000)
    bwesid.write_wav(tmp_path / "a.wav", x, 16000)
    y, rate = bwesid.read_wav(tmp_path / "a.wav")
    assert rate == 16000
    assert np.max(np.abs(x - y)) <= 1.0 / 32768


def test_alaw_round_trip():
    x = sine(1000.0, 0.25, 8000, amp=0.9)
    codes = bwesid.alaw_encode(x)
    assert codes.dtype == np.uint8 and codes.shape == x.shape
    y = bwesid.alaw_decode(codes)
    snr = 10 * np.log10(np.sum(x**2) / np.sum((x - y) ** 2))
    assert snr > 30
    assert bwesid.alaw_encode_sample(0) == 0xD5


def test_potsband_and_resampling():
    x = sine(1000.0, 1.0, 16000)
    y = bwesid.potsband_filter(x, 16000)
    assert y.shape == x.shape
    low = bwesid.potsband_filter(sine(100.0, 1.0, 16000), 16000)
    assert np.std(low[4000:12000]) < 0.05 * np.std(x)
    nb = bwesid.downsample2x(y)
    assert nb.size == x.size // 2
    assert bwesid.upsample2x(nb).size == x.size


def test_lpc_cepstrum_one_pole():
    c = bwesid.lpc_to_cepstrum([0.5], 10)
    np.testing.assert_allclose(c, [0.5**n / n for n in range(1, 11)], atol=1e-12)


def test_feature_shapes():
    x = np.random.default_rng(0).normal(size=16000) * 0.1
    for param in ("lpcc", "melcepst"):
        f = bwesid.extract_features(x, 16000, param=param, dimension=12)
        assert f.shape[1] == 12 and f.shape[0] > 90


def test_sphericity_and_identification():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(400, 4)) * [1, 2, 3, 4]
    b = rng.normal(size=(400, 4)) * [4, 3, 2, 1]
    models = [bwesid.enroll(a, "a"), bwesid.enroll(b, "b")]
    assert bwesid.sphericity(models[0].covariance, models[0].covariance) == pytest.approx(0, abs=1e-12)
    probe = rng.normal(size=(300, 4)) * [4, 3, 2, 1]
    ranking = bwesid.identify(probe, models)
    assert ranking[0][0] == "b" and ranking[0][1] < ranking[1][1]


def test_em_fit_monotone():
    rng = np.random.default_rng(2)
    data = np.vstack([rng.normal(-3, 1, size=(200, 2)), rng.normal(3, 1, size=(200, 2))])
    model, ll = bwesid.em_fit(data, 2, max_iterations=30, tolerance=float("-inf"), seed=3)
    assert model.components == 2 and model.dimension == 2
    assert np.all(np.diff(ll) >= -1e-9)
    assert sorted(model.means[:, 0].round()) == [-3.0, 3.0]


def test_errors_raise():
    with pytest.raises(bwesid.Error):
        bwesid.read_wav("/nonexistent/file.wav")
    with pytest.raises(bwesid.Error):
        bwesid.upsample2x(np.array([np.nan, 0.0]))


def test_bwe_train_extend_and_sweep(tmp_path):
    manifest = bwesid.synth_corpus(tmp_path / "corpus", speakers=3, train_seconds=21.0, test_files=2,
                                   test_seconds=1.0, seed=4)
    train = [bwesid.read_wav(p)[0] for p in sorted((tmp_path / "corpus").glob("*/train_*.wav"))]
    model = bwesid.bwe_train(train, mixtures=2, iterations=5, seed=1)
    model.save(tmp_path / "m.bwem")
    model = bwesid.BweModel.load(tmp_path / "m.bwem")
    assert model.components == 2

    nb = bwesid.make_variant(train[0][:16000], 16000, "nb")
    wb = bwesid.bwe_extend(nb, model)
    assert wb.size == 2 * nb.size
    assert not np.any(bwesid.bwe_extend(np.zeros(8000), model))

    results, invalid, table = bwesid.run_sweep({"orig": manifest}, dimensions=[8, 40])
    assert [r["dimension"] for r in results] == [8]
    assert results[0]["trials"] == 6
    assert invalid[0]["dimension"] == 40
    assert table.startswith("P\t")


def test_cli_in_process():
    code, out, _ = bwesid.cli(["--version"])
    assert code == 0 and json.loads(out)["name"] == "bwesid"
    assert bwesid.cli(["no-such-command"])[0] == 2
