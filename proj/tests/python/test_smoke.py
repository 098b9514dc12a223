import numpy as np
import pytest

import vaebench


def small_data():
    return vaebench.generate_dataset({"n": 24, "image_size": 16, "grid": 16, "snr": 1, "seed": 3})


def test_dataset_shape_and_determinism():
    a, b = small_data(), small_data()
    assert len(a) == 24 and a.mode == "tomographic"
    assert a.images.shape == (24, 16, 16)
    np.testing.assert_array_equal(a.images, b.images)
    assert set(a.truth) <= {0.0, 1.0}


def test_projection_of_phantom_keeps_mass():
    v = vaebench.make_phantom(0.5, 16)
    img = vaebench.project(v)
    assert img.shape == (16, 16)
    assert img.sum() == pytest.approx(v.sum(), rel=1e-12)
    turned = vaebench.rotate(v, [1.0, 0.0, 0.0, 0.0])
    np.testing.assert_allclose(turned, v, atol=1e-12)


def test_translate_and_filter_preserve_constant_images():
    img = np.full((16, 16), 2.5)
    np.testing.assert_allclose(vaebench.translate(img, [1.5, -0.5]), img, atol=1e-12)
    np.testing.assert_allclose(vaebench.apply_ctf(img, 2), img, atol=1e-12)


def test_kl_closed_form():
    assert vaebench.kl_standard_normal([0.0, 0.0], [0.0, 0.0]) == 0.0
    mu, log_sigma = 0.7, -0.3
    expected = 0.5 * (mu**2 + np.exp(2 * log_sigma) - 1 - 2 * log_sigma)
    assert vaebench.kl_standard_normal([mu], [log_sigma]) == pytest.approx(expected, rel=1e-12)


def test_train_is_deterministic():
    data = small_data()
    config = {"z_dim": 2, "epochs": 2, "batch_size": 8, "encoder_preset": "small",
              "decoder_preset": "small", "volume_dumps": 1, "image_dumps": 0}
    a = vaebench.train(config, data)
    b = vaebench.train(config, data)
    assert len(a["epochs"]) == 2
    assert a["latents"].shape == (24, 4)
    np.testing.assert_array_equal(a["latents"], b["latents"])
    assert a["volumes"][0].shape == (16, 16, 16)


def test_bad_config_raises():
    with pytest.raises(vaebench.ConfigError):
        vaebench.train({"epohcs": 1}, small_data())


def test_selftest_passes():
    results = vaebench.selftest()
    assert results
    failed = [name for name, ok, _ in results if not ok]
    assert not failed


def test_cli_status(tmp_path):
    out = tmp_path / "d.vbds"
    assert vaebench.run(["gen-data", "--out", str(out), "n=4", "image_size=16", "grid=16"]) == 0
    assert vaebench.load_dataset(str(out)).size == 4
    assert vaebench.run(["train", "--out", str(tmp_path / "r"), "dataset=" + str(out), "nonsense=1"]) == 2
