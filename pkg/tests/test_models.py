import numpy as np
import pytest

from colortraj.basis import reconstruct
from colortraj.dataset import ProcessCondition
from colortraj.errors import BadImageSize, BadWindow, ModalityMismatch, NotNormalized, SchemaMismatch
from colortraj.net.layers import Dense, Sequential
from colortraj.net.models import (
    FEATURE_WIDTH,
    MULTI_MODAL,
    TABULAR,
    BaselineParams,
    EncoderParams,
    baseline_rollout,
    baseline_rollout_batch,
    encode_image,
    encode_tabular,
    load_checkpoint,
    predict_coefficients,
    predict_trajectory,
    prepare_image,
    save_checkpoint,
)

from gradcheck import TOL, check_params, numeric_grad, rel_error

NORM = {"temperature": (350.0, 50.0), "air_velocity": (1000.0, 2000.0)}
COND = ProcessCondition(375.0, 1000.0, "F", "RPM")


def _image(rng):
    return rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)


def test_zero_weights_give_tanh_of_bias():
    params = EncoderParams.zeros(TABULAR, normalization=NORM)
    b = np.linspace(-2, 2, FEATURE_WIDTH)
    params.tabular.layers[2].params["b"] = b
    np.testing.assert_allclose(encode_tabular(params, COND), np.tanh(b), atol=1e-15)


def test_linear_identity_recovers_input():
    params = EncoderParams.zeros(TABULAR, activation="identity", normalization=NORM)
    w1 = np.zeros((FEATURE_WIDTH, 2))
    w1[0, 0] = w1[1, 1] = 1.0
    params.tabular.layers[0].params["W"] = w1
    params.tabular.layers[2].params["W"] = np.eye(FEATURE_WIDTH)
    out = encode_tabular(params, COND)
    np.testing.assert_allclose(out[:2], [0.5, 0.0], atol=1e-15)


def test_encoder_is_deterministic(rng):
    params = EncoderParams.initialize(MULTI_MODAL, rng, normalization=NORM)
    img = _image(rng)
    a = predict_coefficients(params, COND, img)
    assert np.array_equal(a, predict_coefficients(params, COND, img))
    assert a.shape == (9,) and np.all(np.isfinite(a))


def test_zero_image_gives_zero_features(rng):
    params = EncoderParams.initialize(MULTI_MODAL, rng, normalization=NORM)
    feats = encode_image(params, np.zeros((32, 32)))
    assert feats.shape == (FEATURE_WIDTH,)
    np.testing.assert_array_equal(feats, 0.0)


def test_image_width(rng):
    params = EncoderParams.initialize(MULTI_MODAL, rng)
    assert encode_image(params, rng.uniform(size=(32, 32))).shape == (FEATURE_WIDTH,)


@pytest.mark.parametrize("seed", range(20))
def test_feature_norm_gradient_wrt_conv_weights(seed):
    rng = np.random.default_rng(seed)
    params = EncoderParams.initialize(MULTI_MODAL, rng)
    img = rng.uniform(size=(1, 1, 32, 32))

    def loss():
        f = params.image.forward(img)
        return float(np.sum(f * f))

    f = params.image.forward(img)
    params.image.backward(2 * f)
    for idx in (0, 3):
        conv = params.image.layers[idx]
        entries = sorted(rng.choice(conv.params["W"].size, 12, replace=False))
        num = numeric_grad(loss, conv.params["W"], entries)
        assert rel_error(conv.grads["W"].reshape(-1)[entries], num) < TOL


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("mode", [TABULAR, MULTI_MODAL])
def test_full_encoder_gradients(seed, mode):
    rng = np.random.default_rng(seed)
    params = EncoderParams.initialize(mode, rng)
    for _, layer, key in params.named_params():
        if key == "b":
            layer.params[key] = rng.normal(scale=0.1, size=layer.params[key].shape)
    x = rng.uniform(size=(3, 2))
    images = rng.uniform(size=(3, 1, 32, 32)) if mode == MULTI_MODAL else None
    probe = rng.normal(size=(3, 9))
    worst = check_params(params, lambda: params.forward(x, images), params.backward, probe, rng, max_entries=10)
    assert worst < TOL


@pytest.mark.parametrize("seed", range(20))
def test_baseline_gradients(seed):
    rng = np.random.default_rng(seed)
    params = BaselineParams.initialize(rng, hidden=int(rng.integers(2, 8)), scale=float(rng.uniform(1, 30)))
    windows = rng.uniform(0, 30, size=(4, 5))
    probe = rng.normal(size=4)
    assert check_params(params, lambda: params.forward(windows), params.backward, probe, rng) < TOL


def test_constant_head(rng):
    for mode in (TABULAR, MULTI_MODAL):
        params = EncoderParams.initialize(mode, rng, normalization=NORM)
        head = params.head.layers[-1]
        head.params["W"][:] = 0.0
        beta0 = rng.normal(size=9)
        head.params["b"] = beta0
        img = _image(rng) if mode == MULTI_MODAL else None
        for cond in (COND, ProcessCondition(400.0, 3000.0, "F", "RPM")):
            np.testing.assert_array_equal(predict_coefficients(params, cond, img), beta0)


def test_modality_mismatch(rng):
    tab = EncoderParams.initialize(TABULAR, rng, normalization=NORM)
    mm = EncoderParams.initialize(MULTI_MODAL, rng, normalization=NORM)
    with pytest.raises(ModalityMismatch):
        predict_coefficients(tab, COND, _image(rng))
    with pytest.raises(ModalityMismatch):
        predict_coefficients(mm, COND)
    with pytest.raises(ModalityMismatch):
        encode_image(tab, np.zeros((32, 32)))


def test_reconstruction_is_composition(rng):
    params = EncoderParams.initialize(TABULAR, rng, normalization=NORM)
    times = np.linspace(0, 1, 73)
    beta = predict_coefficients(params, COND)
    assert predict_trajectory(params, COND, times) == reconstruct(beta, times)


def test_guard_band(rng):
    params = EncoderParams.initialize(TABULAR, rng, normalization=NORM)
    # 1.5 in normalized units is the edge; beyond it is rejected
    predict_coefficients(params, ProcessCondition(425.0, 1000.0, "F", "RPM"))
    with pytest.raises(NotNormalized):
        predict_coefficients(params, ProcessCondition(430.0, 1000.0, "F", "RPM"))


def test_bad_image_size(rng):
    params = EncoderParams.initialize(MULTI_MODAL, rng, normalization=NORM)
    with pytest.raises(BadImageSize):
        predict_coefficients(params, COND, np.zeros((16, 16, 3), np.uint8))
    with pytest.raises(BadImageSize):
        encode_image(params, np.zeros((31, 32)))


def test_prepare_image_scaling():
    img = np.full((32, 32, 3), 255, np.uint8)
    out = prepare_image(img)
    assert out.shape == (1, 32, 32) and np.all(out == 1.0)


def test_head_width_invariant():
    with pytest.raises(ValueError):
        EncoderParams(TABULAR, Sequential([Dense(2, 16)]), Sequential([Dense(16, 8)]))
    with pytest.raises(ValueError):
        EncoderParams(MULTI_MODAL, Sequential([Dense(2, 16)]), Sequential([Dense(32, 9)]))


def test_constant_readout_rollout():
    params = BaselineParams.zeros(hidden=8, scale=1.0)
    params.readout.params["b"][:] = 3.25
    np.testing.assert_array_equal(baseline_rollout(params, [0, 1, 2, 3, 4], 7), np.full(7, 3.25))


def test_rollout_edge_cases(rng):
    params = BaselineParams.initialize(rng, hidden=4)
    assert baseline_rollout(params, [1, 2, 3, 4, 5], 0).shape == (0,)
    with pytest.raises(BadWindow):
        baseline_rollout(params, [1, 2, 3, 4], 3)
    with pytest.raises(BadWindow):
        baseline_rollout_batch(params, [[1, 2, 3]], 3)


def test_batch_rollout_matches_single(rng):
    params = BaselineParams.initialize(rng, hidden=6, scale=20.0)
    seeds = rng.uniform(0, 20, size=(3, 5))
    batch = baseline_rollout_batch(params, seeds, 12)
    for s, row in zip(seeds, batch):
        np.testing.assert_allclose(baseline_rollout(params, s, 12), row, rtol=1e-12, atol=1e-12)
    assert np.all(np.isfinite(batch))


def test_encoder_checkpoint_round_trip(tmp_path, rng):
    params = EncoderParams.initialize(MULTI_MODAL, rng, normalization=NORM)
    save_checkpoint(params, tmp_path / "m.json", config={"a": 1}, seed=4)
    loaded = load_checkpoint(tmp_path / "m.json")
    img = _image(rng)
    assert np.array_equal(predict_coefficients(params, COND, img), predict_coefficients(loaded, COND, img))


def test_baseline_checkpoint_round_trip(tmp_path, rng):
    params = BaselineParams.initialize(rng, hidden=5, scale=12.5)
    save_checkpoint(params, tmp_path / "b.json")
    loaded = load_checkpoint(tmp_path / "b.json")
    seed = [0.0, 1.0, 2.0, 3.0, 4.0]
    assert np.array_equal(baseline_rollout(params, seed, 20), baseline_rollout(loaded, seed, 20))


def test_checkpoint_schema_mismatch(tmp_path, rng):
    import json

    params = EncoderParams.initialize(TABULAR, rng)
    save_checkpoint(params, tmp_path / "m.json")
    doc = json.loads((tmp_path / "m.json").read_text())
    doc["layers"][0]["shape"] = [3, 3]
    (tmp_path / "m.json").write_text(json.dumps(doc))
    with pytest.raises(SchemaMismatch):
        load_checkpoint(tmp_path / "m.json")
    doc["kind"] = "mystery"
    (tmp_path / "m.json").write_text(json.dumps(doc))
    with pytest.raises(SchemaMismatch):
        load_checkpoint(tmp_path / "m.json")
