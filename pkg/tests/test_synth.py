import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from colortraj import dataset, synth
from colortraj.errors import InvalidConfig, OutOfDomain
from colortraj.synth import (
    APPLE,
    COOKIE,
    apple_curve,
    cookie_curve,
    disc_mask,
    generate_dataset,
    generate_sample,
    generate_world,
    render_initial_image,
    trajectory_ground_truth,
)

T = np.linspace(0, 1, 1000)


def test_curve_examples():
    assert apple_curve(1.0, 12.0, 3.0) == pytest.approx(11.4024, abs=1e-3)
    assert cookie_curve(0.5, 45.0, 10.0, 0.5) == pytest.approx(22.349, abs=1e-2)


@given(
    st.sampled_from([COOKIE, APPLE]),
    st.integers(0, 5),
    st.floats(-3, 3),
)
def test_ground_truth_shape(family, ci, trait):
    grid = synth.cookie_grid() if family == COOKIE else synth.apple_grid()
    cond = grid[ci % len(grid)]
    g = trajectory_ground_truth(family, cond, trait, T)
    assert g[0] == 0.0
    assert np.all(g >= 0)
    assert np.all(np.diff(g) >= -1e-12)


def test_ground_truth_domain():
    with pytest.raises(OutOfDomain):
        trajectory_ground_truth(COOKIE, synth.cookie_grid()[0], 0.0, 1.2)


def test_dataset_counts_and_determinism():
    a = generate_dataset(synth.cookie_world(seed=5))
    b = generate_dataset(synth.cookie_world(seed=5))
    assert len(a) == 72 and a == b
    assert len(generate_dataset(synth.apple_world(seed=5))) == 84
    assert a != generate_dataset(synth.cookie_world(seed=6))


def test_sample_order_independence():
    cfg = synth.cookie_world(seed=2)
    world = generate_world(cfg)
    rec, trait, _ = generate_sample(cfg, 5, 4)
    idx = 5 * cfg.samples_per_condition + 4
    assert rec == world.records[idx] and trait == world.traits[idx]


def test_noiseless_matches_ground_truth():
    world = generate_world(synth.apple_world(seed=1, noise_sigma=0.0, hf_noise_amp=0.0))
    for r, clean in zip(world.records, world.clean):
        np.testing.assert_allclose(r.raw_trajectory.values, clean, atol=1e-12)


def test_noise_level():
    cfg = synth.cookie_world(seed=4, hf_noise_amp=0.0, noise_sigma=0.5)
    world = generate_world(cfg)
    resid = np.concatenate([r.raw_trajectory.values - c for r, c in zip(world.records, world.clean)])
    # clamping at zero only touches the first few points
    resid = resid[np.concatenate([c > 2.0 for c in world.clean])]
    assert resid.size >= 1000
    assert abs(resid.std() - 0.5) < 0.1


def test_smoothing_removes_injected_tone():
    for cfg in (synth.cookie_world(seed=8), synth.apple_world(seed=8)):
        world = generate_world(cfg)
        for r, clean in zip(dataset.preprocess(world.records), world.clean):
            raw = np.sqrt(np.mean((r.raw_trajectory.values - clean) ** 2))
            sm = np.sqrt(np.mean((r.smoothed_trajectory.values - clean) ** 2))
            assert sm < raw


def test_image_determinism():
    a = render_initial_image(0.7, seed=[1, 2, 3])
    assert np.array_equal(a, render_initial_image(0.7, seed=[1, 2, 3]))
    assert a.shape == (32, 32, 3) and a.dtype == np.uint8


def test_brightness_gap():
    hi = render_initial_image(2.0, seed=1)[..., 0][disc_mask(2.0)].mean()
    lo = render_initial_image(-2.0, seed=2)[..., 0][disc_mask(-2.0)].mean()
    assert hi - lo == pytest.approx(80.0, abs=2.0)


def test_brightness_monotone_without_noise():
    means = [render_initial_image(h, seed=0, noise_sigma=0)[..., 0][disc_mask(h)].mean() for h in (-2, -1, 0, 1, 2)]
    assert all(a < b for a, b in zip(means, means[1:]))


def test_trait_recoverable_from_image():
    world = generate_world(synth.cookie_world(seed=9))
    feats = []
    for r in world.records:
        g = r.initial_image[..., 0].astype(float)
        bright = g > 85
        feats.append([1.0, g[bright].mean(), np.sqrt(bright.sum() / np.pi)])
    x = np.array(feats)
    h = np.clip(world.traits, -2, 2)
    coef, *_ = np.linalg.lstsq(x, h, rcond=None)
    r2 = 1 - np.sum((x @ coef - h) ** 2) / np.sum((h - h.mean()) ** 2)
    assert r2 > 0.9


@pytest.mark.parametrize(
    "override",
    [
        {"samples_per_condition": 0},
        {"noise_sigma": -1.0},
        {"hf_noise_freq": 10.0},
        {"hf_noise_freq": 40.0},
        {"family": "bread"},
        {"conditions": []},
    ],
)
def test_invalid_config(override):
    cfg = synth.WorldConfig(**override)
    with pytest.raises(InvalidConfig):
        cfg.validate()


def test_config_dict_round_trip():
    cfg = synth.apple_world(seed=3, trait_sigma=0.5)
    again = synth.WorldConfig(**cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()
    assert generate_dataset(again) == generate_dataset(cfg)
