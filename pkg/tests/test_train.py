import numpy as np
import pytest

from colortraj import dataset, synth
from colortraj.basis import Trajectory, fit_least_squares, reconstruct
from colortraj.dataset import ProcessCondition, SampleRecord
from colortraj.errors import EmptyTrainingSet, InvalidConfig, TrainingDiverged, TrajectoryTooShort
from colortraj.net import (
    MULTI_MODAL,
    TABULAR,
    TrainConfig,
    baseline_rollout,
    train_baseline,
    train_encoder,
)
from colortraj.net.train import holdout_split, sliding_windows

GRID = np.linspace(0, 1, 73)


def _record(sid, cond, values, times=GRID):
    traj = Trajectory(times, values)
    return SampleRecord(sid, cond, traj, None, traj)


def test_single_sample_in_basis_span(rng):
    beta_star = rng.normal(scale=3.0, size=9)
    traj = reconstruct(beta_star, GRID)
    np.testing.assert_allclose(fit_least_squares(traj, 0.0), beta_star, atol=1e-6)
    _, history = train_encoder([_record("x", ProcessCondition(350.0, 1000.0), traj.values)], TABULAR)
    assert len(history.train_loss) == 200
    assert history.train_loss[-1] < 1e-3


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_encoder_loss_decreases_cookie_world(seed):
    records = dataset.preprocess(synth.generate_dataset(synth.cookie_world(seed=seed)))
    for mode in (TABULAR, MULTI_MODAL):
        _, h = train_encoder(records, mode, TrainConfig(seed=seed))
        assert np.all(np.isfinite(h.train_loss)) and np.all(np.isfinite(h.val_loss))
        assert h.train_loss[-1] <= h.train_loss[0]


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_baseline_loss_decreases(seed):
    cfg = synth.cookie_world(seed=seed, samples_per_condition=2)
    records = dataset.preprocess(synth.generate_dataset(cfg))
    _, h = train_baseline(records, TrainConfig(seed=seed))
    assert np.all(np.isfinite(h.train_loss))
    assert h.train_loss[-1] <= h.train_loss[0]


def test_training_is_bit_identical(small_records):
    a_model, a = train_encoder(small_records, TABULAR, TrainConfig(seed=5))
    b_model, b = train_encoder(small_records, TABULAR, TrainConfig(seed=5))
    assert a.train_loss == b.train_loss and a.val_loss == b.val_loss
    for (_, la, ka), (_, lb, kb) in zip(a_model.named_params(), b_model.named_params()):
        assert np.array_equal(la.params[ka], lb.params[kb])


def test_constant_trajectory_baseline():
    c = 7.5
    records = [_record(f"c{i}", ProcessCondition(350.0 + 25 * i, 1000.0), np.full(73, c)) for i in range(2)]
    model, _ = train_baseline(records)
    np.testing.assert_allclose(baseline_rollout(model, [c] * 5, 68), c, atol=0.01)


def test_short_trajectory():
    rec = _record("s", ProcessCondition(350.0, 1000.0), np.arange(5.0), np.linspace(0, 1, 5))
    with pytest.raises(TrajectoryTooShort):
        train_baseline([rec])
    with pytest.raises(TrajectoryTooShort):
        sliding_windows(np.arange(5.0))


def test_empty_training_set():
    with pytest.raises(EmptyTrainingSet):
        train_encoder([], TABULAR)
    with pytest.raises(EmptyTrainingSet):
        train_baseline([])


def test_multi_modal_needs_images():
    rec = _record("x", ProcessCondition(350.0, 1000.0), np.linspace(0, 5, 73))
    with pytest.raises(EmptyTrainingSet):
        train_encoder([rec], MULTI_MODAL)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported(small_records):
    with pytest.raises(TrainingDiverged):
        train_encoder(small_records, TABULAR, TrainConfig(learning_rate=1e8, max_epochs=50))


def test_sliding_windows():
    x, y = sliding_windows(np.arange(8.0))
    assert x.shape == (3, 5)
    np.testing.assert_array_equal(x[0], [0, 1, 2, 3, 4])
    np.testing.assert_array_equal(y, [5, 6, 7])


def test_holdout_one_per_condition(small_records):
    train, held = holdout_split(small_records, seed=0)
    assert len(held) == 8 and len(train) == len(small_records) - 8
    assert len({r.condition for r in held}) == 8
    assert holdout_split(small_records, seed=0) == (train, held)


def test_ragged_grids_train():
    cond_a, cond_b = ProcessCondition(350.0, 1000.0), ProcessCondition(375.0, 1000.0)
    ta, tb = np.linspace(0, 1, 40), np.linspace(0, 1, 55)
    recs = [_record("a", cond_a, 10 * ta, ta), _record("b", cond_b, 12 * tb, tb)]
    _, h = train_encoder(recs, TABULAR, TrainConfig(max_epochs=20))
    assert np.all(np.isfinite(h.train_loss))


@pytest.mark.parametrize(
    "kw", [{"max_epochs": 0}, {"learning_rate": 0.0}, {"momentum": 1.0}, {"patience": 0}, {"head_init": "x"}]
)
def test_invalid_train_config(kw):
    with pytest.raises(InvalidConfig):
        TrainConfig(**kw).validate()
