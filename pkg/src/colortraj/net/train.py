"""Full-batch training for the coefficient encoders and the LSTM baseline."""

import logging
from dataclasses import asdict, dataclass

import numpy as np

from ..basis import DEFAULT_DELTA, Trajectory, design_matrix, fit_least_squares
from ..errors import EmptyTrainingSet, InvalidConfig, TrainingDiverged, TrajectoryTooShort
from .models import (
    DEFAULT_HIDDEN,
    WINDOW,
    BaselineParams,
    EncoderParams,
    prepare_image,
)

log = logging.getLogger(__name__)

HEAD_INITS = ("mean_fit", "random")


@dataclass
class TrainConfig:
    max_epochs: int = 200
    learning_rate: float = 1e-3
    momentum: float = 0.9
    patience: int = 20
    seed: int = 0
    lstm_hidden: int = DEFAULT_HIDDEN
    head_init: str = "mean_fit"

    def validate(self):
        if int(self.max_epochs) < 1:
            raise InvalidConfig("train.max_epochs must be >= 1")
        if not self.learning_rate > 0:
            raise InvalidConfig("train.learning_rate must be > 0")
        if not 0 <= self.momentum < 1:
            raise InvalidConfig("train.momentum must lie in [0, 1)")
        if int(self.patience) < 1:
            raise InvalidConfig("train.patience must be >= 1")
        if self.head_init not in HEAD_INITS:
            raise InvalidConfig(f"train.head_init must be one of {HEAD_INITS}")
        if int(self.lstm_hidden) < 1:
            raise InvalidConfig("train.lstm_hidden must be >= 1")
        return self

    def to_dict(self):
        return asdict(self)


@dataclass
class History:
    train_loss: list
    val_loss: list
    best_epoch: int
    stopped_epoch: int

    def to_dict(self):
        return asdict(self)


class Momentum:
    """Heavy-ball gradient descent: ``v <- mu v - lr g``, ``p <- p + v``."""

    def __init__(self, model, lr, mu):
        self.model = model
        self.lr = lr
        self.mu = mu
        self.velocity = {name: np.zeros_like(layer.params[key]) for name, layer, key in model.named_params()}

    def step(self):
        for name, layer, key in self.model.named_params():
            v = self.velocity[name]
            v *= self.mu
            v -= self.lr * layer.grads[key]
            layer.params[key] = layer.params[key] + v


def holdout_split(records, seed):
    """Hold out one sample per condition (conditions with >= 2 samples)."""
    rng = np.random.default_rng(seed)
    by_cond = {}
    for idx, r in enumerate(records):
        by_cond.setdefault(r.condition, []).append(idx)
    val = set()
    for cond in sorted(by_cond):
        idxs = by_cond[cond]
        if len(idxs) >= 2:
            val.add(idxs[int(rng.integers(len(idxs)))])
    train = [r for i, r in enumerate(records) if i not in val]
    held = [r for i, r in enumerate(records) if i in val]
    return train, held


def condition_ranges(records):
    out = {}
    for name in ("temperature", "air_velocity"):
        vals = [getattr(r.condition, name) for r in records]
        lo, hi = min(vals), max(vals)
        span = hi - lo
        if span <= 0:
            # single set-point: centre it and keep a unit-scale step
            span = max(abs(lo), 1.0)
            lo = lo - 0.5 * span
        out[name] = (float(lo), float(span))
    return out


class _TargetBatch:
    """Stacked targets and design matrices for a group of samples."""

    def __init__(self, records, params, against, delta):
        self.n = len(records)
        self.x = params.normalize([r.condition for r in records]) if records else None
        self.images = None
        if records and params.multi_modal:
            missing = [r.id for r in records if r.initial_image is None]
            if missing:
                raise EmptyTrainingSet(f"multi-modal training needs images; missing for {missing[:3]}")
            self.images = np.stack([prepare_image(r.initial_image) for r in records])
        trajs = [r.target(against) for r in records]
        self.phi = [design_matrix(t.times, delta) for t in trajs]
        self.y = [np.asarray(t.values) for t in trajs]
        self.shared = bool(trajs) and all(
            t.times.shape == trajs[0].times.shape and np.array_equal(t.times, trajs[0].times)
            for t in trajs
        )
        if self.shared:
            self.phi0 = self.phi[0]
            self.Y = np.stack(self.y)

    def loss_and_grad(self, beta, l1=0.0):
        """Mean over samples of per-sample MSE; gradient w.r.t. ``beta``."""
        if self.shared:
            resid = beta @ self.phi0.T - self.Y
            t = self.Y.shape[1]
            loss = float(np.mean(np.sum(resid**2, axis=1) / t))
            grad = (2.0 / (self.n * t)) * resid @ self.phi0
        else:
            loss = 0.0
            grad = np.empty_like(beta)
            for i, (phi, y) in enumerate(zip(self.phi, self.y)):
                r = phi @ beta[i] - y
                loss += float(r @ r) / y.size
                grad[i] = (2.0 / (self.n * y.size)) * (phi.T @ r)
            loss /= self.n
        if l1 > 0:
            loss += l1 * float(np.abs(beta).sum()) / self.n
            grad = grad + (l1 / self.n) * np.sign(beta)
        return loss, grad


def _snapshot(model):
    return {name: layer.params[key].copy() for name, layer, key in model.named_params()}


def _restore(model, snap):
    for name, layer, key in model.named_params():
        layer.params[key] = snap[name].copy()


def _fit(model, train_step, val_loss, tc):
    """Shared loop: full-batch momentum steps with patience-based early stop.

    Returns the history; the model ends holding the best-validation weights
    (or the final weights when there is no validation set).
    """
    opt = Momentum(model, tc.learning_rate, tc.momentum)
    train_hist, val_hist = [], []
    best, best_epoch, best_snap, waited = np.inf, 0, None, 0
    stopped = tc.max_epochs
    for epoch in range(int(tc.max_epochs)):
        loss = train_step()
        if not np.isfinite(loss):
            raise TrainingDiverged(f"training loss became non-finite at epoch {epoch}")
        opt.step()
        train_hist.append(loss)
        vl = val_loss()
        if vl is None:
            continue
        val_hist.append(vl)
        if vl < best:
            best, best_epoch, best_snap, waited = vl, epoch, _snapshot(model), 0
        else:
            waited += 1
            if waited >= tc.patience:
                stopped = epoch + 1
                break
    if best_snap is not None:
        _restore(model, best_snap)
    else:
        best_epoch = len(train_hist) - 1
    return History(train_hist, val_hist, best_epoch, stopped)


def train_encoder(records, mode, tc=None, delta=DEFAULT_DELTA, l1=0.0, against="smoothed", ridge=0.0):
    """Fit an encoder so that ``phi(t) @ beta(x)`` matches each trajectory.

    One sample per training condition is held out for early stopping. The
    loss at each epoch is recorded before that epoch's update. ``ridge`` only
    affects the least-squares fit used to initialise the head bias.
    """
    tc = (tc or TrainConfig()).validate()
    records = list(records)
    if not records:
        raise EmptyTrainingSet("no training samples")
    rng = np.random.default_rng(tc.seed)
    fit_recs, val_recs = holdout_split(records, tc.seed)
    model = EncoderParams.initialize(mode, rng, normalization=condition_ranges(records))
    train_batch = _TargetBatch(fit_recs, model, against, delta)
    if tc.head_init == "mean_fit":
        # start the head at the least-squares fit of the mean training curve
        targets = [r.target(against) for r in fit_recs]
        if train_batch.shared:
            mean = Trajectory(targets[0].times, np.mean([t.values for t in targets], axis=0))
            beta0 = fit_least_squares(mean, ridge=ridge, delta=delta)
        else:
            beta0 = np.mean([fit_least_squares(t, ridge=ridge, delta=delta) for t in targets], axis=0)
        model.head.layers[-1].params["b"][:] = beta0
    val_batch = _TargetBatch(val_recs, model, against, delta) if val_recs else None

    def train_step():
        beta = model.forward(train_batch.x, train_batch.images)
        loss, grad = train_batch.loss_and_grad(beta, l1)
        model.backward(grad)
        return loss

    def val_loss():
        if val_batch is None:
            return None
        beta = model.forward(val_batch.x, val_batch.images)
        return val_batch.loss_and_grad(beta, l1)[0]

    history = _fit(model, train_step, val_loss, tc)
    log.info(
        "encoder %s: %d epochs, best %d, train %.4g -> %.4g",
        mode,
        len(history.train_loss),
        history.best_epoch,
        history.train_loss[0],
        history.train_loss[-1],
    )
    return model, history


def sliding_windows(values, width=WINDOW):
    v = np.asarray(values, dtype=np.float64)
    if v.size < width + 1:
        raise TrajectoryTooShort(f"need at least {width + 1} points, got {v.size}")
    win = np.lib.stride_tricks.sliding_window_view(v, width)[:-1]
    return win.copy(), v[width:].copy()


def _window_set(records, against):
    xs, ys = [], []
    for r in records:
        x, y = sliding_windows(r.target(against).values)
        xs.append(x)
        ys.append(y)
    return np.concatenate(xs), np.concatenate(ys)


def train_baseline(records, tc=None, against="smoothed"):
    """Teacher-forced one-step-ahead training of the LSTM baseline."""
    tc = (tc or TrainConfig()).validate()
    records = list(records)
    if not records:
        raise EmptyTrainingSet("no training samples")
    for r in records:
        if len(r.target(against)) < WINDOW + 1:
            raise TrajectoryTooShort(
                f"sample {r.id} has {len(r.target(against))} points; need {WINDOW + 1}"
            )
    rng = np.random.default_rng(tc.seed)
    fit_recs, val_recs = holdout_split(records, tc.seed)
    xw, yw = _window_set(fit_recs, against)
    scale = float(np.max(np.abs(yw))) or 1.0
    model = BaselineParams.initialize(rng, tc.lstm_hidden, scale)
    # start from the mean next value so training refines a sensible predictor
    model.readout.params["b"][:] = float(np.mean(yw)) / scale
    target = yw / scale
    val = _window_set(val_recs, against) if val_recs else None

    def train_step():
        out = model.forward(xw)
        resid = out - target
        model.backward(2.0 * resid / resid.size)
        return float(np.mean(resid**2))

    def val_loss():
        if val is None:
            return None
        return float(np.mean((model.forward(val[0]) - val[1] / scale) ** 2))

    history = _fit(model, train_step, val_loss, tc)
    return model, history
