"""Coefficient encoders and the autoregressive LSTM baseline.

Encoder layout (hidden widths fixed)::

    tabular:    [T, V] -> Dense(2, 16) -> tanh -> Dense(16, 16) -> tanh
    image:      1x32x32 -> Conv3x3(1->4) -> tanh -> avgpool2
                        -> Conv3x3(4->8) -> tanh -> avgpool2
                        -> flatten(512) -> Dense(512, 16) -> tanh
    head:       tabular features (|| image features) -> Dense(16|32, 9)

The head output is the coefficient vector, with no activation.
"""

import json

import numpy as np

from ..basis import N_BASIS, reconstruct
from ..errors import BadImageSize, BadWindow, ModalityMismatch, NotNormalized, SchemaMismatch
from .layers import (
    LSTM,
    AvgPool2,
    Conv2D,
    Dense,
    Flatten,
    Identity,
    Sequential,
    Tanh,
)

TABULAR = "tabular_only"
MULTI_MODAL = "multi_modal"
ENCODER_MODES = (TABULAR, MULTI_MODAL)

FEATURE_WIDTH = 16
IMAGE_SIZE = 32
CONV_WIDTHS = (4, 8)
GUARD_BAND = (-0.5, 1.5)
WINDOW = 5
DEFAULT_HIDDEN = 32


def _act(name):
    if name == "tanh":
        return Tanh()
    if name == "identity":
        return Identity()
    raise ValueError(f"unknown activation {name!r}")


def build_tabular(rng=None, activation="tanh"):
    return Sequential(
        [
            Dense(2, FEATURE_WIDTH, rng),
            _act(activation),
            Dense(FEATURE_WIDTH, FEATURE_WIDTH, rng),
            _act(activation),
        ]
    )


def build_image(rng=None, activation="tanh"):
    c1, c2 = CONV_WIDTHS
    flat = c2 * (IMAGE_SIZE // 4) ** 2
    return Sequential(
        [
            Conv2D(1, c1, rng=rng, input_grad=False),
            _act(activation),
            AvgPool2(),
            Conv2D(c1, c2, rng=rng),
            _act(activation),
            AvgPool2(),
            Flatten(),
            Dense(flat, FEATURE_WIDTH, rng),
            _act(activation),
        ]
    )


class EncoderParams:
    """Weights of a tabular-only or multi-modal coefficient encoder.

    ``normalization`` maps each process parameter to ``(low, span)`` taken
    from the training conditions; inputs are scaled as ``(x - low) / span``.
    """

    def __init__(self, mode, tabular, head, image=None, normalization=None, activation="tanh"):
        if mode not in ENCODER_MODES:
            raise ValueError(f"unknown encoder mode {mode!r}")
        if (image is not None) != (mode == MULTI_MODAL):
            raise ValueError("image branch must be present iff the encoder is multi-modal")
        if head.layers[-1].params["W"].shape[0] != N_BASIS:
            raise ValueError(f"head must emit {N_BASIS} coefficients")
        self.mode = mode
        self.tabular = tabular
        self.image = image
        self.head = head
        self.activation = activation
        self.normalization = normalization or {
            "temperature": (0.0, 1.0),
            "air_velocity": (0.0, 1.0),
        }

    @classmethod
    def initialize(cls, mode, rng, activation="tanh", normalization=None):
        tabular = build_tabular(rng, activation)
        image = build_image(rng, activation) if mode == MULTI_MODAL else None
        width = FEATURE_WIDTH * (2 if mode == MULTI_MODAL else 1)
        head = Sequential([Dense(width, N_BASIS, rng)])
        return cls(mode, tabular, head, image, normalization, activation)

    @classmethod
    def zeros(cls, mode, activation="tanh", normalization=None):
        return cls.initialize(mode, None, activation, normalization)

    @property
    def multi_modal(self):
        return self.mode == MULTI_MODAL

    def named_params(self):
        yield from self.tabular.named_params("tabular")
        if self.image is not None:
            yield from self.image.named_params("image")
        yield from self.head.named_params("head")

    def normalize(self, conditions):
        """Scale conditions to the training range; rejects far extrapolation."""
        t_lo, t_span = self.normalization["temperature"]
        v_lo, v_span = self.normalization["air_velocity"]
        x = np.array(
            [[(c.temperature - t_lo) / t_span, (c.air_velocity - v_lo) / v_span] for c in conditions],
            dtype=np.float64,
        )
        lo, hi = GUARD_BAND
        if np.any(x < lo) or np.any(x > hi):
            raise NotNormalized(
                f"normalized inputs {x[(x < lo) | (x > hi)].tolist()} fall outside the "
                f"guard band [{lo}, {hi}]"
            )
        return x

    def forward(self, x, images=None):
        """Batched forward pass: ``x`` is ``(B, 2)`` normalized conditions."""
        if self.multi_modal:
            if images is None:
                raise ModalityMismatch("multi-modal encoder needs initial images")
            feats = np.concatenate([self.tabular.forward(x), self.image.forward(images)], axis=1)
        else:
            if images is not None:
                raise ModalityMismatch("tabular-only encoder was given images")
            feats = self.tabular.forward(x)
        return self.head.forward(feats)

    def backward(self, dbeta):
        dfeat = self.head.backward(dbeta)
        if self.multi_modal:
            self.tabular.backward(dfeat[:, :FEATURE_WIDTH])
            self.image.backward(dfeat[:, FEATURE_WIDTH:])
        else:
            self.tabular.backward(dfeat)

    def copy(self):
        return encoder_from_dict(encoder_to_dict(self))


class BaselineParams:
    """LSTM over a 5-value window with a dense readout.

    Inputs and outputs are divided by ``scale`` inside the network, so a model
    trained on Delta E values in the tens still sees order-one activations.
    """

    def __init__(self, lstm, readout, scale=1.0):
        if readout.params["W"].shape != (1, lstm.hidden):
            raise ValueError("readout must map the hidden state to one value")
        self.lstm = lstm
        self.readout = readout
        self.scale = float(scale)

    @classmethod
    def initialize(cls, rng, hidden=DEFAULT_HIDDEN, scale=1.0):
        return cls(LSTM(1, hidden, rng), Dense(hidden, 1, rng), scale)

    @classmethod
    def zeros(cls, hidden=DEFAULT_HIDDEN, scale=1.0):
        return cls(LSTM(1, hidden, None), Dense(hidden, 1, None), scale)

    @property
    def hidden(self):
        return self.lstm.hidden

    def named_params(self):
        for key in self.lstm.params:
            yield f"lstm.{key}", self.lstm, key
        for key in self.readout.params:
            yield f"readout.{key}", self.readout, key

    def forward(self, windows):
        """``windows`` is ``(B, 5)`` in Delta E units; returns ``(B,)`` scaled output."""
        h = self.lstm.forward(windows[:, :, None] / self.scale)
        return self.readout.forward(h)[:, 0]

    def backward(self, dout):
        dh = self.readout.backward(dout[:, None])
        self.lstm.backward(dh)

    def predict_next(self, windows):
        return self.forward(np.asarray(windows, dtype=np.float64)) * self.scale

    def copy(self):
        return baseline_from_dict(baseline_to_dict(self))


# --- functional surface -------------------------------------------------------


def prepare_image(image):
    """Convert a uint8 RGB/grayscale raster into a ``(1, 32, 32)`` array in [0, 1]."""
    arr = np.asarray(image)
    if arr.ndim == 3 and arr.shape[2] == 3:
        arr = arr.astype(np.float64).mean(axis=2)
    elif arr.ndim == 3 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 2 or arr.shape != (IMAGE_SIZE, IMAGE_SIZE):
        raise BadImageSize(f"expected a {IMAGE_SIZE}x{IMAGE_SIZE} image, got shape {np.shape(image)}")
    if np.issubdtype(np.asarray(image).dtype, np.integer):
        arr = arr / 255.0
    return arr.astype(np.float64)[None]


def _check_unit_image(image):
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.shape != (IMAGE_SIZE, IMAGE_SIZE):
        raise BadImageSize(f"expected a {IMAGE_SIZE}x{IMAGE_SIZE} image, got shape {arr.shape}")
    return arr[None]


def encode_tabular(params, condition):
    return params.tabular.forward(params.normalize([condition]))[0]


def encode_image(params, image):
    """Visual features of one grayscale image already scaled to [0, 1]."""
    if params.image is None:
        raise ModalityMismatch("tabular-only encoder has no image branch")
    return params.image.forward(_check_unit_image(image)[None])[0]


def predict_coefficients(params, condition, image=None):
    if image is not None and not params.multi_modal:
        raise ModalityMismatch("tabular-only encoder was given an image")
    if image is None and params.multi_modal:
        raise ModalityMismatch("multi-modal encoder needs an initial image")
    images = None if image is None else prepare_image(image)[None]
    return params.forward(params.normalize([condition]), images)[0]


def predict_trajectory(params, condition, times, image=None, delta=0.01):
    return reconstruct(predict_coefficients(params, condition, image), times, delta)


def baseline_rollout(params, seed_window, steps):
    """Autoregressively predict ``steps`` values after ``seed_window``."""
    window = [float(v) for v in seed_window]
    if len(window) != WINDOW:
        raise BadWindow(f"seed window must hold exactly {WINDOW} values, got {len(window)}")
    if steps < 0:
        raise ValueError("steps must be non-negative")
    out = []
    for _ in range(int(steps)):
        nxt = float(params.predict_next(np.array([window]))[0])
        out.append(nxt)
        window = window[1:] + [nxt]
    return np.array(out)


def baseline_rollout_batch(params, seed_windows, steps):
    """Vectorized rollout of several windows at once; ``(B, steps)``."""
    window = np.array(seed_windows, dtype=np.float64)
    if window.ndim != 2 or window.shape[1] != WINDOW:
        raise BadWindow(f"seed windows must have shape (B, {WINDOW})")
    out = np.empty((window.shape[0], int(steps)))
    for s in range(int(steps)):
        nxt = params.predict_next(window)
        out[:, s] = nxt
        window = np.concatenate([window[:, 1:], nxt[:, None]], axis=1)
    return out


# --- checkpoints ----------------------------------------------------------------


def _layers_to_list(model):
    return [
        {
            "name": name,
            "shape": list(layer.params[key].shape),
            "data": layer.params[key].ravel().tolist(),
        }
        for name, layer, key in model.named_params()
    ]


def _load_layers(model, entries):
    by_name = {e["name"]: e for e in entries}
    expected = {name for name, _, _ in model.named_params()}
    if set(by_name) != expected:
        raise SchemaMismatch(
            f"checkpoint layers {sorted(set(by_name) ^ expected)} do not match the architecture"
        )
    for name, layer, key in model.named_params():
        e = by_name[name]
        arr = np.array(e["data"], dtype=np.float64)
        shape = tuple(e["shape"])
        if shape != layer.params[key].shape or arr.size != int(np.prod(shape)):
            raise SchemaMismatch(f"checkpoint layer {name} has shape {shape}")
        layer.params[key] = arr.reshape(shape)


def encoder_to_dict(params, config=None, seed=None):
    return {
        "kind": "encoder",
        "mode": params.mode,
        "activation": params.activation,
        "normalization": {k: list(v) for k, v in params.normalization.items()},
        "layers": _layers_to_list(params),
        "config": config,
        "seed": seed,
    }


def encoder_from_dict(d):
    if d.get("kind") != "encoder":
        raise SchemaMismatch("checkpoint is not an encoder")
    norm = {k: tuple(v) for k, v in d["normalization"].items()}
    params = EncoderParams.zeros(d["mode"], d.get("activation", "tanh"), norm)
    _load_layers(params, d["layers"])
    return params


def baseline_to_dict(params, config=None, seed=None):
    return {
        "kind": "baseline",
        "mode": "baseline",
        "hidden": params.hidden,
        "scale": params.scale,
        "layers": _layers_to_list(params),
        "config": config,
        "seed": seed,
    }


def baseline_from_dict(d):
    if d.get("kind") != "baseline":
        raise SchemaMismatch("checkpoint is not a baseline model")
    params = BaselineParams.zeros(int(d["hidden"]), float(d["scale"]))
    _load_layers(params, d["layers"])
    return params


def save_checkpoint(params, path, config=None, seed=None):
    if isinstance(params, EncoderParams):
        doc = encoder_to_dict(params, config, seed)
    else:
        doc = baseline_to_dict(params, config, seed)
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path):
    with open(path) as fh:
        d = json.load(fh)
    if d.get("kind") == "encoder":
        return encoder_from_dict(d)
    if d.get("kind") == "baseline":
        return baseline_from_dict(d)
    raise SchemaMismatch(f"{path}: unknown checkpoint kind {d.get('kind')!r}")
