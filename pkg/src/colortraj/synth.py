"""Seeded synthetic drying world.

Stands in for physical drying experiments. Each sample has a hidden scalar
trait ``h`` that shifts its trajectory and is visible only through the
rendered pre-drying image (disc size and brightness).

Two trajectory families, with ``Tn``/``Vn`` the condition values min-max
scaled over the world's grid:

* cookie-like, a late logistic rise::

      A = a0 + a_T Tn + a_h h,  k = k0 + k_v Vn,  t0 = c0 - c_h h
      g(t) = A (s(k (t - t0)) - s(-k t0)) / (1 - s(-k t0))

* apple-like, a saturating rise::

      A = a0 + a_T Tn + a_h h,  k = k0 + k_v Vn
      g(t) = A (1 - exp(-k t))

Both satisfy g(0) = 0. Every random draw is keyed on
``(seed, condition index, sample index)`` so samples can be generated in any
order with identical results.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from .basis import Trajectory
from .dataset import ProcessCondition, SampleRecord
from .errors import InvalidConfig, OutOfDomain

COOKIE = "cookie_like"
APPLE = "apple_like"
FAMILIES = (COOKIE, APPLE)

COOKIE_TEMPERATURES = (350.0, 375.0, 385.0, 400.0)
COOKIE_FAN_SPEEDS = (1000.0, 3000.0)
APPLE_TEMPERATURES = (60.0, 70.0, 80.0)
APPLE_VELOCITIES = (1.5, 2.5)

MIN_HF_FREQ = 20.0


@dataclass(frozen=True)
class CookieCoefficients:
    a0: float = 30.0
    a_T: float = 15.0
    a_h: float = 3.0
    k0: float = 8.0
    k_v: float = 4.0
    c0: float = 0.55
    c_h: float = 0.05


@dataclass(frozen=True)
class AppleCoefficients:
    a0: float = 8.0
    a_T: float = 6.0
    a_h: float = 1.5
    k0: float = 2.0
    k_v: float = 2.0


def cookie_grid():
    return [
        ProcessCondition(t, v, "F", "RPM") for t in COOKIE_TEMPERATURES for v in COOKIE_FAN_SPEEDS
    ]


def apple_grid():
    return [
        ProcessCondition(t, v, "C", "m/s") for t in APPLE_TEMPERATURES for v in APPLE_VELOCITIES
    ]


@dataclass
class WorldConfig:
    family: str = COOKIE
    conditions: list = field(default_factory=cookie_grid)
    samples_per_condition: int = 9
    trajectory_length: int = 73
    noise_sigma: float = 0.5
    hf_noise_amp: float = 0.8
    hf_noise_freq: float = 24.0
    trait_sigma: float = 1.0
    image_size: int = 32
    image_noise_sigma: float = 5.0
    seed: int = 0
    coefficients: object = None

    def __post_init__(self):
        if self.coefficients is None:
            self.coefficients = CookieCoefficients() if self.family == COOKIE else AppleCoefficients()
        elif isinstance(self.coefficients, dict):
            cls = CookieCoefficients if self.family == COOKIE else AppleCoefficients
            try:
                self.coefficients = cls(**self.coefficients)
            except TypeError as exc:
                raise InvalidConfig(f"world.coefficients: {exc}") from exc
        self.conditions = [
            c if isinstance(c, ProcessCondition) else ProcessCondition.from_dict(c)
            for c in self.conditions
        ]

    def validate(self):
        if self.family not in FAMILIES:
            raise InvalidConfig(f"world.family must be one of {FAMILIES}, got {self.family!r}")
        if not self.conditions:
            raise InvalidConfig("world.conditions must not be empty")
        if len(set(self.conditions)) != len(self.conditions):
            raise InvalidConfig("world.conditions contains duplicates")
        units = {(c.temperature_unit, c.velocity_unit) for c in self.conditions}
        if len(units) != 1:
            raise InvalidConfig(f"world.conditions mixes unit tags {sorted(units)}")
        for name in ("samples_per_condition", "trajectory_length"):
            if int(getattr(self, name)) < 1:
                raise InvalidConfig(f"world.{name} must be positive")
        if self.trajectory_length < 2:
            raise InvalidConfig("world.trajectory_length must be at least 2")
        for name in ("noise_sigma", "hf_noise_amp", "trait_sigma", "image_noise_sigma"):
            if getattr(self, name) < 0:
                raise InvalidConfig(f"world.{name} must be non-negative")
        if self.hf_noise_amp > 0:
            if self.hf_noise_freq < MIN_HF_FREQ:
                raise InvalidConfig(f"world.hf_noise_freq must be >= {MIN_HF_FREQ}")
            if self.hf_noise_freq >= (self.trajectory_length - 1) / 2:
                raise InvalidConfig(
                    "world.hf_noise_freq must stay below the grid's Nyquist rate "
                    f"({(self.trajectory_length - 1) / 2} cycles)"
                )
        if self.image_size < 8:
            raise InvalidConfig("world.image_size must be at least 8")
        return self

    def to_dict(self):
        d = asdict(self)
        d["conditions"] = [c.to_dict() for c in self.conditions]
        return d


def cookie_world(**overrides):
    kw = dict(conditions=cookie_grid(), samples_per_condition=9, trajectory_length=73)
    kw.update(overrides)
    return WorldConfig(family=COOKIE, **kw)


def apple_world(**overrides):
    # 6 conditions x 14 samples = 84, the apple sample count
    kw = dict(conditions=apple_grid(), samples_per_condition=14, trajectory_length=140)
    kw.update(overrides)
    return WorldConfig(family=APPLE, **kw)


def _logistic(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def cookie_curve(t, amplitude, rate, midpoint):
    """Logistic rise rescaled to start at exactly 0."""
    t = np.asarray(t, dtype=np.float64)
    base = _logistic(-rate * midpoint)
    return amplitude * (_logistic(rate * (t - midpoint)) - base) / (1.0 - base)


def apple_curve(t, amplitude, rate):
    t = np.asarray(t, dtype=np.float64)
    return amplitude * -np.expm1(-rate * t)


def _unit_range(values):
    lo, hi = min(values), max(values)
    return lo, (hi - lo) if hi > lo else 1.0


def normalized_condition(condition, grid):
    t_lo, t_span = _unit_range([c.temperature for c in grid])
    v_lo, v_span = _unit_range([c.air_velocity for c in grid])
    return (condition.temperature - t_lo) / t_span, (condition.air_velocity - v_lo) / v_span


def shape_parameters(family, condition, trait, grid, coefficients=None):
    """Curve parameters for one sample: ``(A, k, t0)`` or ``(A, k)``."""
    tn, vn = normalized_condition(condition, grid)
    if family == COOKIE:
        c = coefficients or CookieCoefficients()
        amp = max(c.a0 + c.a_T * tn + c.a_h * trait, 0.0)
        return amp, c.k0 + c.k_v * vn, c.c0 - c.c_h * trait
    if family == APPLE:
        c = coefficients or AppleCoefficients()
        amp = max(c.a0 + c.a_T * tn + c.a_h * trait, 0.0)
        return amp, max(c.k0 + c.k_v * vn, 0.0)
    raise InvalidConfig(f"unknown family {family!r}")


def trajectory_ground_truth(family, condition, trait, t, grid=None, coefficients=None):
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0) or np.any(t_arr > 1):
        raise OutOfDomain("ground truth is defined on t in [0, 1]")
    if grid is None:
        grid = cookie_grid() if family == COOKIE else apple_grid()
    params = shape_parameters(family, condition, trait, grid, coefficients)
    curve = cookie_curve if family == COOKIE else apple_curve
    out = curve(t_arr, *params)
    return float(out) if np.ndim(t) == 0 else out


def disc_mask(trait, size=32):
    """Boolean mask of the disc drawn for ``trait``."""
    hc = float(np.clip(trait, -2.0, 2.0))
    radius = size * (0.3 + 0.1 * hc / 2.0)
    centers = np.arange(size) + 0.5 - size / 2.0
    return centers[:, None] ** 2 + centers[None, :] ** 2 <= radius**2


def render_initial_image(trait, seed, size=32, noise_sigma=5.0, background=30.0):
    """Render a bright disc on a dark background as an RGB uint8 raster.

    Radius and brightness are both linear in ``clip(trait, -2, 2)``.
    """
    if size < 8:
        raise ValueError("image size must be at least 8")
    hc = float(np.clip(trait, -2.0, 2.0))
    img = np.full((size, size), background)
    img[disc_mask(trait, size)] = 140.0 + 40.0 * hc / 2.0
    if noise_sigma > 0:
        img = img + np.random.default_rng(seed).normal(0.0, noise_sigma, img.shape)
    gray = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return np.repeat(gray[:, :, None], 3, axis=2)


@dataclass
class World:
    """Generated records plus the hidden quantities behind them."""

    config: WorldConfig
    records: list
    traits: np.ndarray
    clean: list  # noiseless ground-truth values, aligned with records


def _sample_rng(seed, ci, si, stream):
    return np.random.default_rng([seed, ci, si, stream])


def generate_sample(config, ci, si):
    """Generate one sample; depends only on ``(config, ci, si)``."""
    cond = config.conditions[ci]
    times = np.linspace(0.0, 1.0, config.trajectory_length)
    trait = config.trait_sigma * _sample_rng(config.seed, ci, si, 0).standard_normal()
    clean = trajectory_ground_truth(
        config.family, cond, trait, times, config.conditions, config.coefficients
    )
    noise = np.zeros_like(times)
    if config.noise_sigma > 0:
        noise += _sample_rng(config.seed, ci, si, 1).normal(0.0, config.noise_sigma, times.shape)
    if config.hf_noise_amp > 0:
        noise += config.hf_noise_amp * np.sin(2.0 * np.pi * config.hf_noise_freq * times)
    raw = np.maximum(clean + noise, 0.0)
    image = render_initial_image(
        trait,
        seed=[config.seed, ci, si, 2],
        size=config.image_size,
        noise_sigma=config.image_noise_sigma,
    )
    prefix = "cookie" if config.family == COOKIE else "apple"
    record = SampleRecord(f"{prefix}-c{ci:02d}-s{si:02d}", cond, Trajectory(times, raw), image)
    return record, trait, clean


def generate_world(config):
    config.validate()
    records, traits, clean = [], [], []
    for ci in range(len(config.conditions)):
        for si in range(config.samples_per_condition):
            r, h, c = generate_sample(config, ci, si)
            records.append(r)
            traits.append(h)
            clean.append(c)
    return World(config, records, np.array(traits), clean)


def generate_dataset(config):
    return generate_world(config).records

