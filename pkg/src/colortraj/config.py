"""Run configuration: one JSON document, strict keys, flag overrides."""

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .basis import DEFAULT_DELTA
from .dataset import ALL_UNSEEN, SPLIT_MODES, ProcessCondition
from .errors import InvalidConfig, UsageError
from .net.train import TrainConfig
from .signal import DEFAULT_CUTOFF
from .synth import APPLE, COOKIE, FAMILIES, WorldConfig, apple_world, cookie_world

TARGETS = ("smoothed", "raw")

# held-out condition used when the config names none
DEFAULT_EVAL = {
    COOKIE: [ProcessCondition(400.0, 1000.0, "F", "RPM")],
    APPLE: [ProcessCondition(60.0, 2.5, "C", "m/s")],
}


@dataclass
class SplitConfig:
    eval: list | None = None  # explicit eval conditions
    eval_fraction: float | None = None
    mode: str = ALL_UNSEEN
    seed: int = 0

    def selector(self, family):
        if self.eval is not None:
            return [ProcessCondition.from_dict(c) if isinstance(c, dict) else c for c in self.eval]
        if self.eval_fraction is not None:
            return float(self.eval_fraction)
        return list(DEFAULT_EVAL[family])

    def validate(self):
        if self.mode not in SPLIT_MODES:
            raise InvalidConfig(f"split.mode must be one of {SPLIT_MODES}, got {self.mode!r}")
        if self.eval is not None and self.eval_fraction is not None:
            raise InvalidConfig("split.eval and split.eval_fraction are mutually exclusive")
        if self.eval is not None and not self.eval:
            raise InvalidConfig("split.eval must not be empty")
        if self.eval_fraction is not None and not 0 < self.eval_fraction < 1:
            raise InvalidConfig("split.eval_fraction must lie in (0, 1)")
        return self

    def to_dict(self):
        d = asdict(self)
        if self.eval is not None:
            d["eval"] = [c.to_dict() if isinstance(c, ProcessCondition) else c for c in self.eval]
        return d


@dataclass
class BasisConfig:
    delta: float = DEFAULT_DELTA
    ridge: float = 0.0
    l1: float = 0.0

    def validate(self):
        if not self.delta > 0:
            raise InvalidConfig("basis.delta must be > 0")
        if self.ridge < 0:
            raise InvalidConfig("basis.ridge must be >= 0")
        if self.l1 < 0:
            raise InvalidConfig("basis.l1 must be >= 0")
        return self


@dataclass
class RunConfig:
    world: WorldConfig = field(default_factory=cookie_world)
    cutoff: int = DEFAULT_CUTOFF
    split: SplitConfig = field(default_factory=SplitConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    basis: BasisConfig = field(default_factory=BasisConfig)
    target: str = "smoothed"
    output_dir: str = "runs/default"

    def validate(self):
        if isinstance(self.cutoff, bool) or not isinstance(self.cutoff, int) or self.cutoff < 1:
            raise InvalidConfig(f"cutoff must be a positive integer, got {self.cutoff!r}")
        if self.target not in TARGETS:
            raise InvalidConfig(f"target must be one of {TARGETS}, got {self.target!r}")
        self.world.validate()
        self.split.validate()
        self.train.validate()
        self.basis.validate()
        if self.split.eval is not None:
            unknown = set(self.split.selector(self.world.family)) - set(self.world.conditions)
            if unknown:
                raise InvalidConfig(
                    f"split.eval names conditions not in the world: {sorted(c.label for c in unknown)}"
                )
        return self

    def to_dict(self):
        return {
            "world": self.world.to_dict(),
            "cutoff": self.cutoff,
            "split": self.split.to_dict(),
            "train": self.train.to_dict(),
            "basis": asdict(self.basis),
            "target": self.target,
            "output_dir": str(self.output_dir),
        }

    def experiment_dict(self):
        """The config minus where it is written; hashed into reports."""
        d = self.to_dict()
        d.pop("output_dir")
        return d


def _check_keys(section, data, allowed):
    if not isinstance(data, dict):
        raise UsageError(f"config section {section or '<root>'} must be an object")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        where = f"{section}." if section else ""
        raise UsageError(f"unknown config key {where}{unknown[0]!r}")


def _names(cls):
    return [f.name for f in fields(cls)]


def _world_from_dict(d):
    _check_keys("world", d, _names(WorldConfig))
    family = d.get("family", COOKIE)
    if family not in FAMILIES:
        raise InvalidConfig(f"world.family must be one of {FAMILIES}, got {family!r}")
    rest = {k: v for k, v in d.items() if k != "family"}
    try:
        return (cookie_world if family == COOKIE else apple_world)(**rest)
    except (TypeError, ValueError, KeyError) as exc:
        raise InvalidConfig(f"world: {exc}") from exc


def _section(cls, name, d):
    _check_keys(name, d, _names(cls))
    try:
        return cls(**d)
    except TypeError as exc:
        raise InvalidConfig(f"{name}: {exc}") from exc


def config_from_dict(d):
    _check_keys("", d, _names(RunConfig))
    kw = {}
    if "world" in d:
        kw["world"] = _world_from_dict(d["world"])
    if "split" in d:
        kw["split"] = _section(SplitConfig, "split", d["split"])
    if "train" in d:
        kw["train"] = _section(TrainConfig, "train", d["train"])
    if "basis" in d:
        kw["basis"] = _section(BasisConfig, "basis", d["basis"])
    for key in ("cutoff", "target", "output_dir"):
        if key in d:
            kw[key] = d[key]
    return RunConfig(**kw)


def load_config(path):
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {p}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{p}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    return config_from_dict(doc)


def apply_overrides(cfg, seed=None, cutoff=None, mode=None, out=None):
    """Flags win over file values. ``seed`` reseeds world, split and training."""
    if seed is not None:
        cfg.world.seed = seed
        cfg.split.seed = seed
        cfg.train.seed = seed
    if cutoff is not None:
        cfg.cutoff = cutoff
    if mode is not None:
        cfg.split.mode = mode
    if out is not None:
        cfg.output_dir = str(out)
    return cfg


def save_config(cfg, path):
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
