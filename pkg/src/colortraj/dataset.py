"""Samples, process conditions, zero-shot splits and dataset files.

Splits are made over *conditions*: every sample recorded under a condition
lands on the same side of the split.

On disk a dataset is a JSON manifest plus one CSV per trajectory::

    {"samples": [{"id": ..., "temperature": ..., "temperature_unit": ...,
                  "air_velocity": ..., "velocity_unit": ...,
                  "image_path": ... | null, "trajectory_path": ...,
                  "smoothed_path": ... | null}, ...]}

Trajectory CSVs carry the header ``time_normalized,delta_e``. Paths are
relative to the manifest's directory.
"""

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image

from . import signal
from .basis import Trajectory
from .errors import EmptySimilarSet, InvalidSelection, ParseError, SchemaMismatch

ALL_UNSEEN = "all_unseen"
SIMILARITY_INFORMED = "similarity_informed"
SPLIT_MODES = (ALL_UNSEEN, SIMILARITY_INFORMED)

TRAJECTORY_HEADER = ("time_normalized", "delta_e")
_REQUIRED_SAMPLE_KEYS = (
    "id",
    "temperature",
    "temperature_unit",
    "air_velocity",
    "velocity_unit",
    "trajectory_path",
)
_CONDITION_KEYS = ("temperature", "temperature_unit", "air_velocity", "velocity_unit")


@dataclass(frozen=True, order=True)
class ProcessCondition:
    temperature: float
    air_velocity: float
    temperature_unit: str = "F"
    velocity_unit: str = "RPM"

    def __post_init__(self):
        if not (self.temperature > 0 and self.air_velocity > 0):
            raise ValueError(f"condition values must be positive: {self}")
        object.__setattr__(self, "temperature", float(self.temperature))
        object.__setattr__(self, "air_velocity", float(self.air_velocity))

    @property
    def label(self):
        return (
            f"{_fmt(self.temperature)}{self.temperature_unit}"
            f"@{_fmt(self.air_velocity)}{self.velocity_unit}"
        )

    def as_array(self):
        return np.array([self.temperature, self.air_velocity])

    def to_dict(self):
        return {
            "temperature": self.temperature,
            "temperature_unit": self.temperature_unit,
            "air_velocity": self.air_velocity,
            "velocity_unit": self.velocity_unit,
        }

    @classmethod
    def from_dict(cls, d):
        missing = [k for k in _CONDITION_KEYS if k not in d]
        if missing:
            raise SchemaMismatch(f"condition is missing {missing}")
        return cls(
            float(d["temperature"]),
            float(d["air_velocity"]),
            str(d["temperature_unit"]),
            str(d["velocity_unit"]),
        )


def _fmt(x):
    return f"{x:g}"


@dataclass(frozen=True, eq=False)
class SampleRecord:
    id: str
    condition: ProcessCondition
    raw_trajectory: Trajectory
    initial_image: np.ndarray | None = None
    smoothed_trajectory: Trajectory | None = None

    def __post_init__(self):
        sm = self.smoothed_trajectory
        if sm is not None and not np.array_equal(sm.times, self.raw_trajectory.times):
            raise ValueError(f"sample {self.id}: smoothed and raw times differ")

    def __eq__(self, other):
        if not isinstance(other, SampleRecord):
            return NotImplemented
        same_img = (self.initial_image is None and other.initial_image is None) or (
            self.initial_image is not None
            and other.initial_image is not None
            and np.array_equal(self.initial_image, other.initial_image)
        )
        return (
            self.id == other.id
            and self.condition == other.condition
            and self.raw_trajectory == other.raw_trajectory
            and self.smoothed_trajectory == other.smoothed_trajectory
            and same_img
        )

    __hash__ = None

    def target(self, against="smoothed"):
        if against == "raw":
            return self.raw_trajectory
        if self.smoothed_trajectory is None:
            raise ValueError(f"sample {self.id} has not been preprocessed")
        return self.smoothed_trajectory


@dataclass(frozen=True)
class SplitPlan:
    train_conditions: frozenset
    eval_conditions: frozenset
    mode: str = ALL_UNSEEN

    def __post_init__(self):
        train = frozenset(self.train_conditions)
        evals = frozenset(self.eval_conditions)
        if self.mode not in SPLIT_MODES:
            raise ValueError(f"unknown split mode {self.mode!r}")
        if not train or not evals:
            raise InvalidSelection("train and eval condition sets must both be non-empty")
        overlap = train & evals
        if overlap:
            raise InvalidSelection(
                f"zero-shot violation: {sorted(c.label for c in overlap)} in both sets"
            )
        object.__setattr__(self, "train_conditions", train)
        object.__setattr__(self, "eval_conditions", evals)

    def to_dict(self):
        return {
            "mode": self.mode,
            "train": [c.to_dict() for c in sorted(self.train_conditions)],
            "eval": [c.to_dict() for c in sorted(self.eval_conditions)],
        }

    @classmethod
    def from_dict(cls, d):
        for key in ("mode", "train", "eval"):
            if key not in d:
                raise SchemaMismatch(f"split plan is missing {key!r}")
        return cls(
            frozenset(ProcessCondition.from_dict(c) for c in d["train"]),
            frozenset(ProcessCondition.from_dict(c) for c in d["eval"]),
            d["mode"],
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path):
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, path=path, line=exc.lineno) from exc
        return cls.from_dict(d)


def make_zero_shot_split(conditions, eval_selector, seed=0):
    """Split ``conditions`` into disjoint train/eval sets.

    ``eval_selector`` is either an explicit collection of conditions or a
    fraction in (0, 1); a fraction draws ``ceil(fraction * n)`` eval
    conditions uniformly with ``seed``.
    """
    pool = sorted(set(conditions))
    if isinstance(eval_selector, (int, float)) and not isinstance(eval_selector, bool):
        frac = float(eval_selector)
        if not 0.0 < frac < 1.0:
            raise InvalidSelection(f"eval fraction must lie in (0, 1), got {frac}")
        n_eval = math.ceil(frac * len(pool))
        rng = np.random.default_rng(seed)
        picked = rng.choice(len(pool), size=n_eval, replace=False)
        evals = {pool[i] for i in sorted(picked)}
    else:
        evals = set(eval_selector)
        unknown = evals - set(pool)
        if unknown:
            raise InvalidSelection(
                f"eval conditions not in dataset: {sorted(c.label for c in unknown)}"
            )
    if not evals:
        raise InvalidSelection("eval selection is empty")
    train = set(pool) - evals
    if not train:
        raise InvalidSelection("eval selection covers every condition; nothing left to train on")
    return SplitPlan(frozenset(train), frozenset(evals), ALL_UNSEEN)


def shares_parameter(a, b):
    return a.temperature == b.temperature or a.air_velocity == b.air_velocity


def similarity_select(plan):
    """Keep only training conditions sharing a set-point with an eval condition.

    A training condition survives if its temperature or its air velocity
    equals that of at least one eval condition (exact match).
    """
    kept = frozenset(
        c for c in plan.train_conditions if any(shares_parameter(c, e) for e in plan.eval_conditions)
    )
    if not kept:
        raise EmptySimilarSet(
            "no training condition shares a parameter with "
            f"{sorted(c.label for c in plan.eval_conditions)}"
        )
    return SplitPlan(kept, plan.eval_conditions, SIMILARITY_INFORMED)


def conditions_of(records):
    return sorted({r.condition for r in records})


def select(records, conditions):
    conditions = set(conditions)
    return [r for r in records if r.condition in conditions]


def preprocess(records, cutoff=signal.DEFAULT_CUTOFF):
    """Attach DCT-smoothed trajectories, always recomputed from the raw series."""
    out = []
    for r in records:
        smoothed = signal.smooth_lowpass(r.raw_trajectory.values, cutoff)
        out.append(replace(r, smoothed_trajectory=r.raw_trajectory.with_values(smoothed)))
    return out


# --- files -------------------------------------------------------------------


def _write_trajectory(path, traj):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for t, v in zip(traj.times, traj.values):
            w.writerow((f"{t:.17g}", f"{v:.17g}"))


def read_trajectory(path):
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ParseError(str(exc), path=path) from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRAJECTORY_HEADER:
            raise SchemaMismatch(
                f"{path}: expected header {','.join(TRAJECTORY_HEADER)}, got {header}"
            )
        times, values = [], []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 columns, got {len(row)}", path=path, line=line)
            for name, raw, dest in zip(TRAJECTORY_HEADER, row, (times, values)):
                try:
                    x = float(raw)
                except ValueError:
                    raise ParseError(f"not a number: {raw!r}", path=path, line=line, field=name)
                if not math.isfinite(x):
                    raise ParseError(f"non-finite value {raw!r}", path=path, line=line, field=name)
                dest.append(x)
            if len(times) > 1 and times[-1] <= times[-2]:
                raise ParseError(
                    f"time {times[-1]!r} does not increase (previous {times[-2]!r})",
                    path=path,
                    line=line,
                    field="time_normalized",
                )
    if len(times) < 2:
        raise ParseError("trajectory needs at least 2 rows", path=path)
    return Trajectory(np.array(times), np.array(values))


def save_dataset(records, path):
    """Write ``records`` as a manifest at ``path`` with sibling data folders."""
    path = Path(path)
    root = path.parent
    (root / "trajectories").mkdir(parents=True, exist_ok=True)
    entries = []
    ids = set()
    for r in records:
        if r.id in ids:
            raise ValueError(f"duplicate sample id {r.id!r}")
        ids.add(r.id)
        entry = {"id": r.id, **r.condition.to_dict(), "image_path": None}
        traj_rel = f"trajectories/{r.id}.csv"
        _write_trajectory(root / traj_rel, r.raw_trajectory)
        entry["trajectory_path"] = traj_rel
        entry["smoothed_path"] = None
        if r.smoothed_trajectory is not None:
            sm_rel = f"trajectories/{r.id}.smoothed.csv"
            _write_trajectory(root / sm_rel, r.smoothed_trajectory)
            entry["smoothed_path"] = sm_rel
        if r.initial_image is not None:
            (root / "images").mkdir(exist_ok=True)
            img_rel = f"images/{r.id}.ppm"
            Image.fromarray(np.asarray(r.initial_image, dtype=np.uint8)).save(
                root / img_rel, format="PPM"
            )
            entry["image_path"] = img_rel
        entries.append(entry)
    path.write_text(json.dumps({"samples": entries}, indent=2) + "\n")


def load_dataset(path):
    path = Path(path)
    root = path.parent
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ParseError(str(exc), path=path) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno) from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("samples"), list):
        raise SchemaMismatch(f"{path}: manifest must be an object with a 'samples' list")
    records = []
    seen = set()
    for i, entry in enumerate(doc["samples"]):
        missing = [k for k in _REQUIRED_SAMPLE_KEYS if k not in entry]
        if missing:
            raise SchemaMismatch(f"{path}: sample #{i} is missing {missing}")
        sid = str(entry["id"])
        if sid in seen:
            raise SchemaMismatch(f"{path}: duplicate sample id {sid!r}")
        seen.add(sid)
        try:
            cond = ProcessCondition.from_dict(entry)
        except (TypeError, ValueError) as exc:
            raise ParseError(str(exc), path=path, field=f"samples[{i}]") from exc
        raw = read_trajectory(root / entry["trajectory_path"])
        smoothed = None
        if entry.get("smoothed_path"):
            smoothed = read_trajectory(root / entry["smoothed_path"])
            if not np.array_equal(smoothed.times, raw.times):
                raise SchemaMismatch(f"{path}: sample {sid!r} smoothed/raw times differ")
        image = None
        if entry.get("image_path"):
            img_path = root / entry["image_path"]
            try:
                with Image.open(img_path) as im:
                    image = np.asarray(im.convert("RGB"))
            except OSError as exc:
                raise ParseError(str(exc), path=img_path) from exc
        records.append(SampleRecord(sid, cond, raw, image, smoothed))
    return records
