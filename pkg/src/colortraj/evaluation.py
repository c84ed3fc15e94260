"""RMSE scoring, aggregation and the five-row ablation report.

Aggregation is hierarchical: per-sample RMSE over time, then the mean over
each condition's samples, then the mean over conditions for the headline.
"""

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import DEFAULT_DELTA, design_matrix
from .dataset import ALL_UNSEEN, SIMILARITY_INFORMED, select, similarity_select
from .errors import (
    EmptyEvalSet,
    EmptyInput,
    InvalidSelection,
    LengthMismatch,
    ModalityMismatch,
    NonPositiveReference,
)
from .net.models import (
    MULTI_MODAL,
    TABULAR,
    WINDOW,
    BaselineParams,
    EncoderParams,
    baseline_rollout_batch,
    prepare_image,
)
from .net.train import TrainConfig, train_baseline, train_encoder

log = logging.getLogger(__name__)

BASELINE = "baseline"
AGGREGATION = "per-sample RMSE over time -> mean per condition -> mean over conditions"

# (training mode, modality) in report order; row 2 is the reference
ABLATION_ROWS = (
    (ALL_UNSEEN, BASELINE),
    (ALL_UNSEEN, TABULAR),
    (SIMILARITY_INFORMED, TABULAR),
    (ALL_UNSEEN, MULTI_MODAL),
    (SIMILARITY_INFORMED, MULTI_MODAL),
)
REFERENCE_ROW = 1


def rmse(predicted, truth):
    p = np.asarray(predicted, dtype=np.float64).ravel()
    t = np.asarray(truth, dtype=np.float64).ravel()
    if p.size != t.size:
        raise LengthMismatch(f"predicted has {p.size} values, truth has {t.size}")
    if p.size == 0:
        raise EmptyInput("rmse of empty sequences")
    d = p - t
    return float(np.sqrt(np.mean(d * d)))


def improvement_percent(reference_rmse, value):
    if not reference_rmse > 0:
        raise NonPositiveReference(f"reference RMSE must be > 0, got {reference_rmse}")
    return 100.0 * (reference_rmse - value) / reference_rmse


@dataclass
class Prediction:
    """One scored trajectory; ``start`` is the first scored index."""

    sample_id: str
    condition: object
    times: np.ndarray
    truth: np.ndarray
    predicted: np.ndarray
    start: int = 0

    @property
    def rmse(self):
        return rmse(self.predicted[self.start :], self.truth[self.start :])


@dataclass
class ModelScore:
    per_sample: dict
    per_condition: dict
    rmse: float
    predictions: list = field(default_factory=list, repr=False)


def _encoder_predictions(model, records, against, delta):
    if model.multi_modal:
        missing = [r.id for r in records if r.initial_image is None]
        if missing:
            raise ModalityMismatch(f"multi-modal model needs images; missing for {missing[:3]}")
        images = np.stack([prepare_image(r.initial_image) for r in records])
    else:
        images = None
    betas = model.forward(model.normalize([r.condition for r in records]), images)
    out = []
    for r, beta in zip(records, betas):
        y = r.target(against)
        out.append(
            Prediction(r.id, r.condition, y.times, np.asarray(y.values), design_matrix(y.times, delta) @ beta)
        )
    return out


def _baseline_predictions(model, records, against):
    by_len = {}
    for i, r in enumerate(records):
        by_len.setdefault(len(r.target(against)), []).append(i)
    out = [None] * len(records)
    for n, idxs in by_len.items():
        if n <= WINDOW:
            raise EmptyInput(f"trajectories of length {n} leave nothing to roll out")
        seeds = [np.asarray(records[i].target(against).values)[:WINDOW] for i in idxs]
        rolled = baseline_rollout_batch(model, seeds, n - WINDOW)
        for i, tail in zip(idxs, rolled):
            r = records[i]
            y = r.target(against)
            vals = np.asarray(y.values)
            pred = np.concatenate([vals[:WINDOW], tail])
            out[i] = Prediction(r.id, r.condition, y.times, vals, pred, WINDOW)
    return out


def _callable_predictions(model, records, against, delta):
    out = []
    for r in records:
        y = r.target(against)
        beta = np.asarray(model(r), dtype=np.float64)
        out.append(Prediction(r.id, r.condition, y.times, np.asarray(y.values), design_matrix(y.times, delta) @ beta))
    return out


def evaluate_model(model, records, against="smoothed", delta=DEFAULT_DELTA):
    """Score ``model`` on ``records``.

    ``model`` is an encoder, the LSTM baseline, or any callable mapping a
    sample record to a coefficient vector. Baselines are seeded with the first
    five target values and scored on the rolled-out steps only.
    """
    records = list(records)
    if not records:
        raise EmptyEvalSet("no evaluation samples")
    if isinstance(model, EncoderParams):
        preds = _encoder_predictions(model, records, against, delta)
    elif isinstance(model, BaselineParams):
        preds = _baseline_predictions(model, records, against)
    elif callable(model):
        preds = _callable_predictions(model, records, against, delta)
    else:
        raise TypeError(f"cannot evaluate a {type(model).__name__}")
    per_sample = {p.sample_id: p.rmse for p in preds}
    grouped = {}
    for p in preds:
        grouped.setdefault(p.condition, []).append(per_sample[p.sample_id])
    per_condition = {c: float(np.mean(v)) for c, v in sorted(grouped.items())}
    headline = float(np.mean(list(per_condition.values())))
    return ModelScore(per_sample, per_condition, headline, preds)


@dataclass
class EvalRow:
    training_mode: str
    modality: str
    rmse: float
    improvement_vs_reference: float | None = None
    per_condition: dict = field(default_factory=dict)
    train_conditions: list = field(default_factory=list)

    @property
    def key(self):
        return f"{self.training_mode}-{self.modality}"

    def to_dict(self):
        return {
            "training_mode": self.training_mode,
            "modality": self.modality,
            "rmse": self.rmse,
            "improvement_vs_reference": self.improvement_vs_reference,
            "per_condition": {c.label: v for c, v in sorted(self.per_condition.items())},
            "train_conditions": [c.label for c in sorted(self.train_conditions)],
        }


@dataclass
class EvalReport:
    rows: list
    metadata: dict
    scores: dict = field(default_factory=dict, repr=False, compare=False)
    models: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def per_condition(self):
        return {row.key: row.per_condition for row in self.rows}

    def to_dict(self):
        return {"rows": [r.to_dict() for r in self.rows], "metadata": self.metadata}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def format_table(self):
        header = ("#", "Training mode", "Modality", "RMSE", "Improvement vs row 2")
        body = []
        for i, r in enumerate(self.rows, 1):
            imp = "-" if r.improvement_vs_reference is None else f"{r.improvement_vs_reference:.2f}%"
            body.append((str(i), r.training_mode, r.modality, f"{r.rmse:.4f}", imp))
        widths = [max(len(row[j]) for row in [header, *body]) for j in range(len(header))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in [header, *body]]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json())
        (out / "report.txt").write_text(self.format_table())


def write_predictions(score, directory):
    """One CSV per trajectory with ``time,truth,prediction,scored`` columns."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for p in score.predictions:
        with open(d / f"{p.sample_id}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "truth", "prediction", "scored"])
            for i, (t, y, yh) in enumerate(zip(p.times, p.truth, p.predicted)):
                w.writerow([format(t, ".17g"), format(y, ".17g"), format(yh, ".17g"), int(i >= p.start)])


def audit_split(plan, train_records, eval_records):
    """Check the zero-shot contract on the records actually used."""
    train_conds = {r.condition for r in train_records}
    eval_conds = {r.condition for r in eval_records}
    leaked = (train_conds & eval_conds) | (train_conds & set(plan.eval_conditions))
    if leaked:
        raise InvalidSelection(f"zero-shot violation: {sorted(c.label for c in leaked)}")
    if not train_conds <= set(plan.train_conditions):
        raise InvalidSelection("training records fall outside the plan's train conditions")


def config_hash(doc):
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def run_ablation(records, plan, tc=None, delta=DEFAULT_DELTA, l1=0.0, against="smoothed", config=None):
    """Train and score the five report configurations with a shared seed.

    ``plan`` must be the all-unseen split; the similarity-informed plan is
    derived from it. ``config`` (any JSON-able document) is hashed into the
    report metadata; by default the training settings are hashed.
    """
    tc = (tc or TrainConfig()).validate()
    records = list(records)
    if plan.mode != ALL_UNSEEN:
        raise InvalidSelection("run_ablation expects the all-unseen plan")
    plans = {ALL_UNSEEN: plan, SIMILARITY_INFORMED: similarity_select(plan)}
    eval_records = select(records, plan.eval_conditions)
    if not eval_records:
        raise EmptyEvalSet("no samples under the eval conditions")
    rows, scores, models = [], {}, {}
    for mode, modality in ABLATION_ROWS:
        p = plans[mode]
        train_records = select(records, p.train_conditions)
        audit_split(p, train_records, eval_records)
        if modality == BASELINE:
            model, _ = train_baseline(train_records, tc, against)
        else:
            model, _ = train_encoder(train_records, modality, tc, delta, l1, against)
        score = evaluate_model(model, eval_records, against, delta)
        row = EvalRow(mode, modality, score.rmse, None, score.per_condition, sorted(p.train_conditions))
        log.info("%s: rmse %.4f", row.key, row.rmse)
        rows.append(row)
        scores[row.key] = score
        models[row.key] = model
    ref = rows[REFERENCE_ROW].rmse
    for row in rows[REFERENCE_ROW + 1 :]:
        row.improvement_vs_reference = improvement_percent(ref, row.rmse)
    if config is None:
        config = {"train": tc.to_dict(), "delta": delta, "l1": l1, "against": against}
    metadata = {
        "seeds": {"train": tc.seed},
        "config_hash": config_hash(config),
        "aggregation": AGGREGATION,
        "target": against,
        "reference_row": REFERENCE_ROW + 1,
        "baseline_scoring": f"rolled-out steps only; first {WINDOW} target values seed the window",
        "eval_conditions": [c.label for c in sorted(plan.eval_conditions)],
        "n_eval_samples": len(eval_records),
    }
    if isinstance(config, dict) and "world" in config and isinstance(config["world"], dict):
        metadata["seeds"]["world"] = config["world"].get("seed")
    if isinstance(config, dict) and isinstance(config.get("split"), dict):
        metadata["seeds"]["split"] = config["split"].get("seed")
    return EvalReport(rows, metadata, scores, models)
