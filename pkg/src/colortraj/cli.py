"""``colortraj`` command line: synthesize, preprocess, split, train, evaluate, report.

Every stage reads and writes artifacts under the output directory, so the
stages can run one at a time or all together through ``run-all``::

    <out>/config.resolved.json
    <out>/stages.log
    <out>/data/raw/manifest.json          synth
    <out>/data/smoothed/manifest.json     preprocess
    <out>/split.json                      split (all-unseen plan)
    <out>/split.similarity_informed.json  split (derived plan)
    <out>/checkpoints/<mode>-<modality>.json
    <out>/predictions/<mode>-<modality>/<sample>.csv
    <out>/eval/<mode>-<modality>.json     evaluate
    <out>/report.json, report.txt         ablate / run-all
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from . import dataset, evaluation, synth
from .config import RunConfig, apply_overrides, load_config, save_config
from .dataset import ALL_UNSEEN, SIMILARITY_INFORMED, SPLIT_MODES, SplitPlan
from .errors import ColorTrajError, InvalidSelection, UsageError
from .net.models import MULTI_MODAL, TABULAR, load_checkpoint, save_checkpoint
from .net.train import train_baseline, train_encoder

log = logging.getLogger("colortraj")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRAINING = 0, 2, 3, 4
EXIT_CODES = {"usage": EXIT_USAGE, "data": EXIT_DATA, "training": EXIT_TRAINING}
MODALITIES = {"tabular": TABULAR, "multimodal": MULTI_MODAL, "baseline": evaluation.BASELINE}
STAGES = ("synth", "preprocess", "split", "train", "evaluate", "ablate")


class StageError(Exception):
    def __init__(self, stage, error):
        super().__init__(f"stage {stage!r} failed: {type(error).__name__}: {error}")
        self.stage = stage
        self.error = error


class Run:
    """Paths and stage bookkeeping for one output directory."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise UsageError(f"cannot create output directory {self.out}: {exc.strerror}") from exc
        save_config(cfg, self.out / "config.resolved.json")

    raw_manifest = property(lambda self: self.out / "data" / "raw" / "manifest.json")
    smoothed_manifest = property(lambda self: self.out / "data" / "smoothed" / "manifest.json")

    def split_path(self, mode):
        return self.out / ("split.json" if mode == ALL_UNSEEN else f"split.{mode}.json")

    def checkpoint_path(self, key):
        return self.out / "checkpoints" / f"{key}.json"

    def stage(self, name, fn, *args):
        with open(self.out / "stages.log", "a") as fh:
            fh.write(f"start {name}\n")
        try:
            result = fn(self, *args)
        except ColorTrajError as exc:
            raise StageError(name, exc) from exc
        except OSError as exc:
            raise StageError(name, exc) from exc
        with open(self.out / "stages.log", "a") as fh:
            fh.write(f"done {name}\n")
        return result


# --- stages -------------------------------------------------------------------


def stage_synth(run):
    records = synth.generate_dataset(run.cfg.world)
    dataset.save_dataset(records, run.raw_manifest)
    log.info("synth: %d samples -> %s", len(records), run.raw_manifest)
    return records


def stage_preprocess(run):
    records = dataset.preprocess(dataset.load_dataset(run.raw_manifest), run.cfg.cutoff)
    dataset.save_dataset(records, run.smoothed_manifest)
    log.info("preprocess: cutoff %d -> %s", run.cfg.cutoff, run.smoothed_manifest)
    return records


def stage_split(run):
    records = dataset.load_dataset(run.smoothed_manifest)
    cfg = run.cfg
    plan = dataset.make_zero_shot_split(
        dataset.conditions_of(records), cfg.split.selector(cfg.world.family), cfg.split.seed
    )
    plan.save(run.split_path(ALL_UNSEEN))
    sim = dataset.similarity_select(plan)
    sim.save(run.split_path(SIMILARITY_INFORMED))
    log.info(
        "split: eval %s, train %d (similarity-informed %d)",
        [c.label for c in sorted(plan.eval_conditions)],
        len(plan.train_conditions),
        len(sim.train_conditions),
    )
    return plan


def _load_inputs(run, mode):
    records = dataset.load_dataset(run.smoothed_manifest)
    plan = SplitPlan.load(run.split_path(mode))
    return records, plan


def stage_train(run, mode, modality):
    cfg = run.cfg
    records, plan = _load_inputs(run, mode)
    train_records = dataset.select(records, plan.train_conditions)
    evaluation.audit_split(plan, train_records, dataset.select(records, plan.eval_conditions))
    if modality == evaluation.BASELINE:
        model, history = train_baseline(train_records, cfg.train, cfg.target)
    else:
        model, history = train_encoder(
            train_records, modality, cfg.train, cfg.basis.delta, cfg.basis.l1, cfg.target, cfg.basis.ridge
        )
    key = f"{mode}-{modality}"
    path = run.checkpoint_path(key)
    path.parent.mkdir(exist_ok=True)
    save_checkpoint(model, path, cfg.experiment_dict(), cfg.train.seed)
    log.info("train %s: %d epochs, best %d -> %s", key, len(history.train_loss), history.best_epoch, path)
    return model


def stage_evaluate(run, mode, modality):
    cfg = run.cfg
    records, plan = _load_inputs(run, mode)
    key = f"{mode}-{modality}"
    model = load_checkpoint(run.checkpoint_path(key))
    score = evaluation.evaluate_model(
        model, dataset.select(records, plan.eval_conditions), cfg.target, cfg.basis.delta
    )
    evaluation.write_predictions(score, run.out / "predictions" / key)
    doc = {
        "rmse": score.rmse,
        "per_condition": {c.label: v for c, v in score.per_condition.items()},
        "per_sample": dict(sorted(score.per_sample.items())),
        "aggregation": evaluation.AGGREGATION,
    }
    (run.out / "eval").mkdir(exist_ok=True)
    (run.out / "eval" / f"{key}.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    log.info("evaluate %s: rmse %.4f", key, score.rmse)
    return score


def stage_ablate(run):
    cfg = run.cfg
    records, plan = _load_inputs(run, ALL_UNSEEN)
    report = evaluation.run_ablation(
        records,
        plan,
        cfg.train,
        cfg.basis.delta,
        cfg.basis.l1,
        cfg.target,
        config=cfg.experiment_dict(),
    )
    # post-hoc audit of the serialized plans
    for mode in SPLIT_MODES:
        saved = SplitPlan.load(run.split_path(mode))
        if saved.train_conditions & saved.eval_conditions:
            raise InvalidSelection(f"serialized {mode} plan overlaps")
    for key, model in report.models.items():
        path = run.checkpoint_path(key)
        path.parent.mkdir(exist_ok=True)
        save_checkpoint(model, path, cfg.experiment_dict(), cfg.train.seed)
        evaluation.write_predictions(report.scores[key], run.out / "predictions" / key)
    report.write(run.out)
    return report


# --- argument handling ----------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="seed for world, split and training")
    common.add_argument("--cutoff", type=int, help="DCT low-pass cutoff")
    common.add_argument("--mode", choices=SPLIT_MODES, help="training-set selection")
    common.add_argument("--modality", choices=sorted(MODALITIES), help="model to train/evaluate")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="colortraj", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("synth", "generate the synthetic dataset"),
        ("preprocess", "DCT-smooth every trajectory"),
        ("split", "write the zero-shot split plans"),
        ("train", "train one model"),
        ("evaluate", "score one trained model"),
        ("ablate", "train and score the five report configurations"),
        ("run-all", "synth, preprocess, split and ablate"),
    ):
        sub.add_parser(name, parents=[common], help=text)
    return parser


def parse_args_and_config(argv=None):
    """Return ``(args, RunConfig)``; flags override file values."""
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = load_config(args.config) if args.config else RunConfig()
    apply_overrides(cfg, seed=args.seed, cutoff=args.cutoff, mode=args.mode, out=args.out)
    cfg.validate()
    return args, cfg


def _dispatch(args, run):
    mode = run.cfg.split.mode
    modality = MODALITIES[args.modality or "tabular"]
    if modality == evaluation.BASELINE and mode != ALL_UNSEEN:
        raise UsageError("the baseline is only defined for the all_unseen mode")
    cmd = args.command
    if cmd == "run-all":
        (run.out / "stages.log").write_text("")
        for name in ("synth", "preprocess", "split", "ablate"):
            run.stage(name, globals()[f"stage_{name}"])
        return
    if cmd in ("train", "evaluate"):
        run.stage(cmd, globals()[f"stage_{cmd}"], mode, modality)
        return
    run.stage(cmd, globals()[f"stage_{cmd}"])


def main(argv=None):
    try:
        args, cfg = parse_args_and_config(argv)
    except SystemExit as exc:  # argparse already printed usage
        return EXIT_USAGE if exc.code else EXIT_OK
    except ColorTrajError as exc:
        print(f"colortraj: stage 'config' failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.category, EXIT_DATA)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        run = Run(cfg)
        _dispatch(args, run)
    except UsageError as exc:
        print(f"colortraj: stage 'config' failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"colortraj: {exc}", file=sys.stderr)
        category = getattr(exc.error, "category", "data")
        return EXIT_CODES.get(category, EXIT_DATA)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
