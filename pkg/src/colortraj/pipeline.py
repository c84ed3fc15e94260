"""In-memory pipeline: one config in, one ablation report out."""

from . import dataset, synth
from .dataset import ALL_UNSEEN, SIMILARITY_INFORMED
from .evaluation import BASELINE, run_ablation
from .net.models import MULTI_MODAL, TABULAR

ORDERINGS = {
    "a": ((ALL_UNSEEN, TABULAR), (ALL_UNSEEN, BASELINE)),
    "b": ((ALL_UNSEEN, MULTI_MODAL), (ALL_UNSEEN, TABULAR)),
    "c_tabular": ((SIMILARITY_INFORMED, TABULAR), (ALL_UNSEEN, TABULAR)),
    "c_multi_modal": ((SIMILARITY_INFORMED, MULTI_MODAL), (ALL_UNSEEN, MULTI_MODAL)),
}


def ablate(cfg):
    """Synthesize, smooth, split and ablate without touching disk."""
    cfg.validate()
    records = dataset.preprocess(synth.generate_dataset(cfg.world), cfg.cutoff)
    plan = dataset.make_zero_shot_split(
        dataset.conditions_of(records), cfg.split.selector(cfg.world.family), cfg.split.seed
    )
    return run_ablation(
        records, plan, cfg.train, cfg.basis.delta, cfg.basis.l1, cfg.target, config=cfg.experiment_dict()
    )


def orderings(report):
    """``{name: winner_rmse < loser_rmse}`` for each ordering property."""
    rmse = {(r.training_mode, r.modality): r.rmse for r in report.rows}
    return {name: rmse[win] < rmse[lose] for name, (win, lose) in ORDERINGS.items()}
