"""Acceptance checks. Each test prints one ``ACCEPT <criterion>: PASS|FAIL`` line."""

import json
import time

import numpy as np
import pytest

from colortraj import dataset, synth
from colortraj.basis import Trajectory, fit_least_squares, reconstruct
from colortraj.cli import main
from colortraj.colorspace import srgb_to_lab
from colortraj.config import apply_overrides, config_from_dict
from colortraj.dataset import ProcessCondition, SplitPlan, make_zero_shot_split, similarity_select
from colortraj.evaluation import ABLATION_ROWS, improvement_percent
from colortraj.net import MULTI_MODAL, TABULAR, BaselineParams, EncoderParams
from colortraj.net.layers import LSTM, Conv2D, Dense
from colortraj.pipeline import ablate, orderings
from colortraj.signal import dct_forward, dct_inverse, smooth_lowpass

from gradcheck import TOL, check_params

THRESHOLDS = {
    "cookie_like": {"a": 9, "b": 8, "c_tabular": 7, "c_multi_modal": 7},
    "apple_like": {"a": 8, "b": 7, "c_tabular": 7, "c_multi_modal": 7},
}
N_SEEDS = 10
RUN_BUDGET = 180.0


@pytest.fixture
def verdict(capsys):
    def report(name, ok, detail=""):
        with capsys.disabled():
            print(f"\nACCEPT {name}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
        assert ok, f"{name}: {detail}"

    return report


def test_dct_round_trip(verdict):
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    worst_rt = worst_parseval = 0.0
    for n in range(1, 1025):
        x = rng.normal(size=n)
        X = dct_forward(x).coefficients
        worst_rt = max(worst_rt, float(np.max(np.abs(dct_inverse(X) - x))))
        worst_parseval = max(worst_parseval, abs(X @ X - x @ x) / (x @ x))
    elapsed = time.perf_counter() - t0
    ok = worst_rt < 1e-9 and worst_parseval < 1e-9 and elapsed < 30
    verdict("dct-round-trip", ok, f"(max err {worst_rt:.1e}, parseval {worst_parseval:.1e}, {elapsed:.1f}s)")


def test_basis_fit_oracle(verdict):
    rng = np.random.default_rng(1)
    grid = np.linspace(0, 1, 73)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        beta = rng.uniform(-50, 50, size=9)
        worst = max(worst, float(np.max(np.abs(fit_least_squares(reconstruct(beta, grid), 0.0) - beta))))
    const = fit_least_squares(Trajectory(grid, np.full(73, 4.2)), 0.0)
    const_err = float(np.max(np.abs(const - [4.2, 0, 0, 0, 0, 0, 0, 0, 0])))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-6 and const_err < 1e-6 and elapsed < 10
    verdict("basis-fit-oracle", ok, f"(planted {worst:.1e}, constant {const_err:.1e}, {elapsed:.1f}s)")


class _Wrap:
    def __init__(self, layer):
        self.layer = layer

    def named_params(self):
        for key in self.layer.params:
            yield key, self.layer, key


def _layer_case(kind, rng):
    if kind == "dense":
        layer, x = Dense(4, 3, rng), rng.normal(size=(5, 4))
    elif kind == "conv":
        layer, x = Conv2D(2, 3, rng=rng), rng.normal(size=(2, 2, 6, 6))
    else:
        layer, x = LSTM(2, 3, rng), rng.normal(size=(3, 4, 2))
    probe = rng.normal(size=layer.forward(x).shape)
    return check_params(_Wrap(layer), lambda: layer.forward(x), layer.backward, probe, rng, 12)


def _model_case(kind, rng):
    if kind == "baseline":
        model = BaselineParams.initialize(rng, hidden=4, scale=10.0)
        x = rng.uniform(0, 10, size=(3, 5))
        probe = rng.normal(size=3)
        return check_params(model, lambda: model.forward(x), model.backward, probe, rng, 10)
    model = EncoderParams.initialize(kind, rng)
    for _, layer, key in model.named_params():
        if key == "b":
            layer.params[key] = rng.normal(scale=0.1, size=layer.params[key].shape)
    x = rng.uniform(size=(2, 2))
    images = rng.uniform(size=(2, 1, 32, 32)) if kind == MULTI_MODAL else None
    probe = rng.normal(size=(2, 9))
    return check_params(model, lambda: model.forward(x, images), model.backward, probe, rng, 6)


def test_gradient_checks(verdict):
    t0 = time.perf_counter()
    worst = {}
    for kind in ("dense", "conv", "lstm", TABULAR, MULTI_MODAL, "baseline"):
        errs = []
        for seed in range(20):
            rng = np.random.default_rng(seed)
            case = _layer_case if kind in ("dense", "conv", "lstm") else _model_case
            errs.append(case(kind, rng))
        worst[kind] = max(errs)
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) < TOL and elapsed < 60
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    verdict("gradient-checks", ok, f"(20 instances each; {detail}; {elapsed:.1f}s)")


def test_delta_e_reference(verdict):
    cases = [((255, 255, 255), (100, 0, 0), 0.05), ((0, 0, 0), (0, 0, 0), 0.05), ((255, 0, 0), (53.24, 80.09, 67.20), 0.1)]
    errs = [float(np.max(np.abs(np.array(srgb_to_lab(rgb)) - lab))) for rgb, lab, _ in cases]
    ok = all(e < tol for e, (_, _, tol) in zip(errs, cases))
    verdict("delta-e-reference", ok, "(max abs errors " + ", ".join(f"{e:.3f}" for e in errs) + ")")


def test_similarity_exact(verdict):
    temps, fans = synth.COOKIE_TEMPERATURES, synth.COOKIE_FAN_SPEEDS
    grid = synth.cookie_grid()
    mismatches = []
    for e in grid:
        # same temperature at the other fan speed, plus the other temperatures at the same fan speed
        expected = {ProcessCondition(e.temperature, v, "F", "RPM") for v in fans if v != e.air_velocity}
        expected |= {ProcessCondition(t, e.air_velocity, "F", "RPM") for t in temps if t != e.temperature}
        got = similarity_select(make_zero_shot_split(grid, {e})).train_conditions
        if len(expected) != 4 or got != expected:
            mismatches.append(e.label)
    verdict("similarity-selection", not mismatches, f"(8 eval choices, mismatches {mismatches})")


@pytest.fixture(scope="module")
def default_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("accept")
    dirs = [root / "first", root / "second"]
    codes = [main(["run-all", "--seed", "0", "--out", str(d)]) for d in dirs]
    return codes, dirs


def test_zero_shot_discipline(default_runs, verdict):
    codes, dirs = default_runs
    problems = []
    for out in dirs:
        for name in ("split.json", "split.similarity_informed.json"):
            plan = SplitPlan.load(out / name)
            if plan.train_conditions & plan.eval_conditions:
                problems.append(f"{out.name}/{name}")
        report = json.loads((out / "report.json").read_text())
        evals = set(report["metadata"]["eval_conditions"])
        for row in report["rows"]:
            if evals & set(row["train_conditions"]):
                problems.append(f"{out.name}/{row['training_mode']}-{row['modality']}")
    ok = codes == [0, 0] and not problems
    verdict("zero-shot-discipline", ok, f"(exit codes {codes}, violations {problems})")


def test_table_structure(default_runs, verdict):
    _, (out, _) = default_runs
    rows = json.loads((out / "report.json").read_text())["rows"]
    order_ok = [(r["training_mode"], r["modality"]) for r in rows] == list(ABLATION_ROWS)
    pcts = [improvement_percent(3.5912, 2.7420), improvement_percent(3.5912, 2.1170), improvement_percent(1.7183, 1.2865)]
    pct_ok = all(abs(p - e) <= 0.01 for p, e in zip(pcts, (23.65, 41.05, 25.13)))
    verdict("table-structure", order_ok and pct_ok, "(5 rows in order; " + ", ".join(f"{p:.2f}%" for p in pcts) + ")")


def test_noise_removal(verdict):
    total = failures = 0
    for family, make in ((synth.COOKIE, synth.cookie_world), (synth.APPLE, synth.apple_world)):
        for seed in range(3):
            world = synth.generate_world(make(seed=seed))
            for r, clean in zip(world.records, world.clean):
                raw = np.sqrt(np.mean((r.raw_trajectory.values - clean) ** 2))
                sm = np.sqrt(np.mean((smooth_lowpass(r.raw_trajectory.values) - clean) ** 2))
                total += 1
                failures += not sm < raw
    verdict("noise-removal", failures == 0, f"({total - failures}/{total} samples improved)")


def test_determinism(default_runs, verdict):
    _, (a, b) = default_runs
    same = (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    verdict("determinism", same, "(run-all twice, report.json byte-identical)" if same else "(report.json differs)")


_STUDIES = {}


def _study(family):
    if family not in _STUDIES:
        wins, times = dict.fromkeys(THRESHOLDS[family], 0), []
        for seed in range(N_SEEDS):
            cfg = apply_overrides(config_from_dict({"world": {"family": family}}), seed=seed)
            t0 = time.perf_counter()
            held = orderings(ablate(cfg))
            times.append(time.perf_counter() - t0)
            for k, v in held.items():
                wins[k] += v
        _STUDIES[family] = wins, times
    return _STUDIES[family]


@pytest.mark.slow
@pytest.mark.parametrize("family", ["cookie_like", "apple_like"])
@pytest.mark.parametrize("prop", ["a", "b", "c_tabular", "c_multi_modal"])
def test_ordering(family, prop, verdict):
    wins, times = _study(family)
    need = THRESHOLDS[family][prop]
    ok = wins[prop] >= need and max(times) < RUN_BUDGET
    verdict(
        f"ordering-{prop}-{family}",
        ok,
        f"({wins[prop]}/{N_SEEDS} seeds, need {need}; slowest run {max(times):.0f}s)",
    )
