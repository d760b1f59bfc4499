"""Experiment orchestration: leave-one-day-out cross-validation with seeded
repetitions, the encoder/reservoir ranking sweep, feature-set comparisons,
the regression-tree baseline comparison, and result-file emission.

Every run is a pure function of (config, master_seed): per-cell seeds are
derived with a stable hash over (master_seed, fold, combination, feature
set, repetition), so any cell can be reproduced in isolation and two full
runs emit byte-identical result payloads.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from itertools import combinations as iter_pairs

import numpy as np

from . import elevator, qelm, stats
from .elevator import BuildingConfig, Dataset, TrafficProfile
from .errors import ConfigurationError, DegenerateInputError, ValidationError
from .stats import ComparisonReport, PairwiseResult, RunResults

ENCODERS = ("DHE", "RHE")
RESERVOIRS = ("CNOT", "HAAR", "ISING", "ROTATION")
ALL_COMBINATIONS = tuple(f"{e}_{r}" for e in ENCODERS for r in RESERVOIRS)

RESULTS_CSV = "results_raw.csv"
BASELINES_CSV = "baselines.csv"


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from a tuple of hashable labels."""
    text = "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_CONFIG_FIELDS = {
    "datasets", "feature_sets", "combinations", "repetitions",
    "fs10_repetitions", "encoder_depth", "reservoir_depth", "ridge_lambda",
    "master_seed", "output_dir",
}


@dataclass
class ExperimentConfig:
    datasets: list | dict
    feature_sets: list[str]
    combinations: list[str]
    repetitions: int = 30
    fs10_repetitions: int | None = None   # optional cheaper 10-qubit cells
    encoder_depth: int = 1
    reservoir_depth: int = 10
    ridge_lambda: float = 0.0
    master_seed: int = 0
    output_dir: str = "results"
    config_dir: str = "."                 # anchor for relative dataset paths

    def __post_init__(self):
        if not self.feature_sets:
            raise ConfigurationError("field 'feature_sets' must list at least one set")
        for fs in self.feature_sets:
            if fs not in elevator.FEATURE_SETS:
                raise ConfigurationError(f"field 'feature_sets' has unknown entry {fs!r}")
        if not self.combinations:
            raise ConfigurationError("field 'combinations' must list at least one pair")
        for combo in self.combinations:
            if combo not in ALL_COMBINATIONS:
                raise ConfigurationError(
                    f"field 'combinations' has unknown entry {combo!r} "
                    f"(expected one of {', '.join(ALL_COMBINATIONS)})")
        if isinstance(self.datasets, list):
            if not self.datasets:
                raise ConfigurationError("field 'datasets' must not be empty")
        elif not (isinstance(self.datasets, dict) and "generate" in self.datasets):
            raise ConfigurationError(
                "field 'datasets' must be a list of CSV paths or a {'generate': ...} spec")
        if self.repetitions < 1:
            raise ConfigurationError("field 'repetitions' must be >= 1")
        if self.fs10_repetitions is not None and self.fs10_repetitions < 1:
            raise ConfigurationError("field 'fs10_repetitions' must be >= 1")
        if self.encoder_depth < 1:
            raise ConfigurationError("field 'encoder_depth' must be >= 1")
        if self.reservoir_depth < 1:
            raise ConfigurationError("field 'reservoir_depth' must be >= 1")
        if self.ridge_lambda < 0:
            raise ConfigurationError("field 'ridge_lambda' must be >= 0")

    def repetitions_for(self, feature_set: str) -> int:
        if feature_set == "FS10" and self.fs10_repetitions is not None:
            return self.fs10_repetitions
        return self.repetitions

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise ConfigurationError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config file is not valid JSON: {exc}")
        if not isinstance(doc, dict):
            raise ConfigurationError("config file must hold a JSON object")
        unknown = set(doc) - _CONFIG_FIELDS
        if unknown:
            raise ConfigurationError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        for required in ("datasets", "feature_sets", "combinations"):
            if required not in doc:
                raise ConfigurationError(f"missing config field '{required}'")
        return cls(config_dir=os.path.dirname(os.path.abspath(path)), **doc)

    def to_dict(self) -> dict:
        return {k: getattr(self, k)
                for k in ("datasets", "feature_sets", "combinations",
                          "repetitions", "fs10_repetitions", "encoder_depth",
                          "reservoir_depth", "ridge_lambda", "master_seed",
                          "output_dir")}


# ---------------------------------------------------------------------------
# dataset loading / generation
# ---------------------------------------------------------------------------

def generate_days(spec: dict) -> list[Dataset]:
    """Synthesize one dataset per day from the traffic simulator.

    Spec keys: num_days (default 4), seed, building (BuildingConfig
    overrides), profile ('office' or a segments dict), rate_jitter,
    awt ('simulated' or 'nonlinear').
    """
    num_days = spec.get("num_days", 4)
    seed = spec.get("seed", 0)
    try:
        building = BuildingConfig(**spec.get("building", {}))
    except TypeError as exc:
        raise ConfigurationError(f"field 'datasets.generate.building': {exc}")
    profile_spec = spec.get("profile", "office")
    if profile_spec == "office":
        base = elevator.office_day_profile()
    elif isinstance(profile_spec, dict):
        base = TrafficProfile.from_dict(profile_spec)
    else:
        raise ConfigurationError("field 'datasets.generate.profile' must be "
                                 "'office' or a segments object")
    jitter = spec.get("rate_jitter", 0.15)
    awt_mode = spec.get("awt", "simulated")
    if awt_mode not in ("simulated", "nonlinear"):
        raise ConfigurationError("field 'datasets.generate.awt' must be "
                                 "'simulated' or 'nonlinear'")
    days = []
    for d in range(num_days):
        profile = elevator.vary_profile(base, derive_seed(seed, "profile", d), jitter)
        ds = elevator.simulate_day(building, profile, derive_seed(seed, "traffic", d),
                                   label=f"Day{d + 1}")
        if awt_mode == "nonlinear":
            ds = _overlay_nonlinear_awt(ds, derive_seed(seed, "awt", d))
        days.append(ds)
    return days


def _overlay_nonlinear_awt(dataset: Dataset, seed: int) -> Dataset:
    """Add a smooth saturating response of the aggregate down-call count on
    top of the simulated waiting times; feature columns stay untouched.

    The extra term rides on f12, whose per-tier components the 10-feature
    baseline view has to reassemble, so it sharpens the contrast between
    aggregate-feature models and the component-feature baseline while the
    queueing dynamics keep every feature informative.
    """
    del seed  # deterministic overlay; signature kept for per-day variants
    windows = []
    for w in dataset.windows:
        f = w.raw_features
        bump = 4.0 * np.tanh(f[11] / 12.0)
        awt = float(w.awt + bump) if not w.empty else 0.0
        windows.append(elevator.FeatureWindow(w.window_start, w.duration,
                                              w.raw_features, awt, w.empty))
    return Dataset(dataset.label, windows, dataset.feature_names)


def load_datasets(config: ExperimentConfig) -> list[Dataset]:
    """Read dataset CSVs (paths relative to the config file) or generate days."""
    if isinstance(config.datasets, dict):
        return generate_days(config.datasets["generate"])
    days = []
    for path in config.datasets:
        full = path if os.path.isabs(path) else os.path.join(config.config_dir, path)
        if not os.path.exists(full):
            raise ConfigurationError(f"field 'datasets': file not found: {path}")
        days.append(elevator.read_dataset_csv(full))
    return days


# ---------------------------------------------------------------------------
# cross-validation core
# ---------------------------------------------------------------------------

@dataclass
class _FoldCache:
    """Everything about one (held-out day, feature set) that does not depend
    on the encoder/reservoir draw."""

    fold_label: str
    feature_set: str
    num_features: int
    train_angles: np.ndarray
    train_targets: np.ndarray
    test_angles: np.ndarray
    test_targets: np.ndarray


def _prepare_fold(train_days: list[Dataset], test_day: Dataset,
                  feature_set: str) -> _FoldCache:
    train_parts = [elevator.select_features(d, feature_set).drop_empty()
                   for d in train_days]
    test = elevator.select_features(test_day, feature_set).drop_empty()
    train_features = np.vstack([p.feature_matrix() for p in train_parts])
    train_targets = np.concatenate([p.awt_values() for p in train_parts])
    norm = qelm.fit_normalization(train_features)
    return _FoldCache(
        fold_label=test_day.label,
        feature_set=feature_set,
        num_features=train_features.shape[1],
        train_angles=qelm.apply_normalization(norm, train_features),
        train_targets=train_targets,
        test_angles=qelm.apply_normalization(norm, test.feature_matrix()),
        test_targets=test.awt_values(),
    )


def _cell_mse(fold: _FoldCache, encoder_kind: str, reservoir_kind: str,
              config: ExperimentConfig, rep: int, master_seed: int) -> float:
    seed_parts = (master_seed, fold.fold_label,
                  f"{encoder_kind}_{reservoir_kind}", fold.feature_set, rep)
    encoder = qelm.EncoderSpec(encoder_kind, fold.num_features,
                               depth=config.encoder_depth,
                               seed=derive_seed(*seed_parts, "encoder"))
    reservoir = qelm.build_reservoir(qelm.ReservoirSpec(
        reservoir_kind, fold.num_features, depth=config.reservoir_depth,
        seed=derive_seed(*seed_parts, "reservoir")))
    train_obs = qelm.run_circuit_batch(encoder, reservoir, fold.train_angles)
    readout = qelm.fit_readout(train_obs, fold.train_targets, config.ridge_lambda)
    test_obs = qelm.run_circuit_batch(encoder, reservoir, fold.test_angles)
    predictions = test_obs @ readout.weights + readout.intercept
    return stats.mse(predictions, fold.test_targets)


def _setting_mse_values(fold: _FoldCache, combination: str,
                        config: ExperimentConfig) -> np.ndarray:
    encoder_kind, reservoir_kind = combination.split("_")
    reps = config.repetitions_for(fold.feature_set)
    # DHE + CNOT has no random parameters at all: one run covers every rep
    if encoder_kind == "DHE" and reservoir_kind == "CNOT":
        value = _cell_mse(fold, encoder_kind, reservoir_kind, config, 0,
                          config.master_seed)
        return np.full(reps, value)
    return np.array([_cell_mse(fold, encoder_kind, reservoir_kind, config, rep,
                               config.master_seed) for rep in range(reps)])


def cross_validate(datasets: list[Dataset], config: ExperimentConfig,
                   combination: str, feature_set: str) -> dict[str, RunResults]:
    """Leave-one-day-out: each dataset is held out once while the others
    train; returns per-fold repetition MSE values keyed by the test day."""
    if len(datasets) < 2:
        raise ConfigurationError("cross-validation needs at least 2 datasets")
    encoder_kind, reservoir_kind = combination.split("_")
    results = {}
    for i, test_day in enumerate(datasets):
        train_days = [d for j, d in enumerate(datasets) if j != i]
        fold = _prepare_fold(train_days, test_day, feature_set)
        values = _setting_mse_values(fold, combination, config)
        results[test_day.label] = RunResults(test_day.label, feature_set,
                                             encoder_kind, reservoir_kind, values)
    return results


# ---------------------------------------------------------------------------
# RQ1: combination ranking
# ---------------------------------------------------------------------------

@dataclass
class SettingRanking:
    feature_set: str
    dataset: str
    ranked: list[tuple[str, float]]   # (combination, AMSE), best first


@dataclass
class RankingTable:
    settings: list[SettingRanking]
    podium: dict[str, list[int]]      # combination -> [firsts, seconds, thirds]
    winner: str

    def to_dict(self) -> dict:
        return {
            "settings": [{"feature_set": s.feature_set, "dataset": s.dataset,
                          "ranking": [{"combination": c, "amse": a}
                                      for c, a in s.ranked]}
                         for s in self.settings],
            "podium": self.podium,
            "winner": self.winner,
        }

    def to_text(self) -> str:
        lines = ["RQ1 ranking by AMSE (best first)", ""]
        for s in self.settings:
            ranked = "  ".join(f"{i + 1}.{c}({a:.4g})"
                               for i, (c, a) in enumerate(s.ranked))
            lines.append(f"{s.feature_set:<5} {s.dataset:<8} {ranked}")
        lines.append("")
        lines.append(f"{'combination':<14} {'1st':>4} {'2nd':>4} {'3rd':>4}")
        for combo in sorted(self.podium):
            first, second, third = self.podium[combo]
            lines.append(f"{combo:<14} {first:>4} {second:>4} {third:>4}")
        lines.append("")
        lines.append(f"winner (most first places): {self.winner}")
        return "\n".join(lines)


def build_ranking(results: list[RunResults]) -> RankingTable:
    """Rank combinations by AMSE inside every (feature set, dataset) setting;
    ties break lexicographically on the combination name."""
    by_setting: dict[tuple[str, str], list[RunResults]] = {}
    for r in results:
        by_setting.setdefault((r.feature_set, r.dataset), []).append(r)
    settings = []
    podium: dict[str, list[int]] = {}
    for (fs, day), rs in by_setting.items():
        ranked = sorted(((r.combination, r.amse) for r in rs),
                        key=lambda item: (item[1], item[0]))
        settings.append(SettingRanking(fs, day, ranked))
        for place, (combo, _) in enumerate(ranked[:3]):
            podium.setdefault(combo, [0, 0, 0])[place] += 1
    for r in results:
        podium.setdefault(r.combination, [0, 0, 0])
    winner = max(podium, key=lambda c: (podium[c][0], podium[c][1],
                                        podium[c][2], c))
    # prefer lexicographic order among exact podium ties
    tied = [c for c in podium if podium[c] == podium[winner]]
    winner = sorted(tied)[0]
    return RankingTable(settings, podium, winner)


def run_rq1_sweep(config: ExperimentConfig,
                  datasets: list[Dataset] | None = None
                  ) -> tuple[RankingTable, list[RunResults]]:
    """AMSE for every (combination, feature set, fold) plus the ranking.

    A single-combination config degenerates to rank 1 everywhere."""
    if datasets is None:
        datasets = load_datasets(config)
    if len(datasets) < 2:
        raise ConfigurationError("RQ1 needs at least 2 datasets")
    results: list[RunResults] = []
    for feature_set in config.feature_sets:
        for i, test_day in enumerate(datasets):
            train_days = [d for j, d in enumerate(datasets) if j != i]
            fold = _prepare_fold(train_days, test_day, feature_set)
            for combination in config.combinations:
                enc, res = combination.split("_")
                values = _setting_mse_values(fold, combination, config)
                results.append(RunResults(test_day.label, feature_set, enc, res,
                                          values))
    return build_ranking(results), results


# ---------------------------------------------------------------------------
# RQ2: feature-set comparison for one combination
# ---------------------------------------------------------------------------

def _collect_results(config: ExperimentConfig, combination: str,
                     datasets: list[Dataset],
                     results: list[RunResults] | None) -> dict[tuple[str, str], np.ndarray]:
    """MSE samples keyed by (dataset, feature_set) for one combination,
    reusing precomputed results when they cover the request."""
    wanted = {(d.label, fs) for d in datasets for fs in config.feature_sets}
    if results is not None:
        table = {(r.dataset, r.feature_set): r.mse_values for r in results
                 if r.combination == combination}
        if wanted <= set(table):
            return {k: table[k] for k in wanted}
    table = {}
    for fs in config.feature_sets:
        for label, run in cross_validate(datasets, config, combination, fs).items():
            table[(label, fs)] = run.mse_values
    return table


def run_rq2_comparison(config: ExperimentConfig, combination: str,
                       datasets: list[Dataset] | None = None,
                       results: list[RunResults] | None = None
                       ) -> dict[str, ComparisonReport]:
    """Per dataset: Kruskal-Wallis over the feature sets, then (only when the
    omnibus fires) pairwise Mann-Whitney with Holm correction and A12."""
    if len(config.feature_sets) < 2:
        raise ConfigurationError("RQ2 needs at least 2 feature sets")
    if datasets is None:
        datasets = load_datasets(config)
    table = _collect_results(config, combination, datasets, results)
    reports = {}
    for day in datasets:
        groups = [table[(day.label, fs)] for fs in config.feature_sets]
        h, p = stats.kruskal_wallis(groups)
        report = ComparisonReport(list(config.feature_sets), h, p)
        if p < report.alpha:
            pairs = list(iter_pairs(range(len(config.feature_sets)), 2))
            raw = []
            details = []
            for i, j in pairs:
                u, p_raw = stats.mann_whitney_u(groups[i], groups[j])
                a12 = stats.vargha_delaney_a12(groups[i], groups[j])
                raw.append(p_raw)
                details.append((config.feature_sets[i], config.feature_sets[j],
                                u, p_raw, a12))
            corrected = stats.holm_bonferroni(raw)
            for (first, second, u, p_raw, a12), p_corr in zip(details, corrected):
                report.pairwise.append(PairwiseResult(
                    first, second, u, p_raw, p_corr, a12,
                    stats.a12_magnitude(a12), p_corr < report.alpha))
        reports[day.label] = report
    return reports


# ---------------------------------------------------------------------------
# RQ3: comparison against the regression-tree baseline
# ---------------------------------------------------------------------------

@dataclass
class BaselineCell:
    dataset: str
    feature_set: str
    baseline_mse: float
    wilcoxon_w: float | None
    p_value: float | None
    cohens_d: float | None
    d_magnitude: str
    runs_above_baseline: int
    n_runs: int


@dataclass
class Rq3Report:
    combination: str
    baseline: str
    cells: list[BaselineCell] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"combination": self.combination, "baseline": self.baseline,
                "cells": [vars(c) for c in self.cells]}

    def to_text(self) -> str:
        lines = [f"RQ3: {self.combination} vs {self.baseline}",
                 f"{'dataset':<8} {'fs':<5} {'baseline':>10} {'p':>10} "
                 f"{'d':>8} {'magnitude':<10} {'above':>5}"]
        for c in self.cells:
            p = "n/a" if c.p_value is None else f"{c.p_value:.3g}"
            d = "n/a" if c.cohens_d is None else f"{c.cohens_d:.3f}"
            lines.append(f"{c.dataset:<8} {c.feature_set:<5} {c.baseline_mse:>10.4g} "
                         f"{p:>10} {d:>8} {c.d_magnitude:<10} "
                         f"{c.runs_above_baseline:>3}/{c.n_runs}")
        lines.append("d < 0 means the quantum model has lower error than the baseline")
        return "\n".join(lines)


def baseline_tree_mse(datasets: list[Dataset], max_splits: int = 25) -> dict[str, float]:
    """Regression-tree baseline trained on the 10-feature set of the training
    days of each fold; one fixed MSE per held-out day."""
    if len(datasets) < 2:
        raise ConfigurationError("baseline needs at least 2 datasets")
    out = {}
    for i, test_day in enumerate(datasets):
        train_parts = [elevator.select_features(d, "FS10").drop_empty()
                       for j, d in enumerate(datasets) if j != i]
        test = elevator.select_features(test_day, "FS10").drop_empty()
        features = np.vstack([p.feature_matrix() for p in train_parts])
        targets = np.concatenate([p.awt_values() for p in train_parts])
        tree = stats.fit_regression_tree(features, targets, max_splits=max_splits)
        predictions = stats.predict_tree_batch(tree, test.feature_matrix())
        out[test_day.label] = stats.mse(predictions, test.awt_values())
    return out


def run_rq3_baseline(config: ExperimentConfig, combination: str,
                     datasets: list[Dataset] | None = None,
                     results: list[RunResults] | None = None,
                     baselines: dict[str, float] | None = None) -> Rq3Report:
    """One-sample Wilcoxon of the repetition MSEs against the fixed baseline
    MSE of each fold, with Cohen's d and the count of runs above baseline."""
    if datasets is None:
        datasets = load_datasets(config)
    if baselines is None:
        baselines = baseline_tree_mse(datasets)
    table = _collect_results(config, combination, datasets, results)
    report = Rq3Report(combination, "regression tree (25 splits, FS10)")
    for fs in config.feature_sets:
        for day in datasets:
            sample = table[(day.label, fs)]
            base = baselines[day.label]
            try:
                w, p = stats.wilcoxon_one_sample(sample, base)
            except DegenerateInputError:
                w, p = None, None
            try:
                d = stats.cohens_d_one_sample(sample, base)
                magnitude = stats.cohens_d_magnitude(d)
            except (DegenerateInputError, ValidationError):
                d, magnitude = None, "n/a"
            report.cells.append(BaselineCell(
                day.label, fs, base, w, p, d, magnitude,
                int(np.sum(sample > base)), len(sample)))
    return report


# ---------------------------------------------------------------------------
# result files
# ---------------------------------------------------------------------------

def write_results_csv(path, results: list[RunResults]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "feature_set", "encoder", "reservoir",
                         "repetition", "mse"])
        for r in results:
            for rep, value in enumerate(r.mse_values):
                writer.writerow([r.dataset, r.feature_set, r.encoder,
                                 r.reservoir, rep, repr(float(value))])


def read_results_csv(path) -> list[RunResults]:
    rows: dict[tuple[str, str, str, str], list[float]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["dataset", "feature_set", "encoder", "reservoir",
                      "repetition", "mse"]:
            raise ValidationError(f"unexpected results CSV header: {header}")
        for row in reader:
            rows.setdefault((row[0], row[1], row[2], row[3]), []).append(float(row[5]))
    return [RunResults(day, fs, enc, res, np.array(values))
            for (day, fs, enc, res), values in rows.items()]


def write_baselines_csv(path, baselines: dict[str, float]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "baseline_mse"])
        for day in baselines:
            writer.writerow([day, repr(float(baselines[day]))])


def read_baselines_csv(path) -> dict[str, float]:
    out = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            out[row[0]] = float(row[1])
    return out


def write_manifest(out_dir, command: str, config: ExperimentConfig,
                   files: list[str]) -> None:
    doc = {
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "command": command,
        "config": config.to_dict(),
        "files": sorted(files),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(doc, fh, indent=2, default=str)
