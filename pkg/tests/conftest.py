"""Shared fixtures, including the desk-scale blended-model experiment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest

from logitblend import (
    Dataset,
    EnsembleModel,
    ModelPool,
    PoolConfig,
    SplitSpec,
    SynthConfig,
    WeightSolution,
    assemble,
    build_gram,
    build_prediction_matrix,
    generate_synthetic,
    sample_feature_subsets,
    solve_simplex_qp,
    split,
    train_pool,
)
from logitblend.simplex_qp import GramSystem


def make_dataset(
    X: np.ndarray,
    y: np.ndarray,
    period: np.ndarray | None = None,
    names: tuple[str, ...] | None = None,
) -> Dataset:
    X = np.asarray(X, dtype=float)
    n, f = X.shape
    return Dataset(
        feature_names=names or tuple(f"x{j}" for j in range(f)),
        X=X,
        y=np.asarray(y, dtype=np.int8),
        period=np.zeros(n, dtype=np.int64) if period is None else np.asarray(period),
        record_ids=tuple(f"r{i:05d}" for i in range(n)),
        missing_mask=np.zeros((n, f), dtype=bool),
    )


@dataclass
class DeskExperiment:
    train: Dataset
    holdout: Dataset
    pool: ModelPool
    gram: GramSystem
    solution: WeightSolution
    model: EnsembleModel
    truth: dict


def _run_pipeline(ds: Dataset) -> DeskExperiment:
    train, holdout = split(ds, SplitSpec(0.7, rng_seed=17))
    cfg = PoolConfig(samples_per_period=5, feature_fraction=0.25, alpha=0.05, rng_seed=99)
    periods = sorted(int(q) for q in np.unique(train.period))
    subsets = sample_feature_subsets(train.feature_names, cfg, periods)
    pool = train_pool(train, subsets, cfg.alpha, config=cfg)
    gram = build_gram(build_prediction_matrix(pool, train))
    solution = solve_simplex_qp(gram)
    stats = {
        "mean": {f: float(np.mean(train.column(f))) for f in train.feature_names},
        "median": {f: float(np.median(train.column(f))) for f in train.feature_names},
        "std": {f: float(np.std(train.column(f))) for f in train.feature_names},
    }
    model = assemble(pool, solution, feature_stats=stats)
    return DeskExperiment(
        train=train, holdout=holdout, pool=pool, gram=gram,
        solution=solution, model=model, truth={},
    )


@pytest.fixture(scope="session")
def desk() -> DeskExperiment:
    """Fixed seed-7 experiment: 20k rows, 40 features, 4 periods, drift on."""
    ds, truth = generate_synthetic(
        SynthConfig(n_rows=20_000, n_features=40, n_periods=4, rng_seed=7, drift=0.05)
    )
    exp = _run_pipeline(ds)
    exp.truth = truth
    return exp


@pytest.fixture(scope="session")
def desk_extended() -> tuple[DeskExperiment, Dataset]:
    """Same recipe over 8 periods; the pipeline sees only periods 0-3.

    Returns the experiment plus the four later periods for drift checks.
    """
    ds, truth = generate_synthetic(
        SynthConfig(n_rows=40_000, n_features=40, n_periods=8, rng_seed=7, drift=0.05)
    )
    window = ds.subset_rows(np.flatnonzero(ds.period < 4))
    future = ds.subset_rows(np.flatnonzero(ds.period >= 4))
    exp = _run_pipeline(window)
    exp.truth = truth
    return exp, future
