"""Pool of subset models: per-period feature sampling and batch training.

Each pool member trains on a single period's rows using a random fraction
of the available features, then scores the pooled training rows so the
blending stage can weigh members against each other. Failed members
(single-class period, non-convergence) are flagged and skipped rather than
aborting the batch.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .errors import ConfigError, DataError
from .logit import FitOptions, LogitModel, backward_eliminate


@dataclass(frozen=True)
class PoolConfig:
    samples_per_period: int = 40
    feature_fraction: float = 0.25
    alpha: float = 0.05
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.samples_per_period < 1:
            raise ConfigError("samples_per_period must be >= 1")
        if not 0.0 < self.feature_fraction <= 1.0:
            raise ConfigError("feature_fraction must be in (0, 1]")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must be in (0, 1)")


@dataclass(frozen=True)
class PoolMember:
    period: int
    sample_index: int
    drawn_features: tuple[str, ...]
    model: LogitModel | None
    failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.model is not None and self.model.fit_info.converged


@dataclass(frozen=True)
class ModelPool:
    members: tuple[PoolMember, ...]
    config: PoolConfig

    def ok_indices(self) -> tuple[int, ...]:
        """Pool positions of usable members, in training order."""
        return tuple(i for i, m in enumerate(self.members) if m.ok)


@dataclass(frozen=True)
class PredictionMatrix:
    """Member probabilities over a common row set, plus the target labels."""

    columns: np.ndarray        # (n, k) float64, entries strictly in (0, 1)
    target: np.ndarray         # (n,) float64, 0/1
    member_indices: tuple[int, ...]  # pool position behind each column

    def __post_init__(self) -> None:
        cols = np.array(self.columns, dtype=float, copy=True)
        tgt = np.array(self.target, dtype=float, copy=True)
        if cols.ndim != 2 or tgt.shape != (cols.shape[0],):
            raise DataError("prediction matrix shape mismatch")
        if cols.size and (cols.min() <= 0.0 or cols.max() >= 1.0):
            raise DataError("prediction matrix entries must lie strictly in (0, 1)")
        cols.setflags(write=False)
        tgt.setflags(write=False)
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "target", tgt)
        object.__setattr__(self, "member_indices", tuple(self.member_indices))


def sample_feature_subsets(
    features: Sequence[str], config: PoolConfig, periods: Sequence[int]
) -> list[tuple[int, tuple[str, ...]]]:
    """Draw the per-period feature subsets for the whole pool.

    Every subset gets its own RNG stream derived from (seed, period rank,
    sample index), so results do not depend on scheduling or worker count.
    """
    features = list(features)
    if not features:
        raise ConfigError("no features to sample from")
    size = int(round(config.feature_fraction * len(features)))
    if size < 1:
        raise ConfigError(
            f"feature_fraction {config.feature_fraction} of {len(features)} "
            "features leaves an empty subset"
        )
    out: list[tuple[int, tuple[str, ...]]] = []
    for rank, period in enumerate(sorted(set(int(p) for p in periods))):
        for s in range(config.samples_per_period):
            rng = np.random.default_rng([config.rng_seed, rank, s])
            chosen = np.sort(rng.choice(len(features), size=size, replace=False))
            out.append((period, tuple(features[i] for i in chosen)))
    return out


def train_pool(
    d: Dataset,
    subsets: Sequence[tuple[int, Sequence[str]]],
    alpha: float = 0.05,
    *,
    config: PoolConfig,
    options: FitOptions = FitOptions(),
    workers: int = 1,
) -> ModelPool:
    """Train one member per subset on its own period's rows.

    Training is embarrassingly parallel over a read-only dataset; results
    are ordered by subset position, never by completion time.
    """
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    by_period = d.partition_by_period()
    present = set(by_period)
    wanted = set(int(p) for p, _ in subsets)
    if not wanted <= present:
        raise DataError(f"periods {sorted(wanted - present)} not present in the data")

    # Sample indices are assigned up front (sequentially) so the thread pool
    # cannot perturb them.
    sample_counter: dict[int, int] = {}
    prepared: list[tuple[int, int, Sequence[str]]] = []
    for period, drawn in subsets:
        period = int(period)
        idx = sample_counter.get(period, 0)
        sample_counter[period] = idx + 1
        prepared.append((period, idx, drawn))

    def run(one: tuple[int, int, Sequence[str]]) -> PoolMember:
        period, idx, drawn = one
        rows = by_period[period]
        try:
            model = backward_eliminate(rows, drawn, alpha, options)
        except DataError as exc:
            return PoolMember(period, idx, tuple(drawn), None, failure=str(exc))
        failure = None if model.fit_info.converged else "did not converge"
        return PoolMember(period, idx, tuple(drawn), model, failure=failure)

    if workers == 1:
        members = [run(one) for one in prepared]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            members = list(pool.map(run, prepared))

    result = ModelPool(members=tuple(members), config=config)
    if not result.ok_indices():
        raise DataError("every pool member failed to train")
    return result


def build_prediction_matrix(pool: ModelPool, rows: Dataset) -> PredictionMatrix:
    """Score every usable member over a common row set.

    Members score all rows, including rows outside their own training
    period; the blending weights are fit against this pooled matrix.
    """
    ok = pool.ok_indices()
    if not ok:
        raise DataError("pool has no usable members")
    cols = []
    for i in ok:
        member = pool.members[i]
        try:
            cols.append(member.model.predict_dataset(rows))
        except DataError as exc:
            raise DataError(f"pool member {i} (period {member.period}): {exc}") from None
    return PredictionMatrix(
        columns=np.column_stack(cols),
        target=rows.y.astype(float),
        member_indices=ok,
    )
