"""Final blended scorer and its interpretability outputs.

The ensemble score is the convex combination sum(w_j * p_j(x)) of member
probabilities, so its rate of change in a feature has the closed form

    d p / d x_i = sum_j w_j * b_ji * p_j * (1 - p_j)

with b_ji = 0 whenever member j does not use feature i. First-order score
deltas and ranked reason codes follow directly from that derivative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np

from .dataset import Dataset
from .ensemble import ModelPool
from .errors import ConfigError
from .logit import LogitModel
from .simplex_qp import WeightSolution


@dataclass(frozen=True)
class EnsembleModel:
    """Positive-weight members only; weights sum to one exactly."""

    members: tuple[tuple[float, LogitModel], ...]
    metadata: dict

    def __post_init__(self) -> None:
        if not self.members:
            raise ConfigError("ensemble needs at least one member")
        weights = np.array([w for w, _ in self.members], dtype=float)
        if weights.min() <= 0.0:
            raise ConfigError("ensemble weights must be strictly positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ConfigError("ensemble weights must sum to one")

    @property
    def required_features(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for _, model in self.members:
            for f in model.feature_subset:
                seen.setdefault(f, None)
        return tuple(sorted(seen))

    def predict_row(self, row: Mapping[str, float]) -> float:
        return score(self, row)

    def predict_dataset(self, d: Dataset) -> np.ndarray:
        return score_dataset(self, d)


class DeltaP(NamedTuple):
    value: float
    out_of_range: bool  # true when score + value leaves [0, 1]


class ReasonCode(NamedTuple):
    feature: str
    delta_p: float
    delta_x: float
    derivative: float


@dataclass(frozen=True)
class SensitivityReport:
    row_id: str
    score: float
    derivatives: dict[str, float]
    delta_xs: dict[str, float]
    deltas: dict[str, DeltaP]
    ranking: tuple[str, ...]  # by |delta_p| descending, ties alphabetical


def assemble(
    pool: ModelPool,
    w: WeightSolution,
    *,
    feature_stats: Mapping[str, Mapping[str, float]] | None = None,
    imputation: Mapping[str, float] | None = None,
) -> EnsembleModel:
    """Keep the support members of a weight solution, renormalized to one.

    ``w`` indexes the prediction-matrix columns, i.e. the pool's usable
    members in training order.
    """
    ok = pool.ok_indices()
    if len(ok) != w.weights.shape[0]:
        raise ConfigError(
            f"solution has {w.weights.shape[0]} weights for {len(ok)} usable members"
        )
    if not w.support:
        raise ConfigError("weight solution has empty support")
    kept = [(float(w.weights[j]), pool.members[ok[j]].model) for j in w.support]
    total = sum(weight for weight, _ in kept)
    members = tuple((weight / total, model) for weight, model in kept)
    metadata = {
        "pool_config": {
            "samples_per_period": pool.config.samples_per_period,
            "feature_fraction": pool.config.feature_fraction,
            "alpha": pool.config.alpha,
            "rng_seed": pool.config.rng_seed,
        },
        "member_periods": [pool.members[ok[j]].period for j in w.support],
        "solver": {
            "objective": w.objective,
            "kkt_residual": w.kkt_residual,
            "iterations": w.iterations,
            "support_size": len(w.support),
            "pool_size": len(pool.members),
        },
        "feature_stats": dict(feature_stats) if feature_stats else None,
        "imputation": dict(imputation) if imputation else None,
    }
    return EnsembleModel(members=members, metadata=metadata)


def score(e: EnsembleModel, row: Mapping[str, float]) -> float:
    """Convex combination of member probabilities; always in (0, 1)."""
    return float(sum(w * model.predict_row(row) for w, model in e.members))


def score_dataset(e: EnsembleModel, d: Dataset) -> np.ndarray:
    out = np.zeros(d.n_rows)
    for w, model in e.members:
        out += w * model.predict_dataset(d)
    return out


def sensitivity(e: EnsembleModel, row: Mapping[str, float], feature: str) -> float:
    """Analytic d(score)/d(feature) at the given record.

    A feature no member uses contributes nothing and returns exactly 0.
    """
    total = 0.0
    for w, model in e.members:
        beta = model.coefficients.get(feature, 0.0)
        if beta == 0.0:
            continue
        p = model.predict_row(row)
        total += w * beta * p * (1.0 - p)
    return total


def delta_p(
    e: EnsembleModel, row: Mapping[str, float], feature: str, delta_x: float
) -> DeltaP:
    """First-order estimate of the score change for a feature shift.

    Reported unclamped; the flag marks estimates that leave [0, 1], where
    the linearization is no longer trustworthy.
    """
    value = sensitivity(e, row, feature) * float(delta_x)
    shifted = score(e, row) + value
    return DeltaP(value=value, out_of_range=not 0.0 <= shifted <= 1.0)


def _default_deltas(e: EnsembleModel) -> Mapping[str, float]:
    stats = (e.metadata.get("feature_stats") or {}).get("std")
    if not stats:
        raise ConfigError(
            "no per-feature deltas supplied and the ensemble carries no "
            "training standard deviations"
        )
    return stats


def reason_codes(
    e: EnsembleModel,
    row: Mapping[str, float],
    deltas: Mapping[str, float] | None = None,
    top_n: int = 3,
) -> list[ReasonCode]:
    """Rank the ensemble's features by |first-order score change|.

    ``deltas`` defaults to one training-set standard deviation per feature.
    Ties in |delta_p| break alphabetically for determinism.
    """
    if top_n < 1:
        raise ConfigError(f"top_n must be >= 1, got {top_n}")
    fallback = None
    codes: list[ReasonCode] = []
    for feature in e.required_features:
        if deltas is not None and feature in deltas:
            dx = float(deltas[feature])
        else:
            if fallback is None:
                fallback = _default_deltas(e)
            if feature not in fallback:
                raise ConfigError(f"no delta available for feature {feature!r}")
            dx = float(fallback[feature])
        der = sensitivity(e, row, feature)
        codes.append(
            ReasonCode(feature=feature, delta_p=der * dx, delta_x=dx, derivative=der)
        )
    codes.sort(key=lambda rc: (-abs(rc.delta_p), rc.feature))
    return codes[:top_n]


def sensitivity_report(
    e: EnsembleModel,
    row_id: str,
    row: Mapping[str, float],
    deltas: Mapping[str, float] | None = None,
) -> SensitivityReport:
    """Full per-feature derivative and delta breakdown for one record."""
    ranked = reason_codes(e, row, deltas, top_n=max(1, len(e.required_features)))
    s = score(e, row)
    return SensitivityReport(
        row_id=row_id,
        score=s,
        derivatives={rc.feature: rc.derivative for rc in ranked},
        delta_xs={rc.feature: rc.delta_x for rc in ranked},
        deltas={
            rc.feature: DeltaP(rc.delta_p, not 0.0 <= s + rc.delta_p <= 1.0)
            for rc in ranked
        },
        ranking=tuple(rc.feature for rc in ranked),
    )


def reference_row(e: EnsembleModel, kind: str = "median") -> dict[str, float]:
    """A mean- or median-valued record for portfolio-level reporting."""
    if kind not in ("mean", "median"):
        raise ConfigError(f"reference row kind must be 'mean' or 'median', got {kind!r}")
    stats = (e.metadata.get("feature_stats") or {}).get(kind)
    if not stats:
        raise ConfigError(f"ensemble carries no {kind} feature statistics")
    missing = [f for f in e.required_features if f not in stats]
    if missing:
        raise ConfigError(f"feature statistics missing for {missing}")
    return {f: float(stats[f]) for f in e.required_features}
