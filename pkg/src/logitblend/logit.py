"""Single logistic regression: Newton/IRLS fit, Wald tests, elimination.

The fit maximizes the Bernoulli log-likelihood of ln(p/(1-p)) = b0 + b.x
by iteratively reweighted least squares with step halving, so the achieved
log-likelihood never decreases between iterations. Standard errors come
from the inverse observed information; coefficients that are not
identified (an exactly collinear or constant column) get infinite standard
errors and a Wald p-value of 1, which is what lets backward elimination
discard them first.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from ._stats import clip_probability, log_likelihood, stable_sigmoid, wald_p_value
from .dataset import Dataset
from .errors import ConfigError, DataError

# Relative slack when insisting the objective does not decrease.
_LL_SLACK = 1e-12
# Share of a coefficient direction allowed to sit in the information
# null space before its standard error is reported as infinite.
_NULL_MASS_TOL = 1e-8


@dataclass(frozen=True)
class FitOptions:
    tol: float = 1e-8          # max absolute coefficient change at convergence
    max_iter: int = 50
    coef_cap: float = 30.0     # separation guard: cap and flag beyond this
    ridge: float = 0.0         # optional fallback penalty, off by default

    def __post_init__(self) -> None:
        if self.tol <= 0 or self.max_iter < 1 or self.coef_cap <= 0 or self.ridge < 0:
            raise ConfigError("invalid fit options")


@dataclass(frozen=True)
class FitInfo:
    iterations: int
    log_likelihood: float
    converged: bool
    separated: bool
    intercept_se: float
    intercept_p: float
    std_errors: dict[str, float]
    p_values: dict[str, float]
    eliminated: tuple[str, ...] = ()
    ll_trace: tuple[float, ...] = ()


@dataclass(frozen=True)
class LogitModel:
    intercept: float
    coefficients: dict[str, float]
    feature_subset: tuple[str, ...]
    fit_info: FitInfo

    def __post_init__(self) -> None:
        if set(self.coefficients) != set(self.feature_subset):
            raise ConfigError("coefficient keys must match the feature subset")
        values = [self.intercept, *self.coefficients.values()]
        if not np.isfinite(values).all():
            raise ConfigError("non-finite coefficient in model")

    def linear_predictor(self, X: np.ndarray, feature_names: Sequence[str]) -> np.ndarray:
        """Intercept plus dot product, columns looked up by name."""
        idx = []
        names = list(feature_names)
        for f in self.feature_subset:
            try:
                idx.append(names.index(f))
            except ValueError:
                raise DataError(f"missing feature {f!r}") from None
        beta = np.array([self.coefficients[f] for f in self.feature_subset])
        if not idx:
            return np.full(X.shape[0], self.intercept)
        return self.intercept + X[:, idx] @ beta

    def predict_dataset(self, d: Dataset) -> np.ndarray:
        return clip_probability(stable_sigmoid(self.linear_predictor(d.X, d.feature_names)))

    def predict_row(self, row: Mapping[str, float]) -> float:
        eta = self.intercept
        for f in self.feature_subset:
            if f not in row:
                raise DataError(f"missing feature {f!r}")
            eta += self.coefficients[f] * float(row[f])
        return clip_probability(stable_sigmoid(eta))


def predict_proba(m: LogitModel, row: Mapping[str, float]) -> float:
    """Event probability for one record; always strictly inside (0, 1)."""
    return m.predict_row(row)


def odds_multiplier(m: LogitModel, feature: str) -> float:
    """Multiplicative change in odds for a one-unit increase of a feature."""
    if feature not in m.coefficients:
        raise ConfigError(f"feature {feature!r} is not in the model")
    return float(np.exp(m.coefficients[feature]))


def _pinv_information(H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pseudo-inverse of the (symmetric PSD) information plus null-space mass.

    Returns (H^+, mass) where mass[j] is how much of coordinate j lies in
    the null space; mass > 0 means coefficient j is not identified.
    """
    w, V = np.linalg.eigh(H)
    cutoff = max(float(w.max()), 0.0) * 1e-12
    keep = w > cutoff
    inv_w = np.where(keep, 1.0 / np.where(keep, w, 1.0), 0.0)
    pinv = (V * inv_w) @ V.T
    null_mass = (V[:, ~keep] ** 2).sum(axis=1) if (~keep).any() else np.zeros(H.shape[0])
    return pinv, null_mass


def fit(train: Dataset, features: Sequence[str], options: FitOptions = FitOptions()) -> LogitModel:
    """Maximum-likelihood logistic fit on the given feature subset.

    Raises DataError for fewer than 2 rows or a single-class label. A fit
    that hits max_iter is returned flagged non-converged; one that runs into
    separation is returned with capped coefficients and the separated flag.
    """
    features = list(features)
    if len(set(features)) != len(features):
        raise ConfigError("duplicate feature names in fit request")
    if train.n_rows < 2:
        raise DataError("need at least 2 rows to fit")
    if train.has_missing():
        raise DataError("impute missing values before fitting")
    y = train.y.astype(float)
    if y.min() == y.max():
        raise DataError("labels are single-class; cannot fit a classifier")
    cols = [train.feature_index(f) for f in features]
    X = np.column_stack([np.ones(train.n_rows), train.X[:, cols]])
    d = X.shape[1]
    ridge_mask = np.zeros(d)
    ridge_mask[1:] = options.ridge  # never penalize the intercept

    def objective(beta: np.ndarray, eta: np.ndarray) -> float:
        penalty = 0.5 * float(ridge_mask @ (beta * beta))
        return log_likelihood(eta, y) - penalty

    beta = np.zeros(d)
    eta = X @ beta
    obj = objective(beta, eta)
    trace = [obj]
    converged = False
    separated = False
    iterations = 0

    for iterations in range(1, options.max_iter + 1):
        p = stable_sigmoid(eta)
        weight = p * (1.0 - p)
        grad = X.T @ (y - p) - ridge_mask * beta
        H = (X * weight[:, None]).T @ X + np.diag(ridge_mask)
        pinv, _ = _pinv_information(H)
        step = pinv @ grad

        scale = 1.0
        cand = beta + step
        cand_obj = objective(cand, X @ cand)
        for _ in range(30):
            if cand_obj >= obj - _LL_SLACK * (1.0 + abs(obj)):
                break
            scale *= 0.5
            cand = beta + scale * step
            cand_obj = objective(cand, X @ cand)
        if cand_obj < obj - _LL_SLACK * (1.0 + abs(obj)):
            converged = True  # cannot improve at floating-point resolution
            break

        delta = np.max(np.abs(cand - beta))
        beta = cand
        eta = X @ beta
        obj = cand_obj
        trace.append(obj)

        if np.max(np.abs(beta)) > options.coef_cap:
            # Separation guard: clip, flag, stop. The clipped point may sit
            # below the ascent trace, so it is not recorded there.
            beta = np.clip(beta, -options.coef_cap, options.coef_cap)
            eta = X @ beta
            separated = True
            converged = True
            break
        if delta < options.tol:
            converged = True
            break

    p = stable_sigmoid(eta)
    weight = p * (1.0 - p)
    H = (X * weight[:, None]).T @ X + np.diag(ridge_mask)
    cov, null_mass = _pinv_information(H)
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    se[null_mass > _NULL_MASS_TOL] = np.inf
    with np.errstate(invalid="ignore"):
        z = np.where(np.isinf(se), 0.0, beta / np.where(se > 0, se, np.inf))
    pvals = np.array([wald_p_value(float(v)) for v in z])

    info = FitInfo(
        iterations=iterations,
        log_likelihood=log_likelihood(eta, y),
        converged=converged,
        separated=separated,
        intercept_se=float(se[0]),
        intercept_p=float(pvals[0]),
        std_errors={f: float(se[1 + j]) for j, f in enumerate(features)},
        p_values={f: float(pvals[1 + j]) for j, f in enumerate(features)},
        ll_trace=tuple(trace),
    )
    return LogitModel(
        intercept=float(beta[0]),
        coefficients={f: float(beta[1 + j]) for j, f in enumerate(features)},
        feature_subset=tuple(features),
        fit_info=info,
    )


def backward_eliminate(
    train: Dataset,
    features: Sequence[str],
    alpha: float = 0.05,
    options: FitOptions = FitOptions(),
    min_effect: float = 0.0,
) -> LogitModel:
    """Drop the least significant feature per refit until all clear alpha.

    One feature is removed per round (the largest Wald p-value above alpha),
    because the remaining p-values move after every removal. If min_effect
    is set, a second pass prunes features whose |coefficient| * std(column)
    falls below it even though they are significant.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {alpha}")
    remaining = list(features)
    if not remaining:
        raise ConfigError("no features supplied")
    removed: list[str] = []

    model = fit(train, remaining, options)
    while len(remaining) > 1:
        pvals = np.array([model.fit_info.p_values[f] for f in remaining])
        worst = int(np.argmax(pvals))
        if pvals[worst] <= alpha:
            break
        removed.append(remaining.pop(worst))
        model = fit(train, remaining, options)

    if min_effect > 0.0:
        while len(remaining) > 1:
            effects = np.array(
                [
                    abs(model.coefficients[f]) * float(np.std(train.column(f)))
                    for f in remaining
                ]
            )
            weakest = int(np.argmin(effects))
            if effects[weakest] >= min_effect:
                break
            removed.append(remaining.pop(weakest))
            model = fit(train, remaining, options)

    info = replace(model.fit_info, eliminated=tuple(removed))
    return LogitModel(
        intercept=model.intercept,
        coefficients=model.coefficients,
        feature_subset=model.feature_subset,
        fit_info=info,
    )
