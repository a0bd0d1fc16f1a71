"""Least-squares blending weights on the probability simplex.

Minimizes ||y - P @ w||^2 subject to w >= 0 and sum(w) = 1. The quadratic
is expanded once into its Gram form

    f(w) = w' G w - 2 c' w + y'y,    G = P'P,  c = P'y,

so each solver iteration costs O(k^2) instead of O(k n). The solver is
projected gradient descent with the exact sort-based Euclidean projection
onto the simplex, and optimality is certified through the KKT conditions:
the gradient must be constant across the support and no smaller on the
zero-weight coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import PredictionMatrix
from .errors import ConfigError, DataError, NumericalError


@dataclass(frozen=True)
class GramSystem:
    """Precomputed quadratic-objective coefficients for the weight QP."""

    G: np.ndarray       # (k, k), symmetric PSD
    c: np.ndarray       # (k,)
    y_norm_sq: float

    def __post_init__(self) -> None:
        G = np.array(self.G, dtype=float, copy=True)
        c = np.array(self.c, dtype=float, copy=True)
        if G.ndim != 2 or G.shape[0] != G.shape[1] or c.shape != (G.shape[0],):
            raise ConfigError("Gram system shape mismatch")
        if not np.array_equal(G, G.T):
            raise ConfigError("Gram matrix must be exactly symmetric")
        G.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "c", c)

    @property
    def k(self) -> int:
        return self.G.shape[0]

    def objective(self, weights: np.ndarray) -> float:
        w = np.asarray(weights, dtype=float)
        return float(w @ (self.G @ w) - 2.0 * (self.c @ w) + self.y_norm_sq)

    def gradient(self, weights: np.ndarray) -> np.ndarray:
        w = np.asarray(weights, dtype=float)
        return 2.0 * (self.G @ w) - 2.0 * self.c


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-10           # KKT residual at termination
    max_iter: int = 200_000
    sparsity_tol: float = 1e-8   # weights below this are zeroed, then renormalized
    record_trace: bool = False

    def __post_init__(self) -> None:
        if self.tol <= 0 or self.max_iter < 1 or self.sparsity_tol < 0:
            raise ConfigError("invalid solver options")


@dataclass(frozen=True)
class WeightSolution:
    weights: np.ndarray
    objective: float
    support: tuple[int, ...]
    kkt_residual: float
    iterations: int
    objective_trace: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=float, copy=True)
        if w.min() < 0.0 or abs(w.sum() - 1.0) > 1e-12:
            raise NumericalError("weights must be nonnegative and sum to one")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "support", tuple(int(i) for i in self.support))


@dataclass(frozen=True)
class KktReport:
    passed: bool
    residual: float
    common_gradient: float


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Exact Euclidean projection onto {x : x >= 0, sum(x) = 1}.

    Sort-based: find the largest prefix of the descending sort whose
    running mean (shifted to sum to 1) stays below its last element, then
    clip. Coordinates outside the support come back as exact zeros.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ConfigError("projection expects a nonempty vector")
    u = np.sort(v)[::-1]
    shifted = np.cumsum(u) - 1.0
    counts = np.arange(1, v.size + 1)
    rho = int(np.nonzero(u * counts > shifted)[0][-1])
    theta = shifted[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def build_gram(pm: PredictionMatrix) -> GramSystem:
    """One-pass Gram expansion of the stacked least-squares objective."""
    if pm.columns.shape[1] == 0:
        raise DataError("prediction matrix has no columns")
    P = pm.columns
    y = pm.target
    G = P.T @ P
    G = 0.5 * (G + G.T)  # exact symmetry independent of BLAS rounding
    return GramSystem(G=G, c=P.T @ y, y_norm_sq=float(y @ y))


def _kkt_residual(weights: np.ndarray, grad: np.ndarray) -> tuple[float, float]:
    """(residual, common gradient value) for a simplex-feasible point.

    The common value is the weight-averaged gradient over the support;
    the residual is the larger of the support spread and the worst
    amount by which a zero-weight gradient undercuts the common value.
    """
    support = weights > 0.0
    gs = grad[support]
    common = float(weights @ grad)
    spread = float(gs.max() - gs.min()) if gs.size > 1 else 0.0
    if support.all():
        return max(spread, 0.0), common
    undercut = float(common - grad[~support].min())
    return max(spread, undercut, 0.0), common


def solve_simplex_qp(gs: GramSystem, opts: SolverOptions = SolverOptions()) -> WeightSolution:
    """Projected gradient descent from the uniform weights.

    Step size is 1/L with L the row-sum bound on the largest eigenvalue of
    G; a step is halved whenever it would raise the objective, so the
    recorded objective never increases. After convergence, weights under
    sparsity_tol are zeroed and the rest renormalized (re-running the
    descent if that perturbs optimality).
    """
    if not (np.isfinite(gs.G).all() and np.isfinite(gs.c).all()):
        raise NumericalError("non-finite Gram system")
    k = gs.k
    G = gs.G
    c2 = 2.0 * gs.c
    L = float(np.abs(G).sum(axis=1).max())
    base_step = 1.0 / L if L > 0 else 1.0
    counts = np.arange(1.0, k + 1.0)  # reused by the inlined projection

    w = np.full(k, 1.0 / k)
    Gw = G @ w
    obj = float(w @ Gw - c2 @ w + gs.y_norm_sq)
    # Objective values are compared against their own rounding noise, not
    # exactly: genuine overshoot triggers halving, float jitter does not.
    noise = 64.0 * np.finfo(float).eps * (abs(gs.y_norm_sq) + float(np.abs(c2).max()) + L + 1.0)
    trace: list[float] = [obj] if opts.record_trace else []
    iterations = 0

    while iterations < opts.max_iter:
        grad = 2.0 * Gw - c2
        residual, _ = _kkt_residual(w, grad)
        if residual <= opts.tol:
            # Converged: wipe dust weights, and keep descending from the
            # renormalized point if that disturbed optimality.
            dust = (w > 0.0) & (w < opts.sparsity_tol)
            if not dust.any():
                break
            w = np.where(dust, 0.0, w)
            w = w / w.sum()
            Gw = G @ w
            obj = float(w @ Gw - c2 @ w + gs.y_norm_sq)
            continue
        iterations += 1

        step = base_step
        for _ in range(60):
            v = w - step * grad
            u = np.sort(v)[::-1]
            shifted = np.cumsum(u) - 1.0
            rho = int(np.nonzero(u * counts > shifted)[0][-1])
            cand = np.maximum(v - shifted[rho] / (rho + 1.0), 0.0)
            Gcand = G @ cand
            cand_obj = float(cand @ Gcand - c2 @ cand + gs.y_norm_sq)
            if cand_obj <= obj + noise:
                break
            step *= 0.5
        if np.array_equal(cand, w):
            break  # stalled at floating-point resolution
        w, Gw, obj = cand, Gcand, cand_obj
        if opts.record_trace:
            trace.append(obj)

    # Contract: no surviving weight sits below sparsity_tol.
    dust = (w > 0.0) & (w < opts.sparsity_tol)
    if dust.any():
        w = np.where(dust, 0.0, w)
    w = w / w.sum()
    grad = gs.gradient(w)
    residual, _ = _kkt_residual(w, grad)

    return WeightSolution(
        weights=w,
        objective=gs.objective(w),
        support=tuple(np.flatnonzero(w > 0.0)),
        kkt_residual=residual,
        iterations=iterations,
        objective_trace=tuple(trace),
    )


def check_kkt(gs: GramSystem, w: WeightSolution, tol: float = 1e-8) -> KktReport:
    """First-order optimality certificate for a candidate solution."""
    weights = np.asarray(w.weights, dtype=float)
    if weights.shape != (gs.k,):
        raise ConfigError("solution size does not match the Gram system")
    if weights.min() < -1e-12 or abs(weights.sum() - 1.0) > 1e-9:
        raise ConfigError("candidate violates the simplex constraints")
    residual, common = _kkt_residual(np.maximum(weights, 0.0), gs.gradient(weights))
    return KktReport(passed=residual <= tol, residual=residual, common_gradient=common)
