"""Scorecard evaluation: KS statistic, concordance, decile tables, drift.

KS is computed at score grain (an exact sweep over distinct-score
thresholds); the decile table additionally yields the coarser decile-grain
KS that charted reports use. Everything here is rank-based, so any
strictly increasing rescaling of the scores leaves the numbers unchanged.
Internally KS lives on [0, 1]; the CLI layer reports it times 100.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .dataset import Dataset
from .errors import ConfigError, DataError


class Concordance(NamedTuple):
    concordant_pct: float
    discordant_pct: float
    tied_pct: float


@dataclass(frozen=True)
class DecileRow:
    decile: int          # 1 = highest scores
    n: int
    events: int
    event_rate: float
    cum_event_share: float
    cum_nonevent_share: float


@dataclass(frozen=True)
class PeriodKs:
    period: int
    ks: float
    n: int
    events: int


@dataclass(frozen=True)
class EvaluationReport:
    ks: float                 # score grain, [0, 1]
    ks_decile: float          # decile grain, [0, 1]
    concordance_pct: float
    discordance_pct: float
    tied_pct: float
    decile_table: tuple[DecileRow, ...]
    n_rows: int
    n_events: int


def _as_arrays(scores: Sequence[float], labels: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ConfigError("scores and labels must be equal-length vectors")
    if not np.isin(y, (0, 1)).all():
        raise DataError("labels must all be 0 or 1")
    return s, y.astype(np.int64)


def ks_statistic(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Max gap between the event and non-event score CDFs, on [0, 1].

    Tied scores are grouped: thresholds fall only between distinct values.
    """
    s, y = _as_arrays(scores, labels)
    n_events = int(y.sum())
    n_non = y.size - n_events
    if n_events == 0 or n_non == 0:
        raise DataError("KS needs both classes present")
    order = np.argsort(s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    cum_events = np.cumsum(y_sorted) / n_events
    cum_non = np.cumsum(1 - y_sorted) / n_non
    distinct = np.append(s_sorted[:-1] != s_sorted[1:], True)
    return float(np.max(np.abs(cum_events - cum_non)[distinct]))


def concordance(scores: Sequence[float], labels: Sequence[int]) -> Concordance:
    """Pairwise agreement over all (event, non-event) pairs, in percent.

    Sort-based counting, O(n log n); equal scores land in the tied bucket.
    """
    s, y = _as_arrays(scores, labels)
    event_scores = s[y == 1]
    non_scores = np.sort(s[y == 0])
    if event_scores.size == 0 or non_scores.size == 0:
        raise DataError("concordance needs both classes present")
    below = np.searchsorted(non_scores, event_scores, side="left")
    below_or_equal = np.searchsorted(non_scores, event_scores, side="right")
    concordant = int(below.sum())
    tied = int((below_or_equal - below).sum())
    total = event_scores.size * non_scores.size
    discordant = total - concordant - tied
    return Concordance(
        concordant_pct=100.0 * concordant / total,
        discordant_pct=100.0 * discordant / total,
        tied_pct=100.0 * tied / total,
    )


def decile_table(scores: Sequence[float], labels: Sequence[int]) -> tuple[DecileRow, ...]:
    """Ten equal-count groups by descending score.

    Remainder rows go to the earliest deciles. The split is count-based, so
    tied scores may straddle a boundary.
    """
    s, y = _as_arrays(scores, labels)
    n = s.size
    if n < 10:
        raise DataError(f"need at least 10 rows for a decile table, got {n}")
    order = np.argsort(-s, kind="stable")
    y_sorted = y[order]
    total_events = int(y.sum())
    total_non = n - total_events

    sizes = [n // 10 + (1 if i < n % 10 else 0) for i in range(10)]
    rows: list[DecileRow] = []
    start = 0
    cum_events = 0
    cum_non = 0
    for i, size in enumerate(sizes, start=1):
        chunk = y_sorted[start : start + size]
        start += size
        events = int(chunk.sum())
        cum_events += events
        cum_non += size - events
        rows.append(
            DecileRow(
                decile=i,
                n=size,
                events=events,
                event_rate=events / size,
                cum_event_share=cum_events / total_events if total_events else 0.0,
                cum_nonevent_share=cum_non / total_non if total_non else 0.0,
            )
        )
    return tuple(rows)


def evaluate(scores: Sequence[float], labels: Sequence[int]) -> EvaluationReport:
    """Bundle KS (both grains), concordance and the decile table."""
    s, y = _as_arrays(scores, labels)
    table = decile_table(s, y)
    ks_dec = max(abs(r.cum_event_share - r.cum_nonevent_share) for r in table)
    conc = concordance(s, y)
    return EvaluationReport(
        ks=ks_statistic(s, y),
        ks_decile=ks_dec,
        concordance_pct=conc.concordant_pct,
        discordance_pct=conc.discordant_pct,
        tied_pct=conc.tied_pct,
        decile_table=table,
        n_rows=int(s.size),
        n_events=int(y.sum()),
    )


def evaluate_over_time(
    score_fn: Callable[[Dataset], np.ndarray],
    data: Dataset,
    periods: Sequence[int] | None = None,
) -> tuple[PeriodKs, ...]:
    """KS per period for a frozen scorer; no refitting happens here.

    Periods are reported in ascending order, so a model's own (earliest)
    period leads the series. Empty or single-class periods are skipped
    with a warning.
    """
    by_period = data.partition_by_period()
    if periods is None:
        wanted = sorted(by_period)
    else:
        wanted = [int(q) for q in periods]
    out: list[PeriodKs] = []
    for q in wanted:
        part = by_period.get(q)
        if part is None or part.n_rows == 0:
            warnings.warn(f"period {q} has no rows; skipped")
            continue
        if part.y.min() == part.y.max():
            warnings.warn(f"period {q} has a single label class; skipped")
            continue
        ks = ks_statistic(score_fn(part), part.y)
        out.append(PeriodKs(period=q, ks=ks, n=part.n_rows, events=int(part.y.sum())))
    return tuple(out)
