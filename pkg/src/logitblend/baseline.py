"""Benchmark single-model pipeline: binning, log-odds encoding, collapsing.

Bins are right-closed intervals over the real line, (-inf, e1], (e1, e2],
..., (ek, +inf), so a value equal to an edge belongs to the lower bin and
every real number maps to exactly one bin. Equal-frequency edges are data
values (order statistics), which keeps tied blocks intact.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ._stats import two_proportion_p_value
from .dataset import Dataset
from .errors import ConfigError, DataError
from .logit import FitOptions, LogitModel, backward_eliminate

LOG_ODDS_SUFFIX = "__logodds"
ODDS_SUFFIX = "__odds"


@dataclass(frozen=True)
class BinningSpec:
    feature: str
    method: str  # "equal_frequency" or "cutpoints"
    bin_edges: tuple[float, ...]

    def __post_init__(self) -> None:
        edges = tuple(float(e) for e in self.bin_edges)
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ConfigError(f"bin edges must be strictly ascending, got {edges}")
        object.__setattr__(self, "bin_edges", edges)

    @property
    def n_bins(self) -> int:
        return len(self.bin_edges) + 1


def assign_bins(values: np.ndarray, edges: Sequence[float]) -> np.ndarray:
    """Bin index per value; ties with an edge fall into the lower bin."""
    return np.searchsorted(np.asarray(edges, dtype=float), values, side="left")


def bin_equal_frequency(d: Dataset, feature: str, k: int) -> BinningSpec:
    """Quantile bins of roughly equal population.

    Edges are the i/k order statistics of the observed column. Duplicated
    quantiles (heavy ties) reduce the bin count, with a warning.
    """
    if k < 2:
        raise ConfigError(f"need at least 2 bins, got k={k}")
    values = np.sort(d.column(feature))
    n = values.size
    if n == 0:
        raise DataError(f"feature {feature!r} has no rows to bin")
    edges: list[float] = []
    for i in range(1, k):
        q = values[min(n - 1, int(np.ceil(n * i / k)) - 1)]
        if q < values[-1] and (not edges or q > edges[-1]):
            edges.append(float(q))
    if len(edges) + 1 < k:
        warnings.warn(
            f"feature {feature!r}: only {len(edges) + 1} distinct bins possible "
            f"for k={k} (tied or constant values)"
        )
    return BinningSpec(feature=feature, method="equal_frequency", bin_edges=tuple(edges))


def explicit_cutpoints(feature: str, cutpoints: Sequence[float]) -> BinningSpec:
    """Analyst-supplied thresholds."""
    return BinningSpec(feature=feature, method="cutpoints", bin_edges=tuple(cutpoints))


@dataclass(frozen=True)
class BinEncoding:
    """Per-bin event counts and their (smoothed) odds / log-odds."""

    feature: str
    bin_edges: tuple[float, ...]
    count_events: tuple[int, ...]
    count_nonevents: tuple[int, ...]
    smoothing: float = 0.5

    def __post_init__(self) -> None:
        n_bins = len(self.bin_edges) + 1
        if len(self.count_events) != n_bins or len(self.count_nonevents) != n_bins:
            raise ConfigError("bin count mismatch between edges and counts")
        if min(self.count_events) < 0 or min(self.count_nonevents) < 0:
            raise DataError("negative bin count")
        totals = np.array(self.count_events) + np.array(self.count_nonevents)
        if (totals == 0).any():
            raise DataError(f"feature {self.feature!r}: empty bin cannot be encoded")
        if self.smoothing < 0:
            raise ConfigError("smoothing must be >= 0")
        if self.smoothing == 0 and (
            min(self.count_events) == 0 or min(self.count_nonevents) == 0
        ):
            raise DataError(
                f"feature {self.feature!r}: a zero count with smoothing=0 "
                "gives unbounded odds; use smoothing > 0"
            )

    @property
    def n_bins(self) -> int:
        return len(self.bin_edges) + 1

    @property
    def odds(self) -> np.ndarray:
        ev = np.array(self.count_events, dtype=float) + self.smoothing
        non = np.array(self.count_nonevents, dtype=float) + self.smoothing
        return ev / non

    @property
    def log_odds(self) -> np.ndarray:
        return np.log(self.odds)

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self.log_odds[assign_bins(values, self.bin_edges)]

    def apply_odds(self, values: np.ndarray) -> np.ndarray:
        return self.odds[assign_bins(values, self.bin_edges)]


def encode_log_odds(d: Dataset, spec: BinningSpec, smoothing: float = 0.5) -> BinEncoding:
    """Count events per bin and derive the odds / log-odds encoding."""
    bins = assign_bins(d.column(spec.feature), spec.bin_edges)
    n_bins = spec.n_bins
    events = np.bincount(bins, weights=d.y.astype(float), minlength=n_bins)
    totals = np.bincount(bins, minlength=n_bins)
    return BinEncoding(
        feature=spec.feature,
        bin_edges=spec.bin_edges,
        count_events=tuple(int(e) for e in events),
        count_nonevents=tuple(int(t - e) for t, e in zip(totals, events)),
        smoothing=smoothing,
    )


def collapse_adjacent_bins(enc: BinEncoding, alpha: float = 0.05) -> BinEncoding:
    """Merge adjacent bins whose event rates are statistically alike.

    Repeatedly merges the adjacent pair with the largest two-proportion
    z-test p-value while that p-value exceeds alpha; the encoding is
    re-derived from the merged counts after every merge.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must be in (0, 1), got {alpha}")
    events = list(enc.count_events)
    nonevents = list(enc.count_nonevents)
    edges = list(enc.bin_edges)
    while len(events) >= 2:
        pvals = [
            two_proportion_p_value(
                events[i], events[i] + nonevents[i], events[i + 1], events[i + 1] + nonevents[i + 1]
            )
            for i in range(len(events) - 1)
        ]
        best = int(np.argmax(pvals))
        if pvals[best] <= alpha:
            break
        events[best] += events.pop(best + 1)
        nonevents[best] += nonevents.pop(best + 1)
        edges.pop(best)
    return BinEncoding(
        feature=enc.feature,
        bin_edges=tuple(edges),
        count_events=tuple(events),
        count_nonevents=tuple(nonevents),
        smoothing=enc.smoothing,
    )


@dataclass(frozen=True)
class BaselinePipeline:
    """Which features get binned/encoded and which pass through untouched.

    ``binned`` maps a feature name to either an integer (equal-frequency
    bin count) or an explicit list of cut points. With ``include_odds``
    the raw-odds encoding also enters elimination next to the log-odds one.
    """

    binned: Mapping[str, int | Sequence[float]]
    passthrough: tuple[str, ...] = ()
    alpha: float = 0.05
    smoothing: float = 0.5
    collapse: bool = True
    collapse_alpha: float = 0.05
    include_odds: bool = False


@dataclass(frozen=True)
class BaseModel:
    """A fitted benchmark model bundled with its frozen feature transform."""

    model: LogitModel
    encodings: tuple[BinEncoding, ...]
    pipeline: BaselinePipeline
    metadata: dict

    def _encoding_for(self, feature: str) -> BinEncoding:
        for enc in self.encodings:
            if enc.feature == feature:
                return enc
        raise ConfigError(f"no frozen encoding for feature {feature!r}")

    @property
    def required_features(self) -> tuple[str, ...]:
        """Raw input features the frozen transform needs at scoring time."""
        raw: list[str] = []
        for name in self.model.feature_subset:
            if name.endswith(LOG_ODDS_SUFFIX):
                raw.append(name[: -len(LOG_ODDS_SUFFIX)])
            elif name.endswith(ODDS_SUFFIX):
                raw.append(name[: -len(ODDS_SUFFIX)])
            else:
                raw.append(name)
        return tuple(dict.fromkeys(raw))

    def transform(self, d: Dataset) -> Dataset:
        """Apply the frozen (training-time) binning to a raw dataset."""
        return _apply_encodings(d, self.encodings, self.pipeline)

    def predict_dataset(self, d: Dataset) -> np.ndarray:
        return self.model.predict_dataset(self.transform(d))

    def predict_row(self, row: Mapping[str, float]) -> float:
        transformed: dict[str, float] = {}
        for name in self.model.feature_subset:
            if name.endswith(LOG_ODDS_SUFFIX):
                raw = name[: -len(LOG_ODDS_SUFFIX)]
                enc = self._encoding_for(raw)
                if raw not in row:
                    raise DataError(f"missing feature {raw!r}")
                transformed[name] = float(enc.apply(np.array([row[raw]]))[0])
            elif name.endswith(ODDS_SUFFIX):
                raw = name[: -len(ODDS_SUFFIX)]
                enc = self._encoding_for(raw)
                if raw not in row:
                    raise DataError(f"missing feature {raw!r}")
                transformed[name] = float(enc.apply_odds(np.array([row[raw]]))[0])
            else:
                if name not in row:
                    raise DataError(f"missing feature {name!r}")
                transformed[name] = float(row[name])
        return self.model.predict_row(transformed)


def _apply_encodings(
    d: Dataset, encodings: Sequence[BinEncoding], pipeline: BaselinePipeline
) -> Dataset:
    names: list[str] = []
    cols: list[np.ndarray] = []
    for enc in encodings:
        values = d.column(enc.feature)
        names.append(enc.feature + LOG_ODDS_SUFFIX)
        cols.append(enc.apply(values))
        if pipeline.include_odds:
            names.append(enc.feature + ODDS_SUFFIX)
            cols.append(enc.apply_odds(values))
    for f in pipeline.passthrough:
        names.append(f)
        cols.append(d.column(f))
    X = np.column_stack(cols) if cols else np.empty((d.n_rows, 0))
    return d.with_features(names, X)


def train_base_model(
    train: Dataset,
    pipeline: BaselinePipeline,
    options: FitOptions = FitOptions(),
) -> BaseModel:
    """Bin, encode, then backward-eliminate over the transformed design.

    The resolved bin edges and per-bin log-odds are frozen into the returned
    BaseModel, so validation scoring reuses training-time edges exactly.
    """
    encodings: list[BinEncoding] = []
    for feature, how in pipeline.binned.items():
        if isinstance(how, int):
            spec = bin_equal_frequency(train, feature, how)
        else:
            spec = explicit_cutpoints(feature, how)
        enc = encode_log_odds(train, spec, smoothing=pipeline.smoothing)
        if pipeline.collapse and enc.n_bins >= 2:
            enc = collapse_adjacent_bins(enc, alpha=pipeline.collapse_alpha)
        encodings.append(enc)

    design = _apply_encodings(train, encodings, pipeline)
    if design.n_features == 0:
        raise ConfigError("baseline pipeline selects no features")
    model = backward_eliminate(design, design.feature_names, pipeline.alpha, options)
    return BaseModel(
        model=model,
        encodings=tuple(encodings),
        pipeline=pipeline,
        metadata={"trained_rows": train.n_rows},
    )
