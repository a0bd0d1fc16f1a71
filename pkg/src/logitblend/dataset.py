"""Immutable tabular data: CSV ingestion, cleaning, splitting and synthesis.

A :class:`Dataset` is frozen after construction (its arrays are marked
read-only), so it can be shared freely across concurrent model fits.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ._stats import stable_sigmoid
from .errors import ConfigError, DataError

# Field values treated as a missing cell on ingestion, besides the empty field.
DEFAULT_MISSING_TOKENS = ("", "NA", "N/A", "NaN", "nan", "null")

ID_COLUMN = "record_id"
PERIOD_COLUMN = "period"
LABEL_COLUMN = "label"


@dataclass(frozen=True)
class Schema:
    """Column roles for CSV ingestion; every other column is a feature."""

    label: str = LABEL_COLUMN
    period: str = PERIOD_COLUMN
    record_id: str | None = ID_COLUMN


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    rng_seed: int
    stratify_by_label: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(
                f"train_fraction must lie strictly between 0 and 1, got {self.train_fraction}"
            )


@dataclass(frozen=True)
class Dataset:
    """Numeric feature table with a binary label and an ordinal period tag.

    ``missing_mask`` flags cells whose value is unknown; masked cells hold
    NaN in ``X`` until imputation replaces them.
    """

    feature_names: tuple[str, ...]
    X: np.ndarray            # (n, f) float64
    y: np.ndarray            # (n,) int8, values 0/1
    period: np.ndarray       # (n,) int64
    record_ids: tuple[str, ...]
    missing_mask: np.ndarray  # (n, f) bool

    def __post_init__(self) -> None:
        X = np.array(self.X, dtype=np.float64, copy=True)
        if X.ndim != 2:
            raise DataError("feature matrix must be two-dimensional")
        y = np.array(self.y, dtype=np.int8, copy=True)
        period = np.array(self.period, dtype=np.int64, copy=True)
        mask = np.array(self.missing_mask, dtype=bool, copy=True)
        names = tuple(self.feature_names)
        ids = tuple(str(r) for r in self.record_ids)

        n, f = X.shape
        if len(names) != f:
            raise DataError(f"{len(names)} feature names for {f} columns")
        if len(set(names)) != f:
            raise DataError("duplicate feature names")
        if y.shape != (n,) or period.shape != (n,) or len(ids) != n:
            raise DataError("row count mismatch between columns")
        if mask.shape != X.shape:
            raise DataError("missing_mask shape does not match feature matrix")
        if n and not np.isin(y, (0, 1)).all():
            raise DataError("labels must all be 0 or 1")
        if len(set(ids)) != n:
            raise DataError("record ids are not unique")
        if n and f and not np.isfinite(X[~mask]).all():
            raise DataError("non-finite feature value outside the missing mask")

        for arr in (X, y, period, mask):
            arr.setflags(write=False)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "period", period)
        object.__setattr__(self, "record_ids", ids)
        object.__setattr__(self, "missing_mask", mask)

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def feature_index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise ConfigError(f"unknown feature {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.feature_index(name)]

    def row(self, i: int) -> dict[str, float]:
        return dict(zip(self.feature_names, self.X[i]))

    def has_missing(self) -> bool:
        return bool(self.missing_mask.any())

    def subset_rows(self, indices: np.ndarray | Sequence[int]) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            feature_names=self.feature_names,
            X=self.X[idx],
            y=self.y[idx],
            period=self.period[idx],
            record_ids=tuple(self.record_ids[i] for i in idx),
            missing_mask=self.missing_mask[idx],
        )

    def with_features(
        self,
        feature_names: Sequence[str],
        X: np.ndarray,
        missing_mask: np.ndarray | None = None,
    ) -> "Dataset":
        """Same rows and labels, different feature block (used by transforms)."""
        if missing_mask is None:
            missing_mask = np.zeros_like(np.asarray(X, dtype=float), dtype=bool)
        return Dataset(
            feature_names=tuple(feature_names),
            X=X,
            y=self.y,
            period=self.period,
            record_ids=self.record_ids,
            missing_mask=missing_mask,
        )

    def partition_by_period(self) -> dict[int, "Dataset"]:
        return {
            int(q): self.subset_rows(np.flatnonzero(self.period == q))
            for q in np.unique(self.period)
        }


def load_csv(
    path: str | Path,
    schema: Schema = Schema(),
    *,
    delimiter: str = ",",
    missing_tokens: Sequence[str] = DEFAULT_MISSING_TOKENS,
) -> Dataset:
    """Read a delimited file into a Dataset.

    The header row is required. Cells matching ``missing_tokens`` (or parsing
    to a non-finite number) are flagged missing. Raises DataError with the
    offending line number for malformed rows, non-binary labels or a schema
    naming columns the file does not have.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    missing = set(missing_tokens)

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty, expected a header row") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column names in header")

        roles = {schema.label, schema.period}
        if schema.record_id is not None:
            roles.add(schema.record_id)
        for col in sorted(roles):
            if col not in header:
                raise DataError(f"{path}: schema column {col!r} not in header {header}")

        label_at = header.index(schema.label)
        period_at = header.index(schema.period)
        id_at = header.index(schema.record_id) if schema.record_id is not None else None
        feature_names = tuple(h for h in header if h not in roles)
        feature_at = [header.index(h) for h in feature_names]

        rows_X: list[list[float]] = []
        rows_mask: list[list[bool]] = []
        labels: list[int] = []
        periods: list[int] = []
        ids: list[str] = []
        for row in reader:
            line = reader.line_num
            if len(row) != len(header):
                raise DataError(
                    f"{path}: line {line}: expected {len(header)} fields, got {len(row)}"
                )
            tok = row[label_at].strip()
            try:
                lab = float(tok)
            except ValueError:
                raise DataError(f"{path}: line {line}: label must be 0 or 1, got {tok!r}") from None
            if lab not in (0.0, 1.0):
                raise DataError(f"{path}: line {line}: label must be 0 or 1, got {tok!r}")
            tok = row[period_at].strip()
            try:
                per = int(float(tok))
                if float(tok) != per:
                    raise ValueError
            except ValueError:
                raise DataError(
                    f"{path}: line {line}: period must be an integer, got {tok!r}"
                ) from None

            vals: list[float] = []
            mask: list[bool] = []
            for j in feature_at:
                tok = row[j].strip()
                if tok in missing:
                    vals.append(np.nan)
                    mask.append(True)
                    continue
                try:
                    v = float(tok)
                except ValueError:
                    raise DataError(
                        f"{path}: line {line}: column {header[j]!r}: "
                        f"cannot parse {tok!r} as a number"
                    ) from None
                if not np.isfinite(v):
                    vals.append(np.nan)
                    mask.append(True)
                else:
                    vals.append(v)
                    mask.append(False)

            rows_X.append(vals)
            rows_mask.append(mask)
            labels.append(int(lab))
            periods.append(per)
            ids.append(row[id_at].strip() if id_at is not None else f"r{len(ids):07d}")

    n = len(rows_X)
    return Dataset(
        feature_names=feature_names,
        X=np.array(rows_X, dtype=float).reshape(n, len(feature_names)),
        y=np.array(labels, dtype=np.int8),
        period=np.array(periods, dtype=np.int64),
        record_ids=tuple(ids),
        missing_mask=np.array(rows_mask, dtype=bool).reshape(n, len(feature_names)),
    )


def save_csv(d: Dataset, path: str | Path, *, delimiter: str = ",") -> None:
    """Write a Dataset with the standard column layout; missing cells as ''."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow([ID_COLUMN, PERIOD_COLUMN, LABEL_COLUMN, *d.feature_names])
        for i in range(d.n_rows):
            cells: list[str] = [d.record_ids[i], str(int(d.period[i])), str(int(d.y[i]))]
            for j in range(d.n_features):
                cells.append("" if d.missing_mask[i, j] else repr(float(d.X[i, j])))
            writer.writerow(cells)


@dataclass(frozen=True)
class ImputePolicy:
    """How to fill missing cells: per-feature median (default) or a constant."""

    method: str = "median"
    constant: float = 0.0

    def __post_init__(self) -> None:
        if self.method not in ("median", "constant"):
            raise ConfigError(f"unknown imputation method {self.method!r}")


def impute_missing(
    d: Dataset, policy: ImputePolicy = ImputePolicy()
) -> tuple[Dataset, dict[str, float]]:
    """Fill missing cells and return the fill value used per feature.

    Fill values are computed for every feature (not just those with gaps) so
    they can be frozen alongside a model and reapplied at scoring time.
    """
    fills: dict[str, float] = {}
    X = np.array(d.X, copy=True)
    for j, name in enumerate(d.feature_names):
        observed = d.X[~d.missing_mask[:, j], j]
        if policy.method == "constant":
            fill = float(policy.constant)
        else:
            if observed.size == 0:
                raise DataError(f"feature {name!r} has no observed values to impute from")
            fill = float(np.median(observed))
        fills[name] = fill
        X[d.missing_mask[:, j], j] = fill
    return (
        Dataset(
            feature_names=d.feature_names,
            X=X,
            y=d.y,
            period=d.period,
            record_ids=d.record_ids,
            missing_mask=np.zeros_like(d.missing_mask),
        ),
        fills,
    )


def apply_fills(d: Dataset, fills: Mapping[str, float]) -> Dataset:
    """Reapply frozen fill values to a dataset with missing cells."""
    if not d.has_missing():
        return d
    X = np.array(d.X, copy=True)
    for j, name in enumerate(d.feature_names):
        col_mask = d.missing_mask[:, j]
        if not col_mask.any():
            continue
        if name not in fills:
            row = int(np.flatnonzero(col_mask)[0])
            raise DataError(
                f"record {d.record_ids[row]}: missing value for feature {name!r} "
                "and no imputation statistic available"
            )
        X[col_mask, j] = float(fills[name])
    return Dataset(
        feature_names=d.feature_names,
        X=X,
        y=d.y,
        period=d.period,
        record_ids=d.record_ids,
        missing_mask=np.zeros_like(d.missing_mask),
    )


def filter_prior_defaulters(d: Dataset, prior_flag: str) -> tuple[Dataset, int]:
    """Drop rows whose prior-default flag is 1; returns (filtered, n_removed)."""
    col = d.column(prior_flag)
    j = d.feature_index(prior_flag)
    if d.missing_mask[:, j].any() or not np.isin(col, (0.0, 1.0)).all():
        raise DataError(f"prior-default flag {prior_flag!r} must be binary with no gaps")
    keep = np.flatnonzero(col == 0.0)
    removed = d.n_rows - keep.size
    if removed == d.n_rows and d.n_rows > 0:
        warnings.warn(f"every row is flagged in {prior_flag!r}; result is empty")
    return d.subset_rows(keep), removed


def split(d: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded disjoint train/validation partition, optionally label-stratified."""
    if d.n_rows < 2:
        raise DataError("need at least 2 rows to split")
    rng = np.random.default_rng(spec.rng_seed)
    train_idx: list[np.ndarray] = []
    if spec.stratify_by_label:
        for value in np.unique(d.y):
            stratum = np.flatnonzero(d.y == value)
            perm = rng.permutation(stratum)
            take = int(round(spec.train_fraction * stratum.size))
            train_idx.append(perm[:take])
    else:
        perm = rng.permutation(d.n_rows)
        take = int(round(spec.train_fraction * d.n_rows))
        train_idx.append(perm[:take])
    train_set = np.sort(np.concatenate(train_idx))
    in_train = np.zeros(d.n_rows, dtype=bool)
    in_train[train_set] = True
    valid_set = np.flatnonzero(~in_train)
    if train_set.size == 0 or valid_set.size == 0:
        raise DataError(
            f"train_fraction {spec.train_fraction} leaves an empty side for n={d.n_rows}"
        )
    return d.subset_rows(train_set), d.subset_rows(valid_set)


@dataclass(frozen=True)
class SynthConfig:
    """Configuration for the seeded synthetic portfolio generator.

    The ground truth is logistic in the features with one curved term
    (a centred square of the first feature) and, when ``drift`` is nonzero,
    coefficients that shift multiplicatively from period to period.
    """

    n_rows: int
    n_features: int
    n_periods: int
    rng_seed: int
    drift: float = 0.0
    base_rate: float = 0.15
    n_informative: int | None = None
    squared_weight: float = 0.7
    missing_rate: float = 0.0
    prior_default_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.n_rows < 1 or self.n_features < 1 or self.n_periods < 1:
            raise ConfigError("n_rows, n_features and n_periods must all be >= 1")
        if not 0.0 < self.base_rate < 1.0:
            raise ConfigError(f"base_rate must be in (0, 1), got {self.base_rate}")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ConfigError("missing_rate must be in [0, 1)")
        if not 0.0 <= self.prior_default_rate < 1.0:
            raise ConfigError("prior_default_rate must be in [0, 1)")
        k = self.n_informative
        if k is not None and not 1 <= k <= self.n_features:
            raise ConfigError("n_informative must be between 1 and n_features")


def _calibrate_intercept(eta: np.ndarray, target: float) -> float:
    """Bisect the intercept so the mean predicted probability hits target."""
    lo, hi = -40.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(np.mean(stable_sigmoid(eta + mid))) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    return 0.5 * (lo + hi)


def generate_synthetic(config: SynthConfig) -> tuple[Dataset, dict]:
    """Generate a seeded synthetic Dataset plus its ground truth.

    Returns ``(dataset, truth)`` where ``truth`` records the per-period
    coefficients actually used, for downstream oracles. Draws happen in a
    fixed order, so identical configs produce byte-identical datasets.
    """
    rng = np.random.default_rng(config.rng_seed)
    n, f, q_count = config.n_rows, config.n_features, config.n_periods
    k = config.n_informative if config.n_informative is not None else min(12, f)

    X = rng.standard_normal((n, f))
    period = rng.permutation(np.arange(n, dtype=np.int64) % q_count)
    base_w = rng.uniform(0.25, 0.9, size=k) * rng.choice([-1.0, 1.0], size=k)
    drift_dir = rng.uniform(-1.0, 1.0, size=k + 1)

    # Per-period coefficients: multiplicative drift keeps signs stable.
    coef = np.empty((q_count, k))
    sq_w = np.empty(q_count)
    for q in range(q_count):
        coef[q] = base_w * (1.0 + config.drift * q * drift_dir[:k])
        sq_w[q] = config.squared_weight * (1.0 + config.drift * q * drift_dir[k])

    eta = np.einsum("ij,ij->i", X[:, :k], coef[period])
    eta += sq_w[period] * (X[:, 0] ** 2 - 1.0)
    intercept = _calibrate_intercept(eta, config.base_rate)
    labels = (rng.random(n) < stable_sigmoid(eta + intercept)).astype(np.int8)

    mask = np.zeros((n, f), dtype=bool)
    if config.missing_rate > 0.0:
        mask = rng.random((n, f)) < config.missing_rate
        X = np.where(mask, np.nan, X)

    width = max(2, len(str(f - 1)))
    names = [f"f{j:0{width}d}" for j in range(f)]
    if config.prior_default_rate > 0.0:
        flag = (rng.random(n) < config.prior_default_rate).astype(float)
        X = np.column_stack([X, flag])
        mask = np.column_stack([mask, np.zeros(n, dtype=bool)])
        names.append("prior_default")

    ds = Dataset(
        feature_names=tuple(names),
        X=X,
        y=labels,
        period=period,
        record_ids=tuple(f"r{i:07d}" for i in range(n)),
        missing_mask=mask,
    )
    truth = {
        "intercept": float(intercept),
        "informative_features": names[:k],
        "coefficients": {
            str(q): {names[j]: float(coef[q, j]) for j in range(k)} for q in range(q_count)
        },
        "squared_feature": names[0],
        "squared_weight": {str(q): float(sq_w[q]) for q in range(q_count)},
        "base_rate": config.base_rate,
        "drift": config.drift,
        "rng_seed": config.rng_seed,
    }
    return ds, truth
