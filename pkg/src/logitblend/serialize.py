"""JSON persistence for models and pools.

Artifacts are written with sorted keys and no timestamps, so a rerun with
the same inputs produces byte-identical files. Infinite standard errors
(non-identified coefficients) are stored as null.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

from .baseline import BaseModel, BaselinePipeline, BinEncoding
from .errors import ConfigError, DataError
from .interpret import EnsembleModel
from .logit import FitInfo, LogitModel

SCHEMA_VERSION = 1


def dump_json(payload: Any, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_json(path: str | Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _num(x: float) -> float | None:
    return None if not math.isfinite(x) else float(x)


def _unnum(x: float | None) -> float:
    return math.inf if x is None else float(x)


def logit_to_dict(m: LogitModel) -> dict:
    info = m.fit_info
    return {
        "intercept": m.intercept,
        "coefficients": {f: m.coefficients[f] for f in m.feature_subset},
        "feature_subset": list(m.feature_subset),
        "fit": {
            "iterations": info.iterations,
            "log_likelihood": info.log_likelihood,
            "converged": info.converged,
            "separated": info.separated,
            "intercept_se": _num(info.intercept_se),
            "intercept_p": info.intercept_p,
            "std_errors": {f: _num(v) for f, v in info.std_errors.items()},
            "p_values": dict(info.p_values),
            "eliminated": list(info.eliminated),
        },
    }


def logit_from_dict(payload: dict) -> LogitModel:
    fit = payload["fit"]
    info = FitInfo(
        iterations=int(fit["iterations"]),
        log_likelihood=float(fit["log_likelihood"]),
        converged=bool(fit["converged"]),
        separated=bool(fit["separated"]),
        intercept_se=_unnum(fit["intercept_se"]),
        intercept_p=float(fit["intercept_p"]),
        std_errors={f: _unnum(v) for f, v in fit["std_errors"].items()},
        p_values={f: float(v) for f, v in fit["p_values"].items()},
        eliminated=tuple(fit["eliminated"]),
    )
    return LogitModel(
        intercept=float(payload["intercept"]),
        coefficients={f: float(v) for f, v in payload["coefficients"].items()},
        feature_subset=tuple(payload["feature_subset"]),
        fit_info=info,
    )


def _encoding_to_dict(enc: BinEncoding) -> dict:
    return {
        "feature": enc.feature,
        "bin_edges": list(enc.bin_edges),
        "count_events": list(enc.count_events),
        "count_nonevents": list(enc.count_nonevents),
        "smoothing": enc.smoothing,
    }


def _encoding_from_dict(payload: dict) -> BinEncoding:
    return BinEncoding(
        feature=payload["feature"],
        bin_edges=tuple(payload["bin_edges"]),
        count_events=tuple(int(v) for v in payload["count_events"]),
        count_nonevents=tuple(int(v) for v in payload["count_nonevents"]),
        smoothing=float(payload["smoothing"]),
    )


def base_model_to_dict(bm: BaseModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "baseline",
        "model": logit_to_dict(bm.model),
        "encodings": [_encoding_to_dict(enc) for enc in bm.encodings],
        "pipeline": {
            "binned": {f: how if isinstance(how, int) else list(how) for f, how in bm.pipeline.binned.items()},
            "passthrough": list(bm.pipeline.passthrough),
            "alpha": bm.pipeline.alpha,
            "smoothing": bm.pipeline.smoothing,
            "collapse": bm.pipeline.collapse,
            "collapse_alpha": bm.pipeline.collapse_alpha,
            "include_odds": bm.pipeline.include_odds,
        },
        "metadata": bm.metadata,
    }


def base_model_from_dict(payload: dict) -> BaseModel:
    pl = payload["pipeline"]
    pipeline = BaselinePipeline(
        binned={f: how if isinstance(how, int) else tuple(how) for f, how in pl["binned"].items()},
        passthrough=tuple(pl["passthrough"]),
        alpha=float(pl["alpha"]),
        smoothing=float(pl["smoothing"]),
        collapse=bool(pl["collapse"]),
        collapse_alpha=float(pl["collapse_alpha"]),
        include_odds=bool(pl["include_odds"]),
    )
    return BaseModel(
        model=logit_from_dict(payload["model"]),
        encodings=tuple(_encoding_from_dict(e) for e in payload["encodings"]),
        pipeline=pipeline,
        metadata=payload.get("metadata") or {},
    )


def ensemble_to_dict(e: EnsembleModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "ensemble",
        "weights": [w for w, _ in e.members],
        "members": [logit_to_dict(m) for _, m in e.members],
        "metadata": e.metadata,
    }


def ensemble_from_dict(payload: dict) -> EnsembleModel:
    weights = [float(w) for w in payload["weights"]]
    models = [logit_from_dict(m) for m in payload["members"]]
    if len(weights) != len(models):
        raise DataError("ensemble JSON: weights and members disagree in length")
    return EnsembleModel(
        members=tuple(zip(weights, models)),
        metadata=payload.get("metadata") or {},
    )


def save_model(model: BaseModel | EnsembleModel, path: str | Path) -> Path:
    if isinstance(model, BaseModel):
        return dump_json(base_model_to_dict(model), path)
    if isinstance(model, EnsembleModel):
        return dump_json(ensemble_to_dict(model), path)
    raise ConfigError(f"cannot serialize object of type {type(model).__name__}")


def load_model(path: str | Path) -> BaseModel | EnsembleModel:
    payload = load_json(path)
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DataError(
            f"{path}: model schema version {version!r} is not supported "
            f"(this build reads version {SCHEMA_VERSION})"
        )
    kind = payload.get("kind")
    if kind == "baseline":
        return base_model_from_dict(payload)
    if kind == "ensemble":
        return ensemble_from_dict(payload)
    raise DataError(f"{path}: unknown model kind {kind!r}")
