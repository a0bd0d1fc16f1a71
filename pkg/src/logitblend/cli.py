"""Command-line workflow: synth, prep, train, score, evaluate, explain.

Every subcommand reads an optional JSON config file; command-line flags
win over config values. Primary artifacts (models, CSVs) are byte-stable
across reruns; timings and host details go to a ``*.run.json`` sidecar so
they never contaminate the reproducible outputs.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import __version__
from .baseline import BaselinePipeline, train_base_model
from .dataset import (
    Dataset,
    ImputePolicy,
    Schema,
    SplitSpec,
    SynthConfig,
    apply_fills,
    filter_prior_defaulters,
    generate_synthetic,
    impute_missing,
    load_csv,
    save_csv,
    split,
)
from .ensemble import PoolConfig, build_prediction_matrix, sample_feature_subsets, train_pool
from .errors import ConfigError, DataError, LogitblendError, NumericalError
from .figures import save_decile_chart, save_ks_over_time
from .interpret import EnsembleModel, assemble, reason_codes, sensitivity_report
from .metrics import evaluate, evaluate_over_time
from .serialize import (
    dump_json,
    ensemble_to_dict,
    load_model,
    logit_to_dict,
    save_model,
)
from .simplex_qp import SolverOptions, build_gram, check_kkt, solve_simplex_qp

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped onto the config exit code."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


@contextmanager
def _stage(name: str, timings: dict[str, float] | None = None):
    """Tag errors with the pipeline stage they came from."""
    started = time.perf_counter()
    try:
        yield
    except LogitblendError as exc:
        raise type(exc)(f"[stage {name}] {exc}") from exc
    finally:
        if timings is not None:
            timings[name] = round(time.perf_counter() - started, 6)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        payload = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise ConfigError(f"config file {p} must hold a JSON object")
    return payload


def _cfg(config: Mapping[str, Any], dotted: str, default: Any = None) -> Any:
    node: Any = config
    for part in dotted.split("."):
        if not isinstance(node, Mapping) or part not in node:
            return default
        node = node[part]
    return node


def _pick(flag_value: Any, config_value: Any, default: Any) -> Any:
    if flag_value is not None:
        return flag_value
    if config_value is not None:
        return config_value
    return default


def _schema(config: Mapping[str, Any]) -> Schema:
    return Schema(
        label=_cfg(config, "data.schema.label", "label"),
        period=_cfg(config, "data.schema.period", "period"),
        record_id=_cfg(config, "data.schema.record_id", "record_id"),
    )


def _out_dir(args: argparse.Namespace, config: Mapping[str, Any]) -> Path:
    out = Path(_pick(getattr(args, "out_dir", None), _cfg(config, "output_dir"), "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_data(args: argparse.Namespace, config: Mapping[str, Any], flag: str = "data") -> Dataset:
    path = _pick(getattr(args, flag, None), _cfg(config, "data.csv"), None)
    if path is None:
        raise ConfigError("no data file given (flag --data or config data.csv)")
    return load_csv(
        path,
        _schema(config),
        delimiter=_cfg(config, "data.delimiter", ","),
        missing_tokens=tuple(_cfg(config, "data.missing_tokens", ["", "NA", "N/A", "NaN", "nan", "null"])),
    )


def _impute_policy(config: Mapping[str, Any]) -> ImputePolicy:
    return ImputePolicy(
        method=_cfg(config, "prep.imputation.method", "median"),
        constant=float(_cfg(config, "prep.imputation.constant", 0.0)),
    )


def _prepare(
    d: Dataset, config: Mapping[str, Any], timings: dict[str, float]
) -> tuple[Dataset, dict[str, float], dict]:
    """Shared prep path: prior-default filter, then imputation."""
    notes: dict[str, Any] = {}
    prior_col = _cfg(config, "prep.prior_default_column")
    if prior_col:
        with _stage("filter", timings):
            d, removed = filter_prior_defaulters(d, prior_col)
        notes["prior_default"] = {"column": prior_col, "removed": removed}
    with _stage("impute", timings):
        d, fills = impute_missing(d, _impute_policy(config))
    return d, fills, notes


def _feature_stats(d: Dataset) -> dict[str, dict[str, float]]:
    return {
        "mean": {f: float(np.mean(d.column(f))) for f in d.feature_names},
        "median": {f: float(np.median(d.column(f))) for f in d.feature_names},
        "std": {f: float(np.std(d.column(f))) for f in d.feature_names},
    }


def _split_spec(args: argparse.Namespace, config: Mapping[str, Any]) -> SplitSpec:
    return SplitSpec(
        train_fraction=float(_cfg(config, "split.train_fraction", 0.7)),
        rng_seed=int(_pick(getattr(args, "split_seed", None), _cfg(config, "split.rng_seed"), 17)),
        stratify_by_label=bool(_cfg(config, "split.stratify_by_label", True)),
    )


def _write_run_sidecar(out: Path, command: str, timings: dict[str, float], extra: dict) -> None:
    payload = {
        "command": command,
        "elapsed_s": round(sum(timings.values()), 6),
        "stage_s": timings,
        "version": __version__,
        **extra,
    }
    (out / f"{command.replace('-', '_')}.run.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    synth = SynthConfig(
        n_rows=int(_pick(args.n, _cfg(config, "synth.n_rows"), 20_000)),
        n_features=int(_pick(args.features, _cfg(config, "synth.n_features"), 40)),
        n_periods=int(_pick(args.periods, _cfg(config, "synth.n_periods"), 4)),
        rng_seed=int(_pick(args.seed, _cfg(config, "synth.rng_seed"), 7)),
        drift=float(_pick(args.drift, _cfg(config, "synth.drift"), 0.05)),
        base_rate=float(_pick(args.base_rate, _cfg(config, "synth.base_rate"), 0.15)),
        missing_rate=float(_pick(args.missing_rate, _cfg(config, "synth.missing_rate"), 0.0)),
        prior_default_rate=float(
            _pick(args.prior_rate, _cfg(config, "synth.prior_default_rate"), 0.0)
        ),
    )
    ds, truth = generate_synthetic(synth)
    data_path = out / "synthetic.csv"
    save_csv(ds, data_path)
    dump_json(truth, out / "ground_truth.json")
    print(f"wrote {data_path} ({ds.n_rows} rows, {ds.n_features} features, "
          f"event rate {ds.y.mean():.3f}) and {out / 'ground_truth.json'}")
    return EXIT_OK


def cmd_prep(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    timings: dict[str, float] = {}
    with _stage("load", timings):
        d = _load_data(args, config)
    d, fills, notes = _prepare(d, config, timings)
    save_csv(d, out / "prepared.csv")
    dump_json(
        {
            "imputation": fills,
            "schema": {
                "label": _schema(config).label,
                "period": _schema(config).period,
                "record_id": _schema(config).record_id,
            },
            **notes,
        },
        out / "prep.json",
    )
    print(f"wrote {out / 'prepared.csv'} ({d.n_rows} rows) and {out / 'prep.json'}")
    return EXIT_OK


def cmd_train_baseline(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    timings: dict[str, float] = {}
    with _stage("load", timings):
        d = _load_data(args, config)
    d, fills, _ = _prepare(d, config, timings)
    with _stage("split", timings):
        train, valid = split(d, _split_spec(args, config))
        save_csv(train, out / "train.csv")
        save_csv(valid, out / "validation.csv")

    binned_cfg = _cfg(config, "baseline.binned")
    if binned_cfg is None:
        k = int(_cfg(config, "baseline.default_bins", 10))
        binned_cfg = {f: k for f in d.feature_names}
    pipeline = BaselinePipeline(
        binned={
            f: how if isinstance(how, int) else tuple(float(x) for x in how)
            for f, how in binned_cfg.items()
        },
        passthrough=tuple(_cfg(config, "baseline.passthrough", [])),
        alpha=float(_cfg(config, "baseline.alpha", 0.05)),
        smoothing=float(_cfg(config, "baseline.smoothing", 0.5)),
        collapse=bool(_cfg(config, "baseline.collapse", True)),
        collapse_alpha=float(_cfg(config, "baseline.collapse_alpha", 0.05)),
        include_odds=bool(_cfg(config, "baseline.include_odds", False)),
    )
    with _stage("train-baseline", timings):
        bm = train_base_model(train, pipeline)
    bm.metadata.update(
        {"imputation": fills, "feature_stats": _feature_stats(train), "trained_rows": train.n_rows}
    )
    model_path = out / "baseline_model.json"
    save_model(bm, model_path)
    _write_run_sidecar(out, "train-baseline", timings, {"rows_train": train.n_rows})
    print(
        f"wrote {model_path}: {len(bm.model.feature_subset)} surviving terms, "
        f"log-likelihood {bm.model.fit_info.log_likelihood:.2f}"
    )
    return EXIT_OK


def cmd_train_ensemble(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    workers = int(_pick(args.workers, _cfg(config, "pool.workers"), 1))
    timings: dict[str, float] = {}
    with _stage("load", timings):
        d = _load_data(args, config)
    d, fills, _ = _prepare(d, config, timings)
    with _stage("split", timings):
        train, valid = split(d, _split_spec(args, config))
        save_csv(train, out / "train.csv")
        save_csv(valid, out / "validation.csv")

    pool_config = PoolConfig(
        samples_per_period=int(_cfg(config, "pool.samples_per_period", 5)),
        feature_fraction=float(_cfg(config, "pool.feature_fraction", 0.25)),
        alpha=float(_cfg(config, "pool.alpha", 0.05)),
        rng_seed=int(_pick(args.seed, _cfg(config, "pool.rng_seed"), 99)),
    )
    with _stage("sample", timings):
        periods = sorted(int(q) for q in np.unique(train.period))
        subsets = sample_feature_subsets(train.feature_names, pool_config, periods)
    with _stage("train-pool", timings):
        pool = train_pool(
            train, subsets, pool_config.alpha, config=pool_config, workers=workers
        )
    with _stage("prediction-matrix", timings):
        pm = build_prediction_matrix(pool, train)
    with _stage("gram", timings):
        gram = build_gram(pm)
    solver_opts = SolverOptions(
        tol=float(_cfg(config, "solver.tol", 1e-10)),
        max_iter=int(_cfg(config, "solver.max_iter", 200_000)),
        sparsity_tol=float(_cfg(config, "solver.sparsity_tol", 1e-8)),
    )
    with _stage("solve-qp", timings):
        solution = solve_simplex_qp(gram, solver_opts)
        certificate = check_kkt(gram, solution)
        if not certificate.passed:
            raise NumericalError(
                f"weight solution failed its KKT certificate (residual {certificate.residual:.3e})"
            )
    with _stage("assemble", timings):
        model = assemble(
            pool, solution, feature_stats=_feature_stats(train), imputation=fills
        )

    pool_dir = out / "pool"
    pool_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": model.metadata["pool_config"],
        "periods": periods,
        "members": [],
        "failures": [],
    }
    for i, member in enumerate(pool.members):
        member_payload = {
            "index": i,
            "period": member.period,
            "sample_index": member.sample_index,
            "drawn_features": list(member.drawn_features),
            "ok": member.ok,
            "failure": member.failure,
            "model": logit_to_dict(member.model) if member.model is not None else None,
        }
        name = f"member_{i:03d}.json"
        dump_json(member_payload, pool_dir / name)
        manifest["members"].append(name)
        if not member.ok:
            manifest["failures"].append({"index": i, "reason": member.failure})
    dump_json(manifest, pool_dir / "manifest.json")

    model_path = out / "ensemble_model.json"
    dump_json(
        {
            **ensemble_to_dict(model),
            "solver_options": {
                "tol": solver_opts.tol,
                "max_iter": solver_opts.max_iter,
                "sparsity_tol": solver_opts.sparsity_tol,
            },
        },
        model_path,
    )
    _write_run_sidecar(
        out,
        "train-ensemble",
        timings,
        {"workers": workers, "pool_size": len(pool.members), "support": len(solution.support)},
    )
    print(
        f"wrote {model_path}: {len(solution.support)} of {len(pool.members)} members "
        f"carry weight, training SSE {solution.objective:.4f}, "
        f"KKT residual {solution.kkt_residual:.2e}"
    )
    return EXIT_OK


def _scores_for(model, d: Dataset) -> np.ndarray:
    meta = getattr(model, "metadata", None) or {}
    fills = meta.get("imputation") or {}
    if d.has_missing():
        d = apply_fills(d, fills)
    return model.predict_dataset(d)


def cmd_score(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    model = load_model(args.model)
    d = _load_data(args, config)
    meta = getattr(model, "metadata", None) or {}
    if d.has_missing():
        d = apply_fills(d, meta.get("imputation") or {})
    scores = model.predict_dataset(d)

    top_n = args.top_n
    if top_n is not None:
        if top_n < 1:
            raise ConfigError(f"--top-n must be >= 1, got {top_n}")
        if not isinstance(model, EnsembleModel):
            raise ConfigError("reason codes (--top-n) need an ensemble model")

    out_path = Path(args.out or "scores.csv")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["record_id", "score"]
        if top_n:
            header += [f"reason_{i + 1}" for i in range(top_n)]
        writer.writerow(header)
        for i in range(d.n_rows):
            cells = [d.record_ids[i], repr(float(scores[i]))]
            if top_n:
                codes = reason_codes(model, d.row(i), top_n=top_n)
                cells += [f"{rc.feature}={rc.delta_p:+.6f}" for rc in codes]
                cells += [""] * (top_n - len(codes))
            writer.writerow(cells)
    print(f"wrote {out_path} ({d.n_rows} rows)")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    model = load_model(args.model)
    d = _load_data(args, config)
    out = _out_dir(args, config)
    kind = "ensemble" if isinstance(model, EnsembleModel) else "baseline"
    prefix = args.prefix or kind

    scores = _scores_for(model, d)
    report = evaluate(scores, d.y)
    series = evaluate_over_time(lambda part: _scores_for(model, part), d)

    dump_json(
        {
            "ks": report.ks,
            "ks_decile": report.ks_decile,
            "concordance_pct": report.concordance_pct,
            "discordance_pct": report.discordance_pct,
            "tied_pct": report.tied_pct,
            "n_rows": report.n_rows,
            "n_events": report.n_events,
            "decile_table": [
                {
                    "decile": r.decile,
                    "n": r.n,
                    "events": r.events,
                    "event_rate": r.event_rate,
                    "cum_event_share": r.cum_event_share,
                    "cum_nonevent_share": r.cum_nonevent_share,
                }
                for r in report.decile_table
            ],
            "by_period": [
                {"period": p.period, "ks": p.ks, "n": p.n, "events": p.events} for p in series
            ],
        },
        out / f"{prefix}_report.json",
    )
    with (out / f"{prefix}_by_period.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period", "ks", "n", "events"])
        for p in series:
            writer.writerow([p.period, f"{100.0 * p.ks:.4f}", p.n, p.events])
    save_decile_chart(report, out / f"{prefix}_decile_chart.png", title=f"{kind}: class mix by decile")
    save_ks_over_time(series, out / f"{prefix}_ks_over_time.png", title=f"{kind}: KS by period")

    print(f"model: {kind} ({args.model})")
    print(f"rows {report.n_rows}  events {report.n_events}")
    print(f"KS (score grain)   {100.0 * report.ks:6.2f}")
    print(f"KS (decile grain)  {100.0 * report.ks_decile:6.2f}")
    print(
        f"concordance %      {report.concordance_pct:6.2f}   "
        f"discordant {report.discordance_pct:.2f}   tied {report.tied_pct:.2f}"
    )
    print("decile      n  events   rate   cum_ev  cum_non")
    for r in report.decile_table:
        print(
            f"{r.decile:>6} {r.n:>6} {r.events:>7} {r.event_rate:6.3f} "
            f"{r.cum_event_share:8.3f} {r.cum_nonevent_share:8.3f}"
        )
    if series:
        per = "  ".join(f"{p.period}:{100.0 * p.ks:.1f}" for p in series)
        print(f"KS by period: {per}")
    print(f"artifacts under {out}/{prefix}_*")
    return EXIT_OK


def cmd_explain(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    model = load_model(args.model)
    if not isinstance(model, EnsembleModel):
        raise ConfigError("explain needs an ensemble model")
    d = _load_data(args, config)
    meta = model.metadata or {}
    if d.has_missing():
        d = apply_fills(d, meta.get("imputation") or {})

    deltas = None
    if args.deltas_json:
        deltas = {str(k): float(v) for k, v in json.loads(Path(args.deltas_json).read_text()).items()}

    if args.row_id:
        wanted = set(args.row_id)
        rows = [i for i, rid in enumerate(d.record_ids) if rid in wanted]
        missing_ids = wanted - {d.record_ids[i] for i in rows}
        if missing_ids:
            raise DataError(f"record ids not found: {sorted(missing_ids)}")
    else:
        rows = list(range(min(args.limit, d.n_rows)))

    out_path = Path(args.out or "explain.csv")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    top_n = args.top_n or len(model.required_features)
    with out_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["record_id", "score", "rank", "feature", "derivative", "delta_x", "delta_p", "out_of_range"]
        )
        for i in rows:
            rep = sensitivity_report(model, d.record_ids[i], d.row(i), deltas)
            for rank, feature in enumerate(rep.ranking[:top_n], start=1):
                dp = rep.deltas[feature]
                writer.writerow(
                    [
                        rep.row_id,
                        repr(rep.score),
                        rank,
                        feature,
                        repr(rep.derivatives[feature]),
                        repr(rep.delta_xs[feature]),
                        repr(dp.value),
                        int(dp.out_of_range),
                    ]
                )
    print(f"wrote {out_path} ({len(rows)} records)")
    return EXIT_OK


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="logitblend", description=__doc__)
    parser.add_argument("--version", action="version", version=f"logitblend {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--out-dir", help="artifact directory (default: out)")

    p = sub.add_parser("synth", help="generate a seeded synthetic portfolio CSV")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--features", type=int)
    p.add_argument("--periods", type=int)
    p.add_argument("--drift", type=float)
    p.add_argument("--base-rate", type=float)
    p.add_argument("--missing-rate", type=float)
    p.add_argument("--prior-rate", type=float)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prep", help="clean, filter and impute a raw CSV")
    common(p)
    p.add_argument("--data", help="input CSV (or config data.csv)")
    p.set_defaults(func=cmd_prep)

    p = sub.add_parser("train-baseline", help="train the binned-benchmark single model")
    common(p)
    p.add_argument("--data")
    p.add_argument("--split-seed", type=int, dest="split_seed")
    p.set_defaults(func=cmd_train_baseline)

    p = sub.add_parser("train-ensemble", help="train the subset-model pool and blend it")
    common(p)
    p.add_argument("--data")
    p.add_argument("--seed", type=int, help="pool sampling seed")
    p.add_argument("--split-seed", type=int, dest="split_seed")
    p.add_argument("--workers", type=int, help="parallel member fits (default 1)")
    p.set_defaults(func=cmd_train_ensemble)

    p = sub.add_parser("score", help="batch-score a CSV with a saved model")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--config")
    p.add_argument("--out", help="output CSV (default scores.csv)")
    p.add_argument("--top-n", type=int, dest="top_n", help="append N reason-code columns")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="KS/concordance report, decile chart, drift chart")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--config")
    p.add_argument("--out-dir")
    p.add_argument("--prefix", help="artifact name prefix (default: model kind)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("explain", help="per-record sensitivity breakdown")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--config")
    p.add_argument("--out", help="output CSV (default explain.csv)")
    p.add_argument("--row-id", action="append", help="explain this record id (repeatable)")
    p.add_argument("--limit", type=int, default=10, help="records to explain when no --row-id")
    p.add_argument("--top-n", type=int, dest="top_n")
    p.add_argument("--deltas-json", help="JSON file mapping feature -> delta_x")
    p.set_defaults(func=cmd_explain)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return int(args.func(args) or EXIT_OK)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except LogitblendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
