"""Command-line front end: generate, run, influence, evaluate, report.

Experiments are JSON documents; every run writes CSV artifacts plus a
manifest sufficient to reproduce it bit-for-bit, and the report path
renders matplotlib figures next to the aggregated tables. Exit codes:
0 success, 2 config error, 3 data error, 4 divergence.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .data import (Dataset, NoiseSpec, PatternParams, build_validation_set,
                   generate_synthetic_ds, load_dataset, save_dataset, summarize)
from .errors import (ConfigError, ContractViolation, DivergenceError,
                     SchemaError, SingularHessianError)
from .evaluation import (bag_level_predict, noise_detection_report, pr_curve,
                         precision_at_n, read_pr_csv, write_noise_csv,
                         write_patn_csv, write_pr_csv)
from .influence import (LissaParams, aggregate_validation_gradient,
                        exact_inverse_hvp, influence_matrix, influence_scores,
                        lissa_inverse_hvp, read_influence_csv,
                        write_influence_csv)
from .model import load_model, save_model
from .sampling import SamplerConfig, write_selection_csv
from .trainer import (BASELINE_STRATEGIES, INFLUENCE_STRATEGIES, RunConfig,
                      read_history_csv, train, write_history_csv)
from . import reporting

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4

WORKERS_ENV = "INFSAMP_MAX_WORKERS"

_LISSA_DEFAULTS = dict(batch_size=32, max_iters=5000, scale=10.0,
                       damping=0.01, tol=1e-6, seed=0)
_RUN_KEYS = {"epochs", "batch_bags", "alpha", "ratio", "min_keep_per_bag",
             "learning_rate", "lambda_reg", "epoch1_policy",
             "fallback_to_exact", "lissa"}


def _load_json(path, what: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"{what} file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{what} file {path} must hold a JSON object")
    return doc


def _noise_spec(doc: dict) -> NoiseSpec:
    doc = dict(doc)
    size = doc.pop("bag_size", {})
    if not isinstance(size, dict):
        raise ConfigError("'bag_size' must be an object {min, max, shape}")
    kwargs = {
        "bag_size_min": size.get("min", 2),
        "bag_size_max": size.get("max", 10),
        "bag_size_shape": size.get("shape", 1.0),
    }
    known = {"num_relations", "feature_dim", "num_bags", "noise_rate",
             "na_fraction", "na_noise_weight", "class_separation",
             "relation_weights", "test_fraction", "seed"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown generator key(s): {sorted(unknown)}")
    kwargs.update(doc)
    if "relation_weights" in kwargs and kwargs["relation_weights"] is not None:
        kwargs["relation_weights"] = tuple(kwargs["relation_weights"])
    try:
        return NoiseSpec(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"generator config: {exc}") from exc
    except ContractViolation as exc:
        raise ConfigError(f"generator config: {exc}") from exc


def _print_dataset_summary(ds: Dataset) -> None:
    stats = summarize(ds)
    width = max(len(k) for k in stats)
    print("dataset summary")
    for key, val in stats.items():
        if isinstance(val, float):
            val = f"{val:.4f}"
        print(f"  {key:<{width}}  {val}")


# ---- generate ---------------------------------------------------------------

def cmd_generate(args) -> int:
    spec = _noise_spec(_load_json(args.config, "generator config"))
    ds = generate_synthetic_ds(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, out)
    print(f"wrote {len(ds.instances)} instances to {out}")
    _print_dataset_summary(ds)
    return EXIT_OK


# ---- run --------------------------------------------------------------------

def _run_config(exp: dict, strategy: str, ratio: float | None,
                seed: int) -> RunConfig:
    run = exp.get("run", {})
    unknown = set(run) - _RUN_KEYS
    if unknown:
        raise ConfigError(f"unknown run key(s): {sorted(unknown)}")
    lissa_doc = {**_LISSA_DEFAULTS, **run.get("lissa", {})}
    unknown = set(lissa_doc) - set(_LISSA_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown lissa key(s): {sorted(unknown)}")
    sampler = SamplerConfig(
        alpha=run.get("alpha", 1.0),
        ratio=ratio if ratio is not None else run.get("ratio", 0.10),
        seed=seed,
        min_keep_per_bag=run.get("min_keep_per_bag", 1),
    )
    try:
        return RunConfig(
            epochs=run.get("epochs", 30),
            batch_bags=run.get("batch_bags", 16),
            strategy=strategy,
            sampler=sampler,
            lissa=LissaParams(**lissa_doc),
            learning_rate=run.get("learning_rate", 0.1),
            lambda_reg=run.get("lambda_reg", 1e-2),
            seed=seed,
            epoch1_policy=run.get("epoch1_policy", "uniform"),
            fallback_to_exact=run.get("fallback_to_exact", False),
        )
    except ContractViolation as exc:
        raise ConfigError(f"run config: {exc}") from exc


def _grid(exp: dict) -> list[dict]:
    grid = exp.get("grid")
    if not grid or not grid.get("strategies") or not grid.get("seeds"):
        raise ConfigError("experiment needs grid.strategies and grid.seeds")
    strategies = grid["strategies"]
    ratios = grid.get("ratios", [None])
    seeds = grid["seeds"]
    known = INFLUENCE_STRATEGIES + BASELINE_STRATEGIES
    runs = []
    for seed in seeds:
        for strategy in strategies:
            if strategy not in known:
                raise ConfigError(f"unknown strategy {strategy!r} "
                                  f"(choose from {known})")
            if strategy in INFLUENCE_STRATEGIES:
                for ratio in ratios:
                    rid = f"{strategy}_r{ratio:g}_s{seed}" \
                        if ratio is not None else f"{strategy}_s{seed}"
                    runs.append({"run_id": rid, "strategy": strategy,
                                 "ratio": ratio, "seed": seed})
            else:
                runs.append({"run_id": f"{strategy}_s{seed}",
                             "strategy": strategy, "ratio": None,
                             "seed": seed})
    if not runs:
        raise ConfigError("experiment grid is empty")
    return runs


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _prepare_dataset(exp: dict, exp_dir: Path) -> Path:
    doc = exp.get("dataset")
    if not doc or "path" not in doc:
        raise ConfigError("experiment needs dataset.path")
    path = Path(doc["path"])
    if not path.is_absolute():
        path = exp_dir / path
    if "generate" in doc and not path.exists():
        spec = _noise_spec(doc["generate"])
        path.parent.mkdir(parents=True, exist_ok=True)
        save_dataset(generate_synthetic_ds(spec), path)
    if not path.exists():
        raise ConfigError(f"dataset file {path} does not exist and no "
                          "generator was configured")
    return path


def _split_validation(ds: Dataset, exp: dict) -> tuple[Dataset, Dataset]:
    """(validation dataset, remaining dataset) from file split or bootstrap."""
    val_ids = ds.ids("validation")
    if val_ids:
        rest_ids = [i for i in ds.instances if i not in set(val_ids)]
        val = Dataset([ds.instances[i] for i in val_ids],
                      num_relations=ds.num_relations)
        rest = Dataset([ds.instances[i] for i in rest_ids],
                       num_relations=ds.num_relations)
        return val, rest
    val_doc = exp.get("validation", {})
    return build_validation_set(
        ds,
        target_fraction=val_doc.get("target_fraction", 0.10),
        params=PatternParams(bins=val_doc.get("bins", 3)),
    )


def _final_influence_report(model, rest: Dataset, val: Dataset,
                            config: RunConfig):
    """Per-instance scores on the final weights, on a dedicated RNG stream."""
    X, y, ids = rest.arrays("train")
    Xv, yv, _ = val.arrays(None)
    v = aggregate_validation_gradient(model, Xv, yv)
    params = replace(config.lissa, seed=config.seed)
    s = lissa_inverse_hvp(model, X, y, v, params, epoch=config.epochs)
    return influence_scores(s, model, X, y, ids, alpha=config.sampler.alpha,
                            epoch=config.epochs)


def _execute_run(exp: dict, run_spec: dict, out_root: str,
                 exp_dir: str) -> dict:
    run_dir = Path(out_root) / "runs" / run_spec["run_id"]
    run_dir.mkdir(parents=True, exist_ok=True)
    config = _run_config(exp, run_spec["strategy"], run_spec["ratio"],
                         run_spec["seed"])
    dataset_path = _prepare_dataset(exp, Path(exp_dir))
    manifest = {
        "run_id": run_spec["run_id"],
        "strategy": run_spec["strategy"],
        "ratio": run_spec["ratio"],
        "seed": run_spec["seed"],
        "dataset_path": str(dataset_path),
        "dataset_sha256": _sha256_file(dataset_path),
        "package_version": __version__,
        "config": _config_dict(config),
        "status": "running",
    }
    manifest["config_hash"] = _config_hash(manifest)
    try:
        ds = load_dataset(dataset_path)
        val, rest = _split_validation(ds, exp)
        model, history = train(rest, val, config)
        write_history_csv(history, run_dir / "history.csv")
        save_model(model, run_dir / "model.npz")

        report = _final_influence_report(model, rest, val, config)
        bag_of = {i: rest.instances[i].bag_id for i in report.phi}
        write_influence_csv(report, bag_of, run_dir / "influences.csv")
        if rest.gold(rest.ids("train")) is not None:
            write_noise_csv(noise_detection_report(report, rest),
                            run_dir / "noise_report.csv")
        if history.last_selection is not None and history.last_phis:
            write_selection_csv(history.last_selection, history.last_phis,
                                bag_of, run_dir / "selections.csv",
                                epoch=config.epochs,
                                alpha=config.sampler.alpha)

        test_bags = rest.bags_in_split("test")
        if test_bags:
            preds = bag_level_predict(model, rest, split="test")
            gold = {b.bag_id: b.relation_label for b in test_bags}
            write_pr_csv(pr_curve(preds, gold), run_dir / "pr_curve.csv")
            ns = [n for n in exp.get("evaluation", {}).get("patn", [10, 20, 30])
                  if n <= len(preds)]
            write_patn_csv([(n, precision_at_n(preds, gold, n)) for n in ns],
                           run_dir / "patn.csv")
        manifest["status"] = "complete"
        manifest["wall_clock"] = history.wall_clock
    except Exception as exc:  # per-run isolation; summary records the reason
        manifest["status"] = "failed"
        manifest["reason"] = f"{type(exc).__name__}: {exc}"
        _write_manifest(manifest, run_dir)
        return {"run_id": run_spec["run_id"], "status": "failed",
                "reason": manifest["reason"],
                "diverged": isinstance(exc, (DivergenceError,
                                             SingularHessianError))}
    _write_manifest(manifest, run_dir)
    return {"run_id": run_spec["run_id"], "status": "complete", "reason": ""}


def _config_dict(config: RunConfig) -> dict:
    return {
        "epochs": config.epochs, "batch_bags": config.batch_bags,
        "strategy": config.strategy,
        "sampler": {"alpha": config.sampler.alpha,
                    "ratio": config.sampler.ratio,
                    "min_keep_per_bag": config.sampler.min_keep_per_bag},
        "lissa": {"batch_size": config.lissa.batch_size,
                  "max_iters": config.lissa.max_iters,
                  "scale": config.lissa.scale,
                  "damping": config.lissa.damping,
                  "tol": config.lissa.tol},
        "learning_rate": config.learning_rate,
        "lambda_reg": config.lambda_reg,
        "seed": config.seed,
        "epoch1_policy": config.epoch1_policy,
        "fallback_to_exact": config.fallback_to_exact,
    }


def _config_hash(manifest: dict) -> str:
    basis = {k: manifest[k] for k in
             ("strategy", "ratio", "seed", "dataset_sha256", "config")}
    return hashlib.sha256(
        json.dumps(basis, sort_keys=True).encode()).hexdigest()


def _write_manifest(manifest: dict, run_dir: Path) -> None:
    with open(run_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _already_complete(run_dir: Path, exp, run_spec, exp_dir) -> bool:
    path = run_dir / "manifest.json"
    if not path.exists():
        return False
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError:
        return False
    if manifest.get("status") != "complete":
        return False
    config = _run_config(exp, run_spec["strategy"], run_spec["ratio"],
                         run_spec["seed"])
    dataset_path = _prepare_dataset(exp, Path(exp_dir))
    probe = {"strategy": run_spec["strategy"], "ratio": run_spec["ratio"],
             "seed": run_spec["seed"],
             "dataset_sha256": _sha256_file(dataset_path),
             "config": _config_dict(config)}
    return manifest.get("config_hash") == _config_hash(probe)


def _summarize_runs(exp: dict, out_root: Path, rows: list[dict],
                    dataset_path: Path) -> None:
    """Build summary.csv strictly by re-reading the per-run artifacts."""
    ds = load_dataset(dataset_path)
    gold_available = ds.gold(ds.ids()) is not None
    ns = exp.get("evaluation", {}).get("patn", [10, 20, 30])
    fieldnames = ["run_id", "strategy", "ratio", "seed", "status",
                  "final_val_loss", "mean_clean_fraction_selected", "pr_auc",
                  *(f"patn_{n}" for n in ns), "noise_auroc", "reason"]
    out_rows = []
    for row in sorted(rows, key=lambda r: r["run_id"]):
        run_dir = out_root / "runs" / row["run_id"]
        manifest = json.loads((run_dir / "manifest.json").read_text())
        rec = {"run_id": row["run_id"], "strategy": manifest["strategy"],
               "ratio": "" if manifest["ratio"] is None else manifest["ratio"],
               "seed": manifest["seed"], "status": manifest["status"],
               "reason": manifest.get("reason", "")}
        if manifest["status"] == "complete":
            hist = read_history_csv(run_dir / "history.csv")
            rec["final_val_loss"] = hist[-1]["val_loss"]
            fracs = [float(h["clean_fraction_selected"]) for h in hist]
            fracs = [f for f in fracs if not math.isnan(f)]
            rec["mean_clean_fraction_selected"] = \
                repr(sum(fracs) / len(fracs)) if fracs else ""
            pr_path = run_dir / "pr_curve.csv"
            if pr_path.exists():
                rec["pr_auc"] = repr(read_pr_csv(pr_path).auc)
            patn_path = run_dir / "patn.csv"
            if patn_path.exists():
                for prow in csv.DictReader(open(patn_path, newline="")):
                    rec[f"patn_{prow['n']}"] = prow["precision"]
            if gold_available:
                inf = read_influence_csv(run_dir / "influences.csv")
                nd = noise_detection_report(inf, ds)
                rec["noise_auroc"] = repr(nd.auroc)
        out_rows.append({k: rec.get(k, "") for k in fieldnames})
    with open(out_root / "summary.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(out_rows)


def cmd_run(args) -> int:
    exp_path = Path(args.experiment)
    exp = _load_json(exp_path, "experiment")
    exp_dir = exp_path.resolve().parent
    out_root = Path(exp.get("output_dir", "out"))
    if not out_root.is_absolute():
        out_root = exp_dir / out_root
    out_root.mkdir(parents=True, exist_ok=True)
    runs = _grid(exp)
    dataset_path = _prepare_dataset(exp, exp_dir)

    pending, results = [], []
    for spec in runs:
        run_dir = out_root / "runs" / spec["run_id"]
        if args.resume and _already_complete(run_dir, exp, spec, exp_dir):
            print(f"skip {spec['run_id']} (complete)")
            results.append({"run_id": spec["run_id"], "status": "complete",
                            "reason": ""})
            continue
        pending.append(spec)

    workers = args.workers or int(os.environ.get(WORKERS_ENV, "1"))
    if workers > 1 and len(pending) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
            futs = {ex.submit(_execute_run, exp, spec, str(out_root),
                              str(exp_dir)): spec for spec in pending}
            for fut in concurrent.futures.as_completed(futs):
                results.append(fut.result())
    else:
        for spec in pending:
            results.append(_execute_run(exp, spec, str(out_root),
                                        str(exp_dir)))

    _summarize_runs(exp, out_root, results, dataset_path)
    failed = [r for r in results if r["status"] != "complete"]
    for r in sorted(results, key=lambda r: r["run_id"]):
        tag = "ok " if r["status"] == "complete" else "FAIL"
        print(f"{tag} {r['run_id']}" + (f"  ({r['reason']})" if r["reason"]
                                        else ""))
    print(f"summary: {out_root / 'summary.csv'}")
    if len(failed) == len(results):
        return EXIT_DIVERGED if any(r.get("diverged") for r in failed) \
            else EXIT_CONFIG
    return EXIT_OK


# ---- influence --------------------------------------------------------------

def _parse_ids(text: str | None) -> list[int] | None:
    if text is None:
        return None
    return [int(tok) for tok in text.split(",") if tok.strip()]


def cmd_influence(args) -> int:
    model = load_model(args.model)
    ds = load_dataset(args.data)
    score_ids = ds.ids(args.split) or ds.ids(None)
    if not score_ids:
        raise ContractViolation(f"no instances in split {args.split!r}")
    val_ids = ds.ids(args.val_split)
    if not val_ids:
        raise ContractViolation(
            f"no instances in validation split {args.val_split!r}; "
            "build one with the experiment pipeline or tag records"
        )
    X_train, y_train, _ = ds.arrays("train")
    if len(X_train) == 0:
        X_train, y_train, _ = ds.arrays(None)
    Xs, ys = ds.features(score_ids), ds.labels(score_ids)
    Xv, yv = ds.features(val_ids), ds.labels(val_ids)
    v = aggregate_validation_gradient(model, Xv, yv)
    if args.method == "exact":
        s = exact_inverse_hvp(model, X_train, y_train, v, damping=args.damping)
    else:
        params = LissaParams(batch_size=args.lissa_batch_size,
                             max_iters=args.lissa_max_iters,
                             scale=args.lissa_scale, damping=args.damping,
                             tol=args.lissa_tol, seed=args.seed)
        s = lissa_inverse_hvp(model, X_train, y_train, v, params)
    report = influence_scores(s, model, Xs, ys, score_ids, alpha=args.alpha)
    bag_of = {i: ds.instances[i].bag_id for i in score_ids}
    write_influence_csv(report, bag_of, args.out)
    print(f"wrote {len(score_ids)} influence rows to {args.out}")

    if args.pairwise:
        t_ids = _parse_ids(args.pairwise_train_ids) or score_ids
        v_ids = _parse_ids(args.pairwise_val_ids) or val_ids
        pair_report = influence_matrix(
            model,
            (ds.features(t_ids), ds.labels(t_ids), t_ids),
            (ds.features(v_ids), ds.labels(v_ids), v_ids),
            method=args.method, damping=args.damping,
            lissa_params=LissaParams(batch_size=args.lissa_batch_size,
                                     max_iters=args.lissa_max_iters,
                                     scale=args.lissa_scale,
                                     damping=args.damping,
                                     tol=args.lissa_tol, seed=args.seed)
            if args.method == "lissa" else None,
            alpha=args.alpha, max_pairs=args.max_pairs)
        with open(args.pairwise, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["instance_id", "val_instance_id", "phi"])
            for (ti, vj), val in sorted(pair_report.pairwise.items()):
                w.writerow([ti, vj, repr(val)])
        print(f"wrote {len(pair_report.pairwise)} pair scores to "
              f"{args.pairwise}")
    return EXIT_OK


# ---- evaluate ---------------------------------------------------------------

def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    ds = load_dataset(args.data)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bags = ds.bags_in_split(args.split)
    if not bags:
        raise ContractViolation(f"no bags in split {args.split!r}")
    preds = bag_level_predict(model, ds, split=args.split)
    gold = {b.bag_id: b.relation_label for b in bags}
    curve = pr_curve(preds, gold)
    write_pr_csv(curve, out_dir / "pr_curve.csv")
    ns = [int(tok) for tok in args.patn.split(",") if tok.strip()]
    rows = [(n, precision_at_n(preds, gold, n)) for n in ns
            if n <= len(preds)]
    write_patn_csv(rows, out_dir / "patn.csv")
    print(f"bags: {len(preds)}   PR-AUC: {curve.auc:.4f}")
    for n, p in rows:
        print(f"P@{n}: {p:.4f}")
    if args.influences:
        report = read_influence_csv(args.influences)
        nd = noise_detection_report(report, ds)
        write_noise_csv(nd, out_dir / "noise_report.csv")
        print(f"noise AUROC: {nd.auroc:.4f}")
    return EXIT_OK


# ---- report -----------------------------------------------------------------

def cmd_report(args) -> int:
    runs_root = Path(args.runs)
    summary_path = runs_root / "summary.csv"
    if not summary_path.exists():
        raise ConfigError(f"{summary_path} not found; run an experiment first")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(summary_path, newline="") as fh:
        summary = [dict(row) for row in csv.DictReader(fh)]
    complete = [r for r in summary if r["status"] == "complete"]

    pr_series, clean_series, loss_series, noise_series = [], [], [], []
    for row in complete:
        run_dir = runs_root / "runs" / row["run_id"]
        pr_path = run_dir / "pr_curve.csv"
        if pr_path.exists():
            curve = read_pr_csv(pr_path)
            pr_series.append((row["run_id"], curve.recalls, curve.precisions))
        hist = read_history_csv(run_dir / "history.csv")
        epochs = [int(h["epoch"]) for h in hist]
        fracs = [float(h["clean_fraction_selected"]) for h in hist]
        if any(not math.isnan(f) for f in fracs):
            clean_series.append((row["run_id"], epochs, fracs))
        loss_series.append((row["run_id"], epochs,
                            [float(h["val_loss"]) for h in hist]))
        noise_path = run_dir / "noise_report.csv"
        if noise_path.exists():
            with open(noise_path, newline="") as fh:
                nrows = list(csv.DictReader(fh))
            noise_series.append((row["run_id"],
                                 [int(r["k"]) for r in nrows],
                                 [float(r["clean_fraction"]) for r in nrows]))

    figures = []
    if pr_series:
        reporting.fig_pr_curves(pr_series, out_dir / "pr_curves.png")
        figures.append("pr_curves.png")
    ratio_rows = [r for r in complete if r.get("ratio") and r.get("pr_auc")]
    if len({r["ratio"] for r in ratio_rows}) > 1:
        reporting.fig_ratio_sweep(ratio_rows, out_dir / "ratio_sweep.png")
        figures.append("ratio_sweep.png")
    if clean_series:
        reporting.fig_clean_fraction(clean_series,
                                     out_dir / "clean_fraction.png")
        figures.append("clean_fraction.png")
    if noise_series:
        reporting.fig_noise_detection(noise_series,
                                      out_dir / "noise_detection.png")
        figures.append("noise_detection.png")
    if loss_series:
        reporting.fig_val_loss(loss_series, out_dir / "val_loss.png")
        figures.append("val_loss.png")

    # aggregate table recomputed from the summary rows
    grouped: dict[tuple[str, str], list[float]] = {}
    for row in complete:
        if row.get("pr_auc"):
            grouped.setdefault((row["strategy"], row["ratio"]), []) \
                .append(float(row["pr_auc"]))
    with open(out_dir / "report_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["strategy", "ratio", "runs", "mean_pr_auc", "std_pr_auc"])
        for (strategy, ratio), aucs in sorted(grouped.items()):
            mean = sum(aucs) / len(aucs)
            std = math.sqrt(sum((a - mean) ** 2 for a in aucs)
                            / max(len(aucs) - 1, 1)) if len(aucs) > 1 else 0.0
            w.writerow([strategy, ratio, len(aucs), repr(mean), repr(std)])
    print(f"report written to {out_dir} "
          f"({', '.join(figures) if figures else 'no figures'})")
    return EXIT_OK


# ---- entry point ------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="infsamp",
        description="Influence-guided subsampling experiments for noisy "
                    "bag-labeled data",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic JSONL dataset")
    p.add_argument("--config", required=True, help="generator config (JSON)")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="execute an experiment grid")
    p.add_argument("--experiment", required=True, help="experiment spec (JSON)")
    p.add_argument("--resume", action="store_true",
                   help="skip runs whose manifest is complete and matching")
    p.add_argument("--workers", type=int, default=0,
                   help=f"parallel run processes (default ${WORKERS_ENV} or 1)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("influence", help="score instances on a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="influences CSV path")
    p.add_argument("--split", default="train", help="instances to score")
    p.add_argument("--val-split", default="validation")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--method", choices=("exact", "lissa"), default="exact")
    p.add_argument("--damping", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lissa-batch-size", type=int, default=32)
    p.add_argument("--lissa-max-iters", type=int, default=5000)
    p.add_argument("--lissa-scale", type=float, default=10.0)
    p.add_argument("--lissa-tol", type=float, default=1e-6)
    p.add_argument("--pairwise", help="also write per-pair scores to this CSV")
    p.add_argument("--pairwise-train-ids", help="comma-separated instance ids")
    p.add_argument("--pairwise-val-ids", help="comma-separated instance ids")
    p.add_argument("--max-pairs", type=int, default=10_000)
    p.set_defaults(func=cmd_influence)

    p = sub.add_parser("evaluate", help="bag-level held-out evaluation")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--patn", default="10,20,30",
                   help="comma-separated N values for P@N")
    p.add_argument("--influences",
                   help="influences CSV; adds noise_report.csv when gold "
                        "labels exist")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="render figures and aggregate tables")
    p.add_argument("--runs", required=True,
                   help="experiment output directory (holds summary.csv)")
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemaError, ContractViolation) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DivergenceError, SingularHessianError) as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
