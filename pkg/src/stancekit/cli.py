"""Command-line pipeline driver.

Subcommands: ingest, cluster, sample, diagnose, train, eval, sweep, loo.
Every command writes its artifacts plus a manifest hashing all inputs and
outputs. Option precedence is flags > config file (TOML or JSON) > defaults.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical
failure.
"""

import os

# Pin BLAS to one thread before numpy loads anywhere in this process: output
# must be bit-identical regardless of the machine's core count.
for _var in (
    "OPENBLAS_NUM_THREADS",
    "OMP_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
):
    os.environ[_var] = "1"

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import (
    LABEL_ORDER,
    Corpus,
    StanceLabel,
    ingest_dataset,
    read_corpus,
    split_leave_one_out,
    write_corpus,
)
from .diagnostics import classification_metrics, imbalance_report, write_report_csvs
from .embeddings import read_matrix, write_matrix
from .errors import DataError, NumericalError, StancekitError, UsageError
from .manifest import write_manifest
from .sampler import (
    SamplerConfig,
    read_subset,
    sample_random,
    sample_stratified,
    sample_topic_efficient,
)
from .synthetic import SyntheticConfig, generate
from .topics import default_cluster_count, export_clustering, fit_spherical_kmeans, import_clustering, within_cluster_cosine
from .trainer import TrainConfig, load_checkpoint, save_checkpoint, train, write_history_csv

log = logging.getLogger("stancekit")

SAMPLE_METHODS = ("topic", "random", "stratified")


class _Parser(argparse.ArgumentParser):
    """argparse that raises UsageError instead of exiting with code 2."""

    def error(self, message):
        raise UsageError(message)


def _load_config_file(path: Path) -> dict:
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        loaded = json.loads(text)
    else:
        try:
            import tomllib as toml_mod  # py311+
        except ModuleNotFoundError:
            import tomli as toml_mod
        loaded = toml_mod.loads(text)
    if not isinstance(loaded, dict):
        raise UsageError(f"config file must hold a table/object: {path}")
    return loaded


def _merge_config(args: argparse.Namespace, defaults: dict) -> argparse.Namespace:
    """Fill unset options from the config file, then from defaults.

    Every option is declared with default=None so that 'explicitly passed'
    is distinguishable; booleans use store_true with default=None likewise.
    """
    file_cfg = {}
    if getattr(args, "config", None):
        file_cfg = _load_config_file(Path(args.config))
        unknown = [k for k in file_cfg if k not in defaults]
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key, default in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, file_cfg.get(key, default))
    return args


def _require(path, role: str, stage: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing {role}: {path} (run the {stage} stage first)")
    return path


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _budget_size(budget: float, n: int) -> int:
    if not 0.0 < budget <= 1.0:
        raise UsageError(f"budget must lie in (0, 1], got {budget}")
    return max(1, int(math.floor(budget * n)))


def _parse_overrides(pairs) -> dict:
    overrides = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise UsageError(f"label override must look like raw=Label: {pair!r}")
        raw, name = pair.split("=", 1)
        try:
            overrides[raw.strip().lower()] = StanceLabel.from_name(name.strip())
        except Exception:
            raise UsageError(f"unknown canonical label in override: {name!r}") from None
    return overrides


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

_INGEST_DEFAULTS = {
    "format": "jsonl",
    "text_field": "text",
    "topic_field": "topic",
    "label_field": "label",
    "id_field": None,
    "synthetic": None,
    "seed": 0,
    "dims": 16,
    "topic_sizes": "1000,100,10",
    "label_scale": 0.35,
    "noise_scale": 1.0,
    "rare_spread": 0.55,
    "label_concentration": 0.4,
    "eval_fraction": 0.25,
}


def cmd_ingest(args) -> int:
    out = _outdir(args)
    corpus_path = out / "corpus.jsonl"
    config_echo = {k: getattr(args, k, None) for k in _INGEST_DEFAULTS}
    config_echo["out"] = str(out)
    inputs = {}
    outputs = {"corpus": corpus_path}

    if args.synthetic:
        sizes = tuple(int(s) for s in str(args.topic_sizes).split(",") if s.strip())
        cfg = SyntheticConfig(
            seed=args.seed,
            dims=args.dims,
            topic_sizes=sizes,
            label_scale=args.label_scale,
            noise_scale=args.noise_scale,
            rare_spread=args.rare_spread,
            label_concentration=args.label_concentration,
            eval_fraction=args.eval_fraction,
        )
        bundle = generate(cfg)
        write_corpus(bundle.corpus, corpus_path)
        write_matrix(bundle.matrix, out / "embeddings.tseb")
        outputs["embeddings"] = out / "embeddings.tseb"
        if len(bundle.eval_corpus):
            write_corpus(bundle.eval_corpus, out / "eval_corpus.jsonl")
            write_matrix(bundle.eval_matrix, out / "eval_embeddings.tseb")
            outputs["eval_corpus"] = out / "eval_corpus.jsonl"
            outputs["eval_embeddings"] = out / "eval_embeddings.tseb"
        log.info("synthetic corpus: %d docs, %d topics", len(bundle.corpus), len(sizes))
    else:
        if not args.input:
            raise UsageError("ingest needs --input name=path (repeatable) or --synthetic")
        overrides = _parse_overrides(args.label_override)
        docs = []
        n_skipped = 0
        for pair in args.input:
            if "=" not in pair:
                raise UsageError(f"--input must look like name=path: {pair!r}")
            name, path = pair.split("=", 1)
            src = _require(path, f"input file for {name!r}", "ingest")
            inputs[f"raw:{name}"] = src
            result = ingest_dataset(
                src,
                dataset_name=name,
                format=args.format,
                text_field=args.text_field,
                topic_field=args.topic_field,
                label_field=args.label_field,
                id_field=args.id_field,
                label_overrides=overrides,
            )
            docs.extend(result.documents)
            n_skipped += len(result.errors)
            for err in result.errors:
                log.warning("%s line %d: %s", name, err.line, err.message)
        corpus = Corpus(documents=tuple(docs))
        write_corpus(corpus, corpus_path)
        log.info("ingested %d documents (%d records skipped)", len(corpus), n_skipped)

    write_manifest(out / "ingest_manifest.json", "ingest", config_echo, inputs, outputs)
    return 0


_CLUSTER_DEFAULTS = {"t": None, "seed": 0, "max_iter": 100}


def cmd_cluster(args) -> int:
    out = _outdir(args)
    emb_path = _require(args.embeddings, "embeddings", "ingest")
    m = read_matrix(emb_path)
    t = args.t if args.t is not None else default_cluster_count(m.n)
    clustering = fit_spherical_kmeans(m, t=t, seed=args.seed, max_iter=args.max_iter)
    cluster_path = out / "clustering.json"
    export_clustering(clustering, cluster_path)
    objective = within_cluster_cosine(m, clustering)
    log.info("t=%d clusters, mean within-cluster cosine %.4f", clustering.t, objective)
    write_manifest(
        out / "cluster_manifest.json",
        "cluster",
        {"t": t, "seed": args.seed, "max_iter": args.max_iter},
        {"embeddings": emb_path},
        {"clustering": cluster_path},
        extra={"objective": objective, "sizes": clustering.sizes().tolist()},
    )
    return 0


_SAMPLE_DEFAULTS = {
    "method": "topic",
    "budget": 0.10,
    "size": None,
    "alpha": 0.9,
    "avg_mode": "exp",
    "no_label_balance": None,
    "moving_literal": None,
    "seed": 0,
}


def cmd_sample(args) -> int:
    out = _outdir(args)
    corpus = read_corpus(_require(args.corpus, "corpus", "ingest"))
    if args.method not in SAMPLE_METHODS:
        raise UsageError(f"unknown sampling method: {args.method!r}")
    size = args.size if args.size is not None else _budget_size(args.budget, len(corpus))

    inputs = {"corpus": Path(args.corpus)}
    if args.method == "topic":
        if not args.embeddings or not args.clustering:
            raise UsageError("topic sampling needs --embeddings and --clustering")
        emb_path = _require(args.embeddings, "embeddings", "ingest")
        cluster_path = _require(args.clustering, "clustering", "cluster")
        m = read_matrix(emb_path)
        clustering = import_clustering(cluster_path, corpus, embeddings=m)
        cfg = SamplerConfig(
            threshold=size,
            avg_mode=args.avg_mode,
            alpha=args.alpha,
            label_balance=not args.no_label_balance,
            moving_literal=bool(args.moving_literal),
            seed=args.seed,
        )
        subset = sample_topic_efficient(m, clustering, corpus, cfg)
        inputs["embeddings"] = emb_path
        inputs["clustering"] = cluster_path
    elif args.method == "random":
        subset = sample_random(corpus, size, seed=args.seed)
    else:
        subset = sample_stratified(corpus, size, seed=args.seed)

    subset_path = out / "subset.json"
    subset.write_json(subset_path)
    subset.write_id_list(out / "subset_ids.txt")
    log.info("%s sampling: %d of %d documents", args.method, len(subset), len(corpus))
    config_echo = {k: getattr(args, k, None) for k in _SAMPLE_DEFAULTS}
    config_echo["resolved_size"] = size
    write_manifest(
        out / "sample_manifest.json",
        "sample",
        config_echo,
        inputs,
        {"subset": subset_path, "subset_ids": out / "subset_ids.txt"},
    )
    return 0


_DIAGNOSE_DEFAULTS = {"top_k": 20, "ks_top_k": 5}


def cmd_diagnose(args) -> int:
    out = _outdir(args)
    corpus = read_corpus(_require(args.corpus, "corpus", "ingest"))
    subset = read_subset(_require(args.subset, "subset", "sample"))
    report = imbalance_report(corpus, subset, top_k=args.top_k, ks_top_k=args.ks_top_k)
    report_json = out / "report.json"
    report_json.write_text(report.to_json() + "\n", encoding="utf-8")
    report_txt = out / "report.txt"
    report_txt.write_text(report.to_text(), encoding="utf-8")
    write_report_csvs(report, out)
    sys.stdout.write(report.to_text())
    write_manifest(
        out / "diagnose_manifest.json",
        "diagnose",
        {"top_k": args.top_k, "ks_top_k": args.ks_top_k},
        {"corpus": Path(args.corpus), "subset": Path(args.subset)},
        {
            "report_json": report_json,
            "report_txt": report_txt,
            "inter_topic_csv": out / "inter_topic.csv",
            "per_topic_labels_csv": out / "per_topic_labels.csv",
            "per_topic_norm_std_csv": out / "per_topic_norm_std.csv",
        },
    )
    return 0


_TRAIN_DEFAULTS = {
    "lr_peak": 2e-3,
    "weight_decay": 0.01,
    "epochs": 3,
    "batch_size": 32,
    "warmup_fraction": 0.10,
    "clip_norm": 1.0,
    "beta_margin": 0.5,
    "seed": 0,
    "hidden": 128,
    "no_contrastive": None,
    "dtype": "float64",
}


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        lr_peak=args.lr_peak,
        weight_decay=args.weight_decay,
        epochs=args.epochs,
        batch_size=args.batch_size,
        warmup_fraction=args.warmup_fraction,
        clip_norm=args.clip_norm,
        beta_margin=args.beta_margin,
        seed=args.seed,
        hidden=args.hidden,
        contrastive=not args.no_contrastive,
        dtype=args.dtype,
    )


def cmd_train(args) -> int:
    out = _outdir(args)
    corpus = read_corpus(_require(args.corpus, "corpus", "ingest"))
    subset = read_subset(_require(args.subset, "subset", "sample"))
    m = read_matrix(_require(args.embeddings, "embeddings", "ingest"))
    cfg = _train_config(args)
    state = train(subset, m, corpus.labels_by_id(), cfg)
    ckpt_path = out / "checkpoint.npz"
    save_checkpoint(state, ckpt_path)
    history_path = out / "history.csv"
    write_history_csv(state, history_path)
    if state.history:
        last = state.history[-1]
        log.info(
            "trained %d steps: ce %.4f cl %.4f total %.4f",
            state.step, last["ce"], last["cl"], last["total"],
        )
    write_manifest(
        out / "train_manifest.json",
        "train",
        cfg.to_dict(),
        {
            "corpus": Path(args.corpus),
            "subset": Path(args.subset),
            "embeddings": Path(args.embeddings),
        },
        {"checkpoint": ckpt_path, "history": history_path},
    )
    return 0


_EVAL_DEFAULTS = {"ids": None}


def cmd_eval(args) -> int:
    out = _outdir(args)
    corpus = read_corpus(_require(args.corpus, "corpus", "ingest"))
    m = read_matrix(_require(args.embeddings, "embeddings", "ingest"))
    state = load_checkpoint(_require(args.checkpoint, "checkpoint", "train"))
    ids = corpus.ids()
    inputs = {
        "corpus": Path(args.corpus),
        "embeddings": Path(args.embeddings),
        "checkpoint": Path(args.checkpoint),
    }
    if args.ids:
        ids_path = _require(args.ids, "id list", "sample")
        ids = [line.strip() for line in ids_path.read_text(encoding="utf-8").splitlines() if line.strip()]
        inputs["ids"] = ids_path
    metrics = _evaluate(state, corpus, m, ids)
    metrics_path = out / "metrics.json"
    metrics_path.write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for key in ("macro_f1", "macro_precision", "macro_recall", "accuracy"):
        sys.stdout.write(f"{key} {metrics[key]:.4f}\n")
    write_manifest(
        out / "eval_manifest.json",
        "eval",
        {"ids": args.ids},
        inputs,
        {"metrics": metrics_path},
    )
    return 0


def _evaluate(state, corpus, m, ids) -> dict:
    by_id = corpus.by_id()
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise DataError(f"evaluation ids not in corpus: {missing[:5]}")
    emb = m.rows_for(ids).astype(state.head.dtype)
    pred_idx = state.head.predict(emb)
    preds = [str(LABEL_ORDER[i]) for i in pred_idx]
    golds = [str(by_id[i].label) for i in ids]
    metrics = classification_metrics(preds, golds)
    metrics["n"] = len(ids)
    return metrics


_SWEEP_DEFAULTS = dict(_TRAIN_DEFAULTS)
_SWEEP_DEFAULTS.update(
    {
        "budgets": "0.01,0.05,0.10,0.15",
        "method": "topic",
        "alpha": 0.9,
        "avg_mode": "exp",
        "no_label_balance": None,
        "moving_literal": None,
    }
)


def _sample_for_budget(method, corpus, m, clustering, budget, args):
    size = _budget_size(budget, len(corpus))
    if method == "topic":
        cfg = SamplerConfig(
            threshold=size,
            avg_mode=args.avg_mode,
            alpha=args.alpha,
            label_balance=not args.no_label_balance,
            moving_literal=bool(args.moving_literal),
            seed=args.seed,
        )
        return sample_topic_efficient(m, clustering, corpus, cfg)
    if method == "random":
        return sample_random(corpus, size, seed=args.seed)
    return sample_stratified(corpus, size, seed=args.seed)


def cmd_sweep(args) -> int:
    out = _outdir(args)
    corpus = read_corpus(_require(args.corpus, "corpus", "ingest"))
    m = read_matrix(_require(args.embeddings, "embeddings", "ingest"))
    if args.method not in SAMPLE_METHODS:
        raise UsageError(f"unknown sampling method: {args.method!r}")
    clustering = None
    inputs = {"corpus": Path(args.corpus), "embeddings": Path(args.embeddings)}
    if args.method == "topic":
        if not args.clustering:
            raise UsageError("topic sampling needs --clustering")
        cluster_path = _require(args.clustering, "clustering", "cluster")
        clustering = import_clustering(cluster_path, corpus, embeddings=m)
        inputs["clustering"] = cluster_path

    eval_corpus, eval_m = corpus, m
    if args.eval_corpus:
        eval_corpus = read_corpus(_require(args.eval_corpus, "eval corpus", "ingest"))
        eval_m = read_matrix(_require(args.eval_embeddings, "eval embeddings", "ingest"))
        inputs["eval_corpus"] = Path(args.eval_corpus)
        inputs["eval_embeddings"] = Path(args.eval_embeddings)

    budgets = [float(b) for b in str(args.budgets).split(",") if b.strip()]
    if not budgets:
        raise UsageError("sweep needs at least one budget")
    labels = corpus.labels_by_id()
    rows = []
    for budget in budgets:
        subset = _sample_for_budget(args.method, corpus, m, clustering, budget, args)
        state = train(subset, m, labels, _train_config(args))
        metrics = _evaluate(state, eval_corpus, eval_m, eval_corpus.ids())
        rows.append({"budget": budget, "macro_f1": metrics["macro_f1"], "subset_size": len(subset)})
        log.info("budget %.3f: subset %d, macro F1 %.4f", budget, len(subset), metrics["macro_f1"])

    sweep_path = out / "sweep.csv"
    with open(sweep_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["budget", "macro_f1", "subset_size"])
        writer.writeheader()
        writer.writerows(rows)
    config_echo = {k: getattr(args, k, None) for k in _SWEEP_DEFAULTS}
    write_manifest(out / "sweep_manifest.json", "sweep", config_echo, inputs, {"sweep": sweep_path})
    return 0


_LOO_DEFAULTS = dict(_TRAIN_DEFAULTS)
_LOO_DEFAULTS.update(
    {
        "budget": 0.10,
        "method": "topic",
        "alpha": 0.9,
        "avg_mode": "exp",
        "no_label_balance": None,
        "moving_literal": None,
        "t": None,
        "max_iter": 100,
    }
)


def cmd_loo(args) -> int:
    out = _outdir(args)
    corpus = read_corpus(_require(args.corpus, "corpus", "ingest"))
    m = read_matrix(_require(args.embeddings, "embeddings", "ingest"))
    if args.holdout not in corpus.datasets:
        raise DataError(f"unknown dataset: {args.holdout!r} (have {sorted(corpus.datasets)})")
    train_corpus, held_corpus = split_leave_one_out(corpus, args.holdout)
    if not len(train_corpus):
        raise DataError(f"holding out {args.holdout!r} leaves no training data")

    train_m = m.subset(train_corpus.ids())
    if args.method == "topic":
        t = args.t if args.t is not None else default_cluster_count(train_m.n)
        clustering = fit_spherical_kmeans(train_m, t=t, seed=args.seed, max_iter=args.max_iter)
    else:
        clustering = None
    subset = _sample_for_budget(args.method, train_corpus, train_m, clustering, args.budget, args)
    state = train(subset, train_m, train_corpus.labels_by_id(), _train_config(args))
    metrics = _evaluate(state, held_corpus, m, held_corpus.ids())
    metrics["held_out"] = args.holdout
    metrics["train_subset_size"] = len(subset)
    metrics_path = out / "loo_metrics.json"
    metrics_path.write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    for key in ("macro_f1", "macro_precision", "macro_recall", "accuracy"):
        sys.stdout.write(f"{key} {metrics[key]:.4f}\n")
    config_echo = {k: getattr(args, k, None) for k in _LOO_DEFAULTS}
    config_echo["holdout"] = args.holdout
    write_manifest(
        out / "loo_manifest.json",
        "loo",
        config_echo,
        {"corpus": Path(args.corpus), "embeddings": Path(args.embeddings)},
        {"metrics": metrics_path},
    )
    return 0


# ---------------------------------------------------------------------------
# parser wiring
# ---------------------------------------------------------------------------


def _add_common(sub):
    sub.add_argument("--config", help="TOML or JSON file with option defaults")
    sub.add_argument("--out", required=True, help="output directory")


def _add_train_flags(sub):
    sub.add_argument("--lr-peak", dest="lr_peak", type=float)
    sub.add_argument("--weight-decay", dest="weight_decay", type=float)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--batch-size", dest="batch_size", type=int)
    sub.add_argument("--warmup-fraction", dest="warmup_fraction", type=float)
    sub.add_argument("--clip-norm", dest="clip_norm", type=float)
    sub.add_argument("--beta-margin", dest="beta_margin", type=float)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--hidden", type=int)
    sub.add_argument("--no-contrastive", dest="no_contrastive", action="store_true", default=None)
    sub.add_argument("--dtype", choices=("float32", "float64"))


def _add_sampler_flags(sub):
    sub.add_argument("--method", choices=SAMPLE_METHODS)
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--avg-mode", dest="avg_mode", choices=("exp", "moving"))
    sub.add_argument("--no-label-balance", dest="no_label_balance", action="store_true", default=None)
    sub.add_argument("--moving-literal", dest="moving_literal", action="store_true", default=None)


def build_parser() -> _Parser:
    parser = _Parser(prog="stancekit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"stancekit {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    subs = parser.add_subparsers(dest="command", metavar="command")

    p = subs.add_parser("ingest", help="build a corpus from raw files or the synthetic generator")
    _add_common(p)
    p.add_argument("--input", action="append", help="dataset as name=path (repeatable)")
    p.add_argument("--format", choices=("jsonl", "csv"))
    p.add_argument("--text-field", dest="text_field")
    p.add_argument("--topic-field", dest="topic_field")
    p.add_argument("--label-field", dest="label_field")
    p.add_argument("--id-field", dest="id_field")
    p.add_argument("--label-override", dest="label_override", action="append",
                   help="raw=CanonicalLabel mapping override (repeatable)")
    p.add_argument("--synthetic", action="store_true", default=None,
                   help="generate the bundled synthetic benchmark instead of reading files")
    p.add_argument("--seed", type=int)
    p.add_argument("--dims", type=int)
    p.add_argument("--topic-sizes", dest="topic_sizes")
    p.add_argument("--label-scale", dest="label_scale", type=float)
    p.add_argument("--noise-scale", dest="noise_scale", type=float)
    p.add_argument("--rare-spread", dest="rare_spread", type=float)
    p.add_argument("--label-concentration", dest="label_concentration", type=float)
    p.add_argument("--eval-fraction", dest="eval_fraction", type=float)
    p.set_defaults(func=cmd_ingest, defaults=_INGEST_DEFAULTS)

    p = subs.add_parser("cluster", help="spherical k-means over embeddings")
    _add_common(p)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--t", type=int, help="cluster count (default: sqrt(n/2) heuristic)")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.set_defaults(func=cmd_cluster, defaults=_CLUSTER_DEFAULTS)

    p = subs.add_parser("sample", help="select a training subset")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--clustering")
    p.add_argument("--budget", type=float, help="subset size as a corpus fraction")
    p.add_argument("--size", type=int, help="absolute subset size (overrides --budget)")
    p.add_argument("--seed", type=int)
    _add_sampler_flags(p)
    p.set_defaults(func=cmd_sample, defaults=_SAMPLE_DEFAULTS)

    p = subs.add_parser("diagnose", help="imbalance report for a subset vs its corpus")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--subset", required=True)
    p.add_argument("--top-k", dest="top_k", type=int)
    p.add_argument("--ks-top-k", dest="ks_top_k", type=int)
    p.set_defaults(func=cmd_diagnose, defaults=_DIAGNOSE_DEFAULTS)

    p = subs.add_parser("train", help="fit the encoder head on a subset")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--subset", required=True)
    p.add_argument("--embeddings", required=True)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train, defaults=_TRAIN_DEFAULTS)

    p = subs.add_parser("eval", help="evaluate a checkpoint")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--ids", help="restrict evaluation to ids listed in this file")
    p.set_defaults(func=cmd_eval, defaults=_EVAL_DEFAULTS)

    p = subs.add_parser("sweep", help="sample+train+eval across budgets")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--clustering")
    p.add_argument("--eval-corpus", dest="eval_corpus")
    p.add_argument("--eval-embeddings", dest="eval_embeddings")
    p.add_argument("--budgets", help="comma-separated corpus fractions")
    _add_sampler_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_sweep, defaults=_SWEEP_DEFAULTS)

    p = subs.add_parser("loo", help="leave-one-dataset-out train/eval")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--holdout", required=True)
    p.add_argument("--budget", type=float)
    p.add_argument("--t", type=int)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    _add_sampler_flags(p)
    _add_train_flags(p)
    p.set_defaults(func=cmd_loo, defaults=_LOO_DEFAULTS)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.verbose:
            logging.getLogger().setLevel(logging.DEBUG)
        if not getattr(args, "command", None):
            parser.print_help(sys.stderr)
            raise UsageError("a subcommand is required")
        args = _merge_config(args, args.defaults)
        return args.func(args)
    except UsageError as exc:
        log.error("usage: %s", exc)
        return 1
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return 3
    except StancekitError as exc:
        log.error("%s", exc)
        return 2
    except OSError as exc:
        log.error("i/o failure: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
