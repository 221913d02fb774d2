"""Command-line pipeline orchestration.

Every subcommand reads a flat key=value config file (optional) merged with
repeated ``--set key=value`` overrides; unknown keys are hard errors so
typos fail loudly instead of silently falling back to defaults. Each run
writes a JSON manifest next to its primary output recording the resolved
config, the content fingerprints of all inputs and outputs, and timing,
so any artifact can be traced back to exactly what produced it.

Exit codes: 0 success, 2 configuration error, 3 missing/unreadable input,
1 any other pipeline failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .augment import AugmentConfig, EmbeddingSimilarity, augment_dataset
from .corpus import (
    FilterConfig,
    PairDataset,
    build_pairs,
    build_taxonomy_pairs,
    filter_outliers,
    filter_pairs,
    parse_sessions,
    read_catalog,
    read_exception_list,
    read_pairs,
    read_taxonomy_stats,
    write_catalog,
    write_pairs,
    write_sessions,
    write_taxonomy_stats,
)
from .errors import ConfigError, CorpusError, DuorecError, InputError
from .evaluation import (
    attach_coverage,
    baseline,
    build_ground_truth,
    coverage_report,
    embedding_recommender,
    evaluate,
    format_report,
    ia_recommender,
    report_to_jsonl,
    split_coverage,
    taxonomy_eval,
)
from .provenance import RunManifest, manifest_path
from .retrieval import (
    AnnIndexConfig,
    RetrievalVariant,
    build_ann_index,
    build_exact_index,
    load_ann_index,
    query,
    save_ann_index,
)
from .sgns import TrainConfig, load_model, save_model, train_pairs, train_sequences
from .synth import WorldConfig, evaluation_period, generate_sessions, generate_world, write_truth
from .tune import (
    DEFAULT_CONFIG,
    SearchSpace,
    make_dev_split,
    random_search,
    training_objective,
    write_trial_log,
)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Flat key=value configuration


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _opt_float(text: str) -> float | None:
    if text.strip().lower() in ("none", "off"):
        return None
    return float(text)


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _int_pair(text: str) -> tuple[int, int]:
    parts = _int_list(text)
    if len(parts) != 2:
        raise ConfigError(f"expected 'lo,hi', got {text!r}")
    return parts[0], parts[1]


def _float_pair(text: str) -> tuple[float, float]:
    parts = [float(tok) for tok in text.split(",") if tok.strip()]
    if len(parts) != 2:
        raise ConfigError(f"expected 'lo,hi', got {text!r}")
    return parts[0], parts[1]


SCHEMAS: dict[str, dict[str, tuple]] = {
    "ingest": {
        "channel": (str, "purchase"),
        "user_quantile": (float, 0.999),
        "session_quantile": (float, 0.999),
        "min_pair_count": (int, 3),
        "min_product_pmi": (float, 0.0),
        "min_taxonomy_pmi": (float, 0.0),
    },
    "train": {
        "mode": (str, "pair"),
        "channel": (str, "click"),
        "negatives": (int, 5),
        "noise_exponent": (float, 0.75),
        "subsample_t": (_opt_float, 1e-3),
        "learning_rate": (float, 0.05),
        "dim": (int, 100),
        "window": (int, 5),
        "max_epochs": (int, 5),
        "early_stop_patience": (int, 2),
        "seed": (int, 0),
        "count_clamp": (int, 1000),
        "dev_fraction": (float, 0.0),
        "workers": (int, 1),
        "binary": (_bool, False),
    },
    "augment": {
        "gamma": (float, 0.5),
        "k_similar": (int, 3),
        "min_similarity": (float, 0.6),
        "min_taxonomy_pmi": (float, 0.0),
    },
    "index": {
        "side": (str, "output"),
        "graph_degree": (int, 16),
        "ef_construction": (int, 200),
        "ef_search": (int, 100),
        "seed": (int, 0),
    },
    "query": {
        "variant": (str, "in-out"),
        "k": (int, 20),
        "allow_out_in": (_bool, False),
        "taxonomy_filter": (_bool, False),
    },
    "evaluate": {
        "ks": (_int_list, [20, 50]),
        "taxonomy_ks": (_int_list, [1, 3]),
        "variant": (str, "in-out"),
        "min_pair_count": (int, 1),
        "baselines": (str, "top_sellers,co_purchases,random"),
        "with_taxonomy_eval": (_bool, True),
        "seed": (int, 0),
    },
    "tune": {
        "budget": (int, 20),
        "seed": (int, 0),
        "dev_fraction": (float, 0.1),
        "max_epochs": (int, 5),
        "early_stop_patience": (int, 2),
        "workers": (int, 1),
        "negatives": (_int_pair, (5, 30)),
        "noise_exponent": (_float_pair, (-1.0, 1.0)),
        "subsample_t": (_float_pair, (1e-4, 1e-2)),
        "learning_rate": (_float_pair, (0.05, 0.15)),
        "dim": (_int_pair, (20, 100)),
    },
    "synth": {
        "n_categories": (int, 20),
        "items_per_category": (int, 50),
        "out_degree": (int, 2),
        "popularity_skew": (float, 1.0),
        "n_purchase_sessions": (int, 50_000),
        "n_click_sessions": (int, 20_000),
        "n_users": (int, 10_000),
        "anchor_items": (_int_pair, (1, 2)),
        "complement_items": (_int_pair, (1, 2)),
        "click_session_length": (_int_pair, (3, 8)),
        "noise_rate": (float, 0.05),
        "holdout_item_fraction": (float, 0.0),
        "seed": (int, 0),
        "eval_period": (_bool, True),
    },
}


def read_config_file(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        values[key.strip()] = value.strip()
    return values


def resolve_config(subcommand: str, config_file: str | None,
                   overrides: list[str]) -> dict:
    schema = SCHEMAS[subcommand]
    raw: dict[str, str] = {}
    if config_file:
        raw.update(read_config_file(config_file))
    for item in overrides or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        raw[key.strip()] = value.strip()
    resolved = {key: default for key, (_, default) in schema.items()}
    for key, text in raw.items():
        if key not in schema:
            raise ConfigError(f"unknown config key {key!r} for {subcommand!r}")
        convert = schema[key][0]
        try:
            resolved[key] = convert(text)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from exc
    return resolved


def _require(path: str | None, what: str) -> Path:
    if not path:
        raise ConfigError(f"missing required option --{what}")
    p = Path(path)
    if not p.exists():
        raise InputError(f"{what} file not found: {p}")
    return p


# ---------------------------------------------------------------------------
# Subcommand handlers


def cmd_ingest(args) -> None:
    cfg = resolve_config("ingest", args.config, args.set)
    sessions_path = _require(args.sessions, "sessions")
    catalog_path = _require(args.catalog, "catalog")
    manifest = RunManifest("ingest", cfg, version=__version__)
    manifest.add_input(sessions_path)
    manifest.add_input(catalog_path)
    exceptions = frozenset()
    if args.exceptions:
        exceptions_path = _require(args.exceptions, "exceptions")
        exceptions = read_exception_list(exceptions_path)
        manifest.add_input(exceptions_path)
    catalog = read_catalog(catalog_path)
    filter_cfg = FilterConfig(
        user_quantile=cfg["user_quantile"],
        session_quantile=cfg["session_quantile"],
        min_pair_count=cfg["min_pair_count"],
        min_product_pmi=cfg["min_product_pmi"],
        min_taxonomy_pmi=cfg["min_taxonomy_pmi"],
        taxonomy_exception_list=exceptions,
    )
    sessions = parse_sessions(sessions_path).by_channel(cfg["channel"])
    if not sessions.sessions:
        raise CorpusError(f"no sessions on channel {cfg['channel']!r}")
    sessions = filter_outliers(sessions, filter_cfg)
    pairs, _ = build_pairs(sessions)
    # First pass: count and product-PMI rules only, keeping identical-
    # taxonomy pairs, so the taxonomy statistics see every real purchase
    # pattern (self-pairs included — that is what exception-list curation
    # looks at).
    prelim = PairDataset(
        rec for rec in pairs
        if rec.count >= filter_cfg.min_pair_count
        and rec.pmi >= filter_cfg.min_product_pmi
    )
    taxo_stats = build_taxonomy_pairs(prelim, catalog)
    final = filter_pairs(pairs, catalog, filter_cfg, taxo_stats)
    out_path = Path(args.out)
    write_pairs(final, out_path)
    manifest.add_output(out_path)
    if args.taxonomy_stats:
        stats_path = Path(args.taxonomy_stats)
        write_taxonomy_stats(taxo_stats, stats_path)
        manifest.add_output(stats_path)
    manifest.write(manifest_path(out_path))
    logger.info("ingest: %d sessions -> %d pairs (%d before filtering)",
                len(sessions.sessions), len(final), len(pairs))


def cmd_train(args) -> None:
    cfg = resolve_config("train", args.config, args.set)
    train_cfg = TrainConfig(
        negatives=cfg["negatives"], noise_exponent=cfg["noise_exponent"],
        subsample_t=cfg["subsample_t"], learning_rate=cfg["learning_rate"],
        dim=cfg["dim"], window=cfg["window"], max_epochs=cfg["max_epochs"],
        early_stop_patience=cfg["early_stop_patience"], seed=cfg["seed"],
        count_clamp=cfg["count_clamp"],
    )
    manifest = RunManifest("train", cfg, seed=cfg["seed"], version=__version__)

    def progress(epoch, examples, mean_loss, dev_recall):
        extra = "" if dev_recall is None else f" dev_recall@20={dev_recall:.4f}"
        logger.info("epoch=%d examples=%d mean_loss=%.4f%s",
                    epoch, examples, mean_loss, extra)

    if cfg["mode"] == "pair":
        pairs_path = _require(args.pairs, "pairs")
        manifest.add_input(pairs_path)
        pairs = read_pairs(pairs_path)
        dev = None
        if cfg["dev_fraction"] > 0:
            pairs, dev = make_dev_split(pairs, cfg["dev_fraction"], cfg["seed"])
        model = train_pairs(pairs, train_cfg, dev=dev, progress=progress,
                            workers=cfg["workers"])
    elif cfg["mode"] == "sequence":
        sessions_path = _require(args.sessions, "sessions")
        manifest.add_input(sessions_path)
        sessions = parse_sessions(sessions_path).by_channel(cfg["channel"])
        if not sessions.sessions:
            raise CorpusError(f"no sessions on channel {cfg['channel']!r}")
        model = train_sequences(sessions, train_cfg, progress=progress,
                                workers=cfg["workers"])
    else:
        raise ConfigError(f"mode must be 'pair' or 'sequence', got {cfg['mode']!r}")

    out_path = Path(args.out)
    save_model(model, out_path, binary=cfg["binary"])
    manifest.add_output(out_path)
    manifest.write(manifest_path(out_path))
    logger.info("trained %d items at dim %d -> %s", len(model), model.dim, out_path)


def cmd_augment(args) -> None:
    cfg = resolve_config("augment", args.config, args.set)
    pairs_path = _require(args.pairs, "pairs")
    catalog_path = _require(args.catalog, "catalog")
    click_model_path = _require(args.click_model, "click-model")
    stats_path = _require(args.taxonomy_stats, "taxonomy-stats")
    manifest = RunManifest("augment", cfg, version=__version__)
    for p in (pairs_path, catalog_path, click_model_path, stats_path):
        manifest.add_input(p)
    pairs = read_pairs(pairs_path)
    catalog = read_catalog(catalog_path)
    taxo_stats = read_taxonomy_stats(stats_path)
    sim = EmbeddingSimilarity(load_model(click_model_path))
    aug_cfg = AugmentConfig(
        gamma=cfg["gamma"], k_similar=cfg["k_similar"],
        min_similarity=cfg["min_similarity"],
        min_taxonomy_pmi=cfg["min_taxonomy_pmi"],
    )
    audit: list | None = [] if args.audit else None
    augmented = augment_dataset(pairs, sim, aug_cfg, taxo_stats, catalog, audit=audit)
    out_path = Path(args.out)
    write_pairs(augmented, out_path)
    manifest.add_output(out_path)
    if audit is not None:
        audit_path = Path(args.audit)
        with open(audit_path, "w", encoding="utf-8") as fh:
            for entry in audit:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
        manifest.add_output(audit_path)
    manifest.write(manifest_path(out_path))
    logger.info("augment: %d real pairs -> %d total", len(pairs), len(augmented))


def cmd_index(args) -> None:
    cfg = resolve_config("index", args.config, args.set)
    model_path = _require(args.model, "model")
    manifest = RunManifest("index", cfg, seed=cfg["seed"], version=__version__)
    manifest.add_input(model_path)
    model = load_model(model_path)
    ann_cfg = AnnIndexConfig(
        graph_degree=cfg["graph_degree"], ef_construction=cfg["ef_construction"],
        ef_search=cfg["ef_search"], seed=cfg["seed"],
    )
    index = build_ann_index(model, ann_cfg, side=cfg["side"])
    out_path = Path(args.out)
    save_ann_index(index, out_path, model_path)
    manifest.add_output(out_path)
    manifest.write(manifest_path(out_path))
    logger.info("indexed %d vectors (side=%s, M=%d) -> %s",
                len(index), cfg["side"], cfg["graph_degree"], out_path)


def cmd_query(args) -> None:
    cfg = resolve_config("query", args.config, args.set)
    model_path = _require(args.model, "model")
    model = load_model(model_path)
    variant = RetrievalVariant.parse(cfg["variant"])
    if variant is RetrievalVariant.OUT_IN and not cfg["allow_out_in"]:
        raise ConfigError(
            "the out-in variant is disabled by default; pass --set allow_out_in=true"
        )
    catalog = None
    if cfg["taxonomy_filter"]:
        catalog = read_catalog(_require(args.catalog, "catalog"))
    if args.index:
        index = load_ann_index(_require(args.index, "index"), model, model_path)
        if index.side != variant.index_side:
            raise ConfigError(
                f"index at {args.index} is {index.side}-side; "
                f"variant {variant.name} needs {variant.index_side}"
            )
    else:
        index = build_exact_index(model, side=variant.index_side)
    result = query(model, args.target, variant, cfg["k"], index,
                   taxonomy_filter=catalog)
    for rank, (item, score) in enumerate(result.entries, 1):
        print(f"{rank}\t{item}\t{score:.6f}")


def cmd_evaluate(args) -> None:
    cfg = resolve_config("evaluate", args.config, args.set)
    model_path = _require(args.model, "model")
    test_path = _require(args.test_sessions, "test-sessions")
    model = load_model(model_path)
    test_sessions = parse_sessions(test_path).by_channel("purchase")
    gt = build_ground_truth(test_sessions, min_pair_count=cfg["min_pair_count"])
    variant = RetrievalVariant.parse(cfg["variant"])
    index = build_exact_index(model, side=variant.index_side)
    k_max = max(cfg["ks"])
    q_in, q_out = split_coverage(gt, model.vocab)
    splits = {"in_coverage": q_in, "out_of_coverage": q_out}

    rows = []
    reports = []
    model_rec = embedding_recommender(model, variant, index, k=k_max)
    report = evaluate(model_rec, gt, cfg["ks"], name=variant.name.lower(), splits=splits)
    catalog = read_catalog(_require(args.catalog, "catalog")) if args.catalog else {}
    prod_cov, tax_cov = coverage_report(model_rec, catalog, gt)
    attach_coverage(report, prod_cov, tax_cov)
    reports.append(report)

    sim = None
    if args.click_model:
        click_model = load_model(_require(args.click_model, "click-model"))
        sim = EmbeddingSimilarity(click_model)
        ia_rec = ia_recommender(model, sim, index, k=k_max)
        ia_report = evaluate(ia_rec, gt, cfg["ks"], name=f"{variant.name.lower()}+ia",
                             splits=splits)
        prod_cov, tax_cov = coverage_report(ia_rec, catalog, gt)
        attach_coverage(ia_report, prod_cov, tax_cov)
        reports.append(ia_report)

    train_pairs_data = read_pairs(_require(args.pairs, "pairs")) if args.pairs else None
    train_sessions = (
        parse_sessions(_require(args.train_sessions, "train-sessions"))
        .by_channel("purchase")
        if args.train_sessions else None
    )
    for kind in [b.strip() for b in cfg["baselines"].split(",") if b.strip()]:
        try:
            rec = baseline(kind, pairs=train_pairs_data, sessions=train_sessions,
                           seed=cfg["seed"], k=k_max)
        except ConfigError as exc:
            logger.warning("skipping baseline %s: %s", kind, exc)
            continue
        b_report = evaluate(rec, gt, cfg["ks"], name=kind, splits=splits)
        prod_cov, tax_cov = coverage_report(rec, catalog, gt)
        attach_coverage(b_report, prod_cov, tax_cov)
        reports.append(b_report)

    if cfg["with_taxonomy_eval"] and catalog:
        reports.append(taxonomy_eval(model_rec, gt, catalog, cfg["taxonomy_ks"],
                                     name=variant.name.lower()))
        if sim is not None:
            reports.append(taxonomy_eval(
                ia_recommender(model, sim, index, k=max(cfg["taxonomy_ks"])),
                gt, catalog, cfg["taxonomy_ks"], name=f"{variant.name.lower()}+ia",
            ))

    for rep in reports:
        rows.extend(rep.rows)
    merged = reports[0]
    merged.rows = rows
    print(format_report(merged))
    if args.out:
        out_path = Path(args.out)
        report_to_jsonl(merged, out_path)
        manifest = RunManifest("evaluate", cfg, seed=cfg["seed"], version=__version__)
        manifest.add_input(model_path)
        manifest.add_input(test_path)
        manifest.add_output(out_path)
        manifest.write(manifest_path(out_path))


def cmd_tune(args) -> None:
    cfg = resolve_config("tune", args.config, args.set)
    pairs_path = _require(args.pairs, "pairs")
    pairs = read_pairs(pairs_path)
    train, dev = make_dev_split(pairs, cfg["dev_fraction"], cfg["seed"])
    space = SearchSpace(
        negatives=cfg["negatives"], noise_exponent=cfg["noise_exponent"],
        subsample_t=cfg["subsample_t"], learning_rate=cfg["learning_rate"],
        dim=cfg["dim"],
    )
    base = TrainConfig(max_epochs=cfg["max_epochs"],
                       early_stop_patience=cfg["early_stop_patience"],
                       seed=cfg["seed"])
    objective = training_objective(train, dev, base=base, workers=cfg["workers"])
    best, log = random_search(space, cfg["budget"], objective, seed=cfg["seed"])
    default_result = objective(dict(DEFAULT_CONFIG))
    logger.info("default config dev recall@20: %.4f", default_result["recall"])
    best_recall = max(r.dev_recall for r in log if r.dev_recall is not None)
    logger.info("best sampled dev recall@20:  %.4f", best_recall)
    out_path = Path(args.out)
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump({
            "best_config": best,
            "best_dev_recall": best_recall,
            "default_dev_recall": default_result["recall"],
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest = RunManifest("tune", cfg, seed=cfg["seed"], version=__version__)
    manifest.add_input(pairs_path)
    manifest.add_output(out_path)
    if args.log:
        write_trial_log(log, args.log)
        manifest.add_output(args.log)
    manifest.write(manifest_path(out_path))


def cmd_synth(args) -> None:
    cfg = resolve_config("synth", args.config, args.set)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    world_cfg = WorldConfig(
        n_categories=cfg["n_categories"],
        items_per_category=cfg["items_per_category"],
        out_degree=cfg["out_degree"],
        popularity_skew=cfg["popularity_skew"],
        n_purchase_sessions=cfg["n_purchase_sessions"],
        n_click_sessions=cfg["n_click_sessions"],
        n_users=cfg["n_users"],
        anchor_items=cfg["anchor_items"],
        complement_items=cfg["complement_items"],
        click_session_length=cfg["click_session_length"],
        noise_rate=cfg["noise_rate"],
        holdout_item_fraction=cfg["holdout_item_fraction"],
        seed=cfg["seed"],
    )
    catalog, truth = generate_world(world_cfg)
    sessions = generate_sessions(catalog, truth, world_cfg)
    manifest = RunManifest("synth", cfg, seed=cfg["seed"], version=__version__)
    outputs = {
        "sessions.tsv": lambda p: write_sessions(sessions, p),
        "catalog.tsv": lambda p: write_catalog(catalog, p),
        "truth.tsv": lambda p: write_truth(truth, p),
    }
    if cfg["eval_period"]:
        eval_sessions = evaluation_period(catalog, truth, world_cfg)
        outputs["eval_sessions.tsv"] = lambda p: write_sessions(eval_sessions, p)
    for name, writer in outputs.items():
        path = out_dir / name
        writer(path)
        manifest.add_output(path)
    manifest.write(manifest_path(out_dir / "sessions.tsv"))
    logger.info("synthetic world written to %s", out_dir)


# ---------------------------------------------------------------------------
# Argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="duorec",
        description="Dual-embedding complementary item recommendation pipeline",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug-level logging")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, help_text, **paths):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", default=[],
                       help="override a single config key (repeatable)")
        for flag, (required, help_line) in paths.items():
            p.add_argument(f"--{flag}", required=required, help=help_line)
        return p

    add("ingest", "sessions + catalog -> filtered co-purchase pairs",
        sessions=(True, "session TSV"), catalog=(True, "catalog TSV"),
        exceptions=(False, "taxonomy exception list, one path per line"),
        out=(True, "output pair TSV"),
        **{"taxonomy-stats": (False, "output taxonomy pair stats TSV")},
        ).set_defaults(func=cmd_ingest)
    add("train", "pairs or sessions -> dual-embedding model",
        pairs=(False, "pair TSV (pair mode)"),
        sessions=(False, "session TSV (sequence mode)"),
        out=(True, "output model file"),
        ).set_defaults(func=cmd_train)
    add("augment", "real pairs + click model -> augmented pairs",
        pairs=(True, "filtered real pair TSV"), catalog=(True, "catalog TSV"),
        out=(True, "output augmented pair TSV"),
        audit=(False, "optional audit JSONL output"),
        **{"click-model": (True, "sequence-trained model file"),
           "taxonomy-stats": (True, "taxonomy pair stats TSV from ingest")},
        ).set_defaults(func=cmd_augment)
    add("index", "model -> approximate nearest-neighbor index",
        model=(True, "model file"), out=(True, "output index file"),
        ).set_defaults(func=cmd_index)
    add("query", "top-K candidates for one target item",
        model=(True, "model file"), index=(False, "prebuilt index file"),
        target=(True, "target item id"), catalog=(False, "catalog TSV"),
        ).set_defaults(func=cmd_query)
    add("evaluate", "model vs ground truth from held-out sessions",
        model=(True, "model file"),
        catalog=(False, "catalog TSV"),
        pairs=(False, "training pair TSV (baselines)"),
        out=(False, "output JSONL report"),
        **{"test-sessions": (True, "held-out session TSV"),
           "train-sessions": (False, "training session TSV (top-sellers baseline)"),
           "click-model": (False, "sequence model for inference augmentation")},
        ).set_defaults(func=cmd_evaluate)
    add("tune", "random hyperparameter search on a dev split",
        pairs=(True, "pair TSV"), out=(True, "output best-config JSON"),
        log=(False, "trial log JSONL"),
        ).set_defaults(func=cmd_tune)
    add("synth", "generate a synthetic world with known ground truth",
        **{"out-dir": (True, "output directory")},
        ).set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        args.func(args)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return 2
    except (InputError, CorpusError) as exc:
        logger.error("input error: %s", exc)
        return 3
    except DuorecError as exc:
        logger.error("pipeline failure: %s", exc)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
