"""Offline evaluation: ground truth, Precision/Recall@K, coverage, and
taxonomy-level metrics, plus the non-embedding baseline recommenders.

Ground truth comes from held-out purchase sessions: every item that
co-occurs with something becomes a query, and its co-purchased items,
ranked by co-occurrence count, are the relevance list. Queries a
recommender cannot answer count as zeros in every mean — coverage gaps
are paid for in the headline metrics, not hidden by averaging over the
answerable subset.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .augment import SimilarityProvider, query_with_ia
from .corpus import Catalog, PairDataset, SessionSet, build_pairs
from .errors import ConfigError, EvaluationError, OutOfCoverageError
from .retrieval import (
    ExactIndex,
    HnswIndex,
    RecommendationList,
    RetrievalVariant,
    query,
)
from .sgns import DualEmbedding

logger = logging.getLogger(__name__)

Recommender = Callable[[str], RecommendationList]


# ---------------------------------------------------------------------------
# Ground truth


@dataclass
class GroundTruth:
    """Per-query ranked relevance lists; no query appears in its own list."""

    lists: dict[str, list[str]]

    def queries(self) -> list[str]:
        return sorted(self.lists)

    def __len__(self) -> int:
        return len(self.lists)

    def __contains__(self, item: str) -> bool:
        return item in self.lists


def build_ground_truth(test_sessions: SessionSet,
                       min_pair_count: int = 1) -> GroundTruth:
    """Pair up the test sessions and rank each item's co-purchased items by
    co-occurrence count (ties by ascending identifier).

    The count threshold defaults to 1: the training-set pruning rules are
    about fitting a better model, not about what counts as a relevant
    test answer. Pass a higher threshold to mirror training filtering.
    """
    pairs, _ = build_pairs(test_sessions)
    by_query: dict[str, list[tuple[int, str]]] = {}
    for rec in pairs:
        if rec.count < min_pair_count:
            continue
        by_query.setdefault(rec.item_a, []).append((rec.count, rec.item_b))
        by_query.setdefault(rec.item_b, []).append((rec.count, rec.item_a))
    if not by_query:
        raise EvaluationError("test sessions produced no co-purchase pairs")
    lists = {
        q: [item for _, item in sorted(co, key=lambda e: (-e[0], e[1]))]
        for q, co in by_query.items()
    }
    return GroundTruth(lists=lists)


# ---------------------------------------------------------------------------
# Metrics


def precision_recall_at_k(l_q: Sequence[str], r_q: Sequence[str],
                          k: int) -> tuple[float, float]:
    """Precision = |L ∩ R^k| / k (denominator is always k, even when fewer
    than k candidates were returned); Recall = |L ∩ R^k| / |L|."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if not l_q:
        raise EvaluationError("relevance list is empty; query should have been skipped")
    hits = len(set(l_q).intersection(r_q[:k]))
    return hits / k, hits / len(l_q)


@dataclass
class EvalRow:
    model: str
    split: str
    k: int
    precision: float
    recall: float
    n_queries: int
    product_coverage: float | None = None
    taxonomy_coverage: float | None = None


@dataclass
class EvalReport:
    rows: list[EvalRow] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def row(self, split: str, k: int) -> EvalRow:
        for r in self.rows:
            if r.split == split and r.k == k:
                return r
        raise KeyError((split, k))


def _collect(recommender: Recommender, queries: Iterable[str]
             ) -> dict[str, list[str] | None]:
    """Run the recommender once per query; None marks out-of-coverage."""
    out: dict[str, list[str] | None] = {}
    for q in queries:
        try:
            out[q] = recommender(q).items()
        except OutOfCoverageError:
            out[q] = None
    return out


def evaluate(
    recommender: Recommender,
    gt: GroundTruth,
    ks: Sequence[int] = (20, 50),
    name: str = "model",
    splits: dict[str, set[str]] | None = None,
) -> EvalReport:
    """Mean precision/recall over ALL queries; out-of-coverage queries
    score zero rather than being dropped. Optional named query subsets get
    their own rows alongside the combined one."""
    queries = gt.queries()
    results = _collect(recommender, queries)
    report = EvalReport(meta={"model": name, "n_queries": len(queries)})
    groups: list[tuple[str, list[str]]] = [("combined", queries)]
    for split_name, members in (splits or {}).items():
        groups.append((split_name, [q for q in queries if q in members]))
    for split_name, group in groups:
        for k in ks:
            if group:
                precisions = np.zeros(len(group))
                recalls = np.zeros(len(group))
                for i, q in enumerate(group):
                    items = results[q]
                    if items is None:
                        continue
                    precisions[i], recalls[i] = precision_recall_at_k(
                        gt.lists[q], items, k
                    )
                p, r = float(precisions.mean()), float(recalls.mean())
            else:
                p = r = 0.0
            report.rows.append(EvalRow(
                model=name, split=split_name, k=k,
                precision=p, recall=r, n_queries=len(group),
            ))
    return report


def split_coverage(gt: GroundTruth, training_vocab: Iterable[str]
                   ) -> tuple[set[str], set[str]]:
    """Partition queries into those the training vocabulary covers and the
    cold remainder."""
    vocab = set(training_vocab)
    q_in = {q for q in gt.lists if q in vocab}
    return q_in, set(gt.lists) - q_in


def coverage_report(recommender: Recommender, catalog: Catalog,
                    gt: GroundTruth) -> tuple[float, float]:
    """Product coverage: fraction of ground-truth queries with at least one
    candidate. Taxonomy coverage: fraction of the catalog's distinct
    taxonomies containing at least one covered query item."""
    results = _collect(recommender, gt.queries())
    covered = {q for q, items in results.items() if items}
    product_coverage = len(covered) / len(gt) if len(gt) else 0.0
    all_taxonomies = {entry.taxonomy for entry in catalog.values()}
    if not all_taxonomies:
        return product_coverage, 0.0
    covered_taxonomies = {
        catalog[q].taxonomy for q in covered if q in catalog
    }
    return product_coverage, len(covered_taxonomies) / len(all_taxonomies)


def _to_taxonomies(items: Sequence[str], catalog: Catalog,
                   warn_missing: set[str] | None = None) -> list[tuple[str, ...]]:
    """Item list → taxonomy list, deduplicated, keeping first-occurrence order."""
    seen: set[tuple[str, ...]] = set()
    out: list[tuple[str, ...]] = []
    for item in items:
        entry = catalog.get(item)
        if entry is None:
            if warn_missing is not None and item not in warn_missing:
                warn_missing.add(item)
                logger.warning("item %r has no catalog entry; skipped in taxonomy mapping", item)
            continue
        if entry.taxonomy not in seen:
            seen.add(entry.taxonomy)
            out.append(entry.taxonomy)
    return out


def taxonomy_eval(
    recommender: Recommender,
    gt: GroundTruth,
    catalog: Catalog,
    ks: Sequence[int] = (1, 3),
    name: str = "model",
) -> EvalReport:
    """Precision/recall at the taxonomy level: both the relevance list and
    the recommendations are mapped to deduplicated taxonomy sequences
    before scoring. Useful where exact-product prediction is hopeless but
    landing in the right department still has value."""
    queries = gt.queries()
    results = _collect(recommender, queries)
    missing: set[str] = set()
    mapped_gt: dict[str, list[tuple[str, ...]]] = {}
    for q in queries:
        taxos = _to_taxonomies(gt.lists[q], catalog, missing)
        if taxos:
            mapped_gt[q] = taxos
    report = EvalReport(meta={"model": name, "level": "taxonomy",
                              "n_queries": len(mapped_gt)})
    for k in ks:
        precisions = []
        recalls = []
        for q, truth in mapped_gt.items():
            items = results[q]
            if items is None:
                precisions.append(0.0)
                recalls.append(0.0)
                continue
            recs = _to_taxonomies(items, catalog, missing)
            p, r = precision_recall_at_k(truth, recs, k)
            precisions.append(p)
            recalls.append(r)
        report.rows.append(EvalRow(
            model=name, split="taxonomy", k=k,
            precision=float(np.mean(precisions)) if precisions else 0.0,
            recall=float(np.mean(recalls)) if recalls else 0.0,
            n_queries=len(mapped_gt),
        ))
    return report


# ---------------------------------------------------------------------------
# Baselines


def baseline(
    kind: str,
    pairs: PairDataset | None = None,
    sessions: SessionSet | None = None,
    seed: int = 0,
    k: int = 50,
) -> Recommender:
    """Non-embedding reference recommenders.

    ``top_sellers`` ranks by global sales volume (purchase-session
    occurrences) and answers every query identically, minus the target.
    ``co_purchases`` ranks the target's co-purchase partners by count and
    is undefined for unseen targets. ``random`` samples from the training
    vocabulary with a seeded generator. Scores are rank-derived in (0, 1].
    """
    if kind == "top_sellers":
        if sessions is None:
            raise ConfigError("top_sellers baseline needs purchase sessions")
        sales: dict[str, int] = {}
        for session in sessions:
            if session.channel != "purchase":
                continue
            for item in session.items:
                sales[item] = sales.get(item, 0) + 1
        if not sales:
            raise ConfigError("no purchase sessions to rank top sellers from")
        ranked = sorted(sales, key=lambda it: (-sales[it], it))
        top = ranked[: k + 1]
        peak = sales[ranked[0]]

        def top_sellers(target: str) -> RecommendationList:
            entries = [(it, sales[it] / peak) for it in top if it != target][:k]
            return RecommendationList(target=target, variant=None, entries=entries)

        return top_sellers

    if kind == "co_purchases":
        if pairs is None:
            raise ConfigError("co_purchases baseline needs the pair dataset")
        co: dict[str, list[tuple[int, str]]] = {}
        for rec in pairs:
            co.setdefault(rec.item_a, []).append((rec.count, rec.item_b))
            co.setdefault(rec.item_b, []).append((rec.count, rec.item_a))
        table = {
            q: sorted(entries, key=lambda e: (-e[0], e[1]))[:k]
            for q, entries in co.items()
        }

        def co_purchases(target: str) -> RecommendationList:
            if target not in table:
                raise OutOfCoverageError(target)
            best = table[target][0][0]
            entries = [(item, count / best) for count, item in table[target]]
            return RecommendationList(target=target, variant=None, entries=entries)

        return co_purchases

    if kind == "random":
        vocab: list[str] = []
        if pairs is not None:
            vocab = pairs.vocab()
        elif sessions is not None:
            vocab = sorted({item for s in sessions for item in s.items})
        if not vocab:
            raise ConfigError("random baseline needs a training vocabulary")
        rng = np.random.default_rng(seed)

        def random_recommender(target: str) -> RecommendationList:
            candidates = [it for it in vocab if it != target]
            take = min(k, len(candidates))
            chosen = rng.choice(len(candidates), size=take, replace=False)
            entries = [
                (candidates[idx], 1.0 - i / max(1, take))
                for i, idx in enumerate(chosen)
            ]
            return RecommendationList(target=target, variant=None, entries=entries)

        return random_recommender

    raise ConfigError(f"unknown baseline kind {kind!r}")


# ---------------------------------------------------------------------------
# Recommender adapters over the embedding model


def embedding_recommender(
    model: DualEmbedding,
    variant: RetrievalVariant,
    index: ExactIndex | HnswIndex,
    k: int = 50,
    taxonomy_filter: Catalog | None = None,
) -> Recommender:
    def recommend(target: str) -> RecommendationList:
        return query(model, target, variant, k, index, taxonomy_filter=taxonomy_filter)

    return recommend


def ia_recommender(
    model: DualEmbedding,
    sim: SimilarityProvider,
    index: ExactIndex | HnswIndex,
    k: int = 50,
) -> Recommender:
    def recommend(target: str) -> RecommendationList:
        return query_with_ia(target, model, sim, k, index)

    return recommend


# ---------------------------------------------------------------------------
# Report emission


def report_to_jsonl(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in report.rows:
            record = {
                "model": row.model, "split": row.split, "K": row.k,
                "precision": row.precision, "recall": row.recall,
                "product_coverage": row.product_coverage,
                "taxonomy_coverage": row.taxonomy_coverage,
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def format_report(report: EvalReport) -> str:
    header = f"{'model':<24} {'split':<18} {'K':>4} {'precision':>10} {'recall':>10} {'queries':>8}"
    lines = [header, "-" * len(header)]
    for row in report.rows:
        lines.append(
            f"{row.model:<24} {row.split:<18} {row.k:>4} "
            f"{row.precision:>10.4f} {row.recall:>10.4f} {row.n_queries:>8}"
        )
    extras = []
    for row in report.rows:
        if row.product_coverage is not None:
            extras.append(
                f"{row.model} {row.split}: product coverage "
                f"{row.product_coverage:.4f}, taxonomy coverage "
                f"{row.taxonomy_coverage:.4f}"
            )
    seen = set()
    for line in extras:
        if line not in seen:
            seen.add(line)
            lines.append(line)
    return "\n".join(lines)


def attach_coverage(report: EvalReport, product_coverage: float,
                    taxonomy_coverage: float, split: str = "combined") -> None:
    for row in report.rows:
        if row.split == split:
            row.product_coverage = product_coverage
            row.taxonomy_coverage = taxonomy_coverage
