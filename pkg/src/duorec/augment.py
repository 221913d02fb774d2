"""Synthetic pair generation and out-of-coverage inference fallback.

Data augmentation substitutes similar items into real co-purchase pairs,
discounting the synthetic count by gamma and the substitutes' similarity
scores, so cold items inherit weakened evidence from their neighbors.
Inference augmentation answers queries for items the co-purchase model
has never seen by routing them through their most similar in-vocabulary
proxy.

Similarity comes from an abstract provider; the shipped implementation
ranks by input-against-input cosine over a click-trained sequence model,
affinely mapped from [-1, 1] to [0, 1].
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Container, Protocol

from .corpus import (
    Catalog,
    PairDataset,
    PairRecord,
    PROVENANCE_BOTH,
    PROVENANCE_SINGLE,
    TaxonomyPairStats,
    canonical_pair,
)
from .errors import ConfigError, OutOfCoverageError, UndefinedPmiError, UndefinedSimilarityError
from .retrieval import ExactIndex, HnswIndex, INPUT_SIDE, RetrievalVariant, RecommendationList
from .retrieval import build_exact_index, query
from .sgns import DualEmbedding

logger = logging.getLogger(__name__)


class SimilarityProvider(Protocol):
    """Ranked similar items with scores in [0, 1]; never returns the item
    itself; unknown items raise OutOfCoverageError."""

    def top_k(self, item: str, k: int | None, min_score: float = 0.0
              ) -> list[tuple[str, float]]:
        """Top-k most similar items (full ranking when k is None)."""
        ...


class EmbeddingSimilarity:
    """Similarity provider over a trained model's input matrix.

    Cosine in [-1, 1] is mapped to (cos + 1) / 2 so scores land in the
    [0, 1] codomain the augmentation formulas expect.
    """

    def __init__(self, model: DualEmbedding, index: ExactIndex | HnswIndex | None = None):
        self.model = model
        if index is None:
            index = build_exact_index(model, side=INPUT_SIDE)
        elif index.side != INPUT_SIDE:
            raise ConfigError("similarity provider needs an input-side index")
        self.index = index

    def top_k(self, item: str, k: int | None, min_score: float = 0.0
              ) -> list[tuple[str, float]]:
        if item not in self.model:
            raise OutOfCoverageError(item)
        fetch = len(self.index) if k is None else k
        vector = self.model.input_vector(item)
        ranked = self.index.top_k(vector, fetch + 1, exclude={item})[:fetch]
        out = []
        for other, cos in ranked:
            score = (cos + 1.0) / 2.0
            if score >= min_score:
                out.append((other, score))
        return out


@dataclass
class AugmentConfig:
    gamma: float = 0.5
    k_similar: int = 3
    min_similarity: float = 0.6
    min_taxonomy_pmi: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"gamma must be strictly inside (0, 1), got {self.gamma}")
        if self.k_similar < 1:
            raise ConfigError(f"k_similar must be >= 1, got {self.k_similar}")
        if not 0.0 <= self.min_similarity <= 1.0:
            raise ConfigError("min_similarity must be in [0, 1]")


def replace_single(
    pair: PairRecord,
    substitute: tuple[str, float],
    side: str,
    gamma: float,
    existing: Container[tuple[str, str]] = (),
) -> PairRecord | None:
    """Swap one member of a real pair for a similar item.

    Synthetic count = floor(gamma * count * score). Returns None when the
    count floors to zero, the substitute collides with either member, or
    the resulting pair already exists in ``existing``.
    """
    if side not in ("left", "right"):
        raise ConfigError(f"side must be 'left' or 'right', got {side!r}")
    sub_item, score = substitute
    if sub_item in (pair.item_a, pair.item_b):
        return None
    count = math.floor(gamma * pair.count * score)
    if count < 1:
        return None
    kept = pair.item_b if side == "left" else pair.item_a
    a, b = canonical_pair(sub_item, kept)
    if (a, b) in existing:
        return None
    return PairRecord(item_a=a, item_b=b, count=count, pmi=0.0,
                      provenance=PROVENANCE_SINGLE)


def replace_both(
    pair: PairRecord,
    sub_a: tuple[str, float],
    sub_b: tuple[str, float],
    gamma: float,
    existing: Container[tuple[str, str]] = (),
) -> PairRecord | None:
    """Swap both members; count = floor(gamma * count * mean score)."""
    item_a, score_a = sub_a
    item_b, score_b = sub_b
    if item_a == item_b:
        return None
    if item_a in (pair.item_a, pair.item_b) or item_b in (pair.item_a, pair.item_b):
        # A substitute colliding with an original member degenerates into a
        # single replacement (or the real pair itself).
        return None
    count = math.floor(gamma * pair.count * (score_a + score_b) / 2.0)
    if count < 1:
        return None
    a, b = canonical_pair(item_a, item_b)
    if (a, b) in existing:
        return None
    return PairRecord(item_a=a, item_b=b, count=count, pmi=0.0,
                      provenance=PROVENANCE_BOTH)


def augment_dataset(
    pairs: PairDataset,
    sim: SimilarityProvider,
    cfg: AugmentConfig,
    taxo_stats: TaxonomyPairStats,
    catalog: Catalog,
    audit: list | None = None,
) -> PairDataset:
    """Expand the filtered real dataset with synthetic pairs.

    Per real pair: k left substitutions, k right, and k-by-k double
    substitutions — at most k^2 + 2k candidates. A candidate survives only
    if its count is nonzero, it does not duplicate a real pair, and its
    taxonomy pair passes the PMI filter computed on the REAL dataset
    (synthetic pairs have no purchases of their own to justify them).
    When several real pairs yield the same synthetic pair, the maximum
    count wins; summing would fabricate evidence. Real records are
    returned unchanged.
    """
    real_keys = frozenset(rec.key for rec in pairs)
    synthetic: dict[tuple[str, str], PairRecord] = {}
    provider_failures: set[str] = set()

    def similar(item: str) -> list[tuple[str, float]]:
        if item in provider_failures:
            return []
        try:
            return sim.top_k(item, cfg.k_similar, cfg.min_similarity)
        except (OutOfCoverageError, UndefinedSimilarityError) as exc:
            provider_failures.add(item)
            logger.warning("similarity provider failed for %r (%s); skipping", item, exc)
            return []

    def admit(candidate: PairRecord | None, source: PairRecord, kind: str,
              scores: tuple[float, ...]) -> None:
        if candidate is None:
            return
        entry_a = catalog.get(candidate.item_a)
        entry_b = catalog.get(candidate.item_b)
        if entry_a is None or entry_b is None:
            logger.warning(
                "synthetic pair (%s, %s) dropped: not in catalog, taxonomy unverifiable",
                candidate.item_a, candidate.item_b,
            )
            return
        try:
            taxo_pmi = taxo_stats.pmi(entry_a.taxonomy, entry_b.taxonomy)
        except UndefinedPmiError:
            # Taxonomy combination never observed in real purchases.
            return
        if taxo_pmi < cfg.min_taxonomy_pmi:
            return
        candidate = PairRecord(
            item_a=candidate.item_a, item_b=candidate.item_b,
            count=candidate.count, pmi=taxo_pmi, provenance=candidate.provenance,
        )
        held = synthetic.get(candidate.key)
        if held is None or candidate.count > held.count:
            synthetic[candidate.key] = candidate
        if audit is not None:
            audit.append({
                "source": (source.item_a, source.item_b, source.count),
                "kind": kind,
                "pair": candidate.key,
                "scores": list(scores),
                "count": candidate.count,
                "taxonomy_pmi": taxo_pmi,
            })

    for rec in pairs:
        subs_a = similar(rec.item_a)
        subs_b = similar(rec.item_b)
        for sub, score in subs_a:
            admit(replace_single(rec, (sub, score), "left", cfg.gamma, real_keys),
                  rec, "replace_single_left", (score,))
        for sub, score in subs_b:
            admit(replace_single(rec, (sub, score), "right", cfg.gamma, real_keys),
                  rec, "replace_single_right", (score,))
        for sub_a, score_a in subs_a:
            for sub_b, score_b in subs_b:
                admit(replace_both(rec, (sub_a, score_a), (sub_b, score_b),
                                   cfg.gamma, real_keys),
                      rec, "replace_both", (score_a, score_b))

    out = PairDataset()
    real_mass = 0
    for rec in pairs:
        out.add(rec)
        real_mass += rec.count
    synthetic_mass = 0
    for key in sorted(synthetic):
        out.add(synthetic[key])
        synthetic_mass += synthetic[key].count
    ratio = synthetic_mass / real_mass if real_mass else math.inf
    logger.info(
        "augmentation added %d synthetic pairs (mass %d, %.3fx the real mass %d)",
        len(synthetic), synthetic_mass, ratio, real_mass,
    )
    if audit is not None:
        audit.append({
            "summary": {
                "real_pairs": len(pairs), "synthetic_pairs": len(synthetic),
                "real_mass": real_mass, "synthetic_mass": synthetic_mass,
                "mass_ratio": ratio,
            }
        })
    return out


def query_with_ia(
    target: str,
    model: DualEmbedding,
    sim: SimilarityProvider,
    k: int,
    index: ExactIndex | HnswIndex | None = None,
) -> RecommendationList:
    """Cross-matrix query with inference augmentation.

    In-vocabulary targets pass straight through. Otherwise the most
    similar in-vocabulary item stands in as a proxy and the result is
    flagged with it. Targets unknown to both the model and the similarity
    provider are genuinely out of coverage.
    """
    if index is None:
        index = build_exact_index(model)
    if target in model:
        return query(model, target, RetrievalVariant.IN_OUT, k, index)
    try:
        ranking = sim.top_k(target, None, 0.0)
    except OutOfCoverageError:
        raise OutOfCoverageError(target) from None
    proxy = next((item for item, _ in ranking if item in model), None)
    if proxy is None:
        raise OutOfCoverageError(target)
    proxied = query(model, proxy, RetrievalVariant.IN_OUT, k, index)
    result = RecommendationList(
        target=target, variant=RetrievalVariant.IN_OUT,
        entries=[(it, sc) for it, sc in proxied.entries if it != target],
        proxy_item=proxy,
    )
    result.validate()
    return result
