"""Synthetic purchase/click corpus generation from a known complement
graph, for desk-scale verification of directional claims.

The world is a set of item categories wired into a directed complement
graph. Purchase baskets mix items from an anchor category with items from
one of its complement categories, so at zero noise every cross-category
co-purchase is a graph edge and the ground truth is known exactly. Click
sessions are dominated by within-category browsing, which makes
same-category items near neighbors in a click-trained embedding — the
premise the augmentation stage relies on. A configurable fraction of
items is held out of purchase sessions entirely (but still clicked),
creating genuine cold-start items.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .corpus import Catalog, CatalogEntry, Session, SessionSet
from .errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class WorldConfig:
    n_categories: int = 20
    items_per_category: int = 50
    #: Each category complements its next ``out_degree`` ring neighbors;
    #: pass explicit directed edges to override the ring construction.
    out_degree: int = 2
    edges: list[tuple[int, int]] | None = None
    popularity_skew: float = 1.0
    n_purchase_sessions: int = 50_000
    n_click_sessions: int = 20_000
    n_users: int = 10_000
    anchor_items: tuple[int, int] = (1, 2)
    complement_items: tuple[int, int] = (1, 2)
    click_session_length: tuple[int, int] = (3, 8)
    noise_rate: float = 0.05
    holdout_item_fraction: float = 0.0
    categories_per_department: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.n_categories < 2:
            raise ConfigError("need at least 2 categories")
        if self.items_per_category < 1:
            raise ConfigError("need at least 1 item per category")
        if self.edges is None and not 1 <= self.out_degree < self.n_categories:
            raise ConfigError("out_degree must be in [1, n_categories)")
        if self.edges is not None:
            if not self.edges:
                raise ConfigError("explicit edge list must be nonempty")
            for a, b in self.edges:
                if a == b:
                    raise ConfigError(f"self-loop category edge ({a}, {b})")
                if not (0 <= a < self.n_categories and 0 <= b < self.n_categories):
                    raise ConfigError(f"edge ({a}, {b}) out of category range")
        if not 0.0 <= self.noise_rate < 1.0:
            raise ConfigError("noise_rate must be in [0, 1)")
        if not 0.0 <= self.holdout_item_fraction < 1.0:
            raise ConfigError("holdout_item_fraction must be in [0, 1)")
        for name in ("anchor_items", "complement_items", "click_session_length"):
            lo, hi = getattr(self, name)
            if lo < 1 or hi < lo:
                raise ConfigError(f"{name} range ({lo}, {hi}) is invalid")
        if self.categories_per_department < 1:
            raise ConfigError("categories_per_department must be >= 1")


@dataclass
class WorldTruth:
    """What the generator knows and the models must rediscover."""

    category_of: dict[str, int]
    #: Per item: complementary items = members of categories adjacent to its
    #: own in either direction; never same-category items.
    complements: dict[str, frozenset[str]]
    holdout_items: frozenset[str]
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def adjacent_categories(self, category: int) -> set[int]:
        return (
            {b for a, b in self.edges if a == category}
            | {a for a, b in self.edges if b == category}
        )


def _category_edges(cfg: WorldConfig) -> list[tuple[int, int]]:
    if cfg.edges is not None:
        return sorted(set(cfg.edges))
    return sorted(
        (c, (c + step) % cfg.n_categories)
        for c in range(cfg.n_categories)
        for step in range(1, cfg.out_degree + 1)
    )


def _item_id(category: int, rank: int) -> str:
    return f"c{category:03d}i{rank:03d}"


def items_by_category(cfg: WorldConfig) -> list[list[str]]:
    return [
        [_item_id(c, r) for r in range(cfg.items_per_category)]
        for c in range(cfg.n_categories)
    ]


def generate_world(cfg: WorldConfig) -> tuple[Catalog, WorldTruth]:
    """Assign items to categories, derive the taxonomy catalog and the
    ground-truth complement sets, and pick the held-out cold items."""
    edges = _category_edges(cfg)
    groups = items_by_category(cfg)
    catalog: Catalog = {}
    category_of: dict[str, int] = {}
    for c, members in enumerate(groups):
        dept = f"dept{c // cfg.categories_per_department:02d}"
        for r, item in enumerate(members):
            catalog[item] = CatalogEntry(
                item_id=item,
                taxonomy=(dept, f"cat{c:03d}"),
                title=f"category {c} item {r}",
            )
            category_of[item] = c
    edge_set = frozenset(edges)
    truth_categories = [
        sorted({b for a, b in edges if a == c} | {a for a, b in edges if b == c})
        for c in range(cfg.n_categories)
    ]
    complements = {
        item: frozenset(
            member for adj in truth_categories[c] for member in groups[adj]
        )
        for c, members in enumerate(groups)
        for item in members
    }
    rng = np.random.default_rng([cfg.seed, 0])
    holdout: set[str] = set()
    n_hold = int(np.floor(cfg.holdout_item_fraction * cfg.items_per_category))
    if n_hold:
        for members in groups:
            chosen = rng.choice(len(members), size=n_hold, replace=False)
            holdout.update(members[i] for i in chosen)
    return catalog, WorldTruth(
        category_of=category_of,
        complements=complements,
        holdout_items=frozenset(holdout),
        edges=edge_set,
    )


def _zipf_weights(n: int, skew: float) -> np.ndarray:
    ranks = np.arange(1, n + 1, dtype=np.float64)
    w = ranks ** (-skew)
    return w / w.sum()


def _sample_items(rng: np.random.Generator, members: list[str],
                  weights: np.ndarray, n: int) -> list[str]:
    n = min(n, len(members))
    idx = rng.choice(len(members), size=n, replace=False, p=weights)
    return [members[i] for i in idx]


def generate_sessions(
    catalog: Catalog,
    truth: WorldTruth,
    cfg: WorldConfig,
    seed: int | None = None,
    holdout_in_purchases: bool = False,
) -> SessionSet:
    """Generate purchase and click sessions.

    Purchase baskets: a uniform anchor category contributes 1..n items by
    Zipf popularity, one uniformly chosen complement neighbor contributes
    1..n more, and with probability ``noise_rate`` an off-graph item from
    a uniformly random category is injected. Held-out items are excluded
    from purchases unless ``holdout_in_purchases`` is set (useful for
    generating an evaluation period in which cold items finally sell).

    Click sessions browse a single category; with probability
    ``noise_rate`` one neighbor-category item is appended. Every item is
    guaranteed at least one click by padding with within-category
    make-up sessions.
    """
    rng = np.random.default_rng([cfg.seed if seed is None else seed, 1])
    groups = items_by_category(cfg)
    neighbors = [
        sorted(b for a, b in truth.edges if a == c) for c in range(cfg.n_categories)
    ]
    for c, outs in enumerate(neighbors):
        if not outs:
            # Categories with no out-edge anchor nothing; still clickable.
            logger.warning("category %d has no complement out-edges", c)

    buyable: list[list[str]] = []
    buy_weights: list[np.ndarray] = []
    click_weights: list[np.ndarray] = []
    for members in groups:
        allowed = (
            members if holdout_in_purchases
            else [it for it in members if it not in truth.holdout_items]
        )
        if not allowed:
            raise ConfigError("holdout fraction leaves a category with no purchasable items")
        buyable.append(allowed)
        buy_weights.append(_zipf_weights(len(allowed), cfg.popularity_skew))
        click_weights.append(_zipf_weights(len(members), cfg.popularity_skew))

    sessions: list[Session] = []

    def user() -> str:
        return f"u{int(rng.integers(cfg.n_users)):05d}"

    anchored = [c for c in range(cfg.n_categories) if neighbors[c]]
    if not anchored:
        raise ConfigError("complement graph has no out-edges at all")
    for s in range(cfg.n_purchase_sessions):
        a = anchored[int(rng.integers(len(anchored)))]
        b = neighbors[a][int(rng.integers(len(neighbors[a])))]
        n_a = int(rng.integers(cfg.anchor_items[0], cfg.anchor_items[1] + 1))
        n_b = int(rng.integers(cfg.complement_items[0], cfg.complement_items[1] + 1))
        basket = _sample_items(rng, buyable[a], buy_weights[a], n_a)
        basket += _sample_items(rng, buyable[b], buy_weights[b], n_b)
        if cfg.noise_rate and rng.random() < cfg.noise_rate:
            c = int(rng.integers(cfg.n_categories))
            basket += _sample_items(rng, buyable[c], buy_weights[c], 1)
        sessions.append(Session(
            session_id=f"p{s:07d}", user_id=user(),
            items=list(dict.fromkeys(basket)), channel="purchase",
        ))

    clicked: set[str] = set()
    for s in range(cfg.n_click_sessions):
        c = int(rng.integers(cfg.n_categories))
        length = int(rng.integers(cfg.click_session_length[0],
                                  cfg.click_session_length[1] + 1))
        browsed = _sample_items(rng, groups[c], click_weights[c], length)
        if cfg.noise_rate and rng.random() < cfg.noise_rate and neighbors[c]:
            b = neighbors[c][int(rng.integers(len(neighbors[c])))]
            browsed += _sample_items(rng, groups[b], click_weights[b], 1)
        clicked.update(browsed)
        sessions.append(Session(
            session_id=f"k{s:07d}", user_id=user(), items=browsed, channel="click",
        ))

    # Make-up clicks so that every item is clickable coverage-wise. With
    # the click channel disabled outright, skip them: a purchase-only
    # batch (the evaluation period) should contain no clicks at all.
    makeup = 0
    for c, members in enumerate(groups if cfg.n_click_sessions else []):
        unseen = [it for it in members if it not in clicked]
        lo, hi = cfg.click_session_length
        for start in range(0, len(unseen), hi):
            chunk = unseen[start:start + hi]
            if len(chunk) == 1:
                # A one-item session trains nothing; pad with a popular neighbor.
                chunk = chunk + [groups[c][0]] if chunk[0] != groups[c][0] else chunk + [groups[c][-1]]
            sessions.append(Session(
                session_id=f"m{makeup:07d}", user_id=user(),
                items=chunk, channel="click",
            ))
            makeup += 1
    if makeup:
        logger.info("added %d make-up click sessions for unseen items", makeup)

    return SessionSet(sessions=sessions)


def write_truth(truth: WorldTruth, path: str | Path) -> None:
    """TSV of item_id <TAB> complement_item_id, one edge per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for item in sorted(truth.complements):
            for comp in sorted(truth.complements[item]):
                fh.write(f"{item}\t{comp}\n")


def read_truth(path: str | Path) -> dict[str, frozenset[str]]:
    out: dict[str, set[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            item, _, comp = line.rstrip("\n").partition("\t")
            out.setdefault(item, set()).add(comp)
    return {k: frozenset(v) for k, v in out.items()}


def evaluation_period(catalog: Catalog, truth: WorldTruth, cfg: WorldConfig,
                      n_sessions: int | None = None) -> SessionSet:
    """A second, disjointly seeded batch of purchase sessions in which the
    held-out items do sell — the test-period corpus."""
    test_cfg = replace(
        cfg,
        n_purchase_sessions=n_sessions or max(1, cfg.n_purchase_sessions // 5),
        n_click_sessions=0,
    )
    return generate_sessions(catalog, truth, test_cfg, seed=cfg.seed + 7919,
                             holdout_in_purchases=True)
