"""Session parsing, outlier filtering and co-purchase pair construction.

The raw corpus is a line-delimited log of user sessions. This module turns
it into the pairwise dataset used for training: every session of n distinct
items contributes all n(n-1)/2 unordered pairs, counts are aggregated
across sessions, and weak pairs are pruned by co-occurrence count, PMI and
taxonomy heuristics.

File formats (all TSV, UTF-8):
  sessions   user_id <TAB> session_id <TAB> channel <TAB> item1,item2,...
  catalog    item_id <TAB> taxonomy path joined by '>' <TAB> title
  pairs      item_a <TAB> item_b <TAB> count <TAB> pmi <TAB> provenance
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import ConfigError, CorpusError, InputError, UndefinedPmiError

logger = logging.getLogger(__name__)

CHANNELS = ("purchase", "click")

PROVENANCE_REAL = "real"
PROVENANCE_SINGLE = "synthetic_single"
PROVENANCE_BOTH = "synthetic_both"
PROVENANCES = (PROVENANCE_REAL, PROVENANCE_SINGLE, PROVENANCE_BOTH)


@dataclass
class Session:
    """One ordered user session. Item order only matters for sequence-mode
    training; pair generation deduplicates."""

    session_id: str
    user_id: str
    items: list[str]
    channel: str = "purchase"


@dataclass
class SessionSet:
    sessions: list[Session] = field(default_factory=list)
    malformed_count: int = 0

    def __len__(self) -> int:
        return len(self.sessions)

    def __iter__(self) -> Iterator[Session]:
        return iter(self.sessions)

    def by_channel(self, channel: str) -> "SessionSet":
        return SessionSet([s for s in self.sessions if s.channel == channel])


@dataclass
class CatalogEntry:
    item_id: str
    taxonomy: tuple[str, ...]
    title: str = ""


Catalog = dict[str, CatalogEntry]


@dataclass
class PairRecord:
    """An unordered item pair with aggregated co-occurrence count.

    item_a < item_b lexicographically; training expands each record into
    both directed examples."""

    item_a: str
    item_b: str
    count: int
    pmi: float = 0.0
    provenance: str = PROVENANCE_REAL

    @property
    def key(self) -> tuple[str, str]:
        return (self.item_a, self.item_b)


def canonical_pair(a: str, b: str) -> tuple[str, str]:
    if a == b:
        raise ValueError(f"pair of identical items {a!r}")
    return (a, b) if a < b else (b, a)


class PairDataset:
    """Mapping of canonical pairs to :class:`PairRecord`, iterated in sorted
    key order for reproducible output."""

    def __init__(self, records: Iterable[PairRecord] = ()):
        self.records: dict[tuple[str, str], PairRecord] = {}
        for rec in records:
            self.add(rec)

    def add(self, rec: PairRecord) -> None:
        if rec.key in self.records:
            raise ValueError(f"duplicate pair {rec.key}")
        if (rec.item_b, rec.item_a) in self.records:
            raise ValueError(f"non-canonical duplicate of {rec.key}")
        self.records[rec.key] = rec

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, key: tuple[str, str]) -> bool:
        return key in self.records

    def __getitem__(self, key: tuple[str, str]) -> PairRecord:
        return self.records[key]

    def __iter__(self) -> Iterator[PairRecord]:
        for key in sorted(self.records):
            yield self.records[key]

    def vocab(self) -> list[str]:
        items = set()
        for a, b in self.records:
            items.add(a)
            items.add(b)
        return sorted(items)


@dataclass
class PairStats:
    """Session-level occurrence counts backing the PMI formula: how many
    sessions contain each item, each pair, and how many sessions exist."""

    item_counts: Counter = field(default_factory=Counter)
    pair_counts: dict[tuple[str, str], int] = field(default_factory=dict)
    total_sessions: int = 0


@dataclass
class TaxonomyPairStats:
    """Pair counts aggregated at the full-taxonomy-path level. Each product
    pair is treated as one observation of its (unordered) taxonomy pair, so
    the product-level PMI formula carries over unchanged."""

    taxo_counts: Counter = field(default_factory=Counter)
    pair_counts: dict[tuple[tuple[str, ...], tuple[str, ...]], int] = field(
        default_factory=dict
    )
    total_pairs: int = 0

    def pmi(self, tax_a: tuple[str, ...], tax_b: tuple[str, ...]) -> float:
        key = (tax_a, tax_b) if tax_a <= tax_b else (tax_b, tax_a)
        n_ab = self.pair_counts.get(key, 0)
        n_a = self.taxo_counts.get(tax_a, 0)
        n_b = self.taxo_counts.get(tax_b, 0)
        if n_ab == 0 or n_a == 0 or n_b == 0 or self.total_pairs == 0:
            raise UndefinedPmiError(f"no observations for taxonomy pair {key}")
        return math.log(n_ab * self.total_pairs / (n_a * n_b))


@dataclass
class FilterConfig:
    user_quantile: float = 0.999
    session_quantile: float = 0.999
    min_pair_count: int = 3
    min_product_pmi: float = 0.0
    min_taxonomy_pmi: float = 0.0
    taxonomy_exception_list: frozenset[tuple[str, ...]] = frozenset()

    def __post_init__(self):
        for name in ("user_quantile", "session_quantile"):
            q = getattr(self, name)
            if not 0.0 < q <= 1.0:
                raise ConfigError(f"{name} must be in (0, 1], got {q}")
        if self.min_pair_count < 1:
            raise ConfigError(f"min_pair_count must be >= 1, got {self.min_pair_count}")


# ---------------------------------------------------------------------------
# Parsing


def _parse_session_line(line: str) -> Session | None:
    fields = line.rstrip("\n").split("\t")
    if len(fields) != 4:
        return None
    user_id, session_id, channel, item_field = fields
    if not user_id or not session_id or channel not in CHANNELS:
        return None
    items = item_field.split(",")
    if not items or any(not it for it in items):
        return None
    return Session(session_id=session_id, user_id=user_id, items=items, channel=channel)


def parse_sessions(stream: Iterable[str] | str | Path) -> SessionSet:
    """Parse line-delimited session records.

    Malformed lines are counted and skipped; the parse only fails outright
    when the stream is unreadable or more than half of the non-blank lines
    are malformed.
    """
    close_after = False
    if isinstance(stream, (str, Path)):
        try:
            fh = open(stream, "r", encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot read sessions from {stream}: {exc}") from exc
        stream = fh
        close_after = True

    sessions: list[Session] = []
    malformed = 0
    total = 0
    try:
        for line in stream:
            if not line.strip():
                continue
            total += 1
            session = _parse_session_line(line)
            if session is None:
                malformed += 1
            else:
                sessions.append(session)
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read session stream: {exc}") from exc
    finally:
        if close_after:
            stream.close()

    if total == 0:
        logger.warning("session stream is empty")
    elif malformed * 2 > total:
        raise CorpusError(
            f"{malformed} of {total} session lines are malformed; refusing to continue"
        )
    elif malformed:
        logger.warning("skipped %d malformed session lines (of %d)", malformed, total)
    return SessionSet(sessions=sessions, malformed_count=malformed)


def write_sessions(sessions: SessionSet, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sessions:
            fh.write(f"{s.user_id}\t{s.session_id}\t{s.channel}\t{','.join(s.items)}\n")


def read_catalog(path: str | Path) -> Catalog:
    catalog: Catalog = {}
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read catalog from {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) < 2 or not fields[0] or not fields[1]:
                raise CorpusError(f"{path}:{lineno}: malformed catalog line")
            taxonomy = tuple(seg for seg in fields[1].split(">") if seg)
            if not taxonomy:
                raise CorpusError(f"{path}:{lineno}: empty taxonomy path")
            title = fields[2] if len(fields) > 2 else ""
            if fields[0] in catalog:
                raise CorpusError(f"{path}:{lineno}: duplicate item {fields[0]!r}")
            catalog[fields[0]] = CatalogEntry(fields[0], taxonomy, title)
    return catalog


def write_catalog(catalog: Catalog, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item_id in sorted(catalog):
            entry = catalog[item_id]
            fh.write(f"{entry.item_id}\t{'>'.join(entry.taxonomy)}\t{entry.title}\n")


def read_exception_list(path: str | Path) -> frozenset[tuple[str, ...]]:
    """One taxonomy path per line, segments joined by '>'."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read exception list from {path}: {exc}") from exc
    paths = set()
    for line in text.splitlines():
        line = line.strip()
        if line:
            paths.add(tuple(seg for seg in line.split(">") if seg))
    return frozenset(paths)


# ---------------------------------------------------------------------------
# Outlier filtering


def _quantile_threshold(counts: list[int], quantile: float) -> float:
    return float(np.quantile(np.asarray(counts, dtype=np.float64), quantile))


def filter_outliers(sessions: SessionSet, cfg: FilterConfig) -> SessionSet:
    """Drop overly active users, then overly large sessions.

    A user is removed (with all their sessions) when their number of unique
    purchased items strictly exceeds the empirical ``user_quantile`` of the
    per-user distribution; afterwards a session is removed when its unique
    item count strictly exceeds the ``session_quantile`` of the remaining
    per-session distribution. Quantiles use linear interpolation.
    """
    if not sessions.sessions:
        return SessionSet()

    user_items: dict[str, set[str]] = {}
    for s in sessions:
        user_items.setdefault(s.user_id, set()).update(s.items)
    user_threshold = _quantile_threshold(
        [len(v) for v in user_items.values()], cfg.user_quantile
    )
    dropped_users = {u for u, v in user_items.items() if len(v) > user_threshold}
    kept = [s for s in sessions if s.user_id not in dropped_users]
    if dropped_users:
        logger.info(
            "removed %d users above the %.4f unique-purchase quantile (%.2f)",
            len(dropped_users), cfg.user_quantile, user_threshold,
        )

    if not kept:
        return SessionSet()
    session_threshold = _quantile_threshold(
        [len(set(s.items)) for s in kept], cfg.session_quantile
    )
    before = len(kept)
    kept = [s for s in kept if len(set(s.items)) <= session_threshold]
    if len(kept) < before:
        logger.info(
            "removed %d sessions above the %.4f unique-item quantile (%.2f)",
            before - len(kept), cfg.session_quantile, session_threshold,
        )
    return SessionSet(sessions=kept)


# ---------------------------------------------------------------------------
# Pair construction and PMI


def build_pairs(sessions: SessionSet) -> tuple[PairDataset, PairStats]:
    """Expand each session into all unordered pairs of its distinct items.

    Counts aggregate across sessions; the returned stats count sessions per
    item, sessions per pair and total sessions, which is exactly what the
    PMI formula needs.
    """
    stats = PairStats(total_sessions=len(sessions.sessions))
    for s in sessions:
        distinct = sorted(set(s.items))
        for item in distinct:
            stats.item_counts[item] += 1
        for i, a in enumerate(distinct):
            for b in distinct[i + 1:]:
                key = (a, b)
                stats.pair_counts[key] = stats.pair_counts.get(key, 0) + 1

    dataset = PairDataset(
        PairRecord(a, b, count, provenance=PROVENANCE_REAL)
        for (a, b), count in stats.pair_counts.items()
    )
    for rec in dataset.records.values():
        rec.pmi = compute_pmi(stats, rec.key)
    return dataset, stats


def compute_pmi(stats: PairStats, pair: tuple[str, str]) -> float:
    """log((n_ij/T) / ((n_i/T)(n_j/T))), natural log."""
    a, b = pair
    n_i = stats.item_counts.get(a, 0)
    n_j = stats.item_counts.get(b, 0)
    key = (a, b) if a < b else (b, a)
    n_ij = stats.pair_counts.get(key, 0)
    if n_i == 0 or n_j == 0 or n_ij == 0 or stats.total_sessions == 0:
        raise UndefinedPmiError(
            f"PMI undefined for {pair}: n_i={n_i} n_j={n_j} n_ij={n_ij} "
            f"T={stats.total_sessions}"
        )
    return math.log(n_ij * stats.total_sessions / (n_i * n_j))


def build_taxonomy_pairs(pairs: PairDataset, catalog: Catalog) -> TaxonomyPairStats:
    """Aggregate product pairs at the taxonomy level.

    Self-pairs (both items in one taxonomy) are recorded too; they only
    occur for exception-listed taxonomies after filtering, but on raw pairs
    they are what exception-list curation looks at.
    """
    stats = TaxonomyPairStats()
    for rec in pairs:
        ea = catalog.get(rec.item_a)
        eb = catalog.get(rec.item_b)
        if ea is None or eb is None:
            continue
        stats.total_pairs += 1
        taxos = {ea.taxonomy, eb.taxonomy}
        for tax in taxos:
            stats.taxo_counts[tax] += 1
        ta, tb = ea.taxonomy, eb.taxonomy
        key = (ta, tb) if ta <= tb else (tb, ta)
        stats.pair_counts[key] = stats.pair_counts.get(key, 0) + 1
    return stats


def filter_pairs(
    pairs: PairDataset,
    catalog: Catalog,
    cfg: FilterConfig,
    taxo_stats: TaxonomyPairStats | None = None,
) -> PairDataset:
    """Apply the count, PMI and taxonomy filters to a pair dataset.

    Rules, in order: count >= min_pair_count; product PMI >= min_product_pmi;
    identical full taxonomy paths are dropped unless exception-listed;
    taxonomy-level PMI >= min_taxonomy_pmi (skipped when taxo_stats is None,
    which is how the first pass of the pipeline builds the stats input for
    the second). Items absent from the catalog stay in the dataset but are
    exempt from the taxonomy rules.
    """
    kept = []
    missing_catalog = 0
    for rec in pairs:
        if rec.count < cfg.min_pair_count:
            continue
        if rec.pmi < cfg.min_product_pmi:
            continue
        ea = catalog.get(rec.item_a)
        eb = catalog.get(rec.item_b)
        if ea is None or eb is None:
            missing_catalog += 1
            kept.append(rec)
            continue
        if ea.taxonomy == eb.taxonomy and ea.taxonomy not in cfg.taxonomy_exception_list:
            continue
        if taxo_stats is not None:
            try:
                tax_pmi = taxo_stats.pmi(ea.taxonomy, eb.taxonomy)
            except UndefinedPmiError:
                # No real-purchase evidence at the taxonomy level; treat as
                # arbitrarily weak.
                tax_pmi = -math.inf
            if tax_pmi < cfg.min_taxonomy_pmi:
                continue
        kept.append(rec)
    if missing_catalog:
        logger.warning(
            "%d pairs reference items missing from the catalog; "
            "kept without taxonomy filtering", missing_catalog,
        )
    return PairDataset(kept)


# ---------------------------------------------------------------------------
# Pair dataset I/O


def write_pairs(pairs: PairDataset, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in pairs:  # sorted by (item_a, item_b)
            fh.write(
                f"{rec.item_a}\t{rec.item_b}\t{rec.count}"
                f"\t{float(rec.pmi)!r}\t{rec.provenance}\n"
            )


def read_pairs(path: str | Path) -> PairDataset:
    dataset = PairDataset()
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read pairs from {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 5 or fields[4] not in PROVENANCES:
                raise CorpusError(f"{path}:{lineno}: malformed pair line")
            try:
                rec = PairRecord(
                    item_a=fields[0],
                    item_b=fields[1],
                    count=int(fields[2]),
                    pmi=float(fields[3]),
                    provenance=fields[4],
                )
            except ValueError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
            if rec.item_a >= rec.item_b:
                raise CorpusError(f"{path}:{lineno}: pair not in canonical order")
            dataset.add(rec)
    return dataset


def write_taxonomy_stats(stats: TaxonomyPairStats, path: str | Path) -> None:
    """TSV `tax_a<TAB>tax_b<TAB>count` (paths '>'-joined, canonical order);
    marginals and totals are reconstructed on read."""
    with open(path, "w", encoding="utf-8") as fh:
        for (tax_a, tax_b), count in sorted(stats.pair_counts.items()):
            fh.write(f"{'>'.join(tax_a)}\t{'>'.join(tax_b)}\t{count}\n")


def read_taxonomy_stats(path: str | Path) -> TaxonomyPairStats:
    stats = TaxonomyPairStats()
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read taxonomy stats from {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 3:
                raise CorpusError(f"{path}:{lineno}: malformed taxonomy stats line")
            tax_a = tuple(fields[0].split(">"))
            tax_b = tuple(fields[1].split(">"))
            try:
                count = int(fields[2])
            except ValueError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
            if tax_a > tax_b:
                raise CorpusError(f"{path}:{lineno}: taxonomy pair not canonical")
            key = (tax_a, tax_b)
            if key in stats.pair_counts:
                raise CorpusError(f"{path}:{lineno}: duplicate taxonomy pair")
            stats.pair_counts[key] = count
            stats.total_pairs += count
            stats.taxo_counts[tax_a] += count
            if tax_b != tax_a:
                stats.taxo_counts[tax_b] += count
    return stats
