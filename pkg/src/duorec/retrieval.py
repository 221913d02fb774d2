"""Ranked candidate retrieval over the two embedding matrices.

Four pairings of (query matrix, index matrix) are supported. Scoring a
query item's input vector against all output vectors is the
complementarity signal; input-against-input surfaces similar items. An
exact full-scan index serves as the oracle; a navigable-small-world graph
index answers the same queries approximately for large vocabularies.

Indexes are immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

import heapq
import logging
import math
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .corpus import Catalog
from .errors import ConfigError, InputError, OutOfCoverageError, UndefinedSimilarityError
from .provenance import fingerprint_file
from .sgns import DualEmbedding

logger = logging.getLogger(__name__)

INDEX_MAGIC = "ANNIDX"

INPUT_SIDE = "input"
OUTPUT_SIDE = "output"


class RetrievalVariant(Enum):
    """(query matrix, index matrix) selection."""

    IN_OUT = (INPUT_SIDE, OUTPUT_SIDE)
    IN_IN = (INPUT_SIDE, INPUT_SIDE)
    OUT_OUT = (OUTPUT_SIDE, OUTPUT_SIDE)
    OUT_IN = (OUTPUT_SIDE, INPUT_SIDE)

    @property
    def query_side(self) -> str:
        return self.value[0]

    @property
    def index_side(self) -> str:
        return self.value[1]

    @classmethod
    def parse(cls, name: str) -> "RetrievalVariant":
        try:
            return cls[name.strip().upper().replace("-", "_")]
        except KeyError:
            raise ConfigError(f"unknown retrieval variant {name!r}") from None


@dataclass
class RecommendationList:
    """Ranked (item, score) entries for one target, best first.

    ``variant`` is None for non-embedding recommenders (baselines)."""

    target: str
    variant: RetrievalVariant | None
    entries: list[tuple[str, float]]
    proxy_item: str | None = None

    def items(self) -> list[str]:
        return [item for item, _ in self.entries]

    def validate(self) -> None:
        seen = set()
        prev = math.inf
        for item, score in self.entries:
            assert item != self.target, "target leaked into its own recommendations"
            assert item not in seen, f"duplicate recommendation {item!r}"
            assert -1.0 - 1e-9 <= score <= 1.0 + 1e-9, f"cosine out of range: {score}"
            assert score <= prev + 1e-12, "scores not non-increasing"
            seen.add(item)
            prev = score


@dataclass
class AnnIndexConfig:
    graph_degree: int = 16
    ef_construction: int = 200
    ef_search: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.graph_degree < 2:
            raise ConfigError(f"graph_degree must be >= 2, got {self.graph_degree}")
        if self.ef_construction < 1 or self.ef_search < 1:
            raise ConfigError("beam widths must be >= 1")


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise UndefinedSimilarityError("cosine is undefined for a zero vector")
    return float(np.dot(u, v) / (nu * nv))


def _unit_rows(items: list[str], matrix: np.ndarray, side: str) -> tuple[list[str], np.ndarray]:
    """Normalize rows, dropping zero rows (untrained items) with a warning."""
    matrix = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=1)
    keep = norms > 0
    dropped = int((~keep).sum())
    if dropped:
        logger.warning(
            "skipping %d zero rows while building the %s-side index", dropped, side
        )
    kept_items = [it for it, ok in zip(items, keep) if ok]
    unit = matrix[keep] / norms[keep, None]
    order = sorted(range(len(kept_items)), key=lambda i: kept_items[i])
    return [kept_items[i] for i in order], unit[order]


class ExactIndex:
    """Full-scan cosine index; the oracle every approximate index is tested
    against. Rows are stored unit-normalized in ascending item order so a
    stable sort on score breaks ties by identifier."""

    def __init__(self, items: list[str], matrix: np.ndarray, side: str = OUTPUT_SIDE):
        self.side = side
        self.items, self.vectors = _unit_rows(items, matrix, side)

    def __len__(self) -> int:
        return len(self.items)

    def top_k(self, vector: np.ndarray, k: int,
              exclude: frozenset[str] | set[str] = frozenset()) -> list[tuple[str, float]]:
        if k <= 0:
            return []
        norm = np.linalg.norm(vector)
        if norm == 0.0:
            raise UndefinedSimilarityError("cannot query an index with a zero vector")
        scores = self.vectors @ (np.asarray(vector, dtype=np.float64) / norm)
        order = np.argsort(-scores, kind="stable")
        out = []
        for row in order:
            item = self.items[row]
            if item in exclude:
                continue
            out.append((item, float(scores[row])))
            if len(out) == k:
                break
        return out


def build_exact_index(model: DualEmbedding, side: str = OUTPUT_SIDE) -> ExactIndex:
    return ExactIndex(model.vocab, _matrix_for(model, side), side)


def _matrix_for(model: DualEmbedding, side: str) -> np.ndarray:
    if side == INPUT_SIDE:
        return model.input_matrix
    if side == OUTPUT_SIDE:
        return model.output_matrix
    raise ConfigError(f"unknown matrix side {side!r}")


class HnswIndex:
    """Hierarchical navigable-small-world graph over cosine distance.

    Classic construction: geometric level assignment with multiplier
    1/ln(M), beam search per layer, and the closer-to-query-than-to-any-
    selected neighbor heuristic for edge selection. Layer 0 allows 2M
    edges per node, upper layers M. Distance is 1 - cosine on
    unit-normalized rows.
    """

    def __init__(self, items: list[str], matrix: np.ndarray, cfg: AnnIndexConfig,
                 side: str = OUTPUT_SIDE):
        self.side = side
        self.cfg = cfg
        self.items, self.vectors = _unit_rows(items, matrix, side)
        n = len(self.items)
        if n < 2:
            raise ConfigError("an approximate index needs at least 2 nonzero rows")
        self._m = cfg.graph_degree
        self._m0 = 2 * cfg.graph_degree
        self._level_mult = 1.0 / math.log(self._m)
        rng = np.random.default_rng(cfg.seed)
        self.levels = np.floor(
            -np.log(rng.uniform(np.finfo(float).tiny, 1.0, size=n)) * self._level_mult
        ).astype(np.int64)
        self.graph: list[dict[int, list[int]]] = [
            {} for _ in range(int(self.levels.max()) + 1)
        ]
        self.entry_point = -1
        for node in range(n):
            self._insert(node)

    # -- construction ------------------------------------------------------

    def _distances(self, query: np.ndarray, nodes: list[int]) -> np.ndarray:
        return 1.0 - self.vectors[nodes] @ query

    def _insert(self, node: int) -> None:
        level = int(self.levels[node])
        for lc in range(level + 1):
            self.graph[lc][node] = []
        if self.entry_point < 0:
            self.entry_point = node
            return
        query = self.vectors[node]
        ep = self.entry_point
        top = int(self.levels[self.entry_point])
        for lc in range(top, level, -1):
            ep = self._greedy(query, ep, lc)
        for lc in range(min(top, level), -1, -1):
            cap = self._m0 if lc == 0 else self._m
            candidates = self._search_layer(query, [ep], self.cfg.ef_construction, lc)
            neighbors = self._select(query, candidates, cap)
            self.graph[lc][node] = [n for _, n in neighbors]
            for dist, nb in neighbors:
                links = self.graph[lc][nb]
                links.append(node)
                if len(links) > cap:
                    pruned = self._select(
                        self.vectors[nb],
                        [(float(d), x) for d, x in zip(self._distances(self.vectors[nb], links), links)],
                        cap,
                    )
                    self.graph[lc][nb] = [n for _, n in pruned]
            ep = candidates[0][1]
        if level > top:
            self.entry_point = node

    def _greedy(self, query: np.ndarray, ep: int, layer: int) -> int:
        dist = float(self._distances(query, [ep])[0])
        while True:
            links = self.graph[layer][ep]
            if not links:
                return ep
            dists = self._distances(query, links)
            best = int(np.argmin(dists))
            if dists[best] < dist:
                dist = float(dists[best])
                ep = links[best]
            else:
                return ep

    def _search_layer(self, query: np.ndarray, entry_points: list[int], ef: int,
                      layer: int) -> list[tuple[float, int]]:
        """Beam search; returns (distance, node) sorted ascending."""
        visited = set(entry_points)
        dists = self._distances(query, entry_points)
        candidates = [(float(d), n) for d, n in zip(dists, entry_points)]
        heapq.heapify(candidates)
        results = [(-d, n) for d, n in candidates]
        heapq.heapify(results)
        while candidates:
            dist, node = heapq.heappop(candidates)
            if dist > -results[0][0]:
                break
            fresh = [n for n in self.graph[layer][node] if n not in visited]
            if not fresh:
                continue
            visited.update(fresh)
            for d, n in zip(self._distances(query, fresh), fresh):
                d = float(d)
                if len(results) < ef or d < -results[0][0]:
                    heapq.heappush(candidates, (d, n))
                    heapq.heappush(results, (-d, n))
                    if len(results) > ef:
                        heapq.heappop(results)
        return sorted((-d, n) for d, n in results)

    def _select(self, query: np.ndarray, candidates: list[tuple[float, int]],
                cap: int) -> list[tuple[float, int]]:
        """Keep candidates closer to the query than to anything already kept."""
        kept: list[tuple[float, int]] = []
        kept_rows = np.empty((cap, self.vectors.shape[1]))
        for dist, node in sorted(candidates):
            if len(kept) >= cap:
                break
            vec = self.vectors[node]
            m = len(kept)
            if m and bool((1.0 - kept_rows[:m] @ vec <= dist).any()):
                continue
            kept_rows[m] = vec
            kept.append((dist, node))
        if not kept and candidates:
            kept = sorted(candidates)[:cap]
        return kept

    # -- queries -----------------------------------------------------------

    def __len__(self) -> int:
        return len(self.items)

    def top_k(self, vector: np.ndarray, k: int,
              exclude: frozenset[str] | set[str] = frozenset()) -> list[tuple[str, float]]:
        if k <= 0:
            return []
        norm = np.linalg.norm(vector)
        if norm == 0.0:
            raise UndefinedSimilarityError("cannot query an index with a zero vector")
        query = np.asarray(vector, dtype=np.float64) / norm
        ep = self.entry_point
        for lc in range(int(self.levels[self.entry_point]), 0, -1):
            ep = self._greedy(query, ep, lc)
        ef = max(self.cfg.ef_search, k + len(exclude))
        found = self._search_layer(query, [ep], ef, 0)
        ranked = sorted((d, self.items[n]) for d, n in found)
        out = []
        for dist, item in ranked:
            if item in exclude:
                continue
            out.append((item, 1.0 - dist))
            if len(out) == k:
                break
        return out


def build_ann_index(model: DualEmbedding, cfg: AnnIndexConfig,
                    side: str = OUTPUT_SIDE) -> HnswIndex:
    return HnswIndex(model.vocab, _matrix_for(model, side), cfg, side)


def query(
    model: DualEmbedding,
    target: str,
    variant: RetrievalVariant,
    k: int,
    index: ExactIndex | HnswIndex,
    taxonomy_filter: Catalog | None = None,
) -> RecommendationList:
    """Top-k candidates for one target under the given variant.

    The index must have been built over the variant's index-side matrix.
    With ``taxonomy_filter`` set, candidates sharing the target's full
    taxonomy path are dropped (off by default).
    """
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if index.side != variant.index_side:
        raise ConfigError(
            f"variant {variant.name} needs a {variant.index_side}-side index, "
            f"got {index.side}-side"
        )
    if target not in model:
        raise OutOfCoverageError(target)
    vector = _matrix_for(model, variant.query_side)[model.row(target)]
    exclude = {target}
    # With a taxonomy filter active, over-fetch so the post-filter pool can
    # still fill k slots (best effort for the approximate index).
    fetch = k + 1 if taxonomy_filter is None else min(len(index), max(4 * k, 50) + 1)
    entries = index.top_k(vector, fetch, exclude=exclude)
    if taxonomy_filter is not None and target in taxonomy_filter:
        taxonomy = taxonomy_filter[target].taxonomy
        entries = [
            (item, score)
            for item, score in entries
            if item not in taxonomy_filter or taxonomy_filter[item].taxonomy != taxonomy
        ]
    result = RecommendationList(target=target, variant=variant, entries=entries[:k])
    result.validate()
    return result


# ---------------------------------------------------------------------------
# Index persistence: graph only; vectors are re-derived from the model file,
# which is referenced by content fingerprint.


def save_ann_index(index: HnswIndex, path: str | Path, model_path: str | Path) -> None:
    path = Path(path)
    fp = fingerprint_file(model_path)
    with open(path, "wb") as fh:
        fh.write(
            f"{INDEX_MAGIC} 1 {len(index.items)} {index.vectors.shape[1]} "
            f"{index.cfg.graph_degree}\n".encode()
        )
        fh.write(
            f"{index.side} {index.entry_point} {index.cfg.ef_construction} "
            f"{index.cfg.ef_search} {index.cfg.seed} {fp}\n".encode()
        )
        for item, level in zip(index.items, index.levels):
            fh.write(f"{item}\t{int(level)}\n".encode())
        fh.write(b"DATA\n")
        for node in range(len(index.items)):
            for lc in range(int(index.levels[node]) + 1):
                links = index.graph[lc][node]
                fh.write(struct.pack("<I", len(links)))
                fh.write(np.asarray(links, dtype="<u4").tobytes())


def load_ann_index(path: str | Path, model: DualEmbedding,
                   model_path: str | Path) -> HnswIndex:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            head = fh.readline().decode().split()
            if len(head) != 5 or head[0] != INDEX_MAGIC or head[1] != "1":
                raise InputError(f"{path}: not an index file")
            n, d, m = int(head[2]), int(head[3]), int(head[4])
            meta = fh.readline().decode().split()
            side, entry_point = meta[0], int(meta[1])
            cfg = AnnIndexConfig(
                graph_degree=m, ef_construction=int(meta[2]),
                ef_search=int(meta[3]), seed=int(meta[4]),
            )
            stored_fp = meta[5]
            actual_fp = fingerprint_file(model_path)
            if stored_fp != actual_fp:
                raise InputError(
                    f"{path}: index was built from a model with fingerprint "
                    f"{stored_fp}, but {model_path} has {actual_fp}"
                )
            items: list[str] = []
            levels = np.empty(n, dtype=np.int64)
            for i in range(n):
                item, _, level = fh.readline().decode().rstrip("\n").partition("\t")
                items.append(item)
                levels[i] = int(level)
            if fh.readline() != b"DATA\n":
                raise InputError(f"{path}: missing adjacency section")
            index = HnswIndex.__new__(HnswIndex)
            index.side = side
            index.cfg = cfg
            index.items = items
            index.levels = levels
            index.entry_point = entry_point
            index._m = m
            index._m0 = 2 * m
            index._level_mult = 1.0 / math.log(m)
            rows = np.empty((n, d))
            for i, item in enumerate(items):
                rows[i] = _matrix_for(model, side)[model.row(item)]
            norms = np.linalg.norm(rows, axis=1)
            if (norms == 0).any():
                raise InputError(f"{path}: model has zero rows for indexed items")
            index.vectors = rows / norms[:, None]
            index.graph = [{} for _ in range(int(levels.max()) + 1)]
            for node in range(n):
                for lc in range(int(levels[node]) + 1):
                    (count,) = struct.unpack("<I", fh.read(4))
                    links = np.frombuffer(fh.read(4 * count), dtype="<u4")
                    index.graph[lc][node] = [int(x) for x in links]
            return index
    except OSError as exc:
        raise InputError(f"cannot read index from {path}: {exc}") from exc
    except (ValueError, IndexError, UnicodeDecodeError, struct.error) as exc:
        raise InputError(f"{path}: corrupt index file: {exc}") from exc
