"""Dual-embedding skip-gram training with negative sampling.

Two training modes share one SGD engine:

* pair mode: the co-purchase dataset is streamed with each pair expanded
  into both directed (target, context) examples;
* sequence mode: click sessions are streamed with a sliding context
  window, which is how the similarity model behind augmentation is built.

The model keeps both weight matrices. Rows of the input matrix act as
query vectors, rows of the output matrix as context vectors; retrieval
across the two matrices is what surfaces complementary items.

Training is deterministic for a fixed seed in single-threaded mode. An
optional multi-worker mode applies asynchronous unsynchronized updates to
the shared matrices (benign races, non-deterministic results).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np

from .corpus import PairDataset, SessionSet
from .errors import ConfigError, InputError, TrainingStreamError

logger = logging.getLogger(__name__)

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency, but keep a fallback
    HAVE_NUMBA = False

TEXT_MAGIC = "DUALEMB"
BINARY_MAGIC = "DUALEMBB"


# ---------------------------------------------------------------------------
# Model


@dataclass
class DualEmbedding:
    """Vocabulary plus the two weight matrices, one row per item in each."""

    vocab: list[str]
    input_matrix: np.ndarray
    output_matrix: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.input_matrix.shape != self.output_matrix.shape:
            raise ConfigError("input and output matrices must have identical shape")
        if self.input_matrix.shape[0] != len(self.vocab):
            raise ConfigError("matrix row count must match vocabulary size")
        self._index = {item: i for i, item in enumerate(self.vocab)}
        if len(self._index) != len(self.vocab):
            raise ConfigError("vocabulary contains duplicate items")

    @property
    def dim(self) -> int:
        return self.input_matrix.shape[1]

    def __contains__(self, item: str) -> bool:
        return item in self._index

    def __len__(self) -> int:
        return len(self.vocab)

    def row(self, item: str) -> int:
        try:
            return self._index[item]
        except KeyError:
            raise TrainingStreamError(f"item {item!r} not in vocabulary") from None

    def input_vector(self, item: str) -> np.ndarray:
        return self.input_matrix[self.row(item)]

    def output_vector(self, item: str) -> np.ndarray:
        return self.output_matrix[self.row(item)]


def init_model(vocab: Iterable[str], dim: int, seed: int) -> DualEmbedding:
    """Input rows i.i.d. uniform in [-0.5/dim, +0.5/dim], output rows zero."""
    vocab = list(vocab)
    if not vocab:
        raise ConfigError("cannot initialize a model over an empty vocabulary")
    if dim < 1:
        raise ConfigError(f"dim must be >= 1, got {dim}")
    rng = np.random.default_rng(seed)
    bound = 0.5 / dim
    w_in = rng.uniform(-bound, bound, size=(len(vocab), dim))
    w_out = np.zeros((len(vocab), dim))
    return DualEmbedding(vocab=vocab, input_matrix=w_in, output_matrix=w_out)


# ---------------------------------------------------------------------------
# Configuration


@dataclass
class TrainConfig:
    negatives: int = 5
    noise_exponent: float = 0.75
    subsample_t: float | None = 1e-3  # None disables subsampling
    learning_rate: float = 0.05
    dim: int = 100
    window: int = 5  # sequence mode only
    max_epochs: int = 5
    early_stop_patience: int = 2
    seed: int = 0
    count_clamp: int = 1000

    def __post_init__(self):
        if self.negatives < 1:
            raise ConfigError(f"negatives must be >= 1, got {self.negatives}")
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.window < 1:
            raise ConfigError(f"window must be >= 1, got {self.window}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.early_stop_patience < 1:
            raise ConfigError("early_stop_patience must be >= 1")
        if self.count_clamp < 1:
            raise ConfigError("count_clamp must be >= 1")
        if self.subsample_t is not None and self.subsample_t <= 0:
            raise ConfigError("subsample_t must be > 0 (or None to disable)")


@dataclass
class DevSet:
    """Per-target ranked ground-truth lists used for epoch-level Recall@20."""

    lists: dict[str, list[str]]

    def __len__(self) -> int:
        return len(self.lists)


ProgressFn = Callable[[int, int, float, float | None], None]


# ---------------------------------------------------------------------------
# Noise distribution and subsampling


class NoiseTable:
    """Cumulative sampling table with Pr[p] proportional to count(p)^alpha.

    Zero-count items are excluded."""

    def __init__(self, items: list[str], probs: np.ndarray):
        self.items = items
        self.probs = probs
        self.cdf = np.cumsum(probs)
        self.cdf[-1] = 1.0

    def probability(self, item: str) -> float:
        try:
            return float(self.probs[self.items.index(item)])
        except ValueError:
            return 0.0

    def sample_positions(self, rng: np.random.Generator, size) -> np.ndarray:
        """Sample positions into ``self.items``."""
        return np.searchsorted(self.cdf, rng.random(size), side="right")

    def sample_items(self, rng: np.random.Generator, k: int) -> list[str]:
        return [self.items[p] for p in self.sample_positions(rng, k)]


def build_noise_table(counts: Mapping[str, float], alpha: float) -> NoiseTable:
    items = sorted(item for item, c in counts.items() if c > 0)
    if not items:
        raise ConfigError("noise distribution needs at least one positive count")
    weights = np.array([counts[item] for item in items], dtype=np.float64) ** alpha
    return NoiseTable(items, weights / weights.sum())


def keep_probability(freq: float, t: float | None) -> float:
    """Probability of keeping one occurrence of an item with relative
    frequency ``freq``: min(1, sqrt(t / freq)). ``t=None`` disables."""
    if freq <= 0:
        raise ValueError(f"freq must be > 0, got {freq}")
    if t is None or not math.isfinite(t):
        return 1.0
    return min(1.0, math.sqrt(t / freq))


# ---------------------------------------------------------------------------
# Loss and gradients


def _log_sigmoid(x: np.ndarray | float) -> np.ndarray | float:
    return -np.logaddexp(0.0, -np.asarray(x, dtype=np.float64))


def sgns_loss(
    target_vec: np.ndarray, context_vec: np.ndarray, negative_vecs: Iterable[np.ndarray]
) -> float:
    """log sigma(t.c) + sum_i log sigma(-t.n_i); the trainer maximizes this."""
    loss = float(_log_sigmoid(np.dot(target_vec, context_vec)))
    for neg in negative_vecs:
        loss += float(_log_sigmoid(-np.dot(target_vec, neg)))
    return loss


def sgns_loss_gradients(
    target_vec: np.ndarray, context_vec: np.ndarray, negative_vecs: list[np.ndarray]
) -> tuple[float, np.ndarray, np.ndarray, list[np.ndarray]]:
    """Analytic gradients of :func:`sgns_loss` w.r.t. every vector."""
    t = np.asarray(target_vec, dtype=np.float64)
    c = np.asarray(context_vec, dtype=np.float64)
    pos_dot = float(np.dot(t, c))
    pos_coef = 1.0 - _sigmoid(pos_dot)
    loss = float(_log_sigmoid(pos_dot))
    g_target = pos_coef * c
    g_context = pos_coef * t
    g_negs = []
    for neg in negative_vecs:
        n = np.asarray(neg, dtype=np.float64)
        dot = float(np.dot(t, n))
        loss += float(_log_sigmoid(-dot))
        coef = -_sigmoid(dot)
        g_target = g_target + coef * n
        g_negs.append(coef * t)
    return loss, g_target, g_context, g_negs


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


# ---------------------------------------------------------------------------
# SGD engine


def sgd_step(
    model: DualEmbedding,
    target: str,
    context: str,
    noise: NoiseTable,
    cfg: TrainConfig,
    lr: float,
    rng: np.random.Generator,
) -> DualEmbedding:
    """One gradient-ascent step on a single (target, context) example.

    Draws ``cfg.negatives`` noise items (collisions with the true context
    are allowed), updates each context-side row immediately and the target
    row once with the accumulated gradient. Mutates the model in place.
    """
    ti = model.row(target)
    ci = model.row(context)
    w_in, w_out = model.input_matrix, model.output_matrix
    t_vec = w_in[ti]
    acc = np.zeros(model.dim)

    g = lr * (1.0 - _sigmoid(float(np.dot(t_vec, w_out[ci]))))
    acc += g * w_out[ci]
    w_out[ci] += g * t_vec

    for item in noise.sample_items(rng, cfg.negatives):
        ni = model.row(item)
        g = -lr * _sigmoid(float(np.dot(t_vec, w_out[ni])))
        acc += g * w_out[ni]
        w_out[ni] += g * t_vec
    w_in[ti] += acc
    return model


def _epoch_kernel_core(w_in, w_out, targets, contexts, negatives, keep, lr0, processed0, budget):
    n = targets.shape[0]
    d = w_in.shape[1]
    k = negatives.shape[1]
    loss_sum = 0.0
    trained = 0
    acc = np.zeros(d)
    for e in range(n):
        if not keep[e]:
            continue
        lr = lr0 * (1.0 - (processed0 + e) / budget)
        if lr < 0.0:
            lr = 0.0
        ti = targets[e]
        ci = contexts[e]
        for j in range(d):
            acc[j] = 0.0
        dot = 0.0
        for j in range(d):
            dot += w_in[ti, j] * w_out[ci, j]
        if dot >= 0.0:
            ex = math.exp(-dot)
            sig = 1.0 / (1.0 + ex)
            loss_sum += -math.log1p(ex)
        else:
            ex = math.exp(dot)
            sig = ex / (1.0 + ex)
            loss_sum += dot - math.log1p(ex)
        g = lr * (1.0 - sig)
        for j in range(d):
            acc[j] += g * w_out[ci, j]
            w_out[ci, j] += g * w_in[ti, j]
        for i in range(k):
            ni = negatives[e, i]
            dot = 0.0
            for j in range(d):
                dot += w_in[ti, j] * w_out[ni, j]
            if dot >= 0.0:
                ex = math.exp(-dot)
                sig = 1.0 / (1.0 + ex)
                loss_sum += -dot - math.log1p(ex)
            else:
                ex = math.exp(dot)
                sig = ex / (1.0 + ex)
                loss_sum += -math.log1p(ex)
            g = -lr * sig
            for j in range(d):
                acc[j] += g * w_out[ni, j]
                w_out[ni, j] += g * w_in[ti, j]
        for j in range(d):
            w_in[ti, j] += acc[j]
        trained += 1
    return loss_sum, trained


if HAVE_NUMBA:
    _epoch_kernel_numba = njit(cache=True, nogil=True)(_epoch_kernel_core)


def _epoch_numpy(w_in, w_out, targets, contexts, negatives, keep, lr0, processed0, budget):
    """Row-operation twin of the jitted kernel; reference path and fallback."""
    loss_sum = 0.0
    trained = 0
    for e in range(targets.shape[0]):
        if not keep[e]:
            continue
        lr = max(0.0, lr0 * (1.0 - (processed0 + e) / budget))
        ti, ci = targets[e], contexts[e]
        t_vec = w_in[ti]
        acc = np.zeros(w_in.shape[1])
        dot = float(np.dot(t_vec, w_out[ci]))
        loss_sum += float(_log_sigmoid(dot))
        g = lr * (1.0 - _sigmoid(dot))
        acc += g * w_out[ci]
        w_out[ci] += g * t_vec
        for ni in negatives[e]:
            dot = float(np.dot(t_vec, w_out[ni]))
            loss_sum += float(_log_sigmoid(-dot))
            g = -lr * _sigmoid(dot)
            acc += g * w_out[ni]
            w_out[ni] += g * t_vec
        w_in[ti] += acc
        trained += 1
    return loss_sum, trained


def _run_epoch(w_in, w_out, targets, contexts, negatives, keep, lr0, processed0, budget,
               workers: int = 1):
    if workers > 1 and HAVE_NUMBA:
        import threading

        bounds = np.linspace(0, targets.shape[0], workers + 1).astype(np.int64)
        results = [None] * workers
        def work(w, lo, hi):
            results[w] = _epoch_kernel_numba(
                w_in, w_out, targets[lo:hi], contexts[lo:hi], negatives[lo:hi],
                keep[lo:hi], lr0, processed0 + lo, budget,
            )
        threads = [
            threading.Thread(target=work, args=(w, bounds[w], bounds[w + 1]))
            for w in range(workers)
        ]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
        return (sum(r[0] for r in results), sum(r[1] for r in results))
    if HAVE_NUMBA:
        return _epoch_kernel_numba(
            w_in, w_out, targets, contexts, negatives, keep, lr0, processed0, budget
        )
    return _epoch_numpy(
        w_in, w_out, targets, contexts, negatives, keep, lr0, processed0, budget
    )


# ---------------------------------------------------------------------------
# Training drivers


class _Trainer:
    """Shared epoch loop: shuffling, negative sampling, subsampling,
    linear learning-rate decay, dev evaluation and early stopping."""

    def __init__(self, model: DualEmbedding, cfg: TrainConfig, occurrence: np.ndarray,
                 budget: int):
        self.model = model
        self.cfg = cfg
        self.rng = np.random.default_rng([cfg.seed, 1])
        noise_counts = {model.vocab[i]: float(occurrence[i]) for i in range(len(model.vocab))}
        self.noise = build_noise_table(noise_counts, cfg.noise_exponent)
        self.noise_rows = np.array([model.row(it) for it in self.noise.items], dtype=np.int64)
        freq = occurrence / max(1.0, float(occurrence.sum()))
        self.keep_prob = np.array(
            [keep_probability(f, cfg.subsample_t) if f > 0 else 1.0 for f in freq]
        )
        self.budget = max(1, budget)
        self.processed = 0
        self.examples_trained = 0
        self.history: list[dict] = []

    def sample_negatives(self, n: int) -> np.ndarray:
        positions = self.noise.sample_positions(self.rng, (n, self.cfg.negatives))
        return self.noise_rows[positions]

    def run(self, epoch_stream, dev: DevSet | None, progress: ProgressFn | None,
            workers: int) -> None:
        cfg = self.cfg
        best_recall = -1.0
        best_state = None
        best_epoch = -1
        stale = 0
        for epoch in range(cfg.max_epochs):
            targets, contexts, keep = epoch_stream(epoch)
            if targets.shape[0] == 0:
                logger.warning("epoch %d has no training examples", epoch)
                mean_loss = math.nan
            else:
                negatives = self.sample_negatives(targets.shape[0])
                loss_sum, trained = _run_epoch(
                    self.model.input_matrix, self.model.output_matrix,
                    targets, contexts, negatives, keep,
                    cfg.learning_rate, self.processed, float(self.budget),
                    workers=workers,
                )
                self.processed += targets.shape[0]
                self.examples_trained += trained
                mean_loss = -loss_sum / trained if trained else math.nan
            dev_recall = dev_recall_at_k(self.model, dev, 20) if dev else None
            self.history.append({
                "epoch": epoch,
                "examples": self.examples_trained,
                "mean_loss": None if math.isnan(mean_loss) else mean_loss,
                "dev_recall@20": dev_recall,
            })
            if progress is not None:
                progress(epoch, self.examples_trained, mean_loss, dev_recall)
            if dev is not None:
                if dev_recall > best_recall:
                    best_recall = dev_recall
                    best_state = (
                        self.model.input_matrix.copy(),
                        self.model.output_matrix.copy(),
                    )
                    best_epoch = epoch
                    stale = 0
                else:
                    stale += 1
                    if stale >= cfg.early_stop_patience:
                        logger.info(
                            "early stop at epoch %d (best dev recall %.4f at epoch %d)",
                            epoch, best_recall, best_epoch,
                        )
                        break
        if best_state is not None:
            self.model.input_matrix[:] = best_state[0]
            self.model.output_matrix[:] = best_state[1]
        self.model.meta.update({
            "config": asdict(cfg),
            "history": self.history,
            "best_epoch": best_epoch if best_state is not None else None,
        })


def train_pairs(
    pairs: PairDataset,
    cfg: TrainConfig,
    dev: DevSet | None = None,
    progress: ProgressFn | None = None,
    workers: int = 1,
) -> DualEmbedding:
    """Train on the pair dataset.

    Each pair is streamed count-many times per epoch in shuffled order and
    every occurrence yields both directed examples. Counts above
    ``cfg.count_clamp`` are clamped so a single pair cannot dominate an
    epoch. With a dev set, training early-stops on Recall@20 and the best
    checkpoint is returned.
    """
    if len(pairs) == 0:
        raise ConfigError("cannot train on an empty pair dataset")
    vocab = pairs.vocab()
    model = init_model(vocab, cfg.dim, cfg.seed)

    a_ids = np.empty(len(pairs), dtype=np.int64)
    b_ids = np.empty(len(pairs), dtype=np.int64)
    counts = np.empty(len(pairs), dtype=np.int64)
    clamped = 0
    for i, rec in enumerate(pairs):
        a_ids[i] = model.row(rec.item_a)
        b_ids[i] = model.row(rec.item_b)
        if rec.count > cfg.count_clamp:
            clamped += 1
            counts[i] = cfg.count_clamp
        else:
            counts[i] = rec.count
    if clamped:
        logger.warning(
            "clamped %d pair counts to %d to keep the epoch balanced",
            clamped, cfg.count_clamp,
        )
    inst_a = np.repeat(a_ids, counts)
    inst_b = np.repeat(b_ids, counts)
    n_inst = inst_a.shape[0]

    occurrence = np.bincount(inst_a, minlength=len(vocab)).astype(np.float64)
    occurrence += np.bincount(inst_b, minlength=len(vocab))
    trainer = _Trainer(model, cfg, occurrence, budget=cfg.max_epochs * 2 * n_inst)

    def epoch_stream(_epoch: int):
        order = trainer.rng.permutation(n_inst)
        a = inst_a[order]
        b = inst_b[order]
        targets = np.empty(2 * n_inst, dtype=np.int64)
        contexts = np.empty(2 * n_inst, dtype=np.int64)
        targets[0::2] = a
        contexts[0::2] = b
        targets[1::2] = b
        contexts[1::2] = a
        if cfg.subsample_t is None:
            keep = np.ones(2 * n_inst, dtype=np.bool_)
        else:
            u = trainer.rng.random((n_inst, 2))
            occ_keep = (u[:, 0] < trainer.keep_prob[a]) & (u[:, 1] < trainer.keep_prob[b])
            keep = np.repeat(occ_keep, 2)
        return targets, contexts, keep

    trainer.run(epoch_stream, dev, progress, workers)
    model.meta["mode"] = "pair"
    return model


def _window_examples(tokens: np.ndarray, window: int, out_t: list, out_c: list) -> None:
    n = tokens.shape[0]
    for i in range(n):
        lo = max(0, i - window)
        hi = min(n, i + window + 1)
        for j in range(lo, hi):
            if j != i:
                out_t.append(tokens[i])
                out_c.append(tokens[j])


def enumerate_window_pairs(items: list, window: int) -> list[tuple]:
    """All directed (center, context) pairs within the context window."""
    out = []
    n = len(items)
    for i in range(n):
        for j in range(max(0, i - window), min(n, i + window + 1)):
            if j != i:
                out.append((items[i], items[j]))
    return out


def train_sequences(
    sessions: SessionSet,
    cfg: TrainConfig,
    dev: DevSet | None = None,
    progress: ProgressFn | None = None,
    workers: int = 1,
) -> DualEmbedding:
    """Train on ordered sessions with a sliding window of size cfg.window.

    Subsampling removes token occurrences before windows are formed, as in
    the original skip-gram pipeline, so the context window spans gaps left
    by discarded tokens.
    """
    if len(sessions.sessions) == 0:
        raise ConfigError("cannot train on an empty session set")
    vocab = sorted({item for s in sessions for item in s.items})
    if not vocab:
        raise ConfigError("sessions contain no items")
    model = init_model(vocab, cfg.dim, cfg.seed)

    encoded = [
        np.array([model.row(it) for it in s.items], dtype=np.int64)
        for s in sessions
        if s.items
    ]
    occurrence = np.zeros(len(vocab), dtype=np.float64)
    planned = 0
    for seq in encoded:
        occurrence += np.bincount(seq, minlength=len(vocab))
        n = seq.shape[0]
        for i in range(n):
            planned += min(n, i + cfg.window + 1) - max(0, i - cfg.window) - 1
    trainer = _Trainer(model, cfg, occurrence, budget=cfg.max_epochs * max(1, planned))

    def epoch_stream(_epoch: int):
        out_t: list = []
        out_c: list = []
        for seq in encoded:
            if cfg.subsample_t is not None:
                mask = trainer.rng.random(seq.shape[0]) < trainer.keep_prob[seq]
                seq = seq[mask]
            _window_examples(seq, cfg.window, out_t, out_c)
        if not out_t:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty, np.empty(0, dtype=np.bool_)
        targets = np.array(out_t, dtype=np.int64)
        contexts = np.array(out_c, dtype=np.int64)
        order = trainer.rng.permutation(targets.shape[0])
        return targets[order], contexts[order], np.ones(targets.shape[0], dtype=np.bool_)

    trainer.run(epoch_stream, dev, progress, workers)
    model.meta["mode"] = "sequence"
    return model


# ---------------------------------------------------------------------------
# Dev-set evaluation (cross-matrix Recall@K, kept local to avoid an import
# cycle with the retrieval module)


def dev_precision_recall_at_k(model: DualEmbedding, dev: DevSet, k: int = 20,
                              chunk: int = 512) -> tuple[float, float]:
    """Mean Precision@k and Recall@k of cross-matrix (input against output)
    retrieval over the dev ground-truth lists. Queries outside the
    vocabulary score 0."""
    if len(dev) == 0:
        return 0.0, 0.0
    out_norms = np.linalg.norm(model.output_matrix, axis=1)
    valid = out_norms > 0
    queries = sorted(dev.lists)
    precisions = np.zeros(len(queries))
    recalls = np.zeros(len(queries))
    in_vocab = [(qi, q) for qi, q in enumerate(queries) if q in model]
    for start in range(0, len(in_vocab), chunk):
        block = in_vocab[start:start + chunk]
        rows = np.array([model.row(q) for _, q in block], dtype=np.int64)
        q_vecs = model.input_matrix[rows]
        q_norms = np.linalg.norm(q_vecs, axis=1)
        scores = q_vecs @ model.output_matrix.T
        with np.errstate(invalid="ignore", divide="ignore"):
            scores /= np.outer(np.maximum(q_norms, 1e-300), np.maximum(out_norms, 1e-300))
        scores[:, ~valid] = -np.inf
        for bi, (qi, q) in enumerate(block):
            row_scores = scores[bi].copy()
            row_scores[model.row(q)] = -np.inf
            top = np.argsort(-row_scores, kind="stable")[:k]
            top_items = {model.vocab[t] for t in top if row_scores[t] > -np.inf}
            truth = dev.lists[q]
            if truth:
                hits = len(top_items.intersection(truth))
                precisions[qi] = hits / k
                recalls[qi] = hits / len(truth)
    return float(precisions.mean()), float(recalls.mean())


def dev_recall_at_k(model: DualEmbedding, dev: DevSet, k: int = 20,
                    chunk: int = 512) -> float:
    return dev_precision_recall_at_k(model, dev, k, chunk)[1]


# ---------------------------------------------------------------------------
# Model persistence


def save_model(model: DualEmbedding, path: str | Path, binary: bool = False) -> None:
    """Write the model file; also writes the JSON sidecar next to it when
    the model carries training metadata."""
    path = Path(path)
    n, d = model.input_matrix.shape
    if binary:
        with open(path, "wb") as fh:
            fh.write(f"{BINARY_MAGIC} 1 {n} {d}\n".encode("utf-8"))
            for i, item in enumerate(model.vocab):
                fh.write(item.encode("utf-8") + b"\n")
                fh.write(model.input_matrix[i].astype("<f4").tobytes())
                fh.write(model.output_matrix[i].astype("<f4").tobytes())
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{TEXT_MAGIC} 1 {n} {d}\n")
            for i, item in enumerate(model.vocab):
                vin = " ".join(repr(float(x)) for x in model.input_matrix[i])
                vout = " ".join(repr(float(x)) for x in model.output_matrix[i])
                fh.write(f"{item}\t{vin}\t{vout}\n")
    if model.meta:
        sidecar_path(path).write_text(
            json.dumps(model.meta, indent=2, sort_keys=True, default=str) + "\n"
        )


def sidecar_path(model_path: str | Path) -> Path:
    return Path(str(model_path) + ".sidecar.json")


def load_model(path: str | Path) -> DualEmbedding:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            header = fh.readline().decode("utf-8").split()
            if len(header) != 4 or header[0] not in (TEXT_MAGIC, BINARY_MAGIC) or header[1] != "1":
                raise InputError(f"{path}: not a model file")
            n, d = int(header[2]), int(header[3])
            vocab: list[str] = []
            w_in = np.empty((n, d))
            w_out = np.empty((n, d))
            if header[0] == BINARY_MAGIC:
                row_bytes = 4 * d
                for i in range(n):
                    vocab.append(fh.readline().decode("utf-8").rstrip("\n"))
                    w_in[i] = np.frombuffer(fh.read(row_bytes), dtype="<f4")
                    w_out[i] = np.frombuffer(fh.read(row_bytes), dtype="<f4")
            else:
                for i in range(n):
                    fields = fh.readline().decode("utf-8").rstrip("\n").split("\t")
                    if len(fields) != 3:
                        raise InputError(f"{path}: malformed record {i}")
                    vocab.append(fields[0])
                    vin = [float(tok) for tok in fields[1].split()]
                    vout = [float(tok) for tok in fields[2].split()]
                    if len(vin) != d or len(vout) != d:
                        raise InputError(
                            f"{path}: record {i} has wrong vector width"
                        )
                    w_in[i] = vin
                    w_out[i] = vout
    except OSError as exc:
        raise InputError(f"cannot read model from {path}: {exc}") from exc
    except (ValueError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: corrupt model file: {exc}") from exc
    meta = {}
    sidecar = sidecar_path(path)
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
    return DualEmbedding(vocab=vocab, input_matrix=w_in, output_matrix=w_out, meta=meta)
