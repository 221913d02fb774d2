"""Hyperparameter search: dev split construction and budgeted random
search optimizing dev Recall@20 on co-purchase prediction.

The dev split holds out a fraction of the unique pairs entirely — held-out
pairs never enter the tuned model's training stream — and aggregates them
into per-target ranked ground truth. Random search is deliberate: it is
reproducible from a single seed, trivially parallel, and has no
dependencies; swap in something smarter behind the same objective
callable if you need it.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .corpus import PairDataset
from .errors import ConfigError, DuorecError, TuningError
from .sgns import (
    DevSet,
    DualEmbedding,
    TrainConfig,
    dev_precision_recall_at_k,
    train_pairs,
)

logger = logging.getLogger(__name__)

#: The canonical skip-gram defaults used as the untuned comparison point.
DEFAULT_CONFIG = dict(negatives=5, noise_exponent=0.75, subsample_t=1e-3,
                      learning_rate=0.05, dim=100)


@dataclass
class SearchSpace:
    """Sampling ranges, inclusive at both ends unless noted.

    ``subsample_t`` is sampled log-uniformly — its useful values span two
    orders of magnitude. Ranges are plain fields, so widening one (e.g. a
    lower learning-rate floor) is just constructing the space differently.
    """

    negatives: tuple[int, int] = (5, 30)
    noise_exponent: tuple[float, float] = (-1.0, 1.0)
    subsample_t: tuple[float, float] = (1e-4, 1e-2)
    learning_rate: tuple[float, float] = (0.05, 0.15)
    dim: tuple[int, int] = (20, 100)

    def __post_init__(self):
        for name in ("negatives", "noise_exponent", "subsample_t",
                     "learning_rate", "dim"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigError(f"{name} range is empty: ({lo}, {hi})")
        if self.negatives[0] < 1:
            raise ConfigError("negatives range must start at >= 1")
        if self.dim[0] < 1:
            raise ConfigError("dim range must start at >= 1")
        if self.subsample_t[0] <= 0:
            raise ConfigError("subsample_t range must be positive")
        if self.learning_rate[0] <= 0:
            raise ConfigError("learning_rate range must be positive")

    def sample(self, rng: np.random.Generator) -> dict:
        return {
            "negatives": int(rng.integers(self.negatives[0], self.negatives[1] + 1)),
            "noise_exponent": float(rng.uniform(*self.noise_exponent)),
            "subsample_t": float(math.exp(rng.uniform(
                math.log(self.subsample_t[0]), math.log(self.subsample_t[1])
            ))),
            "learning_rate": float(rng.uniform(*self.learning_rate)),
            "dim": int(rng.integers(self.dim[0], self.dim[1] + 1)),
        }


@dataclass
class TrialRecord:
    index: int
    config: dict
    dev_recall: float | None = None
    dev_precision: float | None = None
    epochs_run: int | None = None
    wall_time: float = 0.0
    error: str | None = None


def make_dev_split(pairs: PairDataset, fraction: float = 0.10,
                   seed: int = 0) -> tuple[PairDataset, DevSet]:
    """Hold out round(fraction * |unique pairs|) pairs as dev ground truth.

    The held-out pairs are removed from the returned training set
    entirely; per-target relevance lists are ranked by held-out count,
    ties by ascending identifier.
    """
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"dev fraction must be inside (0, 1), got {fraction}")
    if len(pairs) == 0:
        raise ConfigError("cannot split an empty pair dataset")
    records = list(pairs)
    n_dev = round(fraction * len(records))
    if n_dev == 0:
        raise ConfigError(
            f"fraction {fraction} of {len(records)} pairs rounds to an empty dev split"
        )
    if n_dev == len(records):
        raise ConfigError("dev split would swallow the whole dataset")
    rng = np.random.default_rng(seed)
    chosen = set(rng.choice(len(records), size=n_dev, replace=False).tolist())
    train = PairDataset()
    held: dict[str, list[tuple[int, str]]] = {}
    for i, rec in enumerate(records):
        if i in chosen:
            held.setdefault(rec.item_a, []).append((rec.count, rec.item_b))
            held.setdefault(rec.item_b, []).append((rec.count, rec.item_a))
        else:
            train.add(rec)
    lists = {
        q: [item for _, item in sorted(co, key=lambda e: (-e[0], e[1]))]
        for q, co in held.items()
    }
    return train, DevSet(lists=lists)


Objective = Callable[[dict], "float | Mapping"]


def random_search(
    space: SearchSpace,
    budget: int,
    objective: Objective,
    seed: int = 0,
) -> tuple[dict, list[TrialRecord]]:
    """Run ``budget`` sampled trials and return the argmax config.

    The objective maps a sampled config to dev Recall@20, either as a bare
    float or a mapping with a ``recall`` key (plus optional ``precision``
    and ``epochs``). Ties keep the earliest trial. A trial that raises is
    logged and skipped; if every trial fails the search itself fails.
    """
    if budget < 1:
        raise ConfigError(f"budget must be >= 1, got {budget}")
    rng = np.random.default_rng(seed)
    log: list[TrialRecord] = []
    best: TrialRecord | None = None
    for index in range(budget):
        config = space.sample(rng)
        record = TrialRecord(index=index, config=config)
        started = time.perf_counter()
        try:
            outcome = objective(config)
        except (DuorecError, FloatingPointError) as exc:
            record.error = f"{type(exc).__name__}: {exc}"
            logger.warning("trial %d failed: %s", index, record.error)
        else:
            if isinstance(outcome, Mapping):
                record.dev_recall = float(outcome["recall"])
                if "precision" in outcome:
                    record.dev_precision = float(outcome["precision"])
                if "epochs" in outcome:
                    record.epochs_run = int(outcome["epochs"])
            else:
                record.dev_recall = float(outcome)
        record.wall_time = time.perf_counter() - started
        log.append(record)
        if record.error is None and (best is None or record.dev_recall > best.dev_recall):
            best = record
            logger.info("trial %d is the new best: dev recall %.4f (%s)",
                        index, record.dev_recall, config)
    if best is None:
        raise TuningError(
            f"all {budget} trials failed; last error: {log[-1].error}"
        )
    return dict(best.config), log


def training_objective(
    train: PairDataset,
    dev: DevSet,
    base: TrainConfig | None = None,
    workers: int = 1,
) -> Objective:
    """Objective that trains on the split with early stopping and scores
    dev Precision/Recall@20. Sampled values override the base config."""
    base_kwargs = {} if base is None else {
        k: getattr(base, k)
        for k in ("window", "max_epochs", "early_stop_patience", "seed", "count_clamp")
    }

    def objective(sampled: dict) -> dict:
        cfg = TrainConfig(**{**base_kwargs, **sampled})
        model = train_pairs(train, cfg, dev=dev, workers=workers)
        precision, recall = dev_precision_recall_at_k(model, dev, 20)
        return {
            "recall": recall,
            "precision": precision,
            "epochs": len(model.meta.get("history", [])),
        }

    return objective


def score_config(train: PairDataset, dev: DevSet, cfg: TrainConfig,
                 workers: int = 1) -> tuple[DualEmbedding, float]:
    """Train one config on the split and return (model, dev Recall@20)."""
    model = train_pairs(train, cfg, dev=dev, workers=workers)
    _, recall = dev_precision_recall_at_k(model, dev, 20)
    return model, recall


def write_trial_log(log: list[TrialRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in log:
            fh.write(json.dumps({
                "trial": rec.index, "config": rec.config,
                "dev_recall": rec.dev_recall, "dev_precision": rec.dev_precision,
                "epochs_run": rec.epochs_run, "wall_time": rec.wall_time,
                "error": rec.error,
            }, sort_keys=True) + "\n")
