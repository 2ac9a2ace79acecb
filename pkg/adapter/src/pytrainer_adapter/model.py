"""Incremental models served over the trainer protocol.

``HashedLogisticModel`` mirrors the host's built-in trainer arithmetic
operation for operation (same hashing, same update order, same seeding), so
a run driven through this adapter scores identically to the in-process
model.  To serve a different model, implement :class:`IncrementalModel` and
hand it to the server; fine-tuning a transformer, for instance, would load
the checkpoint in ``__init__``, run optimizer steps in ``train_stage``, and
return class-1 probabilities from ``score``.
"""

from __future__ import annotations

import hashlib
import math
import random
from typing import Sequence

import numpy as np


def derive_seed(*parts: object) -> int:
    """Stable 64-bit sub-seed; must match the host's derivation exactly."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big")


def _term_hash(term: str) -> int:
    digest = hashlib.blake2b(term.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def _sigmoid(z: float) -> float:
    z = min(max(z, -30.0), 30.0)
    return 1.0 / (1.0 + math.exp(-z))


class IncrementalModel:
    """Contract the protocol server drives: warm-started stages plus scoring."""

    def train_stage(self, examples: Sequence[tuple[str, int]]) -> None:
        raise NotImplementedError

    def score(self, texts: Sequence[str]) -> list[float]:
        raise NotImplementedError

    def reset(self) -> None:
        raise NotImplementedError


class HashedLogisticModel(IncrementalModel):
    """Feature-hashed logistic regression, SGD with L2 via a scale factor."""

    def __init__(self, config: dict, seed: int):
        self.hash_dim = int(config.get("hash_dim", 2**18))
        if self.hash_dim < 2**8 or self.hash_dim & (self.hash_dim - 1):
            raise ValueError("hash_dim must be a power of two >= 256")
        self.learning_rate = float(config.get("learning_rate", 0.1))
        self.l2 = float(config.get("l2", 1e-4))
        self.epochs_per_stage = int(config.get("epochs_per_stage", 3))
        if self.learning_rate <= 0 or self.l2 < 0 or self.epochs_per_stage < 1:
            raise ValueError("invalid hyperparameters")
        self.seed = int(seed)
        self._cache: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        self.reset()

    def reset(self) -> None:
        self._v = np.zeros(self.hash_dim, dtype=np.float64)
        self._scale = 1.0
        self._bias = 0.0
        self.stage_counter = 0

    def _features(self, text: str) -> tuple[np.ndarray, np.ndarray]:
        cached = self._cache.get(text)
        if cached is not None:
            return cached
        acc: dict[int, float] = {}
        mask = self.hash_dim - 1
        for term in text.split():
            h = _term_hash(term)
            sign = -1.0 if (h >> 63) & 1 else 1.0
            index = h & mask
            acc[index] = acc.get(index, 0.0) + sign
        indices = np.fromiter(sorted(acc), dtype=np.int64, count=len(acc))
        values = np.array([acc[i] for i in indices], dtype=np.float64)
        self._cache[text] = (indices, values)
        return indices, values

    def _margin(self, indices: np.ndarray, values: np.ndarray) -> float:
        if len(indices) == 0:
            return self._bias
        return self._scale * float(np.dot(self._v[indices], values)) + self._bias

    def train_stage(self, examples: Sequence[tuple[str, int]]) -> None:
        kept = [(text, label) for text, label in examples if text.strip()]
        if not kept:
            raise ValueError("no non-empty training examples in this stage")
        order = list(kept)
        random.Random(derive_seed(self.seed, "stage", self.stage_counter)).shuffle(order)
        lr, l2 = self.learning_rate, self.l2
        decay = 1.0 - lr * l2
        for _ in range(self.epochs_per_stage):
            for text, label in order:
                indices, values = self._features(text)
                g = _sigmoid(self._margin(indices, values)) - label
                self._scale *= decay
                if len(indices):
                    self._v[indices] -= (lr * g / self._scale) * values
                self._bias -= lr * g
                if self._scale < 1e-6:
                    self._v *= self._scale
                    self._scale = 1.0
        self.stage_counter += 1

    def score(self, texts: Sequence[str]) -> list[float]:
        return [_sigmoid(self._margin(*self._features(text))) for text in texts]
