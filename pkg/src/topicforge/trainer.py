"""Incremental trainers: a built-in hashed logistic model and a process client.

The built-in trainer is a feature-hashed bag-of-words logistic regression
trained by SGD.  It is deliberately small, deterministic, and warm-started
across stages, which is the property staged curricula rely on: each call to
``train_stage`` continues from the current weights.

External trainers are separate processes speaking newline-delimited JSON on
stdin/stdout (see the protocol constants below), so any fine-tunable model
can be substituted without touching this package.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import random
import shlex
import subprocess
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import TopicForgeError
from .seeding import derive_seed

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1


class EmptyStage(TopicForgeError):
    pass


class ExternalTrainerError(TopicForgeError):
    """Any failure at the external-trainer boundary; aborts the run."""


class SpawnFailure(ExternalTrainerError):
    pass


class HandshakeFailure(ExternalTrainerError):
    pass


class ProtocolError(ExternalTrainerError):
    pass


@dataclass(frozen=True)
class TrainExample:
    text: str
    label: int


@dataclass(frozen=True)
class TrainerConfig:
    kind: str = "builtin"
    hash_dim: int = 2**18
    learning_rate: float = 0.1
    l2: float = 1e-4
    epochs_per_stage: int = 3
    seed: int = 0
    external_cmd: str | None = None

    def __post_init__(self):
        if self.kind not in ("builtin", "external"):
            raise ValueError(f"trainer kind must be builtin or external, got {self.kind!r}")
        if self.hash_dim < 2**8 or self.hash_dim & (self.hash_dim - 1):
            raise ValueError("hash_dim must be a power of two >= 256")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l2 < 0 or self.learning_rate * self.l2 >= 1:
            raise ValueError("l2 must be >= 0 and learning_rate * l2 < 1")
        if self.epochs_per_stage < 1:
            raise ValueError("epochs_per_stage must be >= 1")
        if (self.kind == "external") != (self.external_cmd is not None):
            raise ValueError("external_cmd must be given exactly when kind='external'")

    def wire_dict(self) -> dict:
        return {
            "hash_dim": self.hash_dim,
            "learning_rate": self.learning_rate,
            "l2": self.l2,
            "epochs_per_stage": self.epochs_per_stage,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainerConfig":
        unknown = set(data) - {f.name for f in cls.__dataclass_fields__.values()}
        if unknown:
            raise ValueError(f"unknown trainer keys: {sorted(unknown)}")
        return cls(**data)


def _term_hash(term: str) -> int:
    digest = hashlib.blake2b(term.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


class HashingVectorizer:
    """Signed feature hashing of whitespace tokens into a fixed dimension.

    The top hash bit picks the sign, which keeps collisions from always
    adding up.  Transforms are cached per text.
    """

    def __init__(self, dim: int):
        self.dim = dim
        self._cache: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def transform(self, text: str) -> tuple[np.ndarray, np.ndarray]:
        cached = self._cache.get(text)
        if cached is not None:
            return cached
        acc: dict[int, float] = {}
        mask = self.dim - 1
        for term in text.split():
            h = _term_hash(term)
            sign = -1.0 if (h >> 63) & 1 else 1.0
            index = h & mask
            acc[index] = acc.get(index, 0.0) + sign
        indices = np.fromiter(sorted(acc), dtype=np.int64, count=len(acc))
        values = np.array([acc[i] for i in indices], dtype=np.float64)
        result = (indices, values)
        self._cache[text] = result
        return result


def sigmoid(z: float) -> float:
    """Numerically bounded logistic function; output always in (0, 1)."""
    z = min(max(z, -30.0), 30.0)
    return 1.0 / (1.0 + math.exp(-z))


def logistic_loss(w: np.ndarray, b: float, x: np.ndarray, y: int, l2: float) -> float:
    """Per-example logistic loss with L2 weight penalty (bias unregularized)."""
    z = float(np.dot(w, x)) + b
    # log(1 + exp(-z)) for y=1, log(1 + exp(z)) for y=0, via the stable form
    margin = z if y == 1 else -z
    ce = math.log1p(math.exp(-abs(margin))) + max(-margin, 0.0)
    return ce + 0.5 * l2 * float(np.dot(w, w))


def logistic_gradient(
    w: np.ndarray, b: float, x: np.ndarray, y: int, l2: float
) -> tuple[np.ndarray, float]:
    """Gradient of :func:`logistic_loss` w.r.t. weights and bias."""
    z = float(np.dot(w, x)) + b
    g = sigmoid(z) - y
    return g * x + l2 * w, g


class BuiltinTrainer:
    """Warm-started SGD logistic regression over hashed unigram counts.

    The L2 decay is folded into a scale factor so each update touches only
    the active features while remaining exactly equivalent to the full
    update w <- (1 - lr*l2) w - lr (p - y) x.
    """

    def __init__(self, cfg: TrainerConfig):
        if cfg.kind != "builtin":
            raise ValueError("BuiltinTrainer requires kind='builtin'")
        self.cfg = cfg
        self._vectorizer = HashingVectorizer(cfg.hash_dim)
        self.reset()

    def reset(self) -> None:
        self._v = np.zeros(self.cfg.hash_dim, dtype=np.float64)
        self._scale = 1.0
        self._bias = 0.0
        self.stage_counter = 0

    @property
    def weights(self) -> np.ndarray:
        """Effective weight vector (copy)."""
        return self._v * self._scale

    @property
    def bias(self) -> float:
        return self._bias

    def get_state(self) -> dict:
        return {
            "v": self._v.copy(),
            "scale": self._scale,
            "bias": self._bias,
            "stage_counter": self.stage_counter,
        }

    def set_state(self, state: dict) -> None:
        self._v = state["v"].copy()
        self._scale = state["scale"]
        self._bias = state["bias"]
        self.stage_counter = state["stage_counter"]

    def _margin(self, indices: np.ndarray, values: np.ndarray) -> float:
        if len(indices) == 0:
            return self._bias
        return self._scale * float(np.dot(self._v[indices], values)) + self._bias

    def train_stage(self, examples: Sequence[TrainExample]) -> "BuiltinTrainer":
        kept = [ex for ex in examples if ex.text.strip()]
        if len(kept) < len(examples):
            logger.warning("dropped %d empty-text examples", len(examples) - len(kept))
        if not kept:
            raise EmptyStage("no non-empty training examples in this stage")

        order = list(kept)
        random.Random(derive_seed(self.cfg.seed, "stage", self.stage_counter)).shuffle(order)
        lr, l2 = self.cfg.learning_rate, self.cfg.l2
        decay = 1.0 - lr * l2
        for _ in range(self.cfg.epochs_per_stage):
            for ex in order:
                indices, values = self._vectorizer.transform(ex.text)
                g = sigmoid(self._margin(indices, values)) - ex.label
                self._scale *= decay
                if len(indices):
                    self._v[indices] -= (lr * g / self._scale) * values
                self._bias -= lr * g
                if self._scale < 1e-6:
                    self._v *= self._scale
                    self._scale = 1.0
        self.stage_counter += 1
        return self

    def score(self, texts: Sequence[str]) -> list[float]:
        """One check-worthiness probability per text; does not mutate state."""
        return [
            sigmoid(self._margin(*self._vectorizer.transform(text))) for text in texts
        ]

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class ExternalTrainer:
    """Client for a trainer child process speaking line-delimited JSON.

    Requests and responses are one JSON object per line over the child's
    stdin/stdout; any ``{"ok": false}`` response raises ProtocolError and
    aborts the run.
    """

    def __init__(self, cfg: TrainerConfig):
        if cfg.kind != "external":
            raise ValueError("ExternalTrainer requires kind='external'")
        self.cfg = cfg
        self.stage_counter = 0
        try:
            self._proc = subprocess.Popen(
                shlex.split(cfg.external_cmd),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise SpawnFailure(f"could not launch {cfg.external_cmd!r}: {exc}") from exc
        try:
            reply = self._request(
                {
                    "cmd": "init",
                    "config": cfg.wire_dict(),
                    "seed": cfg.seed,
                    "protocol": PROTOCOL_VERSION,
                }
            )
        except ProtocolError as exc:
            self._kill()
            raise HandshakeFailure(str(exc)) from exc
        self.name = reply.get("name", "external")

    def _kill(self) -> None:
        if self._proc.poll() is None:
            self._proc.kill()
            self._proc.wait()

    def _request(self, message: dict) -> dict:
        try:
            self._proc.stdin.write(json.dumps(message, ensure_ascii=False) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, ValueError) as exc:
            raise ProtocolError(f"trainer process closed its stdin: {exc}") from exc
        line = self._proc.stdout.readline()
        if not line:
            raise ProtocolError("trainer process closed its stdout")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"invalid JSON from trainer: {line!r}") from exc
        if not isinstance(reply, dict) or reply.get("ok") is not True:
            error = reply.get("error", "unknown error") if isinstance(reply, dict) else reply
            raise ProtocolError(f"trainer reported failure: {error}")
        return reply

    def train_stage(self, examples: Sequence[TrainExample]) -> "ExternalTrainer":
        kept = [ex for ex in examples if ex.text.strip()]
        if len(kept) < len(examples):
            logger.warning("dropped %d empty-text examples", len(examples) - len(kept))
        if not kept:
            raise EmptyStage("no non-empty training examples in this stage")
        self._request(
            {
                "cmd": "train_stage",
                "stage": self.stage_counter,
                "examples": [{"text": ex.text, "label": ex.label} for ex in kept],
            }
        )
        self.stage_counter += 1
        return self

    def score(self, texts: Sequence[str]) -> list[float]:
        reply = self._request({"cmd": "score", "texts": list(texts)})
        scores = reply.get("scores")
        if not isinstance(scores, list) or len(scores) != len(texts):
            raise ProtocolError("score reply has the wrong shape")
        out = []
        for s in scores:
            value = float(s)
            if math.isnan(value) or not 0.0 <= value <= 1.0:
                raise ProtocolError(f"score outside [0, 1]: {s!r}")
            out.append(value)
        return out

    def reset(self) -> None:
        self._request({"cmd": "reset"})
        self.stage_counter = 0

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._request({"cmd": "shutdown"})
            except ProtocolError:
                pass
            finally:
                try:
                    self._proc.wait(timeout=5)
                except subprocess.TimeoutExpired:
                    self._kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def create_trainer(cfg: TrainerConfig) -> BuiltinTrainer | ExternalTrainer:
    """Instantiate the trainer named by the config."""
    if cfg.kind == "builtin":
        return BuiltinTrainer(cfg)
    return ExternalTrainer(cfg)
