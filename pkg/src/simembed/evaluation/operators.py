"""Binary operators that turn two node embeddings into one edge feature vector."""
from __future__ import annotations

import enum

import numpy as np

from ..errors import ConfigError


class EdgeOperator(enum.Enum):
    AVERAGE = "average"
    CONCAT = "concat"
    HADAMARD = "hadamard"
    WEIGHTED_L1 = "l1"
    WEIGHTED_L2 = "l2"

    @classmethod
    def parse(cls, text: str) -> "EdgeOperator":
        key = text.strip().lower().replace("-", "_")
        aliases = {"avg": "average", "weighted_l1": "l1", "weighted_l2": "l2"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            names = ", ".join(op.value for op in cls)
            raise ConfigError(f"unknown edge operator {text!r}; expected one of {names}") from None

    def output_dim(self, d: int) -> int:
        return 2 * d if self is EdgeOperator.CONCAT else d


def edge_features(op: EdgeOperator, a, b) -> np.ndarray:
    """Apply ``op`` row-wise; ``a`` and ``b`` are single vectors or aligned matrices."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if op is EdgeOperator.AVERAGE:
        return (a + b) / 2.0
    if op is EdgeOperator.CONCAT:
        return np.concatenate([a, b], axis=-1)
    if op is EdgeOperator.HADAMARD:
        return a * b
    if op is EdgeOperator.WEIGHTED_L1:
        return np.abs(a - b)
    if op is EdgeOperator.WEIGHTED_L2:
        return (a - b) ** 2
    raise ConfigError(f"unsupported operator {op}")


def pair_features(op: EdgeOperator, emb: np.ndarray, pairs) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return edge_features(op, emb[pairs[:, 0]], emb[pairs[:, 1]])
