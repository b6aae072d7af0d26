"""Span-limited scaled dot-product attention.

Reference kernel for the causality semantics the streaming encoder relies
on: each query position may read the whole past but at most ``lookahead``
future key positions. Disallowed logits are excluded outright (additive
-inf masking), and every output row is computed from the allowed key/value
slice only, so future rows can never perturb it, bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SpanMask:
    """Allows key ``s`` for query ``t`` iff ``s <= t + lookahead``."""

    num_queries: int
    num_keys: int
    lookahead: int
    past_unbounded: bool = True

    def __post_init__(self):
        if self.num_queries < 1 or self.num_keys < 1:
            raise ValueError("mask dimensions must be >= 1")
        if self.lookahead < 0:
            raise ValueError("lookahead must be >= 0")
        if not self.past_unbounded:
            raise ValueError("past context is always unbounded")

    def allowed(self, query: int, key: int) -> bool:
        return 0 <= key < self.num_keys and key <= query + self.lookahead

    def window(self, query: int) -> int:
        """Number of allowed keys for ``query`` (they are always a prefix)."""
        return min(query + self.lookahead, self.num_keys - 1) + 1

    def as_bool_array(self) -> np.ndarray:
        cols = np.arange(self.num_keys)
        rows = np.arange(self.num_queries)[:, None]
        return cols <= rows + self.lookahead


def build_span_mask(num_queries: int, num_keys: int, lookahead: int) -> SpanMask:
    """Span mask with unbounded past and ``lookahead`` frames of future."""
    return SpanMask(num_queries, num_keys, lookahead)


def _check_features(name: str, m: np.ndarray) -> np.ndarray:
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def span_attention_weights(Q: np.ndarray, K: np.ndarray, mask: SpanMask) -> np.ndarray:
    """Row-stochastic attention weights; exact zeros outside the span."""
    Q = _check_features("Q", Q)
    K = _check_features("K", K)
    if Q.shape[0] != mask.num_queries:
        raise ValueError(f"Q has {Q.shape[0]} rows, mask expects {mask.num_queries}")
    if K.shape[0] != mask.num_keys:
        raise ValueError(f"K has {K.shape[0]} rows, mask expects {mask.num_keys}")
    if Q.shape[1] != K.shape[1]:
        raise ValueError(f"Q dim {Q.shape[1]} != K dim {K.shape[1]}")
    scale = 1.0 / np.sqrt(K.shape[1])
    weights = np.zeros((mask.num_queries, mask.num_keys))
    for t in range(mask.num_queries):
        w = mask.window(t)
        logits = (K[:w] @ Q[t]) * scale
        logits -= logits.max()
        e = np.exp(logits)
        weights[t, :w] = e / e.sum()
    return weights


def masked_attention(
    Q: np.ndarray, K: np.ndarray, V: np.ndarray, mask: SpanMask
) -> np.ndarray:
    """Span-masked attention output, one row per query.

    Row ``t`` is a convex combination of the value rows the mask allows for
    ``t``; rows of K and V beyond the span never enter the computation.
    """
    V = _check_features("V", V)
    if V.shape[0] != mask.num_keys:
        raise ValueError(f"V has {V.shape[0]} rows, mask expects {mask.num_keys}")
    weights = span_attention_weights(Q, K, mask)
    out = np.empty((mask.num_queries, V.shape[1]))
    for t in range(mask.num_queries):
        w = mask.window(t)
        out[t] = weights[t, :w] @ V[:w]
    return out
