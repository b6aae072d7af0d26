"""Shared test utilities: random lattices and brute-force oracles.

The oracles enumerate every frame path of the lattice; they share no code
with the dynamic programs they check.
"""

from __future__ import annotations

import math
from itertools import product

import numpy as np

from spikestream import EmissionMatrix, collapse

NEG_INF = float("-inf")


def random_emissions(rng: np.random.Generator, num_frames: int, num_labels: int) -> EmissionMatrix:
    logits = rng.normal(scale=2.0, size=(num_frames, num_labels))
    rows = logits - np.logaddexp.reduce(logits, axis=1, keepdims=True)
    return EmissionMatrix(rows)


def logsumexp(values) -> float:
    finite = [v for v in values if v != NEG_INF]
    if not finite:
        return NEG_INF
    m = max(finite)
    return m + math.log(sum(math.exp(v - m) for v in finite))


def enumerate_path_masses(emissions: EmissionMatrix) -> dict[tuple[int, ...], float]:
    """Total log mass per transcript, by brute force over all label paths."""
    rows = emissions.log_probs.tolist()
    num_labels = emissions.num_labels
    masses: dict[tuple[int, ...], list[float]] = {}
    for path in product(range(num_labels), repeat=emissions.num_frames):
        logp = sum(rows[t][label] for t, label in enumerate(path))
        if logp == NEG_INF:
            continue
        masses.setdefault(collapse(path), []).append(logp)
    return {y: logsumexp(parts) for y, parts in masses.items()}


def best_path_logprob(emissions: EmissionMatrix, transcript: tuple[int, ...]) -> float:
    """Max single-path log-probability among paths collapsing to ``transcript``."""
    rows = emissions.log_probs.tolist()
    num_labels = emissions.num_labels
    best = NEG_INF
    for path in product(range(num_labels), repeat=emissions.num_frames):
        if collapse(path) != transcript:
            continue
        logp = sum(rows[t][label] for t, label in enumerate(path))
        best = max(best, logp)
    return best


def random_feasible_transcript(
    rng: np.random.Generator, num_frames: int, num_labels: int
) -> tuple[int, ...]:
    """A transcript guaranteed to fit in ``num_frames`` frames."""
    while True:
        length = int(rng.integers(0, num_frames + 1))
        y = tuple(int(rng.integers(1, num_labels)) for _ in range(length))
        repeats = sum(1 for i in range(1, len(y)) if y[i] == y[i - 1])
        if len(y) + repeats <= num_frames:
            return y


def one_hot_emissions(path: list[int], num_labels: int) -> EmissionMatrix:
    """Lattice whose rows put probability one on the given labels."""
    rows = np.full((len(path), num_labels), NEG_INF)
    for t, label in enumerate(path):
        rows[t, label] = 0.0
    return EmissionMatrix(rows)


def peaked_emissions(path: list[int], num_labels: int, peak: float = 0.9) -> EmissionMatrix:
    """Rows with ``peak`` mass on the scripted label, the rest spread evenly."""
    rest = (1.0 - peak) / (num_labels - 1)
    rows = np.full((len(path), num_labels), math.log(rest))
    for t, label in enumerate(path):
        rows[t, label] = math.log(peak)
    return EmissionMatrix(rows)
