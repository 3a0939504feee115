"""Block-fading MIMO uplink for one coherence slot."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codebook import Codebook


@dataclass(frozen=True)
class SlotObservation:
    Y: np.ndarray
    cov: np.ndarray

    @property
    def M(self) -> int:
        return self.Y.shape[1]


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Circularly-symmetric CN(0, var) samples (var / 2 per real dimension)."""
    s = np.sqrt(var / 2)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_covariance(Y: np.ndarray) -> np.ndarray:
    Y = np.asarray(Y)
    if Y.ndim == 1:
        Y = Y[:, None]
    cov = Y @ Y.conj().T / Y.shape[1]
    # exact Hermitian symmetry; GEMM leaves ~eps asymmetry
    return (cov + cov.conj().T) / 2


def simulate_slot(codebook: Codebook, indices, M: int, N0: float, rng: np.random.Generator) -> SlotObservation:
    """``Y = sum_k a_{i_k} h_k^T + Z`` with ``h_k ~ CN(0, I_M)`` and ``Z`` of variance ``N0``.

    Users are summed individually, so two users picking the same column
    superpose with independent fading.
    """
    if M < 1:
        raise ValueError("M must be positive")
    if N0 < 0:
        raise ValueError("N0 must be non-negative")
    indices = np.asarray(indices, dtype=np.int64)
    n = codebook.n
    H = complex_normal(rng, (indices.size, M))
    Y = codebook.columns[:, indices] @ H if indices.size else np.zeros((n, M), complex)
    if N0 > 0:
        Y = Y + complex_normal(rng, (n, M), N0)
    return SlotObservation(Y, sample_covariance(Y))
