"""Nonnegative factorization of incidence matrices and argmax clustering.

A deliberately plain Frobenius-loss NMF with Lee-Seung multiplicative
updates.  The incidence matrix stays sparse throughout; WH is never
materialized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .graph import IncidenceMatrix, Partition
from .sbm import derive_seed

EPS = 1e-12


@dataclass(frozen=True)
class NmfResult:
    """Factors B ~ W @ H, Frobenius loss per iteration, and the row-argmax labels."""

    w: np.ndarray  # N x K
    h_factor: np.ndarray  # K x M
    loss_trace: np.ndarray
    partition: Partition

    @property
    def loss(self):
        return float(self.loss_trace[-1])


def _frobenius_loss(b, w, h, b_sq):
    # ||B - WH||_F^2 = ||B||^2 - 2 tr(H^T W^T B) + tr((W^T W)(H H^T))
    wtb = w.T @ b  # K x M, sparse-friendly
    return float(b_sq - 2.0 * np.sum(wtb * h) + np.sum((w.T @ w) * (h @ h.T)))


def _single_run(b, k, iters, rng):
    n, m = b.shape
    w = rng.uniform(0.1, 1.1, size=(n, k))
    h = rng.uniform(0.1, 1.1, size=(k, m))
    b_sq = b.multiply(b).sum()
    trace = np.empty(iters + 1)
    trace[0] = _frobenius_loss(b, w, h, b_sq)
    for t in range(iters):
        # H <- H * (W^T B) / (W^T W H)
        h *= (w.T @ b) / np.maximum((w.T @ w) @ h, EPS)
        # W <- W * (B H^T) / (W H H^T)
        w *= (b @ h.T) / np.maximum(w @ (h @ h.T), EPS)
        trace[t + 1] = _frobenius_loss(b, w, h, b_sq)
    return w, h, trace


def nmf_cluster(
    b: IncidenceMatrix, k: int, iters: int = 500, seed: int = 0, restarts: int = 5
) -> NmfResult:
    """Factorize B into nonnegative W (N x k) and H (k x M); label by argmax row.

    Runs ``restarts`` independent seeded initializations and keeps the one
    with the lowest final loss.  Deterministic for a given seed.
    """
    if k < 1:
        raise ParameterError("k must be >= 1")
    if iters < 1:
        raise ParameterError("iters must be >= 1")
    if restarts < 1:
        raise ParameterError("restarts must be >= 1")
    mat = b.matrix.tocsr()
    best = None
    for rep in range(restarts):
        rng = np.random.default_rng(derive_seed(seed, rep))
        w, h, trace = _single_run(mat, k, iters, rng)
        if best is None or trace[-1] < best[2][-1]:
            best = (w, h, trace)
    w, h, trace = best
    labels = np.argmax(w, axis=1) + 1  # np.argmax already breaks ties low
    return NmfResult(w=w, h_factor=h, loss_trace=trace, partition=Partition(labels))
