"""Numba-compiled hot loops for sequence log-likelihood evaluation.

The optimizers evaluate the batch log-likelihood tens of thousands of times
per training run; these kernels keep that affordable.  ``models.seq_loglik``
holds the reference numpy implementation the kernels are tested against.
"""

from __future__ import annotations

import numba
import numpy as np

# Probabilities below this are treated as exact zeros (-inf log-likelihood).
PROB_FLOOR = 1e-300


@numba.njit(cache=True)
def seq_loglik_kernel(kraus: np.ndarray, rho0: np.ndarray,
                      seq: np.ndarray) -> float:
    """Log-likelihood of one symbol sequence under a Kraus-operator model.

    kraus: (m, w, n, n) complex128, symbol-indexed operator blocks.
    rho0:  (n, n) complex128 initial state.
    seq:   (T,) int64 symbols in 1..m.

    Uses per-step renormalization with log accumulation, so it is stable at
    long horizons; returns -inf as soon as a step probability underflows.
    """
    n = rho0.shape[0]
    w = kraus.shape[1]
    rho = rho0.copy()
    new = np.empty((n, n), dtype=np.complex128)
    ll = 0.0
    for t in range(seq.shape[0]):
        y = seq[t] - 1
        new[:] = 0.0
        for q in range(w):
            k = kraus[y, q]
            # new += k @ rho @ k^dagger, written out for speed at n <= 8
            for r in range(n):
                for c in range(n):
                    acc = 0.0 + 0.0j
                    for u in range(n):
                        kr = k[r, u]
                        if kr != 0.0:
                            for v in range(n):
                                acc += kr * rho[u, v] * np.conj(k[c, v])
                    new[r, c] += acc
        p = 0.0
        for r in range(n):
            p += new[r, r].real
        if p < PROB_FLOOR:
            return -np.inf
        inv = 1.0 / p
        for r in range(n):
            for c in range(n):
                rho[r, c] = new[r, c] * inv
        ll += np.log(p)
    return ll


@numba.njit(cache=True)
def batch_loglik_kernel(kraus: np.ndarray, rho0: np.ndarray,
                        obs: np.ndarray) -> float:
    """Sum of sequence log-likelihoods over the rows of obs, in row order."""
    total = 0.0
    for i in range(obs.shape[0]):
        ll = seq_loglik_kernel(kraus, rho0, obs[i])
        if ll == -np.inf:
            return -np.inf
        total += ll
    return total
