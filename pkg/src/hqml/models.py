"""Quantum-model state types, validity checks, and sequence likelihoods.

The learnable object is a vertical stack of Kraus operators: an (n*m*w) x n
complex matrix kappa whose block (y, q) is the operator applied when symbol
y is emitted through branch q.  Trace preservation requires
kappa^dagger kappa = I_n, which is what :func:`validate` checks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import linalg
from ._kernels import PROB_FLOOR, batch_loglik_kernel, seq_loglik_kernel

NEG_INF = float("-inf")


@dataclass(frozen=True)
class DensityMatrix:
    """n x n complex state: Hermitian, trace 1, positive semidefinite."""

    mat: np.ndarray

    @classmethod
    def pure(cls, dim: int, index: int = 0) -> "DensityMatrix":
        m = np.zeros((dim, dim), dtype=np.complex128)
        m[index, index] = 1.0
        return cls(m)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def check(self, tol: float = linalg.TOL_VALID) -> None:
        m = linalg.as_cmatrix(self.mat)
        if m.shape[0] != m.shape[1]:
            raise linalg.ShapeError("density matrix must be square")
        if np.abs(m - m.conj().T).max() > tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > tol or abs(np.trace(m).imag) > tol:
            raise ValueError("density matrix trace is not 1")
        herm = (m + m.conj().T) / 2
        if np.linalg.eigvalsh(herm).min() < -tol:
            raise ValueError("density matrix is not PSD")


@dataclass(frozen=True)
class StackedKraus:
    """Vertically stacked Kraus operators for an (n, m)-model with w branches."""

    n: int
    m: int
    w: int
    mat: np.ndarray  # (n*m*w, n) complex128

    def __post_init__(self):
        expected = (self.n * self.m * self.w, self.n)
        if self.mat.shape != expected:
            raise linalg.ShapeError(
                f"stacked matrix has shape {self.mat.shape}, expected {expected}")

    def operator(self, y: int, q: int = 1) -> np.ndarray:
        """Kraus operator for symbol y (1-based) and branch q (1-based)."""
        start = ((y - 1) * self.w + (q - 1)) * self.n
        return self.mat[start:start + self.n, :]

    def as_blocks(self) -> np.ndarray:
        """(m, w, n, n) view used by the fast kernels."""
        return np.ascontiguousarray(
            self.mat.reshape(self.m, self.w, self.n, self.n))

    @classmethod
    def from_blocks(cls, blocks: np.ndarray) -> "StackedKraus":
        m, w, n, _ = blocks.shape
        return cls(n=n, m=m, w=w,
                   mat=np.asarray(blocks, dtype=np.complex128).reshape(m * w * n, n))

    @classmethod
    def random(cls, n: int, m: int, w: int,
               rng: np.random.Generator) -> "StackedKraus":
        """Random valid stack: complex Gaussian entries orthonormalized by QR."""
        g = rng.standard_normal((n * m * w, n)) + 1j * rng.standard_normal((n * m * w, n))
        q, _ = np.linalg.qr(g)
        return cls(n=n, m=m, w=w, mat=np.ascontiguousarray(q))


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    max_deviation: float


@dataclass(frozen=True)
class StepResult:
    prob: float
    state: DensityMatrix | None  # None when prob underflows


def validate(kappa: StackedKraus, tol: float = linalg.TOL_VALID) -> ValidityReport:
    """Check the trace-preserving completeness relation kappa^+ kappa = I."""
    gram = kappa.mat.conj().T @ kappa.mat
    dev = float(np.abs(gram - np.eye(kappa.n)).max())
    return ValidityReport(valid=dev <= tol, max_deviation=dev)


def step(rho: DensityMatrix, y: int, kappa: StackedKraus) -> StepResult:
    """One Bayesian update: emit symbol y, return its probability and the
    renormalized post-measurement state (None if the probability underflows)."""
    if not 1 <= y <= kappa.m:
        raise ValueError(f"symbol {y} outside 1..{kappa.m}")
    n = kappa.n
    new = np.zeros((n, n), dtype=np.complex128)
    for q in range(1, kappa.w + 1):
        k = kappa.operator(y, q)
        new += k @ rho.mat @ k.conj().T
    p = float(np.trace(new).real)
    if p < PROB_FLOOR:
        return StepResult(prob=0.0, state=None)
    return StepResult(prob=p, state=DensityMatrix(new / p))


def step_probs(rho: DensityMatrix, kappa: StackedKraus) -> np.ndarray:
    """Probability of each symbol 1..m from state rho."""
    return np.array([step(rho, y, kappa).prob for y in range(1, kappa.m + 1)])


def seq_loglik(kappa: StackedKraus, rho0: DensityMatrix, seq) -> float:
    """Log-likelihood (nats) of one symbol sequence; -inf if any step has
    zero probability.  Numerically equal to the log of the nested-trace
    product form, but underflow-safe at long horizons."""
    seq = np.asarray(seq, dtype=np.int64)
    if seq.size and (seq.min() < 1 or seq.max() > kappa.m):
        raise ValueError("sequence contains symbols outside 1..m")
    return float(seq_loglik_kernel(kappa.as_blocks(), rho0.mat, seq))


def seq_loglik_reference(kappa: StackedKraus, rho0: DensityMatrix, seq) -> float:
    """Slow per-step numpy evaluation; oracle for the compiled kernel."""
    rho = rho0
    ll = 0.0
    for y in np.asarray(seq, dtype=np.int64):
        res = step(rho, int(y), kappa)
        if res.state is None:
            return NEG_INF
        ll += np.log(res.prob)
        rho = res.state
    return float(ll)


def batch_loglik(kappa: StackedKraus, rho0: DensityMatrix, obs) -> float:
    """Sum of seq_loglik over the rows of an observation matrix."""
    obs = np.asarray(obs, dtype=np.int64)
    if obs.size == 0:
        return 0.0
    if obs.min() < 1 or obs.max() > kappa.m:
        raise ValueError("observation matrix contains symbols outside 1..m")
    return float(batch_loglik_kernel(kappa.as_blocks(), rho0.mat, obs))


# ---------------------------------------------------------------------------
# Model file format (shared with the data-generation module).
# ---------------------------------------------------------------------------

def _cplx_to_pairs(mat: np.ndarray) -> list:
    return [[[z.real, z.imag] for z in row] for row in np.asarray(mat)]


def _pairs_to_cplx(pairs) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in pairs],
                    dtype=np.complex128)


def model_to_dict(kappa: StackedKraus, rho0: DensityMatrix) -> dict:
    blocks = [kappa.operator(y, q)
              for y in range(1, kappa.m + 1)
              for q in range(1, kappa.w + 1)]
    return {
        "n": kappa.n,
        "m": kappa.m,
        "w": kappa.w,
        "rho0": _cplx_to_pairs(rho0.mat),
        "kraus": [_cplx_to_pairs(b) for b in blocks],
    }


def model_from_dict(doc: dict) -> tuple[StackedKraus, DensityMatrix]:
    n, m, w = doc["n"], doc["m"], doc["w"]
    blocks = np.stack([_pairs_to_cplx(b) for b in doc["kraus"]])
    kappa = StackedKraus.from_blocks(blocks.reshape(m, w, n, n))
    return kappa, DensityMatrix(_pairs_to_cplx(doc["rho0"]))


def save_model(path, kappa: StackedKraus, rho0: DensityMatrix) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(kappa, rho0), fh, indent=1)


def load_model(path) -> tuple[StackedKraus, DensityMatrix]:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
