"""Dense complex-matrix kernel: products, adjoints, tensor and partial traces.

All functions operate on 2-D ``numpy.ndarray`` with dtype complex128 and
plain value semantics (inputs are never mutated).  Matrices in this package
never exceed 64x64, so everything is dense and double precision.
"""

from __future__ import annotations

import numpy as np

# Tolerance for physical-validity checks (trace-preservation, PSD, ...).
TOL_VALID = 1e-9
# Tolerance for algebraic identities expected to hold up to rounding.
TOL_ALGEBRA = 1e-12


class ShapeError(ValueError):
    """Raised when matrix dimensions are incompatible."""


def as_cmatrix(a) -> np.ndarray:
    """Coerce input to a finite 2-D complex128 array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ShapeError(f"expected 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
        raise ValueError("matrix contains non-finite entries")
    return m


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = as_cmatrix(a)
    b = as_cmatrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def adjoint(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return as_cmatrix(a).conj().T.copy()


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product."""
    return np.kron(as_cmatrix(a), as_cmatrix(b))


def partial_trace(joint: np.ndarray, dim_a: int, dim_b: int,
                  over: str = "B") -> np.ndarray:
    """Trace out one factor of a (dim_a*dim_b)-dimensional joint matrix.

    ``over="B"`` keeps the first (A) subsystem, ``over="A"`` the second.
    The total trace is preserved.
    """
    joint = as_cmatrix(joint)
    d = dim_a * dim_b
    if joint.shape != (d, d):
        raise ShapeError(
            f"joint matrix has shape {joint.shape}, expected ({d}, {d})")
    r = joint.reshape(dim_a, dim_b, dim_a, dim_b)
    if over == "B":
        return np.einsum("ijkj->ik", r)
    if over == "A":
        return np.einsum("ijil->jl", r)
    raise ValueError(f"over must be 'A' or 'B', got {over!r}")


def trace(a: np.ndarray) -> complex:
    return complex(np.trace(as_cmatrix(a)))
