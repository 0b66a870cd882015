"""Row-pair unitary updates of the stacked Kraus matrix and the bounded
local solvers that pick the rotation angles.

A candidate update mixes two rows i < j of kappa through a 2x2 unitary block
parameterized by four angles theta = (alpha, phi, psi, delta):

    row_i' =  e^{i phi/2} e^{ i psi} cos(alpha) row_i
            + e^{i phi/2} e^{ i delta} sin(alpha) row_j
    row_j' = -e^{i phi/2} e^{-i delta} sin(alpha) row_i
            + e^{i phi/2} e^{-i psi} cos(alpha) row_j

Both new rows are computed from the old rows simultaneously, so the update
is exactly unitary and kappa^+ kappa = I is preserved up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ._kernels import batch_loglik_kernel
from .models import DensityMatrix, StackedKraus

BOUND = np.pi  # solver box is [-pi, pi]^4; the angle family is 2pi-periodic

# Stand-in for -inf inside the smooth solver; pattern search handles -inf
# comparisons directly.
_NEG_HUGE = -1e100


def rotation_block(theta) -> np.ndarray:
    """The 2x2 unitary block for angles (alpha, phi, psi, delta)."""
    alpha, phi, psi, delta = np.asarray(theta, dtype=float)
    g = np.exp(0.5j * phi)
    return np.array([
        [g * np.exp(1j * psi) * np.cos(alpha), g * np.exp(1j * delta) * np.sin(alpha)],
        [-g * np.exp(-1j * delta) * np.sin(alpha), g * np.exp(-1j * psi) * np.cos(alpha)],
    ])


def apply_update(kappa: StackedKraus, theta, i: int, j: int) -> StackedKraus:
    """Rotate rows i and j (1-based, i < j) of the stacked matrix."""
    rows = kappa.mat.shape[0]
    if not 1 <= i < j <= rows:
        raise IndexError(f"need 1 <= i < j <= {rows}, got i={i}, j={j}")
    block = rotation_block(theta)
    mat = kappa.mat.copy()
    old_i = kappa.mat[i - 1, :]
    old_j = kappa.mat[j - 1, :]
    mat[i - 1, :] = block[0, 0] * old_i + block[0, 1] * old_j
    mat[j - 1, :] = block[1, 0] * old_i + block[1, 1] * old_j
    return StackedKraus(n=kappa.n, m=kappa.m, w=kappa.w, mat=mat)


@dataclass(frozen=True)
class Objective:
    """Batch log-likelihood of rotated kappa, optionally L1-penalized in the
    four angles: f(theta) = ll(theta) - lam * sum(|theta|)."""

    kind: str  # "regular" | "l1"
    data: np.ndarray  # (b, T) int64
    rho0: DensityMatrix
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in ("regular", "l1"):
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")


def eval_objective(obj: Objective, kappa: StackedKraus, theta,
                   i: int, j: int) -> float:
    theta = np.asarray(theta, dtype=float)
    rotated = apply_update(kappa, theta, i, j)
    ll = float(batch_loglik_kernel(rotated.as_blocks(), obj.rho0.mat, obj.data))
    if obj.kind == "l1":
        return ll - obj.lam * float(np.abs(theta).sum())
    return ll


@dataclass(frozen=True)
class SolverConfig:
    kind: str = "pattern_search"  # or "fd_local"
    max_evals: int = 120
    mesh_start: float = 0.25
    mesh_tol: float = 1e-4
    fd_step: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.max_evals < 1:
            raise ValueError("max_evals must be >= 1")
        if self.kind not in ("pattern_search", "fd_local"):
            raise ValueError(f"unknown solver kind {self.kind!r}")


def maximize(obj: Objective, kappa: StackedKraus, i: int, j: int,
             cfg: SolverConfig) -> tuple[np.ndarray, float]:
    """Maximize eval_objective over theta in [-pi, pi]^4 from theta = 0.

    Never returns a value below the start point: if the solver fails to
    improve, (0, f(0)) comes back.  ``pattern_search`` is derivative-free and
    safe on the L1-penalized objective; ``fd_local`` uses central finite
    differences and should only be used on the smooth (regular) objective.
    """
    f = lambda t: eval_objective(obj, kappa, t, i, j)
    if cfg.kind == "pattern_search":
        return _pattern_search(f, cfg)
    return _fd_local(f, cfg)


def _pattern_search(f, cfg: SolverConfig) -> tuple[np.ndarray, float]:
    """Coordinate mesh polling: opportunistic acceptance, expand the mesh by
    2 on success, contract by 0.5 on a full failed poll, stop when the mesh
    drops below mesh_tol or the evaluation budget runs out."""
    best_t = np.zeros(4)
    best_f = f(best_t)
    evals = 1
    mesh = cfg.mesh_start
    while mesh >= cfg.mesh_tol and evals < cfg.max_evals:
        improved = False
        for axis in range(4):
            for sign in (1.0, -1.0):
                cand = best_t.copy()
                cand[axis] = np.clip(cand[axis] + sign * mesh, -BOUND, BOUND)
                if cand[axis] == best_t[axis]:
                    continue
                val = f(cand)
                evals += 1
                if val > best_f:
                    best_t, best_f = cand, val
                    improved = True
                    break
                if evals >= cfg.max_evals:
                    return best_t, best_f
            if improved:
                break
        mesh = min(mesh * 2.0, BOUND) if improved else mesh * 0.5
    return best_t, best_f


def _fd_local(f, cfg: SolverConfig) -> tuple[np.ndarray, float]:
    h = cfg.fd_step

    def neg(t):
        v = f(t)
        return -max(v, _NEG_HUGE)

    def neg_grad(t):
        g = np.zeros(4)
        for k in range(4):
            tp, tm = t.copy(), t.copy()
            tp[k] += h
            tm[k] -= h
            g[k] = (neg(tp) - neg(tm)) / (2 * h)
        return g

    start = np.zeros(4)
    f0 = f(start)
    res = minimize(neg, start, jac=neg_grad, method="L-BFGS-B",
                   bounds=[(-BOUND, BOUND)] * 4,
                   options={"maxfun": cfg.max_evals})
    theta = np.clip(res.x, -BOUND, BOUND)
    val = f(theta)
    if val > f0:
        return theta, val
    return start, f0
