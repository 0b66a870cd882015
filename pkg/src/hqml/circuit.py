"""Two-stage unitary circuit that reproduces classical belief updates.

Builds the transition unitary (4x4) and emission unitary (6x6) for a
2-state, 3-output chain, pushes a state through the tensor/conjugate/
project/partial-trace pipeline, and checks that the diagonal of the
normalized output equals the classical posterior.  Also provides an exact
embedding of any classical chain into a Kraus-operator model, used as a
cross-module oracle.

Subsystem ordering: system register first, environment second.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from . import linalg
from .datagen import HmmSpec, ModelSpec
from .models import DensityMatrix, StackedKraus

PROB_FLOOR = 1e-300


@dataclass(frozen=True)
class Prop1Instance:
    a: float
    b: float
    e: np.ndarray          # emission column for state 0, length 3, sums to 1
    f: np.ndarray          # emission column for state 1
    rho_prev: DensityMatrix  # 2x2 with diagonal (r, s) and coherence c
    y: int                 # observed symbol in {0, 1, 2}

    def check(self) -> None:
        if not (0 <= self.a <= 1 and 0 <= self.b <= 1):
            raise ValueError("transition probabilities must lie in [0, 1]")
        for col in (self.e, self.f):
            col = np.asarray(col, dtype=float)
            if col.shape != (3,) or col.min() < -1e-12 or abs(col.sum() - 1) > 1e-9:
                raise ValueError("emission columns must be probability vectors of length 3")
        if self.y not in (0, 1, 2):
            raise ValueError("observation must be 0, 1, or 2")
        self.rho_prev.check()


def random_instance(rng: np.random.Generator) -> Prop1Instance:
    """Random valid instance, including coherence up to the physical bound."""
    a, b = rng.random(), rng.random()
    e = rng.dirichlet(np.ones(3))
    f = rng.dirichlet(np.ones(3))
    r = rng.random()
    s = 1.0 - r
    c = rng.random() * np.sqrt(r * s) * np.exp(2j * np.pi * rng.random())
    rho = DensityMatrix(np.array([[r, c], [np.conj(c), s]]))
    return Prop1Instance(a=a, b=b, e=e, f=f, rho_prev=rho,
                         y=int(rng.integers(3)))


def build_u1(a: float, b: float) -> np.ndarray:
    """4x4 block-diagonal transition unitary from chain parameters a, b."""
    if not (0 <= a <= 1 and 0 <= b <= 1):
        raise ValueError("a and b must lie in [0, 1]")
    ua = np.array([[np.sqrt(a), np.sqrt(1 - a)],
                   [np.sqrt(1 - a), -np.sqrt(a)]])
    ub = np.array([[np.sqrt(1 - b), np.sqrt(b)],
                   [np.sqrt(b), -np.sqrt(1 - b)]])
    return block_diag(ua, ub).astype(np.complex128)


def _complete_orthogonal(first_col: np.ndarray) -> np.ndarray:
    """Real orthogonal 3x3 whose first column is first_col, completed by
    Gram-Schmidt against the canonical basis."""
    cols = [first_col / np.linalg.norm(first_col)]
    for k in range(3):
        v = np.zeros(3)
        v[k] = 1.0
        for u in cols:
            v = v - (u @ v) * u
        nrm = np.linalg.norm(v)
        if nrm > 1e-12:
            cols.append(v / nrm)
        if len(cols) == 3:
            break
    return np.column_stack(cols)


def build_u2(e, f) -> np.ndarray:
    """6x6 block-diagonal emission unitary; each block is an orthogonal
    completion whose first column is the elementwise square root of the
    emission column."""
    e = np.asarray(e, dtype=float)
    f = np.asarray(f, dtype=float)
    for col in (e, f):
        if col.shape != (3,) or col.min() < -1e-12 or abs(col.sum() - 1) > 1e-9:
            raise ValueError("emission columns must be probability vectors of length 3")
    v0 = _complete_orthogonal(np.sqrt(np.clip(e, 0, None)))
    v1 = _complete_orthogonal(np.sqrt(np.clip(f, 0, None)))
    return block_diag(v0, v1).astype(np.complex128)


@dataclass(frozen=True)
class CircuitResult:
    prob: float                      # pre-normalization trace
    state: DensityMatrix | None     # None when the observation has prob 0
    diag: np.ndarray | None


def circuit_posterior(inst: Prop1Instance) -> CircuitResult:
    """Evaluate the full circuit literally: tensor in a fresh 2-dim register,
    conjugate by the transition unitary, trace out the system, tensor in a
    fresh 3-dim register, conjugate by the emission unitary, project on the
    observed symbol, trace out the 3-dim register, and normalize."""
    inst.check()
    u1 = build_u1(inst.a, inst.b)
    u2 = build_u2(inst.e, inst.f)
    env1 = DensityMatrix.pure(2).mat
    env2 = DensityMatrix.pure(3).mat

    joint1 = u1 @ linalg.tensor(inst.rho_prev.mat, env1) @ u1.conj().T
    rho_mid = linalg.partial_trace(joint1, 2, 2, over="A")

    joint2 = u2 @ linalg.tensor(rho_mid, env2) @ u2.conj().T
    proj_y = np.zeros((3, 3), dtype=np.complex128)
    proj_y[inst.y, inst.y] = 1.0
    proj = linalg.tensor(np.eye(2, dtype=np.complex128), proj_y)
    selected = proj @ joint2 @ proj.conj().T
    reduced = linalg.partial_trace(selected, 2, 3, over="B")

    prob = float(np.trace(reduced).real)
    if prob < PROB_FLOOR:
        return CircuitResult(prob=0.0, state=None, diag=None)
    state = reduced / prob
    return CircuitResult(prob=prob, state=DensityMatrix(state),
                         diag=state.diagonal().real.copy())


def classical_posterior(inst: Prop1Instance) -> tuple[np.ndarray, float]:
    """Posterior pair and its unnormalized denominator for the same update."""
    r = float(inst.rho_prev.mat[0, 0].real)
    s = float(inst.rho_prev.mat[1, 1].real)
    e_y = float(inst.e[inst.y])
    f_y = float(inst.f[inst.y])
    p0 = e_y * (inst.a * r + (1 - inst.b) * s)
    p1 = f_y * ((1 - inst.a) * r + inst.b * s)
    denom = p0 + p1
    if denom < PROB_FLOOR:
        return np.array([np.nan, np.nan]), 0.0
    return np.array([p0 / denom, p1 / denom]), denom


def hmm_to_hqmm(spec: HmmSpec) -> ModelSpec:
    """Exact embedding: one Kraus operator per (target state, source state)
    pair and output, K = sqrt(T_y[w, j]) |w><j| with T_y = diag(C[y,:]) A.
    For a diagonal state whose diagonal is the classical belief, the quantum
    step probabilities match the classical filter exactly."""
    spec.check()
    n, m = spec.n, spec.m
    blocks = np.zeros((m, n * n, n, n), dtype=np.complex128)
    for y in range(1, m + 1):
        t_y = spec.transfer_operator(y)
        for w in range(n):
            for j in range(n):
                blocks[y - 1, w * n + j, w, j] = np.sqrt(t_y[w, j])
    kappa = StackedKraus.from_blocks(blocks)
    rho0 = DensityMatrix(np.diag(np.asarray(spec.x0, dtype=np.complex128)))
    return ModelSpec(name="hmm_embedding", kind="hqmm", kraus=kappa, rho0=rho0)
