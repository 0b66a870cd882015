"""Observation-matrix generation, adversarial corruption, and the three
hard-coded benchmark models.

Observation matrices are plain int64 numpy arrays of shape (N, T) with
symbols in 1..m, one sequence per row.  Generation uses one counter-based
Philox stream per row (spawned from the run seed), so per-row sampling is
reproducible and order-independent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .models import DensityMatrix, StackedKraus, step, step_probs, validate


class ConfigError(ValueError):
    """Invalid generation or corruption configuration."""


@dataclass(frozen=True)
class HmmSpec:
    """Classical HMM: column-stochastic transition A (n x n), emission C
    (m x n), and initial distribution x0 (length n)."""

    A: np.ndarray
    C: np.ndarray
    x0: np.ndarray

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.C.shape[0]

    def check(self, tol: float = 1e-12) -> None:
        A, C, x0 = np.asarray(self.A), np.asarray(self.C), np.asarray(self.x0)
        if A.shape != (self.n, self.n) or C.shape[1] != self.n:
            raise ValueError("inconsistent HMM dimensions")
        if A.min() < 0 or C.min() < 0 or x0.min() < 0:
            raise ValueError("HMM matrices must be non-negative")
        if np.abs(A.sum(axis=0) - 1).max() > tol:
            raise ValueError("transition columns must sum to 1")
        if np.abs(C.sum(axis=0) - 1).max() > tol:
            raise ValueError("emission columns must sum to 1")
        if abs(x0.sum() - 1) > tol:
            raise ValueError("initial distribution must sum to 1")

    def transfer_operator(self, y: int) -> np.ndarray:
        """Symbol-conditioned belief-update operator diag(C[y,:]) @ A."""
        return np.diag(self.C[y - 1, :]) @ self.A

    def forward_loglik(self, seq) -> float:
        """Scaled classical forward-algorithm log-likelihood of one row."""
        x = np.asarray(self.x0, dtype=float)
        ll = 0.0
        for y in np.asarray(seq, dtype=np.int64):
            x = self.transfer_operator(int(y)) @ x
            p = x.sum()
            if p < 1e-300:
                return float("-inf")
            ll += np.log(p)
            x = x / p
        return float(ll)

    def batch_forward_loglik(self, obs) -> float:
        return float(sum(self.forward_loglik(row) for row in np.asarray(obs)))


@dataclass(frozen=True)
class ModelSpec:
    """A named generative model: either a Kraus set + rho0 or a classical HMM."""

    name: str
    kind: str  # "hqmm" | "hmm"
    kraus: StackedKraus | None = None
    rho0: DensityMatrix | None = None
    hmm: HmmSpec | None = None

    @property
    def m(self) -> int:
        return self.kraus.m if self.kind == "hqmm" else self.hmm.m

    def check(self) -> None:
        if self.kind == "hqmm":
            report = validate(self.kraus, tol=1e-12)
            if not report.valid:
                raise ValueError(
                    f"Kraus set violates completeness by {report.max_deviation:.3e}")
            self.rho0.check()
        elif self.kind == "hmm":
            self.hmm.check()
        else:
            raise ValueError(f"unknown model kind {self.kind!r}")


@dataclass(frozen=True)
class CorruptionPolicy:
    """Whole-row corruption of floor(N*gamma) seeded-randomly chosen rows."""

    gamma: float
    mode: str = "constant_symbol"  # or "adversary_hook"
    value: int = 4
    seed: int = 0
    hook: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None


def _row_streams(seed: int, n_rows: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(n_rows)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def generate_hqmm(model: ModelSpec, n_rows: int, t_len: int,
                  seed: int) -> np.ndarray:
    """Sample N independent rows from a quantum model: per step, compute the
    symbol distribution, sample an outcome, and apply the conditional update.
    The state resets to rho0 at the start of every row."""
    model.check()
    if model.kind != "hqmm":
        raise ConfigError("generate_hqmm requires a quantum model")
    kappa, rho0, m = model.kraus, model.rho0, model.kraus.m
    out = np.zeros((n_rows, t_len), dtype=np.int64)
    for i, rng in enumerate(_row_streams(seed, n_rows)):
        rho = rho0
        for t in range(t_len):
            probs = step_probs(rho, kappa)
            y = int(rng.choice(m, p=probs / probs.sum())) + 1
            out[i, t] = y
            rho = step(rho, y, kappa).state
    return out


def generate_hmm(spec: HmmSpec, n_rows: int, t_len: int,
                 seed: int) -> np.ndarray:
    """Classical ancestral sampling: state chain via A, emissions via C."""
    spec.check()
    n, m = spec.n, spec.m
    out = np.zeros((n_rows, t_len), dtype=np.int64)
    for i, rng in enumerate(_row_streams(seed, n_rows)):
        state = int(rng.choice(n, p=np.asarray(spec.x0, dtype=float)))
        for t in range(t_len):
            state = int(rng.choice(n, p=spec.A[:, state]))
            out[i, t] = int(rng.choice(m, p=spec.C[:, state])) + 1
    return out


def corrupt(obs: np.ndarray, policy: CorruptionPolicy,
            m: int | None = None) -> np.ndarray:
    """Replace floor(N*gamma) distinct rows of obs per the policy.  Returns a
    new matrix; the input is untouched."""
    if not 0.0 <= policy.gamma < 1.0:
        raise ConfigError("gamma must be in [0, 1)")
    obs = np.asarray(obs, dtype=np.int64)
    n_rows = obs.shape[0]
    count = int(np.floor(n_rows * policy.gamma))
    if count == 0:
        return obs.copy()
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(policy.seed)))
    rows = np.sort(rng.choice(n_rows, size=count, replace=False))
    out = obs.copy()
    if policy.mode == "constant_symbol":
        if policy.value < 1 or (m is not None and policy.value > m):
            raise ConfigError(f"constant symbol {policy.value} outside alphabet")
        out[rows, :] = policy.value
    elif policy.mode == "adversary_hook":
        if policy.hook is None:
            raise ConfigError("adversary_hook mode requires a hook")
        out[rows, :] = policy.hook(obs, rows)
    else:
        raise ConfigError(f"unknown corruption mode {policy.mode!r}")
    return out


# ---------------------------------------------------------------------------
# Benchmark models
# ---------------------------------------------------------------------------

def _kraus_24() -> np.ndarray:
    s = 1.0 / np.sqrt(2.0)
    h = 1.0 / (2.0 * np.sqrt(2.0))
    return np.array([
        [[s, 0], [0, 0]],
        [[0, 0], [0, s]],
        [[h, h], [h, h]],
        [[h, -h], [-h, h]],
    ], dtype=np.complex128)


def _kraus_26() -> np.ndarray:
    s = 1.0 / np.sqrt(3.0)
    h = 1.0 / (2.0 * np.sqrt(3.0))
    j = 1j * h
    return np.array([
        [[s, 0], [0, 0]],
        [[0, 0], [0, s]],
        [[h, h], [h, h]],
        [[h, -h], [-h, h]],
        [[h, -j], [j, h]],
        [[h, j], [-j, h]],
    ], dtype=np.complex128)


_HMM_88_A = np.array([
    [0.1039, 0.1020, 0.2531, 0.2001, 0.2169, 0.1346, 0.1579, 0.0115],
    [0.1410, 0.1366, 0.2584, 0.1114, 0.1641, 0.0608, 0.0404, 0.1236],
    [0.1097, 0.0343, 0.0246, 0.1445, 0.0615, 0.0091, 0.1621, 0.1531],
    [0.1794, 0.0484, 0.0113, 0.0659, 0.1731, 0.3175, 0.1925, 0.1187],
    [0.0535, 0.1958, 0.0490, 0.1434, 0.0226, 0.0990, 0.0282, 0.2178],
    [0.2298, 0.2368, 0.2536, 0.1743, 0.0982, 0.1242, 0.1139, 0.1353],
    [0.0072, 0.0766, 0.0284, 0.0038, 0.1992, 0.2299, 0.1910, 0.2083],
    [0.1755, 0.1693, 0.1216, 0.1567, 0.0644, 0.0250, 0.1139, 0.0317],
])

_HMM_88_C = np.array([
    [0.0327, 0.1710, 0.1649, 0.2154, 0.2030, 0.1879, 0.0064, 0.0348],
    [0.1894, 0.1207, 0.1545, 0.1368, 0.1393, 0.1404, 0.0084, 0.0782],
    [0.0933, 0.1454, 0.0285, 0.0007, 0.0035, 0.0133, 0.0091, 0.1640],
    [0.0388, 0.0675, 0.2360, 0.1471, 0.2077, 0.1522, 0.0791, 0.2714],
    [0.2176, 0.0523, 0.1118, 0.0779, 0.1544, 0.1519, 0.2762, 0.1571],
    [0.0816, 0.1734, 0.1438, 0.1257, 0.2229, 0.1860, 0.1730, 0.0052],
    [0.1762, 0.0829, 0.1015, 0.2112, 0.0385, 0.1433, 0.1775, 0.2241],
    [0.1704, 0.1868, 0.0589, 0.0852, 0.0306, 0.0250, 0.2704, 0.0652],
])

BENCHMARK_NAMES = ("m2010_24", "s2018_26", "hmm_88")


def benchmark(name: str) -> ModelSpec:
    """Return one of the three hard-coded benchmark models."""
    if name == "m2010_24":
        blocks = _kraus_24()[:, np.newaxis, :, :]
        return ModelSpec(name=name, kind="hqmm",
                         kraus=StackedKraus.from_blocks(blocks),
                         rho0=DensityMatrix.pure(2))
    if name == "s2018_26":
        blocks = _kraus_26()[:, np.newaxis, :, :]
        return ModelSpec(name=name, kind="hqmm",
                         kraus=StackedKraus.from_blocks(blocks),
                         rho0=DensityMatrix.pure(2))
    if name == "hmm_88":
        x0 = np.zeros(8)
        x0[0] = 1.0
        # The published 4-decimal matrices are off column-stochasticity by
        # up to 2e-4; renormalize so probabilities sum exactly to 1.
        a = _HMM_88_A / _HMM_88_A.sum(axis=0)
        c = _HMM_88_C / _HMM_88_C.sum(axis=0)
        return ModelSpec(name=name, kind="hmm",
                         hmm=HmmSpec(A=a, C=c, x0=x0),
                         rho0=DensityMatrix.pure(8))
    raise ConfigError(f"unknown benchmark {name!r}; choose from {BENCHMARK_NAMES}")


# ---------------------------------------------------------------------------
# File formats: observation CSV and classical-spec JSON
# ---------------------------------------------------------------------------

def save_obs(path, obs: np.ndarray) -> None:
    np.savetxt(path, np.asarray(obs, dtype=np.int64), fmt="%d", delimiter=",")


def load_obs(path) -> np.ndarray:
    data = np.loadtxt(path, dtype=np.int64, delimiter=",", ndmin=2)
    return data


def save_hmm(path, spec: HmmSpec) -> None:
    with open(path, "w") as fh:
        json.dump({"A": np.asarray(spec.A).tolist(),
                   "C": np.asarray(spec.C).tolist(),
                   "x0": np.asarray(spec.x0).tolist()}, fh, indent=1)


def load_hmm(path) -> HmmSpec:
    with open(path) as fh:
        doc = json.load(fh)
    return HmmSpec(A=np.array(doc["A"]), C=np.array(doc["C"]),
                   x0=np.array(doc["x0"]))
