"""The three trainers: random-rotation likelihood ascent (single-proposal
and robust multi-proposal variants) plus a classical Baum-Welch baseline.

All trainers are deterministic functions of their inputs and the config
seed.  The robust trainer (train_rila) filters anomalous rows first, runs P
independent rotation proposals per iteration, and carries one forward by
likelihood-weighted resampling; the plain trainer (train_ila) applies every
maximized rotation directly.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .datagen import HmmSpec
from .entropy_filter import FilterStats, rcr_ef
from .models import DensityMatrix, StackedKraus, batch_loglik, validate
from .rotate import Objective, SolverConfig, apply_update, maximize

# Proposals at -inf are floored this far below the worst finite one before
# weighting, so they get negligible but nonzero mass.
_NEG_INF_GAP = 50.0


@dataclass(frozen=True)
class TrainConfig:
    b: int = 5                  # batch size (rows per batch)
    B: int = 4                  # number of batches
    I: int = 6                  # iterations per batch
    P: int = 10                 # proposals per iteration (robust trainer)
    C: int = 0                  # rows to filter out (robust trainer)
    objective: str = "regular"  # "regular" | "l1"
    lam: float = 0.01
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0
    resample: str = "softmax"   # "softmax" | "paper_literal"
    chain_proposals: bool = True
    keep_high_score: bool = False
    em_restarts: int = 5
    em_tol: float = 1e-6
    em_max_iter: int = 500


@dataclass
class RunRecord:
    iteration_ll: list          # (batch, iteration, objective value)
    validation_ll: list         # one per batch
    best_validation_ll: float
    kappa_best: StackedKraus | None
    hmm_best: HmmSpec | None
    train_ll_sum: float
    train_ll_mean: float        # per observation
    val_ll_sum: float
    val_ll_mean: float
    wall_time: float
    max_completeness_dev: float
    seed: int

    def write_iterations_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["batch", "iteration", "loglik"])
            for row in self.iteration_ll:
                wr.writerow(row)

    def summary(self) -> dict:
        return {
            "train_ll_sum": self.train_ll_sum,
            "train_ll_mean": self.train_ll_mean,
            "val_ll_sum": self.val_ll_sum,
            "val_ll_mean": self.val_ll_mean,
            "best_validation_ll": self.best_validation_ll,
            "wall_time": self.wall_time,
            "max_completeness_dev": self.max_completeness_dev,
            "seed": self.seed,
        }


@dataclass
class ResampleTrace:
    entries: list = field(default_factory=list)
    # each entry: (batch, iteration, L_1..P list, weight list, chosen index 1-based)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["batch", "iteration", "proposal", "loglik", "weight",
                         "chosen"])
            for b, it, lls, ws, pstar in self.entries:
                for p, (ll, wgt) in enumerate(zip(lls, ws), start=1):
                    wr.writerow([b, it, p, ll, wgt, int(p == pstar)])


def resample_weights(lls, scheme: str = "softmax") -> np.ndarray:
    """Normalized selection weights from proposal log-likelihoods.

    softmax:        w_p proportional to exp(L_p - max L)   (favors high L)
    paper_literal:  w_p proportional to exp(max L - L_p)   (favors low L)
    """
    lls = np.asarray(lls, dtype=float)
    if np.all(np.isneginf(lls)):
        return np.full(lls.shape, 1.0 / lls.size)
    if np.any(np.isneginf(lls)):
        floor = lls[np.isfinite(lls)].min() - _NEG_INF_GAP
        lls = np.where(np.isneginf(lls), floor, lls)
    if scheme == "softmax":
        ex = np.exp(lls - lls.max())
    elif scheme == "paper_literal":
        ex = np.exp(-lls - (-lls).min())
    else:
        raise ValueError(f"unknown resampling scheme {scheme!r}")
    return ex / ex.sum()


def _trainer_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _pick_rows(rng: np.random.Generator, total: int) -> tuple[int, int]:
    i, j = np.sort(rng.choice(total, size=2, replace=False))
    return int(i) + 1, int(j) + 1


def _check_init(kappa: StackedKraus) -> None:
    report = validate(kappa)
    if not report.valid:
        raise ValueError(
            f"initial Kraus stack violates completeness by {report.max_deviation:.3e}")


def _finish_record(iteration_ll, validation_ll, best_val, kappa_best,
                   train_obs, val_obs, rho0, max_dev, seed, t0) -> RunRecord:
    train_sum = batch_loglik(kappa_best, rho0, train_obs)
    val_sum = batch_loglik(kappa_best, rho0, val_obs)
    return RunRecord(
        iteration_ll=iteration_ll,
        validation_ll=validation_ll,
        best_validation_ll=best_val,
        kappa_best=kappa_best,
        hmm_best=None,
        train_ll_sum=train_sum,
        train_ll_mean=train_sum / max(np.asarray(train_obs).size, 1),
        val_ll_sum=val_sum,
        val_ll_mean=val_sum / max(np.asarray(val_obs).size, 1),
        wall_time=time.perf_counter() - t0,
        max_completeness_dev=max_dev,
        seed=seed,
    )


def train_ila(train_obs, val_obs, kappa_init: StackedKraus,
              rho0: DensityMatrix, cfg: TrainConfig) -> RunRecord:
    """Single-proposal trainer: per iteration, one random row pair is rotated
    by the maximizing angles.  Validation is scored after every batch so the
    records are comparable with the robust trainer's."""
    _check_init(kappa_init)
    t0 = time.perf_counter()
    train_obs = np.asarray(train_obs, dtype=np.int64)
    val_obs = np.asarray(val_obs, dtype=np.int64)
    rng = _trainer_rng(cfg.seed)
    kappa = kappa_init
    rows_total = kappa.mat.shape[0]
    iteration_ll, validation_ll = [], []
    best_val, kappa_best = float("-inf"), kappa_init
    max_dev = validate(kappa).max_deviation
    for batch in range(1, cfg.B + 1):
        picked = rng.choice(train_obs.shape[0], size=cfg.b, replace=False)
        batch_obs = train_obs[picked, :]
        obj = Objective(kind=cfg.objective, data=batch_obs, rho0=rho0,
                        lam=cfg.lam if cfg.objective == "l1" else 0.0)
        for it in range(1, cfg.I + 1):
            i, j = _pick_rows(rng, rows_total)
            theta, fstar = maximize(obj, kappa, i, j, cfg.solver)
            kappa = apply_update(kappa, theta, i, j)
            max_dev = max(max_dev, validate(kappa).max_deviation)
            iteration_ll.append((batch, it, fstar))
        h = batch_loglik(kappa, rho0, val_obs)
        validation_ll.append(h)
        if h > best_val:
            best_val, kappa_best = h, kappa
    return _finish_record(iteration_ll, validation_ll, best_val, kappa_best,
                          train_obs, val_obs, rho0, max_dev, cfg.seed, t0)


def train_rila(train_obs, val_obs, kappa_init: StackedKraus,
               rho0: DensityMatrix,
               cfg: TrainConfig) -> tuple[RunRecord, FilterStats, ResampleTrace]:
    """Robust trainer: entropy-filter the rows, then per iteration run P
    rotation proposals and resample one by likelihood weight.  With the
    default ``chain_proposals=True`` each accepted proposal feeds the next
    one within the iteration; ``chain_proposals=False`` evaluates all P
    proposals from the same base kappa instead."""
    _check_init(kappa_init)
    t0 = time.perf_counter()
    train_obs = np.asarray(train_obs, dtype=np.int64)
    val_obs = np.asarray(val_obs, dtype=np.int64)
    if cfg.C >= train_obs.shape[0]:
        raise ValueError("filter count C must be below the number of rows")
    clean_obs, fstats = rcr_ef(train_obs, cfg.C,
                               keep_high_score=cfg.keep_high_score)
    if cfg.b > clean_obs.shape[0]:
        raise ValueError("batch size exceeds the filtered row count")
    rng = _trainer_rng(cfg.seed)
    kappa = kappa_init
    rows_total = kappa.mat.shape[0]
    iteration_ll, validation_ll = [], []
    trace = ResampleTrace()
    best_val, kappa_best = float("-inf"), kappa_init
    max_dev = validate(kappa).max_deviation
    for batch in range(1, cfg.B + 1):
        picked = rng.choice(clean_obs.shape[0], size=cfg.b, replace=False)
        batch_obs = clean_obs[picked, :]
        obj = Objective(kind=cfg.objective, data=batch_obs, rho0=rho0,
                        lam=cfg.lam if cfg.objective == "l1" else 0.0)
        for it in range(1, cfg.I + 1):
            base = kappa
            # The penalty vanishes at theta = 0, so the proposal's start
            # value is the plain batch log-likelihood of the base.
            start_ll = batch_loglik(base, rho0, batch_obs)
            proposals, lls = [], []
            for _ in range(cfg.P):
                i, j = _pick_rows(rng, rows_total)
                theta, fstar = maximize(obj, base, i, j, cfg.solver)
                if fstar > start_ll:
                    cand = apply_update(base, theta, i, j)
                    cand_ll = fstar
                else:
                    cand, cand_ll = base, start_ll
                max_dev = max(max_dev, validate(cand).max_deviation)
                proposals.append(cand)
                lls.append(cand_ll)
                if cfg.chain_proposals:
                    base = cand
                    start_ll = batch_loglik(base, rho0, batch_obs)
            weights = resample_weights(lls, scheme=cfg.resample)
            p_star = int(rng.choice(cfg.P, p=weights)) + 1
            kappa = proposals[p_star - 1]
            max_dev = max(max_dev, validate(kappa).max_deviation)
            iteration_ll.append((batch, it, lls[p_star - 1]))
            trace.entries.append((batch, it, list(lls), weights.tolist(), p_star))
        h = batch_loglik(kappa, rho0, val_obs)
        validation_ll.append(h)
        if h > best_val:
            best_val, kappa_best = h, kappa
    record = _finish_record(iteration_ll, validation_ll, best_val, kappa_best,
                            clean_obs, val_obs, rho0, max_dev, cfg.seed, t0)
    return record, fstats, trace


# ---------------------------------------------------------------------------
# Classical Baum-Welch baseline
# ---------------------------------------------------------------------------

def _random_hmm(n: int, m: int, rng: np.random.Generator) -> HmmSpec:
    A = rng.random((n, n)) + 0.1
    C = rng.random((m, n)) + 0.1
    x0 = rng.random(n) + 0.1
    return HmmSpec(A=A / A.sum(axis=0), C=C / C.sum(axis=0), x0=x0 / x0.sum())


def _em_fit(obs: np.ndarray, spec: HmmSpec, tol: float,
            max_iter: int) -> tuple[HmmSpec, list]:
    """Scaled forward-backward EM on an (N, T) symbol matrix."""
    n, m = spec.n, spec.m
    n_rows, t_len = obs.shape
    sym = obs - 1  # 0-based
    A, C, x0 = spec.A.copy(), spec.C.copy(), spec.x0.copy()
    ll_trace = []
    prev_ll = float("-inf")
    for _ in range(max_iter):
        # E-step (vectorized over sequences)
        alpha = np.zeros((t_len + 1, n_rows, n))
        scale = np.ones((t_len + 1, n_rows))
        alpha[0] = np.tile(x0, (n_rows, 1))
        for t in range(1, t_len + 1):
            emit = C[sym[:, t - 1], :]                     # (N, n)
            a = emit * (alpha[t - 1] @ A.T)
            scale[t] = a.sum(axis=1)
            alpha[t] = a / scale[t][:, None]
        ll = float(np.log(scale[1:]).sum())
        ll_trace.append(ll)

        beta = np.ones((n_rows, n))
        xi_acc = np.zeros((n, n))
        c_acc = np.zeros((m, n))
        gamma_sum = np.zeros(n)
        gamma0 = None
        for t in range(t_len, 0, -1):
            emit = C[sym[:, t - 1], :]
            weighted = emit * beta / scale[t][:, None]     # (N, n)
            xi_acc += A * (weighted.T @ alpha[t - 1])
            gamma_t = alpha[t] * beta                      # (N, n), rows sum to 1
            np.add.at(c_acc, sym[:, t - 1], gamma_t)
            gamma_sum += gamma_t.sum(axis=0)
            beta = weighted @ A
        gamma0 = alpha[0] * beta

        # M-step, columns kept exactly stochastic
        A = xi_acc + 1e-12
        A /= A.sum(axis=0)
        C = c_acc + 1e-12
        C /= C.sum(axis=0)
        x0 = gamma0.sum(axis=0) + 1e-12
        x0 /= x0.sum()

        if ll - prev_ll < tol and np.isfinite(prev_ll):
            break
        prev_ll = ll
    return HmmSpec(A=A, C=C, x0=x0), ll_trace


def train_em(train_obs, val_obs, n_states: int, cfg: TrainConfig) -> RunRecord:
    """Multi-restart Baum-Welch; keeps the restart with the best train LL."""
    if n_states < 1:
        raise ValueError("n_states must be >= 1")
    t0 = time.perf_counter()
    train_obs = np.asarray(train_obs, dtype=np.int64)
    val_obs = np.asarray(val_obs, dtype=np.int64)
    m = int(max(train_obs.max(), val_obs.max()))
    best_spec, best_ll, best_trace = None, float("-inf"), []
    for child in np.random.SeedSequence(cfg.seed).spawn(cfg.em_restarts):
        rng = np.random.Generator(np.random.Philox(child))
        spec, trace = _em_fit(train_obs, _random_hmm(n_states, m, rng),
                              cfg.em_tol, cfg.em_max_iter)
        if trace[-1] > best_ll:
            best_spec, best_ll, best_trace = spec, trace[-1], trace
    val_sum = best_spec.batch_forward_loglik(val_obs)
    return RunRecord(
        iteration_ll=[(1, i + 1, ll) for i, ll in enumerate(best_trace)],
        validation_ll=[val_sum],
        best_validation_ll=val_sum,
        kappa_best=None,
        hmm_best=best_spec,
        train_ll_sum=best_ll,
        train_ll_mean=best_ll / max(train_obs.size, 1),
        val_ll_sum=val_sum,
        val_ll_mean=val_sum / max(val_obs.size, 1),
        wall_time=time.perf_counter() - t0,
        max_completeness_dev=0.0,
        seed=cfg.seed,
    )
