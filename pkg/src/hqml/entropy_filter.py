"""Outlier-row removal by z-scored entropy/uniqueness/mean/variance scoring.

Each sequence gets a composite anomaly score: low Shannon entropy and few
unique symbols push the score up (repetitive rows look corrupted), and
extreme mean or variance add to it with weight 0.5 each.  The C highest
scoring rows are dropped; everything here is deterministic.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

WEIGHT_MEAN = 0.5
WEIGHT_VAR = 0.5


@dataclass(frozen=True)
class FilterStats:
    entropy: np.ndarray        # bits, per row
    unique: np.ndarray
    mean: np.ndarray
    var: np.ndarray            # unbiased (divisor T-1)
    z_entropy: np.ndarray
    z_unique: np.ndarray
    z_mean: np.ndarray
    z_var: np.ndarray
    score: np.ndarray
    kept_indices: np.ndarray   # original row ids, ascending
    skipped: bool = False      # True when C was out of range and Y returned as-is

    def write_csv(self, path) -> None:
        kept = set(self.kept_indices.tolist())
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["index", "entropy", "unique", "mean", "var",
                         "score", "kept"])
            for i in range(len(self.score)):
                wr.writerow([i, self.entropy[i], self.unique[i], self.mean[i],
                             self.var[i], self.score[i], int(i in kept)])


def row_metrics(row) -> tuple[float, int, float, float]:
    """(entropy bits, unique count, mean, unbiased variance) of one row."""
    row = np.asarray(row)
    if row.size == 0:
        raise ValueError("row must be nonempty")
    _, counts = np.unique(row, return_counts=True)
    p = counts / row.size
    entropy = float(-(p * np.log2(p)).sum())
    var = float(row.var(ddof=1)) if row.size > 1 else 0.0
    return entropy, int(len(counts)), float(row.mean()), var


def _zscore(x: np.ndarray, absolute: bool = False) -> np.ndarray:
    # Degenerate guard: identical values across rows give all-zero z-scores.
    sd = x.std(ddof=1) if len(x) > 1 else 0.0
    if sd <= 0.0:
        return np.zeros_like(x, dtype=float)
    dev = x - x.mean()
    return (np.abs(dev) if absolute else dev) / sd


def rcr_ef(obs: np.ndarray, drop_count: int,
           keep_high_score: bool = False) -> tuple[np.ndarray, FilterStats]:
    """Remove the drop_count most anomalous rows of obs.

    Kept rows preserve their original relative order; ties in the score are
    broken by original index.  If drop_count is not strictly between 0 and N
    the matrix is returned unchanged with ``stats.skipped`` set.

    ``keep_high_score=True`` inverts the retention rule (keeps the highest
    scoring rows instead of the lowest); the default keeps the lowest.
    """
    obs = np.asarray(obs, dtype=np.int64)
    n_rows = obs.shape[0]
    metrics = np.array([row_metrics(r) for r in obs])
    ent, uniq, mean, var = metrics.T
    z_e = _zscore(ent)
    z_u = _zscore(uniq)
    z_m = _zscore(mean, absolute=True)
    z_v = _zscore(var, absolute=True)
    score = -z_e - z_u + WEIGHT_MEAN * z_m + WEIGHT_VAR * z_v

    if not 0 < drop_count < n_rows:
        kept = np.arange(n_rows)
        stats = FilterStats(ent, uniq.astype(int), mean, var, z_e, z_u, z_m,
                            z_v, score, kept, skipped=True)
        return obs.copy(), stats

    key = -score if keep_high_score else score
    order = np.lexsort((np.arange(n_rows), key))  # stable: score, then index
    kept = np.sort(order[:n_rows - drop_count])
    stats = FilterStats(ent, uniq.astype(int), mean, var, z_e, z_u, z_m, z_v,
                        score, kept, skipped=False)
    return obs[kept, :].copy(), stats
