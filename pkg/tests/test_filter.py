"""Entropy-based outlier filter: row metrics, z-scores, and row selection."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from hqml import rcr_ef, row_metrics
from hqml.entropy_filter import WEIGHT_MEAN, WEIGHT_VAR, _zscore


def test_row_metrics_constant_row():
    e, u, m, v = row_metrics([4, 4, 4, 4])
    assert (e, u, m, v) == (0.0, 1, 4.0, 0.0)


def test_row_metrics_two_symbols():
    e, u, m, v = row_metrics([1, 2, 1, 2])
    assert e == pytest.approx(1.0)   # 1 bit
    assert u == 2
    assert m == pytest.approx(1.5)
    assert v == pytest.approx(1 / 3)  # unbiased, divisor T-1


def test_row_metrics_uniform_alphabet():
    e, u, _, _ = row_metrics([1, 2, 3, 4])
    assert e == pytest.approx(2.0) and u == 4


def test_zscore_standardizes():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    z = _zscore(x)
    assert z.mean() == pytest.approx(0.0, abs=1e-12)
    assert z.std(ddof=1) == pytest.approx(1.0)
    za = _zscore(x, absolute=True)
    assert (za >= 0).all()


def test_zscore_degenerate_is_zero():
    assert (_zscore(np.ones(5)) == 0).all()


def test_score_formula_hand_computed():
    # Three rows: two full-entropy, one constant.  M and V z-scores do vary,
    # so compute the full score by hand and compare.
    obs = np.array([[1, 2, 3, 4],
                    [4, 3, 2, 1],
                    [4, 4, 4, 4]])
    _, stats = rcr_ef(obs, 1)
    metrics = np.array([row_metrics(r) for r in obs])
    z_e = _zscore(metrics[:, 0])
    z_u = _zscore(metrics[:, 1])
    z_m = _zscore(metrics[:, 2], absolute=True)
    z_v = _zscore(metrics[:, 3], absolute=True)
    score = -z_e - z_u + WEIGHT_MEAN * z_m + WEIGHT_VAR * z_v
    assert np.allclose(stats.score, score)
    # The constant row has the strictly highest score and is the one removed.
    assert int(np.argmax(stats.score)) == 2
    assert stats.kept_indices.tolist() == [0, 1]


def test_filter_removes_constant_rows():
    rng = np.random.default_rng(0)
    obs = rng.integers(1, 5, size=(30, 100))
    obs[5:15, :] = 4
    filtered, stats = rcr_ef(obs, 10)
    assert filtered.shape == (20, 100)
    assert stats.kept_indices.tolist() == [i for i in range(30)
                                           if not 5 <= i < 15]
    assert not (filtered == 4).all(axis=1).any()


def test_filter_out_of_range_c_is_identity():
    obs = np.random.default_rng(1).integers(1, 5, size=(6, 8))
    for c in (0, 6, -1, 10):
        out, stats = rcr_ef(obs, c)
        assert np.array_equal(out, obs)
        assert stats.skipped
        assert stats.kept_indices.tolist() == list(range(6))


def test_filter_kept_rows_unchanged_and_ordered():
    obs = np.random.default_rng(2).integers(1, 5, size=(12, 30))
    filtered, stats = rcr_ef(obs, 3)
    assert np.array_equal(filtered, obs[stats.kept_indices])
    assert (np.diff(stats.kept_indices) > 0).all()


def test_filter_permutation_equivariance():
    rng = np.random.default_rng(3)
    obs = rng.integers(1, 5, size=(10, 40))
    perm = rng.permutation(10)
    _, base = rcr_ef(obs, 4)
    _, permuted = rcr_ef(obs[perm], 4)
    kept_base = set(base.kept_indices.tolist())
    kept_perm = {perm[i] for i in permuted.kept_indices}
    assert kept_base == kept_perm


def test_filter_homogeneous_rows_keep_first():
    obs = np.tile(np.array([1, 2, 3, 4]), (6, 1))
    filtered, stats = rcr_ef(obs, 2)
    assert stats.kept_indices.tolist() == [0, 1, 2, 3]
    assert filtered.shape == (4, 4)


def test_filter_keep_high_score_flag_inverts_selection():
    obs = np.random.default_rng(4).integers(1, 5, size=(8, 20))
    obs[0, :] = 4
    _, low = rcr_ef(obs, 1)
    _, high = rcr_ef(obs, 1, keep_high_score=True)
    assert 0 not in low.kept_indices
    assert 0 in high.kept_indices


def test_filter_csv_report(tmp_path):
    obs = np.random.default_rng(5).integers(1, 5, size=(5, 10))
    _, stats = rcr_ef(obs, 2)
    path = tmp_path / "report.csv"
    stats.write_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "index,entropy,unique,mean,var,score,kept"
    assert len(lines) == 6
    assert sum(int(ln.rsplit(",", 1)[1]) for ln in lines[1:]) == 3


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.int64, (6, 12), elements=st.integers(1, 4)),
       st.integers(1, 5))
def test_filter_subset_property(obs, c):
    filtered, stats = rcr_ef(obs, c)
    assert filtered.shape == (6 - c, 12)
    assert len(stats.kept_indices) == 6 - c
    assert np.array_equal(filtered, obs[stats.kept_indices])
