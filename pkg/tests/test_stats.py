import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from texkit import FeatureTable, WelchResult, alignment_workflow, frechet_distance, welch_test
from texkit.stats import regularized_incomplete_beta, student_t_two_sided_p

# Frozen reference values computed with an independent statistics library
# (scipy.stats.ttest_ind with equal_var=False, Welch-Satterthwaite dof).
WELCH_REFERENCE = [
    ([1, 2, 3, 4, 5], [2, 3, 4, 5, 6], -1.0, 8.0, 0.34659350708733416),
    ([1.1, 2.3, 2.9, 4.2], [5.5, 6.1, 7.0, 8.2, 9.9],
     -4.640817716937155, 6.980846257892732, 0.0023844095428269636),
    ([0.5, 0.5, 0.5, 0.7, 0.7, 0.7], [0.52, 0.49, 0.71, 0.68, 0.55],
     0.1591114568351462, 8.912531238843268, 0.8771282491189731),
    ([10, 12, 9, 11, 13, 10], [20, 22, 19, 23],
     -9.302412790288885, 5.539245056920313, 0.00013794858602363716),
    ([-1.5, -0.3, 0.8, 1.2, 2.2], [-2.0, -1.1, 0.1, 0.9, 1.5],
     0.6642925775480543, 7.999699498751899, 0.5251839101745144),
    ([3.2, 3.3, 3.1], [3.25, 3.35, 3.15, 3.28],
     -0.8086369370248265, 3.9061150163939415, 0.46509317575104464),
    ([100, 101, 99, 102], [100.5, 100.6, 100.4],
     0.0, 3.047899401657435, 1.0),
    ([0.001, 0.002, 0.0015, 0.0025], [0.003, 0.0031, 0.0029],
     -3.8124642583151145, 3.1901718959677936, 0.02847199401282026),
    ([7, 7, 7, 8, 9], [7, 7, 7, 7, 7.0001],
     1.499949998125059, 4.000000020000001, 0.20801228848216494),
    ([2.5, 3.5, 4.5, 5.5, 6.5, 7.5], [5.0, 5.1, 4.9, 5.05, 4.95, 5.2],
     -0.04357102009502976, 5.033332962967077, 0.9669220904883318),
]


class TestIncompleteBeta:
    def test_against_scipy(self):
        from scipy import special
        rng = np.random.default_rng(0)
        for _ in range(200):
            a = float(rng.uniform(0.2, 40))
            b = float(rng.uniform(0.2, 40))
            x = float(rng.uniform(0, 1))
            assert regularized_incomplete_beta(a, b, x) == pytest.approx(
                float(special.betainc(a, b, x)), abs=1e-10)

    def test_endpoints(self):
        assert regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0
        assert regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0

    def test_two_sided_p_against_scipy(self):
        from scipy import stats as sps
        for t in (-5.0, -1.3, 0.0, 0.7, 2.9, 10.0):
            for dof in (1.0, 2.5, 8.0, 30.0, 200.0):
                expected = 2.0 * float(sps.t.sf(abs(t), dof))
                assert student_t_two_sided_p(t, dof) == pytest.approx(expected, abs=1e-12)


class TestWelchTest:
    def test_identical_samples(self):
        r = welch_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert r.t_stat == 0.0
        assert r.p_value == 1.0

    @pytest.mark.parametrize("a,b,t,dof,p", WELCH_REFERENCE)
    def test_frozen_reference_values(self, a, b, t, dof, p):
        r = welch_test(a, b)
        assert r.t_stat == pytest.approx(t, abs=1e-6)
        assert r.dof == pytest.approx(dof, abs=1e-6)
        assert r.p_value == pytest.approx(p, abs=1e-6)

    def test_swap_symmetry(self):
        a = [1.0, 2.0, 5.0, 3.3]
        b = [0.5, 4.0, 2.2]
        assert welch_test(a, b).p_value == pytest.approx(welch_test(b, a).p_value, abs=1e-14)
        assert welch_test(a, b).t_stat == pytest.approx(-welch_test(b, a).t_stat, abs=1e-14)

    def test_degenerate_conventions(self):
        equal = welch_test([5.0, 5.0], [5.0, 5.0])
        assert equal.p_value == 1.0 and equal.t_stat == 0.0
        unequal = welch_test([5.0, 5.0], [6.0, 6.0])
        assert unequal.p_value == 0.0
        assert math.isinf(unequal.t_stat) and unequal.t_stat < 0

    def test_undersized_samples(self):
        with pytest.raises(ValueError):
            welch_test([1.0], [1.0, 2.0])

    @given(st.floats(0.1, 50), st.floats(-100, 100), st.integers(0, 2**31 - 1))
    @settings(max_examples=60, deadline=None)
    def test_affine_invariance(self, scale, shift, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(0, 1, 12)
        b = rng.normal(0.5, 2, 9)
        base = welch_test(a, b)
        moved = welch_test(scale * a + shift, scale * b + shift)
        assert moved.p_value == pytest.approx(base.p_value, abs=1e-10)


class TestFrechetDistance:
    def test_identical_gaussians(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((4, 4))
        cov = a @ a.T + 0.5 * np.eye(4)
        mu = rng.standard_normal(4)
        assert abs(frechet_distance(mu, cov, mu, cov)) < 1e-8

    def test_one_dimensional_mean_shift(self):
        assert frechet_distance([0.0], [[1.0]], [2.0], [[1.0]]) == pytest.approx(4.0, abs=1e-12)

    def test_one_dimensional_sigma_gap(self):
        assert frechet_distance([0.0], [[1.0]], [0.0], [[9.0]]) == pytest.approx(4.0, abs=1e-12)

    def test_one_dimensional_closed_form(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            m1, m2 = rng.normal(0, 3, 2)
            s1, s2 = rng.uniform(0.1, 4, 2)
            expected = (m1 - m2) ** 2 + (s1 - s2) ** 2
            got = frechet_distance([m1], [[s1 ** 2]], [m2], [[s2 ** 2]])
            assert got == pytest.approx(expected, abs=1e-8)

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            a = rng.standard_normal((3, 3))
            b = rng.standard_normal((3, 3))
            cov_r = a @ a.T + 0.1 * np.eye(3)
            cov_g = b @ b.T + 0.1 * np.eye(3)
            mu_r, mu_g = rng.standard_normal(3), rng.standard_normal(3)
            fd_rg = frechet_distance(mu_r, cov_r, mu_g, cov_g)
            fd_gr = frechet_distance(mu_g, cov_g, mu_r, cov_r)
            assert fd_rg == pytest.approx(fd_gr, abs=1e-8)

    def test_matches_scipy_sqrtm(self):
        from scipy import linalg
        rng = np.random.default_rng(3)
        for _ in range(10):
            a = rng.standard_normal((5, 5))
            b = rng.standard_normal((5, 5))
            cov_r = a @ a.T + 0.2 * np.eye(5)
            cov_g = b @ b.T + 0.2 * np.eye(5)
            mu_r, mu_g = rng.standard_normal(5), rng.standard_normal(5)
            covmean = linalg.sqrtm(cov_r @ cov_g)
            expected = float((mu_r - mu_g) @ (mu_r - mu_g)
                             + np.trace(cov_r + cov_g - 2 * covmean.real))
            got = frechet_distance(mu_r, cov_r, mu_g, cov_g)
            assert got == pytest.approx(expected, abs=1e-8)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            frechet_distance([0.0, 1.0], np.eye(2), [0.0], [[1.0]])

    def test_asymmetric_covariance_rejected(self):
        cov = np.array([[1.0, 0.5], [0.0, 1.0]])
        with pytest.raises(ValueError, match="symmetric"):
            frechet_distance([0.0, 0.0], cov, [0.0, 0.0], np.eye(2))


def table(names, rows):
    return FeatureTable([f"img{i}" for i in range(len(rows))], list(names), np.asarray(rows))


def gaussian_tables(rng, names, shifts, n=200):
    """Pair of tables whose per-feature mean gap is given by shifts."""
    base = rng.normal(0.0, 1.0, (n, len(names)))
    other = rng.normal(0.0, 1.0, (n, len(names))) + np.asarray(shifts)[None, :]
    return table(names, base), table(names, other)


class TestAlignmentWorkflow:
    NAMES = [f"f{i:02d}" for i in range(12)]

    def test_fully_aligned_after(self):
        rng = np.random.default_rng(0)
        shifts = np.where(np.arange(12) < 8, 1.0, 0.0)
        before = gaussian_tables(rng, self.NAMES, shifts)
        after = gaussian_tables(rng, self.NAMES, np.zeros(12))
        report = alignment_workflow(before, after, alpha=0.01)
        assert set(report.r_features) == set(self.NAMES[:8])
        assert report.z_features == report.r_features
        assert report.percentage == 100.0

    def test_nothing_changed_after(self):
        rng = np.random.default_rng(1)
        shifts = np.where(np.arange(12) < 8, 1.0, 0.0)
        before = gaussian_tables(rng, self.NAMES, shifts)
        after = gaussian_tables(np.random.default_rng(2), self.NAMES, shifts)
        report = alignment_workflow(before, after, alpha=0.01)
        assert report.z_features == []
        assert report.percentage == 0.0

    def test_half_of_shifts_removed(self):
        # Remove the shift on half of R: the alignment rate lands near 50%.
        rng = np.random.default_rng(42)
        shifts = np.where(np.arange(12) < 8, 1.0, 0.0)
        before = gaussian_tables(rng, self.NAMES, shifts)
        after_shifts = shifts.copy()
        after_shifts[:4] = 0.0
        after = gaussian_tables(rng, self.NAMES, after_shifts)
        report = alignment_workflow(before, after, alpha=0.01)
        assert set(report.r_features) == set(self.NAMES[:8])
        assert 35.0 <= report.percentage <= 65.0

    def test_empty_r_is_flagged(self):
        rng = np.random.default_rng(3)
        before = gaussian_tables(rng, self.NAMES, np.zeros(12))
        after = gaussian_tables(rng, self.NAMES, np.zeros(12))
        report = alignment_workflow(before, after, alpha=0.01)
        assert report.r_features == []
        assert report.percentage is None
        assert "undefined" in report.summary_text()

    def test_order_invariance(self):
        rng = np.random.default_rng(4)
        shifts = np.where(np.arange(12) < 8, 1.0, 0.0)
        ba, bb = gaussian_tables(rng, self.NAMES, shifts)
        aa, ab = gaussian_tables(rng, self.NAMES, shifts * 0.0)
        report = alignment_workflow((ba, bb), (aa, ab), alpha=0.01)

        perm = np.random.default_rng(5).permutation(12)
        def permute(t):
            return FeatureTable(t.ids, [t.features[i] for i in perm], t.values[:, perm])
        report_p = alignment_workflow((permute(ba), permute(bb)), (permute(aa), permute(ab)),
                                      alpha=0.01)
        assert report_p.percentage == report.percentage
        assert set(report_p.r_features) == set(report.r_features)

    def test_inconsistent_names_rejected(self):
        a = table(["x", "y"], [[0.0, 1.0], [1.0, 2.0]])
        b = table(["x", "z"], [[0.0, 1.0], [1.0, 2.0]])
        with pytest.raises(ValueError):
            alignment_workflow((a, b), (a, a), alpha=0.01)

    def test_welch_result_validation(self):
        with pytest.raises(ValueError):
            WelchResult(t_stat=0.0, dof=-1.0, p_value=0.5)
        with pytest.raises(ValueError):
            WelchResult(t_stat=0.0, dof=1.0, p_value=1.5)
