import numpy as np
import pytest
import scipy.special
import scipy.stats

from sslgcn.errors import DegenerateInputError, UsageError
from sslgcn.stats import (paired_t_test, regularized_incomplete_beta,
                          student_t_two_tailed)


def sig_figs_equal(a, b, figs=4):
    if a == b == 0:
        return True
    return abs(a - b) <= abs(b) * 10.0 ** (1 - figs) / 2


class TestIncompleteBeta:
    def test_against_scipy_on_grid(self):
        for a in (0.5, 1.0, 2.5, 4.5, 10.0, 40.0):
            for b in (0.5, 1.0, 3.0, 7.5, 25.0):
                for x in (0.0, 1e-6, 0.01, 0.2, 0.5, 0.77, 0.99, 1.0 - 1e-9, 1.0):
                    got = regularized_incomplete_beta(a, b, x)
                    want = scipy.special.betainc(a, b, x)
                    assert abs(got - want) <= 1e-10, (a, b, x)

    def test_endpoints(self):
        assert regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0
        assert regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0

    def test_domain_errors(self):
        with pytest.raises(UsageError):
            regularized_incomplete_beta(-1.0, 2.0, 0.5)
        with pytest.raises(UsageError):
            regularized_incomplete_beta(1.0, 2.0, 1.5)


class TestStudentT:
    def test_against_scipy_tails(self):
        for df in (1, 2, 5, 9, 30, 200):
            for t in (0.0, 0.3, 1.0, 2.2, 5.7, 12.0):
                got = student_t_two_tailed(t, df)
                want = 2.0 * scipy.stats.t.sf(abs(t), df)
                assert abs(got - want) <= 1e-10, (t, df)

    def test_symmetric_in_t(self):
        assert student_t_two_tailed(2.5, 7) == student_t_two_tailed(-2.5, 7)


class TestPairedTTest:
    def test_known_differences_one_to_ten(self):
        # differences 1..10: t = 5.5 / (sd/sqrt(10))
        a = [float(i) for i in range(1, 11)]
        b = [0.0] * 10
        t, p = paired_t_test(a, b)
        assert t == pytest.approx(5.7446, abs=2e-4)
        assert p == pytest.approx(2.8e-4, rel=0.02)

    def test_matches_scipy_on_random_pairs(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            n = int(rng.integers(3, 30))
            a = rng.normal(size=n)
            b = a + rng.normal(scale=0.5, size=n) + rng.uniform(-1, 1)
            t, p = paired_t_test(a.tolist(), b.tolist())
            ref = scipy.stats.ttest_rel(a, b)
            assert sig_figs_equal(t, float(ref.statistic)), trial
            assert sig_figs_equal(p, float(ref.pvalue)), trial

    def test_swap_negates_t_preserves_p(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=12).tolist()
        b = rng.normal(size=12).tolist()
        t1, p1 = paired_t_test(a, b)
        t2, p2 = paired_t_test(b, a)
        assert t1 == -t2
        assert p1 == p2

    def test_constant_shift_with_tiny_noise_is_significant(self):
        rng = np.random.default_rng(2)
        b = rng.normal(size=10)
        a = b + 1.0 + rng.normal(scale=1e-4, size=10)
        t, p = paired_t_test(a.tolist(), b.tolist())
        assert t > 1000
        assert p < 1e-12

    def test_zero_variance_rejected(self):
        with pytest.raises(DegenerateInputError):
            paired_t_test([1.0, 2.0, 3.0], [0.0, 1.0, 2.0])

    def test_length_mismatch_rejected(self):
        with pytest.raises(UsageError):
            paired_t_test([1.0, 2.0], [1.0])

    def test_too_short_rejected(self):
        with pytest.raises(UsageError):
            paired_t_test([1.0], [0.0])

    def test_p_in_unit_interval(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a = rng.normal(size=6)
            b = rng.normal(size=6)
            _, p = paired_t_test(a.tolist(), b.tolist())
            assert 0.0 <= p <= 1.0
