import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taskorder.analytic import (
    batched_final_error,
    final_error,
    final_error_upper_form,
    uniform_upper_inverse,
    ordered_error,
    psd_sqrt,
    strict_upper,
    unit_upper_inverse,
)
from taskorder.errors import MOutOfRange, NotPSD
from taskorder.taskspec import (
    Ordering,
    TaskSetSpec,
    constant_correlation,
    three_task_correlation,
    validate_correlation,
)

from strategies import correlations, random_corr


def _back_substitution(m: np.ndarray) -> np.ndarray:
    """Column-by-column inverse of I + M for strictly upper M, plain loops."""
    P = m.shape[0]
    inv = np.zeros((P, P))
    for col in range(P):
        e = np.zeros(P)
        e[col] = 1.0
        x = np.zeros(P)
        for i in range(P - 1, -1, -1):
            x[i] = e[i] - sum(m[i, k] * x[k] for k in range(i + 1, P))
        inv[:, col] = x
    return inv


class TestInverse:
    @settings(max_examples=30, deadline=None)
    @given(correlations(2, 8))
    def test_matches_explicit_back_substitution(self, c):
        u = strict_upper(c)
        assert np.allclose(unit_upper_inverse(u), _back_substitution(u), atol=1e-12)

    @pytest.mark.parametrize("m", [-0.5, 0.0, 0.3, 0.9])
    @pytest.mark.parametrize("P", [1, 2, 5, 8])
    def test_closed_form_for_uniform_upper(self, m, P):
        u = np.triu(np.full((P, P), m), 1)
        assert np.allclose(uniform_upper_inverse(m, P), unit_upper_inverse(u), atol=1e-14)

    def test_closed_form_rejects_m(self):
        with pytest.raises(MOutOfRange):
            uniform_upper_inverse(1.0, 3)


class TestPsdSqrt:
    @settings(max_examples=30, deadline=None)
    @given(correlations(1, 7))
    def test_squares_back(self, c):
        s = psd_sqrt(c)
        assert np.allclose(s, s.T)
        assert np.allclose(s @ s, c.entries, atol=1e-10)

    def test_rank_one(self):
        s = psd_sqrt(np.ones((3, 3)))
        assert np.allclose(s, np.ones((3, 3)) / np.sqrt(3))

    def test_rejects_indefinite(self):
        with pytest.raises(NotPSD):
            psd_sqrt(three_task_correlation(0.95, 0.95, -0.9))


class TestFinalError:
    @settings(max_examples=60, deadline=None)
    @given(correlations(2, 7), st.integers(0, 2**31 - 1))
    def test_two_forms_agree(self, c_in, seed):
        c_out = validate_correlation(random_corr(c_in.size, seed))
        spec = TaskSetSpec(c_in, c_out)
        assert final_error(spec) == pytest.approx(final_error_upper_form(spec), abs=1e-10)

    @pytest.mark.parametrize("P", [1, 2, 5, 9])
    def test_independent_tasks_have_no_error(self, P):
        spec = TaskSetSpec(constant_correlation(P, 0.0), constant_correlation(P, 0.7))
        assert final_error(spec) == 0.0

    def test_single_task(self):
        assert final_error(TaskSetSpec.uniform_output(constant_correlation(1, 0.0))) == 0.0

    @pytest.mark.parametrize("c", np.round(np.arange(0.0, 1.0, 0.1), 1))
    def test_two_tasks_shared_output(self, c):
        spec = TaskSetSpec.uniform_output(constant_correlation(2, c))
        assert final_error(spec) == pytest.approx(c**2 * (1 - c) ** 2, abs=1e-12)

    @given(st.floats(-0.99, 0.99), st.floats(-0.99, 0.99))
    def test_two_tasks_general_output(self, c, rho):
        # residual column (-c^2, c) weighted by C_out
        spec = TaskSetSpec.uniform_output(constant_correlation(2, c), rho)
        expected = c**4 + c**2 - 2 * rho * c**3
        assert final_error(spec) == pytest.approx(expected, abs=1e-12)

    def test_order_dependence_on_three_tasks(self):
        spec = TaskSetSpec.uniform_output(validate_correlation(three_task_correlation(0.5, 0.5, 0.0)))
        a = ordered_error(spec, Ordering.parse("A>B>C"))
        b = ordered_error(spec, Ordering.parse("A>C>B"))
        assert a != pytest.approx(b)
        # a reversal of a chain is its mirror image here
        assert a == pytest.approx(ordered_error(spec, Ordering.parse("C>B>A")))

    @settings(max_examples=25, deadline=None)
    @given(correlations(2, 6))
    def test_non_negative(self, c):
        assert final_error(TaskSetSpec.uniform_output(c, 0.3)) >= 0.0


class TestBatched:
    @settings(max_examples=20, deadline=None)
    @given(st.integers(2, 7), st.integers(0, 2**31 - 1))
    def test_matches_single(self, P, seed):
        mats = np.stack([random_corr(P, seed + k) for k in range(5)])
        outs = np.stack([random_corr(P, seed + 100 + k) for k in range(5)])
        roots = np.stack([psd_sqrt(o) for o in outs])
        got = batched_final_error(mats, roots)
        want = [final_error(TaskSetSpec(validate_correlation(a), validate_correlation(b))) for a, b in zip(mats, outs)]
        assert np.allclose(got, want, atol=1e-12)

    def test_shared_root(self):
        mats = np.stack([random_corr(4, k) for k in range(3)])
        root = psd_sqrt(np.ones((4, 4)))
        got = batched_final_error(mats, root)
        want = [final_error(TaskSetSpec.uniform_output(validate_correlation(a))) for a in mats]
        assert np.allclose(got, want, atol=1e-12)
