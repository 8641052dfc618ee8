import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from yangsaf.mixing import (combine_estimates, inverse_variance_weights, optimal_weights,
                            solve_weight_system)
from yangsaf.signal_core import ParameterError


def test_linear_system_matches_closed_form_on_random_cases():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(1, 21))
        v = 10 ** rng.uniform(-4, 4, n)
        np.testing.assert_allclose(solve_weight_system(v), inverse_variance_weights(v),
                                   rtol=1e-9, atol=1e-12)
        sol = optimal_weights(v, check=True)
        assert sol.weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert sol.combined_variance == pytest.approx(1 / np.sum(1 / v), rel=1e-9)
        assert sol.combined_variance <= v.min() + 1e-12


@pytest.mark.parametrize("v", [(1.0, 3.0), (2.0, 0.5), (1e-3, 7e-3)])
def test_two_estimates_match_brute_force_grid(v):
    b = np.arange(0, 1 + 5e-7, 1e-6)
    loss = b ** 2 * v[0] + (1 - b) ** 2 * v[1]
    i = int(np.argmin(loss))
    sol = optimal_weights(v)
    assert sol.weights[0] == pytest.approx(b[i], abs=1e-5)
    assert sol.combined_variance == pytest.approx(loss[i], rel=1e-5)


def test_worked_examples():
    np.testing.assert_allclose(optimal_weights([1.0, 1.0]).weights, [0.5, 0.5])
    sol = optimal_weights([1.0, 3.0])
    np.testing.assert_allclose(sol.weights, [0.75, 0.25], atol=1e-12)
    assert sol.combined_variance == pytest.approx(0.75)
    np.testing.assert_allclose(optimal_weights([2.0] * 3).weights, [1 / 3] * 3)
    assert combine_estimates([120.0, 126.0], sol)[0] == pytest.approx(121.5)
    assert combine_estimates([119.0, 121.0], optimal_weights([1.0, 1.0]))[0] == pytest.approx(120.0)
    assert combine_estimates([120.0, 120.0], sol) == (pytest.approx(120.0), 0.75)


def test_single_estimate_gets_full_weight():
    sol = optimal_weights([4.2])
    np.testing.assert_array_equal(sol.weights, [1.0])
    assert sol.combined_variance == pytest.approx(4.2)


@settings(max_examples=50, deadline=None)
@given(v=st.lists(st.floats(1e-3, 1e3), min_size=2, max_size=6), seed=st.integers(0, 1000))
def test_permutation_equivariance(v, seed):
    v = np.array(v)
    perm = np.random.default_rng(seed).permutation(v.size)
    np.testing.assert_allclose(optimal_weights(v[perm]).weights, optimal_weights(v).weights[perm],
                               rtol=1e-9, atol=1e-12)


def test_huge_variance_estimate_is_ignored():
    base = optimal_weights([1.0, 2.0])
    ext = optimal_weights([1.0, 2.0, 1e15])
    a = combine_estimates([100.0, 103.0], base)[0]
    b = combine_estimates([100.0, 103.0, 5000.0], ext)[0]
    assert b == pytest.approx(a, abs=1e-6)
    assert np.isfinite(optimal_weights([1.0, np.inf]).weights).all()


def test_weight_grows_as_own_variance_shrinks():
    ws = [optimal_weights([v, 1.0, 2.0]).weights[0] for v in (4.0, 2.0, 1.0, 0.5)]
    assert all(a < b for a, b in itertools.pairwise(ws))


@pytest.mark.parametrize("bad", [[], [1.0, 0.0], [1.0, -2.0], [np.nan]])
def test_invalid_variances_rejected(bad):
    with pytest.raises(ParameterError):
        optimal_weights(bad)


def test_length_mismatch_rejected():
    with pytest.raises(ParameterError):
        combine_estimates([1.0, 2.0, 3.0], optimal_weights([1.0, 1.0]))
