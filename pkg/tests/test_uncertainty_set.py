# tests/test_uncertainty_set.py
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from src.solvers.highs_backend import HighsBackend
from src.uncertainty.dynamic_set import (DynamicUncertaintySet, condition_on_history, conditioned_total_range,
                                         latent_from_available, set_extrema, vector_norm)
from src.uncertainty.sampling import sample_members
from src.utils.exceptions import UncertaintySetError
from tests import factories, oracles


def test_vector_norms():
    v = np.array([3.0, -4.0])
    assert vector_norm(v, "l1") == 7.0
    assert vector_norm(v, "l2") == 5.0
    assert vector_norm(v, "linf") == 4.0
    assert vector_norm(v, "l1_linf") == pytest.approx(max(7.0 / math.sqrt(2), 4.0))
    with pytest.raises(UncertaintySetError):
        vector_norm(v, "l3")


def test_box_set_maximum():
    uset = factories.box_set([[10.0]], 2.0, 20.0, gamma=1.0)
    best, path = uset.maximize_linear(np.array([[1.0]]))
    assert best == pytest.approx(12.0)
    assert path.available[0, 0] == pytest.approx(12.0)
    worst, _ = uset.maximize_linear(np.array([[-1.0]]))
    assert worst == pytest.approx(-8.0)


def test_bounds_clip_the_set():
    uset = factories.box_set([[1.0]], 10.0, 2.0, gamma=1.0)
    assert uset.maximize_linear(np.array([[1.0]]))[0] == pytest.approx(2.0)
    assert uset.maximize_linear(np.array([[-1.0]]))[0] == pytest.approx(0.0)


@given(weights=arrays(np.float64, (2, 2), elements=st.floats(-3, 3, allow_nan=False)),
       norm=st.sampled_from(["l1", "linf", "l1_linf"]))
@settings(max_examples=20, deadline=None)
def test_lp_maximum_matches_vertex_enumeration(weights, norm):
    uset = factories.lagged_set(n_units=2, horizon=2, a=0.5, norm=norm)
    value, _ = uset.maximize_linear(weights)
    assert value == pytest.approx(oracles.brute_force_max(uset, weights), abs=1e-6)


def test_lags_carry_initial_state():
    uset = factories.lagged_set(n_units=1, horizon=2, a=0.5, norm="linf", initial_lags=[[2.0]])
    forecast = uset.forecast_path()
    np.testing.assert_allclose(forecast.u[0], [1.0, 0.5])
    np.testing.assert_allclose(forecast.available[0], [22.0, 21.0])
    assert uset.contains(forecast.available)
    assert not uset.contains(forecast.available + 10.0)


def test_total_budget_binds():
    tight = factories.lagged_set(n_units=1, horizon=4, a=0.0, norm="linf", rho=0.25)
    loose = factories.lagged_set(n_units=1, horizon=4, a=0.0, norm="linf", rho=1.0)
    ones = np.ones((1, 4))
    # rho * gamma * T = 1 unit of deviation in total versus 4
    assert tight.maximize_linear(ones)[0] == pytest.approx(80.0 + 2.0)
    assert loose.maximize_linear(ones)[0] == pytest.approx(80.0 + 8.0)


def test_l2_norm_has_no_lp_oracle():
    uset = factories.box_set([[10.0]], 2.0, 20.0, norm="l2")
    assert not uset.is_polyhedral
    with pytest.raises(UncertaintySetError):
        uset.maximize_linear(np.array([[1.0]]))


def test_invalid_parameters_rejected():
    with pytest.raises(UncertaintySetError):
        factories.lagged_set(rho=0.0)
    with pytest.raises(UncertaintySetError):
        factories.lagged_set(gamma=-1.0)
    with pytest.raises(UncertaintySetError):
        factories.box_set([[10.0]], -1.0, 20.0)


def test_extrema_of_a_box():
    uset = factories.box_set([[10.0, 12.0], [5.0, 5.0]], [[2.0, 2.0], [1.0, 1.0]], 50.0, gamma=1.0)
    ext = set_extrema(uset, HighsBackend())
    np.testing.assert_allclose(ext.total_max, [18.0, 20.0])
    np.testing.assert_allclose(ext.total_min, [12.0, 14.0])
    np.testing.assert_allclose(ext.unit_max, [[12.0, 14.0], [6.0, 6.0]])
    np.testing.assert_allclose(ext.delta_max, [20.0 - 12.0])
    np.testing.assert_allclose(ext.delta_min, [14.0 - 18.0])
    assert ext.lp_count == 2 * 2 + 2 + 2 * 4


def test_extrema_grow_with_gamma():
    base = factories.lagged_set(n_units=2, horizon=3, rho=0.5)
    small = set_extrema(base.with_gamma(0.5), include_units=False)
    large = set_extrema(base.with_gamma(1.5), include_units=False)
    assert np.all(large.total_max >= small.total_max - 1e-9)
    assert np.all(large.total_min <= small.total_min + 1e-9)


def test_zero_gamma_collapses_to_forecast():
    uset = factories.lagged_set(n_units=2, horizon=3, gamma=0.0, initial_lags=[[1.0, -1.0]])
    ext = set_extrema(uset)
    forecast = uset.forecast_path().total
    np.testing.assert_allclose(ext.total_min, forecast, atol=1e-7)
    np.testing.assert_allclose(ext.total_max, forecast, atol=1e-7)
    assert uset.is_degenerate


def test_conditioning_fixes_the_lags():
    uset = DynamicUncertaintySet(f=[[10.0, 10.0]], g=[[1.0, 1.0]], A=[[[0.5]]], B=[[1.0]], gamma=1.0, rho=1.0,
                                 p_max=[[100.0, 100.0]], norm="linf")
    realized = np.array([[12.0]])  # u_0 = 2
    cond = condition_on_history(uset, realized)
    assert cond.horizon == 1
    np.testing.assert_allclose(cond.initial_lags, [[2.0]])
    lo, hi = conditioned_total_range(uset, realized)
    assert (lo, hi) == (pytest.approx(10.0), pytest.approx(12.0))


def test_conditioning_without_lags_is_the_next_slice():
    uset = factories.box_set([[10.0, 20.0]], 2.0, 50.0, gamma=1.0)
    cond = condition_on_history(uset, np.array([[11.0]]))
    np.testing.assert_allclose(cond.f, uset.slice_period(1).f)
    assert conditioned_total_range(uset, np.array([[11.0]])) == (pytest.approx(18.0), pytest.approx(22.0))


def test_remaining_budget_mode_caps_by_spent_budget():
    uset = factories.lagged_set(n_units=1, horizon=2, a=0.0, norm="linf", rho=0.5)
    # total budget 1; period 0 spends the whole of it
    lo, hi = conditioned_total_range(uset, np.array([[22.0]]), budget_mode="remaining")
    assert (lo, hi) == (pytest.approx(20.0), pytest.approx(20.0))
    lo, hi = conditioned_total_range(uset, np.array([[22.0]]), budget_mode="per_period")
    assert (lo, hi) == (pytest.approx(18.0), pytest.approx(22.0))
    with pytest.raises(UncertaintySetError):
        condition_on_history(uset, np.array([[22.0]]), budget_mode="all")


def test_inconsistent_history_raises():
    uset = factories.box_set([[10.0, 10.0]], [[0.0, 1.0]], 50.0, gamma=1.0)
    with pytest.raises(UncertaintySetError):
        latent_from_available(uset, np.array([[11.0]]))


def test_conditioning_past_the_horizon_raises():
    uset = factories.box_set([[10.0, 10.0]], 1.0, 50.0)
    with pytest.raises(IndexError):
        condition_on_history(uset, np.full((1, 2), 10.0))


def test_sampled_members_are_in_the_set():
    uset = factories.lagged_set(n_units=2, horizon=3, rho=0.5)
    for sample in sample_members(uset, 5, np.random.default_rng(3), n_vertices=6):
        assert uset.contains(sample)


def test_dict_round_trip():
    uset = factories.lagged_set(n_units=2, horizon=2, initial_lags=[[0.5, -0.5]])
    again = DynamicUncertaintySet.from_dict(uset.to_dict())
    np.testing.assert_allclose(again.A, uset.A)
    np.testing.assert_allclose(again.initial_lags, uset.initial_lags)
    assert again.maximize_linear(np.ones((2, 2)))[0] == pytest.approx(uset.maximize_linear(np.ones((2, 2)))[0])
