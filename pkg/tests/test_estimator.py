import numpy as np
import pytest

from capdist import channel, estimator, examples
from capdist.channel import SdmcSpec
from capdist.errors import Infeasible, ZeroProbabilityObservation
from capdist.estimator import (EstimatorTable, build_bc_estimators,
                               build_estimator, d_min, d_trivial,
                               expected_distortion, posterior_state)


# ---------------------------------------------------------------------------
# posteriors
# ---------------------------------------------------------------------------

def test_posterior_binary_channel():
    spec = examples.binary_multiplicative_spec(0.4)
    # x=1: z = y = s, so the state is revealed
    assert np.allclose(posterior_state(spec, 1, 1), [0.0, 1.0])
    assert np.allclose(posterior_state(spec, 1, 0), [1.0, 0.0])
    # x=0: z = 0 regardless of s, posterior equals the prior
    assert np.allclose(posterior_state(spec, 0, 0), [0.6, 0.4])


def test_posterior_zero_probability_observation():
    spec = examples.binary_multiplicative_spec(0.4)
    with pytest.raises(ZeroProbabilityObservation):
        posterior_state(spec, 0, 1)      # z=1 impossible when x=0


# ---------------------------------------------------------------------------
# table construction
# ---------------------------------------------------------------------------

def test_binary_estimator_table_and_cost():
    spec = examples.binary_multiplicative_spec(0.4)
    est = build_estimator(spec)
    assert est.table[1, 0] == 0 and est.table[1, 1] == 1
    assert est.table[0, 0] == 0       # prior favors s=0 (q=0.4)
    assert np.allclose(est.cost, [0.4, 0.0])
    assert expected_distortion(est, [0.5, 0.5]) == pytest.approx(0.2)


def test_tie_breaks_to_lowest_index():
    # S uniform, feedback carries nothing: both estimates have risk 1/2
    law = np.zeros((1, 2, 1, 1))
    law[:, :, 0, 0] = 1.0
    spec = SdmcSpec(state_pmf=[0.5, 0.5], law=law,
                    distortion=np.array([[0.0, 1.0], [1.0, 0.0]]))
    est = build_estimator(spec)
    assert est.table[0, 0] == 0


def test_zero_probability_cells_map_to_index_zero():
    spec = examples.binary_multiplicative_spec(0.4)
    est = build_estimator(spec)
    assert est.table[0, 1] == 0       # (x=0, z=1) has probability zero


def test_erasure_estimator_is_exact_and_input_free():
    # the feedback determines the erasure state exactly: z = '?' iff s = 1
    spec = examples.erasure_spec(0.3)
    est = build_estimator(spec)
    for x in range(spec.input_size):
        assert est.table[x, 0] == 0
        assert est.table[x, 2] == 1
    assert np.allclose(est.cost, 0.0)


def test_quadratic_fast_path_matches_matrix_path():
    cfg = examples.GaussianQuantConfig(pam_points=4, noise_points=9,
                                       state_points=12)
    spec = examples.gaussian_quantized_spec(cfg)
    qd = spec.distortion
    dense = SdmcSpec(state_pmf=spec.state_pmf, law_y=spec.law_y,
                     law_z=spec.law_z, distortion=qd.as_matrix(),
                     cost=spec.cost)
    fast = build_estimator(spec)
    slow = build_estimator(dense)
    # tables must agree on every cell that actually occurs; cells of
    # negligible probability are distortion-irrelevant
    law_z = channel.marginal_z_given_xs(spec)
    mass = np.einsum("s,xsz->xz", spec.state_pmf, law_z)
    occurs = mass > 1e-12
    assert np.array_equal(fast.table[occurs], slow.table[occurs])
    assert np.allclose(fast.cost, slow.cost, atol=1e-12)


# ---------------------------------------------------------------------------
# d_min / d_trivial
# ---------------------------------------------------------------------------

def test_d_trivial_closed_forms():
    assert d_trivial(examples.binary_multiplicative_spec(0.4)) == pytest.approx(0.4)
    assert d_trivial(examples.erasure_spec(0.3)) == pytest.approx(0.3)


def test_d_min_unconstrained_picks_best_symbol():
    spec = examples.binary_multiplicative_spec(0.4)
    val, pmf = d_min(spec)
    assert val == pytest.approx(0.0)
    assert np.allclose(pmf, [0.0, 1.0])


def test_d_min_two_point_mix_under_budget():
    # c = (0.3, 0.1, 0.5), b = (2, 5, 0), B = 3: the best single feasible
    # symbol gives 0.3; mixing x0 with the infeasible-alone x1 at weight 1/3
    # achieves 7/30.
    est = EstimatorTable(table=np.zeros((3, 1), dtype=np.int64),
                         cost=np.array([0.3, 0.1, 0.5]))
    law = np.ones((3, 1, 1, 1))
    spec = SdmcSpec(state_pmf=[1.0], law=law, distortion=np.zeros((1, 1)),
                    cost=[2.0, 5.0, 0.0])
    val, pmf = d_min(spec, budget=3.0, est=est)
    assert val == pytest.approx(7.0 / 30.0, abs=1e-12)
    assert np.allclose(pmf, [2.0 / 3.0, 1.0 / 3.0, 0.0], atol=1e-12)
    assert pmf @ spec.cost <= 3.0 + 1e-12


def test_d_min_infeasible_budget_raises():
    spec = examples.binary_multiplicative_spec(0.4)
    tight = SdmcSpec(state_pmf=spec.state_pmf, law=spec.law,
                     distortion=spec.distortion, cost=[2.0, 3.0])
    with pytest.raises(Infeasible):
        d_min(tight, budget=1.0)


# ---------------------------------------------------------------------------
# broadcast estimators
# ---------------------------------------------------------------------------

def test_bc_estimators_corollary4_costs():
    bc = examples.binary_bc_spec(0.6, 0.5)
    e1, e2 = build_bc_estimators(bc)
    assert np.allclose(e1.cost, [min(0.6, 0.4), 0.0])   # x=0 hides S1
    assert np.allclose(e2.cost, [min(0.3, 0.7), 0.0])


def test_bc_estimators_flipped_costs():
    bc = examples.flipped_bc_spec(0.6, 0.5)
    e1, e2 = build_bc_estimators(bc)
    assert np.allclose(e1.cost, [min(0.6 * 0.5, 0.4), 0.0])
    assert np.allclose(e2.cost, [0.0, 0.6 * min(0.5, 0.5)])
