"""
Tests for estimator module.

This module contains shadow estimates, median-of-means and sample-size
formulas.
"""

import math

import numpy as np
import pytest

from src.errors import InvalidArgument, LengthMismatch, SizeMismatch, ZeroGap
from src.estimator import (
    MoMParameters,
    empirical_sample_size,
    exact_conditional_fidelity,
    fidelity_sample_size,
    median_of_means,
    mom_parameters,
    protocol_sample_size,
    shadow_fidelity_estimate,
    shadow_table,
    variance_bound,
    witness_mom_parameters,
)
from src.freeset import SeparableOracle
from src.models import haar_state
from src.qstate import Bipartition, DensityState, PureState


class TestShadowEstimates:
    """Test cases for single-copy shadow estimates."""

    @pytest.mark.parametrize("label,expected", [("0", 2.0), ("1", -1.0), ("+", 0.5), ("-i", 0.5)])
    def test_single_qubit_values(self, label, expected):
        """Test 3|<x|0>|^2 - 1 for each outcome."""
        assert shadow_fidelity_estimate(PureState.zeros(1), label) == pytest.approx(expected)

    def test_estimate_is_unbiased_on_average(self, rng):
        """Test that averaging over bases and outcomes recovers fidelity 1."""
        psi = haar_state(2, rng)
        total = 0.0
        for b0 in range(3):
            for b1 in range(3):
                for s0 in range(2):
                    for s1 in range(2):
                        x = [2 * b0 + s0, 2 * b1 + s1]
                        ket = np.kron(
                            np.eye(2)[s0] if b0 == 0 else _ket(b0, s0),
                            np.eye(2)[s1] if b1 == 0 else _ket(b1, s1),
                        )
                        prob = abs(np.vdot(ket, psi.amplitudes)) ** 2
                        total += prob * shadow_fidelity_estimate(psi, x) / 9
        assert total == pytest.approx(1.0)

    def test_table_matches_pointwise_estimates(self, rng):
        """Test that the table is indexed by big-endian base-6 codes."""
        psi = haar_state(2, rng)
        table = shadow_table(psi.amplitudes, 2)
        assert table.shape == (36,)
        for codes in ([0, 0], [1, 4], [5, 2], [3, 3]):
            index = codes[0] * 6 + codes[1]
            assert table[index] == pytest.approx(shadow_fidelity_estimate(psi, codes))

    def test_zero_vector_gives_zero_table(self):
        """Test that dead branches score zero."""
        assert not shadow_table(np.zeros(4, dtype=complex), 2).any()

    def test_outcome_length_checked(self):
        """Test that the outcome must cover every qubit."""
        with pytest.raises(SizeMismatch):
            shadow_fidelity_estimate(PureState.zeros(2), "0")


def _ket(basis, bit):
    s = 1 / np.sqrt(2)
    phase = 1 if basis == 1 else 1j
    return np.array([s, (1 - 2 * bit) * phase * s])


class TestMedianOfMeans:
    """Test cases for median_of_means."""

    def test_odd_block_count(self):
        """Test that an outlier block does not move the median."""
        params = MoMParameters(B=2, K=3)
        assert median_of_means([1, 2, 3, 100, 5, 6], params) == pytest.approx(5.5)

    def test_even_block_count_takes_lower_middle(self):
        """Test that even K uses order statistic ceil(K/2)."""
        params = MoMParameters(B=2, K=2)
        assert median_of_means([1, 1, 3, 3], params) == pytest.approx(1.0)

    def test_length_checked(self):
        """Test that the sample count must equal B * K."""
        with pytest.raises(LengthMismatch):
            median_of_means([1.0, 2.0, 3.0], MoMParameters(B=2, K=2))


class TestSampleSizes:
    """Test cases for block layouts and sample-size formulas."""

    def test_mom_parameters(self):
        """Test B = ceil(6 sigma^2 / eps^2) and K = ceil(4.5 ln(1/delta))."""
        params = mom_parameters(5.0, 0.5, 0.05)
        assert params.B == 120
        assert params.K == 14
        assert params.T == 1680

    def test_exact_ceiling_not_bumped(self):
        """Test that float noise does not push an integer argument up."""
        assert mom_parameters(1.0, math.sqrt(6.0), 0.5).B == 1

    @pytest.mark.parametrize("sigma2,eps,delta", [(0.0, 0.1, 0.1), (1.0, 0.0, 0.1), (1.0, 0.1, 1.0)])
    def test_invalid_inputs(self, sigma2, eps, delta):
        """Test that non-positive variances, accuracies and bad deltas are rejected."""
        with pytest.raises(InvalidArgument):
            mom_parameters(sigma2, eps, delta)

    def test_variance_bound(self):
        """Test the worst-case variance 4^n_A + 1."""
        assert variance_bound(1) == 5.0
        assert variance_bound(3) == 65.0

    def test_protocol_sample_size(self):
        """Test the closed form for the LQ/3 threshold."""
        expected = math.ceil(243 * math.log(20) * 17 / 0.25)
        assert protocol_sample_size(0.5, 0.05, 2) == expected

    def test_protocol_sample_size_zero_gap(self):
        """Test that a vanishing LQ raises ZeroGap."""
        with pytest.raises(ZeroGap):
            protocol_sample_size(0.0, 0.05, 2)

    def test_fidelity_sample_size(self):
        """Test the fidelity-certification closed form."""
        expected = math.ceil(27 * math.log(20) * 5 / (0.25 * 0.4 * 0.5) ** 2)
        assert fidelity_sample_size(0.4, 0.5, 0.25, 0.05, 1) == expected

    def test_witness_parameters_default_variance(self):
        """Test that witness layouts resolve the gap at accuracy gap/3."""
        assert witness_mom_parameters(0.3, 0.05, 1) == mom_parameters(5.0, 0.1, 0.05)
        assert witness_mom_parameters(0.3, 0.05, 1, sigma2=2.0) == mom_parameters(2.0, 0.1, 0.05)

    def test_empirical_sample_size_constant_values(self):
        """Test that zero spread needs only one value per block."""
        assert empirical_sample_size(np.ones(10), 0.1, 0.05) == 14


class TestExactConditionalFidelity:
    """Test cases for exact_conditional_fidelity."""

    def test_target_input_equals_lq(self, bell3):
        """Test that eta of the target itself is its LQ."""
        part = Bipartition.from_retained([0, 1], 3)
        value = exact_conditional_fidelity(bell3, bell3, part, SeparableOracle([0], 2))
        assert value == pytest.approx(0.5)

    def test_product_input_is_not_positive(self, bell3):
        """Test that a product input scores zero against the Bell target."""
        part = Bipartition.from_retained([0, 1], 3)
        value = exact_conditional_fidelity(PureState.zeros(3), bell3, part, SeparableOracle([0], 2))
        assert value == pytest.approx(0.0, abs=1e-12)

    def test_density_matches_pure(self, ghz3):
        """Test that pure and density inputs agree."""
        part = Bipartition.from_retained([0, 1], 3)
        oracle = SeparableOracle([0], 2)
        pure = exact_conditional_fidelity(ghz3, ghz3, part, oracle, "random")
        mixed = exact_conditional_fidelity(ghz3.density(), ghz3, part, oracle, "random")
        assert pure == pytest.approx(mixed)
        assert pure == pytest.approx(1 / 3)

    def test_no_oracle_gives_overlap(self, bell3):
        """Test that without offsets the value is the conditional overlap."""
        part = Bipartition.from_retained([0, 1], 3)
        mixed = DensityState.maximally_mixed(3)
        value = exact_conditional_fidelity(mixed, bell3, part, None)
        assert value == pytest.approx(0.5 * 0.25)
