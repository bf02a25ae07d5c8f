"""
Tests for qstate module.

This module contains dense pure and mixed states, partitions and the
projected-state primitives.
"""

import numpy as np
import pytest

from src.errors import NonUnitaryGate, SizeMismatch, ZeroProbabilityOutcome
from src.qstate import (
    GATES,
    KETS,
    Bipartition,
    DensityState,
    PureState,
    apply_unitary,
    bits_to_index,
    decode_label,
    encode_label,
    entanglement_entropy,
    index_to_bits,
    measure_qubit,
    partial_trace,
    projected_state,
    reduced_purity,
    schmidt_spectrum,
    state_fidelity,
    trace_distance,
)


class TestLabels:
    """Test cases for outcome label encoding."""

    def test_decode_mixed_label(self):
        """Test that labels over the six-outcome alphabet decode to codes."""
        assert decode_label("0+1-i") == [0, 2, 1, 5]
        assert decode_label("+i-") == [4, 3]

    def test_encode_label(self):
        """Test that codes render qubit 0 first."""
        assert encode_label([5, 4, 3, 0]) == "-i+i-0"

    def test_decode_rejects_unknown_characters(self):
        """Test that characters outside the alphabet are rejected."""
        with pytest.raises(ValueError):
            decode_label("0a1")

    def test_bit_index_is_big_endian(self):
        """Test that qubit 0 is the most significant bit."""
        assert bits_to_index((1, 0, 1)) == 5
        assert bits_to_index((0, 0, 1)) == 1
        assert index_to_bits(5, 3) == (1, 0, 1)
        assert index_to_bits(1, 4) == (0, 0, 0, 1)


class TestBipartition:
    """Test cases for Bipartition."""

    def test_from_retained_keeps_order(self):
        """Test that A keeps the given order and B is the sorted complement."""
        part = Bipartition.from_retained([2, 0], 4)
        assert part.A == (2, 0)
        assert part.B == (1, 3)
        assert part.n == 4

    def test_overlap_rejected(self):
        """Test that overlapping blocks are rejected."""
        with pytest.raises(ValueError):
            Bipartition(A=(0, 1), B=(1,))

    def test_incomplete_cover_rejected(self):
        """Test that blocks must cover 0..n-1."""
        with pytest.raises(ValueError):
            Bipartition(A=(0,), B=(2,))


class TestPureState:
    """Test cases for PureState construction."""

    def test_unnormalized_vector_rejected(self):
        """Test that the constructor enforces unit norm."""
        with pytest.raises(ValueError):
            PureState(n=1, amplitudes=np.array([1.0, 1.0]))

    def test_wrong_length_rejected(self):
        """Test that the amplitude count must be 2^n."""
        with pytest.raises(SizeMismatch):
            PureState(n=2, amplitudes=np.array([1.0, 0.0]))

    def test_from_vector_normalizes(self):
        """Test that from_vector rescales raw vectors."""
        state = PureState.from_vector(np.array([3.0, 4.0]))
        assert np.allclose(state.amplitudes, [0.6, 0.8])

    def test_from_label(self):
        """Test that labels build products of Pauli eigenstates."""
        state = PureState.from_label("+-i")
        assert np.allclose(state.amplitudes, np.kron(KETS[2], KETS[5]))

    def test_amplitudes_are_read_only(self):
        """Test that stored amplitudes cannot be mutated."""
        state = PureState.zeros(2)
        with pytest.raises(ValueError):
            state.amplitudes[0] = 0.0


class TestProjectedState:
    """Test cases for projected_state."""

    def test_bell_z_outcome(self, bell):
        """Test that a Z outcome on one half of a Bell pair collapses the other."""
        part = Bipartition(A=(0,), B=(1,))
        prob, state = projected_state(bell, part, "1")
        assert prob == pytest.approx(0.5)
        assert state == PureState.basis("1")

    def test_bell_x_outcome(self, bell):
        """Test that outcome bit 1 in the X basis projects onto |->."""
        part = Bipartition(A=(0,), B=(1,))
        prob, state = projected_state(bell, part, "1", basis="X")
        assert prob == pytest.approx(0.5)
        assert state == PureState.from_label("-")

    def test_density_path_matches_pure_path(self, bell):
        """Test that density inputs give the same projected state."""
        part = Bipartition(A=(0,), B=(1,))
        prob, state = projected_state(bell.density(), part, "0")
        assert prob == pytest.approx(0.5)
        assert isinstance(state, DensityState)
        assert np.allclose(state.matrix, np.diag([1.0, 0.0]))

    def test_zero_probability_outcome(self):
        """Test that impossible outcomes raise ZeroProbabilityOutcome."""
        part = Bipartition(A=(0,), B=(1,))
        with pytest.raises(ZeroProbabilityOutcome):
            projected_state(PureState.zeros(2), part, "1")

    def test_outcome_length_checked(self, bell):
        """Test that the outcome must have one bit per B qubit."""
        part = Bipartition(A=(0,), B=(1,))
        with pytest.raises(SizeMismatch):
            projected_state(bell, part, "01")


class TestEntanglement:
    """Test cases for Schmidt spectra and reduced states."""

    def test_bell_spectrum(self, bell):
        """Test that a Bell pair has two equal Schmidt weights."""
        spectrum = schmidt_spectrum(bell, Bipartition(A=(0,), B=(1,)))
        assert np.allclose(spectrum, [0.5, 0.5])
        assert entanglement_entropy(bell, Bipartition(A=(0,), B=(1,))) == pytest.approx(1.0)

    def test_ghz_entropy(self, ghz3):
        """Test that any cut of GHZ carries one bit."""
        assert entanglement_entropy(ghz3, Bipartition.from_retained([0], 3)) == pytest.approx(1.0)
        assert entanglement_entropy(ghz3, Bipartition.from_retained([0, 2], 3)) == pytest.approx(1.0)

    def test_product_entropy_is_zero(self):
        """Test that product states have no entanglement."""
        state = PureState.from_label("+0-")
        assert entanglement_entropy(state, Bipartition.from_retained([1], 3)) == pytest.approx(0.0)

    def test_reduced_purity(self, bell):
        """Test reduced purity of half and all of a Bell pair."""
        assert reduced_purity(bell, [0]) == pytest.approx(0.5)
        assert reduced_purity(bell, [0, 1]) == pytest.approx(1.0)

    def test_partial_trace(self, bell):
        """Test that either half of a Bell pair is maximally mixed."""
        assert np.allclose(partial_trace(bell, [1]).matrix, np.eye(2) / 2)
        assert np.allclose(partial_trace(bell.density(), [0]).matrix, np.eye(2) / 2)


class TestDistances:
    """Test cases for fidelity and trace distance."""

    def test_fidelity(self):
        """Test |<0|+>|^2 = 1/2."""
        assert state_fidelity(PureState.zeros(1), PureState.from_label("+")) == pytest.approx(0.5)

    def test_pure_trace_distance(self):
        """Test the pure-state closed form sqrt(1 - F)."""
        d = trace_distance(PureState.zeros(1), PureState.from_label("+"))
        assert d == pytest.approx(np.sqrt(0.5))

    def test_mixed_trace_distance(self, bell):
        """Test the distance of a Bell pair from the maximally mixed state."""
        assert trace_distance(bell, DensityState.maximally_mixed(2)) == pytest.approx(0.75)


class TestUnitaries:
    """Test cases for gate application and measurement."""

    def test_hadamard(self):
        """Test that H maps |0> to |+>."""
        assert apply_unitary(PureState.zeros(1), GATES["H"], [0]) == PureState.from_label("+")

    def test_cnot_makes_bell(self, bell):
        """Test that CX with control 0 entangles |+0>."""
        out = apply_unitary(PureState.from_label("+0"), GATES["CX"], [0, 1])
        assert out == bell

    def test_density_evolution_matches_pure(self, bell):
        """Test that density matrices evolve like their pure counterparts."""
        out = apply_unitary(PureState.from_label("+0").density(), GATES["CX"], [0, 1])
        assert np.allclose(out.matrix, bell.density().matrix)

    def test_non_unitary_rejected(self):
        """Test that non-unitary matrices raise NonUnitaryGate."""
        with pytest.raises(NonUnitaryGate):
            apply_unitary(PureState.zeros(1), np.array([[1.0, 1.0], [0.0, 1.0]]), [0])

    def test_measure_deterministic_outcome(self, rng):
        """Test that measuring |0> in Z always gives 0."""
        label, post = measure_qubit(PureState.zeros(2), 0, "Z", rng)
        assert label == "0"
        assert post == PureState.zeros(2)

    def test_measure_bell_correlates(self, bell, rng):
        """Test that measuring one Bell qubit collapses both."""
        label, post = measure_qubit(bell, 0, "Z", rng)
        assert post == PureState.basis(label * 2)
