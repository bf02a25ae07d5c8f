"""
Tests for spectral module.

This module contains conditional-fidelity observables and truncated gaps.
"""

import numpy as np
import pytest

from src.errors import InvalidArgument, TooLarge
from src.models import haar_state
from src.qstate import DensityState, PureState, product_state
from src.spectral import (
    averaged_truncated_gaps,
    build_observable,
    fidelity_observable_expectation,
    sample_basis_strings,
    spectral_gap,
    truncated_gaps,
)


def haar_generator(n, rng):
    return haar_state(n, rng)


class TestObservable:
    """Test cases for build_observable."""

    def test_target_expectation_is_one(self, rng):
        """Test that every projected target has unit overlap with itself."""
        psi = haar_state(4, rng)
        O = build_observable(psi, 1, "all")
        assert O.complete
        assert len(O.blocks) == 27
        assert fidelity_observable_expectation(O, psi) == pytest.approx(1.0)

    def test_matrix_is_positive_semidefinite(self, rng):
        """Test that omitting dead branches keeps O positive."""
        psi = haar_state(3, rng)
        mat = build_observable(psi, 1, "all").matrix()
        assert np.allclose(mat, mat.conj().T)
        assert np.linalg.eigvalsh(mat)[0] > -1e-10

    def test_dead_branches_counted(self):
        """Test dead-branch bookkeeping for a product target."""
        psi = PureState.zeros(3)
        assert build_observable(psi, 1, "all").dead_branches == 11

    def test_density_expectation(self, rng):
        """Test that density inputs use tr(O rho)."""
        psi = haar_state(3, rng)
        O = build_observable(psi, 1, "all")
        assert fidelity_observable_expectation(O, psi.density()) == pytest.approx(1.0)
        mixed = fidelity_observable_expectation(O, DensityState.maximally_mixed(3))
        assert mixed == pytest.approx(np.trace(O.matrix()).real / 8)

    def test_size_ceiling(self):
        """Test that operators above 12 qubits are refused."""
        with pytest.raises(TooLarge):
            build_observable(PureState.zeros(13), 1, [(0,) * 12])

    def test_complete_observable_ceiling(self):
        """Test that the untruncated observable needs |B| <= 8."""
        with pytest.raises(TooLarge):
            build_observable(PureState.zeros(10), 1, "all")

    def test_explicit_bases_needed(self):
        """Test that an empty basis list is rejected."""
        with pytest.raises(InvalidArgument):
            build_observable(PureState.zeros(3), 1, [])


class TestSpectralGap:
    """Test cases for spectral_gap."""

    def test_product_target_has_no_gap(self, rng):
        """Test that a product target with no dead branches has zero gap."""
        psi = product_state([haar_state(1, rng).amplitudes for _ in range(4)])
        assert spectral_gap(build_observable(psi, 1, "all"), psi) <= 1e-10

    def test_haar_target_has_positive_gap(self, rng):
        """Test that a generic target has a positive gap."""
        psi = haar_state(4, rng)
        gap = spectral_gap(build_observable(psi, 1, "all"), psi)
        assert 0.0 < gap <= 1.0

    def test_truncated_gaps_grow_to_complete(self, rng):
        """Test that truncating to all basis strings recovers the full gap."""
        psi = haar_state(3, rng)
        bases = [(a, b) for a in range(3) for b in range(3)]
        gaps = truncated_gaps(psi, 1, bases)
        assert gaps.shape == (9,)
        full = spectral_gap(build_observable(psi, 1, "all"), psi)
        assert gaps[-1] == pytest.approx(full)


class TestGapScan:
    """Test cases for basis sampling and averaged truncated gaps."""

    def test_bases_drawn_without_replacement(self, rng):
        """Test that sampled basis strings are distinct."""
        bases = sample_basis_strings(3, 27, rng)
        assert len(set(bases)) == 27

    def test_too_many_bases(self, rng):
        """Test that more strings than exist are refused."""
        with pytest.raises(InvalidArgument):
            sample_basis_strings(2, 10, rng)

    def test_table_rows(self):
        """Test the CSV row layout of a small scan."""
        table = averaged_truncated_gaps([3, 4], 1, 2, 3, seed=5, generator=haar_generator)
        assert table.gaps.shape == (2, 2, 3)
        rows = table.rows()
        assert len(rows) == 12
        assert rows[0][:4] == (3, 1, 0, 1)
        assert len(table.trend()) == 2

    def test_scan_independent_of_workers(self):
        """Test that the scan depends only on the seed."""
        one = averaged_truncated_gaps([3], 1, 3, 4, seed=9, generator=haar_generator, workers=1)
        many = averaged_truncated_gaps([3], 1, 3, 4, seed=9, generator=haar_generator, workers=3)
        assert np.array_equal(one.gaps, many.gaps)

    def test_size_ceiling(self):
        """Test that scans stop at ten qubits."""
        with pytest.raises(TooLarge):
            averaged_truncated_gaps([11], 1, 1, 1, seed=0)
