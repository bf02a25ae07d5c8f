"""
Tests for protocol module.

This module contains state preparation, round simulation and the
certification engines.
"""

import math

import numpy as np
import pytest

from src.errors import GeometryInvalid, InvalidArgument, ZeroGap
from src.estimator import exact_conditional_fidelity, mom_parameters, protocol_sample_size, variance_bound
from src.freeset import SeparableOracle, StabilizerOracle
from src.models import (
    DepolarizedMixture,
    LatticeGeometry,
    cluster_state,
    depolarize,
    haar_state,
    magic_injection_state,
)
from src.protocol import (
    PauliSampler,
    ProtocolRunner,
    TargetScorer,
    TrialEngine,
    analytic_eta_depolarized,
    build_oracle,
    depolarizing_crossover,
    eta_curve,
    evaluate_threshold_witness,
    formula_sample_size,
    input_trace_distance,
    pair_estimates,
    prepare_input,
    prepare_state,
    run_complexity_cert,
    run_fidelity_cert,
    run_fully_inseparable,
    run_protocol1,
)
from src.qstate import Bipartition, DensityState, PureState
from src.types import (
    BellSpec,
    CertificationConfig,
    InputSpec,
    NoiseSpec,
    OracleSpec,
    OrthogonalSpec,
    ProductSpec,
    TensorSpec,
)

BELL_PART = Bipartition.from_retained([0, 1], 3)
CHAIN = LatticeGeometry.build((6,), 1, 1)


@pytest.fixture
def bell_chain(bell):
    """|00> (x) Bell (x) |00>, entangled exactly across the retained block of CHAIN."""
    return PureState.zeros(2).kron(bell).kron(PureState.zeros(2))


class TestPreparation:
    """Test cases for state and oracle preparation."""

    def test_tensor_family(self, rng, bell):
        """Test that tensor factors are stacked in order."""
        spec = TensorSpec(factors=[BellSpec(), ProductSpec(label="1")])
        assert prepare_state(spec, rng) == bell.kron(PureState.basis("1"))

    def test_orthogonal_needs_target(self, rng):
        """Test that the orthogonal family is only defined relative to a target."""
        with pytest.raises(InvalidArgument):
            prepare_state(OrthogonalSpec(), rng)

    def test_input_defaults_to_target(self, rng, bell3):
        """Test that an empty input spec reuses the target."""
        assert prepare_input(InputSpec(), bell3, rng) is bell3

    def test_noisy_input_is_dense(self, rng, bell3):
        """Test that small noisy inputs become density matrices."""
        rho = prepare_input(InputSpec(noise=NoiseSpec(p=0.2)), bell3, rng)
        assert isinstance(rho, DensityState)
        assert input_trace_distance(bell3, rho) == pytest.approx(0.2 * (1 - 1 / 8))

    def test_input_size_checked(self, rng, bell3):
        """Test that the input must have as many qubits as the target."""
        with pytest.raises(InvalidArgument):
            prepare_input(InputSpec(state=ProductSpec(label="00")), bell3, rng)

    def test_mixture_trace_distance(self):
        """Test the closed-form distance of a large two-branch mixture."""
        psi = PureState.zeros(11)
        rho = DepolarizedMixture(psi=psi, p=0.4)
        assert input_trace_distance(psi, rho) == pytest.approx(0.4 * (1 - 2.0**-11))

    def test_build_oracle(self):
        """Test default cuts and the stabilizer choice."""
        assert build_oracle(OracleSpec(), 4).describe()["left"] == [0, 1]
        assert isinstance(build_oracle(OracleSpec(kind="stabilizer"), 2), StabilizerOracle)


class TestTrialEngine:
    """Test cases for PauliSampler, TargetScorer and TrialEngine."""

    def test_z_measurement_of_zeros(self, rng):
        """Test that |000> always returns zero bits in the Z basis."""
        bits = PauliSampler(PureState.zeros(3)).sample(np.zeros((50, 3), dtype=np.int64), rng)
        assert bits.shape == (50, 3)
        assert not bits.any()

    def test_log_independent_of_workers(self, bell3):
        """Test that chunked simulation gives the same log for any worker count."""
        scorer = TargetScorer(bell3, BELL_PART, offset_oracle=SeparableOracle([0], 2))
        one = TrialEngine(bell3, BELL_PART, scorer, seed=3, workers=1).run(9000)
        many = TrialEngine(bell3, BELL_PART, scorer, seed=3, workers=3).run(9000)
        assert np.array_equal(one.bases, many.bases)
        assert np.array_equal(one.bits, many.bits)
        assert np.array_equal(one.estimates, many.estimates)

    def test_streams_differ(self, bell3):
        """Test that distinct streams draw distinct rounds."""
        first = TrialEngine(bell3, BELL_PART, None, seed=3, stream=0).run(200)
        second = TrialEngine(bell3, BELL_PART, None, seed=3, stream=1).run(200)
        assert not np.array_equal(first.bases, second.bases)

    def test_fixed_basis_on_b(self, bell3):
        """Test that B is always measured in Z and A in random bases."""
        log = TrialEngine(bell3, BELL_PART, None, seed=1).run(500)
        assert not log.bases[:, 2].any()
        assert set(np.unique(log.bases[:, :2])) == {0, 1, 2}

    def test_at_least_one_round(self, bell3):
        """Test that T = 0 is rejected."""
        with pytest.raises(InvalidArgument):
            TrialEngine(bell3, BELL_PART, None).run(0)

    def test_partition_size_checked(self, bell):
        """Test that the partition must cover the input."""
        with pytest.raises(InvalidArgument):
            TrialEngine(bell, BELL_PART, None)

    def test_scores_average_to_conditional_fidelity(self, bell3):
        """Test that mean shadow scores approach the exact conditional fidelity."""
        scorer = TargetScorer(bell3, BELL_PART)
        log = TrialEngine(bell3, BELL_PART, scorer, seed=11).run(20000)
        se = log.estimates.std(ddof=1) / math.sqrt(len(log))
        exact = exact_conditional_fidelity(bell3, bell3, BELL_PART, None)
        assert abs(log.estimates.mean() - exact) < 5 * se

    def test_records(self, bell3):
        """Test the fields of one serialized round."""
        scorer = TargetScorer(bell3, BELL_PART, offset_oracle=SeparableOracle([0], 2))
        log = TrialEngine(bell3, BELL_PART, scorer, seed=2).run(10)
        records = log.records(BELL_PART)
        assert len(records) == 10
        first = records[0]
        assert first["index"] == 0
        assert first["basis"] == "Z"
        assert first["outcome"] == "0"
        assert first["offset"] == pytest.approx(0.5)
        assert "pair" not in first

    def test_weight_oracle_needs_threshold(self, bell3):
        """Test that weighted scoring needs t."""
        with pytest.raises(InvalidArgument):
            TargetScorer(bell3, BELL_PART, weight_oracle=SeparableOracle([0], 2))


class TestCertify:
    """Test cases for shadow certification against LQ."""

    def test_sample_size_formula(self):
        """Test T = ceil(27 ln(1/delta) sigma^2 / eps^2)."""
        assert formula_sample_size(17.0, 0.5 / 3, 0.05) == math.ceil(27 * math.log(20) * 17 * 36)

    def test_target_accepted(self, bell3):
        """Test that the target itself passes with a layout of 14 blocks."""
        run = ProtocolRunner().certify(bell3, bell3, BELL_PART, SeparableOracle([0], 2), samples=28000, seed=1)
        report = run.report
        assert report.verdict == "accept"
        assert report.threshold == pytest.approx(0.5 / 3)
        assert report.gap == pytest.approx(0.5)
        assert report.block_count == 14
        assert report.T == report.block_size * report.block_count == 28000
        assert report.sample_size_rule == "override"
        assert report.T_formula == protocol_sample_size(0.5, 0.05, 2)
        assert report.T_formula == formula_sample_size(variance_bound(2), 0.5 / 3, 0.05)
        assert report.robustness_radius == pytest.approx(0.5 / 6)
        assert report.input_trace_distance == pytest.approx(0.0, abs=1e-6)
        assert len(run.records()) == report.T

    def test_product_input_rejected(self, bell3):
        """Test that a product input fails the Bell target."""
        report = ProtocolRunner().certify(
            bell3, PureState.zeros(3), BELL_PART, SeparableOracle([0], 2), samples=28000, seed=1
        ).report
        assert report.verdict == "reject"
        assert report.estimate < report.threshold

    def test_zero_gap(self, ghz3):
        """Test that a Z-measured GHZ state has nothing to certify."""
        with pytest.raises(ZeroGap):
            ProtocolRunner().certify(ghz3, ghz3, BELL_PART, SeparableOracle([0], 2))

    def test_explicit_threshold_range(self, bell3):
        """Test that eta_star must lie strictly inside (0, LQ)."""
        with pytest.raises(InvalidArgument):
            ProtocolRunner().certify(bell3, bell3, BELL_PART, SeparableOracle([0], 2), eta_star=0.6)

    def test_explicit_threshold_margin(self, bell3):
        """Test that an explicit threshold uses the smaller side as accuracy."""
        report = ProtocolRunner().certify(
            bell3, bell3, BELL_PART, SeparableOracle([0], 2), eta_star=0.1, samples=1400
        ).report
        assert report.threshold == 0.1
        assert report.robustness_radius == pytest.approx(0.05)
        assert report.T_formula == formula_sample_size(variance_bound(2), 0.1, 0.05)

    def test_override_below_block_count(self, bell3):
        """Test that a trial override smaller than K is refused."""
        with pytest.raises(InvalidArgument):
            ProtocolRunner().certify(bell3, bell3, BELL_PART, SeparableOracle([0], 2), samples=10)

    def test_empirical_rule(self, bell3):
        """Test that the empirical rule sizes blocks from a pilot batch."""
        report = ProtocolRunner().certify(
            bell3, bell3, BELL_PART, SeparableOracle([0], 2), sample_size_rule="empirical", pilot=200
        ).report
        assert report.sample_size_rule == "empirical"
        assert report.block_count == 14
        assert report.T <= mom_parameters(variance_bound(2), 0.5 / 3, 0.05).T

    def test_config_run_is_reproducible(self):
        """Test that one config and stream give one report."""
        cfg = CertificationConfig(
            target=BellSpec(extra_zeros=1), retained=[0, 1], oracle=OracleSpec(left=[0]), samples=2800, seed=5
        )
        first, second = run_protocol1(cfg), run_protocol1(cfg, workers=2)
        assert first.estimate == second.estimate
        assert first.gap == pytest.approx(0.5)
        assert first.seed == 5

    def test_sampled_gap_provenance(self):
        """Test that gap_samples switches to a sampled LQ."""
        cfg = CertificationConfig(
            target=BellSpec(extra_zeros=1), retained=[0, 1], samples=1400, gap_samples=50
        )
        report = run_protocol1(cfg)
        assert report.gap_provenance == "sampled"
        assert report.gap == pytest.approx(0.5)


class TestFullyInseparable:
    """Test cases for run_fully_inseparable."""

    def test_pairs_share_one_dataset(self):
        """Test per-pair layouts and records over a shared budget."""
        psi = cluster_state(4)
        result = run_fully_inseparable(psi, psi, budget=2000, seed=4)
        assert [p.pair for p in result.pairs] == [(0, 1), (1, 2), (2, 3)]
        assert result.delta_per_pair == pytest.approx(0.05 / 3)
        assert len(result.log) == 2000
        for p in result.pairs:
            assert p.le > 0
            assert p.params.T <= 2000
            assert p.threshold == pytest.approx(p.le / 3)
            assert p.le_provenance == "exact"
        records = result.records()
        assert len(records) == sum(p.params.T for p in result.pairs)
        assert records[0]["pair"] == [0, 1]
        assert records[-1]["pair"] == [2, 3]

    def test_pair_estimates_match_results(self):
        """Test that pair estimates are recomputable from the shared log."""
        psi = cluster_state(4)
        result = run_fully_inseparable(psi, psi, pairs=[(1, 2)], budget=500, seed=4)
        pair = result.pairs[0]
        again = pair_estimates(psi, result.log, (1, 2), pair.params.T)
        assert np.array_equal(again, pair.estimates)
        summary = result.summary()
        assert summary["pairs"][0]["pair"] == [1, 2]
        assert summary["verdict"] == result.verdict

    def test_zero_gap_names_pair(self):
        """Test that a product target fails on its first pair."""
        psi = PureState.zeros(4)
        with pytest.raises(ZeroGap) as info:
            run_fully_inseparable(psi, psi, budget=100)
        assert info.value.pair == (0, 1)

    def test_budget_below_block_count(self):
        """Test that the budget must cover one round per block."""
        psi = cluster_state(4)
        with pytest.raises(InvalidArgument):
            run_fully_inseparable(psi, psi, budget=5)

    def test_large_complement_uses_sampled_le(self):
        """Test that a pair with nine complement qubits falls back to a sampled LE."""
        psi = cluster_state(11)
        result = run_fully_inseparable(psi, psi, pairs=[(0, 1)], budget=400, seed=2)
        pair = result.pairs[0]
        assert pair.le_provenance == "sampled"
        assert pair.le > 0
        assert pair.le_stderr > 0
        assert len(result.log) == 400
        assert result.summary()["pairs"][0]["le_provenance"] == "sampled"

    def test_gap_samples_force_sampling(self):
        """Test that gap_samples samples the LE even when it could be enumerated."""
        psi = cluster_state(4)
        first = run_fully_inseparable(psi, psi, pairs=[(1, 2)], budget=200, seed=4, gap_samples=100)
        second = run_fully_inseparable(psi, psi, pairs=[(1, 2)], budget=200, seed=4, gap_samples=100)
        assert first.pairs[0].le_provenance == "sampled"
        assert first.pairs[0].le == second.pairs[0].le


class TestFidelityCert:
    """Test cases for run_fidelity_cert."""

    def test_supplied_gap(self, rng):
        """Test thresholds and radius from a supplied gap."""
        psi = haar_state(3, rng)
        report = run_fidelity_cert(psi, psi, 1, gap=0.8, samples=14000, seed=2).report
        assert report.gap_provenance == "supplied"
        assert report.gap_kind == "Delta"
        assert report.threshold == pytest.approx(1 - 0.75 * 0.8 * 0.5)
        assert report.robustness_radius == pytest.approx(0.25 * 0.8 * 0.5)
        assert report.block_size == 1000
        assert report.verdict == "accept"

    def test_measured_gap(self, rng):
        """Test that the gap is measured when not supplied."""
        psi = haar_state(3, rng)
        run = run_fidelity_cert(psi, psi, 1, samples=140)
        assert run.report.gap_provenance == "exact"
        assert 0 < run.report.gap <= 1
        assert run.part.A == (0,)

    def test_override_below_block_count(self, rng):
        """Test that fewer trials than blocks are refused."""
        psi = haar_state(3, rng)
        with pytest.raises(InvalidArgument):
            run_fidelity_cert(psi, psi, 1, gap=0.8, samples=5)

    def test_zero_gap(self, rng):
        """Test that a vanishing gap is refused."""
        psi = haar_state(3, rng)
        with pytest.raises(ZeroGap):
            run_fidelity_cert(psi, psi, 1, gap=0.0)

    @pytest.mark.parametrize("c,F", [(0.5, 0.5), (0.25, 1.0)])
    def test_parameter_ranges(self, rng, c, F):
        """Test that c < 1/2 and 0 < F < 1 are enforced."""
        psi = haar_state(3, rng)
        with pytest.raises(InvalidArgument):
            run_fidelity_cert(psi, psi, 1, gap=0.5, F=F, c=c)


class TestComplexityCert:
    """Test cases for run_complexity_cert and the thresholded witness."""

    def test_sound_regime_enforced(self, bell_chain):
        """Test that w/d <= 4 needs the toy flag."""
        with pytest.raises(GeometryInvalid):
            run_complexity_cert(bell_chain, bell_chain, CHAIN)

    def test_unitary_toy_accepts_target(self, bell_chain):
        """Test a zero-cap toy run on a chain with one Bell pair in A."""
        report = run_complexity_cert(
            bell_chain, bell_chain, CHAIN, unsound_toy=True, cap_override=0.0, samples=14000, seed=3
        ).report
        assert report.unsound_toy is True
        assert report.gap == pytest.approx(0.5)
        assert report.extra["variant"] == "unitary"
        assert report.extra["tail_probability"] == 0.0
        assert report.verdict == "accept"

    def test_unitary_zero_gap_report(self):
        """Test that a product target yields a zero-gap reject report."""
        psi = PureState.zeros(6)
        run = run_complexity_cert(psi, psi, CHAIN, unsound_toy=True, cap_override=0.0)
        assert run.report.zero_gap is True
        assert run.report.verdict == "reject"
        assert run.report.T == 0
        assert run.records() == []

    @pytest.mark.slow
    def test_measurement_assisted_toy(self, bell_chain):
        """Test soundness a = t + (1-p')(1-t) and threshold a + gap/3."""
        report = run_complexity_cert(
            bell_chain, bell_chain, CHAIN, variant="measurement-assisted", unsound_toy=True,
            cap_override=0.0, t=0.6, p_prime=0.5, samples=56000, seed=3,
        ).report
        assert report.extra["soundness_bound"] == pytest.approx(0.8)
        assert report.extra["target_value"] == pytest.approx(1.0)
        assert report.gap == pytest.approx(0.2)
        assert report.threshold == pytest.approx(0.8 + 0.2 / 3)
        assert report.gap_kind == "witness"
        assert report.verdict == "accept"

    def test_measurement_assisted_without_tail(self, bell_chain):
        """Test that a vanishing premise probability gives a zero-gap report."""
        report = run_complexity_cert(
            bell_chain, bell_chain, CHAIN, variant="measurement-assisted", unsound_toy=True
        ).report
        assert report.zero_gap is True
        assert report.gap_kind == "witness"

    def test_witness_mixture_matches_dense(self, bell_chain):
        """Test that the two-branch mixture formula agrees with the density matrix."""
        part = CHAIN.partition()
        oracle = SeparableOracle([0], 2)
        dense = evaluate_threshold_witness(bell_chain, depolarize(bell_chain, 0.3), part, 0.6, 0.5, oracle)
        mixture = evaluate_threshold_witness(
            bell_chain, DepolarizedMixture(psi=bell_chain, p=0.3), part, 0.6, 0.5, oracle
        )
        assert dense == pytest.approx(mixture)
        assert dense == pytest.approx(0.7 + 0.3 / 64)

    def test_witness_parameter_range(self, bell_chain):
        """Test that t and p' must lie in (0, 1)."""
        with pytest.raises(InvalidArgument):
            evaluate_threshold_witness(bell_chain, bell_chain, CHAIN.partition(), 1.0, 0.5, SeparableOracle([0], 2))


class TestDepolarizing:
    """Test cases for the closed-form depolarized conditional fidelity."""

    def test_matches_density_evaluation(self, bell3):
        """Test the closed form against tr on the noisy density matrix."""
        oracle = SeparableOracle([0], 2)
        analytic = analytic_eta_depolarized(bell3, BELL_PART, oracle, 0.3)
        exact = exact_conditional_fidelity(depolarize(bell3, 0.3), bell3, BELL_PART, oracle)
        assert analytic == pytest.approx(0.3125)
        assert exact == pytest.approx(analytic)

    def test_crossover(self, bell3):
        """Test that the closed-form crossover matches the bracketed root."""
        crossover = depolarizing_crossover(bell3, BELL_PART, SeparableOracle([0], 2))
        assert crossover.closed_form == pytest.approx(0.8)
        assert crossover.root == pytest.approx(0.8)

    def test_curve_endpoints(self, bell3):
        """Test the eta(p) curve from the noiseless to the fully mixed end."""
        curve = eta_curve(bell3, BELL_PART, SeparableOracle([0], 2), 5)
        assert [p for p, _ in curve] == [0.0, 0.25, 0.5, 0.75, 1.0]
        assert curve[0][1] == pytest.approx(0.5)
        assert curve[-1][1] == pytest.approx(-0.125)

    def test_probability_checked(self, bell3):
        """Test that p must lie in [0, 1]."""
        with pytest.raises(InvalidArgument):
            analytic_eta_depolarized(bell3, BELL_PART, SeparableOracle([0], 2), 1.2)

    def test_magic_state_density_check(self):
        """Test the closed form on an 8-qubit pi/6 magic state against its noisy density matrix."""
        psi = magic_injection_state(8, math.pi / 6, np.random.default_rng(3))
        part = Bipartition.from_retained([0, 1, 2], 8)
        oracle = StabilizerOracle(3)
        analytic = analytic_eta_depolarized(psi, part, oracle, 0.35)
        exact = exact_conditional_fidelity(depolarize(psi, 0.35), psi, part, oracle)
        assert exact == pytest.approx(analytic, abs=1e-9)

    @pytest.mark.slow
    def test_twelve_qubit_magic_crossover(self):
        """Test that pi/6 magic states on 12 qubits cross zero between p = 0.25 and 0.5."""
        part = Bipartition.from_retained([0, 1, 2], 12)
        oracle = StabilizerOracle(3)
        crossings = []
        for c in range(4):
            psi = magic_injection_state(12, math.pi / 6, np.random.default_rng(c))
            crossover = depolarizing_crossover(psi, part, oracle)
            assert crossover.root == pytest.approx(crossover.closed_form, abs=1e-9)
            crossings.append(crossover.closed_form)
        assert 0.25 <= float(np.mean(crossings)) <= 0.50
