"""
Named property suites run by ``localq verify``.

Each suite measures one statistical or exact property of the toolkit and
compares it with its reference value. ``quick`` trades sample counts for
speed; tolerances stay the same except where they scale with the standard
error of the measurement.
"""

import math
import time
from typing import Callable, Union

import numpy as np
from pydantic import BaseModel, Field

from .ensemble import localizable_quantumness, sample_projected
from .errors import InvalidArgument
from .estimator import MoMParameters, exact_conditional_fidelity, median_of_means
from .freeset import SeparableOracle, StabilizerOracle, enumerate_stabilizer_states, stabilizer_fidelity
from .models import (
    CircuitSpec,
    LatticeGeometry,
    bell_state,
    brickwork_circuit,
    circuit_state,
    clifford_matrix,
    cluster_state,
    depolarize,
    ghz_state,
    haar_state,
    haar_two_qubit_unitary,
    magic_injection_state,
    orthogonal_state,
    random_clifford_unitary,
)
from .protocol import (
    ProtocolRunner,
    TargetScorer,
    TrialEngine,
    analytic_eta_depolarized,
    depolarizing_crossover,
    measured_gap,
    run_fidelity_cert,
    run_fully_inseparable,
)
from .qstate import Bipartition, PureState, apply_unitary, product_state, reduced_purity
from .spectral import averaged_truncated_gaps, build_observable, spectral_gap
from .utils import setup_logging, stream_rng

logger = setup_logging()


class PropertyResult(BaseModel):
    """One row of the verify table."""

    suite: str
    property: str
    measured: Union[float, str]
    tolerance: str
    passed: bool
    seconds: float = Field(default=0.0, ge=0.0)


SuiteFn = Callable[[bool, int, int], list[PropertyResult]]


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def _within(suite: str, prop: str, mean: float, se: float, target: float, k: float = 4.0) -> PropertyResult:
    return PropertyResult(
        suite=suite,
        property=prop,
        measured=mean,
        tolerance=f"{target:.6g} +/- {k:g} SE ({k * se:.3g})",
        passed=abs(mean - target) <= k * se,
    )


def haar_purity(quick: bool, seed: int, workers: int) -> list[PropertyResult]:
    """Mean reduced purity of Haar two-qubit states is 4/5."""
    rng = stream_rng(seed, 0)
    count = 2000 if quick else 10_000
    values = np.array([reduced_purity(haar_state(2, rng), [0]) for _ in range(count)])
    return [_within("haar-purity", "mean tr(rho_L^2), 2 qubits", *_mean_se(values), 0.8)]


def fact_recursion(quick: bool, seed: int, workers: int) -> list[PropertyResult]:
    """One Haar gate on qubits 1, 2 of a product state leaves E tr(rho_01^2) = 2/5 (1 + 1)."""
    rng = stream_rng(seed, 1)
    count = 2000 if quick else 10_000
    start = PureState.from_label("0+1-")
    values = np.array(
        [reduced_purity(apply_unitary(start, haar_two_qubit_unitary(rng), [1, 2]), [0, 1]) for _ in range(count)]
    )
    return [_within("fact-recursion", "mean tr(rho_01^2) after U_12", *_mean_se(values), 0.8)]


def shadow_unbiased(quick: bool, seed: int, workers: int) -> list[PropertyResult]:
    """Shadow rounds on a Bell-pair target average to the exact conditional fidelity."""
    psi = bell_state(extra_zeros=2)
    part = Bipartition.from_retained([0, 1], 4)
    rounds = 20_000 if quick else 100_000
    log = TrialEngine(psi, part, TargetScorer(psi, part), "fixed-z", seed, 2, workers).run(rounds)
    exact = exact_conditional_fidelity(psi, psi, part, None)
    mean, se = _mean_se(log.estimates)
    variance = float(np.var(log.estimates, ddof=1))
    return [
        _within("shadow-unbiased", "mean shadow estimate", mean, se, exact),
        PropertyResult(
            suite="shadow-unbiased", property="estimate variance", measured=variance,
            tolerance="<= 17", passed=variance <= 17.0,
        ),
    ]


def mom_concentration(quick: bool, seed: int, workers: int) -> list[PropertyResult]:
    """Median-of-means with B=750, K=14 misses by epsilon=0.2 at most 10% of the time."""
    rng = stream_rng(seed, 3)
    params = MoMParameters(B=750, K=14)
    reps = 50 if quick else 200
    scale = math.sqrt(5.0)
    misses = 0
    for _ in range(reps):
        values = rng.exponential(scale, size=params.T) - scale
        misses += abs(median_of_means(values, params)) >= 0.2
    rate = misses / reps
    return [
        PropertyResult(
            suite="mom-concentration", property="deviation >= 0.2 rate", measured=rate,
            tolerance="<= 0.10", passed=rate <= 0.10,
        )
    ]


def _rate_check(suite: str, prop: str, hits: int, reps: int) -> PropertyResult:
    rate = hits / reps
    return PropertyResult(suite=suite, property=prop, measured=rate, tolerance=">= 0.95", passed=rate >= 0.95)


def protocol_decisions(quick: bool, seed: int, workers: int) -> list[PropertyResult]:
    """Bell(x)|0> target: the exact target is accepted and |000> rejected."""
    psi = bell_state(extra_zeros=1)
    part = Bipartition.from_retained([0, 1], 3)
    oracle = SeparableOracle([0], 2)
    runner = ProtocolRunner(workers)
    reps = 5 if quick else 100
    accepted = sum(
        runner.certify(psi, psi, part, oracle, seed=seed, stream=2 * r).report.accepted for r in range(reps)
    )
    product = PureState.zeros(3)
    rejected = sum(
        not runner.certify(psi, product, part, oracle, seed=seed, stream=2 * (reps + r)).report.accepted
        for r in range(reps)
    )
    return [
        _rate_check("protocol", "target accepted", accepted, reps),
        _rate_check("protocol", "product input rejected", rejected, reps),
    ]


def ghz_degenerate(quick: bool, seed: int, workers: int) -> list[PropertyResult]:
    """GHZ_n has zero fixed-basis LQ under the separable oracle."""
    oracle = SeparableOracle([0], 2)
    worst = 0.0
    for n in range(3, 9):
        value, _ = localizable_quantumness(ghz_state(n), Bipartition.from_retained([0, 1], n), oracle)
        worst = max(worst, value)
    return [
        PropertyResult(
            suite="ghz-degenerate", property="max LQ over n=3..8", measured=worst,
            tolerance="<= 1e-12", passed=worst <= 1e-12,
        )
    ]


def stabilizer_counts(quick: bool, seed: int, workers: int) -> list[PropertyResult]:
    """Stabilizer dictionaries hold 6, 60 and 1080 states."""
    counts = [len(enumerate_stabilizer_states(n)) for n in (1, 2, 3)]
    return [
        PropertyResult(
            suite="stabilizer-counts", property="|STAB_n| for n=1,2,3", measured="/".join(map(str, counts)),
            tolerance="6/60/1080", passed=counts == [6, 60, 1080],
        )
    ]


def t_state(quick: bool, seed: int, workers: int) -> list[PropertyResult]:
    """The T state has stabilizer fidelity (2 + sqrt 2)/4."""
    identity = CircuitSpec(n=1, layers=())
    phi = magic_injection_state(1, math.pi / 4, stream_rng(seed, 7), clifford=identity)
    value = stabilizer_fidelity(phi, enumerate_stabilizer_states(1))
    target = (2.0 + math.sqrt(2.0)) / 4.0
    return [
        PropertyResult(
            suite="t-state", property="stabilizer fidelity", measured=value,
            tolerance=f"{target:.12f} +/- 1e-12", passed=abs(value - target) <= 1e-12,
        )
    ]


def clifford_uniform(quick: bool, seed: int, workers: int) -> list[PropertyResult]:
    """Single-qubit random Cliffords hit all 24 group elements uniformly."""
    rng = stream_rng(seed, 8)
    draws = 2400 if quick else 10_000
    counts: dict[tuple[tuple[float, float], ...], int] = {}
    for _ in range(draws):
        mat = clifford_matrix(random_clifford_unitary(1, rng))
        pivot = mat.reshape(-1)[np.argmax(np.abs(mat.reshape(-1)) > 1e-9)]
        canonical = np.round(mat * abs(pivot) / pivot, 6).reshape(-1)
        key = tuple((float(v.real) + 0.0, float(v.imag) + 0.0) for v in canonical)
        counts[key] = counts.get(key, 0) + 1
    p = 1.0 / 24.0
    sigma = math.sqrt(draws * p * (1 - p))
    worst = max(abs(c - draws * p) / sigma for c in counts.values())
    return [
        PropertyResult(
            suite="clifford-uniform", property="distinct elements", measured=float(len(counts)),
            tolerance="== 24", passed=len(counts) == 24,
        ),
        PropertyResult(
            suite="clifford-uniform", property="max |count - mean| / sigma", measured=worst,
            tolerance="<= 4", passed=worst <= 4.0,
        ),
    ]


def depolarizing_identity(quick: bool, seed: int, workers: int) -> list[PropertyResult]:
    """Closed-form depolarized eta matches the density-matrix value, and its root the closed form."""
    n = 6 if quick else 8
    rng = stream_rng(seed, 9)
    psi = magic_injection_state(n, math.pi / 6, rng)
    part = Bipartition.from_retained([0, 1, 2], n)
    oracle = StabilizerOracle(3)
    p = 0.3
    analytic = analytic_eta_depolarized(psi, part, oracle, p)
    exact = exact_conditional_fidelity(depolarize(psi, p), psi, part, oracle)
    crossover = depolarizing_crossover(psi, part, oracle)
    root_gap = abs(crossover.root - crossover.closed_form) if crossover.root is not None else math.inf
    return [
        PropertyResult(
            suite="depolarizing-identity", property="|analytic - exact| eta", measured=abs(analytic - exact),
            tolerance="<= 1e-9", passed=abs(analytic - exact) <= 1e-9,
        ),
        PropertyResult(
            suite="depolarizing-identity", property="|root - closed form|", measured=root_gap,
            tolerance="<= 1e-9", passed=root_gap <= 1e-9,
        ),
    ]


def brickwork_purity(quick: bool, seed: int, workers: int) -> list[PropertyResult]:
    """Depth-2 1D brickwork on 12 qubits: projected E tr(psi_L^2) stays below 4/5."""
    rng = stream_rng(seed, 10)
    geometry = LatticeGeometry.build((12,), 4, 1)
    part = geometry.partition()
    count = 100 if quick else 500
    values = []
    for _ in range(count):
        psi = circuit_state(brickwork_circuit((12,), 2, rng), rng)
        _, projected, _ = sample_projected(psi, part, "fixed-z", rng)
        values.append(reduced_purity(projected, geometry.left_positions()))
    mean, se = _mean_se(np.array(values))
    return [
        PropertyResult(
            suite="brickwork-purity", property="E tr(psi_L^2)", measured=mean,
            tolerance=f"<= 0.8 + 4 SE ({4 * se:.3g})", passed=mean <= 0.8 + 4 * se,
        )
    ]


def fidelity_gap(quick: bool, seed: int, workers: int) -> list[PropertyResult]:
    """Product targets have zero gap; Haar targets a positive one."""
    factors = [haar_state(1, stream_rng(seed, 11, q)).amplitudes for q in range(4)]
    product = product_state(factors)
    gap0 = spectral_gap(build_observable(product, 1, "all"), product)
    seeds = 5 if quick else 50
    sizes = (4, 5) if quick else (4, 5, 6, 7, 8)
    positive = 0
    for n in sizes:
        for s in range(seeds):
            psi = haar_state(n, stream_rng(seed, 11, n * 1000 + s))
            positive += measured_gap(psi, 1) > 0.0
    total = seeds * len(sizes)
    return [
        PropertyResult(
            suite="fidelity-gap", property="product-state gap", measured=gap0,
            tolerance="<= 1e-10", passed=gap0 <= 1e-10,
        ),
        PropertyResult(
            suite="fidelity-gap", property="Haar targets with positive gap", measured=f"{positive}/{total}",
            tolerance=f"{total}/{total}", passed=positive == total,
        ),
    ]


def gap_trend(quick: bool, seed: int, workers: int) -> list[PropertyResult]:
    """Mean truncated gap of depth-10n circuit states grows with the number of bases."""
    table = averaged_truncated_gaps(
        [6], 1, 3 if quick else 10, 40 if quick else 100, seed, workers=workers
    )
    trend = table.trend()[0]
    return [
        PropertyResult(
            suite="gap-trend", property="Spearman(i, mean gap), n=6", measured=trend,
            tolerance="> 0.9", passed=trend > 0.9,
        )
    ]


def inseparable_cluster(quick: bool, seed: int, workers: int) -> list[PropertyResult]:
    """Cluster state passes every pair test; a product across {0,1,2}|{3,4,5} fails pair (2, 3)."""
    psi = cluster_state(6)
    product = cluster_state(3).kron(cluster_state(3))
    reps = 3 if quick else 100
    accepted = sum(
        run_fully_inseparable(psi, psi, seed=seed, stream=2 * r, workers=workers).verdict == "accept"
        for r in range(reps)
    )
    caught = 0
    for r in range(reps):
        result = run_fully_inseparable(psi, product, seed=seed, stream=2 * (reps + r), workers=workers)
        verdicts = {p.pair: p.verdict for p in result.pairs}
        caught += verdicts[(2, 3)] == "reject"
    return [
        _rate_check("inseparable", "cluster accepted", accepted, reps),
        _rate_check("inseparable", "pair (2, 3) rejects product", caught, reps),
    ]


def fidelity_cert(quick: bool, seed: int, workers: int) -> list[PropertyResult]:
    """Haar target: exact input accepted, orthogonal input rejected."""
    n = 4 if quick else 6
    rng = stream_rng(seed, 12)
    psi = haar_state(n, rng)
    other = orthogonal_state(psi, rng)
    gap = measured_gap(psi, 1)
    reps = 3 if quick else 100
    accepted = sum(
        run_fidelity_cert(psi, psi, 1, gap, seed=seed, stream=2 * r, workers=workers).report.accepted
        for r in range(reps)
    )
    rejected = sum(
        not run_fidelity_cert(psi, other, 1, gap, seed=seed, stream=2 * (reps + r), workers=workers).report.accepted
        for r in range(reps)
    )
    return [
        _rate_check("fidelity-cert", "target accepted", accepted, reps),
        _rate_check("fidelity-cert", "orthogonal input rejected", rejected, reps),
    ]


SUITES: dict[str, SuiteFn] = {
    "haar-purity": haar_purity,
    "fact-recursion": fact_recursion,
    "shadow-unbiased": shadow_unbiased,
    "mom-concentration": mom_concentration,
    "protocol": protocol_decisions,
    "ghz-degenerate": ghz_degenerate,
    "stabilizer-counts": stabilizer_counts,
    "t-state": t_state,
    "clifford-uniform": clifford_uniform,
    "depolarizing-identity": depolarizing_identity,
    "brickwork-purity": brickwork_purity,
    "fidelity-gap": fidelity_gap,
    "gap-trend": gap_trend,
    "inseparable": inseparable_cluster,
    "fidelity-cert": fidelity_cert,
}


def resolve_suites(names: list[str]) -> list[str]:
    """Expand "all" and reject unknown names."""
    if "all" in names:
        return list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise InvalidArgument("suites", unknown, f"known suites: {', '.join(SUITES)}")
    return names


def run_suites(names: list[str], quick: bool = False, seed: int = 0, workers: int = 1) -> list[PropertyResult]:
    """Run the named suites in order and time each one."""
    results: list[PropertyResult] = []
    for name in resolve_suites(names):
        started = time.perf_counter()
        rows = SUITES[name](quick, seed, workers)
        seconds = round(time.perf_counter() - started, 3)
        for row in rows:
            row.seconds = seconds
        logger.info(
            event="suite_finished", message="Property suite finished", suite=name,
            passed=all(r.passed for r in rows), seconds=seconds,
        )
        results.extend(rows)
    return results
