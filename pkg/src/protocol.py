"""
Certification engines for localq-cert.

Every engine follows the same round structure: measure B of the input state,
measure A in uniformly random local Pauli bases, score the round against the
projected target with a single-copy shadow estimate, aggregate with
median-of-means and compare against a threshold.

Rounds are simulated in fixed-size chunks. Chunk c of stream s draws from
``stream_rng(seed, s, c)``, so the trial log depends only on the seed and the
trial count, never on the worker count.
"""

import math
import time
from dataclasses import dataclass, field
from threading import Lock
from typing import Any, Optional, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .ensemble import (
    MAX_ENUMERATE_B,
    MAX_RANDOM_EXACT_B,
    BasisAssignment,
    localizable_quantumness,
    normalized_branches,
)
from .errors import GeometryInvalid, InvalidArgument, LocqError, TooLargeToEnumerate, ZeroGap
from .estimator import (
    MoMParameters,
    empirical_sample_size,
    exact_conditional_fidelity,
    fidelity_sample_size,
    median_of_means,
    mom_parameters,
    protocol_sample_size,
    shadow_table,
    variance_bound,
    witness_mom_parameters,
)
from .freeset import (
    EntanglementThresholdOracle,
    FidelityOracle,
    SeparableOracle,
    StabilizerOracle,
    thresholded_witness_weight,
    witness_parameters,
)
from .models import (
    DepolarizedMixture,
    LatticeGeometry,
    bell_state,
    brickwork_circuit,
    circuit_state,
    cluster_state,
    depolarize,
    ghz_state,
    haar_state,
    j1j2_ground_state,
    magic_injection_state,
    orthogonal_state,
    xxz_ground_state,
)
from .qstate import (
    BASES,
    ZERO_PROB,
    Bipartition,
    DensityState,
    PureState,
    encode_label,
    entanglement_entropy,
    rotate_density,
    rotate_outcomes,
    trace_distance,
)
from .spectral import build_observable, spectral_gap
from .types import (
    CertificationConfig,
    CertificationReport,
    InputSpec,
    OracleSpec,
    StateSpec,
    TrialRecord,
)
from .utils import chunk_bounds, parallel_map, setup_logging, stream_rng

InputState = Union[PureState, DensityState, DepolarizedMixture]

# Stream ids reserved for state preparation and gap estimation; trial streams use 0, 1, 2, ...
TARGET_STREAM = 1 << 40
INPUT_STREAM = TARGET_STREAM + 1
GAP_STREAM = TARGET_STREAM + 2

LQ_FLOOR = 1e-12
# Monte-Carlo draws per pair when the random-basis LE cannot be enumerated
DEFAULT_LE_SAMPLES = 2000


# ---------------------------------------------------------------------------
# State preparation
# ---------------------------------------------------------------------------


def prepare_state(
    spec: StateSpec, rng: np.random.Generator, target: Optional[PureState] = None
) -> PureState:
    """Build a pure state from its config description."""
    family = spec.family
    if family == "bell":
        return bell_state(spec.extra_zeros)
    if family == "ghz":
        return ghz_state(spec.n)
    if family == "cluster":
        return cluster_state(spec.n)
    if family == "product":
        return PureState.from_label(spec.label)
    if family == "haar":
        return haar_state(spec.n, rng)
    if family == "brickwork":
        return circuit_state(brickwork_circuit(spec.dims, spec.depth, rng, spec.measure_prob), rng)
    if family == "magic":
        return magic_injection_state(spec.n, spec.alpha, rng)
    if family == "xxz":
        return xxz_ground_state(spec.n, spec.anisotropy)
    if family == "j1j2":
        return j1j2_ground_state(spec.n, spec.J2)
    if family == "explicit":
        return PureState.from_vector(np.array([complex(re, im) for re, im in spec.amplitudes]))
    if family == "tensor":
        state = prepare_state(spec.factors[0], rng, target)
        for factor in spec.factors[1:]:
            state = state.kron(prepare_state(factor, rng, target))
        return state
    if family == "orthogonal":
        if target is None:
            raise InvalidArgument("family", family, "an orthogonal state needs a target")
        return orthogonal_state(target, rng)
    raise InvalidArgument("family", family, "unknown state family")


def prepare_input(spec: InputSpec, target: PureState, rng: np.random.Generator) -> InputState:
    """Experimental state: the target or another state, with optional depolarizing noise."""
    base = target if spec.state is None else prepare_state(spec.state, rng, target)
    if base.n != target.n:
        raise InvalidArgument("input", base.n, f"target has {target.n} qubits")
    if spec.noise is None:
        return base
    return depolarize(base, spec.noise.p)


def build_oracle(spec: OracleSpec, n_A: int) -> FidelityOracle:
    """Free-set oracle on the retained block."""
    if spec.kind == "stabilizer":
        return StabilizerOracle(n_A)
    left = spec.left if spec.left is not None else list(range(max(1, n_A // 2)))
    return SeparableOracle(left, n_A)


def input_trace_distance(psi: PureState, rho: InputState) -> float:
    """Trace distance of the experimental state from the target."""
    if isinstance(rho, DepolarizedMixture):
        if rho.psi == psi:
            return rho.p * (1.0 - 2.0**-psi.n)
        raise InvalidArgument("rho", "mixture", "trace distance of large mixtures needs the same base state")
    return trace_distance(psi, rho)


# ---------------------------------------------------------------------------
# Round simulation
# ---------------------------------------------------------------------------


def _code_index(codes: np.ndarray, radix: int) -> np.ndarray:
    """Big-endian integer index of each row of digits."""
    weights = radix ** np.arange(codes.shape[1] - 1, -1, -1, dtype=np.int64)
    return codes.astype(np.int64) @ weights


def _inverse_cdf(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probs)
    idx = np.searchsorted(cdf, u * cdf[-1], side="right")
    return np.minimum(idx, probs.size - 1)


class PauliSampler:
    """Samples outcomes of local Pauli measurements on every qubit of an input state."""

    def __init__(self, rho: InputState) -> None:
        self.rho = rho
        self.n = rho.n

    def _distribution(self, codes: Sequence[int]) -> np.ndarray:
        state = self.rho.psi if isinstance(self.rho, DepolarizedMixture) else self.rho
        qubits = list(range(self.n))
        if isinstance(state, PureState):
            vec = rotate_outcomes(state.amplitudes, self.n, qubits, codes)
            probs = np.abs(vec) ** 2
        else:
            t = rotate_density(state.tensor(), self.n, qubits, codes)
            probs = np.real(np.diagonal(t.reshape(2**self.n, 2**self.n)))
        return np.clip(probs, 0.0, None)

    def sample(self, bases: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """
        Measure qubit q of row i in basis bases[i, q].

        Returns:
            (m, n) array of outcome bits.
        """
        m = bases.shape[0]
        u = rng.random(m)
        u_mix = rng.random(m)
        noise = rng.integers(0, 2, size=(m, self.n))
        index = np.empty(m, dtype=np.int64)
        uniq, inverse = np.unique(bases, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        for k, codes in enumerate(uniq):
            rows = np.flatnonzero(inverse == k)
            index[rows] = _inverse_cdf(self._distribution(codes.tolist()), u[rows])
        bits = (index[:, None] >> np.arange(self.n - 1, -1, -1)) & 1
        if isinstance(self.rho, DepolarizedMixture):
            mixed = u_mix < self.rho.p
            bits[mixed] = noise[mixed]
        return bits


class TargetScorer:
    """
    Per-round score weight * shadow(psi_z, x) - offset(psi_z) against the projected target.

    Rounds whose outcome the target never produces score 0.
    """

    def __init__(
        self,
        psi: PureState,
        part: Bipartition,
        offset_oracle: Optional[FidelityOracle] = None,
        weight_oracle: Optional[FidelityOracle] = None,
        t: Optional[float] = None,
    ) -> None:
        if weight_oracle is not None and t is None:
            raise InvalidArgument("t", None, "a weight oracle needs a threshold t")
        self.psi = psi
        self.part = part
        self.offset_oracle = offset_oracle
        self.weight_oracle = weight_oracle
        self.t = t
        self._branches: dict[tuple[int, ...], tuple[np.ndarray, np.ndarray]] = {}
        self._lock = Lock()

    def branches(self, codes: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
        with self._lock:
            cached = self._branches.get(codes)
        if cached is None:
            cached = normalized_branches(self.psi, self.part, codes)
            with self._lock:
                self._branches[codes] = cached
        return cached

    def branch_terms(self, codes: tuple[int, ...], z: int) -> tuple[Optional[np.ndarray], float, float]:
        """(shadow table, weight, offset) of one branch; table is None for dead branches."""
        probs, states = self.branches(codes)
        if probs[z] < ZERO_PROB:
            return None, 0.0, 0.0
        vec = states[z]
        offset = float(self.offset_oracle.many(vec[None, :])[0]) if self.offset_oracle else 0.0
        weight = 1.0
        if self.weight_oracle is not None and self.t is not None:
            weight = thresholded_witness_weight(float(self.weight_oracle.many(vec[None, :])[0]), self.t)
        return shadow_table(vec, len(self.part.A)), weight, offset

    def score(
        self, b_codes: np.ndarray, z_bits: np.ndarray, x_codes: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """
        Score a batch of rounds.

        Args:
            b_codes: (m, |B|) basis codes on B.
            z_bits: (m, |B|) outcome bits on B.
            x_codes: (m, |A|) outcome codes on A.

        Returns:
            (estimates, offsets).
        """
        m = b_codes.shape[0]
        z = _code_index(z_bits, 2) if z_bits.shape[1] else np.zeros(m, dtype=np.int64)
        x = _code_index(x_codes, 6)
        estimates = np.zeros(m)
        offsets = np.zeros(m)
        keys = np.column_stack([b_codes, z]) if b_codes.shape[1] else z[:, None]
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        nB = b_codes.shape[1]
        for k, key in enumerate(uniq):
            rows = np.flatnonzero(inverse == k)
            table, weight, offset = self.branch_terms(tuple(int(c) for c in key[:nB]), int(key[-1]))
            if table is None:
                continue
            estimates[rows] = weight * table[x[rows]] - offset
            offsets[rows] = offset
        return estimates, offsets


@dataclass
class TrialLog:
    """Columnar record of simulated rounds over all n qubits."""

    bases: np.ndarray
    bits: np.ndarray
    estimates: np.ndarray = field(default_factory=lambda: np.zeros(0))
    offsets: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def empty(cls, n: int) -> "TrialLog":
        return cls(bases=np.zeros((0, n), dtype=np.int64), bits=np.zeros((0, n), dtype=np.int64))

    def __len__(self) -> int:
        return int(self.bases.shape[0])

    def split(self, part: Bipartition) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(basis codes on B, outcome bits on B, outcome codes on A)."""
        A, B = list(part.A), list(part.B)
        return self.bases[:, B], self.bits[:, B], 2 * self.bases[:, A] + self.bits[:, A]

    def records(self, part: Bipartition, pair: Optional[tuple[int, int]] = None) -> list[dict[str, Any]]:
        """TrialRecord dicts in trial order, for rounds that carry an estimate."""
        b, z, x = self.split(part)
        out = []
        for i in range(len(self.estimates)):
            record = TrialRecord(
                index=i,
                basis="".join(BASES[c] for c in b[i]),
                outcome=encode_label(2 * b[i] + z[i]),
                shadow=encode_label(x[i]),
                estimate=float(self.estimates[i]),
                offset=float(self.offsets[i]),
                pair=list(pair) if pair is not None else None,
            ).model_dump(exclude_none=True)
            out.append(record)
        return out


class TrialEngine:
    """Simulates certification rounds of one input state against one target."""

    def __init__(
        self,
        rho: InputState,
        part: Bipartition,
        scorer: Optional[TargetScorer],
        basis: Union[BasisAssignment, str] = "fixed-z",
        seed: int = 0,
        stream: int = 0,
        workers: int = 1,
    ) -> None:
        if rho.n != part.n:
            raise InvalidArgument("rho", rho.n, f"partition covers {part.n} qubits")
        self.sampler = PauliSampler(rho)
        self.part = part
        self.scorer = scorer
        self.assignment = BasisAssignment.coerce(basis)
        self.seed = seed
        self.stream = stream
        self.workers = workers
        self.logger = setup_logging()

    def _chunk(self, bounds: tuple[int, int, int]) -> TrialLog:
        c, start, stop = bounds
        rng = stream_rng(self.seed, self.stream, c)
        m = stop - start
        n, A, B = self.part.n, list(self.part.A), list(self.part.B)
        bases = np.zeros((m, n), dtype=np.int64)
        if self.assignment.mode == "random" and self.assignment.bases is None:
            bases[:, B] = rng.integers(0, 3, size=(m, len(B)))
        elif B:
            bases[:, B] = np.array(self.assignment.codes(len(B)))
        bases[:, A] = rng.integers(0, 3, size=(m, len(A)))
        bits = self.sampler.sample(bases, rng)
        log = TrialLog(bases=bases, bits=bits)
        if self.scorer is not None:
            log.estimates, log.offsets = self.scorer.score(*log.split(self.part))
        return log

    def run(self, T: int) -> TrialLog:
        """Simulate T rounds."""
        if T < 1:
            raise InvalidArgument("T", T, "at least one round is needed")
        started = time.perf_counter()
        logs = parallel_map(self._chunk, chunk_bounds(T), self.workers)
        log = TrialLog(
            bases=np.concatenate([l.bases for l in logs]),
            bits=np.concatenate([l.bits for l in logs]),
            estimates=np.concatenate([l.estimates for l in logs]),
            offsets=np.concatenate([l.offsets for l in logs]),
        )
        self.logger.debug(
            "Trials simulated", T=T, stream=self.stream, chunks=len(logs),
            seconds=round(time.perf_counter() - started, 3),
        )
        return log


# ---------------------------------------------------------------------------
# Shadow certification
# ---------------------------------------------------------------------------


def formula_sample_size(sigma2: float, epsilon: float, delta: float) -> int:
    """T = ceil(27 ln(1/delta) sigma^2 / epsilon^2) for a threshold test at margin epsilon."""
    return max(1, math.ceil(27.0 * math.log(1.0 / delta) * sigma2 / epsilon**2 - 1e-9))


def _override(params: MoMParameters, samples: Optional[int]) -> tuple[MoMParameters, str]:
    if samples is None:
        return params, "formula"
    if samples < params.K:
        raise InvalidArgument("samples", samples, f"needs at least K={params.K} rounds")
    return MoMParameters(B=max(1, samples // params.K), K=params.K), "override"


@dataclass
class CertificationRun:
    """Report plus the full trial log and the partition it refers to."""

    report: CertificationReport
    log: TrialLog
    part: Bipartition

    def records(self) -> list[dict[str, Any]]:
        return self.log.records(self.part)


class ProtocolRunner:
    """Runs the certification engines with a shared worker pool size and logger."""

    def __init__(self, workers: int = 1) -> None:
        self.workers = workers
        self.logger = setup_logging()

    def certify(
        self,
        psi: PureState,
        rho: InputState,
        part: Bipartition,
        oracle: FidelityOracle,
        basis: Union[BasisAssignment, str] = "fixed-z",
        delta: float = 0.05,
        seed: int = 0,
        stream: int = 0,
        eta_star: Optional[float] = None,
        samples: Optional[int] = None,
        sample_size_rule: str = "formula",
        pilot: int = 0,
        gap: Optional[float] = None,
        gap_provenance: str = "exact",
    ) -> CertificationRun:
        """
        Shadow certification against LQ_P(psi).

        Args:
            eta_star: Explicit threshold in (0, LQ); LQ/3 when None.
            samples: Trial count override.
            sample_size_rule: "formula" or "empirical" (uses `pilot` rounds).
            gap: Precomputed LQ; computed exactly when None.

        Raises:
            ZeroGap: If LQ is not positive.
        """
        started = time.perf_counter()
        if gap is None:
            gap, _ = localizable_quantumness(psi, part, oracle, basis)
            gap_provenance = "exact"
        if gap <= LQ_FLOOR:
            raise ZeroGap(gap)
        nA = len(part.A)
        if eta_star is None:
            eta_star, epsilon = gap / 3.0, gap / 3.0
            T_formula = protocol_sample_size(gap, delta, nA)
        else:
            if not 0.0 < eta_star < gap:
                raise InvalidArgument("eta_star", eta_star, f"must lie in (0, LQ={gap:.6g})")
            epsilon = min(eta_star, gap - eta_star)
            T_formula = formula_sample_size(variance_bound(nA), epsilon, delta)
        scorer = TargetScorer(psi, part, offset_oracle=oracle)
        params, rule = _override(mom_parameters(variance_bound(nA), epsilon, delta), samples)
        if sample_size_rule == "empirical" and samples is None:
            if pilot < 2:
                raise InvalidArgument("pilot", pilot, "the empirical rule needs at least 2 pilot rounds")
            pilot_log = TrialEngine(rho, part, scorer, basis, seed, stream + 1, self.workers).run(pilot)
            sigma2 = max(float(np.var(pilot_log.estimates, ddof=1)), 1e-12)
            params, rule = mom_parameters(sigma2, epsilon, delta), "empirical"
        self.logger.info(
            event="protocol_started", message="Certification started", n=psi.n, n_A=nA,
            gap=gap, threshold=eta_star, T=params.T, seed=seed, stream=stream,
        )
        log = TrialEngine(rho, part, scorer, basis, seed, stream, self.workers).run(params.T)
        estimate = median_of_means(log.estimates, params)
        report = CertificationReport(
            verdict="accept" if estimate > eta_star else "reject",
            estimate=estimate,
            threshold=eta_star,
            T=params.T,
            T_formula=T_formula,
            T_empirical=empirical_sample_size(log.estimates, epsilon, delta),
            sample_size_rule=rule,
            block_size=params.B,
            block_count=params.K,
            gap=gap,
            gap_kind="LQ",
            gap_provenance=gap_provenance,
            robustness_radius=epsilon / 2.0,
            input_trace_distance=_safe_distance(psi, rho),
            oracle=oracle.describe(),
            extra={"n": psi.n, "n_A": nA, "basis": BasisAssignment.coerce(basis).model_dump()},
            seed=seed,
            wall_time_s=round(time.perf_counter() - started, 6),
        )
        self.logger.info(
            event="protocol_finished", message="Certification finished",
            verdict=report.verdict, estimate=estimate, threshold=eta_star, T=params.T,
        )
        return CertificationRun(report=report, log=log, part=part)

    def run_protocol1(self, cfg: CertificationConfig, stream: int = 0) -> CertificationRun:
        """Prepare states from a config and certify; repetition r uses trial stream 2r."""
        psi = prepare_state(cfg.target, stream_rng(cfg.seed, TARGET_STREAM))
        rho = prepare_input(cfg.input, psi, stream_rng(cfg.seed, INPUT_STREAM))
        part = Bipartition.from_retained(cfg.retained, psi.n)
        oracle = build_oracle(cfg.oracle, len(part.A))
        gap, provenance = None, "exact"
        if cfg.gap_samples is not None:
            gap, _ = localizable_quantumness(
                psi, part, oracle, cfg.basis, budget=cfg.gap_samples,
                rng=stream_rng(cfg.seed, GAP_STREAM),
            )
            provenance = "sampled"
        return self.certify(
            psi, rho, part, oracle,
            basis=cfg.basis,
            delta=cfg.delta,
            seed=cfg.seed,
            stream=2 * stream,
            eta_star=cfg.threshold.eta_star if cfg.threshold.rule == "explicit" else None,
            samples=cfg.samples,
            sample_size_rule=cfg.sample_size_rule,
            pilot=cfg.pilot,
            gap=gap,
            gap_provenance=provenance,
        )


def _safe_distance(psi: PureState, rho: InputState) -> Optional[float]:
    try:
        return input_trace_distance(psi, rho)
    except LocqError:
        return None


def run_protocol1(cfg: CertificationConfig, stream: int = 0, workers: int = 1) -> CertificationReport:
    """Run the shadow certification protocol described by a config."""
    return ProtocolRunner(workers).run_protocol1(cfg, stream).report


# ---------------------------------------------------------------------------
# Fully inseparable certification
# ---------------------------------------------------------------------------


@dataclass
class PairResult:
    """Verdict of one pair test inside the fully-inseparable certification."""

    pair: tuple[int, int]
    le: float
    params: MoMParameters
    estimate: float
    threshold: float
    estimates: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    le_stderr: float = 0.0
    le_provenance: str = "exact"

    @property
    def verdict(self) -> str:
        return "accept" if self.estimate > self.threshold else "reject"

    def as_dict(self) -> dict[str, Any]:
        return {
            "pair": list(self.pair),
            "le": self.le,
            "le_stderr": self.le_stderr,
            "le_provenance": self.le_provenance,
            "B": self.params.B,
            "K": self.params.K,
            "T": self.params.T,
            "estimate": self.estimate,
            "threshold": self.threshold,
            "verdict": self.verdict,
        }


@dataclass
class InseparableResult:
    pairs: list[PairResult]
    T: int
    delta_per_pair: float
    log: TrialLog
    seed: int

    @property
    def verdict(self) -> str:
        return "accept" if all(p.verdict == "accept" for p in self.pairs) else "reject"

    def pair_part(self, pair: tuple[int, int]) -> Bipartition:
        return Bipartition.from_retained(pair, self.log.bases.shape[1])

    def records(self) -> list[dict[str, Any]]:
        """Per-pair trial records over the prefix of the shared dataset each pair used."""
        out = []
        for p in self.pairs:
            k = len(p.estimates)
            prefix = TrialLog(self.log.bases[:k], self.log.bits[:k], p.estimates, np.zeros(k))
            out.extend(prefix.records(self.pair_part(p.pair), pair=p.pair))
        return out

    def summary(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict,
            "T": self.T,
            "delta_per_pair": self.delta_per_pair,
            "pairs": [p.as_dict() for p in self.pairs],
            "seed": self.seed,
        }


def pair_estimates(
    psi: PureState, log: TrialLog, pair: tuple[int, int], count: Optional[int] = None
) -> np.ndarray:
    """Per-round separable-witness estimates of one pair from a shared all-qubit dataset."""
    part = Bipartition.from_retained(pair, psi.n)
    scorer = TargetScorer(psi, part, offset_oracle=SeparableOracle([0], 2))
    b, z, x = log.split(part)
    k = len(log) if count is None else count
    estimates, _ = scorer.score(b[:k], z[:k], x[:k])
    return estimates


def run_fully_inseparable(
    psi: PureState,
    rho: InputState,
    pairs: Optional[Sequence[tuple[int, int]]] = None,
    delta: float = 0.05,
    budget: Optional[int] = None,
    seed: int = 0,
    stream: int = 0,
    workers: int = 1,
    gap_samples: Optional[int] = None,
) -> InseparableResult:
    """
    Certify entanglement across every pair with one reused dataset.

    One dataset of random-Pauli-on-all-qubits rounds is simulated; pair (i, j)
    reads its own qubits as the shadow outcome and the complement as z. Each
    pair is tested at failure probability delta / #pairs.

    Pair LEs are exact while the complement has at most 8 qubits and
    ``gap_samples`` is None; otherwise they are Monte-Carlo estimates over
    ``gap_samples`` (default 2000) draws on the gap stream.

    Raises:
        ZeroGap: With the pair whose random-basis LE of the target vanishes.
    """
    logger = setup_logging()
    n = psi.n
    pairs = [tuple(p) for p in (pairs or [(i, i + 1) for i in range(n - 1)])]
    delta_pair = delta / len(pairs)
    oracle = SeparableOracle([0], 2)
    layouts = []
    for k, pair in enumerate(pairs):
        part = Bipartition.from_retained(pair, n)
        if gap_samples is None and len(part.B) <= MAX_RANDOM_EXACT_B:
            le, stderr = localizable_quantumness(psi, part, oracle, "random")
            provenance = "exact"
        else:
            le, stderr = localizable_quantumness(
                psi, part, oracle, "random", budget=gap_samples or DEFAULT_LE_SAMPLES,
                rng=stream_rng(seed, GAP_STREAM, k),
            )
            provenance = "sampled"
        if le <= LQ_FLOOR:
            raise ZeroGap(le, pair=pair)
        params = mom_parameters(variance_bound(2), le / 3.0, delta_pair)
        layouts.append((pair, le, params, stderr, provenance))
    T = budget if budget is not None else max(p.T for _, _, p, _, _ in layouts)
    if T < layouts[0][2].K:
        raise InvalidArgument("budget", T, f"needs at least K={layouts[0][2].K} rounds")
    logger.info(
        event="inseparable_started", message="Fully-inseparable certification started",
        n=n, pairs=len(pairs), T=T, seed=seed,
    )
    engine = TrialEngine(rho, Bipartition.from_retained(range(n), n), None, "fixed-z", seed, stream, workers)
    log = engine.run(T)
    results = []
    for pair, le, params, stderr, provenance in layouts:
        if params.T > T:
            params = MoMParameters(B=max(1, T // params.K), K=params.K)
        estimates = pair_estimates(psi, log, pair, params.T)
        results.append(PairResult(
            pair, le, params, median_of_means(estimates, params), le / 3.0, estimates,
            le_stderr=stderr, le_provenance=provenance,
        ))
    outcome = InseparableResult(pairs=results, T=T, delta_per_pair=delta_pair, log=log, seed=seed)
    logger.info(
        event="inseparable_finished", message="Fully-inseparable certification finished",
        verdict=outcome.verdict, rejected=[list(p.pair) for p in results if p.verdict == "reject"],
    )
    return outcome


# ---------------------------------------------------------------------------
# Fidelity certification
# ---------------------------------------------------------------------------


def measured_gap(psi: PureState, n_A: int) -> float:
    """Spectral gap of the untruncated conditional-fidelity observable."""
    return spectral_gap(build_observable(psi, n_A, "all"), psi)


def run_fidelity_cert(
    psi: PureState,
    rho: InputState,
    n_A: int,
    gap: Optional[float] = None,
    F: float = 0.5,
    c: float = 0.25,
    delta: float = 0.05,
    seed: int = 0,
    stream: int = 0,
    samples: Optional[int] = None,
    workers: int = 1,
) -> CertificationRun:
    """
    Decide tr(psi rho) > F versus high fidelity from random-basis shadow rounds.

    The estimate targets tr(O_psi rho); the threshold is 1 - (1-c) gap (1-F).

    Raises:
        ZeroGap: If the gap is not positive.
        InvalidArgument: Unless 0 < c < 1/2 and 0 < F < 1.
    """
    logger = setup_logging()
    started = time.perf_counter()
    if not 0.0 < c < 0.5:
        raise InvalidArgument("c", c, "must lie in (0, 1/2)")
    if not 0.0 < F < 1.0:
        raise InvalidArgument("F", F, "must lie in (0, 1)")
    provenance = "supplied"
    if gap is None:
        gap, provenance = measured_gap(psi, n_A), "exact"
    if gap <= LQ_FLOOR:
        raise ZeroGap(gap)
    part = Bipartition.from_retained(range(n_A), psi.n)
    threshold = 1.0 - (1.0 - c) * gap * (1.0 - F)
    epsilon = c * gap * (1.0 - F)
    T_formula = fidelity_sample_size(gap, F, c, delta, n_A)
    params, rule = _override(mom_parameters(variance_bound(n_A), epsilon, delta), samples)
    logger.info(
        event="fidelity_cert_started", message="Fidelity certification started",
        n=psi.n, n_A=n_A, gap=gap, threshold=threshold, T=params.T, seed=seed,
    )
    scorer = TargetScorer(psi, part)
    log = TrialEngine(rho, part, scorer, "random", seed, stream, workers).run(params.T)
    estimate = median_of_means(log.estimates, params)
    report = CertificationReport(
        verdict="accept" if estimate > threshold else "reject",
        estimate=estimate,
        threshold=threshold,
        T=params.T,
        T_formula=T_formula,
        T_empirical=empirical_sample_size(log.estimates, epsilon, delta),
        sample_size_rule=rule,
        block_size=params.B,
        block_count=params.K,
        gap=gap,
        gap_kind="Delta",
        gap_provenance=provenance,
        robustness_radius=epsilon,
        input_trace_distance=_safe_distance(psi, rho),
        extra={"n": psi.n, "n_A": n_A, "F": F, "c": c},
        seed=seed,
        wall_time_s=round(time.perf_counter() - started, 6),
    )
    logger.info(
        event="fidelity_cert_finished", message="Fidelity certification finished",
        verdict=report.verdict, estimate=estimate,
    )
    return CertificationRun(report=report, log=log, part=part)


# ---------------------------------------------------------------------------
# Complexity certification
# ---------------------------------------------------------------------------


def _live_branches(psi: PureState, part: Bipartition) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    nB = len(part.B)
    if nB > MAX_ENUMERATE_B:
        raise TooLargeToEnumerate(2**nB, 2**MAX_ENUMERATE_B)
    probs, states = normalized_branches(psi, part, [0] * nB)
    live = probs >= ZERO_PROB
    return probs, states, live


def entanglement_tail_probability(psi: PureState, geometry: LatticeGeometry, c: float) -> float:
    """Pr over computational outcomes on B that E_{L|R}(psi_z) >= c|L| + 1."""
    part = geometry.partition()
    probs, states, live = _live_branches(psi, part)
    cut = Bipartition.from_retained(geometry.left_positions(), len(part.A))
    level = c * len(geometry.L) + 1.0
    total = 0.0
    for z in np.flatnonzero(live):
        phi = PureState(n=len(part.A), amplitudes=states[z])
        if entanglement_entropy(phi, cut) >= level - 1e-12:
            total += float(probs[z])
    return total


def witness_weights(
    psi: PureState, part: Bipartition, oracle: FidelityOracle, t: float
) -> tuple[np.ndarray, np.ndarray]:
    """Per-outcome thresholded weights and target probabilities (fixed Z basis on B)."""
    probs, states, live = _live_branches(psi, part)
    weights = np.ones(probs.size)
    if live.any():
        fids = oracle.many(states[live])
        weights[live] = np.where(fids <= t, 1.0, t)
    return weights, probs


def evaluate_threshold_witness(
    psi: PureState,
    rho: InputState,
    part: Bipartition,
    t: float,
    p_prime: float,
    oracle: FidelityOracle,
    mode: str = "exact",
    budget: Optional[int] = None,
    seed: int = 0,
    workers: int = 1,
) -> float:
    """
    tr(O~ rho) with O~ = sum_z w_z psi_z (x) |z><z| and w_z = t + (1-t) 1[Fid(psi_z) <= t].

    ``oracle`` supplies the fidelity bound of the p'-likely free set. Exact
    evaluation enumerates B; ``mode="sampled"`` averages `budget` shadow rounds.

    Raises:
        TooLargeToEnumerate: In exact mode past the enumeration ceiling.
    """
    if not 0.0 < t < 1.0 or not 0.0 < p_prime < 1.0:
        raise InvalidArgument("t, p_prime", (t, p_prime), "both must lie in (0, 1)")
    if mode == "sampled":
        if budget is None:
            raise InvalidArgument("budget", None, "sampled mode needs a budget")
        scorer = TargetScorer(psi, part, weight_oracle=oracle, t=t)
        log = TrialEngine(rho, part, scorer, "fixed-z", seed, 0, workers).run(budget)
        return float(np.clip(np.mean(log.estimates), -1.0, 2.0))
    weights, probs = witness_weights(psi, part, oracle, t)
    if isinstance(rho, DepolarizedMixture):
        live = probs >= ZERO_PROB
        noise = float(np.sum(weights[live])) / 2**psi.n
        clean = exact_conditional_fidelity(rho.psi, psi, part, None, "fixed-z", weights)
        return float(np.clip((1.0 - rho.p) * clean + rho.p * noise, 0.0, 1.0))
    value = exact_conditional_fidelity(rho, psi, part, None, "fixed-z", weights)
    return float(np.clip(value, 0.0, 1.0))


def _zero_gap_report(
    gap: float, seed: int, unsound_toy: bool, oracle: FidelityOracle, extra: dict[str, Any],
    gap_kind: str = "LQ",
) -> CertificationReport:
    return CertificationReport(
        verdict="reject", estimate=0.0, threshold=0.0, T=0, T_formula=0, block_size=0,
        block_count=0, gap=max(gap, 0.0), gap_kind=gap_kind, robustness_radius=0.0,
        unsound_toy=unsound_toy, zero_gap=True, oracle=oracle.describe(), extra=extra, seed=seed,
    )


def run_complexity_cert(
    psi: PureState,
    rho: InputState,
    geometry: LatticeGeometry,
    c: float = 0.5,
    variant: str = "unitary",
    delta: float = 0.05,
    seed: int = 0,
    stream: int = 0,
    unsound_toy: bool = False,
    cap_override: Optional[float] = None,
    t: Optional[float] = None,
    p_prime: Optional[float] = None,
    samples: Optional[int] = None,
    workers: int = 1,
) -> CertificationRun:
    """
    Certify that rho is far from every low-depth (optionally measurement-assisted) state.

    The unitary variant runs shadow certification with the entanglement-
    threshold oracle. The measurement-assisted variant estimates the
    thresholded witness against a + gap/3, where a = t + (1-p')(1-t) bounds
    free states and b = tr(O~ psi) is the target value.

    A vanishing gap yields a reject report with ``zero_gap`` set.

    Raises:
        GeometryInvalid: When w/d is below the soundness regime without unsound_toy.
    """
    logger = setup_logging()
    started = time.perf_counter()
    part = geometry.partition()
    nA = len(part.A)
    eta = geometry.w / geometry.d
    floor = 4.0 if variant == "unitary" else 6.0
    if eta <= floor and not unsound_toy:
        raise GeometryInvalid(
            f"w/d = {eta:g} is not above {floor:g}; pass unsound_toy to run outside the sound regime"
        )
    tail = entanglement_tail_probability(psi, geometry, c)
    extra: dict[str, Any] = {
        "variant": variant, "eta_ratio": eta, "c": c, "tail_probability": tail,
        "geometry": geometry.model_dump(mode="json"),
    }
    logger.info(
        event="complexity_cert_started", message="Complexity certification started",
        variant=variant, w=geometry.w, d=geometry.d, n=geometry.n, tail=tail, toy=unsound_toy,
    )
    left = geometry.left_positions()
    if variant == "unitary":
        oracle = EntanglementThresholdOracle(
            left, nA, geometry.w, geometry.d, "unitary", cap_override=cap_override, unsound_toy=unsound_toy,
        )
        gap, _ = localizable_quantumness(psi, part, oracle, "fixed-z")
        if gap <= LQ_FLOOR:
            report = _zero_gap_report(gap, seed, unsound_toy, oracle, extra)
            return CertificationRun(report=report, log=TrialLog.empty(psi.n), part=part)
        run = ProtocolRunner(workers).certify(
            psi, rho, part, oracle, "fixed-z", delta, seed, stream, samples=samples, gap=gap,
        )
        run.report = run.report.model_copy(update={"unsound_toy": unsound_toy, "extra": {**run.report.extra, **extra}})
        return run
    if variant != "measurement-assisted":
        raise InvalidArgument("variant", variant, "expected 'unitary' or 'measurement-assisted'")
    if t is None or p_prime is None:
        try:
            t, p_prime = witness_parameters(eta, c, tail)
        except ZeroGap as e:
            placeholder = EntanglementThresholdOracle(left, nA, geometry.w, geometry.d)
            report = _zero_gap_report(e.gap, seed, unsound_toy, placeholder, extra, "witness")
            return CertificationRun(report=report, log=TrialLog.empty(psi.n), part=part)
    oracle = EntanglementThresholdOracle(
        left, nA, geometry.w, geometry.d, "p-likely", p_prime=p_prime,
        cap_override=cap_override, unsound_toy=unsound_toy,
    )
    soundness = t + (1.0 - p_prime) * (1.0 - t)
    completeness = evaluate_threshold_witness(psi, psi, part, t, p_prime, oracle)
    gap = completeness - soundness
    extra.update({"t": t, "p_prime": p_prime, "soundness_bound": soundness, "target_value": completeness})
    if gap <= LQ_FLOOR:
        report = _zero_gap_report(gap, seed, unsound_toy, oracle, extra, "witness")
        return CertificationRun(report=report, log=TrialLog.empty(psi.n), part=part)
    threshold = soundness + gap / 3.0
    params = witness_mom_parameters(gap, delta, nA)
    rule = "formula"
    if samples is not None:
        params, rule = _override(params, samples)
    scorer = TargetScorer(psi, part, weight_oracle=oracle, t=t)
    log = TrialEngine(rho, part, scorer, "fixed-z", seed, stream, workers).run(params.T)
    estimate = median_of_means(log.estimates, params)
    report = CertificationReport(
        verdict="accept" if estimate > threshold else "reject",
        estimate=estimate,
        threshold=threshold,
        T=params.T,
        T_formula=witness_mom_parameters(gap, delta, nA).T,
        T_empirical=empirical_sample_size(log.estimates, gap / 3.0, delta),
        sample_size_rule=rule,
        block_size=params.B,
        block_count=params.K,
        gap=gap,
        gap_kind="witness",
        robustness_radius=gap / 6.0,
        input_trace_distance=_safe_distance(psi, rho),
        unsound_toy=unsound_toy,
        oracle=oracle.describe(),
        extra=extra,
        seed=seed,
        wall_time_s=round(time.perf_counter() - started, 6),
    )
    logger.info(
        event="complexity_cert_finished", message="Complexity certification finished",
        verdict=report.verdict, estimate=estimate, threshold=threshold,
    )
    return CertificationRun(report=report, log=log, part=part)


# ---------------------------------------------------------------------------
# Depolarizing analytics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DepolarizingProfile:
    """Ingredients of the closed-form conditional fidelity under global depolarizing noise."""

    lm: float
    fid_sum: float
    live: int
    d_A: int
    d_B: int

    @property
    def noise_value(self) -> float:
        """eta of the maximally mixed state: (live/d_B)/d_A - fid_sum/d_B."""
        return self.live / (self.d_A * self.d_B) - self.fid_sum / self.d_B

    def eta(self, p: float) -> float:
        return (1.0 - p) * self.lm + p * self.noise_value

    def crossover(self) -> float:
        """Closed-form root of eta(p) = 0."""
        return self.lm / (self.lm - self.noise_value)


def depolarizing_profile(psi: PureState, part: Bipartition, oracle: FidelityOracle) -> DepolarizingProfile:
    """Enumerate the fixed-basis projected ensemble once for the depolarizing formulas."""
    probs, states, live = _live_branches(psi, part)
    fids = oracle.many(states[live]) if live.any() else np.zeros(0)
    lm = float(np.sum(probs[live] * (1.0 - fids)))
    return DepolarizingProfile(
        lm=lm, fid_sum=float(np.sum(fids)), live=int(np.count_nonzero(live)),
        d_A=2 ** len(part.A), d_B=2 ** len(part.B),
    )


def analytic_eta_depolarized(psi: PureState, part: Bipartition, oracle: FidelityOracle, p: float) -> float:
    """
    eta_psi((1-p) psi + p I/d) in closed form.

    Outcomes the target never produces contribute nothing, so the noise term
    counts live branches: p[(live/d_B)/d_A - (1/d_B) sum_z Fid(psi_z)].
    """
    if not 0.0 <= p <= 1.0:
        raise InvalidArgument("p", p, "must lie in [0, 1]")
    return depolarizing_profile(psi, part, oracle).eta(p)


@dataclass(frozen=True)
class Crossover:
    closed_form: float
    root: Optional[float]
    profile: DepolarizingProfile


def depolarizing_crossover(psi: PureState, part: Bipartition, oracle: FidelityOracle) -> Crossover:
    """Closed-form noise crossover and the bracketed root of eta(p) on [0, 1]."""
    profile = depolarizing_profile(psi, part, oracle)
    closed = profile.crossover() if profile.lm - profile.noise_value > 0 else math.inf
    root = None
    if profile.eta(0.0) > 0.0 > profile.eta(1.0):
        root = float(brentq(profile.eta, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    return Crossover(closed_form=closed, root=root, profile=profile)


def eta_curve(
    psi: PureState, part: Bipartition, oracle: FidelityOracle, points: int
) -> list[tuple[float, float]]:
    """(p, eta(p)) on an even grid of `points` values in [0, 1]."""
    profile = depolarizing_profile(psi, part, oracle)
    return [(float(p), profile.eta(float(p))) for p in np.linspace(0.0, 1.0, points)]
