"""
Conditional-fidelity observables and their spectral gaps.

For a target psi and a retained block A, measuring B in a local Pauli basis b
and keeping the projected target on A gives the operator

    O_b = sum_z psi_{b,z} (x) |x(b,z)><x(b,z)|

Averaging O_b over all 3^|B| basis strings gives the untruncated observable,
averaging over a sampled list gives the truncated one. Branches the target
never reaches are omitted, which keeps O positive semidefinite.
"""

from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.stats import spearmanr

from .ensemble import MAX_RANDOM_EXACT_B, all_basis_codes, normalized_branches
from .errors import InvalidArgument, SizeMismatch, TooLarge
from .freeset import FidelityOracle
from .models import brickwork_circuit, circuit_state
from .qstate import MEAS, ZERO_PROB, AnyState, Bipartition, PureState
from .utils import parallel_map, setup_logging, stream_rng

MAX_OBSERVABLE_QUBITS = 12
GAP_CLAMP = 1e-9

logger = setup_logging()

StateGenerator = Callable[[int, np.random.Generator], PureState]


@dataclass(frozen=True)
class BasisBlock:
    """Projected target states for one basis string on B; dead rows are zero."""

    codes: tuple[int, ...]
    probabilities: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)
    offsets: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def live(self) -> np.ndarray:
        return self.probabilities >= ZERO_PROB


@dataclass
class FidelityObservable:
    """Block representation of a conditional-fidelity observable."""

    n: int
    part: Bipartition
    blocks: list[BasisBlock]
    complete: bool = False
    _matrix: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_A(self) -> int:
        return len(self.part.A)

    @property
    def dead_branches(self) -> int:
        """Number of (basis, outcome) pairs omitted because the target never reaches them."""
        return int(sum(np.count_nonzero(~b.live) for b in self.blocks))

    def matrix(self) -> np.ndarray:
        """Dense 2^n x 2^n operator in natural qubit order, built once."""
        if self._matrix is None:
            self._matrix = sum(self.block_matrix(b) for b in self.blocks) / len(self.blocks)
        return self._matrix

    def block_matrix(self, block: BasisBlock) -> np.ndarray:
        """O_b for a single basis block."""
        nB = len(self.part.B)
        ketmat = _outcome_kets(block.codes)
        states = np.where(block.live[:, None], block.states, 0.0)
        cols = np.einsum("za,xz->axz", states, ketmat).reshape(2**self.n, 2**nB)
        mat = cols @ cols.conj().T
        if block.offsets is not None:
            diag = ketmat @ np.diag(np.where(block.live, block.offsets, 0.0)) @ ketmat.conj().T
            mat = mat - np.kron(np.eye(2**self.n_A), diag)
        return _to_natural_order(mat, self.part)


def _outcome_kets(codes: Sequence[int]) -> np.ndarray:
    """Columns |x(b, z)> for every outcome z of basis string b."""
    return reduce(np.kron, [MEAS[c].conj().T for c in codes], np.ones((1, 1), dtype=complex))


def _to_natural_order(mat: np.ndarray, part: Bipartition) -> np.ndarray:
    """Reorder an operator written with A's qubits first, then B's."""
    n = part.n
    order = list(part.A) + list(part.B)
    perm = list(np.argsort(order))
    t = mat.reshape((2,) * (2 * n)).transpose(perm + [n + p for p in perm])
    return t.reshape(2**n, 2**n)


def _decode_basis_index(index: int, width: int) -> tuple[int, ...]:
    digits = []
    for _ in range(width):
        index, r = divmod(index, 3)
        digits.append(r)
    return tuple(reversed(digits))


def sample_basis_strings(width: int, count: int, rng: np.random.Generator) -> list[tuple[int, ...]]:
    """Draw `count` distinct basis strings on `width` qubits, uniformly without replacement."""
    total = 3**width
    if count > total:
        raise InvalidArgument("count", count, f"only {total} basis strings exist")
    picks = rng.choice(total, size=count, replace=False)
    return [_decode_basis_index(int(i), width) for i in picks]


def build_observable(
    psi: PureState,
    n_A: int,
    bases: Union[str, Sequence[Sequence[int]]] = "all",
    include_offsets: Optional[FidelityOracle] = None,
    part: Optional[Bipartition] = None,
) -> FidelityObservable:
    """
    Assemble the conditional-fidelity observable of a target.

    Args:
        psi: Target state.
        n_A: Retained qubits; A defaults to the first n_A qubits.
        bases: "all" for every basis string on B, or an explicit list of
            basis-code tuples (Z=0, X=1, Y=2) for a truncated observable.
        include_offsets: Oracle whose Fid values are subtracted as
            Fid * I_A on each branch.
        part: Explicit bipartition overriding the default.

    Raises:
        TooLarge: If n exceeds 12, or "all" is requested with |B| > 8.
    """
    if psi.n > MAX_OBSERVABLE_QUBITS:
        raise TooLarge(psi.n, MAX_OBSERVABLE_QUBITS)
    part = part or Bipartition.from_retained(range(n_A), psi.n)
    if len(part.A) != n_A or part.n != psi.n:
        raise SizeMismatch(n_A, len(part.A))
    nB = len(part.B)
    if isinstance(bases, str):
        if bases != "all":
            raise InvalidArgument("bases", bases, "expected 'all' or a list of basis strings")
        if nB > MAX_RANDOM_EXACT_B:
            raise TooLarge(nB, MAX_RANDOM_EXACT_B)
        basis_list = list(all_basis_codes(nB))
        complete = True
    else:
        basis_list = [tuple(int(c) for c in b) for b in bases]
        if not basis_list:
            raise InvalidArgument("bases", [], "at least one basis string is needed")
        complete = False
    blocks = []
    for codes in basis_list:
        probs, states = normalized_branches(psi, part, codes)
        offsets = None
        if include_offsets is not None:
            offsets = np.zeros(probs.size)
            live = probs >= ZERO_PROB
            offsets[live] = include_offsets.many(states[live])
        blocks.append(BasisBlock(codes=tuple(codes), probabilities=probs, states=states, offsets=offsets))
    return FidelityObservable(n=psi.n, part=part, blocks=blocks, complete=complete)


def spectral_gap(O: FidelityObservable, psi: PureState) -> float:
    """
    1 - max over phi orthogonal to psi of tr(O phi).

    Computed as 1 - lambda_max(P O P) with P = I - |psi><psi|; values within
    1e-9 below zero are clamped to 0.
    """
    if psi.n != O.n:
        raise SizeMismatch(O.n, psi.n)
    mat = O.matrix()
    v = psi.amplitudes
    proj = np.eye(v.size) - np.outer(v, v.conj())
    deflated = proj @ mat @ proj
    deflated = (deflated + deflated.conj().T) / 2
    gap = 1.0 - float(np.linalg.eigvalsh(deflated)[-1])
    if gap < -GAP_CLAMP:
        logger.warning("Negative spectral gap clamped", gap=gap, n=O.n)
    return max(gap, 0.0)


def fidelity_observable_expectation(O: FidelityObservable, rho: AnyState) -> float:
    """tr(O rho) for a pure or mixed state."""
    if rho.n != O.n:
        raise SizeMismatch(O.n, rho.n)
    mat = O.matrix()
    if isinstance(rho, PureState):
        return float(np.real(np.vdot(rho.amplitudes, mat @ rho.amplitudes)))
    return float(np.real(np.trace(mat @ rho.matrix)))


def truncated_gaps(psi: PureState, n_A: int, bases: Sequence[Sequence[int]]) -> np.ndarray:
    """Gaps of O^(i), the average over the first i basis strings, for i = 1..len(bases)."""
    part = Bipartition.from_retained(range(n_A), psi.n)
    full = build_observable(psi, n_A, bases, part=part)
    running = np.zeros((2**psi.n, 2**psi.n), dtype=complex)
    gaps = np.empty(len(full.blocks))
    for i, block in enumerate(full.blocks, start=1):
        running += full.block_matrix(block)
        partial = FidelityObservable(n=psi.n, part=part, blocks=full.blocks[:i], _matrix=running / i)
        gaps[i - 1] = spectral_gap(partial, psi)
    return gaps


def circuit_generator(n: int, rng: np.random.Generator) -> PureState:
    """Target from a 1D brickwork circuit of depth 10n on |0...0>."""
    return circuit_state(brickwork_circuit((n,), 10 * n, rng), rng)


@dataclass(frozen=True)
class GapTable:
    """Truncated-gap scan: gaps[k, j, i-1] is state j at size ns[k] with i bases."""

    ns: tuple[int, ...]
    n_A: int
    seed: int
    gaps: np.ndarray = field(repr=False)

    def mean(self) -> np.ndarray:
        return self.gaps.mean(axis=1)

    def std(self) -> np.ndarray:
        return self.gaps.std(axis=1, ddof=1) if self.gaps.shape[1] > 1 else np.zeros_like(self.mean())

    def trend(self) -> list[float]:
        """Spearman correlation of the mean gap against i, per n."""
        i = np.arange(1, self.gaps.shape[2] + 1)
        return [float(spearmanr(i, row).statistic) for row in self.mean()]

    def rows(self) -> list[tuple[int, int, int, int, float, float, float]]:
        """CSV rows (n, n_A, state, i, gap, mean, std)."""
        mean, std = self.mean(), self.std()
        out = []
        for k, n in enumerate(self.ns):
            for j in range(self.gaps.shape[1]):
                for i in range(self.gaps.shape[2]):
                    out.append((n, self.n_A, j, i + 1, float(self.gaps[k, j, i]),
                                float(mean[k, i]), float(std[k, i])))
        return out


def averaged_truncated_gaps(
    ns: Sequence[int],
    n_A: int,
    N_s: int,
    N_M: int,
    seed: int,
    generator: StateGenerator = circuit_generator,
    workers: int = 1,
) -> GapTable:
    """
    Mean truncated gap over N_s generated states for i = 1..N_M basis strings.

    Each (n, state) pair owns RNG stream ``k * N_s + j``; basis strings are
    drawn without replacement per state.

    Raises:
        TooLarge: If any n exceeds 10.
    """
    if any(n > 10 for n in ns):
        raise TooLarge(max(ns), 10)
    logger.info("Truncated gap scan started", ns=list(ns), n_A=n_A, N_s=N_s, N_M=N_M, seed=seed)
    tasks = [(k, j, n) for k, n in enumerate(ns) for j in range(N_s)]

    def one(task: tuple[int, int, int]) -> np.ndarray:
        k, j, n = task
        rng = stream_rng(seed, k * N_s + j)
        psi = generator(n, rng)
        bases = sample_basis_strings(n - n_A, min(N_M, 3 ** (n - n_A)), rng)
        return truncated_gaps(psi, n_A, bases)

    results = parallel_map(one, tasks, workers)
    width = min(len(r) for r in results)
    gaps = np.array([r[:width] for r in results]).reshape(len(ns), N_s, width)
    table = GapTable(ns=tuple(ns), n_A=n_A, seed=seed, gaps=gaps)
    logger.info("Truncated gap scan finished", final_mean=table.mean()[:, -1].tolist())
    return table
