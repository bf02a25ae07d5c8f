"""
Projected ensembles and localizable quantumness.

Measuring subsystem B of a pure state in local Pauli bases leaves a random
pure state on A. This module enumerates and samples those ensembles and
averages a fidelity oracle's shortfall over them (LQ_P, and its random-basis
variant where every B qubit is measured in a uniformly random Pauli basis).
"""

import itertools
import json
from dataclasses import dataclass
from typing import Any, Iterator, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.special import comb

from .errors import InvalidArgument, SizeMismatch, TooLargeToEnumerate
from .freeset import FidelityOracle
from .qstate import (
    BASES,
    ZERO_PROB,
    AnyState,
    Bipartition,
    DensityState,
    PureState,
    encode_label,
    projected_state,
    rotate_density,
    rotate_outcomes,
    split_matrix,
)

MAX_ENUMERATE_B = 24
MAX_RANDOM_EXACT_B = 8
MAX_MOMENT_QUBITS = 12

BasisMode = Literal["fixed-z", "random"]


class BasisAssignment(BaseModel):
    """Per-B-qubit measurement bases, or the rule that draws them."""

    model_config = ConfigDict(frozen=True)

    mode: BasisMode = Field(default="fixed-z", description="fixed-z or uniform random Pauli")
    bases: Optional[str] = Field(
        default=None, description="Explicit basis letters over XYZ, one per B qubit"
    )

    @field_validator("bases", mode="before")
    @classmethod
    def normalize_bases(cls, value: Any) -> Optional[str]:
        """Upper-case and validate explicit basis letters."""
        if value is None:
            return None
        text = "".join(value).upper()
        if any(ch not in BASES for ch in text):
            raise ValueError(f"bases must use X, Y, Z only: {value!r}")
        return text

    def codes(self, width: int) -> list[int]:
        """Basis codes for a fixed assignment of the given width."""
        if self.bases is None:
            if self.mode != "fixed-z":
                raise InvalidArgument("mode", self.mode, "random mode has no fixed codes")
            return [0] * width
        if len(self.bases) != width:
            raise SizeMismatch(width, len(self.bases))
        return [BASES.index(ch) for ch in self.bases]

    @classmethod
    def coerce(cls, mode: Union["BasisAssignment", str]) -> "BasisAssignment":
        if isinstance(mode, BasisAssignment):
            return mode
        if mode in ("fixed-z", "random"):
            return cls(mode=mode)
        return cls(mode="fixed-z", bases=mode)


@dataclass(frozen=True)
class EnsembleEntry:
    """One branch of a projected ensemble."""

    probability: float
    label: str
    state: PureState


@dataclass(frozen=True)
class ProjectedEnsemble:
    """Weighted projected states on A, exact or sampled."""

    partition: Bipartition
    entries: tuple[EnsembleEntry, ...]
    mode: Literal["exact", "sampled"] = "exact"

    def probabilities(self) -> np.ndarray:
        return np.array([e.probability for e in self.entries])

    def vectors(self) -> np.ndarray:
        return np.array([e.state.amplitudes for e in self.entries])

    def to_json(self) -> str:
        """Serialize as {partition, mode, entries:[{p, label, amplitudes}]}."""
        payload = {
            "partition": {"A": list(self.partition.A), "B": list(self.partition.B)},
            "mode": self.mode,
            "entries": [
                {
                    "p": e.probability,
                    "label": e.label,
                    "amplitudes": [[float(a.real), float(a.imag)] for a in e.state.amplitudes],
                }
                for e in self.entries
            ],
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "ProjectedEnsemble":
        payload = json.loads(text)
        part = Bipartition(A=tuple(payload["partition"]["A"]), B=tuple(payload["partition"]["B"]))
        entries = tuple(
            EnsembleEntry(
                probability=float(item["p"]),
                label=item["label"],
                state=PureState.from_vector(np.array([complex(re, im) for re, im in item["amplitudes"]])),
            )
            for item in payload["entries"]
        )
        return cls(partition=part, entries=entries, mode=payload["mode"])


def all_basis_codes(width: int) -> Iterator[tuple[int, ...]]:
    """Every basis string on `width` qubits, lexicographic in Z, X, Y order."""
    return itertools.product(range(3), repeat=width)


def branch_matrix(psi: PureState, part: Bipartition, codes: Sequence[int]) -> np.ndarray:
    """
    Unnormalized projected vectors of a pure state, one column per B outcome.

    Column z equals sqrt(p(z)) * psi_z for B measured in the given bases.
    """
    vec = rotate_outcomes(psi.amplitudes, psi.n, part.B, codes)
    return split_matrix(vec, psi.n, part.A, part.B)


def branch_blocks(rho: DensityState, part: Bipartition, codes: Sequence[int]) -> np.ndarray:
    """
    Unnormalized projected density blocks p(z) * rho_z, shape (2^|B|, 2^|A|, 2^|A|).
    """
    n, nA, nB = rho.n, len(part.A), len(part.B)
    tensor = rotate_density(rho.tensor(), n, part.B, codes)
    order = list(part.A) + list(part.B)
    tensor = tensor.transpose(order + [n + q for q in order])
    mat = tensor.reshape(2**nA, 2**nB, 2**nA, 2**nB)
    idx = np.arange(2**nB)
    return mat[:, idx, :, idx]


def branch_distribution(state: AnyState, part: Bipartition, codes: Sequence[int]) -> np.ndarray:
    """Born distribution over B outcomes in the given bases."""
    if isinstance(state, PureState):
        probs = np.sum(np.abs(branch_matrix(state, part, codes)) ** 2, axis=0)
    else:
        blocks = branch_blocks(state, part, codes)
        probs = np.real(np.einsum("zaa->z", blocks))
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def normalized_branches(psi: PureState, part: Bipartition, codes: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """
    Branch probabilities and normalized projected vectors.

    Rows for outcomes with probability below 1e-14 are zero vectors.
    """
    cols = branch_matrix(psi, part, codes)
    probs = np.sum(np.abs(cols) ** 2, axis=0)
    states = np.zeros((cols.shape[1], cols.shape[0]), dtype=complex)
    live = probs >= ZERO_PROB
    states[live] = (cols[:, live] / np.sqrt(probs[live])).T
    return probs, states


def _outcome_label(codes: Sequence[int], bits: Sequence[int]) -> str:
    return encode_label(2 * c + b for c, b in zip(codes, bits))


def enumerate_ensemble(
    psi: PureState, part: Bipartition, basis: Union[BasisAssignment, str] = "fixed-z"
) -> ProjectedEnsemble:
    """
    Exact projected ensemble for one fixed basis assignment on B.

    Raises:
        TooLargeToEnumerate: If |B| exceeds 24.
    """
    assignment = BasisAssignment.coerce(basis)
    nB = len(part.B)
    if nB > MAX_ENUMERATE_B:
        raise TooLargeToEnumerate(2**nB, 2**MAX_ENUMERATE_B)
    codes = assignment.codes(nB)
    probs, states = normalized_branches(psi, part, codes)
    entries = []
    for z in np.flatnonzero(probs >= ZERO_PROB):
        bits = [(int(z) >> (nB - 1 - k)) & 1 for k in range(nB)]
        entries.append(
            EnsembleEntry(
                probability=float(probs[z]),
                label=_outcome_label(codes, bits),
                state=PureState.from_vector(states[z]),
            )
        )
    return ProjectedEnsemble(partition=part, entries=tuple(entries), mode="exact")


def sample_projected(
    state: AnyState,
    part: Bipartition,
    mode: Union[BasisAssignment, str],
    rng: np.random.Generator,
) -> tuple[str, AnyState, str]:
    """
    Measure B once and return (outcome label, projected state on A, basis string).

    In random mode every B qubit's basis is drawn uniformly from X, Y, Z.
    """
    assignment = BasisAssignment.coerce(mode)
    nB = len(part.B)
    if assignment.mode == "random" and assignment.bases is None:
        codes = [int(c) for c in rng.integers(0, 3, size=nB)]
    else:
        codes = assignment.codes(nB)
    probs = branch_distribution(state, part, codes)
    z = int(rng.choice(probs.size, p=probs))
    bits = [(z >> (nB - 1 - k)) & 1 for k in range(nB)]
    _, projected = projected_state(state, part, bits, codes)
    return _outcome_label(codes, bits), projected, "".join(BASES[c] for c in codes)


def _exact_shortfall(psi: PureState, part: Bipartition, oracle: FidelityOracle, codes: Sequence[int]) -> float:
    probs, states = normalized_branches(psi, part, codes)
    live = probs >= ZERO_PROB
    fids = oracle.many(states[live])
    return float(np.sum(probs[live] * (1.0 - fids)))


def localizable_quantumness(
    psi: PureState,
    part: Bipartition,
    oracle: FidelityOracle,
    mode: Union[BasisAssignment, str] = "fixed-z",
    budget: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> tuple[float, float]:
    """
    LQ_P(psi): ensemble average of 1 - Fid_P over projected states.

    Exact when ``budget`` is None and the basis set is enumerable (any fixed
    assignment with |B| <= 24; random mode with |B| <= 8, averaging all 3^|B|
    basis strings). Otherwise a Monte-Carlo estimate over ``budget`` sampled
    (basis, outcome) pairs.

    Returns:
        (estimate, standard error); the error is 0 for exact evaluation.
    """
    assignment = BasisAssignment.coerce(mode)
    nB = len(part.B)
    random_bases = assignment.mode == "random" and assignment.bases is None
    if budget is None:
        if not random_bases:
            if nB > MAX_ENUMERATE_B:
                raise TooLargeToEnumerate(2**nB, 2**MAX_ENUMERATE_B)
            value = _exact_shortfall(psi, part, oracle, assignment.codes(nB))
            return float(np.clip(value, 0.0, 1.0)), 0.0
        if nB <= MAX_RANDOM_EXACT_B:
            total = sum(_exact_shortfall(psi, part, oracle, codes) for codes in all_basis_codes(nB))
            return float(np.clip(total / 3**nB, 0.0, 1.0)), 0.0
        raise TooLargeToEnumerate(3**nB, 3**MAX_RANDOM_EXACT_B, what="basis strings")
    if budget < 1:
        raise InvalidArgument("budget", budget, "must be >= 1")
    if rng is None:
        raise InvalidArgument("rng", None, "Monte-Carlo estimation needs a generator")
    samples = sample_shortfalls(psi, part, oracle, assignment, budget, rng)
    stderr = float(samples.std(ddof=1) / np.sqrt(budget)) if budget > 1 else 0.0
    return float(np.clip(samples.mean(), 0.0, 1.0)), stderr


def sample_shortfalls(
    psi: PureState,
    part: Bipartition,
    oracle: FidelityOracle,
    assignment: BasisAssignment,
    count: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw `count` projected states and return 1 - Fid for each, in draw order."""
    nB = len(part.B)
    if assignment.mode == "random" and assignment.bases is None:
        drawn = rng.integers(0, 3, size=(count, nB))
    else:
        drawn = np.tile(np.array(assignment.codes(nB), dtype=np.int64), (count, 1))
    out = np.empty(count)
    uniq, inverse = np.unique(drawn, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    for u, codes in enumerate(uniq):
        rows = np.flatnonzero(inverse == u)
        probs, states = normalized_branches(psi, part, codes.tolist())
        p = probs / probs.sum()
        zs = rng.choice(p.size, size=rows.size, p=p)
        picked, back = np.unique(zs, return_inverse=True)
        fids = oracle.many(states[picked])
        out[rows] = 1.0 - fids[np.asarray(back).reshape(-1)]
    return out


def haar_moment(dim: int, k: int) -> np.ndarray:
    """Normalized projector onto the symmetric subspace of (C^dim)^{(x)k}, k in {1, 2}."""
    if k == 1:
        return np.eye(dim, dtype=complex) / dim
    swap = np.eye(dim * dim).reshape(dim, dim, dim, dim).transpose(0, 1, 3, 2).reshape(dim * dim, dim * dim)
    sym = (np.eye(dim * dim) + swap) / 2.0
    return sym.astype(complex) / comb(dim + 1, 2, exact=True)


def design_moment_distance(ens: ProjectedEnsemble, k: int) -> float:
    """
    Trace norm between the ensemble's k-th moment and the Haar k-th moment.

    Raises:
        TooLargeToEnumerate: If k * n_A exceeds 12 qubits.
    """
    if k not in (1, 2):
        raise InvalidArgument("k", k, "only first and second moments are supported")
    nA = len(ens.partition.A)
    if k * nA > MAX_MOMENT_QUBITS:
        raise TooLargeToEnumerate(2 ** (k * nA), 2**MAX_MOMENT_QUBITS, what="moment dimensions")
    probs = ens.probabilities()
    probs = probs / probs.sum()
    vecs = ens.vectors()
    if k == 2:
        vecs = np.einsum("ma,mb->mab", vecs, vecs).reshape(len(vecs), -1)
    moment = np.einsum("m,ma,mb->ab", probs, vecs, vecs.conj())
    diff = moment - haar_moment(2**nA, k)
    return float(np.sum(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2))))
