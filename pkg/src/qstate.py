"""
Dense quantum states for localq-cert.

Pure states are stored as normalized statevectors, mixed states as trace-one
density matrices. Qubit 0 is the most significant bit of a basis index, so a
statevector reshaped to ``(2,) * n`` has axis ``i`` equal to qubit ``i``. All
outcome strings are printed qubit 0 first.

Single-qubit outcomes over the six-element local Pauli alphabet are encoded as
integer codes ``2 * basis + bit`` with bases ordered Z, X, Y::

    code  label  ket
    0     "0"    |0>
    1     "1"    |1>
    2     "+"    |+>
    3     "-"    |->
    4     "+i"   |+i>
    5     "-i"   |-i>
"""

from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from .errors import NonUnitaryGate, SizeMismatch, ZeroProbabilityOutcome

NORM_TOL = 1e-10
ZERO_PROB = 1e-14
MAX_QUBITS = 16

BASES = "ZXY"
LABELS = ("0", "1", "+", "-", "+i", "-i")

_S2 = 1.0 / np.sqrt(2.0)
KETS = np.array(
    [
        [1.0, 0.0],
        [0.0, 1.0],
        [_S2, _S2],
        [_S2, -_S2],
        [_S2, 1j * _S2],
        [_S2, -1j * _S2],
    ],
    dtype=complex,
)

# MEAS[b] maps computational amplitudes to outcome amplitudes of basis b (rows are bras).
MEAS = np.stack([KETS[2 * b : 2 * b + 2].conj() for b in range(3)])

# 3|x><x| - I for each of the six outcome codes.
SHADOW_FACTORS = np.stack([3.0 * np.outer(k, k.conj()) - np.eye(2) for k in KETS])

GATES: dict[str, np.ndarray] = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * _S2,
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "SDG": np.array([[1, 0], [0, -1j]], dtype=complex),
    "T": np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=complex),
    "CX": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
    ),
}


def basis_code(basis: str) -> int:
    """Index of a basis letter in Z, X, Y order."""
    return BASES.index(basis.upper())


def encode_label(codes: Iterable[int]) -> str:
    """Render outcome codes as a label string, qubit 0 first."""
    return "".join(LABELS[int(c)] for c in codes)


def decode_label(label: str) -> list[int]:
    """
    Parse a label string over {0, 1, +, -, +i, -i} into outcome codes.

    Raises:
        ValueError: On characters outside the alphabet.
    """
    codes: list[int] = []
    i = 0
    while i < len(label):
        ch = label[i]
        if ch in "01":
            codes.append(int(ch))
            i += 1
        elif ch in "+-":
            if i + 1 < len(label) and label[i + 1] == "i":
                codes.append(4 if ch == "+" else 5)
                i += 2
            else:
                codes.append(2 if ch == "+" else 3)
                i += 1
        else:
            raise ValueError(f"invalid outcome label {label!r}")
    return codes


def bits_to_index(bits: Sequence[int]) -> int:
    """Big-endian bit tuple to integer index."""
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def index_to_bits(index: int, width: int) -> tuple[int, ...]:
    """Integer index to big-endian bit tuple of the given width."""
    return tuple((index >> (width - 1 - k)) & 1 for k in range(width))


def _as_bits(outcome: Union[str, Sequence[int]]) -> tuple[int, ...]:
    if isinstance(outcome, str):
        return tuple(int(c) for c in outcome)
    return tuple(int(b) for b in outcome)


class Bipartition(BaseModel):
    """
    Split of n qubits into a retained subsystem A and a measured subsystem B.

    Both lists keep the order given; A's order defines the qubit order of
    projected states on A.
    """

    model_config = ConfigDict(frozen=True)

    A: tuple[int, ...] = Field(..., description="Retained qubits, in projected-state order")
    B: tuple[int, ...] = Field(..., description="Measured qubits, in outcome-string order")

    @model_validator(mode="after")
    def check_cover(self) -> "Bipartition":
        """Validate that A and B are disjoint and cover 0..n-1."""
        joined = list(self.A) + list(self.B)
        if len(set(joined)) != len(joined):
            raise ValueError("A and B must be disjoint with distinct entries")
        if sorted(joined) != list(range(len(joined))):
            raise ValueError("A and B must cover qubits 0..n-1")
        return self

    @computed_field  # type: ignore[prop-decorator]
    @property
    def n(self) -> int:
        """Total qubit count."""
        return len(self.A) + len(self.B)

    @classmethod
    def from_retained(cls, A: Iterable[int], n: int) -> "Bipartition":
        """Build a partition keeping A and measuring every other qubit in order."""
        kept = tuple(int(q) for q in A)
        return cls(A=kept, B=tuple(q for q in range(n) if q not in kept))


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized statevector on n qubits."""

    n: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        vec = np.ascontiguousarray(self.amplitudes, dtype=complex).reshape(-1)
        if vec.size != 2**self.n:
            raise SizeMismatch(2**self.n, vec.size)
        norm2 = float(np.vdot(vec, vec).real)
        if abs(norm2 - 1.0) > NORM_TOL:
            raise ValueError(f"statevector norm^2 {norm2} differs from 1")
        vec.setflags(write=False)
        object.__setattr__(self, "amplitudes", vec)

    @classmethod
    def from_vector(cls, vec: np.ndarray, normalize: bool = True) -> "PureState":
        """Wrap a raw vector, normalizing it by default."""
        arr = np.asarray(vec, dtype=complex).reshape(-1)
        n = int(round(np.log2(arr.size)))
        if 2**n != arr.size:
            raise SizeMismatch(2**n, arr.size)
        if normalize:
            norm = np.linalg.norm(arr)
            if norm < ZERO_PROB:
                raise ZeroProbabilityOutcome("", float(norm**2))
            arr = arr / norm
        return cls(n=n, amplitudes=arr)

    @classmethod
    def zeros(cls, n: int) -> "PureState":
        """|0...0> on n qubits."""
        vec = np.zeros(2**n, dtype=complex)
        vec[0] = 1.0
        return cls(n=n, amplitudes=vec)

    @classmethod
    def basis(cls, bits: Union[str, Sequence[int]]) -> "PureState":
        """Computational basis state from a bit string."""
        b = _as_bits(bits)
        vec = np.zeros(2 ** len(b), dtype=complex)
        vec[bits_to_index(b)] = 1.0
        return cls(n=len(b), amplitudes=vec)

    @classmethod
    def from_label(cls, label: str) -> "PureState":
        """Product of single-qubit Pauli eigenstates, e.g. ``"+0-i"``."""
        return product_state([KETS[c] for c in decode_label(label)])

    def tensor(self) -> np.ndarray:
        """View as an n-axis tensor with one axis per qubit."""
        return self.amplitudes.reshape((2,) * self.n)

    def density(self) -> "DensityState":
        """Projector onto this state."""
        return DensityState(n=self.n, matrix=np.outer(self.amplitudes, self.amplitudes.conj()))

    def kron(self, other: "PureState") -> "PureState":
        """Tensor product, self's qubits first."""
        return PureState(n=self.n + other.n, amplitudes=np.kron(self.amplitudes, other.amplitudes))

    def overlap(self, other: "PureState") -> complex:
        """Inner product <self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PureState):
            return NotImplemented
        return self.n == other.n and bool(np.allclose(self.amplitudes, other.amplitudes))

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class DensityState:
    """Trace-one Hermitian positive semidefinite matrix on n qubits."""

    n: int
    matrix: np.ndarray = field(repr=False)
    check_psd: bool = field(default=True, repr=False)

    def __post_init__(self) -> None:
        mat = np.ascontiguousarray(self.matrix, dtype=complex)
        dim = 2**self.n
        if mat.shape != (dim, dim):
            raise SizeMismatch(dim, mat.shape[0])
        if np.max(np.abs(mat - mat.conj().T), initial=0.0) > NORM_TOL:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(mat).real - 1.0) > NORM_TOL:
            raise ValueError(f"density matrix trace {np.trace(mat).real} differs from 1")
        if self.check_psd and np.linalg.eigvalsh(mat)[0] < -1e-8:
            raise ValueError("density matrix has a negative eigenvalue")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def maximally_mixed(cls, n: int) -> "DensityState":
        """I / 2^n."""
        return cls(n=n, matrix=np.eye(2**n, dtype=complex) / 2**n, check_psd=False)

    def tensor(self) -> np.ndarray:
        """View as a 2n-axis tensor: n ket axes then n bra axes."""
        return self.matrix.reshape((2,) * (2 * self.n))

    def purity(self) -> float:
        """tr(rho^2)."""
        return float(np.real(np.vdot(self.matrix, self.matrix)))


AnyState = Union[PureState, DensityState]


def product_state(factors: Sequence[np.ndarray]) -> PureState:
    """Tensor product of single-qubit (or larger) vectors, first factor on qubit 0."""
    vec = np.ones(1, dtype=complex)
    for f in factors:
        vec = np.kron(vec, np.asarray(f, dtype=complex))
    return PureState.from_vector(vec)


def density(state: AnyState) -> DensityState:
    """Promote a pure state to its density matrix; density states pass through."""
    return state.density() if isinstance(state, PureState) else state


def _apply_tensor(psi: np.ndarray, mat: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Contract a k-qubit matrix into the given axes of an n-axis tensor."""
    k = len(axes)
    op = mat.reshape((2,) * (2 * k))
    out = np.tensordot(op, psi, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def apply_matrix(vec: np.ndarray, mat: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """
    Apply a 2^k x 2^k matrix to the target qubits of a raw statevector.

    No unitarity check; used on hot paths where gates are known unitaries.
    """
    out = _apply_tensor(vec.reshape((2,) * n), mat, targets)
    return out.reshape(-1)


def apply_unitary(state: AnyState, gate: np.ndarray, targets: Sequence[int]) -> AnyState:
    """
    Apply a k-qubit unitary to the target qubits.

    Args:
        state: Pure or density state.
        gate: 2^k x 2^k unitary; its first tensor factor acts on targets[0].
        targets: k distinct qubit indices.

    Returns:
        The evolved state, same type as the input.

    Raises:
        NonUnitaryGate: If gate deviates from unitarity by more than 1e-10.
    """
    gate = np.asarray(gate, dtype=complex)
    k = len(targets)
    if gate.shape != (2**k, 2**k):
        raise SizeMismatch(2**k, gate.shape[0])
    if len(set(targets)) != k:
        raise ValueError(f"targets must be distinct: {list(targets)}")
    deviation = float(np.max(np.abs(gate @ gate.conj().T - np.eye(2**k))))
    if deviation > NORM_TOL:
        raise NonUnitaryGate(deviation)
    if isinstance(state, PureState):
        vec = apply_matrix(state.amplitudes, gate, targets, state.n)
        return PureState(n=state.n, amplitudes=vec)
    n = state.n
    rho = _apply_tensor(state.tensor(), gate, targets)
    rho = _apply_tensor(rho, gate.conj(), [n + t for t in targets])
    return DensityState(n=n, matrix=rho.reshape(2**n, 2**n), check_psd=False)


def split_matrix(vec: np.ndarray, n: int, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
    """Reshape a statevector into a (2^|rows|, 2^|cols|) matrix over two qubit groups."""
    psi = vec.reshape((2,) * n).transpose(list(rows) + list(cols))
    return psi.reshape(2 ** len(rows), 2 ** len(cols))


def rotate_outcomes(vec: np.ndarray, n: int, qubits: Sequence[int], basis: Sequence[int]) -> np.ndarray:
    """
    Express the given qubits of a statevector in local Pauli bases.

    After rotation, computational index bit ``s`` on qubit ``q`` stands for
    outcome code ``2 * basis[q] + s``.
    """
    psi = vec.reshape((2,) * n)
    for q, b in zip(qubits, basis):
        if b:
            psi = _apply_tensor(psi, MEAS[b], [q])
    return psi.reshape(-1)


def rotate_density(tensor: np.ndarray, n: int, qubits: Sequence[int], basis: Sequence[int]) -> np.ndarray:
    for q, b in zip(qubits, basis):
        if b:
            tensor = _apply_tensor(tensor, MEAS[b], [q])
            tensor = _apply_tensor(tensor, MEAS[b].conj(), [n + q])
    return tensor


def projected_state(
    state: AnyState,
    part: Bipartition,
    outcome: Union[str, Sequence[int]],
    basis: Union[str, Sequence[int], None] = None,
) -> tuple[float, AnyState]:
    """
    Condition on an outcome of measuring B and return the state left on A.

    Args:
        state: Pure or density state on part.n qubits.
        part: Bipartition; the outcome is read in B's order.
        outcome: Bit string on B (bit 0 = first eigenvector of the basis).
        basis: Optional per-B-qubit basis letters or codes; Z when omitted.

    Returns:
        (probability, normalized projected state on A).

    Raises:
        SizeMismatch: If the outcome length differs from |B|.
        ZeroProbabilityOutcome: If the outcome probability is below 1e-14.
    """
    bits = _as_bits(outcome)
    if len(bits) != len(part.B):
        raise SizeMismatch(len(part.B), len(bits))
    if state.n != part.n:
        raise SizeMismatch(part.n, state.n)
    codes = _basis_codes(basis, len(part.B))
    n, nA = state.n, len(part.A)
    if isinstance(state, PureState):
        vec = rotate_outcomes(state.amplitudes, n, part.B, codes)
        block = split_matrix(vec, n, part.A, part.B)[:, bits_to_index(bits)]
        prob = float(np.vdot(block, block).real)
        if prob < ZERO_PROB:
            raise ZeroProbabilityOutcome("".join(map(str, bits)), prob)
        return prob, PureState(n=nA, amplitudes=block / np.sqrt(prob))
    tensor = rotate_density(state.tensor(), n, part.B, codes)
    order = list(part.A) + list(part.B)
    tensor = tensor.transpose(order + [n + q for q in order])
    mat = tensor.reshape(2**nA, 2 ** len(part.B), 2**nA, 2 ** len(part.B))
    z = bits_to_index(bits)
    sub = mat[:, z, :, z]
    prob = float(np.trace(sub).real)
    if prob < ZERO_PROB:
        raise ZeroProbabilityOutcome("".join(map(str, bits)), prob)
    sub = (sub + sub.conj().T) / (2 * prob)
    return prob, DensityState(n=nA, matrix=sub, check_psd=False)


def _basis_codes(basis: Union[str, Sequence[int], None], width: int) -> list[int]:
    if basis is None:
        return [0] * width
    codes = [basis_code(b) for b in basis] if isinstance(basis, str) else [int(b) for b in basis]
    if len(codes) != width:
        raise SizeMismatch(width, len(codes))
    return codes


def _gram_smaller(state: PureState, cut: Bipartition) -> np.ndarray:
    mat = split_matrix(state.amplitudes, state.n, cut.A, cut.B)
    if mat.shape[0] <= mat.shape[1]:
        return mat @ mat.conj().T
    return mat.conj().T @ mat


def schmidt_spectrum(state: PureState, cut: Bipartition) -> np.ndarray:
    """
    Squared Schmidt coefficients across A|B, sorted descending.

    Computed from the eigenvalues of the smaller reduced density matrix, so
    the result has 2^min(|A|, |B|) entries.
    """
    if state.n != cut.n:
        raise SizeMismatch(cut.n, state.n)
    evals = np.clip(np.linalg.eigvalsh(_gram_smaller(state, cut)), 0.0, 1.0)
    return evals[::-1].copy()


def entanglement_entropy(state: PureState, cut: Bipartition) -> float:
    """Von Neumann entropy of either side in bits."""
    lam = schmidt_spectrum(state, cut)
    lam = lam[lam > ZERO_PROB]
    return float(max(0.0, -np.sum(lam * np.log2(lam))))


def reduced_purity(state: PureState, keep: Iterable[int]) -> float:
    """tr(rho_keep^2) of a pure state."""
    cut = Bipartition.from_retained(keep, state.n)
    if not cut.A or not cut.B:
        return 1.0
    gram = _gram_smaller(state, cut)
    return float(np.real(np.vdot(gram, gram)))


def partial_trace(state: AnyState, keep: Sequence[int]) -> DensityState:
    """Reduced density matrix on the kept qubits, in the order given."""
    cut = Bipartition.from_retained(keep, state.n)
    nk = len(cut.A)
    if isinstance(state, PureState):
        mat = split_matrix(state.amplitudes, state.n, cut.A, cut.B)
        red = mat @ mat.conj().T
    else:
        n = state.n
        order = list(cut.A) + list(cut.B)
        t = state.tensor().transpose(order + [n + q for q in order])
        t = t.reshape(2**nk, 2 ** len(cut.B), 2**nk, 2 ** len(cut.B))
        red = np.einsum("ajbj->ab", t)
    red = (red + red.conj().T) / 2
    return DensityState(n=nk, matrix=red / np.trace(red).real, check_psd=False)


def state_fidelity(pure: PureState, state: AnyState) -> float:
    """<psi|rho|psi> for a pure reference, clipped to [0, 1]."""
    if pure.n != state.n:
        raise SizeMismatch(pure.n, state.n)
    if isinstance(state, PureState):
        value = abs(pure.overlap(state)) ** 2
    else:
        value = np.vdot(pure.amplitudes, state.matrix @ pure.amplitudes).real
    return float(np.clip(value, 0.0, 1.0))


def trace_distance(a: AnyState, b: AnyState) -> float:
    """Half the trace norm of a - b."""
    if a.n != b.n:
        raise SizeMismatch(a.n, b.n)
    if isinstance(a, PureState) and isinstance(b, PureState):
        return float(np.sqrt(max(0.0, 1.0 - abs(a.overlap(b)) ** 2)))
    diff = density(a).matrix - density(b).matrix
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


def measure_qubit(
    state: PureState, qubit: int, basis: str, rng: np.random.Generator
) -> tuple[str, PureState]:
    """
    Projectively measure one qubit in the X, Y or Z basis.

    Returns:
        (outcome label, normalized post-measurement state).
    """
    b = basis_code(basis)
    rotated = _apply_tensor(state.tensor(), MEAS[b], [qubit])
    probs = np.sum(np.abs(np.moveaxis(rotated, qubit, 0).reshape(2, -1)) ** 2, axis=1)
    probs = probs / probs.sum()
    bit = int(rng.choice(2, p=probs))
    proj = np.outer(KETS[2 * b + bit], KETS[2 * b + bit].conj())
    post = apply_matrix(state.amplitudes, proj, [qubit], state.n)
    return LABELS[2 * b + bit], PureState.from_vector(post)
