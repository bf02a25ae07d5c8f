"""
State and noise generators for localq-cert.

Haar unitaries, brickwork circuits with optional mid-circuit measurements,
uniformly random Clifford circuits, the magic-injection family, XXZ and
J1-J2 ground states, global depolarizing noise, and the lattice geometry used
by complexity certification.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Literal, Optional, Sequence, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from pydantic import BaseModel, ConfigDict, Field, computed_field

from .errors import (
    DegenerateGroundSpace,
    GeometryInvalid,
    InvalidArgument,
    InvalidProbability,
    UnsupportedSize,
)
from .qstate import (
    GATES,
    KETS,
    MAX_QUBITS,
    MEAS,
    BASES,
    Bipartition,
    DensityState,
    PureState,
    apply_matrix,
    product_state,
)
from .utils import setup_logging

MAX_CLIFFORD_QUBITS = 14
MAX_HAMILTONIAN_QUBITS = 14
DENSE_EIGH_LIMIT = 12
DENSE_NOISE_LIMIT = 10
DEGENERACY_TOL = 1e-8
MAX_LANCZOS_PAIRS = 32

logger = setup_logging()


# ---------------------------------------------------------------------------
# Haar sampling
# ---------------------------------------------------------------------------


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random dim x dim unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = scipy.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def haar_two_qubit_unitary(rng: np.random.Generator) -> np.ndarray:
    """Haar-random 4 x 4 unitary."""
    return haar_unitary(4, rng)


def haar_state(n: int, rng: np.random.Generator) -> PureState:
    """Haar-random pure state on n qubits."""
    vec = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    return PureState.from_vector(vec)


# ---------------------------------------------------------------------------
# Circuits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GateOp:
    """A gate on named or explicit matrix form acting on `qubits`."""

    qubits: tuple[int, ...]
    name: Optional[str] = None
    matrix: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def unitary(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        if self.name is None:
            raise InvalidArgument("gate", None, "needs a name or a matrix")
        return GATES[self.name]

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"qubits": list(self.qubits)}
        if self.matrix is not None:
            out["matrix"] = [[[float(v.real), float(v.imag)] for v in row] for row in self.matrix]
        else:
            out["name"] = self.name
        return out

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "GateOp":
        matrix = None
        if "matrix" in payload:
            matrix = np.array([[complex(re, im) for re, im in row] for row in payload["matrix"]])
        return cls(qubits=tuple(payload["qubits"]), name=payload.get("name"), matrix=matrix)


@dataclass(frozen=True)
class Layer:
    """
    Parallel gates on disjoint supports, then single-qubit measurements.

    ``feedforward`` maps the full measurement record so far (a bit string)
    to gates applied right after this layer's measurements.
    """

    gates: tuple[GateOp, ...] = ()
    measurements: tuple[tuple[int, str], ...] = ()
    feedforward: Optional[dict[str, tuple[GateOp, ...]]] = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "gates": [g.to_dict() for g in self.gates],
            "measurements": [[q, b] for q, b in self.measurements],
        }
        if self.feedforward is not None:
            out["feedforward"] = {k: [g.to_dict() for g in v] for k, v in self.feedforward.items()}
        return out

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "Layer":
        ff = payload.get("feedforward")
        return cls(
            gates=tuple(GateOp.from_dict(g) for g in payload.get("gates", [])),
            measurements=tuple((int(q), str(b)) for q, b in payload.get("measurements", [])),
            feedforward=(
                {k: tuple(GateOp.from_dict(g) for g in v) for k, v in ff.items()} if ff else None
            ),
        )


@dataclass(frozen=True)
class CircuitSpec:
    """Layered circuit on n qubits."""

    n: int
    layers: tuple[Layer, ...] = ()

    def __post_init__(self) -> None:
        seen_measurements = 0
        for index, layer in enumerate(self.layers):
            support: list[int] = []
            for gate in layer.gates:
                support.extend(gate.qubits)
            if len(support) != len(set(support)):
                raise InvalidArgument("layer", index, "gate supports overlap")
            measured = [q for q, _ in layer.measurements]
            if len(measured) != len(set(measured)):
                raise InvalidArgument("layer", index, "measured qubits overlap")
            seen_measurements += len(measured)
            if layer.feedforward is not None:
                missing = [
                    format(r, f"0{seen_measurements}b")
                    for r in range(2**seen_measurements)
                    if format(r, f"0{seen_measurements}b") not in layer.feedforward
                ]
                if missing:
                    raise InvalidArgument("feedforward", index, f"missing records {missing[:4]}")

    @property
    def depth(self) -> int:
        return len(self.layers)

    def gate_count(self) -> int:
        return sum(len(layer.gates) for layer in self.layers)

    def to_dict(self) -> dict[str, Any]:
        return {"n": self.n, "layers": [layer.to_dict() for layer in self.layers]}

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "CircuitSpec":
        return cls(n=int(payload["n"]), layers=tuple(Layer.from_dict(l) for l in payload["layers"]))


def _pairs_along(dims: Sequence[int], axis: int, parity: int) -> list[tuple[int, int]]:
    """Nearest-neighbour pairs (2x, 2x+1) (parity 0) or (2x-1, 2x) (parity 1) along an axis."""
    pairs: list[tuple[int, int]] = []
    for coord in np.ndindex(*dims):
        c = coord[axis]
        if c % 2 != parity or c + 1 >= dims[axis]:
            continue
        other = list(coord)
        other[axis] = c + 1
        pairs.append((_flat(coord, dims), _flat(tuple(other), dims)))
    return pairs


def _flat(coord: Sequence[int], dims: Sequence[int]) -> int:
    return int(np.ravel_multi_index(tuple(coord), tuple(dims)))


def brickwork_pairs(dims: Sequence[int], layer: int) -> list[tuple[int, int]]:
    """
    Qubit pairs coupled by brickwork layer `layer` (0-based).

    Layers cycle through the lattice axes two at a time: layer 2i couples
    coordinates (2x, 2x+1) along axis i, layer 2i+1 couples (2x-1, 2x).
    Boundaries are open.
    """
    axis = (layer // 2) % len(dims)
    return _pairs_along(dims, axis, layer % 2)


def brickwork_circuit(
    dims: Sequence[int],
    depth: int,
    rng: np.random.Generator,
    measure_prob: float = 0.0,
) -> CircuitSpec:
    """
    Brickwork circuit of Haar-random two-qubit gates.

    Args:
        dims: (m,) for a chain or (m, m) for a square lattice.
        depth: Number of gate layers; 0 gives the identity circuit.
        rng: Generator for gates (and measurement placement).
        measure_prob: Probability that each qubit is measured in Z after a
            layer, for measurement-assisted circuits.
    """
    if depth < 0:
        raise InvalidArgument("depth", depth, "must be >= 0")
    if len(dims) not in (1, 2):
        raise InvalidArgument("dims", list(dims), "only 1D and 2D lattices")
    n = int(np.prod(dims))
    layers = []
    for t in range(depth):
        gates = tuple(
            GateOp(qubits=pair, matrix=haar_two_qubit_unitary(rng))
            for pair in brickwork_pairs(dims, t)
        )
        measurements: tuple[tuple[int, str], ...] = ()
        if measure_prob > 0:
            chosen = np.flatnonzero(rng.random(n) < measure_prob)
            measurements = tuple((int(q), "Z") for q in chosen)
        layers.append(Layer(gates=gates, measurements=measurements))
    return CircuitSpec(n=n, layers=tuple(layers))


def run_circuit(
    spec: CircuitSpec, initial: PureState, rng: np.random.Generator
) -> tuple[PureState, list[int], float]:
    """
    Evolve a state through a circuit, sampling mid-circuit measurements.

    Returns:
        (final normalized state, measurement record, probability of that record).
    """
    if initial.n != spec.n:
        raise InvalidArgument("initial", initial.n, f"circuit acts on {spec.n} qubits")
    vec = np.array(initial.amplitudes)
    record: list[int] = []
    prob = 1.0
    for layer in spec.layers:
        for gate in layer.gates:
            vec = apply_matrix(vec, gate.unitary(), gate.qubits, spec.n)
        for q, basis in layer.measurements:
            b = BASES.index(basis.upper())
            rotated = apply_matrix(vec, MEAS[b], [q], spec.n).reshape((2,) * spec.n)
            p1 = float(np.sum(np.abs(np.take(rotated, 1, axis=q)) ** 2))
            bit = int(rng.random() < p1)
            p_bit = p1 if bit else 1.0 - p1
            ket = KETS[2 * b + bit]
            vec = apply_matrix(vec, np.outer(ket, ket.conj()), [q], spec.n) / np.sqrt(p_bit)
            record.append(bit)
            prob *= p_bit
        if layer.feedforward is not None:
            for gate in layer.feedforward["".join(map(str, record))]:
                vec = apply_matrix(vec, gate.unitary(), gate.qubits, spec.n)
    return PureState.from_vector(vec), record, prob


def circuit_state(spec: CircuitSpec, rng: np.random.Generator) -> PureState:
    """Run a circuit from |0...0> and return the final state."""
    state, _, _ = run_circuit(spec, PureState.zeros(spec.n), rng)
    return state


# ---------------------------------------------------------------------------
# Random Clifford circuits
# ---------------------------------------------------------------------------


def _symplectic_ip(u: np.ndarray, v: np.ndarray) -> int:
    return int(np.sum(u[0::2] * v[1::2] + u[1::2] * v[0::2]) % 2)


def _transvect(h: np.ndarray, v: np.ndarray) -> np.ndarray:
    return (v + _symplectic_ip(h, v) * h) % 2


def _find_transvection(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """h1, h2 with y = Z_h1 Z_h2 x; a zero vector is the identity transvection."""
    zero = np.zeros_like(x)
    if np.array_equal(x, y):
        return zero, zero.copy()
    if _symplectic_ip(x, y) == 1:
        return (x + y) % 2, zero
    z = np.zeros_like(x)
    for i in range(x.size // 2):
        a, b = 2 * i, 2 * i + 1
        if (x[a] | x[b]) and (y[a] | y[b]):
            z[a], z[b] = (x[a] + y[a]) % 2, (x[b] + y[b]) % 2
            if z[a] + z[b] == 0:
                z[b] = 1
                if x[a] != x[b]:
                    z[a] = 1
            return (x + z) % 2, (y + z) % 2
    for i in range(x.size // 2):
        a, b = 2 * i, 2 * i + 1
        if (x[a] | x[b]) and not (y[a] | y[b]):
            if x[a] == x[b]:
                z[b] = 1
            else:
                z[b], z[a] = x[a], x[b]
            break
    for i in range(x.size // 2):
        a, b = 2 * i, 2 * i + 1
        if not (x[a] | x[b]) and (y[a] | y[b]):
            if y[a] == y[b]:
                z[b] = 1
            else:
                z[b], z[a] = y[a], y[b]
            break
    return (x + z) % 2, (y + z) % 2


def _rotation_gates(h: np.ndarray, qubits: Sequence[int]) -> list[GateOp]:
    """Gates for exp(i pi/4 P_h), the Clifford realising transvection Z_h."""
    support = []
    for k, q in enumerate(qubits):
        x, z = int(h[2 * k]), int(h[2 * k + 1])
        if x or z:
            support.append((q, "X" if (x and not z) else "Z" if (z and not x) else "Y"))
    if not support:
        return []
    pre: list[GateOp] = []
    post: list[GateOp] = []
    for q, pauli in support:
        if pauli == "X":
            pre.append(GateOp(qubits=(q,), name="H"))
            post.append(GateOp(qubits=(q,), name="H"))
        elif pauli == "Y":
            pre.extend([GateOp(qubits=(q,), name="SDG"), GateOp(qubits=(q,), name="H")])
            post.extend([GateOp(qubits=(q,), name="H"), GateOp(qubits=(q,), name="S")])
    target = support[-1][0]
    chain = [GateOp(qubits=(q, target), name="CX") for q, _ in support[:-1]]
    return pre + chain + [GateOp(qubits=(target,), name="SDG")] + chain[::-1] + post


def _random_symplectic_gates(qubits: Sequence[int], rng: np.random.Generator) -> list[GateOp]:
    """Uniform symplectic map on `qubits` as a gate list, by the transvection recursion."""
    n = len(qubits)
    nn = 2 * n
    f1 = np.zeros(nn, dtype=np.int64)
    while not f1.any():
        f1 = rng.integers(0, 2, size=nn)
    e1 = np.zeros(nn, dtype=np.int64)
    e1[0] = 1
    t0, t1 = _find_transvection(e1, f1)
    bits = rng.integers(0, 2, size=nn - 1)
    eprime = e1.copy()
    eprime[2:] = bits[1:]
    h0 = _transvect(t1, _transvect(t0, eprime))
    if bits[0] == 1:
        f1 = np.zeros(nn, dtype=np.int64)
    gates = _random_symplectic_gates(qubits[1:], rng) if n > 1 else []
    for h in (t0, t1, h0, f1):
        gates.extend(_rotation_gates(h, qubits))
    return gates


def _pack_layers(n: int, gates: Sequence[GateOp]) -> tuple[Layer, ...]:
    """Greedy as-soon-as-possible packing into layers with disjoint supports."""
    frontier = [0] * n
    buckets: list[list[GateOp]] = []
    for gate in gates:
        slot = max(frontier[q] for q in gate.qubits)
        if slot == len(buckets):
            buckets.append([])
        buckets[slot].append(gate)
        for q in gate.qubits:
            frontier[q] = slot + 1
    return tuple(Layer(gates=tuple(b)) for b in buckets)


def random_clifford_unitary(n: int, rng: np.random.Generator) -> CircuitSpec:
    """
    Uniformly random n-qubit Clifford as an H/S/SDG/CX/Pauli circuit.

    Raises:
        UnsupportedSize: For n < 1 or n > 14.
    """
    if n < 1 or n > MAX_CLIFFORD_QUBITS:
        raise UnsupportedSize(n, MAX_CLIFFORD_QUBITS)
    gates = _random_symplectic_gates(list(range(n)), rng)
    for q, p in enumerate(rng.integers(0, 4, size=n)):
        if p:
            gates.append(GateOp(qubits=(q,), name="IXYZ"[int(p)]))
    return CircuitSpec(n=n, layers=_pack_layers(n, gates))


def clifford_matrix(spec: CircuitSpec) -> np.ndarray:
    """Dense unitary of a measurement-free circuit (small n only)."""
    if spec.n > 8:
        raise UnsupportedSize(spec.n, 8)
    dim = 2**spec.n
    cols = []
    for j in range(dim):
        vec = np.zeros(dim, dtype=complex)
        vec[j] = 1.0
        for layer in spec.layers:
            for gate in layer.gates:
                vec = apply_matrix(vec, gate.unitary(), gate.qubits, spec.n)
        cols.append(vec)
    return np.stack(cols, axis=1)


# ---------------------------------------------------------------------------
# Magic injection and noise
# ---------------------------------------------------------------------------


def rz(alpha: float) -> np.ndarray:
    """R_Z(alpha) = exp(-i alpha Z / 2)."""
    return np.diag([np.exp(-0.5j * alpha), np.exp(0.5j * alpha)])


def magic_injection_state(
    n: int,
    alpha: float,
    rng: np.random.Generator,
    clifford: Optional[CircuitSpec] = None,
) -> PureState:
    """
    C [R_Z(alpha)|+>]^{(x)n} for a uniformly random Clifford C.

    Args:
        n: Qubit count.
        alpha: Injection angle in [0, pi/4].
        rng: Generator for the Clifford.
        clifford: Optional fixed Clifford circuit instead of a sampled one.
    """
    if not 0.0 <= alpha <= math.pi / 4 + 1e-12:
        raise InvalidArgument("alpha", alpha, "must lie in [0, pi/4]")
    single = rz(alpha) @ KETS[2]
    state = product_state([single] * n)
    circuit = clifford if clifford is not None else random_clifford_unitary(n, rng)
    out, _, _ = run_circuit(circuit, state, rng)
    return out


@dataclass(frozen=True)
class DepolarizedMixture:
    """(1-p) psi + p I/2^n kept as a two-branch mixture for large n."""

    psi: PureState
    p: float

    @property
    def n(self) -> int:
        return self.psi.n

    def fidelity(self) -> float:
        return (1.0 - self.p) + self.p / 2**self.n


def depolarize(
    psi: PureState, p: float, dense_limit: int = DENSE_NOISE_LIMIT
) -> Union[DensityState, DepolarizedMixture]:
    """
    Global depolarizing channel (1-p) psi + p I / 2^n.

    Returns a DensityState for n <= dense_limit, else a DepolarizedMixture.
    """
    if not 0.0 <= p <= 1.0:
        raise InvalidProbability(p, "[0, 1]")
    if psi.n > dense_limit:
        return DepolarizedMixture(psi=psi, p=p)
    dim = 2**psi.n
    mat = (1.0 - p) * np.outer(psi.amplitudes, psi.amplitudes.conj()) + p * np.eye(dim) / dim
    return DensityState(n=psi.n, matrix=mat, check_psd=False)


def depolarized_purity(n: int, p: float) -> float:
    """Closed form tr(rho^2) = (1-p)^2 + (2p(1-p) + p^2) / 2^n."""
    return (1.0 - p) ** 2 + (2.0 * p * (1.0 - p) + p * p) / 2**n


# ---------------------------------------------------------------------------
# Spin-chain Hamiltonians
# ---------------------------------------------------------------------------

_SX = sp.csr_matrix(np.array([[0, 1], [1, 0]], dtype=float))
_SY = sp.csr_matrix(np.array([[0, -1j], [1j, 0]], dtype=complex))
_SZ = sp.csr_matrix(np.array([[1, 0], [0, -1]], dtype=float))


def _two_site(op: sp.csr_matrix, i: int, j: int, n: int) -> sp.csr_matrix:
    factors = [op if k in (i, j) else sp.identity(2, format="csr") for k in range(n)]
    out = factors[0]
    for f in factors[1:]:
        out = sp.kron(out, f, format="csr")
    return out


def _bond(i: int, j: int, n: int, jx: float, jy: float, jz: float) -> sp.csr_matrix:
    term = jx * _two_site(_SX, i, j, n) + jz * _two_site(_SZ, i, j, n)
    term = term + jy * _two_site(_SY, i, j, n).real
    return term


def xxz_hamiltonian(n: int, anisotropy: float) -> sp.csr_matrix:
    """H = -sum_i [X_i X_{i+1} + Y_i Y_{i+1} + anisotropy Z_i Z_{i+1}], periodic."""
    if n < 2 or n > MAX_HAMILTONIAN_QUBITS:
        raise UnsupportedSize(n, MAX_HAMILTONIAN_QUBITS)
    H = sp.csr_matrix((2**n, 2**n))
    for i in range(n):
        H = H - _bond(i, (i + 1) % n, n, 1.0, 1.0, anisotropy)
    return H.tocsr()


def j1j2_hamiltonian(n: int, J2: float, J1: float = 1.0) -> sp.csr_matrix:
    """H = J1 sum s_i . s_{i+1} + J2 sum s_i . s_{i+2} with Pauli vectors, periodic."""
    if n < 4 or n > MAX_HAMILTONIAN_QUBITS or n % 2:
        raise UnsupportedSize(n, MAX_HAMILTONIAN_QUBITS)
    H = sp.csr_matrix((2**n, 2**n))
    for i in range(n):
        H = H + J1 * _bond(i, (i + 1) % n, n, 1.0, 1.0, 1.0)
        H = H + J2 * _bond(i, (i + 2) % n, n, 1.0, 1.0, 1.0)
    return H.tocsr()


@dataclass(frozen=True)
class GroundSpace:
    """Lowest eigenpairs of a Hamiltonian with the detected ground-space basis."""

    energies: np.ndarray
    basis: tuple[PureState, ...]
    residual: float

    @property
    def degenerate(self) -> bool:
        return len(self.basis) > 1


def _localized_basis(vectors: np.ndarray) -> np.ndarray:
    """Rotate a degenerate eigenbasis toward computational-basis pivots, then orthonormalize."""
    g = vectors.shape[1]
    _, _, piv = scipy.linalg.qr(vectors.conj().T, pivoting=True)
    local = vectors @ np.linalg.inv(vectors[piv[:g], :])
    q, _ = np.linalg.qr(local)
    return q


def lowest_eigenspace(H: sp.csr_matrix, n: int, k: int = 4) -> GroundSpace:
    """
    Ground space of a sparse Hermitian matrix.

    Dense eigh for n <= 12, Lanczos (eigsh, k >= 3 pairs) beyond. The Lanczos
    window doubles while every returned pair is degenerate, up to 32 pairs.
    """
    if n <= DENSE_EIGH_LIMIT:
        evals, evecs = np.linalg.eigh(H.toarray())
        g = int(np.sum(evals - evals[0] < DEGENERACY_TOL))
    else:
        # seeded generic start; |+>^n is an exact eigenvector at anisotropy 1
        v0 = np.random.default_rng(0).standard_normal(H.shape[0])
        k = max(3, k)
        while True:
            evals, evecs = spla.eigsh(H, k=k, which="SA", tol=1e-12, v0=v0)
            order = np.argsort(evals)
            evals, evecs = evals[order], evecs[:, order]
            g = int(np.sum(evals - evals[0] < DEGENERACY_TOL))
            if g < k or k >= MAX_LANCZOS_PAIRS:
                break
            k = min(2 * k, MAX_LANCZOS_PAIRS)
        if g == k:
            logger.warning("Ground-space degeneracy may exceed the Lanczos window", n=n, pairs=k)
    basis = evecs[:, :g]
    if g > 1:
        basis = _localized_basis(basis)
    residual = max(
        float(np.linalg.norm(H @ basis[:, j] - evals[0] * basis[:, j])) for j in range(g)
    )
    states = tuple(PureState.from_vector(basis[:, j]) for j in range(g))
    return GroundSpace(energies=evals[: max(g + 1, 2)], basis=states, residual=residual)


def xxz_ground_state(n: int, anisotropy: float) -> PureState:
    """
    Unique ground state of the periodic XXZ chain.

    Raises:
        DegenerateGroundSpace: With an orthonormal basis when degenerate.
    """
    space = lowest_eigenspace(xxz_hamiltonian(n, anisotropy), n)
    logger.info(
        "XXZ ground space", n=n, anisotropy=anisotropy, degeneracy=len(space.basis),
        energy=float(space.energies[0]), residual=space.residual,
    )
    if space.degenerate:
        raise DegenerateGroundSpace(space.energies[: len(space.basis)], space.basis)
    return space.basis[0]


def dimer_state(n: int, offset: int) -> PureState:
    """Product of singlets on bonds (offset + 2k, offset + 2k + 1) mod n."""
    vec = np.ones(1, dtype=complex)
    singlet = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2.0)
    for _ in range(n // 2):
        vec = np.kron(vec, singlet)
    psi = vec.reshape((2,) * n)
    if offset % 2:
        psi = np.moveaxis(psi, list(range(n)), [(q + 1) % n for q in range(n)])
    return PureState.from_vector(psi.reshape(-1))


def j1j2_ground_state(n: int, J2: float) -> PureState:
    """
    Ground state of the periodic J1-J2 chain with J1 = 1.

    Raises:
        DegenerateGroundSpace: When degenerate; at the Majumdar-Ghosh point the
            error's ``representatives`` hold the two dimer states.
    """
    space = lowest_eigenspace(j1j2_hamiltonian(n, J2), n)
    logger.info(
        "J1-J2 ground space", n=n, J2=J2, degeneracy=len(space.basis),
        energy=float(space.energies[0]), residual=space.residual,
    )
    if not space.degenerate:
        return space.basis[0]
    basis = np.stack([s.amplitudes for s in space.basis], axis=1)
    dimers = [dimer_state(n, 0), dimer_state(n, 1)]
    inside = [float(np.linalg.norm(basis.conj().T @ d.amplitudes)) for d in dimers]
    representatives = dimers if all(abs(v - 1.0) < 1e-6 for v in inside) else None
    raise DegenerateGroundSpace(space.energies[: len(space.basis)], space.basis, representatives)


# ---------------------------------------------------------------------------
# Lattice geometry for complexity certification
# ---------------------------------------------------------------------------


class LatticeGeometry(BaseModel):
    """
    Retained block A (2w x 2w square, or length-2w segment in 1D) centred in
    the lattice, split into left half L and right half R. L1 / R1 are the
    qubits of L / R within lattice distance d of B; L2 / R2 the rest.
    """

    model_config = ConfigDict(frozen=True)

    dims: tuple[int, ...] = Field(..., description="(m,) or (m, m)")
    w: int = Field(..., ge=1)
    d: int = Field(..., ge=1)
    A: tuple[int, ...]
    L: tuple[int, ...]
    R: tuple[int, ...]
    L1: tuple[int, ...]
    L2: tuple[int, ...]
    R1: tuple[int, ...]
    R2: tuple[int, ...]

    @computed_field  # type: ignore[prop-decorator]
    @property
    def n(self) -> int:
        return int(np.prod(self.dims))

    @classmethod
    def build(cls, dims: Sequence[int], w: int, d: int) -> "LatticeGeometry":
        """
        Construct the partition.

        Raises:
            GeometryInvalid: If A does not fit with a non-empty B, or the
                lattice exceeds the simulator's qubit ceiling.
        """
        dims = tuple(int(m) for m in dims)
        if len(dims) not in (1, 2) or (len(dims) == 2 and dims[0] != dims[1]):
            raise GeometryInvalid(f"dims must be (m,) or (m, m), got {dims}")
        if w < 1 or d < 1:
            raise GeometryInvalid(f"w and d must be positive, got w={w}, d={d}")
        side = 2 * w
        a_size = side ** len(dims)
        if a_size > MAX_QUBITS:
            raise GeometryInvalid(
                f"region A needs {a_size} qubits (2w={side} per side) but the simulator "
                f"holds at most {MAX_QUBITS}"
            )
        m = dims[0]
        if side >= m:
            raise GeometryInvalid(f"A (side {side}) must leave measured qubits in a lattice of side {m}")
        n = int(np.prod(dims))
        if n > MAX_QUBITS:
            raise GeometryInvalid(f"lattice has {n} qubits, simulator holds at most {MAX_QUBITS}")
        off = (m - side) // 2
        coords = list(np.ndindex(*dims))
        in_a = {c for c in coords if all(off <= x < off + side for x in c)}
        col = len(dims) - 1
        b_coords = [c for c in coords if c not in in_a]

        def dist(c: tuple[int, ...]) -> int:
            return min(sum(abs(a - b) for a, b in zip(c, bc)) for bc in b_coords)

        left = sorted(c for c in in_a if c[col] < off + w)
        right = sorted(c for c in in_a if c[col] >= off + w)
        flat = lambda cs: tuple(_flat(c, dims) for c in cs)  # noqa: E731
        return cls(
            dims=dims,
            w=w,
            d=d,
            A=flat(left) + flat(right),
            L=flat(left),
            R=flat(right),
            L1=flat([c for c in left if dist(c) <= d]),
            L2=flat([c for c in left if dist(c) > d]),
            R1=flat([c for c in right if dist(c) <= d]),
            R2=flat([c for c in right if dist(c) > d]),
        )

    def partition(self) -> Bipartition:
        """Bipartition with A ordered L then R."""
        return Bipartition.from_retained(self.A, self.n)

    def left_positions(self) -> list[int]:
        """Positions of L inside projected states on A."""
        return list(range(len(self.L)))


def eta_geometry(eta: float, d: int, dims: Optional[Sequence[int]] = None) -> LatticeGeometry:
    """Geometry with w = eta * d; the lattice defaults to the smallest square holding A plus a ring."""
    w = int(round(eta * d))
    if dims is None:
        dims = (2 * w + 2, 2 * w + 2)
    return LatticeGeometry.build(dims, w, d)


# ---------------------------------------------------------------------------
# Named states
# ---------------------------------------------------------------------------


def ghz_state(n: int) -> PureState:
    """(|0...0> + |1...1>)/sqrt(2)."""
    vec = np.zeros(2**n, dtype=complex)
    vec[0] = vec[-1] = 1.0
    return PureState.from_vector(vec)


def bell_state(extra_zeros: int = 0) -> PureState:
    """Bell pair on qubits 0, 1 followed by |0> on the remaining qubits."""
    return ghz_state(2).kron(PureState.zeros(extra_zeros)) if extra_zeros else ghz_state(2)


def cluster_state(n: int) -> PureState:
    """1D open-boundary cluster state: CZ on neighbours applied to |+>^n."""
    idx = np.arange(2**n)
    bits = (idx[:, None] >> np.arange(n - 1, -1, -1)) & 1
    parity = np.sum(bits[:, :-1] * bits[:, 1:], axis=1) % 2
    return PureState.from_vector(np.where(parity, -1.0, 1.0).astype(complex))


def orthogonal_state(psi: PureState, rng: np.random.Generator) -> PureState:
    """Random pure state orthogonal to psi, by one Gram-Schmidt step."""
    vec = rng.standard_normal(2**psi.n) + 1j * rng.standard_normal(2**psi.n)
    vec = vec - np.vdot(psi.amplitudes, vec) * psi.amplitudes
    return PureState.from_vector(vec)
