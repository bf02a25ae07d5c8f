"""
Fidelity oracles over free projected-state sets.

An oracle maps a pure projected state on the retained subsystem to its
maximal fidelity with the free set of the property being certified:
separable states across a cut, stabilizer states, or states whose
entanglement is capped by a circuit-depth bound. The complexity oracles only
provide upper bounds on that fidelity, which is all the witness needs.
"""

import json
import math
import threading
from abc import ABC, abstractmethod
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .errors import InvalidArgument, InvalidProbability, SizeMismatch, UnsupportedSize, ZeroGap
from .qstate import GATES, Bipartition, PureState, apply_matrix, entanglement_entropy, schmidt_spectrum
from .utils import cache_dir, setup_logging

MAX_STABILIZER_QUBITS = 3

logger = setup_logging()


def stabilizer_count(n: int) -> int:
    """Number of pure n-qubit stabilizer states, 2^n * prod_k (2^k + 1)."""
    return 2**n * math.prod(2**k + 1 for k in range(1, n + 1))


def separable_fidelity(phi: PureState, cut: Bipartition) -> float:
    """Largest squared Schmidt coefficient of phi across the cut."""
    return float(schmidt_spectrum(phi, cut)[0])


def thresholded_witness_weight(fid: float, t: float) -> float:
    """t + (1 - t) * 1[fid <= t]."""
    return 1.0 if fid <= t else t


def entanglement_cap_bound(e: float, w: int, cap: float) -> float:
    """
    Fidelity upper bound for states whose L|R entanglement is at most ``cap`` bits.

    Returns 1 - ((e - 1 - cap) / (4 w^2))^2 when e > cap + 1, else 1.0.
    """
    inner = (e - 1.0 - cap) / (4.0 * w * w)
    if inner <= 0.0:
        return 1.0
    return float(max(0.0, 1.0 - inner * inner))


def complexity_fidelity_bound(e: float, w: int, d: int) -> float:
    """
    Upper bound on the fidelity of a projected state with entanglement e
    to any projection of a depth-d state.

    Vacuous (1.0) unless e > 8wd + 1.
    """
    return entanglement_cap_bound(e, w, 8.0 * w * d)


def plikely_fidelity_bound(e: float, w: int, d: int, p_prime: float) -> float:
    """
    Fidelity bound against the p'-likely projections of depth-d
    measurement-assisted states, whose entanglement is at most 12wd/(1-p').

    Raises:
        InvalidProbability: Unless 0 < p_prime < 1.
    """
    if not 0.0 < p_prime < 1.0:
        raise InvalidProbability(p_prime)
    return entanglement_cap_bound(e, w, 12.0 * w * d / (1.0 - p_prime))


def witness_parameters(eta: float, c: float, p: float) -> tuple[float, float]:
    """
    Threshold t and likelihood level p' for the thresholded complexity witness.

    Args:
        eta: Ratio w / d.
        c: Entanglement fraction in the premise E_{L|R} >= c|L| + 1.
        p: Probability of that premise under the projected ensemble.

    Returns:
        (t, p_prime).

    Raises:
        ZeroGap: When eta * c * p <= 6, where no positive gap exists.
    """
    if not 0.0 <= p <= 1.0:
        raise InvalidProbability(p, "[0, 1]")
    if eta * c * p <= 6.0:
        raise ZeroGap(eta * c * p - 6.0)
    p_prime = 1.0 - (p + 6.0 / (eta * c)) / 2.0
    t = 1.0 - 0.25 * (c - 6.0 / (eta * (1.0 - p_prime))) ** 2
    return t, p_prime


class FidelityOracle(ABC):
    """Maximal fidelity (or an upper bound on it) over a free projected-state set."""

    kind: str = "abstract"

    @abstractmethod
    def __call__(self, phi: PureState) -> float:
        """Evaluate the oracle on a normalized pure state."""

    def many(self, vectors: np.ndarray) -> np.ndarray:
        """Evaluate on the rows of an (m, 2^n_A) array of normalized vectors."""
        return np.array([self(PureState(n=_nqubits(v.size), amplitudes=v)) for v in vectors])

    def describe(self) -> dict[str, Any]:
        """JSON-ready description used in reports."""
        return {"kind": self.kind}


def _nqubits(dim: int) -> int:
    return int(dim).bit_length() - 1


class SeparableOracle(FidelityOracle):
    """Separable free set across a cut of the retained subsystem."""

    kind = "separable"

    def __init__(self, left: Sequence[int], n_A: int) -> None:
        self.cut = Bipartition.from_retained(left, n_A)
        if not self.cut.A or not self.cut.B:
            raise InvalidArgument("cut", list(left), "both sides must be non-empty")

    def __call__(self, phi: PureState) -> float:
        if phi.n != self.cut.n:
            raise SizeMismatch(self.cut.n, phi.n)
        return separable_fidelity(phi, self.cut)

    def many(self, vectors: np.ndarray) -> np.ndarray:
        n = self.cut.n
        if vectors.shape[1] != 2**n:
            raise SizeMismatch(2**n, vectors.shape[1])
        order = list(self.cut.A) + list(self.cut.B)
        mats = vectors.reshape((-1,) + (2,) * n).transpose([0] + [q + 1 for q in order])
        mats = mats.reshape(len(vectors), 2 ** len(self.cut.A), 2 ** len(self.cut.B))
        sv = np.linalg.svd(mats, compute_uv=False)
        return np.clip(sv[:, 0] ** 2, 0.0, 1.0)

    def describe(self) -> dict[str, Any]:
        return {"kind": self.kind, "left": list(self.cut.A), "right": list(self.cut.B)}


@dataclass(frozen=True)
class StabilizerDictionary:
    """All pure stabilizer states on n qubits, one row per state."""

    n: int
    states: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return int(self.states.shape[0])


def _fingerprint(vec: np.ndarray) -> tuple[np.ndarray, bytes]:
    mags = np.abs(vec)
    lead = int(np.flatnonzero(mags >= mags.max() - 1e-9)[0])
    normalized = vec * (abs(vec[lead]) / vec[lead])
    rounded = np.round(np.concatenate([normalized.real, normalized.imag]), 9) + 0.0
    return normalized, rounded.tobytes()


def _generate_stabilizer_states(n: int) -> np.ndarray:
    """Orbit of |0...0> under H, S and CX, deduplicated up to global phase."""
    moves: list[tuple[np.ndarray, list[int]]] = []
    for q in range(n):
        moves.append((GATES["H"], [q]))
        moves.append((GATES["S"], [q]))
    for a in range(n):
        for b in range(n):
            if a != b:
                moves.append((GATES["CX"], [a, b]))
    start = np.zeros(2**n, dtype=complex)
    start[0] = 1.0
    vec, key = _fingerprint(start)
    seen = {key}
    found = [vec]
    queue = deque([vec])
    while queue:
        current = queue.popleft()
        for gate, targets in moves:
            vec, key = _fingerprint(apply_matrix(current, gate, targets, n))
            if key not in seen:
                seen.add(key)
                found.append(vec)
                queue.append(vec)
    return np.array(found)


class StabilizerDictionaryCache:
    """
    Process-wide store of stabilizer dictionaries backed by JSON files.

    The first caller for a given n builds (or loads) the dictionary under a
    lock; later callers get the same immutable object.
    """

    def __init__(self, directory: Optional[Path] = None) -> None:
        self.directory = directory
        self.logger = setup_logging()
        self._lock = threading.Lock()
        self._built: dict[int, StabilizerDictionary] = {}

    def path_for(self, n: int) -> Path:
        base = self.directory if self.directory is not None else cache_dir()
        return base / f"stabilizer_states_n{n}.json"

    def get(self, n: int) -> StabilizerDictionary:
        if n < 1 or n > MAX_STABILIZER_QUBITS:
            raise UnsupportedSize(n, MAX_STABILIZER_QUBITS)
        with self._lock:
            if n not in self._built:
                self._built[n] = self._load_or_build(n)
            return self._built[n]

    def clear(self) -> None:
        with self._lock:
            self._built.clear()

    def _load_or_build(self, n: int) -> StabilizerDictionary:
        path = self.path_for(n)
        expected = stabilizer_count(n)
        if path.exists():
            try:
                payload = json.loads(path.read_text(encoding="utf-8"))
                if payload.get("n") == n and payload.get("count") == expected:
                    raw = np.asarray(payload["states"], dtype=float)
                    states = raw[..., 0] + 1j * raw[..., 1]
                    if states.shape == (expected, 2**n):
                        self.logger.info("Stabilizer dictionary loaded", n=n, path=str(path))
                        return StabilizerDictionary(n=n, states=states)
                self.logger.warning("Stabilizer cache header mismatch, rebuilding", path=str(path))
            except (OSError, ValueError, KeyError) as e:
                self.logger.warning(
                    "Stabilizer cache unreadable, rebuilding",
                    path=str(path),
                    error=str(e),
                    error_type=type(e).__name__,
                )
        states = _generate_stabilizer_states(n)
        if len(states) != expected:
            raise RuntimeError(f"stabilizer enumeration found {len(states)} states, expected {expected}")
        self.logger.info("Stabilizer dictionary built", n=n, count=len(states))
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            payload = {
                "n": n,
                "count": len(states),
                "states": np.stack([states.real, states.imag], axis=-1).tolist(),
            }
            path.write_text(json.dumps(payload), encoding="utf-8")
        except OSError as e:
            self.logger.warning("Stabilizer cache not written", path=str(path), error=str(e))
        return StabilizerDictionary(n=n, states=states)


STABILIZER_CACHE = StabilizerDictionaryCache()


def enumerate_stabilizer_states(n: int) -> StabilizerDictionary:
    """Cached dictionary of every pure n-qubit stabilizer state (n <= 3)."""
    return STABILIZER_CACHE.get(n)


def stabilizer_fidelity(phi: PureState, dictionary: StabilizerDictionary) -> float:
    """Maximum of |<s|phi>|^2 over the dictionary."""
    if phi.n != dictionary.n:
        raise SizeMismatch(dictionary.n, phi.n)
    overlaps = dictionary.states.conj() @ phi.amplitudes
    return float(np.clip(np.max(np.abs(overlaps) ** 2), 0.0, 1.0))


class StabilizerOracle(FidelityOracle):
    """Stabilizer (magic-free) set on n_A <= 3 qubits."""

    kind = "stabilizer"

    def __init__(self, n_A: int) -> None:
        self.dictionary = enumerate_stabilizer_states(n_A)

    def __call__(self, phi: PureState) -> float:
        return stabilizer_fidelity(phi, self.dictionary)

    def many(self, vectors: np.ndarray) -> np.ndarray:
        if vectors.shape[1] != 2**self.dictionary.n:
            raise SizeMismatch(2**self.dictionary.n, vectors.shape[1])
        overlaps = np.abs(vectors @ self.dictionary.states.conj().T) ** 2
        return np.clip(overlaps.max(axis=1), 0.0, 1.0)

    def describe(self) -> dict[str, Any]:
        return {"kind": self.kind, "n_A": self.dictionary.n}


class EntanglementThresholdOracle(FidelityOracle):
    """
    Upper bound on fidelity to projections of low-depth states, from the
    L|R entanglement of the projected state.

    ``variant="unitary"`` caps entanglement at 8wd, ``"p-likely"`` at
    12wd/(1-p'). A smaller explicit cap is only accepted with
    ``unsound_toy=True``; with cap 0 the bound is also capped by the exact
    separable fidelity across L|R.
    """

    kind = "entanglement-threshold"

    def __init__(
        self,
        left: Sequence[int],
        n_A: int,
        w: int,
        d: int,
        variant: str = "unitary",
        p_prime: Optional[float] = None,
        cap_override: Optional[float] = None,
        unsound_toy: bool = False,
    ) -> None:
        self.cut = Bipartition.from_retained(left, n_A)
        self.w = w
        self.d = d
        self.variant = variant
        self.p_prime = p_prime
        self.unsound_toy = unsound_toy
        if variant == "unitary":
            cap = 8.0 * w * d
        elif variant == "p-likely":
            if p_prime is None or not 0.0 < p_prime < 1.0:
                raise InvalidProbability(p_prime if p_prime is not None else float("nan"))
            cap = 12.0 * w * d / (1.0 - p_prime)
        else:
            raise InvalidArgument("variant", variant, "expected 'unitary' or 'p-likely'")
        if cap_override is not None:
            if not unsound_toy:
                raise InvalidArgument("cap_override", cap_override, "requires unsound_toy")
            cap = float(cap_override)
        self.cap = cap

    def bound_from_entropy(self, e: float) -> float:
        return entanglement_cap_bound(e, self.w, self.cap)

    def __call__(self, phi: PureState) -> float:
        if phi.n != self.cut.n:
            raise SizeMismatch(self.cut.n, phi.n)
        bound = self.bound_from_entropy(entanglement_entropy(phi, self.cut))
        if self.cap == 0.0:
            bound = min(bound, separable_fidelity(phi, self.cut))
        return bound

    def describe(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "left": list(self.cut.A),
            "w": self.w,
            "d": self.d,
            "variant": self.variant,
            "p_prime": self.p_prime,
            "cap": self.cap,
            "unsound_toy": self.unsound_toy,
        }


class ExplicitBoundOracle(FidelityOracle):
    """Wraps a caller-supplied upper bound f(phi) in [0, 1]."""

    kind = "explicit-upper-bound"

    def __init__(self, bound: Callable[[PureState], float], name: str = "custom") -> None:
        self.bound = bound
        self.name = name

    def __call__(self, phi: PureState) -> float:
        return float(np.clip(self.bound(phi), 0.0, 1.0))

    def describe(self) -> dict[str, Any]:
        return {"kind": self.kind, "name": self.name}
