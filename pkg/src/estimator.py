"""
Statistics layer for localq-cert.

Single-copy local-shadow estimates of projected-state fidelities, the
median-of-means aggregator, sample-size formulas, and exact conditional
fidelity for validation at enumerable sizes.
"""

import math
from typing import Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .ensemble import (
    MAX_ENUMERATE_B,
    MAX_RANDOM_EXACT_B,
    BasisAssignment,
    all_basis_codes,
    branch_blocks,
    branch_matrix,
    normalized_branches,
)
from .errors import InvalidArgument, LengthMismatch, SizeMismatch, TooLargeToEnumerate, ZeroGap
from .freeset import FidelityOracle
from .qstate import SHADOW_FACTORS, ZERO_PROB, AnyState, Bipartition, PureState, decode_label

# Slack under which a ceiling argument is treated as an integer (float noise in ln / division).
_CEIL_SLACK = 1e-9


def _ceil(value: float) -> int:
    return max(1, math.ceil(value - _CEIL_SLACK))


class MoMParameters(BaseModel):
    """Median-of-means layout: K blocks of B samples each."""

    model_config = ConfigDict(frozen=True)

    B: int = Field(..., ge=1, description="Block size")
    K: int = Field(..., ge=1, description="Block count")

    @property
    def T(self) -> int:
        """Total sample count B * K."""
        return self.B * self.K


def variance_bound(n_A: int) -> float:
    """Worst-case variance 4^n_A + 1 of one shadow fidelity estimate."""
    return 4.0**n_A + 1.0


def shadow_fidelity_estimate(target_proj: PureState, x: Union[str, Sequence[int]]) -> float:
    """
    <psi| (x)_j (3|x_j><x_j| - I) |psi> for one local-Pauli outcome string.

    Args:
        target_proj: Projected target state on A.
        x: Outcome label string or outcome codes, qubit 0 first.

    Raises:
        SizeMismatch: If the outcome length differs from the state's qubit count.
    """
    codes = decode_label(x) if isinstance(x, str) else [int(c) for c in x]
    if len(codes) != target_proj.n:
        raise SizeMismatch(target_proj.n, len(codes))
    psi = target_proj.tensor()
    out = psi
    for q, c in enumerate(codes):
        out = np.moveaxis(np.tensordot(SHADOW_FACTORS[c], out, axes=([1], [q])), 0, q)
    return float(np.real(np.vdot(psi, out)))


def shadow_table(vec: np.ndarray, n_A: int) -> np.ndarray:
    """
    Shadow estimates of one projected state for all 6^n_A outcome strings.

    Entry ``sum_j codes[j] * 6^(n_A-1-j)`` holds the estimate for ``codes``.
    A zero vector yields a zero table.
    """
    k = n_A
    r = np.multiply.outer(vec.conj(), vec).reshape((2,) * (2 * k))
    for j in range(k):
        r = np.tensordot(SHADOW_FACTORS, r, axes=([1, 2], [j, k]))
    return np.real(r.transpose(list(range(k - 1, -1, -1)))).reshape(-1)


def median_of_means(values: Sequence[float], params: MoMParameters) -> float:
    """
    Median of K consecutive block means of size B.

    For even K the lower-middle block mean (order statistic ceil(K/2)) is used.

    Raises:
        LengthMismatch: If len(values) != B * K.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size != params.T:
        raise LengthMismatch(params.T, arr.size)
    means = np.sort(arr.reshape(params.K, params.B).mean(axis=1))
    return float(means[math.ceil(params.K / 2) - 1])


def mom_parameters(sigma2: float, epsilon: float, delta: float) -> MoMParameters:
    """
    Block layout achieving accuracy epsilon with failure probability delta.

    B = ceil(6 sigma^2 / epsilon^2), K = ceil(4.5 ln(1/delta)), both at least 1.

    Raises:
        InvalidArgument: Unless sigma2 > 0, epsilon > 0 and 0 < delta < 1.
    """
    if sigma2 <= 0:
        raise InvalidArgument("sigma2", sigma2, "must be positive")
    if epsilon <= 0:
        raise InvalidArgument("epsilon", epsilon, "must be positive")
    if not 0 < delta < 1:
        raise InvalidArgument("delta", delta, "must lie in (0, 1)")
    return MoMParameters(B=_ceil(6.0 * sigma2 / epsilon**2), K=_ceil(4.5 * math.log(1.0 / delta)))


def protocol_sample_size(LQ: float, delta: float, n_A: int) -> int:
    """
    T = ceil(243 ln(1/delta) (4^n_A + 1) / LQ^2).

    Raises:
        ZeroGap: If LQ <= 0.
    """
    if LQ <= 0:
        raise ZeroGap(LQ)
    if not 0 < delta < 1:
        raise InvalidArgument("delta", delta, "must lie in (0, 1)")
    return _ceil(243.0 * math.log(1.0 / delta) * variance_bound(n_A) / LQ**2)


def fidelity_sample_size(gap: float, F: float, c: float, delta: float, n_A: int) -> int:
    """T = ceil(27 ln(1/delta) (4^n_A + 1) / (c^2 gap^2 (1 - F)^2))."""
    if gap <= 0:
        raise ZeroGap(gap)
    return _ceil(27.0 * math.log(1.0 / delta) * variance_bound(n_A) / (c * gap * (1.0 - F)) ** 2)


def witness_mom_parameters(
    gap: float, delta: float, n_A: int, sigma2: Optional[float] = None
) -> MoMParameters:
    """
    MoM layout for resolving a witness gap at accuracy gap / 3.

    Uses the worst-case variance unless an empirical sigma2 is supplied.
    """
    if gap <= 0:
        raise ZeroGap(gap)
    s2 = variance_bound(n_A) if sigma2 is None else max(sigma2, 1e-12)
    return mom_parameters(s2, gap / 3.0, delta)


def exact_conditional_fidelity(
    rho: AnyState,
    psi: PureState,
    part: Bipartition,
    oracle: Optional[FidelityOracle],
    basis: Union[BasisAssignment, str] = "fixed-z",
    weights: Optional[np.ndarray] = None,
) -> float:
    """
    eta_psi(rho) = sum_z p_rho(z) [tr(psi_z rho_z) - Fid_P(psi_z)], by enumeration.

    Outcomes where the target has zero probability contribute nothing. In
    random mode the value is averaged over all 3^|B| basis strings.

    Args:
        rho: Experimental state.
        psi: Target state.
        part: Bipartition.
        oracle: Free-set oracle for the offsets; None means offset 0.
        basis: "fixed-z", "random", or an explicit assignment.
        weights: Optional per-outcome multipliers (fixed basis only) applied to
            the overlap term, used by thresholded witnesses.

    Raises:
        TooLargeToEnumerate: Past the enumeration ceilings.
    """
    if rho.n != psi.n or psi.n != part.n:
        raise SizeMismatch(part.n, rho.n)
    assignment = BasisAssignment.coerce(basis)
    nB = len(part.B)
    if assignment.mode == "random" and assignment.bases is None:
        if nB > MAX_RANDOM_EXACT_B:
            raise TooLargeToEnumerate(3**nB, 3**MAX_RANDOM_EXACT_B, what="basis strings")
        values = [_conditional_term(rho, psi, part, oracle, list(c), None) for c in all_basis_codes(nB)]
        return float(np.mean(values))
    if nB > MAX_ENUMERATE_B:
        raise TooLargeToEnumerate(2**nB, 2**MAX_ENUMERATE_B)
    return _conditional_term(rho, psi, part, oracle, assignment.codes(nB), weights)


def _conditional_term(
    rho: AnyState,
    psi: PureState,
    part: Bipartition,
    oracle: Optional[FidelityOracle],
    codes: list[int],
    weights: Optional[np.ndarray],
) -> float:
    probs_psi, states = normalized_branches(psi, part, codes)
    live = probs_psi >= ZERO_PROB
    if isinstance(rho, PureState):
        cols = branch_matrix(rho, part, codes)
        p_rho = np.sum(np.abs(cols) ** 2, axis=0)
        overlap = np.abs(np.einsum("za,az->z", states.conj(), cols)) ** 2
    else:
        blocks = branch_blocks(rho, part, codes)
        p_rho = np.real(np.einsum("zaa->z", blocks))
        overlap = np.real(np.einsum("za,zab,zb->z", states.conj(), blocks, states))
    fids = np.zeros(states.shape[0])
    if oracle is not None and live.any():
        fids[live] = oracle.many(states[live])
    w = np.ones_like(fids) if weights is None else np.asarray(weights, dtype=float)
    terms = w * overlap - p_rho * fids
    return float(np.sum(terms[live]))


def empirical_sample_size(values: np.ndarray, accuracy: float, delta: float) -> int:
    """T implied by plugging the sample variance of realised estimates into MoM."""
    sigma2 = float(np.var(values, ddof=1)) if len(values) > 1 else 0.0
    if sigma2 <= 0:
        return mom_parameters(1e-12, accuracy, delta).K
    return mom_parameters(sigma2, accuracy, delta).T
