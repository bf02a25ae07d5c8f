"""
Exception hierarchy for localq-cert.

Every failure raised by the toolkit derives from LocqError and carries the
values that triggered it as attributes, so the CLI can log them as structured
fields.
"""

from typing import Any, Optional, Sequence


class LocqError(Exception):
    """Root of all toolkit errors."""

    def context(self) -> dict[str, Any]:
        """Return the structured fields attached to this error."""
        return {k: v for k, v in vars(self).items() if not k.startswith("_")}


class ConfigError(LocqError):
    """Configuration file could not be read or validated."""

    def __init__(self, path: str, key: str, detail: str) -> None:
        self.path = path
        self.key = key
        self.detail = detail
        super().__init__(f"{path}: {key or '<root>'}: {detail}")


class ZeroProbabilityOutcome(LocqError):
    """Measurement outcome has (numerically) zero probability."""

    def __init__(self, outcome: str, probability: float) -> None:
        self.outcome = outcome
        self.probability = probability
        super().__init__(f"outcome {outcome!r} has probability {probability:.3e}")


class NonUnitaryGate(LocqError):
    """Gate matrix is not unitary within tolerance."""

    def __init__(self, deviation: float) -> None:
        self.deviation = deviation
        super().__init__(f"gate deviates from unitarity by {deviation:.3e}")


class TooLargeToEnumerate(LocqError):
    """Exact enumeration requested beyond the enumeration ceiling."""

    def __init__(self, size: int, limit: int, what: str = "outcomes") -> None:
        self.size = size
        self.limit = limit
        self.what = what
        super().__init__(f"cannot enumerate {size} {what} (limit {limit})")


class UnsupportedSize(LocqError):
    """Qubit count outside the supported range of an operation."""

    def __init__(self, n: int, limit: int) -> None:
        self.n = n
        self.limit = limit
        super().__init__(f"n={n} is not supported (limit {limit})")


class TooLarge(LocqError):
    """Operator would exceed the dense materialization ceiling."""

    def __init__(self, n: int, limit: int) -> None:
        self.n = n
        self.limit = limit
        super().__init__(f"n={n} exceeds the dense-operator limit {limit}")


class SizeMismatch(LocqError, ValueError):
    """Two objects that must agree in qubit count or length do not."""

    def __init__(self, expected: int, actual: int) -> None:
        self.expected = expected
        self.actual = actual
        super().__init__(f"expected size {expected}, got {actual}")


class LengthMismatch(LocqError, ValueError):
    """Sample list length does not match the block layout."""

    def __init__(self, expected: int, actual: int) -> None:
        self.expected = expected
        self.actual = actual
        super().__init__(f"expected {expected} values, got {actual}")


class InvalidProbability(LocqError, ValueError):
    """Probability parameter outside its admissible interval."""

    def __init__(self, value: float, interval: str = "(0, 1)") -> None:
        self.value = value
        self.interval = interval
        super().__init__(f"probability {value} not in {interval}")


class InvalidArgument(LocqError, ValueError):
    """Numeric argument outside its admissible range."""

    def __init__(self, name: str, value: Any, reason: str = "") -> None:
        self.name = name
        self.value = value
        self.reason = reason
        suffix = f" ({reason})" if reason else ""
        super().__init__(f"invalid {name}={value!r}{suffix}")


class ZeroGap(LocqError):
    """Certification gap is not positive, so no threshold separates the hypotheses."""

    def __init__(self, gap: float, pair: Optional[tuple[int, int]] = None) -> None:
        self.gap = gap
        self.pair = pair
        where = f" for pair {pair}" if pair is not None else ""
        super().__init__(f"gap {gap:.3e} is not positive{where}")


class GeometryInvalid(LocqError):
    """Lattice partition is malformed or exceeds the simulator."""

    def __init__(self, reason: str) -> None:
        self.reason = reason
        super().__init__(reason)


class DegenerateGroundSpace(LocqError):
    """Ground space is degenerate; carries an orthonormal basis of it."""

    def __init__(
        self,
        energies: Sequence[float],
        basis: Sequence[Any],
        representatives: Optional[Sequence[Any]] = None,
    ) -> None:
        self.energies = list(energies)
        self.basis = list(basis)
        self.representatives = list(representatives) if representatives is not None else None
        super().__init__(
            f"{len(self.basis)}-fold degenerate ground space at E={self.energies[0]:.10f}"
        )

    def context(self) -> dict[str, Any]:
        return {"energies": self.energies, "degeneracy": len(self.basis)}
