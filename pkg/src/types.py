"""
Type definitions for localq-cert.

This module contains Pydantic models for experiment configs, state
descriptions, trial records and certification reports.
"""

import json
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    TypeAdapter,
    ValidationError,
    computed_field,
    field_validator,
    model_validator,
)

from .errors import ConfigError

SCHEMA_VERSION = 1


class StrictModel(BaseModel):
    """Base for config models: unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid")


# ---------------------------------------------------------------------------
# State descriptions
# ---------------------------------------------------------------------------


class BellSpec(StrictModel):
    """(|00> + |11>)/sqrt(2) followed by `extra_zeros` qubits in |0>."""

    family: Literal["bell"] = "bell"
    extra_zeros: int = Field(default=0, ge=0, le=14, description="Trailing |0> qubits")


class GHZSpec(StrictModel):
    """(|0...0> + |1...1>)/sqrt(2)."""

    family: Literal["ghz"] = "ghz"
    n: int = Field(..., ge=2, le=16)


class ClusterSpec(StrictModel):
    """1D open-boundary cluster state."""

    family: Literal["cluster"] = "cluster"
    n: int = Field(..., ge=2, le=16)


class ProductSpec(StrictModel):
    """Product of Pauli eigenstates given as a label such as "0+1-i"."""

    family: Literal["product"] = "product"
    label: str = Field(..., min_length=1, description="Outcome label, qubit 0 first")


class HaarSpec(StrictModel):
    """Haar-random pure state drawn from the target stream."""

    family: Literal["haar"] = "haar"
    n: int = Field(..., ge=1, le=16)


class BrickworkSpec(StrictModel):
    """Brickwork circuit of Haar two-qubit gates applied to |0...0>."""

    family: Literal["brickwork"] = "brickwork"
    dims: list[int] = Field(..., min_length=1, max_length=2)
    depth: int = Field(..., ge=0)
    measure_prob: float = Field(default=0.0, ge=0.0, le=1.0)


class MagicSpec(StrictModel):
    """Random Clifford applied to [R_Z(alpha)|+>]^n."""

    family: Literal["magic"] = "magic"
    n: int = Field(..., ge=1, le=14)
    alpha: float = Field(..., ge=0.0, le=0.7853981633974484)


class XXZSpec(StrictModel):
    """Ground state of the periodic XXZ chain."""

    family: Literal["xxz"] = "xxz"
    n: int = Field(..., ge=2, le=14)
    anisotropy: float


class J1J2Spec(StrictModel):
    """Ground state of the periodic J1-J2 chain with J1 = 1."""

    family: Literal["j1j2"] = "j1j2"
    n: int = Field(..., ge=4, le=14)
    J2: float


class ExplicitSpec(StrictModel):
    """Explicit amplitudes as [re, im] pairs; normalized on load."""

    family: Literal["explicit"] = "explicit"
    amplitudes: list[tuple[float, float]] = Field(..., min_length=2)

    @field_validator("amplitudes")
    @classmethod
    def power_of_two(cls, value: list[tuple[float, float]]) -> list[tuple[float, float]]:
        """Require a length that is a power of two."""
        if len(value) & (len(value) - 1):
            raise ValueError(f"amplitude count {len(value)} is not a power of two")
        return value


class TensorSpec(StrictModel):
    """Tensor product of other states, first factor on the lowest qubits."""

    family: Literal["tensor"] = "tensor"
    factors: list["StateSpec"] = Field(..., min_length=1)


class OrthogonalSpec(StrictModel):
    """Random pure state orthogonal to the target."""

    family: Literal["orthogonal"] = "orthogonal"


StateSpec = Annotated[
    Union[
        BellSpec,
        GHZSpec,
        ClusterSpec,
        ProductSpec,
        HaarSpec,
        BrickworkSpec,
        MagicSpec,
        XXZSpec,
        J1J2Spec,
        ExplicitSpec,
        TensorSpec,
        OrthogonalSpec,
    ],
    Field(discriminator="family"),
]
TensorSpec.model_rebuild()


class NoiseSpec(StrictModel):
    """Global depolarizing noise (1-p) rho + p I/d."""

    kind: Literal["depolarizing"] = "depolarizing"
    p: float = Field(..., ge=0.0, le=1.0)


class InputSpec(StrictModel):
    """Experimental state: the target (state omitted) or another state, optionally noisy."""

    state: Optional[StateSpec] = Field(default=None, description="None means the target itself")
    noise: Optional[NoiseSpec] = None


# ---------------------------------------------------------------------------
# Certification
# ---------------------------------------------------------------------------


class OracleSpec(StrictModel):
    """Free-set oracle selection."""

    kind: Literal["separable", "stabilizer"] = "separable"
    left: Optional[list[int]] = Field(
        default=None, description="Positions inside A forming the left side of the cut"
    )


class ThresholdRule(StrictModel):
    """lq-over-3 (default) or an explicit threshold in (0, gap)."""

    rule: Literal["lq-over-3", "explicit"] = "lq-over-3"
    eta_star: Optional[float] = Field(default=None, gt=0.0)

    @model_validator(mode="after")
    def explicit_needs_value(self) -> "ThresholdRule":
        """An explicit rule must carry eta_star."""
        if self.rule == "explicit" and self.eta_star is None:
            raise ValueError("explicit threshold rule needs eta_star")
        return self


class CertificationConfig(StrictModel):
    """Inputs of one run of the shadow certification protocol."""

    target: StateSpec
    input: InputSpec = Field(default_factory=InputSpec)
    retained: list[int] = Field(..., min_length=1, description="Qubits of A, in order")
    oracle: OracleSpec = Field(default_factory=OracleSpec)
    basis: str = Field(default="fixed-z", description="fixed-z, random, or explicit XYZ letters")
    delta: float = Field(default=0.05, gt=0.0, lt=1.0)
    threshold: ThresholdRule = Field(default_factory=ThresholdRule)
    samples: Optional[int] = Field(default=None, ge=1, description="Override of T")
    sample_size_rule: Literal["formula", "empirical"] = "formula"
    pilot: int = Field(default=0, ge=0, description="Pilot trials for the empirical rule")
    gap_samples: Optional[int] = Field(
        default=None, ge=1, description="Estimate LQ from this many samples instead of exactly"
    )
    seed: int = Field(default=0, ge=0, lt=2**64, description="Master seed; experiment runs set it from the experiment seed")

    @field_validator("retained")
    @classmethod
    def distinct_qubits(cls, value: list[int]) -> list[int]:
        """Retained qubits must be distinct and non-negative."""
        if len(set(value)) != len(value) or min(value) < 0:
            raise ValueError(f"retained qubits must be distinct and non-negative: {value}")
        return value

    @model_validator(mode="after")
    def pilot_for_empirical(self) -> "CertificationConfig":
        """The empirical rule needs a pilot batch."""
        if self.sample_size_rule == "empirical" and self.pilot < 2:
            raise ValueError("sample_size_rule 'empirical' needs pilot >= 2")
        return self


class TrialRecord(BaseModel):
    """One protocol round."""

    index: int = Field(..., ge=0)
    basis: str = Field(..., description="Basis letters on B")
    outcome: str = Field(..., description="Outcome label on B")
    shadow: str = Field(..., description="Random-Pauli outcome label on A")
    estimate: float
    offset: float
    pair: Optional[list[int]] = Field(default=None, description="Qubit pair for fully-inseparable rounds")


class CertificationReport(BaseModel):
    """Verdict and provenance of one certification run."""

    verdict: Literal["accept", "reject"]
    estimate: float
    threshold: float
    T: int = Field(..., ge=0, description="Trials actually used")
    T_formula: int = Field(..., ge=0)
    T_empirical: Optional[int] = None
    sample_size_rule: Literal["formula", "empirical", "override"] = "formula"
    block_size: int = Field(..., ge=0)
    block_count: int = Field(..., ge=0)
    gap: float
    gap_kind: Literal["LQ", "Delta", "witness"] = "LQ"
    gap_provenance: Literal["exact", "sampled", "supplied"] = "exact"
    robustness_radius: float = Field(..., ge=0.0)
    input_trace_distance: Optional[float] = None
    unsound_toy: bool = False
    zero_gap: bool = False
    oracle: dict[str, Any] = Field(default_factory=dict)
    extra: dict[str, Any] = Field(default_factory=dict)
    seed: int
    config_digest: str = ""
    wall_time_s: float = 0.0

    @model_validator(mode="after")
    def verdict_matches_estimate(self) -> "CertificationReport":
        """accept iff estimate > threshold."""
        if (self.verdict == "accept") != (self.estimate > self.threshold):
            raise ValueError(
                f"verdict {self.verdict} inconsistent with estimate {self.estimate} "
                f"and threshold {self.threshold}"
            )
        return self

    @computed_field  # type: ignore[prop-decorator]
    @property
    def accepted(self) -> bool:
        return self.verdict == "accept"


# ---------------------------------------------------------------------------
# Experiment configs
# ---------------------------------------------------------------------------


class ExperimentBase(StrictModel):
    """Fields shared by every experiment kind."""

    schema_version: Literal[1] = Field(..., description="Config schema version")
    seed: int = Field(default=0, ge=0, lt=2**64)
    output_dir: Path = Field(default=Path("runs"))
    repetitions: int = Field(default=1, ge=1)
    workers: Optional[int] = Field(default=None, ge=1)

    def digest_payload(self) -> dict[str, Any]:
        """Config as JSON with run-local keys removed."""
        return self.model_dump(mode="json", exclude={"output_dir", "workers"})


class CertifyConfig(ExperimentBase):
    kind: Literal["certify"] = "certify"
    certification: CertificationConfig


class FullyInseparableConfig(ExperimentBase):
    kind: Literal["fully-inseparable"] = "fully-inseparable"
    target: StateSpec
    input: InputSpec = Field(default_factory=InputSpec)
    pairs: Optional[list[tuple[int, int]]] = Field(
        default=None, description="Defaults to nearest-neighbour pairs"
    )
    delta: float = Field(default=0.05, gt=0.0, lt=1.0)
    samples: Optional[int] = Field(default=None, ge=1)
    gap_samples: Optional[int] = Field(
        default=None, ge=2, description="Monte-Carlo draws per pair LE; exact while |B| <= 8 when absent"
    )


class FidelityCertConfig(ExperimentBase):
    kind: Literal["fidelity-cert"] = "fidelity-cert"
    target: StateSpec
    input: InputSpec = Field(default_factory=InputSpec)
    n_A: int = Field(..., ge=1)
    F: float = Field(default=0.5, gt=0.0, lt=1.0)
    c: float = Field(default=0.25, gt=0.0, lt=0.5)
    delta: float = Field(default=0.05, gt=0.0, lt=1.0)
    gap: Optional[float] = Field(default=None, gt=0.0, description="Supplied Delta; measured when absent")
    samples: Optional[int] = Field(default=None, ge=1)


class ComplexityCertConfig(ExperimentBase):
    kind: Literal["complexity-cert"] = "complexity-cert"
    target: StateSpec
    input: InputSpec = Field(default_factory=InputSpec)
    dims: list[int] = Field(..., min_length=1, max_length=2)
    w: int = Field(..., ge=1)
    d: int = Field(..., ge=1)
    c: float = Field(default=0.5, gt=0.0, le=1.0)
    variant: Literal["unitary", "measurement-assisted"] = "unitary"
    delta: float = Field(default=0.05, gt=0.0, lt=1.0)
    unsound_toy: bool = False
    cap_override: Optional[float] = Field(default=None, ge=0.0)
    t: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    p_prime: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    samples: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def toy_overrides(self) -> "ComplexityCertConfig":
        """Cap and witness-parameter overrides are toy-only."""
        overridden = self.cap_override is not None or self.t is not None or self.p_prime is not None
        if overridden and not self.unsound_toy:
            raise ValueError("cap_override, t and p_prime require unsound_toy: true")
        if (self.t is None) != (self.p_prime is None):
            raise ValueError("t and p_prime must be given together")
        return self


class MagicScanConfig(ExperimentBase):
    kind: Literal["magic-scan"] = "magic-scan"
    ns: list[int] = Field(..., min_length=1)
    alphas: list[float] = Field(..., min_length=1)
    n_A: int = Field(default=3, ge=1, le=3)
    cliffords: int = Field(default=50, ge=1)
    crossover: bool = Field(default=False, description="Also report the depolarizing crossover")
    eta_curve_points: int = Field(default=0, ge=0, description="Points of the eta(p) curve CSV")

    @field_validator("ns")
    @classmethod
    def sizes_in_range(cls, value: list[int]) -> list[int]:
        """Scan sizes must fit the simulator."""
        if any(n < 2 or n > 14 for n in value):
            raise ValueError(f"ns must lie in [2, 14]: {value}")
        return value


class HamiltonianScanConfig(ExperimentBase):
    kind: Literal["hamiltonian-scan"] = "hamiltonian-scan"
    model: Literal["xxz", "j1j2"]
    n: int = Field(..., ge=4, le=14)
    grid: list[float] = Field(..., min_length=1)
    samples: Optional[int] = Field(default=1000, ge=1, description="None means exact")
    pair: tuple[int, int] = (0, 1)


class GapScanConfig(ExperimentBase):
    kind: Literal["gap-scan"] = "gap-scan"
    ns: list[int] = Field(..., min_length=1)
    n_A: int = Field(default=1, ge=1)
    states: int = Field(default=10, ge=1, description="N_s")
    bases: int = Field(default=100, ge=1, description="N_M")


class PropertySuiteConfig(ExperimentBase):
    kind: Literal["property-suite"] = "property-suite"
    suites: list[str] = Field(default_factory=lambda: ["all"])
    quick: bool = Field(default=False, description="Reduced sample counts")


ExperimentConfig = Annotated[
    Union[
        CertifyConfig,
        FullyInseparableConfig,
        FidelityCertConfig,
        ComplexityCertConfig,
        MagicScanConfig,
        HamiltonianScanConfig,
        GapScanConfig,
        PropertySuiteConfig,
    ],
    Field(discriminator="kind"),
]

_EXPERIMENT_ADAPTER: TypeAdapter[Any] = TypeAdapter(ExperimentConfig)


def parse_config(payload: Any, path: str = "<memory>") -> ExperimentBase:
    """
    Validate a decoded config payload.

    Raises:
        ConfigError: With the dotted key path of the first failure.
    """
    try:
        return _EXPERIMENT_ADAPTER.validate_python(payload)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first.get("loc", ()))
        raise ConfigError(path, key, first.get("msg", str(e))) from e


def load_config(path: Union[str, Path]) -> ExperimentBase:
    """
    Read and validate a JSON config file.

    Raises:
        ConfigError: On unreadable files, malformed JSON or schema violations.
    """
    p = Path(path)
    try:
        payload = json.loads(p.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(str(p), "", f"cannot read file: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(str(p), "", f"invalid JSON at line {e.lineno}: {e.msg}") from e
    return parse_config(payload, str(p))
