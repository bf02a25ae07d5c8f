"""
Command-line entry point for localq-cert.

This module orchestrates one experiment run:
1. Parse the subcommand and flags
2. Load and validate the JSON config, applying --seed/--out/--workers
3. Prepare target and input states
4. Run the certification engine or scan the config names
5. Write summary.json, trials.jsonl and scan CSVs
6. Map the outcome to an exit code (0 done, 1 verify failure, 2 config error, 3 runtime error)
"""

import argparse
import math
import sys
import time
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import __version__
from .ensemble import localizable_quantumness
from .errors import ConfigError, DegenerateGroundSpace
from .freeset import SeparableOracle, StabilizerOracle
from .models import (
    LatticeGeometry,
    j1j2_ground_state,
    magic_injection_state,
    random_clifford_unitary,
    xxz_ground_state,
)
from .protocol import (
    INPUT_STREAM,
    TARGET_STREAM,
    ProtocolRunner,
    depolarizing_profile,
    prepare_input,
    prepare_state,
    run_complexity_cert,
    run_fidelity_cert,
    run_fully_inseparable,
)
from .qstate import Bipartition, PureState
from .spectral import averaged_truncated_gaps
from .suites import SUITES, run_suites
from .types import (
    CertifyConfig,
    ComplexityCertConfig,
    ExperimentBase,
    FidelityCertConfig,
    FullyInseparableConfig,
    GapScanConfig,
    HamiltonianScanConfig,
    MagicScanConfig,
    PropertySuiteConfig,
    load_config,
    parse_config,
)
from .utils import (
    config_digest,
    default_workers,
    parallel_map,
    setup_logging,
    stream_rng,
    write_csv,
    write_json,
    write_jsonl,
)

COMMANDS = {
    "certify": "certify",
    "inseparable": "fully-inseparable",
    "fidelity": "fidelity-cert",
    "complexity": "complexity-cert",
    "magic-scan": "magic-scan",
    "ham-scan": "hamiltonian-scan",
    "gap-scan": "gap-scan",
    "verify": "property-suite",
}

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class ExperimentRunner:
    """Runs one validated experiment config and writes its artifacts."""

    def __init__(self, config: ExperimentBase, workers: int = 1) -> None:
        self.config = config
        self.workers = workers
        self.digest = config_digest(config.digest_payload())
        self.out = Path(config.output_dir)
        self.logger = setup_logging()
        self.passed = True

    def run(self) -> dict[str, Any]:
        """Dispatch on the config kind and write summary.json."""
        started = time.perf_counter()
        kind = self.config.kind  # type: ignore[attr-defined]
        self.logger.info(
            event="experiment_started", message="Experiment started", kind=kind,
            seed=self.config.seed, digest=self.digest, workers=self.workers,
        )
        handlers = {
            "certify": self._certify,
            "fully-inseparable": self._fully_inseparable,
            "fidelity-cert": self._fidelity_cert,
            "complexity-cert": self._complexity_cert,
            "magic-scan": self._magic_scan,
            "hamiltonian-scan": self._hamiltonian_scan,
            "gap-scan": self._gap_scan,
            "property-suite": self._property_suite,
        }
        result = handlers[kind]()
        summary = {
            "toolkit_version": __version__,
            "config_digest": self.digest,
            "kind": kind,
            "seed": self.config.seed,
            "result": result,
            "wall_time_s": round(time.perf_counter() - started, 6),
        }
        path = write_json(self.out / "summary.json", summary)
        self.logger.info(
            event="experiment_completed", message="Experiment completed", kind=kind,
            summary=str(path), wall_time_s=summary["wall_time_s"],
        )
        return summary

    # -- helpers ------------------------------------------------------------

    def _states(self, target: Any, input_spec: Any) -> tuple[PureState, Any]:
        seed = self.config.seed
        psi = prepare_state(target, stream_rng(seed, TARGET_STREAM))
        rho = prepare_input(input_spec, psi, stream_rng(seed, INPUT_STREAM))
        return psi, rho

    def _write_trials(self, rows: list[dict[str, Any]]) -> None:
        for row in rows:
            row["toolkit_version"] = __version__
            row["config_digest"] = self.digest
        write_jsonl(self.out / "trials.jsonl", rows)

    def _csv(self, name: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
        path = write_csv(self.out / name, header, rows, self.digest)
        self.logger.info(event="csv_written", message="Scan CSV written", path=str(path), rows=len(rows))

    def _reports(self, runs: list[Any]) -> dict[str, Any]:
        reports = [
            r.report.model_copy(update={"config_digest": self.digest}).model_dump(mode="json") for r in runs
        ]
        rows = []
        for rep, r in enumerate(runs):
            for record in r.records():
                record["repetition"] = rep
                rows.append(record)
        self._write_trials(rows)
        accepted = sum(1 for r in runs if r.report.accepted)
        return {"reports": reports, "accepted": accepted, "repetitions": len(runs)}

    # -- certification ----------------------------------------------------------

    def _certify(self) -> dict[str, Any]:
        cfg: CertifyConfig = self.config  # type: ignore[assignment]
        cert = cfg.certification.model_copy(update={"seed": cfg.seed})
        runner = ProtocolRunner(self.workers)
        return self._reports([runner.run_protocol1(cert, stream=r) for r in range(cfg.repetitions)])

    def _fully_inseparable(self) -> dict[str, Any]:
        cfg: FullyInseparableConfig = self.config  # type: ignore[assignment]
        psi, rho = self._states(cfg.target, cfg.input)
        pairs = [tuple(p) for p in cfg.pairs] if cfg.pairs is not None else None
        results = [
            run_fully_inseparable(
                psi, rho, pairs, cfg.delta, cfg.samples, cfg.seed, stream=r,
                workers=self.workers, gap_samples=cfg.gap_samples,
            )
            for r in range(cfg.repetitions)
        ]
        rows = []
        for rep, result in enumerate(results):
            for record in result.records():
                record["repetition"] = rep
                rows.append(record)
        self._write_trials(rows)
        return {
            "runs": [r.summary() for r in results],
            "accepted": sum(1 for r in results if r.verdict == "accept"),
            "repetitions": len(results),
        }

    def _fidelity_cert(self) -> dict[str, Any]:
        cfg: FidelityCertConfig = self.config  # type: ignore[assignment]
        psi, rho = self._states(cfg.target, cfg.input)
        runs = [
            run_fidelity_cert(
                psi, rho, cfg.n_A, cfg.gap, cfg.F, cfg.c, cfg.delta, cfg.seed,
                stream=r, samples=cfg.samples, workers=self.workers,
            )
            for r in range(cfg.repetitions)
        ]
        return self._reports(runs)

    def _complexity_cert(self) -> dict[str, Any]:
        cfg: ComplexityCertConfig = self.config  # type: ignore[assignment]
        geometry = LatticeGeometry.build(cfg.dims, cfg.w, cfg.d)
        psi, rho = self._states(cfg.target, cfg.input)
        if psi.n != geometry.n:
            raise ConfigError("<config>", "dims", f"lattice has {geometry.n} qubits, target has {psi.n}")
        runs = [
            run_complexity_cert(
                psi, rho, geometry, cfg.c, cfg.variant, cfg.delta, cfg.seed, stream=r,
                unsound_toy=cfg.unsound_toy, cap_override=cfg.cap_override, t=cfg.t,
                p_prime=cfg.p_prime, samples=cfg.samples, workers=self.workers,
            )
            for r in range(cfg.repetitions)
        ]
        return self._reports(runs)

    # -- scans ------------------------------------------------------------------

    def _magic_scan(self) -> dict[str, Any]:
        cfg: MagicScanConfig = self.config  # type: ignore[assignment]
        oracle = StabilizerOracle(cfg.n_A)
        tasks = [(k, n, c) for k, n in enumerate(cfg.ns) for c in range(cfg.cliffords)]

        def one(task: tuple[int, int, int]) -> list[tuple[float, Any]]:
            k, n, c = task
            rng = stream_rng(cfg.seed, k * cfg.cliffords + c)
            clifford = random_clifford_unitary(n, rng)
            part = Bipartition.from_retained(range(cfg.n_A), n)
            out = []
            for alpha in cfg.alphas:
                psi = magic_injection_state(n, alpha, rng, clifford=clifford)
                lm, _ = localizable_quantumness(psi, part, oracle, "fixed-z")
                profile = depolarizing_profile(psi, part, oracle) if cfg.crossover or cfg.eta_curve_points else None
                out.append((lm, profile))
            return out

        results = parallel_map(one, tasks, self.workers)
        rows, summary_rows, crossover_rows, curve_rows = [], [], [], []
        means: dict[str, dict[str, float]] = {}
        for k, n in enumerate(cfg.ns):
            block = results[k * cfg.cliffords : (k + 1) * cfg.cliffords]
            for a, alpha in enumerate(cfg.alphas):
                values = np.array([b[a][0] for b in block])
                for c, v in enumerate(values):
                    rows.append((n, alpha, c, float(v)))
                se = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
                summary_rows.append((n, alpha, float(values.mean()), se, cfg.n_A, cfg.seed))
                means.setdefault(str(n), {})[f"{alpha:.6g}"] = float(values.mean())
                profiles = [b[a][1] for b in block if b[a][1] is not None]
                if cfg.crossover:
                    for c, profile in enumerate(profiles):
                        denom = profile.lm - profile.noise_value
                        crossover_rows.append((n, alpha, c, profile.crossover() if denom > 0 else math.inf))
                if cfg.eta_curve_points and profiles:
                    for p in np.linspace(0.0, 1.0, cfg.eta_curve_points):
                        curve_rows.append((n, alpha, float(p), float(np.mean([q.eta(float(p)) for q in profiles]))))
        self._csv("magic_scan.csv", ["n", "alpha", "clifford", "LM"], rows)
        self._csv("magic_summary.csv", ["n", "alpha", "LM_mean", "LM_se", "n_A", "seed"], summary_rows)
        result: dict[str, Any] = {"mean_LM": means}
        if cfg.crossover:
            self._csv("crossover.csv", ["n", "alpha", "clifford", "p_star"], crossover_rows)
            finite = [r[3] for r in crossover_rows if math.isfinite(r[3])]
            result["mean_p_star"] = float(np.mean(finite)) if finite else None
        if cfg.eta_curve_points:
            self._csv("eta_curve.csv", ["n", "alpha", "p", "eta_mean"], curve_rows)
        return result

    def _hamiltonian_scan(self) -> dict[str, Any]:
        cfg: HamiltonianScanConfig = self.config  # type: ignore[assignment]
        part = Bipartition.from_retained(cfg.pair, cfg.n)
        oracle = SeparableOracle([0], 2)
        solve = xxz_ground_state if cfg.model == "xxz" else j1j2_ground_state

        def one(task: tuple[int, float]) -> tuple[float, list[tuple[float, float]], bool]:
            idx, value = task
            try:
                states, degenerate = [solve(cfg.n, value)], False
            except DegenerateGroundSpace as e:
                states = list(e.representatives or e.basis)
                degenerate = True
                self.logger.warning(
                    event="degenerate_ground_space", message="Scanning ground-space representatives",
                    parameter=value, **e.context(),
                )
            les = []
            for r, psi in enumerate(states):
                rng = stream_rng(cfg.seed, idx, r) if cfg.samples is not None else None
                les.append(localizable_quantumness(psi, part, oracle, "random", budget=cfg.samples, rng=rng))
            return value, les, degenerate

        results = parallel_map(one, list(enumerate(cfg.grid)), self.workers)
        rows = []
        curve = {}
        for value, les, degenerate in results:
            best = min(range(len(les)), key=lambda j: les[j][0])
            vals = [le for le, _ in les]
            rows.append((
                value, les[best][0], les[best][1], cfg.n, cfg.seed, min(vals), max(vals),
                degenerate, len(les), ";".join(repr(v) for v in vals),
            ))
            curve[f"{value:.6g}"] = les[best][0]
        self._csv(
            f"{cfg.model}_scan.csv",
            ["parameter", "LE", "std_error", "n", "seed", "LE_min", "LE_max", "degenerate", "states", "values"],
            rows,
        )
        argmax = max(rows, key=lambda r: r[1])[0]
        return {"model": cfg.model, "pair": list(cfg.pair), "LE": curve, "argmax": argmax}

    def _gap_scan(self) -> dict[str, Any]:
        cfg: GapScanConfig = self.config  # type: ignore[assignment]
        table = averaged_truncated_gaps(cfg.ns, cfg.n_A, cfg.states, cfg.bases, cfg.seed, workers=self.workers)
        rows = [(n, n_A, cfg.seed, j, i, g, m, s) for n, n_A, j, i, g, m, s in table.rows()]
        self._csv("gap_scan.csv", ["n", "n_A", "seed", "state", "i", "gap", "mean", "std"], rows)
        mean = table.mean()
        return {
            "ns": list(cfg.ns),
            "final_mean_gap": {str(n): float(mean[k, -1]) for k, n in enumerate(cfg.ns)},
            "spearman_trend": {str(n): t for n, t in zip(cfg.ns, table.trend())},
        }

    def _property_suite(self) -> dict[str, Any]:
        cfg: PropertySuiteConfig = self.config  # type: ignore[assignment]
        results = run_suites(cfg.suites, cfg.quick, cfg.seed, self.workers)
        table = [r.model_dump() for r in results]
        self.passed = all(r.passed for r in results)
        write_json(
            self.out / "verify.json",
            {"toolkit_version": __version__, "config_digest": self.digest, "passed": self.passed, "properties": table},
        )
        return {"passed": self.passed, "failed": [f"{r.suite}: {r.property}" for r in results if not r.passed]}


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per experiment kind."""
    parser = argparse.ArgumentParser(prog="localq", description="Localizable-quantumness certification toolkit")
    parser.add_argument("--version", action="version", version=f"localq-cert {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, kind in COMMANDS.items():
        p = sub.add_parser(command, help=f"run a {kind} experiment")
        p.add_argument("--config", type=Path, required=command != "verify", help="JSON config path")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
        p.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
        p.add_argument("--workers", type=int, default=None, help="worker threads")
        p.add_argument("--log-level", default="INFO", help="stdlib log level")
        if command == "verify":
            p.add_argument("suites", nargs="*", help=f"suite names or 'all' ({', '.join(SUITES)})")
            p.add_argument("--quick", action="store_true", help="reduced sample counts")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentBase:
    """
    Load the config named on the command line and apply flag overrides.

    Raises:
        ConfigError: On invalid files, kind mismatches or invalid overrides.
    """
    kind = COMMANDS[args.command]
    if args.config is None:
        payload: dict[str, Any] = {
            "schema_version": 1,
            "kind": kind,
            "suites": args.suites or ["all"],
            "quick": args.quick,
        }
        source = "<command line>"
    else:
        source = str(args.config)
        payload = load_config(args.config).model_dump(mode="json")
        if payload["kind"] != kind:
            raise ConfigError(source, "kind", f"expected '{kind}' for '{args.command}', got '{payload['kind']}'")
        if args.command == "verify":
            if args.suites:
                payload["suites"] = args.suites
            payload["quick"] = payload["quick"] or args.quick
    if args.seed is not None:
        payload["seed"] = args.seed
    if args.out is not None:
        payload["output_dir"] = str(args.out)
    if args.workers is not None:
        payload["workers"] = args.workers
    config = parse_config(payload, source)
    if isinstance(config, PropertySuiteConfig):
        unknown = [name for name in config.suites if name != "all" and name not in SUITES]
        if unknown:
            raise ConfigError(source, "suites", f"unknown suites {unknown}; known: {', '.join(SUITES)}")
    return config


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    args = build_parser().parse_args(argv)
    logger = setup_logging(args.log_level)
    try:
        config = resolve_config(args)
    except ConfigError as e:
        logger.error(
            event="config_error", message="Config rejected", path=e.path, key=e.key,
            error=str(e), error_type=type(e).__name__,
        )
        return EXIT_CONFIG
    workers = config.workers or default_workers()
    runner = ExperimentRunner(config, workers)
    try:
        runner.run()
    except ConfigError as e:
        logger.error(event="config_error", message="Config rejected", error=str(e), error_type=type(e).__name__)
        return EXIT_CONFIG
    except Exception as e:
        logger.error(
            event="experiment_error",
            message="Experiment failed with error",
            error=str(e),
            error_type=type(e).__name__,
            **(e.context() if hasattr(e, "context") else {}),
        )
        return EXIT_RUNTIME
    return EXIT_OK if runner.passed else EXIT_VERIFY_FAILED


if __name__ == "__main__":
    sys.exit(main())
