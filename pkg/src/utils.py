"""
Utility functions for localq-cert.

This module contains helpers for logging, seeded random streams, config
digests, worker pools, and artifact writing.
"""

import csv
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Sequence, TypeVar

import numpy as np
import structlog

from . import __version__

T = TypeVar("T")
R = TypeVar("R")

# Trials are grouped into chunks of this size; each chunk owns one RNG stream.
TRIAL_CHUNK = 4096

DEFAULT_CACHE_DIR = Path.home() / ".cache" / "localq"


def setup_logging(level: Optional[str] = None) -> structlog.BoundLogger:
    """
    Configure and return a structured logger.

    Args:
        level: Optional stdlib level name applied to the root logger.

    Returns:
        A configured structlog logger instance.
    """
    if level is not None:
        logging.basicConfig(
            level=getattr(logging, level.upper(), logging.INFO),
            format="%(message)s",
            stream=sys.stderr,
            force=True,
        )
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.UnicodeDecoder(),
            structlog.processors.JSONRenderer(),
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    return structlog.get_logger("localq")


def cache_dir() -> Path:
    """
    Resolve the stabilizer-dictionary cache directory.

    Returns:
        Path from LOCQ_CACHE_DIR, or ~/.cache/localq when unset.
    """
    raw = os.environ.get("LOCQ_CACHE_DIR")
    return Path(raw).expanduser() if raw else DEFAULT_CACHE_DIR


def default_workers() -> int:
    """Worker count from LOCQ_WORKERS, falling back to 1."""
    raw = os.environ.get("LOCQ_WORKERS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def stream_rng(seed: int, stream: int, chunk: int = 0) -> np.random.Generator:
    """
    Build the counter-based generator for one (stream, chunk) coordinate.

    The generator depends only on its coordinates, never on which worker or
    in which order it is requested.

    Args:
        seed: Master seed.
        stream: Logical stream id (one per repetition, state, or scan point).
        chunk: Chunk index within the stream.

    Returns:
        An independent numpy Generator.
    """
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(stream, chunk))
    )


def chunk_bounds(total: int, size: int = TRIAL_CHUNK) -> list[tuple[int, int, int]]:
    """
    Split trial indices [0, total) into fixed-size chunks.

    Returns:
        List of (chunk index, start, stop).
    """
    return [(c, s, min(s + size, total)) for c, s in enumerate(range(0, total, size))]


def parallel_map(fn: Callable[[T], R], items: Sequence[T], workers: int = 1) -> list[R]:
    """
    Apply fn to every item, optionally on a thread pool.

    Results are returned in input order regardless of completion order.
    """
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))


def canonical_json(payload: Any) -> str:
    """Compact, key-sorted JSON used for hashing."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), default=_json_default)


def config_digest(payload: dict[str, Any]) -> str:
    """
    Compute the SHA-256 digest of a config payload.

    Args:
        payload: JSON-compatible dict (already stripped of run-local keys).

    Returns:
        Hex digest string.
    """
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def _json_default(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def write_json(path: Path, payload: dict[str, Any]) -> Path:
    """Write a pretty, key-sorted JSON document."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n",
        encoding="utf-8",
    )
    return path


def write_jsonl(path: Path, rows: Iterable[dict[str, Any]]) -> Path:
    """Write one JSON object per line."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(canonical_json(row) + "\n")
    return path


def write_csv(
    path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]], digest: str
) -> Path:
    """
    Write a scan CSV with a provenance comment line.

    Args:
        path: Destination file.
        header: Column names.
        rows: Row tuples.
        digest: Config digest embedded in the comment header.

    Returns:
        The written path.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(f"# localq-cert {__version__} config={digest}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(v) for v in row])
    return path


def _csv_cell(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value
