"""Reading survey records from CSV."""
from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import IngestionError
from .sampler.types import WeightedSample

__all__ = ["IngestionAudit", "ingest", "squeeze_health", "REQUIRED_COLUMNS", "MAX_DROP_FRACTION"]

REQUIRED_COLUMNS = ("id", "income", "mental_health", "education", "happiness", "weight")
MAX_DROP_FRACTION = 0.10
N_CATEGORIES = 5
_MAX_REPORTED = 20


@dataclass(frozen=True)
class IngestionAudit:
    path: str
    sha256: str
    n_read: int
    n_dropped_income: int
    n_squeezed_health: int
    n_out: int

    def to_dict(self) -> dict:
        return asdict(self)


def squeeze_health(y, n: int) -> np.ndarray:
    """Move scores of exactly 0 or 1 inside (0, 1) via ``(y (n - 1) + 0.5) / n``."""
    y = np.asarray(y, dtype=float)
    edge = (y == 0.0) | (y == 1.0)
    return np.where(edge, (y * (n - 1) + 0.5) / n, y)


def _parse_float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


def _parse_category(text: str) -> int:
    v = float(text)
    if not v.is_integer() or not 1 <= v <= N_CATEGORIES:
        raise ValueError(f"category must be an integer in 1..{N_CATEGORIES}")
    return int(v)


def ingest(path, *, allow_drops: bool = False,
           max_drop_fraction: float = MAX_DROP_FRACTION) -> tuple[WeightedSample, IngestionAudit]:
    """Load a population sample.

    Records with non-positive income are dropped and counted.  Health
    scores must lie in [0, 1]; the boundary values are squeezed inside.
    Malformed rows raise :class:`IngestionError` listing their line numbers.
    Dropping more than ``max_drop_fraction`` of the records is an error
    unless ``allow_drops`` is set.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    text = raw.decode("utf-8-sig")
    reader = csv.reader(text.splitlines())
    header = next(reader, None)
    if header is None:
        raise IngestionError(f"{path}: empty file")
    header = [h.strip() for h in header]
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise IngestionError(f"{path}: missing columns {missing}")
    pos = {c: header.index(c) for c in REQUIRED_COLUMNS}

    rows, errors, dropped = [], [], 0
    n_read = 0
    for lineno, fields in enumerate(reader, start=2):
        if not fields or all(not f.strip() for f in fields):
            continue
        n_read += 1
        if len(fields) != len(header):
            errors.append(f"line {lineno}: expected {len(header)} fields, got {len(fields)}")
            continue
        try:
            income = _parse_float(fields[pos["income"]])
        except ValueError as exc:
            errors.append(f"line {lineno}: income: {exc}")
            continue
        try:
            health = _parse_float(fields[pos["mental_health"]])
            if not 0.0 <= health <= 1.0:
                raise ValueError("must lie in [0, 1]")
            edu = _parse_category(fields[pos["education"]])
            hap = _parse_category(fields[pos["happiness"]])
            weight = _parse_float(fields[pos["weight"]])
            if weight < 0:
                raise ValueError("weight must be nonnegative")
        except ValueError as exc:
            errors.append(f"line {lineno}: {exc}")
            continue
        if income <= 0:
            dropped += 1
            continue
        rows.append((income, health, edu, hap, weight))
    if errors:
        shown = "; ".join(errors[:_MAX_REPORTED])
        more = f" (and {len(errors) - _MAX_REPORTED} more)" if len(errors) > _MAX_REPORTED else ""
        raise IngestionError(f"{path}: {len(errors)} malformed rows: {shown}{more}")
    if n_read and dropped / n_read > max_drop_fraction and not allow_drops:
        raise IngestionError(
            f"{path}: {dropped} of {n_read} rows have non-positive income "
            f"(more than {max_drop_fraction:.0%}); pass allow_drops to accept")
    if not rows:
        raise IngestionError(f"{path}: no usable records")
    data = np.array(rows, dtype=float)
    n = data.shape[0]
    health = squeeze_health(data[:, 1], n)
    squeezed = int(np.count_nonzero(health != data[:, 1]))
    sample = WeightedSample(data[:, 0], health, data[:, 2], data[:, 3], data[:, 4])
    audit = IngestionAudit(str(path), hashlib.sha256(raw).hexdigest(), n_read, dropped, squeezed, n)
    return sample, audit
