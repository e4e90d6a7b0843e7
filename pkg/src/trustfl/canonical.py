"""Canonical byte encodings shared by reports, headers and digests.

Reals never appear in canonical JSON directly; they are converted to integer
micro-units first so hashes do not depend on float formatting.
"""

import hashlib
import json
from decimal import ROUND_HALF_EVEN, Decimal

MICRO = 1_000_000


def to_micro(value: float) -> int:
    """Convert a real to integer micro-units, rounding half to even."""
    scaled = Decimal(repr(float(value))) * MICRO
    return int(scaled.quantize(Decimal(1), rounding=ROUND_HALF_EVEN))


def from_micro(units: int) -> float:
    return units / MICRO


def scale_micro(units: int, fraction: float) -> int:
    """``fraction * units`` in exact decimal arithmetic, rounded half to even."""
    scaled = Decimal(units) * Decimal(repr(float(fraction)))
    return int(scaled.quantize(Decimal(1), rounding=ROUND_HALF_EVEN))


def _reject_floats(obj):
    if isinstance(obj, float):
        raise TypeError(f"float {obj!r} in canonical payload; convert to micro-units")
    if isinstance(obj, dict):
        for v in obj.values():
            _reject_floats(v)
    elif isinstance(obj, (list, tuple)):
        for v in obj:
            _reject_floats(v)


def canonical_json(obj) -> bytes:
    """Sorted keys, no insignificant whitespace, UTF-8."""
    _reject_floats(obj)
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
