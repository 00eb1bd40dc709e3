from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np

UTC = timezone.utc

SIGNIFICANT_DIGITS = 12


def utc_now_iso() -> str:
    return datetime.now(UTC).replace(microsecond=0).isoformat()


def round12(value: float) -> float:
    return float(format(float(value), f".{SIGNIFICANT_DIGITS}g"))


def format12(value: float) -> str:
    return format(float(value), f".{SIGNIFICANT_DIGITS}g")


def json_ready(value: Any) -> Any:
    """Plain JSON types with floats at 12 significant digits; non-finite floats become strings."""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, bool | None | str):
        return value
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, int | np.integer):
        return int(value)
    if isinstance(value, float | np.floating):
        number = float(value)
        return round12(number) if math.isfinite(number) else str(number)
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, np.ndarray):
        return [json_ready(item) for item in value.tolist()]
    if isinstance(value, Mapping):
        return {str(key): json_ready(item) for key, item in value.items()}
    if isinstance(value, Sequence):
        return [json_ready(item) for item in value]
    raise TypeError(f"cannot serialize {type(value).__name__}")
