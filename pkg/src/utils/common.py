from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Dict, Any, Optional, Sequence

import numpy as np


def load_json_file(filepath: str | Path, default: Dict[str, Any] | None = None) -> Dict[str, Any]:
    if isinstance(filepath, str):
        filepath = Path(filepath)

    if filepath.exists():
        try:
            with filepath.open("r", encoding="utf-8") as f:
                data = json.load(f)
                if isinstance(data, dict):
                    return data
        except Exception:
            pass

    return default if default is not None else {}


def save_json_file(filepath, data):
    if isinstance(filepath, str):
        filepath = Path(filepath)
    try:
        filepath.parent.mkdir(parents=True, exist_ok=True)
        with open(filepath, 'w', encoding='utf-8') as f:
            json.dump(data, f, indent=2, default=_json_default, ensure_ascii=False)
        return True
    except Exception as e:
        print(f"✗ Error saving {filepath}: {e}")
        return False


def _json_default(value):
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


def principal_power(base, beta):
    """base**beta with the principal logarithm; base must avoid (-inf, 0]."""
    base = np.asarray(base, dtype=complex)
    return np.exp(beta * np.log(base))


def wrap_angle(phi):
    """Map angles to (-pi, pi]."""
    wrapped = np.mod(np.asarray(phi, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


def loglog_slope(x: Sequence[float], y: Sequence[float]):
    """Least-squares slope and R^2 of log|y| against log|x|."""
    lx = np.log(np.abs(np.asarray(x, dtype=float)))
    ly = np.log(np.abs(np.asarray(y, dtype=complex)))
    if lx.size < 2:
        return math.nan, math.nan
    slope, intercept = np.polyfit(lx, ly, 1)
    fitted = slope * lx + intercept
    ss_res = float(np.sum((ly - fitted) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


def format_complex(value: Optional[complex], digits: int = 10) -> str:
    if value is None:
        return "absent"
    value = complex(value)
    sign = "+" if value.imag >= 0 else "-"
    return f"{value.real:.{digits}g} {sign} {abs(value.imag):.{digits}g}j"


def format_duration(seconds):
    if seconds is None:
        return "Unknown"
    try:
        seconds = float(seconds)
        if seconds < 1.0:
            return f"{seconds * 1000:.1f} ms"
        if seconds < 60.0:
            return f"{seconds:.2f} s"
        return f"{int(seconds // 60)} min {seconds % 60:.0f} s"
    except (ValueError, TypeError):
        return "Unknown"
