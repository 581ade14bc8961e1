"""Small shared helpers: seeding, integer rounding, log-log regression, hashing."""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np


def derive_rng(root_seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for the stream addressed by ``(root_seed, *keys)``.

    Streams are independent of the order in which they are requested, so
    parallel or reordered evaluation reproduces the same draws.
    """
    ss = np.random.SeedSequence(entropy=int(root_seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(root_seed: int, *keys: int) -> int:
    """A 32-bit integer seed for the stream ``(root_seed, *keys)``."""
    ss = np.random.SeedSequence(entropy=int(root_seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def ceil_tol(x: float, tol: float = 1e-9) -> int:
    """Ceiling that treats values within ``tol`` of an integer as that integer."""
    r = round(x)
    if abs(x - r) <= tol * max(1.0, abs(x)):
        return int(r)
    return int(math.ceil(x))


def loglog_fit(scales, values) -> tuple[float, float, float]:
    """Least-squares line through ``(log scale, log value)``.

    Returns ``(slope, intercept, std_error_of_slope)``. With fewer than two
    distinct scales the slope is undefined and NaN is returned; with exactly
    two points the standard error is NaN.
    """
    x = np.log(np.asarray(scales, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    if x.size < 2 or np.ptp(x) == 0.0:
        return float("nan"), float("nan"), float("nan")
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    if x.size > 2:
        resid = y - (intercept + slope * x)
        se = math.sqrt(float(np.sum(resid**2)) / (x.size - 2) / sxx)
    else:
        se = float("nan")
    return slope, intercept, se


def fmt17(x: float) -> str:
    """Decimal text with 17 significant digits (round-trips any double)."""
    return format(float(x), ".17g")


def stable_hash(obj) -> str:
    """Short hex digest of the canonical JSON form of ``obj``."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _jsonable(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return fmt17(o)
    if isinstance(o, float):
        return fmt17(o)
    if isinstance(o, (np.ndarray, tuple, set, frozenset)):
        return list(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def dumps_17(obj, indent: int | None = 1) -> str:
    """JSON text in which every float is written with 17 significant digits."""
    marker = "\u0000f:"

    def conv(o):
        if isinstance(o, bool) or o is None:
            return o
        if isinstance(o, (float, np.floating)):
            v = float(o)
            if not math.isfinite(v):
                return None
            return marker + fmt17(v)
        if isinstance(o, (int, np.integer)):
            return int(o)
        if isinstance(o, dict):
            return {str(k): conv(v) for k, v in o.items()}
        if isinstance(o, (list, tuple, np.ndarray)):
            return [conv(v) for v in o]
        return o

    return _strip_markers(json.dumps(conv(obj), indent=indent))


def _strip_markers(text: str) -> str:
    # json.dumps escapes the NUL marker as \u0000; unquote the float payloads
    out = []
    i = 0
    token = '"\\u0000f:'
    while True:
        k = text.find(token, i)
        if k < 0:
            out.append(text[i:])
            break
        out.append(text[i:k])
        end = text.find('"', k + len(token))
        out.append(text[k + len(token):end])
        i = end + 1
    return "".join(out)
