"""Experiment reports: fitted exponents with the data they were fitted from."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .utils import dumps_17, fmt17, loglog_fit


@dataclass
class ExperimentReport:
    """A fitted exponent plus the ``(scale, value)`` data behind it.

    ``fitted_exponent == sign * slope`` of the least-squares line through
    ``(log scale, log value)``; ``sign`` is +1 for growth/dimension fits and
    -1 for decay fits. Only points with a positive finite value enter the
    fit. A NaN exponent means the slope is undefined (fewer than two distinct
    usable scales) and ``notes`` says so.
    """

    kind: str
    fitted_exponent: float
    std_error: float
    data: list
    config_hash: str = ""
    seed: int | None = None
    notes: list = field(default_factory=list)
    sign: int = 1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.data:
            raise ValueError("report data must be nonempty")
        self.data = [(float(s), float(v)) for s, v in self.data]

    @classmethod
    def from_fit(cls, kind, data, sign=1, **kw) -> "ExperimentReport":
        notes = list(kw.pop("notes", []))
        scales, values = _usable(data)
        if len(scales) < len(data):
            notes.append(f"{len(data) - len(scales)} nonpositive values left out of the fit")
        if len(set(scales)) < 2:
            notes.append("slope undefined: fewer than two distinct scales")
            return cls(kind, float("nan"), float("nan"), list(data), notes=notes, sign=sign, **kw)
        slope, _, se = loglog_fit(scales, values)
        return cls(kind, sign * slope, se, list(data), notes=notes, sign=sign, **kw)

    @property
    def slope_defined(self) -> bool:
        return not math.isnan(self.fitted_exponent)

    def refit(self) -> float:
        """Re-derive the exponent from the stored data."""
        slope, _, _ = loglog_fit(*_usable(self.data))
        return self.sign * slope

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "fitted_exponent": self.fitted_exponent,
            "std_error": self.std_error,
            "sign": self.sign,
            "data": [[s, v] for s, v in self.data],
            "config_hash": self.config_hash,
            "seed": self.seed,
            "notes": list(self.notes),
            "extra": _plain(self.extra),
            "tool_version": __version__,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        exp = d["fitted_exponent"]
        se = d.get("std_error")
        return cls(
            kind=d["kind"],
            fitted_exponent=float("nan") if exp is None else float(exp),
            std_error=float("nan") if se is None else float(se),
            data=[tuple(x) for x in d["data"]],
            config_hash=d.get("config_hash", ""),
            seed=d.get("seed"),
            notes=list(d.get("notes", [])),
            sign=int(d.get("sign", 1)),
            extra=d.get("extra", {}),
        )

    def to_json(self) -> str:
        return dumps_17(self.to_dict()) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "scale", "value"])
        for s, v in self.data:
            w.writerow([self.kind, fmt17(s), fmt17(v)])
        return buf.getvalue()

    def to_gnuplot(self) -> str:
        lines = [
            f"# {self.kind}  exponent={fmt17(self.fitted_exponent)}  "
            f"config={self.config_hash}  seed={self.seed}  version={__version__}",
            "# scale value",
        ]
        lines += [f"{fmt17(s)} {fmt17(v)}" for s, v in self.data]
        return "\n".join(lines) + "\n"


def _usable(data):
    pts = [(float(s), float(v)) for s, v in data if s > 0 and v > 0 and math.isfinite(v)]
    return [s for s, _ in pts], [v for _, v in pts]


def _plain(o):
    if isinstance(o, dict):
        return {str(k): _plain(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_plain(v) for v in o]
    if isinstance(o, np.ndarray):
        return [_plain(v) for v in o.tolist()]
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, (complex, np.complexfloating)):
        return [float(o.real), float(o.imag)]
    return o


def load_report(text: str) -> ExperimentReport:
    return ExperimentReport.from_dict(json.loads(text))
