"""Multiscale random Cantor sets: branching plans, digit sampling, levels, persistence.

Level j lives at scale M_j^{-1} with M_j = m_1 ... m_j. Its frequency set is
A_j = union over parents a in A_{j-1} of (m_j a + S_{j,a}), where each S_{j,a}
is a t_j-subset of [0, m_j) accepted by the Lambda(p) test.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .lambda_tools import (
    DEFAULT_RESTARTS,
    DEFAULT_THRESHOLD,
    FrequencySet1D,
    LambdaSamplingError,
    sample_lambda_digit_set,
)
from .utils import ceil_tol, derive_rng, derive_seed

FILE_VERSION = 1
PRESETS = ("factorial", "constant-then-grow")


class ConstructionError(ValueError):
    """A construction file or level list violates a structural invariant."""


@dataclass(frozen=True)
class SequencePlan:
    alpha: float
    digit_bases: tuple
    t: tuple
    lambda_p: float
    restriction_p: float
    B_witness: float
    threshold: float = DEFAULT_THRESHOLD
    restarts: int = DEFAULT_RESTARTS
    notes: tuple = ()

    @property
    def depth(self) -> int:
        return len(self.digit_bases)

    @property
    def n(self) -> tuple:
        return tuple(m * m for m in self.digit_bases)

    @property
    def scales(self) -> tuple:
        """``(M_0, ..., M_J)`` with ``M_j = N_j^{1/2}``."""
        out = [1]
        for m in self.digit_bases:
            out.append(out[-1] * m)
        return tuple(out)

    @property
    def sizes(self) -> tuple:
        """``(|A_0|, ..., |A_J|)``."""
        out = [1]
        for t in self.t:
            out.append(out[-1] * t)
        return tuple(out)

    def base(self, j: int) -> int:
        return self.digit_bases[j - 1]

    def branching(self, j: int) -> int:
        return self.t[j - 1]

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "bases": list(self.digit_bases),
            "t": list(self.t),
            "thresholds": [self.threshold] * self.depth,
            "restarts": self.restarts,
        }


def preset_bases(name: str, depth: int) -> tuple:
    """Named digit-base schedules.

    ``factorial``: m_j = j + 1. ``constant-then-grow``: m_j = 3 for the first
    half of the levels, then one larger per level.
    """
    if name == "factorial":
        return tuple(j + 1 for j in range(1, depth + 1))
    if name == "constant-then-grow":
        h = depth // 2
        return tuple(3 if j <= h else 3 + (j - h) for j in range(1, depth + 1))
    raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")


def _b_witness(scales) -> float:
    # smallest B with M_{2j} / M_j^2 <= B^j for all 2j <= J
    J = len(scales) - 1
    b = 1.0
    for j in range(1, J // 2 + 1):
        b = max(b, (scales[2 * j] / scales[j] ** 2) ** (1.0 / j))
    return b


def make_plan(
    alpha: float,
    digit_bases,
    depth: int | None = None,
    threshold: float = DEFAULT_THRESHOLD,
    restarts: int = DEFAULT_RESTARTS,
) -> SequencePlan:
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    bases = tuple(int(m) for m in digit_bases)
    if depth is None:
        depth = len(bases)
    if depth < 0 or depth > len(bases):
        raise ValueError(f"depth {depth} needs that many digit bases (got {len(bases)})")
    bases = bases[:depth]
    for j, m in enumerate(bases, 1):
        if m < 2:
            raise ValueError(f"digit base m_{j} = {m} must be >= 2")
        if j > 1 and m < bases[j - 2]:
            raise ValueError(f"digit bases must be nondecreasing (m_{j} = {m} < m_{j-1} = {bases[j-2]})")
    t = []
    for j, m in enumerate(bases, 1):
        tj = ceil_tol(m**alpha)
        if tj > m:
            raise ValueError(f"t_{j} = {tj} exceeds m_{j} = {m}: alpha too large for this base")
        t.append(tj)
    notes = []
    if depth >= 3 and bases[-1] == bases[depth // 2]:
        notes.append("digit bases stop growing on this prefix: N_j grows only exponentially")
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
    scales = [1]
    for m in bases:
        scales.append(scales[-1] * m)
    return SequencePlan(
        alpha=float(alpha),
        digit_bases=bases,
        t=tuple(t),
        lambda_p=2.0 / alpha,
        restriction_p=6.0 / alpha,
        B_witness=_b_witness(scales),
        threshold=float(threshold),
        restarts=int(restarts),
        notes=tuple(notes),
    )


@dataclass(frozen=True)
class DigitSet:
    j: int
    parent: int
    elements: FrequencySet1D
    verified_Kp: float
    seed: int


@dataclass(frozen=True)
class CantorLevel:
    """A_j at scale ``scale = M_j``; E_j is the union of ``[b, b+1] / M_j``."""

    j: int
    elements: tuple
    scale: int
    root_seed: int | None = None
    digit_sets: tuple = ()
    plan: SequencePlan | None = field(default=None, compare=False, repr=False)

    @property
    def beta(self) -> float:
        return self.scale / len(self.elements)

    @cached_property
    def array(self) -> np.ndarray:
        return np.asarray(self.elements, dtype=np.int64)

    @property
    def cell(self) -> float:
        return 1.0 / self.scale

    def __len__(self):
        return len(self.elements)


def trivial_level(plan: SequencePlan | None = None, root_seed: int | None = None) -> CantorLevel:
    return CantorLevel(0, (0,), 1, root_seed, (), plan)


def sample_children(plan: SequencePlan, j: int, parents, root_seed: int, stats: dict | None = None):
    """Digit sets for level ``j`` over the given parents, seeded by ``(root_seed, j, a)``."""
    m, t = plan.base(j), plan.branching(j)
    out = []
    for a in parents:
        s = derive_seed(root_seed, j, int(a))
        st = {}
        try:
            S = sample_lambda_digit_set(
                m, t, plan.lambda_p, plan.threshold, seed=s, restarts=plan.restarts, rng=derive_rng(s), stats=st
            )
        except LambdaSamplingError as e:
            raise LambdaSamplingError(f"level {j}, parent {a}: {e}", e.best, e.best_value) from e
        if stats is not None:
            stats["attempts"] = stats.get("attempts", 0) + st.get("attempts", 0)
            stats["rejections"] = stats.get("rejections", 0) + st.get("rejections", 0)
        out.append(DigitSet(j, int(a), S, float(st["value"]), s))
    return out


def build_level(plan: SequencePlan, prev: CantorLevel, j: int, seed: int, stats: dict | None = None) -> CantorLevel:
    if prev.j != j - 1:
        raise ValueError(f"previous level is {prev.j}, expected {j - 1}")
    if not 1 <= j <= plan.depth:
        raise ValueError(f"level {j} outside plan depth {plan.depth}")
    m = plan.base(j)
    sets = sample_children(plan, j, prev.elements, seed, stats)
    A = sorted(m * d.parent + e for d in sets for e in d.elements.elements)
    return CantorLevel(j, tuple(A), prev.scale * m, seed, tuple(sets), plan)


def build_construction(plan: SequencePlan, root_seed: int, stats: dict | None = None) -> list:
    levels = [trivial_level(plan, root_seed)]
    for j in range(1, plan.depth + 1):
        levels.append(build_level(plan, levels[-1], j, root_seed, stats))
    return levels


# --------------------------------------------------------------------------
# invariants and persistence


def check_levels(levels) -> None:
    """Raise :class:`ConstructionError` naming the first broken invariant."""
    if not levels:
        raise ConstructionError("empty level list")
    if levels[0].elements != (0,) or levels[0].scale != 1:
        raise ConstructionError("level 0 must be A_0 = {0} at scale 1")
    for prev, lev in zip(levels, levels[1:]):
        if lev.j != prev.j + 1:
            raise ConstructionError(f"level indices not consecutive at j={lev.j}")
        m, rem = divmod(lev.scale, prev.scale)
        if rem or m < 2:
            raise ConstructionError(f"scale of level {lev.j} is not an integer multiple of level {prev.j}")
        A = lev.elements
        if list(A) != sorted(set(A)) or (A and (A[0] < 0 or A[-1] >= lev.scale)):
            raise ConstructionError(f"A_{lev.j} must be sorted distinct integers in [0, {lev.scale})")
        parents = set(prev.elements)
        for b in A:
            if b // m not in parents:
                raise ConstructionError(f"nesting violated: {b} in A_{lev.j} has no parent in A_{prev.j}")
        counts = {}
        for b in A:
            counts[b // m] = counts.get(b // m, 0) + 1
        if len(set(counts.values())) > 1 or len(counts) != len(parents):
            raise ConstructionError(f"cardinality violated at level {lev.j}: parents have unequal child counts")
        if lev.plan is not None and len(A) != lev.plan.sizes[lev.j]:
            raise ConstructionError(f"cardinality violated: |A_{lev.j}| = {len(A)} != {lev.plan.sizes[lev.j]}")
        if lev.digit_sets:
            rebuilt = sorted(m * d.parent + e for d in lev.digit_sets for e in d.elements.elements)
            if rebuilt != list(A):
                raise ConstructionError(f"digit sets of level {lev.j} do not reproduce A_{lev.j}")
            if lev.plan is not None and any(d.verified_Kp > lev.plan.threshold for d in lev.digit_sets):
                raise ConstructionError(f"a digit set at level {lev.j} exceeds the acceptance threshold")


def construction_to_dict(levels) -> dict:
    check_levels(levels)
    plan = levels[0].plan
    return {
        "version": FILE_VERSION,
        "plan": plan.to_dict() if plan is not None else None,
        "root_seed": levels[0].root_seed,
        "levels": [
            {
                "j": lev.j,
                "A_j": list(lev.elements),
                "beta": lev.beta,
                "digit_sets": [
                    {"parent": d.parent, "elements": list(d.elements.elements), "verified_Kp": d.verified_Kp, "seed": d.seed}
                    for d in lev.digit_sets
                ],
            }
            for lev in levels
        ],
    }


def save_construction(levels, path) -> None:
    from .utils import dumps_17

    Path(path).write_text(dumps_17(construction_to_dict(levels)) + "\n")


def construction_from_dict(d: dict) -> list:
    if not isinstance(d, dict) or "version" not in d:
        raise ConstructionError("malformed construction file: missing version")
    if d["version"] != FILE_VERSION:
        raise ConstructionError(f"version mismatch: file has {d['version']}, expected {FILE_VERSION}")
    try:
        pd = d["plan"]
        plan = None
        if pd is not None:
            plan = make_plan(pd["alpha"], pd["bases"], threshold=pd["thresholds"][0] if pd["thresholds"] else DEFAULT_THRESHOLD,
                             restarts=pd.get("restarts", DEFAULT_RESTARTS))
            if list(plan.t) != list(pd["t"]):
                raise ConstructionError("plan t does not match the bases and alpha")
        root = d["root_seed"]
        raw = d["levels"]
        if not raw:
            raise ConstructionError("empty level list")
        levels = []
        scale = 1
        for k, L in enumerate(raw):
            j = int(L["j"])
            if k > 0:
                scale *= plan.base(j) if plan is not None else _infer_base(L, levels[-1])
            sets = tuple(
                DigitSet(j, int(s["parent"]), FrequencySet1D(tuple(int(e) for e in s["elements"]), scale // levels[-1].scale),
                         float(s["verified_Kp"]), int(s["seed"]))
                for s in L["digit_sets"]
            )
            levels.append(CantorLevel(j, tuple(int(b) for b in L["A_j"]), scale, root, sets, plan))
            if not math.isclose(levels[-1].beta, float(L["beta"]), rel_tol=1e-12):
                raise ConstructionError(f"beta of level {j} inconsistent with A_{j}")
    except ConstructionError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise ConstructionError(f"malformed construction file: {e}") from e
    if plan is not None and len(levels) != plan.depth + 1:
        raise ConstructionError("number of levels does not match the plan depth")
    check_levels(levels)
    return levels


def _infer_base(L, prev) -> int:
    sets = L["digit_sets"]
    if not sets:
        raise ConstructionError(f"cannot infer the digit base of level {L['j']} without a plan")
    return max(max(s["elements"]) for s in sets) + 1


def load_construction(path) -> list:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConstructionError(f"malformed construction file: {e}") from e
    return construction_from_dict(d)
