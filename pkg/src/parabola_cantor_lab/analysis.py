"""Exponent fits and statistical monitors for the random construction.

All bounds with unspecified constants are reported as ratios with trend
fits; nothing here asserts a constant.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .cantor import CantorLevel, SequencePlan
from .lambda_tools import sample_lambda_digit_set
from .measure import FourierSample, interval_mass, interval_phase_integral, max_window_mass, nu_fourier_values
from .report import ExperimentReport
from .utils import derive_rng, derive_seed

__all__ = [
    "ExperimentReport",
    "fit_decay_exponent",
    "fit_ball_exponent",
    "default_ball_radii",
    "check_martingale",
    "classify_regime",
    "check_increment_tails",
    "vdc_check",
    "check_local_mass",
]


def fit_decay_exponent(samples, min_annuli: int = 3) -> ExperimentReport:
    """Fit ``max_{annulus k} |hat nu| ~ 2^{-s k}``; the exponent is ``s``.

    Samples are grouped by ``k = floor(log2 |xi|)``; ``xi = 0`` is ignored.
    """
    groups = defaultdict(float)
    for s in samples:
        r = math.hypot(*s.xi)
        if r == 0:
            continue
        k = math.floor(math.log2(r))
        groups[k] = max(groups[k], abs(s.value))
    if len(groups) < min_annuli:
        raise ValueError(f"need samples in at least {min_annuli} annuli, got {len(groups)}")
    if all(v == 0 for v in groups.values()):
        raise ValueError("degenerate fit: every annulus maximum is zero")
    data = [(2.0**k, groups[k]) for k in sorted(groups)]
    return ExperimentReport.from_fit("decay", data, sign=-1)


def default_ball_radii(level: CantorLevel, count: int = 12) -> np.ndarray:
    lo = 1.0 / level.scale if level.j > 0 else 2.0**-10
    return np.geomspace(lo, 0.5, count)


def fit_ball_exponent(level: CantorLevel, radii=None, centers=None) -> ExperimentReport:
    """Fit ``max_x mu_j(B(x, r)) ~ r^s`` over the given radii.

    Without ``centers`` the maximum is exact over all real centers (it is
    attained where a ball end meets a cell edge); otherwise it is taken over
    the supplied centers only.
    """
    radii = default_ball_radii(level) if radii is None else np.asarray(radii, dtype=float)
    lo = 1.0 / level.scale if level.j > 0 else 0.0
    if np.any(radii > 1.0 + 1e-12) or np.any(radii < lo * (1 - 1e-12)) or np.any(radii <= 0):
        raise ValueError(f"radii must lie in [{lo:g}, 1] for level {level.j}")
    if np.unique(radii).size < 2:
        raise ValueError("ball exponent fit needs at least two distinct radii")
    data, where = [], []
    for r in radii:
        if centers is None:
            mass, left = max_window_mass(level, 2 * r)
            x = left + r
        else:
            cs = np.asarray(centers, dtype=float)
            ms = interval_mass(level, cs - r, cs + r)
            i = int(np.argmax(ms))
            mass, x = float(ms[i]), float(cs[i])
        data.append((float(r), mass))
        where.append(x)
    return ExperimentReport.from_fit("ball", data, sign=1, extra={"level": level.j, "centers": where})


# --------------------------------------------------------------------------
# resampling one level conditioned on the previous ones


def _resample_sets(plan: SequencePlan, j: int, parents, seed: int, trial: int, stats: dict):
    m, t = plan.base(j), plan.branching(j)
    out = []
    for a in parents:
        rng = derive_rng(seed, trial, j, int(a))
        S = sample_lambda_digit_set(m, t, plan.lambda_p, plan.threshold, restarts=plan.restarts, rng=rng, stats=stats)
        out.append(S.elements)
    return out


def _plan_of(levels) -> SequencePlan:
    plan = levels[0].plan
    if plan is None:
        raise ValueError("construction carries no plan")
    return plan


def _pair_cov(m: int, t: int):
    p = t / m
    var = p * (1 - p)
    cov = t * (t - 1) / (m * (m - 1)) - p * p if m > 1 else 0.0
    return var, cov


def check_martingale(levels, j: int, interval, trials: int = 10_000, seed: int = 0) -> ExperimentReport:
    """Resample level ``j+1`` on top of the fixed level ``j`` and compare mu_{j+1}(I) to mu_j(I).

    The z-score uses the exact variance of unfiltered uniform t-subsets; the
    fraction of draws the Lambda(p) filter rejected is reported next to it.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    plan = _plan_of(levels)
    if not 0 <= j < plan.depth:
        raise ValueError(f"level {j} has no successor in a depth-{plan.depth} plan")
    lev = levels[j]
    lo, hi = float(interval[0]), float(interval[1])
    m, t = plan.base(j + 1), plan.branching(j + 1)
    M1 = lev.scale * m
    beta1 = lev.beta * m / t
    target = float(interval_mass(lev, lo, hi))
    A = lev.array
    touch = A[((A + 1) / lev.scale > lo) & (A / lev.scale < hi)]
    # w[a, d] = beta_{j+1} |child cell (m a + d) cap I|
    cells = m * touch[:, None] + np.arange(m)[None, :]
    w = beta1 * np.clip(np.minimum((cells + 1) / M1, hi) - np.maximum(cells / M1, lo), 0.0, None)
    var1, cov = _pair_cov(m, t)
    var = float(np.sum(var1 * np.sum(w * w, axis=1) + cov * (np.sum(w, axis=1) ** 2 - np.sum(w * w, axis=1))))
    stats = {}
    masses = np.empty(trials)
    for tr in range(trials):
        sets = _resample_sets(plan, j + 1, touch, seed, tr, stats)
        masses[tr] = sum(w[i, list(S)].sum() for i, S in enumerate(sets))
    mean = float(masses.mean())
    se = math.sqrt(var / trials)
    diff = mean - target
    if se > 1e-15:
        z = diff / se
    else:
        z = 0.0 if abs(diff) <= 1e-12 else math.copysign(math.inf, diff)
    checkpoints = sorted({min(trials, 10**k) for k in range(0, 9)} | {trials})
    running = np.cumsum(masses)
    data = [(float(n), running[n - 1] / n / target if target > 0 else 1.0) for n in checkpoints]
    attempts = stats.get("attempts", 0)
    rej = stats.get("rejections", 0) / attempts if attempts else 0.0
    notes = [] if target > 0 else ["interval misses E_j: every resample has mass 0"]
    return ExperimentReport.from_fit(
        "martingale",
        data,
        sign=1,
        seed=seed,
        notes=notes,
        extra={
            "level": j,
            "interval": [lo, hi],
            "mean": mean,
            "target": target,
            "variance": var,
            "z": z,
            "trials": trials,
            "rejection_rate": rej,
            "draws": attempts,
        },
    )


# --------------------------------------------------------------------------
# Fourier increments


@dataclass(frozen=True)
class Regime:
    name: str  # "small" | "middle" | "large"
    k: int | None = None
    split: str | None = None  # "linear" if |xi1| >= 10|xi2| else "curved"


def classify_regime(xi, scales, j: int) -> Regime:
    """Place ``xi`` in the small / middle / large regime for the increment j -> j+1.

    Half-open brackets: small ``|xi| < M_{j+1}``; middle bracket k
    ``M_{j+1} M_k <= |xi| < M_{j+1} M_{k+1}`` (0 <= k < j), so a boundary
    value ``M_{j+1} M_k`` goes to bracket k; large ``|xi| >= M_{j+1} M_j``.
    """
    r = math.hypot(float(xi[0]), float(xi[1]))
    split = "linear" if abs(xi[0]) >= 10 * abs(xi[1]) else "curved"
    M1 = scales[j + 1]
    if r < M1:
        return Regime("small", None, split)
    if r >= M1 * scales[j]:
        return Regime("large", None, split)
    k = 0
    while k + 1 < j and r >= M1 * scales[k + 1]:
        k += 1
    return Regime("middle", k, split)


def _child_integrals(lev: CantorLevel, m: int, xis: np.ndarray) -> np.ndarray:
    """Interval integrals of every potential child cell, shape (|A_j|, m, n_xi)."""
    M1 = lev.scale * m
    cells = (m * lev.array[:, None] + np.arange(m)[None, :]).ravel()
    out = interval_phase_integral(cells[:, None] / M1, (cells[:, None] + 1) / M1, xis[None, :, 0], xis[None, :, 1])
    return out.reshape(len(lev), m, len(xis))


def _tail_threshold(reg: Regime, xi, lev: CantorLevel, scales, sigma: float) -> tuple[float, float]:
    """(threshold, Hoeffding exponent scale) for one xi; total mass of mu_j is 1."""
    j = lev.j
    Mj = scales[j]
    r = math.hypot(*xi)
    beta_j = lev.beta
    m1 = scales[j + 1] // Mj
    beta_1 = beta_j * m1 / _branching(lev, scales)
    if reg.name == "small":
        return Mj ** (-sigma / 2), Mj ** (1 - sigma) * beta_j / beta_1**2
    if reg.split == "linear":
        return Mj ** (-sigma / 2) * math.sqrt(Mj / r), Mj ** (1 - sigma) * beta_j / beta_1**2 / m1
    # curved: weight sum over windows I_i(x0) centred at the clamped stationary point
    x0 = 0.5 if xi[1] == 0 else min(1.0, max(0.0, -xi[0] / (2 * xi[1])))
    k = reg.k
    acc = 0.0
    for i in range(k + 1):
        h = 0.5 / scales[i]
        acc += (scales[i + 1] / scales[k]) ** 2 * float(interval_mass(lev, x0 - h, x0 + h))
    return Mj ** (-sigma / 2) * math.sqrt(acc), Mj ** (1 - sigma) * beta_j / beta_1**2


def _branching(lev: CantorLevel, scales) -> int:
    return lev.plan.branching(lev.j + 1)


def check_increment_tails(
    levels,
    j: int,
    xis,
    sigma: float,
    trials: int = 1000,
    seed: int = 0,
    multiplier: float = 10.0,
) -> ExperimentReport:
    """Exceedance frequency of ``|hat nu_{j+1}(xi) - hat nu_j(xi)|`` over ``multiplier * threshold``.

    ``sigma`` stands for both the decay parameter and alpha - epsilon in the
    middle-regime thresholds. Large-regime frequencies are rejected (the
    increment there has no random tail to test; see :func:`vdc_check`).
    """
    plan = _plan_of(levels)
    if not 0 < sigma < plan.alpha:
        raise ValueError("sigma must lie in (0, alpha)")
    if not 0 <= j < plan.depth:
        raise ValueError(f"level {j} has no successor in a depth-{plan.depth} plan")
    if trials < 1:
        raise ValueError("need at least one trial")
    lev = levels[j]
    scales = plan.scales
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    regimes = [classify_regime(x, scales, j) for x in xis]
    for x, reg in zip(xis, regimes):
        if reg.name == "large":
            raise ValueError(f"xi={tuple(x)} lies in the large regime; use vdc_check")
    m, t = plan.base(j + 1), plan.branching(j + 1)
    beta1 = lev.beta * m / t
    base = nu_fourier_values(lev, xis[:, 0], xis[:, 1])
    child = _child_integrals(lev, m, xis)
    thr = []
    shape = []
    for x, reg in zip(xis, regimes):
        a, b = _tail_threshold(reg, tuple(x), lev, scales, sigma)
        thr.append(a)
        shape.append(b)
    thr = np.asarray(thr)
    stats = {}
    exceed = np.zeros(len(xis), dtype=np.int64)
    worst = np.zeros(len(xis))
    for tr in range(trials):
        sets = _resample_sets(plan, j + 1, lev.elements, seed, tr, stats)
        val = np.zeros(len(xis), dtype=complex)
        for i, S in enumerate(sets):
            val += child[i, list(S), :].sum(axis=0)
        inc = np.abs(beta1 * val - base)
        exceed += inc >= multiplier * thr
        worst = np.maximum(worst, inc / thr)
    rows = []
    for x, reg, th, sh, e, w in zip(xis, regimes, thr, shape, exceed, worst):
        rows.append(
            {
                "xi": [float(x[0]), float(x[1])],
                "regime": reg.name,
                "k": reg.k,
                "split": reg.split,
                "threshold": float(th),
                "hoeffding_scale": float(sh),
                "exceed_freq": float(e) / trials,
                "max_ratio": float(w),
            }
        )
    data = [(max(math.hypot(*r["xi"]), 1e-300), r["max_ratio"]) for r in rows]
    return ExperimentReport.from_fit(
        "increment_tails",
        data,
        sign=1,
        seed=seed,
        extra={
            "level": j,
            "sigma": sigma,
            "multiplier": multiplier,
            "trials": trials,
            "total_exceedances": int(exceed.sum()),
            "rows": rows,
            "rejection_rate": stats.get("rejections", 0) / max(1, stats.get("attempts", 0)),
        },
    )


def vdc_check(levels, j1: int, xis) -> ExperimentReport:
    """Ratio ``|hat nu_{j1}(xi)| / (beta_{j1} m_{j1}^{1/2} log(M_{j1}) |xi|^{-1/2})`` in the large regime.

    Data points are the per-|xi| maxima. For ``xi2 = 0`` the explicit bound
    ``beta_{j1} M_{j1} / (pi |xi1|)`` is also checked.
    """
    if j1 < 1 or j1 >= len(levels):
        raise ValueError("j1 must index a level >= 1 of the construction")
    lev = levels[j1]
    prev = levels[j1 - 1]
    m1 = lev.scale // prev.scale
    floor = m1 * prev.scale**2
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    r = np.hypot(xis[:, 0], xis[:, 1])
    if np.any(r < floor * (1 - 1e-12)):
        raise ValueError(f"every |xi| must be >= m_(j+1) M_j^2 = {floor}")
    vals = np.abs(nu_fourier_values(lev, xis[:, 0], xis[:, 1]))
    denom = lev.beta * math.sqrt(m1) * math.log(lev.scale) / np.sqrt(r)
    ratio = vals / denom
    groups = defaultdict(float)
    for rr, q in zip(r, ratio):
        key = float(np.round(rr, 6))
        groups[key] = max(groups[key], float(q))
    data = sorted(groups.items())
    lin = xis[:, 1] == 0
    lin_ok = bool(np.all(vals[lin] <= lev.beta * lev.scale / (np.pi * np.abs(xis[lin, 0])) * (1 + 1e-9)))
    return ExperimentReport.from_fit(
        "vdc",
        data,
        sign=1,
        extra={"level": j1, "max_ratio": float(ratio.max()), "linear_bound_ok": lin_ok, "linear_samples": int(lin.sum())},
    )


def check_local_mass(levels, pairs=None, centers=None) -> ExperimentReport:
    """``max_x0 mu_j(I_i(x0)) / (beta_i M_i^{-1})`` with ``|I_i| = M_i^{-1}``.

    ``pairs`` defaults to every ``i <= j``. The data are ``(M_j, max_i ratio)``
    so the fitted exponent is the growth rate against M_j.
    """
    J = len(levels) - 1
    if pairs is None:
        pairs = [(i, j) for j in range(J + 1) for i in range(j + 1)]
    table = {}
    for i, j in pairs:
        if not 0 <= i <= j <= J:
            raise ValueError(f"need 0 <= i <= j <= {J}, got ({i}, {j})")
        li, lj = levels[i], levels[j]
        width = 1.0 / li.scale
        if centers is None:
            mass, _ = max_window_mass(lj, width)
        else:
            cs = np.asarray(centers, dtype=float)
            mass = float(np.max(interval_mass(lj, cs - width / 2, cs + width / 2)))
        table[(i, j)] = mass / (li.beta / li.scale)
    per_j = defaultdict(float)
    for (i, j), v in table.items():
        per_j[j] = max(per_j[j], v)
    data = [(float(levels[j].scale), per_j[j]) for j in sorted(per_j)]
    return ExperimentReport.from_fit(
        "local_mass",
        data,
        sign=1,
        extra={"ratios": [[i, j, v] for (i, j), v in sorted(table.items())], "max_ratio": max(table.values())},
    )
