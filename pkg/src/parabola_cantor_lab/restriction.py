"""Discrete restriction constants, the local extension probe, heavy balls, Knapp slabs."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cantor import CantorLevel, SequencePlan, build_construction
from .lambda_tools import (
    DEFAULT_ITERATIONS,
    CoefficientVector,
    ConstantEstimate,
    _ascend,
    _is_even_int,
    estimate_Kp,
)
from .measure import interval_mass, interval_phase_integral
from .report import ExperimentReport
from .utils import derive_rng

PROBE_PANEL = 0.5
PROBE_NODES = 8
PROBE_MAX_ENTRIES = 60_000_000


def estimate_Kp_line(level: CantorLevel, p: float, restarts: int = 16, seed: int = 0, **kw) -> ConstantEstimate:
    """K_p of the frequency set A_j on the line."""
    return estimate_Kp(level.elements, p, restarts=restarts, seed=seed, parabola=False, **kw)


def estimate_Kp_parabola(
    level: CantorLevel,
    p: float,
    restarts: int = 16,
    seed: int = 0,
    allow_fallback: bool = True,
    **kw,
) -> ConstantEstimate:
    """K_p of ``{(b, b^2) : b in A_j}``; exact norms for even integer p.

    Other p use a 2D grid, allowed only up to depth 3.
    """
    if not _is_even_int(p):
        if not allow_fallback or level.j > 3:
            raise ValueError(f"p={p} needs the grid fallback, which is limited to depth <= 3")
    return estimate_Kp(level.elements, p, restarts=restarts, seed=seed, parabola=True, **kw)


def composition_monitor(levels, p: float, restarts: int = 8, seed: int = 0) -> ExperimentReport:
    """Compare K_p(A_j) with the product of per-level digit-set constants.

    ``C_comp`` is the smallest constant with
    ``K_p(A_j) <= C_comp^j * prod_{i <= j} max_a K_p(S_{i,a})`` on this run.
    """
    data, rows = [], []
    log_prod = 0.0
    c_comp = 1.0
    cache = {}
    for lev in levels[1:]:
        best = 0.0
        for d in lev.digit_sets:
            key = d.elements.elements
            if key not in cache:
                cache[key] = estimate_Kp(key, p, restarts=restarts, seed=seed).value
            best = max(best, cache[key])
        log_prod += math.log(best)
        k = estimate_Kp_line(lev, p, restarts=restarts, seed=seed).value
        c_comp = max(c_comp, math.exp((math.log(k) - log_prod) / lev.j))
        rows.append({"j": lev.j, "K": k, "digit_product": math.exp(log_prod)})
        data.append((float(lev.scale) ** 2, k))
    for r in rows:
        r["bound"] = r["digit_product"] * c_comp ** r["j"]
    return ExperimentReport.from_fit("composition", data, sign=1, seed=seed, extra={"p": p, "C_comp": c_comp, "rows": rows})


def kp_growth_study(
    plan: SequencePlan,
    p: float,
    depths,
    seeds,
    restarts: int = 3,
    iterations: int = DEFAULT_ITERATIONS,
    tol: float = 1e-8,
) -> ExperimentReport:
    """Median over seeds of K_p(P_j) per depth, fitted against N_j = M_j^2."""
    depths = sorted(set(int(d) for d in depths))
    if depths and depths[-1] > plan.depth:
        raise ValueError(f"depth {depths[-1]} exceeds the plan depth {plan.depth}")
    rows = []
    per_depth = {d: [] for d in depths}
    for s in seeds:
        levels = build_construction(plan, s)
        for d in depths:
            if p == 2:
                est_val, method = 1.0, "exact"
            else:
                est = estimate_Kp_parabola(levels[d], p, restarts=restarts, seed=s, iterations=iterations, tol=tol)
                est_val, method = est.value, est.grid_or_exact
            per_depth[d].append(est_val)
            rows.append({"depth": d, "N_j": plan.scales[d] ** 2, "K_p": est_val, "method": method, "seed": s})
    data = [(float(plan.scales[d] ** 2), float(np.median(per_depth[d]))) for d in depths]
    return ExperimentReport.from_fit("kp_growth", data, sign=1, extra={"p": p, "rows": rows})


# --------------------------------------------------------------------------
# local extension probe


@dataclass
class RestrictionProbeResult:
    p: float
    q: float
    R: float
    level: int
    constant_estimate: ConstantEstimate
    witness_function: CoefficientVector

    def reevaluate(self, cell_level: CantorLevel) -> float:
        op = _ProbeOperator(cell_level, self.R, self.p)
        return op.ratio(self.witness_function.entries)


class _ProbeOperator:
    """``c -> (x -> beta sum_b c_b int_{cell b} e(x1 s + x2 s^2) ds)`` on a box grid.

    Composite Gauss-Legendre quadrature on ``[-R/2, R/2]^2``: panels of width
    PROBE_PANEL with PROBE_NODES nodes each.
    """

    def __init__(self, level: CantorLevel, R: float, p: float):
        self.p = float(p)
        panels = max(1, int(math.ceil(R / PROBE_PANEL)))
        h = R / panels
        z, w = np.polynomial.legendre.leggauss(PROBE_NODES)
        left = -R / 2 + h * np.arange(panels)
        x = (left[:, None] + h / 2 * (z[None, :] + 1)).ravel()
        wx = np.tile(w * h / 2, panels)
        n = x.size**2 * len(level)
        if n > PROBE_MAX_ENTRIES:
            raise MemoryError(f"probe grid needs {n} matrix entries (cap {PROBE_MAX_ENTRIES})")
        X1, X2 = np.meshgrid(x, x, indexing="ij")
        self.w = np.outer(wx, wx).ravel()
        A = level.array
        M = float(level.scale)
        # extension kernel e(+x.xi) is the conjugate of the e(-x.xi) integral
        T = np.empty((X1.size, A.size), dtype=complex)
        for i, b in enumerate(A):
            T[:, i] = np.conj(interval_phase_integral(b / M, (b + 1) / M, X1.ravel(), X2.ravel()))
        self.T = level.beta * T
        self.l2_scale = level.beta / M  # ||f||_{L^2(nu)}^2 = (beta/M) sum |c_b|^2

    def power(self, c) -> float:
        return float(np.sum(self.w * np.abs(self.T @ c) ** self.p))

    def power_grad(self, c):
        f = self.T @ c
        a = np.abs(f)
        phi = float(np.sum(self.w * a**self.p))
        g = 0.5 * self.p * (self.T.conj().T @ (self.w * a ** (self.p - 2) * f))
        return phi, g

    def norm(self, c) -> float:
        return self.power(c) ** (1.0 / self.p)

    def ratio(self, c) -> float:
        c = np.asarray(c, dtype=complex)
        return self.norm(c) / math.sqrt(self.l2_scale * float(np.sum(np.abs(c) ** 2)))


def local_restriction_probe(
    level: CantorLevel,
    R: float,
    p: float,
    restarts: int = 1,
    seed: int = 0,
    iterations: int = 60,
    tol: float = 1e-6,
    q: float = 2.0,
) -> RestrictionProbeResult:
    """Best ratio ``||ext(f dnu_j)||_{L^p(B(R))} / ||f||_{L^2(nu_j)}`` over cellwise-constant f."""
    op = _ProbeOperator(level, R, p)
    n = len(level)
    A = level.array
    starts = [("constant", np.ones(n, dtype=complex))]
    single = np.zeros(n, dtype=complex)
    single[0] = 1
    starts.append(("single-cell", single))
    # Knapp-type: the cells inside one ball of radius 1/R around the heaviest point
    a, _ = find_heavy_ball(level, min(1.0, 1.0 / R))
    knapp = ((A + 0.5) / level.scale >= a - 1.0 / R) & ((A + 0.5) / level.scale <= a + 1.0 / R)
    if knapp.any():
        starts.append(("knapp", knapp.astype(complex)))
    for r in range(restarts):
        rng = derive_rng(seed, r)
        starts.append((f"random{r}", rng.standard_normal(n) + 1j * rng.standard_normal(n)))
    best_c, best = None, -1.0
    history = []
    total_it, all_conv = 0, True
    for name, c0 in starts:
        if n > 1 and p != 2:
            c, _, it, conv = _ascend(op, c0, iterations, tol)
            total_it += it
            all_conv &= conv
        else:
            c = c0 / np.linalg.norm(c0)
        val = op.ratio(c)
        history.append((name, val))
        if val > best:
            best_c, best = c, val
    est = ConstantEstimate(
        value=best,
        witness=CoefficientVector(tuple(int(b) for b in A), best_c),
        p=float(p),
        parabola=True,
        restarts=restarts,
        iterations=total_it,
        grid_or_exact="gauss-box",
        converged=all_conv,
        history=history,
    )
    return RestrictionProbeResult(float(p), float(q), float(R), level.j, est, est.witness)


def local_restriction_sweep(level: CantorLevel, radii, p: float, restarts: int = 1, seed: int = 0, **kw) -> ExperimentReport:
    results = [local_restriction_probe(level, R, p, restarts=restarts, seed=seed, **kw) for R in radii]
    data = [(r.R, r.constant_estimate.value) for r in results]
    return ExperimentReport.from_fit(
        "local_restriction",
        data,
        sign=1,
        seed=seed,
        extra={"p": p, "level": level.j, "converged": [r.constant_estimate.converged for r in results]},
    )


# --------------------------------------------------------------------------
# heavy balls and the Knapp slab


def find_heavy_ball(level: CantorLevel, r: float) -> tuple[float, float]:
    """Exact ``argmax_a mu_j(B(a, r))`` with ties broken to the smallest center.

    Candidates are the cell grid ``k / M_j`` together with every center at
    which a ball end meets a cell edge (the mass is piecewise linear in a
    with breaks only there, so the maximum is among them).
    """
    if not 0 < r <= 1:
        raise ValueError("radius must lie in (0, 1]")
    A = level.array
    M = float(level.scale)
    edges = np.unique(np.concatenate([A, A + 1])) / M
    cand = np.unique(np.concatenate([edges - r, edges + r, A / M, (A + 1) / M]))
    masses = interval_mass(level, cand - r, cand + r)
    best = float(masses.max())
    k = int(np.flatnonzero(masses >= best * (1 - 1e-12))[0])
    return float(cand[k]), float(masses[k])


@dataclass(frozen=True)
class KnappDatum:
    r: float
    center: float
    mass: float
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs


SLAB_NODES = 32
SLAB_CHECK_NODES = 48
SLAB_FRACTION = 0.01


def slab_volume(r: float) -> float:
    """Lebesgue measure of the slab ``|xi2| <= r^-2/100, |xi1 + 2 a xi2| <= r^-1/100``."""
    return 4.0 * (SLAB_FRACTION / r**2) * (SLAB_FRACTION / r)


def _ball_cells(level: CantorLevel, a: float, r: float):
    A = level.array
    M = float(level.scale)
    lo = np.maximum(A / M, a - r)
    hi = np.minimum((A + 1) / M, a + r)
    keep = hi > lo
    return lo[keep], hi[keep]


def _slab_lp(level: CantorLevel, a: float, r: float, p: float, nodes: int) -> float:
    lo, hi = _ball_cells(level, a, r)
    z, w = np.polynomial.legendre.leggauss(nodes)
    U, V = np.meshgrid(z, z, indexing="ij")
    W = np.outer(w, w).ravel()
    s2 = SLAB_FRACTION / r**2
    s1 = SLAB_FRACTION / r
    xi2 = (s2 * V).ravel()
    xi1 = (-2 * a * xi2 + s1 * U.ravel())
    vals = level.beta * interval_phase_integral(lo[:, None], hi[:, None], xi1[None, :], xi2[None, :]).sum(axis=0)
    integral = float(np.sum(W * np.abs(vals) ** p)) * s1 * s2
    return integral ** (1.0 / p)


def knapp_experiment(level: CantorLevel, p: float, q: float, radii, alpha: float | None = None):
    """Heavy-ball Knapp data per radius and the fitted exponent of lhs/rhs in r.

    Returns ``(data, report)``. The report's ``extra`` carries the implied
    critical exponent ``p_hat = (d+1) / (exponent + (d+1)/p)`` (where the
    fitted exponent would vanish) and the bound ``q'(d+1)/alpha``.
    """
    radii = np.asarray(radii, dtype=float)
    floor = 1.0 / level.scale if level.j > 0 else 0.0
    if np.any(radii <= 0) or np.any(radii < floor * (1 - 1e-12)) or np.any(radii > 1):
        raise ValueError(f"radii must lie in [{floor:g}, 1]")
    if q <= 1:
        raise ValueError("q must exceed 1")
    out = []
    for r in radii:
        a, mass = find_heavy_ball(level, float(r))
        lhs = _slab_lp(level, a, r, p, SLAB_NODES)
        check = _slab_lp(level, a, r, p, SLAB_CHECK_NODES)
        if not math.isclose(lhs, check, rel_tol=1e-8):
            raise ArithmeticError(f"slab quadrature not converged at r={r}: {lhs} vs {check}")
        out.append(KnappDatum(float(r), a, mass, lhs, mass ** (1.0 / q)))
    rep = ExperimentReport.from_fit("knapp", [(d.r, d.ratio) for d in out], sign=1)
    d = 2
    qp = q / (q - 1)
    e = rep.fitted_exponent
    denom = e + (d + 1) / p
    rep.extra.update(
        {
            "p": p,
            "q": q,
            "q_prime": qp,
            "level": level.j,
            "p_hat": (d + 1) / denom if denom > 0 else math.inf,
            "predicted_exponent": None if alpha is None else -(d + 1) / p + alpha * (1 - 1 / q),
            "bound": None if alpha is None else qp * (d + 1) / alpha,
            "rows": [[x.r, x.center, x.mass, x.lhs, x.rhs, x.ratio] for x in out],
        }
    )
    return out, rep
