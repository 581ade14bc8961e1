"""The Cantor densities mu_j, their parabola lifts nu_j, ball masses and Fourier transforms.

Fourier convention: ``hat nu(xi) = int e(-x.xi) dnu`` with ``e(t) = exp(2 pi i t)``,
so frequencies are in cycles per unit.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import wofz

from .utils import derive_rng, dumps_17, fmt17

# |A| + |B| at or below this uses the power series of the scaled integral
_SERIES_RADIUS = 4.0
_SERIES_TERMS = 44


def _series_table():
    # coefficient of A^k B^(n-k) in sum_n (-i)^n/n! int_{-1}^{1} (A u + B u^2)^n du
    rows = []
    for n in range(_SERIES_TERMS + 1):
        for k in range(0, n + 1, 2):  # odd total powers of u integrate to zero
            q = k + 2 * (n - k)
            coef = (-1j) ** n / math.factorial(n) * math.comb(n, k) * 2.0 / (q + 1)
            rows.append((k, n - k, coef))
    return rows


_SERIES = _series_table()


def _jhat_series(A, B):
    out = np.zeros(np.broadcast(A, B).shape, dtype=complex)
    if out.size == 0:
        return out
    ra, rb = float(np.max(A)), float(np.max(B))
    powA = {}
    powB = {}
    for k, l, coef in _SERIES:
        # skip terms that cannot reach 1e-18 anywhere in the batch
        if abs(coef) * ra**k * rb**l < 1e-18:
            continue
        if k not in powA:
            powA[k] = A**k
        if l not in powB:
            powB[l] = B**l
        out += coef * powA[k] * powB[l]
    return out


def _jhat_faddeeva(A, B):
    """``int_{-1}^{1} exp(-i(A u + B u^2)) du`` for A >= 0, B > 0.

    Completing the square and writing erfc(z) = exp(-z^2) w(iz) keeps every
    exponential factor on the original (moderate) phase ``A s + B s^2``.
    """
    sb = np.sqrt(B)
    rot = np.exp(0.25j * np.pi)
    z0 = rot * (-sb + A / (2 * sb))
    z1 = rot * (sb + A / (2 * sb))
    t0 = np.exp(-1j * (-A + B)) * wofz(1j * z0)
    t1 = np.exp(-1j * (A + B)) * wofz(1j * z1)
    return math.sqrt(math.pi) / (2 * rot * sb) * (t0 - t1)


def _jhat(A, B):
    """Scaled integral ``int_{-1}^{1} exp(-i(A u + B u^2)) du`` (vectorized)."""
    A, B = np.broadcast_arrays(np.abs(np.asarray(A, dtype=float)), np.asarray(B, dtype=float))
    out = np.empty(A.shape, dtype=complex)
    neg = B < 0
    Bp = np.abs(B)
    small = (A + Bp) <= _SERIES_RADIUS
    if small.any():
        out[small] = _jhat_series(A[small], Bp[small])
    lin = ~small & (Bp == 0)
    if lin.any():
        a = A[lin]
        out[lin] = 2 * np.sin(a) / a
    quad = ~small & (Bp > 0)
    if quad.any():
        out[quad] = _jhat_faddeeva(A[quad], Bp[quad])
    # B < 0: the integrand is the conjugate of the (A, |B|) one after u -> -u
    out[neg] = np.conj(out[neg])
    return out


def interval_phase_integral(x0, x1, xi1, xi2):
    """``int_{x0}^{x1} e(-x xi1 - x^2 xi2) dx`` in closed form (broadcasting).

    The phase is expanded about the interval midpoint; the remaining
    quadratic-phase integral is a power series for small total phase and a
    scaled complex error function (Faddeeva) otherwise.
    """
    x0, x1, xi1, xi2 = (np.asarray(v, dtype=float) for v in (x0, x1, xi1, xi2))
    c = 0.5 * (x0 + x1)
    h = 0.5 * (x1 - x0)
    t = xi1 * c + xi2 * c * c
    t = t - np.round(t)
    a = 2 * np.pi * (xi1 + 2 * xi2 * c)
    b = 2 * np.pi * xi2
    val = h * np.exp(-2j * np.pi * t) * _jhat(a * h, b * h * h)
    return val[()] if val.ndim == 0 else val


def adaptive_phase_quadrature(x0: float, x1: float, xi1: float, xi2: float, order: int = 8) -> complex:
    """Independent oracle for :func:`interval_phase_integral`.

    Uniform subdivision so every piece spans at most a quarter phase cycle
    (bounded by the largest |xi1 + 2 x xi2| on the interval), then an
    ``order``-point Gauss-Legendre rule per piece.
    """
    if not x1 > x0:
        raise ValueError("need x0 < x1")
    nodes, weights = np.polynomial.legendre.leggauss(order)
    L = x1 - x0
    dmax = max(abs(xi1 + 2 * x0 * xi2), abs(xi1 + 2 * x1 * xi2))
    pieces = max(1, int(math.ceil(4.0 * dmax * L)))
    half = 0.5 * L / pieces
    offsets = half * (nodes + 1.0)
    total = 0.0 + 0.0j
    chunk = max(1, 2_000_000 // order)
    for start in range(0, pieces, chunk):
        left = x0 + L * np.arange(start, min(pieces, start + chunk), dtype=float) / pieces
        x = left[:, None] + offsets[None, :]
        ph = x * (xi1 + x * xi2)
        ph -= np.floor(ph)
        total += np.sum(np.exp(-2j * np.pi * ph) @ weights)
    total *= half
    return complex(total)


# --------------------------------------------------------------------------
# measures


@dataclass(frozen=True)
class FourierSample:
    xi: tuple
    value: complex
    level: int
    method: str = "closed-form"

    @property
    def modulus(self) -> float:
        return abs(self.value)


class ParabolaMeasure:
    """nu_j: the density beta_j 1_{E_j} on [0,1] lifted to the arc x -> (x, x^2).

    ``level`` is any object with ``j``, ``elements`` (sorted A_j), ``scale``
    (N_j^{1/2}) and ``beta``.
    """

    def __init__(self, level):
        self.level = level
        self.j = int(level.j)
        self.A = np.asarray(level.elements, dtype=np.int64)
        self.M = int(level.scale)
        self.beta = float(level.beta)

    @property
    def intervals(self) -> np.ndarray:
        return np.stack([self.A / self.M, (self.A + 1) / self.M], axis=1)

    @property
    def weight(self) -> float:
        return self.beta

    @property
    def total_mass(self) -> float:
        return self.beta * self.A.size / self.M

    def fourier(self, xi1, xi2) -> np.ndarray:
        return nu_fourier_values(self.level, xi1, xi2)

    def ball_mass(self, x, r):
        return mu_ball_mass(self.level, x, r)


def _cells_measure(A: np.ndarray, u) -> np.ndarray:
    """Measure, in cell units, of ``E cap [0, u/M]`` (u in cell units)."""
    u = np.asarray(u, dtype=float)
    full = np.searchsorted(A, u - 1.0, side="right")
    fl = np.floor(u)
    idx = np.searchsorted(A, fl)
    inside = (idx < A.size) & (A[np.minimum(idx, A.size - 1)] == fl)
    return full + np.where(inside, u - fl, 0.0)


def interval_mass(level, lo, hi):
    """Exact mu_j-mass of ``[lo, hi]`` (broadcasting)."""
    A = np.asarray(level.elements, dtype=np.int64)
    M = float(level.scale)
    lo = np.clip(np.asarray(lo, dtype=float) * M, 0.0, M)
    hi = np.clip(np.asarray(hi, dtype=float) * M, 0.0, M)
    cells = _cells_measure(A, hi) - _cells_measure(A, lo)
    return cells / A.size


def mu_ball_mass(level, x, r):
    """Exact mu_j-mass of the ball ``[x - r, x + r]``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("radius must be positive")
    out = interval_mass(level, np.asarray(x) - r, np.asarray(x) + r)
    return float(out) if np.ndim(out) == 0 else out


def max_window_mass(level, width: float) -> tuple[float, float]:
    """Exact ``max_x mu_j([x, x + width])`` and the smallest maximizing left end.

    The mass is piecewise linear in ``x`` with breaks where an end of the
    window meets a cell edge, so the maximum is attained at one of those.
    """
    A = np.asarray(level.elements, dtype=np.int64)
    M = float(level.scale)
    edges = np.unique(np.concatenate([A, A + 1])) / M
    cand = np.unique(np.concatenate([edges, edges - width]))
    masses = interval_mass(level, cand, cand + width)
    best = masses.max()
    k = int(np.flatnonzero(masses >= best * (1 - 1e-12))[0])
    return float(masses[k]), float(cand[k])


def nu_fourier_values(level, xi1, xi2, chunk: int = 4_000_000) -> np.ndarray:
    """Vectorized ``hat nu_j(xi)`` over arrays of frequencies."""
    A = np.asarray(level.elements, dtype=float)
    M = float(level.scale)
    beta = float(level.beta)
    xi1, xi2 = np.broadcast_arrays(np.asarray(xi1, dtype=float), np.asarray(xi2, dtype=float))
    shape = xi1.shape
    f1, f2 = xi1.ravel(), xi2.ravel()
    out = np.empty(f1.size, dtype=complex)
    step = max(1, chunk // max(1, A.size))
    lo, hi = A / M, (A + 1) / M
    for s in range(0, f1.size, step):
        a1 = f1[s : s + step, None]
        a2 = f2[s : s + step, None]
        vals = interval_phase_integral(lo[None, :], hi[None, :], a1, a2)
        out[s : s + step] = beta * vals.sum(axis=1)
    return out.reshape(shape)


def nu_fourier(level, xi, method: str = "closed-form") -> FourierSample:
    """One evaluation of ``hat nu_j(xi)``."""
    xi1, xi2 = float(xi[0]), float(xi[1])
    if method == "closed-form":
        val = complex(nu_fourier_values(level, xi1, xi2))
    elif method == "quadrature":
        M = float(level.scale)
        val = float(level.beta) * sum(
            adaptive_phase_quadrature(b / M, (b + 1) / M, xi1, xi2) for b in level.elements
        )
    else:
        raise ValueError(f"unknown method {method!r}")
    return FourierSample((xi1, xi2), complex(val), int(level.j), method)


@dataclass(frozen=True)
class AnnulusGrid:
    """Dyadic annuli ``2^k <= |xi| < 2^(k+1)`` for ``k_min <= k <= k_max``.

    Each annulus gets ``directions * radii`` samples: angles from a shifted
    regular (rank-1 lattice) sequence over the half circle, radii stratified
    in ``log2 |xi|``. ``symmetric`` also emits ``-xi`` for every sample.
    """

    k_min: int
    k_max: int
    directions: int = 64
    radii: int = 4
    symmetric: bool = False

    @property
    def count(self) -> int:
        return self.directions * self.radii * (2 if self.symmetric else 1)


def annulus_points(grid: AnnulusGrid, seed: int | None = None) -> list[tuple[int, np.ndarray]]:
    if grid.k_max < grid.k_min or grid.directions < 1 or grid.radii < 1:
        raise ValueError("empty grid spec")
    out = []
    for k in range(grid.k_min, grid.k_max + 1):
        if seed is None:
            ang_shift, rad_jit = 0.0, np.zeros(grid.radii)
        else:
            rng = derive_rng(seed, k)
            ang_shift, rad_jit = rng.random(), rng.random(grid.radii)
        d = np.arange(grid.directions)
        # golden-ratio rotation between radius strata decorrelates the angles
        theta = np.pi * ((d[None, :] + ang_shift + 0.6180339887498949 * np.arange(grid.radii)[:, None]) / grid.directions % 1.0)
        rad = 2.0 ** (k + (np.arange(grid.radii) + rad_jit) / grid.radii)
        pts = np.stack([rad[:, None] * np.cos(theta), rad[:, None] * np.sin(theta)], axis=-1).reshape(-1, 2)
        if seed is None:
            # snap exact axis directions so the unjittered first sample is (2^k, 0)
            pts[np.abs(pts) < 1e-12 * rad.max()] = 0.0
        if grid.symmetric:
            pts = np.concatenate([pts, -pts])
        out.append((k, pts))
    return out


def nu_fourier_grid(level, grid: AnnulusGrid, seed: int | None = None) -> list[FourierSample]:
    """``hat nu_j`` over the annulus grid, deterministic given ``seed``."""
    samples = []
    for _, pts in annulus_points(grid, seed):
        vals = nu_fourier_values(level, pts[:, 0], pts[:, 1])
        samples += [
            FourierSample((float(p[0]), float(p[1])), complex(v), int(level.j)) for p, v in zip(pts, vals)
        ]
    return samples


def samples_to_csv(samples) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["j", "xi1", "xi2", "re", "im", "abs", "method"])
    for s in samples:
        w.writerow(
            [s.level, fmt17(s.xi[0]), fmt17(s.xi[1]), fmt17(s.value.real), fmt17(s.value.imag), fmt17(abs(s.value)), s.method]
        )
    return buf.getvalue()


def samples_to_json(samples) -> str:
    rows = [
        {"j": s.level, "xi1": s.xi[0], "xi2": s.xi[1], "re": s.value.real, "im": s.value.imag, "abs": abs(s.value), "method": s.method}
        for s in samples
    ]
    return dumps_17(rows) + "\n"


def samples_from_csv(text: str) -> list[FourierSample]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [
        FourierSample((float(r["xi1"]), float(r["xi2"])), complex(float(r["re"]), float(r["im"])), int(r["j"]), r["method"])
        for r in rows
    ]
