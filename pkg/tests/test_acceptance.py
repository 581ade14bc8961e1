"""Acceptance criteria, one PASS/FAIL line each (see the terminal summary)."""

import math
import time

import numpy as np
import pytest

from parabola_cantor_lab.analysis import (
    check_increment_tails,
    check_local_mass,
    check_martingale,
    classify_regime,
    fit_ball_exponent,
    fit_decay_exponent,
    vdc_check,
)
from parabola_cantor_lab.cantor import build_construction, check_levels, make_plan, preset_bases
from parabola_cantor_lab.cli import knapp_radii
from parabola_cantor_lab.lambda_tools import (
    expsum_lp_norm_1d,
    expsum_lp_norm_even_exact,
    expsum_lp_norm_parabola_grid,
    lambda_density_study,
)
from parabola_cantor_lab.measure import (
    AnnulusGrid,
    FourierSample,
    ParabolaMeasure,
    adaptive_phase_quadrature,
    interval_phase_integral,
    nu_fourier_grid,
    nu_fourier_values,
)
from parabola_cantor_lab.restriction import knapp_experiment, kp_growth_study, local_restriction_sweep

ALPHA = 0.5
SEEDS = range(10)


def _levels(seed, depth=6):
    return build_construction(make_plan(ALPHA, preset_bases("factorial", depth)), seed)


@pytest.fixture(scope="module")
def deep():
    return _levels(0)


def test_01_exactness(verdict, deep):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    errs = []
    for _ in range(20):
        f = np.sort(rng.choice(200, size=12, replace=False)) - 100
        c = rng.normal(size=12) + 1j * rng.normal(size=12)
        l2 = np.linalg.norm(c)
        errs.append(abs(expsum_lp_norm_1d(f, c, 2) - l2) / l2)
        g = np.sort(rng.choice(24, size=8, replace=False))
        d = c[:8]
        errs.append(abs(expsum_lp_norm_parabola_grid(g, d, 2) - np.linalg.norm(d)) / np.linalg.norm(d))
    xi = rng.uniform(-1e4, 1e4, size=(2, 200))
    for lev in deep:
        nu = ParabolaMeasure(lev)
        errs.append(abs(nu.total_mass - 1))
        errs.append(abs(nu.fourier(0.0, 0.0)[()] - 1))
        errs.append(float(np.max(abs(nu.fourier(-xi[0], -xi[1]) - np.conj(nu.fourier(xi[0], xi[1]))))))
    check_levels(deep)
    err, dt = max(errs), time.perf_counter() - t0
    ok = err <= 1e-12 and dt < 1.0
    verdict(1, "exactness suite", ok, f"max err {err:.2e}, {dt:.2f} s")
    assert ok


def test_02_oracle_equivalence(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(1000):
        x0 = rng.uniform(0, 1)
        x1 = x0 + rng.uniform(0, 1 - x0)
        r = 10 ** rng.uniform(-2, 6)
        th = rng.uniform(0, 2 * math.pi)
        a, b = r * math.cos(th), r * math.sin(th)
        worst = max(worst, abs(complex(interval_phase_integral(x0, x1, a, b)) - adaptive_phase_quadrature(x0, x1, a, b)))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and dt < 30
    verdict(2, "closed form vs quadrature", ok, f"max abs err {worst:.2e} over 1000 draws, {dt:.1f} s")
    assert ok


def test_03_even_norm_oracle(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for i in range(100):
        parabola = i >= 50
        m = int(rng.integers(2, 4))
        n = int(rng.integers(2, 9 if parabola else 13))
        f = np.sort(rng.choice(65, size=n, replace=False))
        c = rng.normal(size=n) + 1j * rng.normal(size=n)
        exact = expsum_lp_norm_even_exact(f, c, m, parabola=parabola)
        grid = (expsum_lp_norm_parabola_grid if parabola else expsum_lp_norm_1d)(f, c, 2 * m)
        worst = max(worst, abs(exact - grid) / grid)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and dt < 60
    verdict(3, "even-p exact norm vs grid", ok, f"max rel err {worst:.2e} over 100 instances, {dt:.1f} s")
    assert ok


def test_04_lambda_density(verdict):
    t0 = time.perf_counter()
    rep = lambda_density_study(4, [64, 128, 256, 512], trials=20)
    dt = time.perf_counter() - t0
    ok = rep.fitted_exponent <= 0.1 and dt < 300
    meds = ", ".join(f"{v:.3f}" for _, v in rep.data)
    verdict(4, "Lambda(4) density", ok, f"slope {rep.fitted_exponent:.3f} (medians {meds}), {dt:.0f} s")
    assert ok


def test_05_ball_exponent(verdict):
    t0 = time.perf_counter()
    exps = [fit_ball_exponent(_levels(s)[-1]).fitted_exponent for s in SEEDS]
    dt = time.perf_counter() - t0
    good = sum(0.35 <= e <= 0.6 for e in exps)
    ok = good >= 8 and dt < 300
    verdict(5, "ball exponent", ok, f"{good}/10 in [0.35, 0.6]: " + " ".join(f"{e:.3f}" for e in exps) + f", {dt:.0f} s")
    assert ok


def test_06_fourier_decay(verdict):
    t0 = time.perf_counter()
    grid = AnnulusGrid(6, 18, directions=64, radii=4)
    exps = [fit_decay_exponent(nu_fourier_grid(_levels(s)[-1], grid, seed=s)).fitted_exponent for s in SEEDS]
    good = sum(ALPHA / 2 - 0.15 <= e <= 0.6 for e in exps)
    ks = np.arange(6, 19)
    lev0 = _levels(0, 0)[0]
    vals = nu_fourier_values(lev0, np.zeros(ks.size), 2.0**ks)
    anchor = fit_decay_exponent([FourierSample((0.0, 2.0**k), complex(v), 0) for k, v in zip(ks, vals)]).fitted_exponent
    dt = time.perf_counter() - t0
    ok = good >= 8 and abs(anchor - 0.5) <= 0.05 and dt < 600
    verdict(
        6,
        "Fourier decay",
        ok,
        f"{good}/10 in [0.10, 0.60]: " + " ".join(f"{e:.3f}" for e in exps) + f"; level-0 arc {anchor:.3f}, {dt:.0f} s",
    )
    assert ok


def test_07_kp_growth(verdict):
    t0 = time.perf_counter()
    plan = make_plan(ALPHA, preset_bases("factorial", 4))
    rep = kp_growth_study(plan, 12, [1, 2, 3, 4], range(5))
    dt = time.perf_counter() - t0
    ok = rep.fitted_exponent <= 0.15 and dt < 600
    meds = ", ".join(f"{v:.3f}" for _, v in rep.data)
    verdict(7, "K_12 growth", ok, f"slope {rep.fitted_exponent:.3f} (medians {meds}), {dt:.0f} s")
    assert ok


def test_08_local_restriction(verdict):
    t0 = time.perf_counter()
    lev = _levels(0, 4)[-1]
    rep = local_restriction_sweep(lev, [8, 16, 32, 64], 12)
    dt = time.perf_counter() - t0
    ok = rep.fitted_exponent <= 0.15 and dt < 600
    vals = ", ".join(f"{v:.3f}" for _, v in rep.data)
    verdict(8, "local restriction", ok, f"slope {rep.fitted_exponent:.3f} (ratios {vals}), {dt:.0f} s")
    assert ok


def test_09_knapp(verdict):
    t0 = time.perf_counter()
    e12, e8 = [], []
    for s in range(5):
        lev = _levels(s)[-1]
        radii = knapp_radii(lev, 16, 3, 7)
        e12.append(knapp_experiment(lev, 12, 2, radii, alpha=ALPHA)[1].fitted_exponent)
        e8.append(knapp_experiment(lev, 8, 2, radii, alpha=ALPHA)[1].fitted_exponent)
    lev0 = _levels(0, 0)[0]
    anchor = knapp_experiment(lev0, 6, 2, knapp_radii(lev0, 16, 3, 7), alpha=1.0)[1].fitted_exponent
    dt = time.perf_counter() - t0
    ok12 = all(abs(e) <= 0.2 for e in e12)
    ok8 = all(abs(e + 0.125) <= 0.15 and e < 0 for e in e8)
    ok = ok12 and ok8 and abs(anchor) <= 0.1 and dt < 600
    verdict(
        9,
        "Knapp sharpness",
        ok,
        "p=12 " + " ".join(f"{e:.3f}" for e in e12) + "; p=8 " + " ".join(f"{e:.3f}" for e in e8)
        + f"; level-0 p=6 {anchor:.3f}, {dt:.0f} s",
    )
    assert ok


def test_10_martingale(verdict, deep):
    t0 = time.perf_counter()
    j = 4
    lev = deep[j]
    m = deep[0].plan.base(j + 1)
    a = lev.elements[0]
    interval = (a / lev.scale, (a * m + m // 2) / (lev.scale * m))
    rep = check_martingale(deep, j, interval, trials=10_000, seed=0)
    dt = time.perf_counter() - t0
    z = rep.extra["z"]
    ok = abs(z) <= 4 and dt < 300
    verdict(10, "martingale marginals", ok, f"z {z:.3f}, rejection rate {rep.extra['rejection_rate']:.4f}, {dt:.1f} s")
    assert ok


def test_11_tail_monitors(verdict, deep):
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    j = 4
    scales = [lev.scale for lev in deep]
    xis = []
    while len(xis) < 40:
        r = 10 ** rng.uniform(0, math.log10(scales[j + 1] * scales[j]))
        th = rng.uniform(0, 2 * math.pi)
        xi = (r * math.cos(th), r * math.sin(th))
        if classify_regime(xi, scales, j).name != "large":
            xis.append(xi)
    tails = check_increment_tails(deep, j, xis, sigma=0.4, trials=1000, seed=0, multiplier=10)
    j1 = 5
    floor = deep[0].plan.base(j1) * scales[j1 - 1] ** 2
    vx = [(floor * 2**e * math.cos(t), floor * 2**e * math.sin(t)) for e in range(8) for t in np.linspace(0, 3, 8)]
    vdc = vdc_check(deep, j1, vx)
    lm = check_local_mass(deep)
    dt = time.perf_counter() - t0
    exc = tails.extra["total_exceedances"]
    ok = exc == 0 and vdc.fitted_exponent <= 0.1 and lm.fitted_exponent <= 0.1 and dt < 600
    verdict(
        11,
        "tail monitors",
        ok,
        f"{exc} exceedances / 1000 trials, vdc slope {vdc.fitted_exponent:.3f}, "
        f"local-mass slope {lm.fitted_exponent:.3f}, {dt:.1f} s",
    )
    assert ok
