import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parabola_cantor_lab.cantor import build_construction, make_plan, preset_bases
from parabola_cantor_lab.measure import (
    AnnulusGrid,
    ParabolaMeasure,
    adaptive_phase_quadrature,
    interval_phase_integral,
    max_window_mass,
    mu_ball_mass,
    nu_fourier,
    nu_fourier_grid,
    nu_fourier_values,
    samples_from_csv,
    samples_to_csv,
    samples_to_json,
)

# int_0^1 e(-x^2) dx, frozen from the adaptive quadrature oracle (16-point rule);
# agrees with the Fresnel integrals (C(2) - i S(2)) / 2
FRESNEL_0_1 = complex(0.24412670303767037, -0.17170783918184915)


def level(A, M, j=1):
    return SimpleNamespace(j=j, elements=tuple(A), scale=M, beta=M / len(A))


LEVEL0 = level([0], 1, j=0)


@pytest.fixture(scope="module")
def deep():
    return build_construction(make_plan(0.5, preset_bases("factorial", 5)), 3)


def test_interval_integral_examples():
    assert complex(interval_phase_integral(0, 1, 0, 0)) == pytest.approx(1.0, abs=1e-15)
    for k in (1, -3, 17):
        assert abs(interval_phase_integral(0, 1, k, 0)) < 1e-14
    assert complex(interval_phase_integral(0, 1, 0, 1)) == pytest.approx(FRESNEL_0_1, abs=1e-13)


def test_oracle_matches_fresnel_value():
    assert adaptive_phase_quadrature(0, 1, 0, 1, order=16) == pytest.approx(FRESNEL_0_1, abs=1e-14)


def test_negative_quadratic_phase_is_conjugate():
    a = complex(interval_phase_integral(-0.2, 0.7, 3.0, 9.0))
    b = complex(interval_phase_integral(-0.2, 0.7, -3.0, -9.0))
    assert a == pytest.approx(b.conjugate(), abs=1e-14)


@settings(max_examples=150, deadline=None)
@given(
    st.floats(0, 0.999),
    st.floats(-4, 0),
    st.floats(0, 2 * math.pi),
    st.floats(-2, 6),
)
def test_closed_form_matches_oracle(x0, loglen, angle, logr):
    x1 = min(1.0, x0 + 10**loglen)
    if x1 <= x0:
        return
    r = 10**logr
    xi1, xi2 = r * math.cos(angle), r * math.sin(angle)
    cf = complex(interval_phase_integral(x0, x1, xi1, xi2))
    assert abs(cf - adaptive_phase_quadrature(x0, x1, xi1, xi2)) < 1e-10


def test_ball_mass_examples():
    assert mu_ball_mass(LEVEL0, 0.4, 0.1) == pytest.approx(0.2, abs=1e-15)
    assert mu_ball_mass(level([0, 3], 4), 0.125, 0.125) == pytest.approx(0.5, abs=1e-15)
    assert mu_ball_mass(level([0, 3], 4), 0.5, 1.0) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        mu_ball_mass(LEVEL0, 0.5, 0.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 1), st.floats(1e-4, 0.3), st.floats(1e-4, 0.3))
def test_ball_mass_additive_and_monotone(deep, x, r1, r2):
    lev = deep[-1]
    lo, hi = sorted((r1, r2))
    assert mu_ball_mass(lev, x, lo) <= mu_ball_mass(lev, x, hi) + 1e-15
    # [x - lo, x + lo] and [x + lo, x + lo + 2 hi] overlap only at a point
    whole = mu_ball_mass(lev, x + hi, lo + hi)
    parts = mu_ball_mass(lev, x, lo) + mu_ball_mass(lev, x + lo + hi, hi)
    assert whole == pytest.approx(parts, abs=1e-13)


def test_max_window_mass_beats_grid(deep):
    lev = deep[-1]
    w = 3.0 / lev.scale
    best, left = max_window_mass(lev, w)
    grid = np.linspace(0, 1, 4001)
    assert best >= np.max([mu_ball_mass(lev, g + w / 2, w / 2) for g in grid]) - 1e-14
    assert mu_ball_mass(lev, left + w / 2, w / 2) == pytest.approx(best, abs=1e-14)


def test_fourier_examples(deep):
    for lev in deep:
        assert nu_fourier(lev, (0, 0)).value == pytest.approx(1.0, abs=1e-12)
    for k in (1, 2, 9):
        assert abs(nu_fourier(deep[0], (k, 0)).value) < 1e-14


def test_fourier_conjugate_symmetry_and_bound(deep):
    lev = deep[-1]
    rng = np.random.default_rng(0)
    xi = rng.normal(size=(200, 2)) * 10 ** rng.uniform(0, 6, size=(200, 1))
    v = nu_fourier_values(lev, xi[:, 0], xi[:, 1])
    w = nu_fourier_values(lev, -xi[:, 0], -xi[:, 1])
    assert np.max(np.abs(v - np.conj(w))) < 1e-12
    assert np.all(np.abs(v) <= 1 + 1e-12)


def test_fourier_closed_form_vs_quadrature(deep):
    lev = deep[3]
    rng = np.random.default_rng(1)
    for _ in range(5):
        xi = tuple(rng.normal(size=2) * 10 ** rng.uniform(0, 6))
        a = nu_fourier(lev, xi)
        b = nu_fourier(lev, xi, method="quadrature")
        assert abs(a.value - b.value) < 1e-8
        assert b.method == "quadrature"


def test_parabola_measure_unit_mass(deep):
    for lev in deep:
        m = ParabolaMeasure(lev)
        assert m.total_mass == pytest.approx(1.0, abs=1e-12)
        assert m.intervals.shape == (len(lev), 2)


def test_grid_examples(deep):
    lev = deep[-1]
    one = nu_fourier_grid(lev, AnnulusGrid(5, 5, directions=1, radii=1))
    assert len(one) == 1 and one[0].xi == (32.0, 0.0)
    assert one[0].value == pytest.approx(nu_fourier(lev, (32.0, 0.0)).value, abs=1e-15)
    many = nu_fourier_grid(lev, AnnulusGrid(3, 6, directions=8, radii=3), seed=2)
    assert len(many) == 4 * 24
    assert all(abs(s.value) <= 1 + 1e-12 for s in many)
    sym = nu_fourier_grid(lev, AnnulusGrid(4, 4, directions=4, radii=2, symmetric=True), seed=1)
    half = len(sym) // 2
    for a, b in zip(sym[:half], sym[half:]):
        assert b.xi == (-a.xi[0], -a.xi[1])
        assert b.value == pytest.approx(a.value.conjugate(), abs=1e-12)
    again = nu_fourier_grid(lev, AnnulusGrid(3, 6, directions=8, radii=3), seed=2)
    assert [s.value for s in again] == [s.value for s in many]
    with pytest.raises(ValueError):
        nu_fourier_grid(lev, AnnulusGrid(6, 3))


def test_sample_serialization(deep):
    samples = nu_fourier_grid(deep[2], AnnulusGrid(2, 3, directions=3, radii=1), seed=0)
    text = samples_to_csv(samples)
    assert text.splitlines()[0] == "j,xi1,xi2,re,im,abs,method"
    assert samples_from_csv(text) == samples
    assert '"method": "closed-form"' in samples_to_json(samples)


def test_fresnel_value_against_mpmath():
    mpmath = pytest.importorskip("mpmath")
    # int_0^1 e(-x^2) dx = (C(2) - i S(2)) / 2 with the normalized Fresnel integrals
    ref = complex(mpmath.fresnelc(2), -mpmath.fresnels(2)) / 2
    assert FRESNEL_0_1 == pytest.approx(ref, abs=1e-15)
