"""Ball and decay exponents for many seeds (quick distribution check)."""

import argparse

from parabola_cantor_lab.analysis import fit_ball_exponent, fit_decay_exponent
from parabola_cantor_lab.cantor import build_construction, make_plan, preset_bases
from parabola_cantor_lab.measure import AnnulusGrid, nu_fourier_grid

ap = argparse.ArgumentParser()
ap.add_argument("--alpha", type=float, default=0.5)
ap.add_argument("--depth", type=int, default=6)
ap.add_argument("--seeds", type=int, default=20)
ap.add_argument("--preset", default="factorial")
a = ap.parse_args()

plan = make_plan(a.alpha, preset_bases(a.preset, a.depth))
grid = AnnulusGrid(6, 18)
print("seed  ball   decay")
for s in range(a.seeds):
    top = build_construction(plan, s)[-1]
    ball = fit_ball_exponent(top).fitted_exponent
    decay = fit_decay_exponent(nu_fourier_grid(top, grid, seed=s)).fitted_exponent
    print(f"{s:>4}  {ball:.3f}  {decay:.3f}")
