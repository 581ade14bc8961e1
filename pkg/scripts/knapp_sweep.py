"""Knapp ratio exponent across p and seeds; prints a table and the predicted slope."""

import argparse

import numpy as np

from parabola_cantor_lab.cantor import build_construction, make_plan, preset_bases
from parabola_cantor_lab.cli import knapp_radii
from parabola_cantor_lab.restriction import knapp_experiment

ap = argparse.ArgumentParser()
ap.add_argument("--alpha", type=float, default=0.5)
ap.add_argument("--depth", type=int, default=6)
ap.add_argument("--seeds", type=int, default=5)
ap.add_argument("--p", type=float, nargs="*", default=[6, 8, 10, 12, 16])
ap.add_argument("--cells", type=float, default=16)
ap.add_argument("--octaves", type=int, default=3)
a = ap.parse_args()

plan = make_plan(a.alpha, preset_bases("factorial", a.depth))
tops = [build_construction(plan, s)[-1] for s in range(a.seeds)]
print(f"{'p':>6} {'predicted':>10} {'mean':>8} {'min':>8} {'max':>8}")
for p in a.p:
    exps, pred = [], None
    for lev in tops:
        radii = knapp_radii(lev, a.cells, a.octaves, 7)
        _, rep = knapp_experiment(lev, p, 2.0, radii, alpha=a.alpha)
        exps.append(rep.fitted_exponent)
        pred = rep.extra["predicted_exponent"]
    e = np.array(exps)
    print(f"{p:>6g} {pred:>10.4f} {e.mean():>8.4f} {e.min():>8.4f} {e.max():>8.4f}")
