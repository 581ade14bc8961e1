"""``pcl``: build constructions, run studies, write reports.

Exit codes: 0 pass or warn, 1 usage/config error, 2 runtime or sampling failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import check_martingale, fit_ball_exponent, fit_decay_exponent
from .cantor import (
    PRESETS,
    ConstructionError,
    build_construction,
    construction_to_dict,
    load_construction,
    make_plan,
    preset_bases,
)
from .lambda_tools import DEFAULT_RESTARTS, DEFAULT_THRESHOLD, LambdaSamplingError
from .measure import AnnulusGrid, nu_fourier_grid
from .report import ExperimentReport, load_report
from .restriction import knapp_experiment, kp_growth_study, local_restriction_sweep
from .utils import dumps_17, stable_hash

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

COMMANDS = ("build", "decay", "ball", "kp", "knapp", "martingale", "localrestrict", "report")

# claim label per report kind, in table order
CLAIMS = {
    "ball": "ball-mass (Frostman) exponent",
    "kp_growth": "parabola restriction constant growth",
    "local_restriction": "local restriction constant growth",
    "decay": "Fourier decay exponent",
    "knapp": "Knapp sharpness exponent",
    "martingale": "martingale marginals",
}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    alpha: float = 0.5
    preset: str | None = "factorial"
    bases: list | None = None
    depth: int = 6
    seed: int = 0
    threshold: float = DEFAULT_THRESHOLD
    restarts: int = DEFAULT_RESTARTS
    out: str = "pcl-out"
    construction: str | None = None
    decay: dict = field(default_factory=lambda: {"k_min": 6, "k_max": 18, "directions": 64, "radii": 4, "level": None})
    ball: dict = field(default_factory=lambda: {"level": None, "count": 12})
    kp: dict = field(default_factory=lambda: {"p": None, "depths": [1, 2, 3, 4], "seeds": 5, "restarts": 3})
    knapp: dict = field(default_factory=lambda: {"p": None, "q": 2.0, "r_min_cells": 16, "octaves": 3, "points": 7, "level": None})
    martingale: dict = field(default_factory=lambda: {"level": None, "trials": 10_000})
    localrestrict: dict = field(default_factory=lambda: {"level": 4, "radii": [8, 16, 32, 64], "p": None, "restarts": 1})

    def bases_list(self) -> list:
        if self.bases is not None:
            return [int(b) for b in self.bases]
        if self.preset is None:
            raise UsageError("config needs either a preset or explicit bases")
        if self.preset not in PRESETS:
            raise UsageError(f"unknown preset {self.preset!r}; choose from {', '.join(PRESETS)}")
        return list(preset_bases(self.preset, self.depth))

    def plan(self):
        if not 0 < self.alpha < 1:
            raise UsageError(f"alpha must satisfy 0 < alpha < 1 (got {self.alpha})")
        try:
            return make_plan(self.alpha, self.bases_list(), self.depth, self.threshold, self.restarts)
        except ValueError as e:
            raise UsageError(str(e)) from e

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d.pop("construction")
        return d

    @property
    def hash(self) -> str:
        return stable_hash(self.to_dict())


def load_config(path: str | None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as e:
        raise UsageError(f"cannot read config: {e}") from e
    except tomllib.TOMLDecodeError as e:
        raise UsageError(f"malformed config: {e}") from e
    known = set(RunConfig.__dataclass_fields__)
    for k, v in raw.items():
        if k not in known:
            raise UsageError(f"unknown config key {k!r}")
        cur = getattr(cfg, k)
        if isinstance(cur, dict):
            if not isinstance(v, dict):
                raise UsageError(f"config section [{k}] must be a table")
            bad = set(v) - set(cur)
            if bad:
                raise UsageError(f"unknown keys in [{k}]: {sorted(bad)}")
            cur.update(v)
        else:
            setattr(cfg, k, v)
    if "bases" in raw and "preset" not in raw:
        cfg.preset = None
    if "bases" in raw and "depth" not in raw:
        cfg.depth = len(raw["bases"])
    return cfg


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"pcl: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="pcl", description="Random Cantor measures on the parabola: constructions and studies.")
    ap.add_argument("--version", action="version", version=f"pcl {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("directory", nargs="?", help="report directory (report command only)")
    ap.add_argument("--config", help="TOML config file")
    ap.add_argument("--seed", type=int, help="root seed (fallback: PCL_SEED, then the config)")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--threads", type=int, default=1, help="worker cap; results do not depend on it")
    ap.add_argument("--alpha", type=float)
    ap.add_argument("--preset", choices=PRESETS)
    ap.add_argument("--bases", help="comma-separated digit bases")
    ap.add_argument("--depth", type=int)
    ap.add_argument("--construction", help="construction file (default OUT/construction.json)")
    ap.add_argument("--level", type=int, help="level used by decay/ball/knapp/martingale/localrestrict")
    return ap


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.alpha is not None:
        cfg.alpha = args.alpha
    if args.bases is not None:
        try:
            cfg.bases = [int(x) for x in args.bases.split(",") if x.strip()]
        except ValueError as e:
            raise UsageError(f"bad --bases: {e}") from e
        cfg.preset = None
        if args.depth is None:
            cfg.depth = len(cfg.bases)
    if args.preset is not None:
        cfg.preset, cfg.bases = args.preset, None
    if args.depth is not None:
        cfg.depth = args.depth
    if cfg.depth < 0:
        raise UsageError("depth must be >= 0")
    if args.seed is not None:
        cfg.seed = args.seed
    elif os.environ.get("PCL_SEED"):
        try:
            cfg.seed = int(os.environ["PCL_SEED"])
        except ValueError as e:
            raise UsageError("PCL_SEED must be an integer") from e
    if args.out is not None:
        cfg.out = args.out
    if args.construction is not None:
        cfg.construction = args.construction
    if args.threads is not None and args.threads < 1:
        raise UsageError("--threads must be >= 1")
    return cfg


# --------------------------------------------------------------------------
# output helpers


def _header(cfg: RunConfig) -> dict:
    return {"config_hash": cfg.hash, "seed": cfg.seed, "tool_version": __version__}


def write_report(rep: ExperimentReport, cfg: RunConfig, name: str, verdict: str, extra_csv: str | None = None) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rep.config_hash = cfg.hash
    rep.seed = cfg.seed
    d = rep.to_dict()
    d["config"] = cfg.to_dict()
    d["verdict"] = verdict
    (out / f"{name}.json").write_text(dumps_17(d) + "\n")
    head = f"# config_hash={cfg.hash} seed={cfg.seed} version={__version__}\n"
    (out / f"{name}.csv").write_text(head + rep.to_csv())
    (out / f"{name}.dat").write_text(rep.to_gnuplot())
    if extra_csv is not None:
        (out / f"{name}_rows.csv").write_text(head + extra_csv)
    return out / f"{name}.json"


def _band_verdict(name: str, value: float, lo: float, hi: float) -> str:
    ok = math.isfinite(value) and lo <= value <= hi
    return f"{name}: exponent={value:.4f} band=[{lo:.4g}, {hi:.4g}] {'PASS' if ok else 'WARN'}"


def _load_levels(cfg: RunConfig):
    path = Path(cfg.construction) if cfg.construction else Path(cfg.out) / "construction.json"
    if not path.exists():
        raise UsageError(f"construction file {path} not found (run `pcl build` first)")
    try:
        return load_construction(path)
    except ConstructionError as e:
        raise UsageError(f"{path}: {e}") from e


def _pick_level(levels, want):
    j = len(levels) - 1 if want is None else int(want)
    if not 0 <= j < len(levels):
        raise UsageError(f"level {j} not in construction (0..{len(levels) - 1})")
    return levels[j]


def _csv(rows, cols) -> str:
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join(format(v, ".17g") if isinstance(v, float) else str(v) for v in r))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# commands


def cmd_build(cfg: RunConfig, args) -> int:
    plan = cfg.plan()
    stats = {}
    levels = build_construction(plan, cfg.seed, stats)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    d = construction_to_dict(levels)
    d.update(_header(cfg))
    (out / "construction.json").write_text(dumps_17(d) + "\n")
    print(f"{'j':>2} {'m_j':>4} {'t_j':>4} {'|A_j|':>8} {'beta_j':>12} {'max_Kp':>10}")
    for lev in levels:
        m = plan.base(lev.j) if lev.j else 1
        t = plan.branching(lev.j) if lev.j else 1
        kp = max((ds.verified_Kp for ds in lev.digit_sets), default=float("nan"))
        print(f"{lev.j:>2} {m:>4} {t:>4} {len(lev):>8} {lev.beta:>12.6g} {kp:>10.6g}")
    print(f"build: wrote {out / 'construction.json'} (|A_{plan.depth}| = {len(levels[-1])}, draws={stats.get('attempts', 0)}, rejections={stats.get('rejections', 0)})")
    return 0


def cmd_decay(cfg, args) -> int:
    levels = _load_levels(cfg)
    lev = _pick_level(levels, args.level if args.level is not None else cfg.decay["level"])
    p = cfg.decay
    grid = AnnulusGrid(int(p["k_min"]), int(p["k_max"]), int(p["directions"]), int(p["radii"]))
    samples = nu_fourier_grid(lev, grid, seed=cfg.seed)
    rep = fit_decay_exponent(samples)
    alpha = cfg.alpha if lev.j > 0 else 1.0
    verdict = _band_verdict("decay", rep.fitted_exponent, alpha / 2 - 0.15, 0.60)
    from .measure import samples_to_csv

    write_report(rep, cfg, "decay", verdict, samples_to_csv(samples))
    print(verdict)
    return 0


def cmd_ball(cfg, args) -> int:
    levels = _load_levels(cfg)
    lev = _pick_level(levels, args.level if args.level is not None else cfg.ball["level"])
    from .analysis import default_ball_radii

    rep = fit_ball_exponent(lev, default_ball_radii(lev, int(cfg.ball["count"])))
    if lev.j == 0:
        verdict = _band_verdict("ball", rep.fitted_exponent, 1 - 1e-6, 1 + 1e-6)
    else:
        verdict = _band_verdict("ball", rep.fitted_exponent, cfg.alpha - 0.15, cfg.alpha + 0.1)
    write_report(rep, cfg, "ball", verdict)
    print(verdict)
    return 0


def cmd_kp(cfg, args) -> int:
    plan = cfg.plan()
    p = cfg.kp["p"] or plan.restriction_p
    depths = [d for d in cfg.kp["depths"] if d <= plan.depth]
    if not depths:
        raise UsageError("no kp depths within the plan depth")
    seeds = [cfg.seed + s for s in range(int(cfg.kp["seeds"]))]
    rep = kp_growth_study(plan, p, depths, seeds, restarts=int(cfg.kp["restarts"]))
    rows = [(r["depth"], r["N_j"], r["K_p"], r["method"], r["seed"]) for r in rep.extra["rows"]]
    if rep.slope_defined:
        verdict = _band_verdict("kp", rep.fitted_exponent, -math.inf, 0.15)
    else:
        verdict = "kp: slope undefined (single depth) WARN"
    write_report(rep, cfg, "kp", verdict, _csv(rows, ["depth", "N_j", "K_p", "method", "seed"]))
    print(verdict)
    return 0


def knapp_radii(lev, cells: float, octaves: int, points: int) -> np.ndarray:
    lo = cells / lev.scale if lev.j > 0 else 2.0 ** -(octaves + 3)
    return np.geomspace(lo, lo * 2**octaves, points)


def cmd_knapp(cfg, args) -> int:
    levels = _load_levels(cfg)
    k = cfg.knapp
    lev = _pick_level(levels, args.level if args.level is not None else k["level"])
    alpha = cfg.alpha if lev.j > 0 else 1.0
    p = float(k["p"] or 6.0 / alpha)
    q = float(k["q"])
    radii = knapp_radii(lev, float(k["r_min_cells"]), int(k["octaves"]), int(k["points"]))
    data, rep = knapp_experiment(lev, p, q, radii, alpha=alpha)
    pred = rep.extra["predicted_exponent"]
    critical = (2 + 1) * (q / (q - 1)) / alpha
    if p < critical - 1e-9:
        verdict = _band_verdict("knapp", rep.fitted_exponent, pred - 0.15, min(pred + 0.15, -1e-12))
    else:
        verdict = _band_verdict("knapp", rep.fitted_exponent, pred - 0.2, pred + 0.2)
    verdict += f" p_hat={rep.extra['p_hat']:.4g} bound={critical:.4g}"
    rows = [(d.r, d.center, d.mass, d.lhs, d.rhs, d.ratio) for d in data]
    write_report(rep, cfg, "knapp", verdict, _csv(rows, ["r", "center", "mass", "lhs", "rhs", "ratio"]))
    print(verdict)
    return 0


def cmd_martingale(cfg, args) -> int:
    levels = _load_levels(cfg)
    J = len(levels) - 1
    if J < 1:
        raise UsageError("martingale check needs a construction of depth >= 1")
    want = args.level if args.level is not None else cfg.martingale["level"]
    j = J - 1 if want is None else int(want)
    if not 0 <= j < J:
        raise UsageError(f"level {j} has no successor (depth {J})")
    lev = levels[j]
    m = levels[0].plan.base(j + 1)
    a0 = lev.elements[0]
    # a sub-interval of one level-j cell at the next scale, where the mass is random
    interval = (m * a0 / (lev.scale * m), (m * a0 + max(1, m // 2)) / (lev.scale * m))
    rep = check_martingale(levels, j, interval, int(cfg.martingale["trials"]), cfg.seed)
    z = rep.extra["z"]
    ok = abs(z) <= 4
    verdict = f"martingale: z={z:.4f} band=[-4, 4] rejection_rate={rep.extra['rejection_rate']:.4g} {'PASS' if ok else 'WARN'}"
    write_report(rep, cfg, "martingale", verdict)
    print(verdict)
    return 0


def cmd_localrestrict(cfg, args) -> int:
    levels = _load_levels(cfg)
    lr = cfg.localrestrict
    lev = _pick_level(levels, args.level if args.level is not None else lr["level"])
    p = float(lr["p"] or 6.0 / cfg.alpha)
    try:
        rep = local_restriction_sweep(lev, [float(r) for r in lr["radii"]], p, restarts=int(lr["restarts"]), seed=cfg.seed)
    except MemoryError as e:
        raise UsageError(str(e)) from e
    if rep.slope_defined:
        verdict = _band_verdict("localrestrict", rep.fitted_exponent, -math.inf, 0.15)
    else:
        verdict = "localrestrict: slope undefined (single R) WARN"
    write_report(rep, cfg, "localrestrict", verdict)
    print(verdict)
    return 0


def cmd_report(cfg, args) -> int:
    d = Path(args.directory or cfg.out)
    files = sorted(d.glob("*.json")) if d.is_dir() else []
    reports = []
    for f in files:
        try:
            raw = json.loads(f.read_text())
        except json.JSONDecodeError:
            continue
        if "kind" not in raw:
            continue
        reports.append((f.name, raw, load_report(f.read_text())))
    if not reports:
        raise UsageError(f"no reports found in {d}")
    hashes = sorted({r.config_hash for _, _, r in reports})
    if len(hashes) > 1:
        print("warning: reports come from different configs: " + ", ".join(
            f"{name}={r.config_hash}" for name, _, r in reports), file=sys.stderr)
    order = {k: i for i, k in enumerate(CLAIMS)}
    reports.sort(key=lambda t: (order.get(t[2].kind, len(order)), t[0]))
    lines = ["| claim | report | exponent | std error | verdict |", "|---|---|---|---|---|"]
    rows = []
    for name, raw, r in reports:
        claim = CLAIMS.get(r.kind, r.kind)
        verdict = raw.get("verdict", "")
        lines.append(f"| {claim} | {name} | {r.fitted_exponent:.4f} | {r.std_error:.3g} | {verdict} |")
        rows.append({"claim": claim, "file": name, "exponent": r.fitted_exponent, "std_error": r.std_error,
                     "verdict": verdict, "config_hash": r.config_hash})
    text = "\n".join(lines) + "\n"
    (d / "summary.md").write_text(text)
    (d / "summary.json").write_text(dumps_17({"rows": rows, "config_hashes": hashes, "tool_version": __version__}) + "\n")
    print(text, end="")
    return 0


HANDLERS = {
    "build": cmd_build,
    "decay": cmd_decay,
    "ball": cmd_ball,
    "kp": cmd_kp,
    "knapp": cmd_knapp,
    "martingale": cmd_martingale,
    "localrestrict": cmd_localrestrict,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command != "report":
            cfg.plan()  # validate before any work
        return HANDLERS[args.command](cfg, args)
    except UsageError as e:
        print(f"pcl: error: {e}", file=sys.stderr)
        return 1
    except (LambdaSamplingError, ArithmeticError, MemoryError, RuntimeError) as e:
        print(f"pcl: runtime failure: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
