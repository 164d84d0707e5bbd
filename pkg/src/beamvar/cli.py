"""Command-line scenario runner.

    beamvar <scenario> [--b B --k K | --lambda L] [--n N] [--eps-list ...]
                       [--seed S] [--out DIR]

Exit codes: 0 all checks pass, 1 a check failed, 2 bad configuration,
3 a solver failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from . import __version__
from .euler import (TWO_SQRT_PI, G_of_mu, SplitSolveError, find_threshold_lambda, rescaled_right_cauchy,
                    slope_gap, solve_E, split_solve)
from .model import BeamParams, Grid, PhiField, PlanarCurve, ThetaField, reconstruct_chi
from .obstacle import ObstacleSpec, phi_star, touch_set
from .solvers import (MinimizerResult, SolveOptions, minimize_constrained, minimize_reduced,
                      perturbation_audit)
from .theta import detect_theta_jump

log = logging.getLogger("beamvar")

SCENARIOS = ("global_min", "local_min", "euler_split", "threshold", "constants", "gamma_sweep",
             "theta_jump")
NEEDS_BK = {"global_min", "local_min", "gamma_sweep", "theta_jump"}
NEEDS_LAMBDA = {"euler_split"}
DEFAULT_BK = {"global_min": (1.0, 0.01), "local_min": (1.0, 0.01), "gamma_sweep": (1.0, 0.01),
              "theta_jump": (2.0, 0.02)}
DEFAULT_EPS = (0.4, 0.2, 0.1, 0.05, 0.025)


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    scenario: str
    b: Optional[float] = None
    k: Optional[float] = None
    lam: Optional[float] = None
    grid_n: int = 1024
    eps_list: Optional[list] = None
    seed: int = 0
    output_dir: str = "beamvar_out"
    lo: float = 15.0
    hi: float = 100.0
    lambda_list: Optional[list] = None

    def validate(self) -> "ScenarioConfig":
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.grid_n < 16:
            raise ConfigError("grid_n must be at least 16")
        has_bk = self.b is not None or self.k is not None
        if has_bk and self.lam is not None:
            raise ConfigError("give either (b, k) or lambda, not both")
        if self.scenario in NEEDS_BK:
            if self.lam is not None:
                raise ConfigError(f"{self.scenario} takes --b and --k")
            if not has_bk:
                self.b, self.k = DEFAULT_BK[self.scenario]
            if self.b is None or self.k is None or self.b <= 0 or self.k <= 0:
                raise ConfigError("b and k must both be given and positive")
        if self.scenario in NEEDS_LAMBDA:
            if has_bk:
                raise ConfigError(f"{self.scenario} takes --lambda")
            if self.lam is None:
                self.lam = 100.0
            if self.lam <= 0:
                raise ConfigError("lambda must be positive")
        if self.scenario == "gamma_sweep":
            eps = list(DEFAULT_EPS if self.eps_list is None else self.eps_list)
            if not eps or any(e <= 0 for e in eps) or any(a <= b for a, b in zip(eps, eps[1:])):
                raise ConfigError("eps list must be positive and strictly decreasing")
            self.eps_list = eps
        elif self.eps_list is not None:
            raise ConfigError("--eps-list only applies to gamma_sweep")
        if self.scenario in ("threshold", "constants") and (has_bk or self.lam is not None):
            raise ConfigError(f"{self.scenario} takes no beam parameters")
        if self.lambda_list is not None and self.scenario != "euler_split":
            raise ConfigError("--lambda-list only applies to euler_split")
        if self.scenario == "threshold" and not self.lo < self.hi:
            raise ConfigError("need lo < hi")
        return self


@dataclass(frozen=True)
class GammaSweepRow:
    eps: float
    x_switch_eps: float
    sup_distance_to_eps0_minimizer: float
    touched_at_switch: bool


@dataclass
class Report:
    checks: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("BEAMVAR_THREADS", "1")))
    except ValueError:
        return 1


def _parallel_map(fn, items):
    items = list(items)
    n = min(_threads(), len(items)) or 1
    if n == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# -- sweeps -----------------------------------------------------------------

def gamma_sweep(p: BeamParams, eps_list, g: Grid | int = 1024, tol: float = 1e-6):
    """Constrained minimizers for the shifted barriers against the unshifted one.

    All solves share one grid carrying every switch point as a node, so
    sup-distances are nodal. Returns ``(rows, reference_result, grid)``.
    """
    n = g if isinstance(g, int) else g.n_cells
    base = ObstacleSpec(p.lam)
    specs = [ObstacleSpec(p.lam, e) for e in eps_list]
    grid = Grid.uniform(n).with_knot(base.x_switch, *(s.x_switch for s in specs))
    ref = minimize_constrained(p, base, grid)
    if not ref.converged:
        raise RuntimeError("reference solve failed")

    def one(spec):
        r = minimize_constrained(p, spec, grid)
        if not r.converged:
            raise RuntimeError(f"solve failed for eps={spec.eps}")
        i = grid.index_of(spec.x_switch)
        return GammaSweepRow(spec.eps, spec.x_switch,
                             float(np.max(np.abs(r.phi.values - ref.phi.values))),
                             i in touch_set(r.phi, spec, tol))

    return _parallel_map(one, specs), ref, grid


def lambda_sweep(lams, n: int = 1024):
    def one(lam):
        s = split_solve(lam, n)
        return {"lambda": lam, "x_lambda": s.x_switch, "left_slope": s.left_slope,
                "right_slope": s.right_slope, "touches": s.touches}
    return _parallel_map(one, lams)


# -- export -----------------------------------------------------------------

def _versions() -> dict:
    return {"beamvar": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _write_rows(path: Path, rows: list) -> None:
    cols = list(rows[0].keys()) if rows else []
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(r[c]) for c in cols) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_dat(path: Path, header, *cols) -> None:
    with open(path, "w") as fh:
        fh.write("# " + " ".join(header) + "\n")
        for row in zip(*cols):
            fh.write(" ".join(repr(float(c)) for c in row) + "\n")


def export_bundle(results: dict, out_dir, config: Optional[dict] = None) -> list:
    """Write each result to ``out_dir`` and add a ``manifest.json``.

    ``results`` maps a base name to a field, curve, list of row dicts or a
    JSON-serializable dict. Fields and curves also get a ``.dat`` copy.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, obj in results.items():
        if isinstance(obj, PhiField):
            obj.to_csv(out / f"{name}.csv")
            _write_dat(out / f"{name}.dat", ("x", "phi"), obj.grid.nodes, obj.values)
            written += [f"{name}.csv", f"{name}.dat"]
        elif isinstance(obj, ThetaField):
            obj.to_csv(out / f"{name}.csv")
            _write_dat(out / f"{name}.dat", ("x_mid", "theta"), obj.grid.midpoints, obj.values)
            written += [f"{name}.csv", f"{name}.dat"]
        elif isinstance(obj, PlanarCurve):
            obj.to_csv(out / f"{name}.csv")
            _write_dat(out / f"{name}.dat", ("x", "chi1", "chi2"), obj.grid.nodes, *obj.points.T)
            written += [f"{name}.csv", f"{name}.dat"]
        elif isinstance(obj, list):
            _write_rows(out / f"{name}.csv", obj)
            written.append(f"{name}.csv")
        else:
            with open(out / f"{name}.json", "w") as fh:
                json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
                fh.write("\n")
            written.append(f"{name}.json")
    manifest = {"config": config or {}, "versions": _versions(),
                "seed": (config or {}).get("seed"), "files": sorted(written)}
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return sorted(written)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _curve(xs, vals, name) -> list:
    return [{"x": x, name: v} for x, v in zip(xs, vals)]


# -- scenarios --------------------------------------------------------------

def _field_results(res: MinimizerResult) -> dict:
    return {"phi": res.phi, "theta": res.theta, "chi": reconstruct_chi(res.theta, res.phi.grid)}


def _global_min(cfg: ScenarioConfig, rep: Report) -> dict:
    p = BeamParams(cfg.b, cfg.k)
    g = Grid.uniform(cfg.grid_n)
    res = minimize_reduced(p, g, SolveOptions(init="zero"))
    ph, th = res.phi.values, res.theta.values
    rep.checks["converged"] = res.converged
    rep.checks["range_phi_theta"] = bool(ph.min() >= -1e-8 and th.min() >= -1e-8
                                         and ph.max() <= math.pi / 2 + 1e-8
                                         and th.max() <= math.pi / 2 + 1e-8)
    rep.checks["phi_increasing"] = bool(np.all(np.diff(ph) > 0))
    rep.summary.update(res.summary())
    return _field_results(res)


def _local_min(cfg: ScenarioConfig, rep: Report) -> dict:
    p = BeamParams(cfg.b, cfg.k)
    spec = ObstacleSpec(p.lam)
    g = spec.grid(cfg.grid_n)
    res = minimize_constrained(p, spec, g)
    ph = res.phi.values
    i = g.index_of(spec.x_switch)
    worst = perturbation_audit(res, p, g, radius=0.05, samples=200, seed=cfg.seed)
    touches = touch_set(res.phi, spec)
    rep.checks["converged"] = res.converged
    rep.checks["phi_negative"] = bool(np.all(ph[1:] < 0))
    rep.checks["below_minus_pi_at_switch"] = bool(ph[i] < -math.pi - 1e-3)
    rep.checks["touch_only_at_origin"] = set(touches) <= {0}
    rep.checks["perturbation_audit"] = bool(worst >= -1e-10 * 0.05)
    rep.summary.update(res.summary())
    rep.summary.update({"x_lambda": spec.x_switch, "phi_at_x_lambda": ph[i], "touch_set": touches,
                        "audit_worst_change": worst})
    out = _field_results(res)
    out["obstacle"] = [{"x": x, "phi_star": v} for x, v in zip(g.nodes, phi_star(g.nodes, spec))]
    return out


def _euler_split(cfg: ScenarioConfig, rep: Report) -> dict:
    s = split_solve(cfg.lam, cfg.grid_n)
    rep.checks["right_below_minus_pi"] = bool(np.all(s.right <= -math.pi))
    rep.summary.update({"lambda": s.lam, "x_lambda": s.x_switch, "left_slope": s.left_slope,
                        "right_slope": s.right_slope, "touches": s.touches})
    out = {"left": _curve(s.left_x, s.left, "phi"), "right": _curve(s.right_x, s.right, "phi")}
    if cfg.lambda_list:
        out["sweep"] = lambda_sweep(cfg.lambda_list, cfg.grid_n)
    return out


def _threshold(cfg: ScenarioConfig, rep: Report) -> dict:
    tol = 1e-3
    lam_star = find_threshold_lambda(cfg.lo, cfg.hi, tol, cfg.grid_n)
    rep.checks["bracket_sanity"] = bool(slope_gap(lam_star - tol, cfg.grid_n) <= 0
                                        < slope_gap(lam_star + tol, cfg.grid_n))
    rep.summary.update({"lambda_star": lam_star, "lo": cfg.lo, "hi": cfg.hi,
                        "in_42_43": 42.0 < lam_star < 43.0})
    return {}


def _constants(cfg: ScenarioConfig, rep: Report) -> dict:
    e = solve_E()
    nu = rescaled_right_cauchy()
    lam_star = find_threshold_lambda(15.0, 100.0, 1e-3, cfg.grid_n)
    g4 = G_of_mu(4 * math.pi)
    rep.checks["G_of_E_is_one"] = abs(G_of_mu(e) - 1.0) <= 1e-8
    rep.checks["E_below_4pi"] = e < 4 * math.pi
    rep.checks["G_4pi_bound"] = g4 < math.sqrt(math.pi) / 2
    rep.checks["nu_is_two_sqrt_pi"] = abs(nu - TWO_SQRT_PI) < 1e-3
    consts = {"E": e, "sqrtE": math.sqrt(e), "two_sqrt_pi": TWO_SQRT_PI, "nu": nu, "G_4pi": g4,
              "lambda_star": lam_star}
    rep.summary.update(consts)
    return {"constants": consts}


def _gamma(cfg: ScenarioConfig, rep: Report) -> dict:
    p = BeamParams(cfg.b, cfg.k)
    rows, ref, _ = gamma_sweep(p, cfg.eps_list, cfg.grid_n)
    d = [r.sup_distance_to_eps0_minimizer for r in rows]
    xs = [r.x_switch_eps for r in rows]
    rep.checks["distances_strictly_decreasing"] = all(a > b for a, b in zip(d, d[1:]))
    rep.checks["switch_points_decreasing"] = all(a > b for a, b in zip(xs, xs[1:]))
    rep.summary.update({"distances": d, "reference_energy": ref.energy})
    return {"gamma_sweep": [asdict(r) for r in rows], "phi_eps0": ref.phi}


def _theta_jump(cfg: ScenarioConfig, rep: Report) -> dict:
    p = BeamParams(cfg.b, cfg.k)
    spec = ObstacleSpec(p.lam)
    g = spec.grid(cfg.grid_n)
    res = minimize_constrained(p, spec, g)
    jumps = detect_theta_jump(res.theta, g, 0.1)
    crossings = crossings_of(res.phi, -math.pi / 2)
    h = g.h_max
    located = [x for x, _ in jumps if p.b * (1 - x) > 1
               and any(abs(x - c) <= 2 * h for c in crossings)]
    rep.checks["converged"] = res.converged
    rep.checks["jump_at_crossing"] = bool(located)
    rep.summary.update({"jumps": jumps, "crossings": crossings})
    out = _field_results(res)
    out["jumps"] = [{"x": x, "magnitude": m} for x, m in jumps]
    return out


def crossings_of(phi: PhiField, level: float) -> list:
    """Abscissae where the piecewise-linear field crosses ``level``."""
    x, v = phi.grid.nodes, phi.values - level
    idx = np.flatnonzero(v[:-1] * v[1:] < 0)
    return [float(x[i] - v[i] * (x[i + 1] - x[i]) / (v[i + 1] - v[i])) for i in idx]


RUNNERS = {"global_min": _global_min, "local_min": _local_min, "euler_split": _euler_split,
           "threshold": _threshold, "constants": _constants, "gamma_sweep": _gamma,
           "theta_jump": _theta_jump}


def run_scenario(cfg: ScenarioConfig) -> Report:
    cfg.validate()
    rep = Report()
    results = RUNNERS[cfg.scenario](cfg, rep)
    results["summary"] = {"scenario": cfg.scenario, "checks": rep.checks, **rep.summary}
    rep.files = export_bundle(results, cfg.output_dir, asdict(cfg))
    return rep


def _parse(argv) -> ScenarioConfig:
    ap = argparse.ArgumentParser(prog="beamvar", description=__doc__.splitlines()[0])
    ap.add_argument("scenario", help=f"one of {', '.join(SCENARIOS)}, or 'replay' with --manifest")
    ap.add_argument("--b", type=float)
    ap.add_argument("--k", type=float)
    ap.add_argument("--lambda", dest="lam", type=float)
    ap.add_argument("--lambda-list", type=float, nargs="+")
    ap.add_argument("--n", dest="grid_n", type=int, default=1024)
    ap.add_argument("--eps-list", type=float, nargs="+")
    ap.add_argument("--lo", type=float, default=15.0)
    ap.add_argument("--hi", type=float, default=100.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", dest="output_dir", default="beamvar_out")
    ap.add_argument("--manifest", help="rerun the configuration stored in a manifest.json")
    ap.add_argument("-v", "--verbose", action="store_true")
    a = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if a.verbose else logging.WARNING)
    if a.scenario == "replay":
        if not a.manifest:
            raise ConfigError("replay needs --manifest")
        with open(a.manifest) as fh:
            conf = json.load(fh)["config"]
        if a.output_dir != "beamvar_out":
            conf["output_dir"] = a.output_dir
        return ScenarioConfig(**conf)
    kw = vars(a)
    for key in ("manifest", "verbose"):
        kw.pop(key)
    return ScenarioConfig(**kw)


def main(argv=None) -> int:
    try:
        cfg = _parse(argv).validate()
    except (ConfigError, TypeError, OSError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        rep = run_scenario(cfg)
    except (RuntimeError, SplitSolveError, ArithmeticError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    for name, ok in rep.checks.items():
        print(f"[{'PASS' if ok else 'FAIL'}] {cfg.scenario}: {name}")
    for key, val in rep.summary.items():
        if not isinstance(val, (list, dict)):
            print(f"  {key} = {val}")
    print(f"  wrote {len(rep.files) + 1} files to {cfg.output_dir}")
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
