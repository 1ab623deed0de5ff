"""Command-line front end.

    glhelix profile  --rmax 40 --nodes 8000 --out DIR
    glhelix ansatz   --eps 0.1 --dhat 1 --out field.glf
    glhelix error    --eps 0.1 --dhat 1 --out DIR
    glhelix norms    --field f.glf --norm star
    glhelix modes    --field f.glf --j 0 --out modes.csv
    glhelix filaments --family polygon --n 3 --out DIR
    glhelix reduce   --eps 0.1,0.05 --out DIR
    glhelix solve    --eps 0.1 --out field.glf
    glhelix verify   --field field.glf
    glhelix sweep    --eps 0.2,0.1,0.05 --check error-scaling --out DIR

Exit codes: 0 success, 1 compute failure, 2 configuration error.  Every
output records the full run configuration in its metadata.  Set
GLHELIX_THREADS to cap the BLAS/OpenMP thread count.
"""

import os

_threads = os.environ.get("GLHELIX_THREADS")
if _threads:
    for _k in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_k, _threads)

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__


class ConfigError(ValueError):
    pass


SUBCOMMANDS = ("profile", "ansatz", "error", "norms", "modes", "filaments",
               "reduce", "solve", "verify", "sweep")
CHECKS = ("error-scaling", "nonlinear", "reduced", "gibbons")


@dataclass
class RunConfig:
    command: str
    eps: list = field(default_factory=list)
    d_hat: float = 1.0
    family: str = "two"
    n: int = 2
    h_max: float = 0.25
    m: int = None
    r_max: float = 40.0
    nodes: int = 8000
    profile: str = None
    out: str = None
    field: str = None
    norm: str = "starstar"
    j: int = 0
    k_max: int = 32
    check: str = "error-scaling"
    tol: float = 1e-9
    seed: int = 0
    alpha0: float = 0.25
    fixed_dhat: bool = False

    def validate(self):
        if self.command not in SUBCOMMANDS:
            raise ConfigError("unknown subcommand %r" % self.command)
        for e in self.eps:
            if not 0 < e < 1:
                raise ConfigError("eps must lie in (0, 1), got %g" % e)
        if self.command in ("ansatz", "error", "reduce", "solve", "sweep") and not self.eps:
            raise ConfigError("--eps is required for %s" % self.command)
        if self.command in ("norms", "modes", "verify") and not self.field:
            raise ConfigError("--field is required for %s" % self.command)
        if self.d_hat <= 0:
            raise ConfigError("--dhat must be positive")
        if not 0 < self.h_max <= 1:
            raise ConfigError("--hmax must lie in (0, 1]")
        if self.m is not None and self.m < 3:
            raise ConfigError("--m must be at least 3")
        if self.r_max < 20 or self.nodes < 2000:
            raise ConfigError("profile needs --rmax >= 20 and --nodes >= 2000")
        if self.family not in ("two", "polygon", "centered"):
            raise ConfigError("unknown family %r" % self.family)
        if self.norm not in ("star", "starstar", "sharp", "sharpsharp"):
            raise ConfigError("unknown norm %r" % self.norm)
        if self.check not in CHECKS:
            raise ConfigError("unknown check %r (choose from %s)" % (self.check, ", ".join(CHECKS)))
        if not 0 < self.alpha0 < 1:
            raise ConfigError("--alpha0 must lie in (0, 1)")
        if self.tol <= 0:
            raise ConfigError("--tol must be positive")
        return self

    def to_dict(self):
        d = asdict(self)
        d["version"] = __version__
        return d


def _eps_list(s):
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma separated list of floats")


def build_parser():
    ap = argparse.ArgumentParser(prog="glhelix",
                                 description="Helical vortex filaments for Ginzburg-Landau.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, eps=False, grid=False, out=True):
        if eps:
            p.add_argument("--eps", type=_eps_list, default=[])
            p.add_argument("--dhat", dest="d_hat", type=float, default=1.0)
        if grid:
            p.add_argument("--hmax", dest="h_max", type=float, default=0.25)
            p.add_argument("--m", type=int, default=None)
        p.add_argument("--profile", default=None, help="GLPROF1 cache to load")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--alpha0", type=float, default=0.25)
        if out:
            p.add_argument("--out", default=None)

    p = sub.add_parser("profile", help="solve the vortex profile")
    p.add_argument("--rmax", dest="r_max", type=float, default=40.0)
    p.add_argument("--nodes", type=int, default=8000)
    p.add_argument("--out", default=".")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("ansatz", help="write the ansatz field")
    common(p, eps=True, grid=True)
    p.add_argument("--family", default="two")
    p.add_argument("--n", type=int, default=2)

    p = sub.add_parser("error", help="error field and its norms")
    common(p, eps=True, grid=True)

    p = sub.add_parser("norms", help="weighted norms of a field file")
    common(p)
    p.add_argument("--field", required=True)
    p.add_argument("--norm", default="starstar")

    p = sub.add_parser("modes", help="angular modes about a vortex")
    common(p)
    p.add_argument("--field", required=True)
    p.add_argument("--j", type=int, default=0)
    p.add_argument("--kmax", dest="k_max", type=int, default=32)

    p = sub.add_parser("filaments", help="rotating filament equilibria")
    common(p)
    p.add_argument("--family", default="polygon")
    p.add_argument("--n", type=int, default=3)

    p = sub.add_parser("reduce", help="leading-order reduced equation")
    common(p, eps=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--sweep", action="store_true", help="accepted for compatibility")

    p = sub.add_parser("solve", help="projected nonlinear solve")
    common(p, eps=True, grid=True)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--fixed-dhat", dest="fixed_dhat", action="store_true",
                   help="solve at --dhat only, skip the outer root search")

    p = sub.add_parser("verify", help="check a solution field")
    common(p, out=False)
    p.add_argument("--field", required=True)

    p = sub.add_parser("sweep", help="eps-scaling studies")
    common(p, eps=True, grid=True)
    p.add_argument("--check", default="error-scaling")
    p.add_argument("--tol", type=float, default=1e-9)
    return ap


def parse_config(argv):
    ns = build_parser().parse_args(argv)
    known = set(RunConfig.__dataclass_fields__)
    kw = {k: v for k, v in vars(ns).items() if k in known}
    return RunConfig(**kw).validate()


# --------------------------------------------------------------------------
# helpers

def _profile(cfg):
    from .profile import default_profile, load_profile
    if cfg.profile:
        return load_profile(cfg.profile)
    return default_profile()


def _outdir(cfg, default="."):
    d = cfg.out or default
    os.makedirs(d, exist_ok=True)
    return d


def _dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o))


def _config(cfg, eps, d_hat=None):
    from .fields import centered, polygon, two_vortex
    d_hat = cfg.d_hat if d_hat is None else d_hat
    if cfg.family == "two":
        return two_vortex(eps, d_hat)
    if cfg.family == "polygon":
        return polygon(eps, cfg.n)
    return centered(eps, cfg.n)


def _grid(cfg, vc):
    from .fields import make_grid
    return make_grid(vc, h_max=cfg.h_max, m=cfg.m)


def _norm_params(cfg):
    from .norms import NormParams
    return NormParams(alpha0=cfg.alpha0, seed=cfg.seed)


def _base_for(f, p):
    from .fields import build_ansatz
    return build_ansatz(f.cfg, p, f.grid)


# --------------------------------------------------------------------------
# subcommands

def cmd_profile(cfg):
    from .profile import (asymptotics_report, profile_to_csv, save_profile,
                          solve_profile)
    p = solve_profile(cfg.r_max, cfg.nodes)
    d = _outdir(cfg)
    save_profile(p, os.path.join(d, "profile.glprof"))
    profile_to_csv(p, os.path.join(d, "profile.csv"))
    rep = asymptotics_report(p)
    rep.update(alpha_slope=p.alpha_slope, bvp_residual=p.bvp_residual,
               run_config=cfg.to_dict())
    _dump(rep, os.path.join(d, "profile.json"))
    print("alpha = %.10f  w(10) = %.6f  residual = %.2e"
          % (p.alpha_slope, float(p(np.array([10.0]))[0]), p.bvp_residual))
    return 0


def cmd_ansatz(cfg):
    from .fields import build_ansatz, write_field
    p = _profile(cfg)
    vc = _config(cfg, cfg.eps[0])
    g = _grid(cfg, vc)
    V = build_ansatz(vc, p, g)
    V.meta["run_config"] = json.dumps(cfg.to_dict(), sort_keys=True)
    out = cfg.out or "ansatz.glf"
    write_field(V, out)
    print("wrote %s  (%d x %d, h = %.5g, d~ = %.5g)" % (out, g.N1, g.N2, g.h, vc.d_tilde))
    return 0


def cmd_error(cfg):
    from .fields import write_field
    from .norms import norm_star_star
    from .operators import compute_error
    p = _profile(cfg)
    np_ = _norm_params(cfg)
    d = _outdir(cfg)
    rows = []
    for eps in cfg.eps:
        vc = _config(cfg, eps)
        g = _grid(cfg, vc)
        err = compute_error(vc, p, g)
        rep = norm_star_star(err.R, np_)
        err.R.meta["run_config"] = json.dumps(cfg.to_dict(), sort_keys=True)
        write_field(err.R, os.path.join(d, "error_eps%g.glf" % eps))
        _dump({"norm": rep.to_dict(), "run_config": cfg.to_dict()},
              os.path.join(d, "error_eps%g.json" % eps))
        L = abs(math.log(eps))
        rows.append((eps, rep.total, rep.total * L))
        print("eps = %-6g ||R||** = %.6g  * |log eps| = %.6g" % rows[-1])
    return 0


def cmd_norms(cfg):
    from .fields import read_field
    from .modes import parity_split
    from .norms import (norm_star, norm_star_star, seminorm_sharp,
                        seminorm_sharpsharp)
    p = _profile(cfg)
    f = read_field(cfg.field)
    if f.cfg is None:
        raise ConfigError("field file carries no vortex configuration")
    base = _base_for(f, p)
    np_ = _norm_params(cfg)
    if cfg.norm in ("sharp", "sharpsharp"):
        f, _ = parity_split(f, np_, radius="psi" if cfg.norm == "sharp" else "h",
                            base=base)
    fun = {"star": norm_star, "starstar": norm_star_star,
           "sharp": seminorm_sharp, "sharpsharp": seminorm_sharpsharp}[cfg.norm]
    rep = fun(f, np_, base)
    print(rep.table())
    if cfg.out:
        d = rep.to_dict()
        d["run_config"] = cfg.to_dict()
        _dump(d, cfg.out)
    return 0


def cmd_modes(cfg):
    from .fields import read_field
    from .modes import decompose
    f = read_field(cfg.field)
    if f.cfg is None:
        raise ConfigError("field file carries no vortex configuration")
    if not 0 <= cfg.j < len(f.cfg.vortices):
        raise ConfigError("--j out of range")
    # radii start at 1 so residual fields, undefined inside rho < 1/2,
    # are sampled away from their core
    ex = decompose(f, cfg.j, k_max=cfg.k_max, radii=np.linspace(1.0, 4.0, 13))
    out = cfg.out or "modes.csv"
    ex.to_csv(out)
    print("odd energy %.6g  even energy %.6g  -> %s"
          % (ex.energy("odd"), ex.energy("even"), out))
    return 0


def cmd_filaments(cfg):
    from .filaments import (centered_equilibrium, energy_rescaled,
                            ode_residual, polygon_equilibrium)
    if cfg.family == "polygon":
        if cfg.n < 2:
            raise ConfigError("polygon needs --n >= 2")
        tr = polygon_equilibrium(cfg.n)
    elif cfg.family == "centered":
        if cfg.n < 5:
            raise ConfigError("centered family needs --n >= 5")
        tr = centered_equilibrium(cfg.n)
    else:
        raise ConfigError("filaments supports --family polygon or centered")
    res, _ = ode_residual(tr)
    d = _outdir(cfg)
    tr.meta["run_config"] = cfg.to_dict()
    tr.to_json(os.path.join(d, "filaments.json"))
    tr.to_csv(os.path.join(d, "filaments.csv"))
    print("n = %d  ODE residual = %.3e  rescaled energy = %.12g"
          % (tr.n, res, energy_rescaled(tr)))
    return 0


def cmd_reduce(cfg):
    from .reduction import solve_reduced
    p = _profile(cfg)
    np_ = _norm_params(cfg)
    d = _outdir(cfg)
    for eps in cfg.eps:
        rep = solve_reduced(eps, p, tol=cfg.tol, np_=np_)
        out = rep.to_dict()
        out["run_config"] = cfg.to_dict()
        _dump(out, os.path.join(d, "reduce_eps%g.json" % eps))
        if not rep.converged:
            print("eps = %g: %s" % (eps, "; ".join(rep.notes)))
            return 1
        print("eps = %-6g d0 = %.8f  sqrt(a0/a1) = %.8f  rel gap = %.4f  a1 = %.6f"
              % (eps, rep.d0, rep.reference, rep.rel_gap, rep.a1))
    return 0


def _trace_dict(tr):
    d = tr.to_dict()
    d.pop("times", None)
    d["meta"].pop("Phi", None)
    d["meta"].pop("setup_time", None)
    return d


def cmd_solve(cfg):
    from .fields import write_field
    from .solver import (LinearSystem, interior_residual, solution_field,
                         solve_full, solve_nonlinear_projected)
    p = _profile(cfg)
    np_ = _norm_params(cfg)
    eps = cfg.eps[0]
    if cfg.fixed_dhat:
        vc = _config(cfg, eps)
        sysm = LinearSystem(vc, p, _grid(cfg, vc))
        psi, c, tr = solve_nonlinear_projected(vc, p, system=sysm, tol=cfg.tol)
        v = solution_field(tr.meta["Phi"], sysm)
        v.meta.update(d_hat=vc.d_hat, c=c, h=sysm.grid.h,
                      residual=interior_residual(v))
        report = None
    else:
        v, report, tr = solve_full(eps, p, m=cfg.m, h_max=cfg.h_max,
                                   picard_tol=cfg.tol, np_=np_)
    v.meta["run_config"] = json.dumps(cfg.to_dict(), sort_keys=True)
    out = cfg.out or "solution.glf"
    write_field(v, out)
    stem = os.path.splitext(out)[0]
    _dump({"trace": _trace_dict(tr),
           "reduction": report.to_dict() if report is not None else None,
           "run_config": cfg.to_dict()}, stem + "_report.json")
    print("d_hat = %.8f  c = %.3e  max|S(v)| = %.3e  h = %.4g  -> %s"
          % (v.meta["d_hat"], v.meta["c"], v.meta["residual"], v.meta["h"], out))
    return 0


def verify_field(v):
    """Residual, vortex table and boundary minimum of a solution field."""
    from .solver import gibbons_minimum, interior_residual
    from .fields import track_vortices
    res = interior_residual(v)
    vs = track_vortices(v)
    gmin = gibbons_minimum(v)
    return {"residual": res, "vortices": [[z.real, z.imag, int(w)] for z, w in vs],
            "gibbons_min": gmin,
            "gibbons_C": (1 - gmin) * abs(math.log(v.cfg.eps))}


def cmd_verify(cfg):
    from .fields import read_field
    v = read_field(cfg.field)
    if v.cfg is None:
        raise ConfigError("field file carries no vortex configuration")
    r = verify_field(v)
    print("max |S(v)| interior : %.3e" % r["residual"])
    print("vortices (x1, x2, degree):")
    for x, y, w in r["vortices"]:
        print("  %+12.6f %+12.6f %+d" % (x, y, w))
    print("min |v| outer annulus: %.8f  (C' = %.4g)" % (r["gibbons_min"], r["gibbons_C"]))
    return 0


def cmd_sweep(cfg):
    p = _profile(cfg)
    np_ = _norm_params(cfg)
    d = _outdir(cfg)
    rows = []
    if cfg.check == "error-scaling":
        from .norms import norm_star_star
        from .operators import compute_error
        header = ["eps", "norm", "norm_log_eps"]
        for eps in cfg.eps:
            vc = _config(cfg, eps)
            err = compute_error(vc, p, _grid(cfg, vc))
            n = norm_star_star(err.R, np_).total
            rows.append([eps, n, n * abs(math.log(eps))])
    elif cfg.check == "nonlinear":
        from .fields import ComplexField
        from .norms import norm_star
        from .solver import LinearSystem, solve_nonlinear_projected
        header = ["eps", "iterations", "contraction", "c", "star", "star_log_eps"]
        for eps in cfg.eps:
            vc = _config(cfg, eps)
            sysm = LinearSystem(vc, p, _grid(cfg, vc))
            psi, c, tr = solve_nonlinear_projected(vc, p, system=sysm, tol=cfg.tol)
            base = ComplexField(sysm.grid, sysm.V, vc, "ansatz")
            s = norm_star(psi, np_, base).total
            rows.append([eps, tr.meta["iterations"], tr.meta["contraction"], c,
                         s, s * abs(math.log(eps))])
    elif cfg.check == "reduced":
        from .reduction import solve_reduced
        header = ["eps", "d0", "reference", "rel_gap", "a0", "a1"]
        for eps in cfg.eps:
            r = solve_reduced(eps, p, tol=cfg.tol, np_=np_)
            rows.append([eps, r.d0, r.reference, r.rel_gap, r.a0, r.a1])
    else:
        from .solver import solve_full
        header = ["eps", "d_hat", "residual", "gibbons_min", "gibbons_C"]
        for eps in cfg.eps:
            v, rep, tr = solve_full(eps, p, m=cfg.m, h_max=cfg.h_max,
                                    picard_tol=cfg.tol, np_=np_)
            r = verify_field(v)
            rows.append([eps, rep.d0, r["residual"], r["gibbons_min"], r["gibbons_C"]])
    path = os.path.join(d, "sweep_%s.csv" % cfg.check)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow(["%.12g" % x for x in r])
    _dump(cfg.to_dict(), os.path.join(d, "sweep_%s_config.json" % cfg.check))
    width = max(len(h) for h in header) + 2
    print("".join(h.rjust(width) for h in header))
    for r in rows:
        print("".join(("%.6g" % x).rjust(width) for x in r))
    return 0


_DISPATCH = {
    "profile": cmd_profile, "ansatz": cmd_ansatz, "error": cmd_error,
    "norms": cmd_norms, "modes": cmd_modes, "filaments": cmd_filaments,
    "reduce": cmd_reduce, "solve": cmd_solve, "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def run(argv=None):
    """Run one subcommand and return the exit code."""
    try:
        cfg = parse_config(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    try:
        return _DISPATCH[cfg.command](cfg)
    except (ConfigError, FileNotFoundError) as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        print("error: %s: %s" % (type(exc).__name__, exc), file=sys.stderr)
        return 1


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
