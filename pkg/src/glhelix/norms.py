"""Weighted norms and seminorms of grid fields.

Four quantities are provided:

* ``norm_star_star`` for right-hand sides and errors,
* ``norm_star`` for perturbations psi,
* ``seminorm_sharp`` and ``seminorm_sharpsharp`` for the odd parts,
  which are allowed to decay slowly up to the distance R_eps.

Every norm is returned as a NormReport listing its pieces.  Sup pieces
are exact maxima over grid nodes.  Hoelder seminorms are maxima of
|f(x) - f(y)| / |x - y|^alpha over point pairs: exhaustive when the pair
count is small, otherwise a seeded random sample, in which case the
value is a lower bound and the report says so.

Region conventions (see the README for the reasoning):

* weights and regions use the distances rho_j to all vortex centers;
* "2 < rho_j < R" regions are the union over j of the annuli around each
  vortex, restricted to rho_k > 2 for every k;
* the Hoelder ball B_{|z|/2}(z) is centred at z with radius min_j rho_j / 2,
  i.e. |z| is measured from the nearest vortex.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree


class NormError(ValueError):
    pass


@dataclass
class NormParams:
    """Exponents, the odd-part radius R_eps and the sampling budget."""
    alpha: float = 0.5
    sigma: float = 0.5
    alpha0: float = 0.25
    pairs: int = 4096
    exhaustive_max: int = 2_000_000
    n_centers: int = 192
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.alpha < 1 and 0 < self.sigma < 1):
            raise NormError("alpha and sigma must lie in (0, 1)")
        if self.alpha0 <= 0:
            raise NormError("alpha0 must be positive")

    def R_eps(self, eps, d_tilde):
        """R_eps = alpha0 / (eps sqrt|log eps|), clamped to d_tilde / 2."""
        R = self.alpha0 / (eps * math.sqrt(abs(math.log(eps))))
        return min(R, 0.5 * d_tilde)

    def effective_alpha0(self, eps, d_tilde):
        return self.R_eps(eps, d_tilde) * eps * math.sqrt(abs(math.log(eps)))

    def to_dict(self):
        return {"alpha": self.alpha, "sigma": self.sigma, "alpha0": self.alpha0,
                "pairs": self.pairs, "n_centers": self.n_centers, "seed": self.seed}


@dataclass
class NormReport:
    name: str
    pieces: dict
    total: float
    meta: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.pieces[key]

    def to_dict(self):
        return {"name": self.name, "total": self.total, "pieces": dict(self.pieces),
                "meta": self.meta}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=float)

    def table(self):
        lines = ["%-28s %14s" % (self.name, "value")]
        for k, v in self.pieces.items():
            lines.append("  %-26s %14.6e" % (k, v))
        lines.append("  %-26s %14.6e" % ("total", self.total))
        return "\n".join(lines)


# --------------------------------------------------------------------------
# geometry helpers

class _Geom:
    def __init__(self, f, p):
        if f.cfg is None:
            raise NormError("field carries no vortex configuration")
        self.grid = f.grid
        self.cfg = f.cfg
        self.eps = f.cfg.eps
        self.p = p
        Z = f.grid.Z
        self.rhos = [np.abs(Z - c) for c in f.cfg.centers]
        self.rmin = np.min(self.rhos, axis=0)
        self.R = p.R_eps(self.eps, f.cfg.d_tilde)
        self.r = np.abs(Z)
        self.pts = np.column_stack([f.grid.X.ravel(), f.grid.Y.ravel()])
        self._tree = None

    @property
    def tree(self):
        if self._tree is None:
            self._tree = cKDTree(self.pts)
        return self._tree

    def wsum(self, power, extra=0.0):
        return sum(r ** power for r in self.rhos) + extra

    def outside(self, r0=2.0):
        return np.logical_and.reduce([r > r0 for r in self.rhos])

    def inside_all(self, hi):
        return np.logical_and.reduce([(r > 2) & (r < hi) for r in self.rhos])

    def annuli(self, hi):
        anyann = np.logical_or.reduce([(r > 2) & (r < hi) for r in self.rhos])
        return anyann & self.outside()


def _nanmax(a, mask=None):
    a = np.abs(a)
    if mask is not None:
        a = a[mask]
    a = a[np.isfinite(a)]
    return float(a.max()) if a.size else 0.0


def _pairs_max(vals, pts, alpha, rng, budget, exhaustive_max):
    """max |f(x)-f(y)| / |x-y|^alpha over pairs of the given nodes.

    `vals` has shape (n,) or (n, m) (vector valued, Euclidean norm).
    Returns (value, exhaustive_flag).
    """
    n = pts.shape[0]
    if n < 2:
        return 0.0, True
    vals = vals.reshape(n, -1)
    npairs = n * (n - 1) // 2
    if npairs <= exhaustive_max:
        best = 0.0
        chunk = max(1, int(4_000_000 // max(n, 1)))
        for s in range(0, n, chunk):
            a = slice(s, min(n, s + chunk))
            dv = vals[a, None, :] - vals[None, :, :]
            num = np.sqrt(np.sum(np.abs(dv) ** 2, axis=-1))
            dx = pts[a, None, :] - pts[None, :, :]
            dist = np.sqrt(np.sum(dx ** 2, axis=-1))
            with np.errstate(divide="ignore", invalid="ignore"):
                q = np.where(dist > 0, num / dist ** alpha, 0.0)
            q = q[np.isfinite(q)]
            if q.size:
                best = max(best, float(q.max()))
        return best, True
    i = rng.integers(0, n, budget)
    j = rng.integers(0, n, budget)
    keep = i != j
    i, j = i[keep], j[keep]
    num = np.sqrt(np.sum(np.abs(vals[i] - vals[j]) ** 2, axis=-1))
    dist = np.sqrt(np.sum((pts[i] - pts[j]) ** 2, axis=-1))
    q = num / dist ** alpha
    q = q[np.isfinite(q)]
    return (float(q.max()) if q.size else 0.0), False


def holder_on_set(vals, mask, geom, rng=None):
    """Hoelder seminorm of `vals` over the node set `mask`."""
    p = geom.p
    rng = rng if rng is not None else np.random.default_rng(p.seed)
    flat = mask.ravel() & np.all(np.isfinite(vals.reshape(mask.size, -1)), axis=1)
    idx = np.flatnonzero(flat)
    return _pairs_max(vals.reshape(mask.size, -1)[idx], geom.pts[idx], p.alpha,
                      rng, p.pairs, p.exhaustive_max)


def holder_over_balls(vals, region, radius, weight, geom, rng=None):
    """sup over z in `region` of [f]_{alpha, B_radius(z)} / weight(z).

    `radius` and `weight` are arrays on the grid.  Ball centers are a
    deterministic subsample of the region (at most n_centers of them);
    pairs inside each ball are exhaustive when few, sampled otherwise.
    """
    p = geom.p
    rng = rng if rng is not None else np.random.default_rng(p.seed)
    cand = np.flatnonzero(region.ravel())
    if cand.size == 0:
        return 0.0, True, 0
    if cand.size > p.n_centers:
        cand = cand[np.linspace(0, cand.size - 1, p.n_centers).round().astype(int)]
    flatv = vals.reshape(region.size, -1)
    finite = np.all(np.isfinite(flatv), axis=1)
    best = 0.0
    exhaustive = True
    rad = radius.ravel()
    wt = weight.ravel()
    for c in cand:
        nb = np.asarray(geom.tree.query_ball_point(geom.pts[c], rad[c]), dtype=int)
        nb = nb[finite[nb]]
        val, ex = _pairs_max(flatv[nb], geom.pts[nb], p.alpha, rng,
                             p.pairs, min(p.exhaustive_max, 50_000))
        exhaustive &= ex
        best = max(best, val / wt[c])
    return best, exhaustive, int(cand.size)


def _grad(u, h):
    """Central first derivatives with NaN on the boundary ring."""
    g1 = np.full(u.shape, np.nan, dtype=u.dtype)
    g2 = np.full(u.shape, np.nan, dtype=u.dtype)
    g1[1:-1, 1:-1] = (u[1:-1, 2:] - u[1:-1, :-2]) / (2 * h)
    g2[1:-1, 1:-1] = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2 * h)
    return g1, g2


def _hess(u, h):
    out = []
    for a in ("11", "22", "12"):
        m = np.full(u.shape, np.nan, dtype=u.dtype)
        if a == "11":
            m[1:-1, 1:-1] = (u[1:-1, 2:] - 2 * u[1:-1, 1:-1] + u[1:-1, :-2]) / h ** 2
        elif a == "22":
            m[1:-1, 1:-1] = (u[2:, 1:-1] - 2 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / h ** 2
        else:
            m[1:-1, 1:-1] = (u[2:, 2:] - u[2:, :-2] - u[:-2, 2:] + u[:-2, :-2]) / (4 * h ** 2)
        out.append(m)
    return out


def _hess_stack(u, h):
    """(N2, N1, 4) stack [u11, u22, u12, u12] so the Euclidean norm is Frobenius."""
    u11, u22, u12 = _hess(u, h)
    return np.stack([u11, u22, u12, u12], axis=-1)


def _regular(f, base):
    if f.regular is not None:
        return f.regular
    if base is None:
        raise NormError("core pieces need V_d: pass `base` or a field with a regular part")
    return base.values * f.values


def _core_pieces(pieces, reg, geom, radius, order, rng, prefix="core"):
    """||reg||_{C^{order,alpha}(rho_j < radius)} for every vortex j."""
    h = geom.grid.h
    tot = 0.0
    ex_all = True
    for j, rho in enumerate(geom.rhos):
        disc = rho < radius
        val = _nanmax(reg, disc)
        if order >= 1:
            g1, g2 = _grad(reg, h)
            val += _nanmax(np.sqrt(np.abs(g1) ** 2 + np.abs(g2) ** 2), disc)
        if order >= 2:
            H = _hess_stack(reg, h)
            val += _nanmax(np.sqrt(np.sum(np.abs(H) ** 2, axis=-1)), disc)
            hs, ex = holder_on_set(H, disc, geom, rng)
        else:
            hs, ex = holder_on_set(reg, disc, geom, rng)
        ex_all &= ex
        val += hs
        pieces["%s_%d" % (prefix, j + 1)] = val
        tot += val
    return tot, ex_all


# --------------------------------------------------------------------------
# the norms

def norm_star_star(h, p=None, base=None):
    """The weighted norm used for errors and right-hand sides."""
    p = p or NormParams()
    g = _Geom(h, p)
    rng = np.random.default_rng(p.seed)
    a, s, eps = p.alpha, p.sigma, g.eps
    pieces = {}
    reg = _regular(h, base)
    tot, ex_core = _core_pieces(pieces, reg, g, 3.0, 0, rng)

    out = g.outside()
    hv = h.values
    w_re = g.wsum(-2.0, eps ** 2)
    w_im = g.wsum(s - 2, eps ** (s - 2))
    re_t = np.abs(hv.real) / w_re
    im_t = np.abs(hv.imag) / w_im
    pieces["outer_re"] = _nanmax(re_t, out)
    pieces["outer_im"] = _nanmax(im_t, out)
    pieces["outer"] = _nanmax(re_t + im_t, out)
    tot += pieces["outer"]

    ann = g.annuli(2 * g.R)
    hre, ex1, nc1 = holder_over_balls(hv.real, ann, g.rmin / 2, g.wsum(-2 - a), g, rng)
    him, ex2, nc2 = holder_over_balls(hv.imag, ann, np.ones_like(g.rmin), g.wsum(s - 2), g, rng)
    pieces["holder_re"] = hre
    pieces["holder_im"] = him
    tot += hre + him
    meta = _meta(g, p, exhaustive=bool(ex_core and ex1 and ex2),
                 annulus_nodes=int(ann.sum()), ball_centers=nc1 + nc2)
    return NormReport("norm**", pieces, float(tot), meta)


def norm_star(psi, p=None, base=None):
    """The weighted C^{2,alpha}-type norm used for perturbations psi."""
    p = p or NormParams()
    g = _Geom(psi, p)
    rng = np.random.default_rng(p.seed)
    a, s, eps = p.alpha, p.sigma, g.eps
    hh = g.grid.h
    pieces = {}
    reg = _regular(psi, base)
    tot, ex_core = _core_pieces(pieces, reg, g, 3.0, 2, rng)

    out = g.outside()
    band = g.inside_all(2 / eps)
    far = (g.r > 1 / eps) & out
    ann = g.annuli(g.R)
    X, Y = g.grid.X, g.grid.Y
    with np.errstate(invalid="ignore", divide="ignore"):
        rr = np.where(g.r > 0, g.r, np.nan)
    exact = True
    truncated = not bool(far.any())
    for part, name in ((psi.values.real, "1"), (psi.values.imag, "2")):
        u = np.where(out | ann, part, np.nan)
        g1, g2 = _grad(u, hh)
        grad = np.sqrt(g1 ** 2 + g2 ** 2)
        dr = (X * g1 + Y * g2) / rr
        dsv = X * g2 - Y * g1
        H = _hess_stack(u, hh)
        hn = np.sqrt(np.sum(H ** 2, axis=-1))
        if name == "1":
            w0 = np.ones_like(g.rmin)
            w1 = g.wsum(-1.0)
            far_t = np.abs(dr) / eps + np.abs(dsv)
            w2 = g.wsum(-2.0)
            hol, ex, _ = holder_over_balls(H, ann, g.rmin / 2, g.wsum(-2 - a), g, rng)
        else:
            w0 = g.wsum(s - 2, eps ** (s - 2))
            w1 = g.wsum(s - 2)
            far_t = eps ** (s - 2) * np.abs(dr) + eps ** (s - 1) * np.abs(dsv)
            w2 = g.wsum(s - 2)
            hol, ex, _ = holder_over_balls(H, ann, np.ones_like(g.rmin), g.wsum(s - 2), g, rng)
        exact &= ex
        pc = {
            "sup": _nanmax(u / w0, out),
            "grad": _nanmax(grad / w1, band),
            "far": _nanmax(far_t, far),
            "hess": _nanmax(hn / w2, ann),
            "holder": hol,
        }
        for k, v in pc.items():
            pieces["%s_%s" % (k, name)] = v
        tot += sum(pc.values())
    meta = _meta(g, p, exhaustive=bool(ex_core and exact), far_truncated=truncated,
                 annulus_nodes=int(ann.sum()))
    return NormReport("norm*", pieces, float(tot), meta)


def seminorm_sharp(psi, p=None, base=None):
    """Seminorm for the odd part of psi, allowing logarithmic growth."""
    p = p or NormParams()
    g = _Geom(psi, p)
    rng = np.random.default_rng(p.seed)
    s, eps = p.sigma, g.eps
    pieces = {}
    reg = _regular(psi, base)
    core = {}
    ctot, ex = _core_pieces(core, reg, g, 3.0, 2, rng)
    L = abs(math.log(eps))
    for k, v in core.items():
        pieces[k] = v / L
    tot = ctot / L
    ann = g.annuli(g.R)
    R = g.R
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = [np.log(2 * R / r) for r in g.rhos]
    u1 = np.where(ann, psi.values.real, np.nan)
    u2 = np.where(ann, psi.values.imag, np.nan)
    # gradients need the neighbours, so take them from the unmasked field
    g11, g12 = _grad(psi.values.real, g.grid.h)
    g21, g22 = _grad(psi.values.imag, g.grid.h)
    wa = sum(r * lg for r, lg in zip(g.rhos, logs))
    wb = sum(logs)
    wc = g.wsum(s - 1) + sum(lg / r for r, lg in zip(g.rhos, logs))
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.abs(u1) / wa + np.sqrt(g11 ** 2 + g12 ** 2) / wb
        t2 = (np.abs(u2) + np.sqrt(g21 ** 2 + g22 ** 2)) / wc
    pieces["sharp_1"] = _nanmax(t1, ann)
    pieces["sharp_2"] = _nanmax(t2, ann)
    tot += pieces["sharp_1"] + pieces["sharp_2"]
    meta = _meta(g, p, exhaustive=ex, annulus_nodes=int(ann.sum()))
    return NormReport("sharp", pieces, float(tot), meta)


def seminorm_sharpsharp(h, p=None, base=None):
    """Seminorm for the odd part of a right-hand side."""
    p = p or NormParams()
    g = _Geom(h, p)
    rng = np.random.default_rng(p.seed)
    s = p.sigma
    pieces = {}
    reg = _regular(h, base)
    tot, ex = _core_pieces(pieces, reg, g, 4.0, 0, rng)
    ann = g.annuli(g.R)
    t = (np.abs(h.values.real) / g.wsum(-1.0)
         + np.abs(h.values.imag) / g.wsum(s - 1))
    pieces["outer_re"] = _nanmax(np.abs(h.values.real) / g.wsum(-1.0), ann)
    pieces["outer_im"] = _nanmax(np.abs(h.values.imag) / g.wsum(s - 1), ann)
    pieces["outer"] = _nanmax(t, ann)
    tot += pieces["outer"]
    meta = _meta(g, p, exhaustive=ex, annulus_nodes=int(ann.sum()))
    return NormReport("sharpsharp", pieces, float(tot), meta)


def _meta(g, p, exhaustive, **kw):
    m = {"params": p.to_dict(), "R_eps": g.R,
         "alpha0_effective": p.effective_alpha0(g.eps, g.cfg.d_tilde),
         "grid": g.grid.to_dict(), "eps": g.eps,
         "holder": "exact over node pairs" if exhaustive else
                   "sampled lower bound (%d pairs per ball)" % p.pairs}
    m.update(kw)
    return m
