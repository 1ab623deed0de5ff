"""Angular modes about a vortex and the odd/even parity split.

For a field h with h(conj z) = -conj h(z), the expansion in the polar
angle theta_j about a vortex on the real axis is

    h = sum_k  h1^k(rho) sin(k theta_j) + i h2^k(rho) cos(k theta_j).

The odd-k part equals the reflection average

    h^{o,j}(z) = (h(z) + conj h(R_j z)) / 2,   R_j z = 2 d_j - Re z + i Im z,

which is exact on grids that are closed under R_j.  `parity_split` uses
the reflection identity; `decompose` is the Fourier route, kept as an
independent diagnostic.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .norms import NormParams
from .operators import eta1


class ModeError(ValueError):
    pass


@dataclass
class ModeExpansion:
    j: int
    center: complex
    radii: np.ndarray
    h1: np.ndarray      # shape (k_max + 1, n_radii)
    h2: np.ndarray
    n_theta: int = 256
    meta: dict = field(default_factory=dict)

    @property
    def k_max(self):
        return self.h1.shape[0] - 1

    def resynthesize(self, theta, parity=None):
        """Sum the modes at (radii x theta); parity 'odd'/'even' filters k."""
        k = np.arange(self.k_max + 1)
        sel = np.ones_like(k, dtype=bool)
        if parity == "odd":
            sel = k % 2 == 1
        elif parity == "even":
            sel = k % 2 == 0
        th = np.asarray(theta)[None, None, :]
        kk = k[sel][:, None, None]
        out = (self.h1[sel][:, :, None] * np.sin(kk * th)
               + 1j * self.h2[sel][:, :, None] * np.cos(kk * th))
        return out.sum(axis=0)

    def energy(self, parity=None):
        k = np.arange(self.k_max + 1)
        sel = np.ones_like(k, dtype=bool)
        if parity == "odd":
            sel = k % 2 == 1
        elif parity == "even":
            sel = k % 2 == 0
        return float(np.sum(self.h1[sel] ** 2) + np.sum(self.h2[sel] ** 2))

    def to_csv(self, path):
        """One row per (component, k) with the radial samples as columns."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["component", "k"] + ["%.17g" % r for r in self.radii])
            for name, arr in (("h1", self.h1), ("h2", self.h2)):
                for k in range(arr.shape[0]):
                    w.writerow([name, k] + ["%.17g" % v for v in arr[k]])

    @classmethod
    def from_csv(cls, path, j=0, center=0j):
        with open(path) as fh:
            rows = list(csv.reader(fh))
        radii = np.array([float(x) for x in rows[0][2:]])
        h1 = [[float(x) for x in r[2:]] for r in rows[1:] if r[0] == "h1"]
        h2 = [[float(x) for x in r[2:]] for r in rows[1:] if r[0] == "h2"]
        return cls(j, center, radii, np.array(h1), np.array(h2))


def _conj_symmetry_defect(h):
    """max |h(conj z) + conj h(z)| with the worst node."""
    v = h.values
    d = np.abs(v[::-1, :] + np.conj(v))
    d = np.where(np.isfinite(d), d, 0.0)
    k = int(np.argmax(d))
    return float(d.ravel()[k]), np.unravel_index(k, d.shape)


def decompose(h, j, k_max=32, radii=None, n_theta=256, check_tol=1e-8):
    """Fourier coefficients of h in the angle about vortex j.

    Quadrature is the trapezoidal rule on n_theta equispaced angles, with
    bilinear interpolation of the grid values.
    """
    if h.cfg is None:
        raise ModeError("field carries no vortex configuration")
    center = complex(h.cfg.centers[j])
    if abs(center.imag) > 1e-12:
        raise ModeError("decompose expects a vortex on the real axis")
    defect, node = _conj_symmetry_defect(h)
    scale = max(1.0, float(np.nanmax(np.abs(h.values))))
    if defect > check_tol * scale:
        raise ModeError("h violates h(conj z) = -conj h(z) by %.3e at node %s"
                        % (defect, tuple(int(i) for i in node)))
    g = h.grid
    if radii is None:
        radii = np.linspace(0.5, 4.0, 15)
    radii = np.asarray(radii, dtype=float)
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    Xs = center.real + radii[:, None] * np.cos(th)[None, :]
    Ys = radii[:, None] * np.sin(th)[None, :]
    pts = np.stack([Ys.ravel(), Xs.ravel()], axis=-1)
    vals = h.values
    ir = RegularGridInterpolator((g.x2, g.x1), vals.real, method="linear",
                                 bounds_error=True)
    ii = RegularGridInterpolator((g.x2, g.x1), vals.imag, method="linear",
                                 bounds_error=True)
    try:
        re = ir(pts).reshape(Xs.shape)
        im = ii(pts).reshape(Xs.shape)
    except ValueError as exc:
        raise ModeError("sampling circle leaves the grid") from exc
    if not (np.all(np.isfinite(re)) and np.all(np.isfinite(im))):
        bad = radii[~np.all(np.isfinite(re) & np.isfinite(im), axis=1)]
        raise ModeError("field is undefined on the sampling circles of radius %s"
                        % ", ".join("%.3g" % r for r in bad))
    k = np.arange(k_max + 1)
    S = np.sin(k[:, None] * th[None, :])
    C = np.cos(k[:, None] * th[None, :])
    h1 = (2.0 / n_theta) * re @ S.T
    h2 = (2.0 / n_theta) * im @ C.T
    h2[:, 0] *= 0.5
    return ModeExpansion(j, center, radii, h1.T.copy(), h2.T.copy(), n_theta)


# --------------------------------------------------------------------------
# reflection route

def reflection_index(grid, c):
    """Column index of 2c - x1 for every column, -1 when off the grid."""
    x = 2 * c - grid.x1
    idx = np.rint((x - grid.x1[0]) / grid.h).astype(int)
    ok = (idx >= 0) & (idx < grid.N1)
    idx = np.where(ok, idx, 0)
    err = np.abs(grid.x1[idx] - x)
    if np.any(ok & (err > 1e-8 * max(1.0, abs(c)))):
        raise ModeError("grid is not closed under reflection about x1 = %.6g" % c)
    return np.where(ok, idx, -1)


def _reflect(vals, idx):
    out = np.full(vals.shape, np.nan, dtype=complex)
    ok = idx >= 0
    out[:, ok] = vals[:, idx[ok]]
    return out


def odd_part_j(vals, grid, c):
    """(f(z) + conj f(R z)) / 2 about the vertical line x1 = c."""
    idx = reflection_index(grid, c)
    return 0.5 * (vals + np.conj(_reflect(vals, idx)))


def odd_part_regular_j(reg, V, grid, c):
    """Regular form V f^o from reg = V f, valid through the vortex core:
    V f^o = (reg + conj reg(R z) V / conj V(R z)) / 2."""
    idx = reflection_index(grid, c)
    regR = _reflect(reg, idx)
    VR = _reflect(V, idx)
    with np.errstate(divide="ignore", invalid="ignore"):
        beta = V / np.conj(VR)
    return 0.5 * (reg + beta * np.conj(regR))


def parity_split(h, p=None, radius="h", base=None):
    """(h^o, h^e) with h^o = sum_j eta_{j,R} h^{o,j} and h^e = h - h^o.

    radius="h" uses R = R_eps (right-hand sides); radius="psi" uses
    R = R_eps / 2 (perturbations).  A number sets R directly.  When the
    field has a regular part (or `base` is given) the regular parts of
    both outputs are carried through the same identity.
    """
    p = p or NormParams()
    cfg = h.cfg
    if cfg is None:
        raise ModeError("field carries no vortex configuration")
    g = h.grid
    R = p.R_eps(cfg.eps, cfg.d_tilde)
    if radius == "psi":
        R = R / 2
    elif radius != "h":
        R = float(radius)
    Z = g.Z
    vals = h.values
    reg = h.regular
    V = base.values if base is not None else None
    if reg is None and V is not None:
        reg = V * vals
    ho = np.zeros_like(vals, dtype=complex)
    ho_reg = None if reg is None else np.zeros_like(vals, dtype=complex)
    for c in cfg.centers:
        c = complex(c)
        if abs(c.imag) > 1e-12:
            raise ModeError("parity split expects vortices on the real axis")
        cut = eta1(np.abs(Z - c) / R)
        on = cut > 0
        part = odd_part_j(vals, g, c.real)
        ho = ho + np.where(on, cut * part, 0.0)
        if reg is not None:
            if V is None:
                raise ModeError("regular parity split needs `base`")
            preg = odd_part_regular_j(reg, V, g, c.real)
            ho_reg = ho_reg + np.where(on, cut * preg, 0.0)
    he = vals - ho
    he_reg = None if reg is None else reg - ho_reg
    fo = h.copy_with(ho, regular=ho_reg)
    fe = h.copy_with(he, regular=he_reg)
    fo.meta["parity"] = "odd"
    fe.meta["parity"] = "even"
    fo.meta["R"] = fe.meta["R"] = R
    return fo, fe


# --------------------------------------------------------------------------
# explicit leading odd error

def _r_odd(cfg, X, Y, j):
    """Leading odd error pieces r^{o,1}, r^{o,2} about the vortex at +-d."""
    L = abs(np.log(cfg.eps))
    dh = cfg.d_hat
    dt = cfg.d_tilde
    z = X + 1j * Y
    z1, z2 = z - dt, z + dt
    r1, r2 = np.abs(z1), np.abs(z2)
    with np.errstate(divide="ignore", invalid="ignore"):
        c1, s1 = z1.real / r1, z1.imag / r1
        c2, s2 = z2.real / r2, z2.imag / r2
        a = dh * cfg.eps / np.sqrt(L)
        b = dh ** 2 / L
        if j == 0:
            return (-1j * b * (2 * c1 * c2 / (r1 * r2) + c2 ** 2 / r2 ** 2)
                    + (-a * s1 / r1 - 2 * b * s2 * c2 / r2 ** 2))
        return (-1j * b * (2 * c1 * c2 / (r1 * r2) + c1 ** 2 / r1 ** 2)
                + (a * s2 / r2 - 2 * b * s1 * c1 / r1 ** 2))


def odd_error_alpha(cfg, grid, base, p=None):
    """R^o_alpha = sum_j eta_{j,R_eps} (1 - eta1(2 rho_j)) R^{j,o}_alpha.

    R^{j,o}_alpha is the reflection average about vortex j of r^{o,j}.
    The inner factor removes rho_j < 1/2, where r^{o,j} ~ 1/rho_j is not
    Hoelder after multiplication by V_d.  Returns a residual-kind field
    whose regular part is V_d R^o_alpha.
    """
    from .fields import ComplexField
    p = p or NormParams()
    R = p.R_eps(cfg.eps, cfg.d_tilde)
    X, Y = grid.X, grid.Y
    out = np.zeros(grid.shape, dtype=complex)
    for j, c in enumerate(cfg.centers):
        c = complex(c)
        rho = np.abs(grid.Z - c)
        cut = eta1(rho / R) * (1 - eta1(2 * rho))
        on = cut > 0
        rj = _r_odd(cfg, X, Y, j)
        avg = odd_part_j(np.where(np.isfinite(rj), rj, 0.0), grid, c.real)
        out = out + np.where(on, cut * avg, 0.0)
    f = ComplexField(grid, out, cfg, "residual", regular=base.values * out)
    f.meta["R_eps"] = R
    return f
