"""Grids, vortex configurations, complex fields and the product ansatz.

Conventions
-----------
Arrays are stored with shape (N2, N1): row index runs over x2, column
index over x1, both axes from -L to +L.  The standard vortex is
W(z) = w(|z|) z/|z|; a degree -1 factor is its complex conjugate.
"""

import json
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage
from scipy.interpolate import RegularGridInterpolator

from .profile import CORE_POLY_R, eval_profile


class GeometryError(ValueError):
    pass


class TrackingError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# grid and configuration

@dataclass(frozen=True)
class Grid2D:
    L1: float
    L2: float
    N1: int
    N2: int
    h: float
    sym_x1: bool = True
    sym_x2: bool = True

    def __post_init__(self):
        for L, N in ((self.L1, self.N1), (self.L2, self.N2)):
            if N % 2 == 0:
                raise GeometryError("node counts must be odd so the axes are nodes")
            if abs(2 * L / (N - 1) - self.h) > 1e-12 * max(1.0, self.h):
                raise GeometryError("h must equal 2L/(N-1) on both axes")

    @classmethod
    def square(cls, L, h, **kw):
        n = int(round(2 * L / h))
        if n % 2:
            raise GeometryError("2L/h must be an even integer")
        return cls(L, L, n + 1, n + 1, 2 * L / n, **kw)

    @cached_property
    def x1(self):
        return self.h * (np.arange(self.N1) - (self.N1 - 1) // 2)

    @cached_property
    def x2(self):
        return self.h * (np.arange(self.N2) - (self.N2 - 1) // 2)

    @cached_property
    def X(self):
        return np.broadcast_to(self.x1[None, :], self.shape)

    @cached_property
    def Y(self):
        return np.broadcast_to(self.x2[:, None], self.shape)

    @cached_property
    def Z(self):
        return self.X + 1j * self.Y

    @property
    def shape(self):
        return (self.N2, self.N1)

    @property
    def center(self):
        return (self.N2 - 1) // 2, (self.N1 - 1) // 2

    def interior_mask(self, layers=1):
        m = np.zeros(self.shape, dtype=bool)
        m[layers:-layers, layers:-layers] = True
        return m

    def to_dict(self):
        return {"L1": self.L1, "L2": self.L2, "N1": self.N1, "N2": self.N2,
                "h": self.h, "sym_x1": self.sym_x1, "sym_x2": self.sym_x2}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True)
class VortexConfiguration:
    """Small parameter, scaled half distance and the vortex list.

    `vortices` holds (center, degree) pairs in the rescaled plane.
    """
    eps: float
    d_hat: float
    vortices: tuple
    family: str = "custom"

    @property
    def d_tilde(self):
        return d_tilde_of(self.eps, self.d_hat)

    @property
    def total_degree(self):
        return int(sum(d for _, d in self.vortices))

    @property
    def centers(self):
        return np.array([c for c, _ in self.vortices], dtype=complex)

    @property
    def degrees(self):
        return np.array([d for _, d in self.vortices], dtype=int)

    @property
    def extent(self):
        return float(np.max(np.abs(self.centers))) if self.vortices else 0.0

    def to_dict(self):
        return {"eps": self.eps, "d_hat": self.d_hat, "family": self.family,
                "vortices": [[complex(c).real, complex(c).imag, int(d)]
                             for c, d in self.vortices]}

    @classmethod
    def from_dict(cls, d):
        vs = tuple((complex(a, b), int(k)) for a, b, k in d["vortices"])
        return cls(d["eps"], d["d_hat"], vs, d.get("family", "custom"))


def d_tilde_of(eps, d_hat):
    if not 0 < eps < 1:
        return float("nan")
    return d_hat / (eps * math.sqrt(abs(math.log(eps))))


def two_vortex(eps, d_hat=1.0):
    """Two unit-degree vortices at +-d_tilde on the real axis."""
    dt = d_tilde_of(eps, d_hat)
    return VortexConfiguration(eps, d_hat, ((dt + 0j, 1), (-dt + 0j, 1)), "two")


def polygon(eps, n, d_hat=None):
    """n unit-degree vortices on a regular polygon, radius sqrt(n-1) scaled."""
    if n < 2:
        raise ValueError("polygon needs n >= 2")
    if d_hat is None:
        d_hat = math.sqrt(n - 1)
    dt = d_tilde_of(eps, d_hat)
    vs = tuple((dt * np.exp(2j * np.pi * k / n), 1) for k in range(n))
    return VortexConfiguration(eps, d_hat, vs, "polygon")


def centered(eps, n, d_hat=None):
    """A degree -1 vortex at the origin plus n-1 unit vortices on a ring."""
    if n < 5:
        raise ValueError("centered family needs n >= 5")
    if d_hat is None:
        d_hat = math.sqrt(n - 4)
    dt = d_tilde_of(eps, d_hat)
    vs = ((0j, -1),) + tuple((dt * np.exp(2j * np.pi * k / (n - 1)), 1)
                             for k in range(n - 1))
    return VortexConfiguration(eps, d_hat, vs, "center")


def single_vortex(center=0j, degree=1, eps=0.0):
    return VortexConfiguration(eps, float("nan"), ((complex(center), degree),),
                               "single")


def make_grid(cfg, h_max=0.25, m=None, box_factor=4.0):
    """Square symmetric grid of half-width box_factor * R_c.

    R_c is the largest vortex distance from the origin.  The spacing is
    h = 2 R_c / m with m odd, so the grid is closed under the reflections
    x1 -> 2 c - x1 about every center c on the x1 axis, while the centers
    themselves sit half a cell away from the nodes.
    """
    Rc = cfg.extent
    if Rc <= 0:
        raise GeometryError("configuration has no off-origin vortex; build a grid directly")
    if m is None:
        m = int(math.ceil(2 * Rc / h_max))
    if m % 2 == 0:
        m += 1
    h = 2 * Rc / m
    k = int(round(box_factor / 2))
    if abs(box_factor / 2 - k) > 1e-12:
        raise GeometryError("box_factor must be an even integer")
    n = k * m  # nodes from center to edge
    L = n * h
    return Grid2D(L, L, 2 * n + 1, 2 * n + 1, h)


# --------------------------------------------------------------------------
# fields

@dataclass(eq=False)
class ComplexField:
    """Complex grid function with provenance.

    `regular`, when present, holds V_d * values; it is finite at the
    vortex centers even where `values` blows up, and the core pieces of
    the weighted norms use it.
    """
    grid: Grid2D
    values: np.ndarray
    cfg: VortexConfiguration = None
    kind: str = "field"
    regular: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def copy_with(self, values, kind=None, regular=None):
        return ComplexField(self.grid, values, self.cfg, kind or self.kind,
                            regular, dict(self.meta))

    def symmetry_defect(self, psi_class=None):
        """Max deviation from the reflection symmetry of its class.

        Ansatz class: f(-x1,x2) = conj f and f(x1,-x2) = conj f.
        psi class: f(-x1,x2) = -conj f and f(x1,-x2) = -conj f.
        """
        if psi_class is None:
            psi_class = self.kind in ("perturbation", "residual")
        s = -1.0 if psi_class else 1.0
        v = self.values
        a = np.nanmax(np.abs(v[:, ::-1] - s * np.conj(v)))
        b = np.nanmax(np.abs(v[::-1, :] - s * np.conj(v)))
        return float(max(a, b))


def vortex_factor(p, X, Y, center=0j, degree=1, order=2):
    """Values and Cartesian derivatives of W(z - center) (or its conjugate).

    Returns a dict with keys W, Wx, Wy and, for order 2, Wxx, Wyy, Wxy.
    """
    x = X - center.real
    y = Y - center.imag
    rho = np.hypot(x, y)
    zeta = x + 1j * y
    w, w1, w2 = eval_profile(p, rho.ravel())
    w = w.reshape(rho.shape)
    w1 = w1.reshape(rho.shape)
    w2 = w2.reshape(rho.shape)
    small = rho < CORE_POLY_R
    with np.errstate(divide="ignore", invalid="ignore"):
        f = w / rho
        T = w1 - f
        g = T / rho ** 2
        Tp = w2 - w1 / rho + f / rho
        gr = (Tp / rho ** 2 - 2 * T / rho ** 3) / rho
    if np.any(small):
        fs, gs, grs = p.core_terms(rho[small])
        f[small] = fs
        g[small] = gs
        gr[small] = grs
    out = {"W": f * zeta,
           "Wx": g * x * zeta + f,
           "Wy": g * y * zeta + 1j * f}
    if order >= 2:
        out["Wxx"] = gr * x * x * zeta + g * zeta + 2 * g * x
        out["Wyy"] = gr * y * y * zeta + g * zeta + 2j * g * y
        out["Wxy"] = gr * x * y * zeta + 1j * g * x + g * y
    if degree == -1:
        out = {k: np.conj(v) for k, v in out.items()}
    elif degree != 1:
        raise ValueError("degrees must be +1 or -1")
    return out


def product_derivatives(factors):
    """Combine per-factor derivative dicts by the product rule."""
    P = None
    for F in factors:
        if P is None:
            P = dict(F)
            continue
        Q = {"W": P["W"] * F["W"],
             "Wx": P["Wx"] * F["W"] + P["W"] * F["Wx"],
             "Wy": P["Wy"] * F["W"] + P["W"] * F["Wy"]}
        if "Wxx" in F:
            Q["Wxx"] = P["Wxx"] * F["W"] + 2 * P["Wx"] * F["Wx"] + P["W"] * F["Wxx"]
            Q["Wyy"] = P["Wyy"] * F["W"] + 2 * P["Wy"] * F["Wy"] + P["W"] * F["Wyy"]
            Q["Wxy"] = (P["Wxy"] * F["W"] + P["Wx"] * F["Wy"]
                        + P["Wy"] * F["Wx"] + P["W"] * F["Wxy"])
        P = Q
    return P


def ansatz_factors(cfg, p, X, Y, order=2):
    return [vortex_factor(p, X, Y, c, d, order) for c, d in cfg.vortices]


def _check_inside(cfg, grid, margin=3.0):
    for c, _ in cfg.vortices:
        if (abs(c.real) > grid.L1 - margin) or (abs(c.imag) > grid.L2 - margin):
            raise GeometryError("vortex center %s closer than %g to the grid edge"
                                % (c, margin))


def build_ansatz(cfg, p, grid):
    """Product ansatz V = prod_j W(z - c_j)^{(deg_j)} on the grid."""
    _check_inside(cfg, grid)
    V = np.ones(grid.shape, dtype=complex)
    for c, d in cfg.vortices:
        V = V * _factor_value(p, grid.X, grid.Y, c, d)
    return ComplexField(grid, V, cfg, "ansatz")


def _factor_value(p, X, Y, c, d):
    x = X - c.real
    y = Y - c.imag
    rho = np.hypot(x, y)
    w = eval_profile(p, rho.ravel())[0].reshape(rho.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        W = np.where(rho > 0, w / rho, 0.0) * (x + 1j * y)
    return W if d == 1 else np.conj(W)


def polar_about(grid, center):
    z = grid.Z - center
    return np.abs(z), np.angle(z)


# --------------------------------------------------------------------------
# vortex tracking

def _cell_winding(F):
    """Winding of arg F around each lattice cell plus an ambiguity flag."""
    def dphi(a, b):
        return np.angle(b * np.conj(a))
    bl, br = F[:-1, :-1], F[:-1, 1:]
    tr, tl = F[1:, 1:], F[1:, :-1]
    d = [dphi(bl, br), dphi(br, tr), dphi(tr, tl), dphi(tl, bl)]
    total = sum(d)
    ambiguous = np.zeros(total.shape, dtype=bool)
    for di in d:
        ambiguous |= np.abs(di) > np.pi - 1e-9
    for c in (bl, br, tr, tl):
        ambiguous |= c == 0
    wind = np.rint(total / (2 * np.pi)).astype(int)
    return wind, ambiguous


def _bilinear_zero(f00, f10, f01, f11):
    """Zero (s, t) in the unit square of the bilinear interpolant, by Newton."""
    s, t = 0.5, 0.5
    for _ in range(50):
        f = (f00 * (1 - s) * (1 - t) + f10 * s * (1 - t)
             + f01 * (1 - s) * t + f11 * s * t)
        fs = (f10 - f00) * (1 - t) + (f11 - f01) * t
        ft = (f01 - f00) * (1 - s) + (f11 - f10) * s
        J = np.array([[fs.real, ft.real], [fs.imag, ft.imag]])
        try:
            ds = np.linalg.solve(J, [-f.real, -f.imag])
        except np.linalg.LinAlgError:
            break
        s, t = s + ds[0], t + ds[1]
        if abs(ds[0]) + abs(ds[1]) < 1e-14:
            break
    return min(max(s, 0.0), 1.0), min(max(t, 0.0), 1.0)


def _track_lattice(F, x1, x2):
    wind, amb = _cell_winding(F)
    if np.any(amb):
        return None
    nz = wind != 0
    lab, nlab = ndimage.label(nz, structure=np.ones((3, 3)))
    out = []
    for k in range(1, nlab + 1):
        cells = np.argwhere(lab == k)
        pts = []
        wsum = 0
        for i, j in cells:
            s, t = _bilinear_zero(F[i, j], F[i, j + 1], F[i + 1, j], F[i + 1, j + 1])
            pts.append(complex(x1[j] + s * (x1[j + 1] - x1[j]),
                               x2[i] + t * (x2[i + 1] - x2[i])))
            wsum += int(wind[i, j])
        out.append((complex(np.mean(pts)), wsum))
    return out


def track_vortices(f):
    """Locate zeros of a complex field by per-cell winding numbers.

    Returns a list of (position, winding).  When a node value vanishes or
    an edge phase jump is ambiguous (a zero on a cell edge, which happens
    for the symmetric fields whose zeros sit on the x1 axis), the field is
    resampled bilinearly on a lattice shifted by (h/2, h/3) and the count
    is repeated once.
    """
    g = f.grid
    F = f.values
    edge = np.concatenate([F[0], F[-1], F[:, 0], F[:, -1]])
    if np.any(np.abs(edge) == 0):
        raise TrackingError("field vanishes on the grid boundary")
    res = _track_lattice(F, g.x1, g.x2)
    if res is None:
        interp_re = RegularGridInterpolator((g.x2, g.x1), F.real)
        interp_im = RegularGridInterpolator((g.x2, g.x1), F.imag)
        s1 = g.x1[:-1] + g.h / 2
        s2 = g.x2[:-1] + g.h / 3
        P = np.stack(np.meshgrid(s2, s1, indexing="ij"), axis=-1)
        G = interp_re(P) + 1j * interp_im(P)
        res = _track_lattice(G, s1, s2)
        if res is None:
            raise TrackingError("zero on a sampling point after resampling")
    return res


# --------------------------------------------------------------------------
# helical lift

def helical_lift(U, cfg, r, theta, t, method="cubic"):
    """u(r, theta, t) = e^{iDt} U((r/eps) e^{i(theta - t)}).

    U lives in rescaled coordinates; r is the physical radius.
    """
    g = U.grid
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    t = np.asarray(t, dtype=float)
    rs = r / cfg.eps
    phi = theta - t
    x = rs * np.cos(phi)
    y = rs * np.sin(phi)
    if np.any(np.abs(x) > g.L1) or np.any(np.abs(y) > g.L2):
        raise GeometryError("lift radius outside the 2D grid")
    interp = _lift_interp(U, method)
    pts = np.stack([np.broadcast_to(y, np.broadcast(x, y).shape),
                    np.broadcast_to(x, np.broadcast(x, y).shape)], axis=-1)
    val = interp[0](pts) + 1j * interp[1](pts)
    return np.exp(1j * cfg.total_degree * t) * val


def _lift_interp(U, method):
    g = U.grid
    return (RegularGridInterpolator((g.x2, g.x1), U.values.real, method=method),
            RegularGridInterpolator((g.x2, g.x1), U.values.imag, method=method))


# --------------------------------------------------------------------------
# GLFIELD1 file format

_MAGIC = b"GLFIELD1\n"


def _jsonable(meta):
    out = {}
    for k, v in meta.items():
        if k.startswith("_"):
            continue
        if isinstance(v, (np.floating,)):
            v = float(v)
        elif isinstance(v, (np.integer,)):
            v = int(v)
        out[k] = v
    return out


def write_field(f, path):
    head = {"grid": f.grid.to_dict(),
            "cfg": f.cfg.to_dict() if f.cfg is not None else None,
            "kind": f.kind,
            "has_regular": f.regular is not None,
            "meta": _jsonable(f.meta)}
    blob = json.dumps(head, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for arr in (f.values, f.regular):
            if arr is None:
                continue
            a = np.empty(arr.shape + (2,), dtype="<f8")
            a[..., 0] = arr.real
            a[..., 1] = arr.imag
            fh.write(a.tobytes())


def read_field(path):
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError("not a GLFIELD1 file")
        (n,) = struct.unpack("<Q", fh.read(8))
        head = json.loads(fh.read(n).decode())
        grid = Grid2D.from_dict(head["grid"])
        cnt = grid.N1 * grid.N2 * 2

        def block():
            a = np.frombuffer(fh.read(8 * cnt), dtype="<f8").reshape(grid.shape + (2,))
            out = np.empty(grid.shape, dtype=complex)
            out.real = a[..., 0]
            out.imag = a[..., 1]
            return out
        values = block()
        regular = block() if head.get("has_regular") else None
    cfg = VortexConfiguration.from_dict(head["cfg"]) if head["cfg"] else None
    return ComplexField(grid, values, cfg, head["kind"], regular, head["meta"])
