"""Projection onto the translation kernel and the reduced equation in d_hat.

Near the vortex at +d_tilde the projected equation reads

    i W [L^eps psi + R + N(psi)](z + d_tilde) = -c chi W_x1(z),

so that, pairing with W_x1 over a disc,

    c c_* = -Re int i W [L^eps psi + R + N(psi)](z + d_tilde) conj W_x1 .

With psi = 0 this is -(B0 + B1), the contributions of the two parts
S0 and S1 of the ansatz error.  The leading-order model is

    c c_* ~ eps sqrt|log eps| (a0 / d_hat - a1 d_hat),

so c > 0 for small d_hat, c < 0 for large d_hat, and the root is near
sqrt(a0 / a1).
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, trapezoid

from .fields import two_vortex, vortex_factor
from .norms import NormParams
from .operators import eta1, semi_analytic_error
from .profile import eval_profile


class ReductionError(RuntimeError):
    pass


def R_tilde(eps):
    """Radius of the a1 integral, (1/2) eps^-1 |log eps|^-1/2."""
    return 0.5 / (eps * math.sqrt(abs(math.log(eps))))


def _polar_nodes(R, n_rho=240, n_theta=256):
    """Gauss-Legendre in rho on [0, R] times trapezoid in theta."""
    x, w = np.polynomial.legendre.leggauss(n_rho)
    rho = 0.5 * R * (x + 1)
    wr = 0.5 * R * w
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    wt = 2 * np.pi / n_theta
    P, T = np.meshgrid(rho, th, indexing="ij")
    W = (wr * rho)[:, None] * wt * np.ones_like(T)
    return P, T, W


# --------------------------------------------------------------------------
# c_* and the orthogonality functional

def projection_cstar(p, method="polar", R=4.0, h=0.005):
    """c_* = Re int_{B(0,R)} chi |W_x1|^2 with chi = eta1(|z|/2).

    method="polar" integrates the angular part exactly,
    |W_x1|^2 averages to (w'^2 + w^2/rho^2)/2, and uses adaptive quad in
    rho; method="cartesian" is a tensor trapezoid on a square grid.
    """
    R = min(R, 4.0)  # chi vanishes beyond |z| = 4
    if method == "polar":
        def f(r):
            w, w1, _ = eval_profile(p, r)
            fw = w / r if r > 0 else p.alpha_slope
            return eta1(r / 2) * np.pi * (w1 ** 2 + fw ** 2) * r
        val, _ = quad(f, 0.0, R, limit=200, epsabs=1e-12, epsrel=1e-11,
                      points=[2.0])
        return float(val)
    if method != "cartesian":
        raise ValueError(method)
    n = int(round(R / h))
    x = h * np.arange(-n, n + 1)
    X, Y = np.meshgrid(x, x)
    F = vortex_factor(p, X, Y, 0j, 1, order=1)
    chi = eta1(np.hypot(X, Y) / 2)
    return float(np.sum(chi * np.abs(F["Wx"]) ** 2) * h * h)


def _other_factors(cfg, p, X, Y, j, order=0):
    prod = np.ones(X.shape, dtype=complex)
    for k, (c, d) in enumerate(cfg.vortices):
        if k != j:
            prod = prod * vortex_factor(p, X, Y, c, d, order=order)["W"]
    return prod


def orthogonality_defect(psi, cfg, p, j=0):
    """Re sum chi_j conj(phi_j) W_x1(z - d_j) h^2, phi_j = i W(z - d_j) psi.

    Uses the regular part V psi when available, so the sum is finite
    through the vortex core.
    """
    g = psi.grid
    c, d = cfg.vortices[j]
    F = vortex_factor(p, g.X, g.Y, c, d, order=1)
    reg = psi.regular
    if reg is None:
        reg = F["W"] * _other_factors(cfg, p, g.X, g.Y, j) * psi.values
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = 1j * reg / _other_factors(cfg, p, g.X, g.Y, j)
    chi = eta1(np.abs(g.Z - c) / 2)
    val = np.where(chi > 0, chi * np.real(np.conj(phi) * F["Wx"]), 0.0)
    return float(np.sum(val) * g.h ** 2)


# --------------------------------------------------------------------------
# a0, a1

def compute_a1(p, eps, method="trapezoid", n_rho=None, n_theta=64):
    """a1 = |log eps|^-1 int_0^{2pi} int_0^{R~} w^2 sin^2(theta) / rho."""
    L = abs(math.log(eps))
    Rt = R_tilde(eps)
    if method == "quad":
        def f(r):
            w = eval_profile(p, r)[0]
            return w * w / r if r > 0 else 0.0
        pts = [x for x in (1.0, 5.0, p.r_max) if x < Rt]
        val, _ = quad(f, 0.0, Rt, limit=500, epsabs=1e-13, epsrel=1e-13, points=pts)
        return float(np.pi * val / L)
    if method != "trapezoid":
        raise ValueError(method)
    n_rho = n_rho or max(20001, int(Rt / 5e-4) + 1)
    r = np.linspace(0.0, Rt, n_rho)
    w = eval_profile(p, r)[0]
    f = np.zeros_like(r)
    f[1:] = w[1:] ** 2 / r[1:]
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    F = f[:, None] * np.sin(th)[None, :] ** 2
    # trapezoid in rho, periodic trapezoid in theta
    inner = trapezoid(F, r, axis=0)
    return float(np.sum(inner) * (2 * np.pi / n_theta) / L)


def cross_integral(p, eps, d_hat, np_=None):
    """I = Re int_{rho_1 < R_eps} W^a_x2 W^b_x2 / W^b conj W^a_x1."""
    np_ = np_ or NormParams()
    cfg = two_vortex(eps, d_hat)
    R = np_.R_eps(eps, cfg.d_tilde)
    P, T, Wq = _polar_nodes(R)
    dt = cfg.d_tilde
    X = dt + P * np.cos(T)
    Y = P * np.sin(T)
    Fa = vortex_factor(p, X, Y, dt, 1, order=1)
    Fb = vortex_factor(p, X, Y, -dt, 1, order=1)
    val = np.real(Fa["Wy"] * Fb["Wy"] / Fb["W"] * np.conj(Fa["Wx"]))
    return float(np.sum(val * Wq))


def compute_a0(p, eps, d_hat, np_=None):
    """a0 := -2 I d_hat / (eps sqrt|log eps|).

    The factor 2 is the one carried by the gradient cross term of S0, so
    that c c_* ~ eps sqrt|log eps| (a0/d_hat - a1 d_hat).
    """
    L = abs(math.log(eps))
    return -2.0 * cross_integral(p, eps, d_hat, np_) * d_hat / (eps * math.sqrt(L))


def compute_a0_a1(p, eps, d_hat, np_=None):
    a0 = compute_a0(p, eps, d_hat, np_)
    a1 = compute_a1(p, eps)
    if not (a0 > 0 and a1 > 0):
        raise ReductionError("non-positive a0=%.3e or a1=%.3e" % (a0, a1))
    return a0, a1


# --------------------------------------------------------------------------
# the projection coefficient

@dataclass
class Coefficient:
    d_hat: float
    c: float
    B0: float
    B1: float
    B0_grad: float
    B0_mod: float
    BL: float = 0.0
    BN: float = 0.0
    c_star: float = float("nan")

    def to_dict(self):
        return dict(self.__dict__)


def _B_terms(cfg, p, R, n_rho=240, n_theta=256):
    dt = cfg.d_tilde
    P, T, Wq = _polar_nodes(R, n_rho, n_theta)
    X = dt + P * np.cos(T)
    Y = P * np.sin(T)
    E0, E1, dv = semi_analytic_error(cfg, p, X, Y)
    Fa = vortex_factor(p, X, Y, dt, 1, order=1)
    Fb = vortex_factor(p, X, Y, -dt, 1, order=1)
    cw = np.conj(Fa["Wx"])
    Wb = Fb["W"]
    B0 = np.sum(np.real(E0 / Wb * cw) * Wq)
    B1 = np.sum(np.real(E1 / Wb * cw) * Wq)
    grad = 2 * (Fa["Wx"] * Fb["Wx"] + Fa["Wy"] * Fb["Wy"]) / Wb
    B0g = np.sum(np.real(grad * cw) * Wq)
    mod = (1 - np.abs(Fa["W"] * Wb) ** 2 + np.abs(Fa["W"]) ** 2 - 1
           + np.abs(Wb) ** 2 - 1) * Fa["W"]
    B0m = np.sum(np.real(mod * cw) * Wq)
    return float(B0), float(B1), float(B0g), float(B0m)


def reduced_coefficient(cfg, p, c_star=None, np_=None, psi_terms=None):
    """c = -(B0 + B1 + BL + BN) / c_*.

    Without `psi_terms` this is the leading-order coefficient from the
    ansatz error alone.  `psi_terms` = (BL, BN) adds the contributions of
    L^eps psi and N(psi) (see `grid_coefficient`).
    """
    np_ = np_ or NormParams()
    if c_star is None:
        c_star = projection_cstar(p)
    R = np_.R_eps(cfg.eps, cfg.d_tilde)
    B0, B1, B0g, B0m = _B_terms(cfg, p, R)
    BL, BN = psi_terms if psi_terms is not None else (0.0, 0.0)
    c = -(B0 + B1 + BL + BN) / c_star
    return Coefficient(cfg.d_hat, c, B0, B1, B0g, B0m, BL, BN, c_star)


def grid_pairing(values_over_Wb, grid, cfg, p, R):
    """Re sum_{rho_1 < R} F conj W^a_x1 h^2 on the grid (F already divided by W^b)."""
    dt = cfg.d_tilde
    rho = np.abs(grid.Z - dt)
    m = rho < R
    Fa = vortex_factor(p, grid.X[m], grid.Y[m], dt, 1, order=1)
    return float(np.sum(np.real(values_over_Wb[m] * np.conj(Fa["Wx"]))) * grid.h ** 2)


def grid_coefficient(cfg, p, grid, E, c_star=None, np_=None):
    """Leading-order c from a grid error array E (semi-analytic or FD)."""
    np_ = np_ or NormParams()
    if c_star is None:
        c_star = projection_cstar(p)
    R = np_.R_eps(cfg.eps, cfg.d_tilde)
    Wb = vortex_factor(p, grid.X, grid.Y, -cfg.d_tilde, 1, order=0)["W"]
    return -grid_pairing(E / Wb, grid, cfg, p, R) / c_star


# --------------------------------------------------------------------------
# the reduced equation

@dataclass
class ReductionReport:
    eps: float
    samples: list
    c_star: float
    a0: float
    a1: float
    d0: float
    reference: float
    converged: bool
    bracket: tuple
    R_eps: float
    R_tilde: float
    B_at_root: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def rel_gap(self):
        return abs(self.d0 - self.reference) / self.reference

    def to_dict(self):
        d = dict(self.__dict__)
        d["rel_gap"] = self.rel_gap
        d["samples"] = [[float(a), float(b)] for a, b in self.samples]
        d["bracket"] = [float(x) for x in self.bracket]
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def solve_reduced(eps, p, bracket=(0.2, 5.0), tol=1e-10, c_fun=None, np_=None,
                  max_widen=8):
    """Bisection for c(d_hat) = 0.

    `c_fun(d_hat) -> float` defaults to the leading-order coefficient; the
    full solver passes its own.  If the bracket shows no sign change it is
    widened geometrically, up to [0.1, 10].
    """
    np_ = np_ or NormParams()
    c_star = projection_cstar(p)
    if c_fun is None:
        def c_fun(dh):
            return reduced_coefficient(two_vortex(eps, dh), p, c_star, np_).c
    lo, hi = bracket
    samples = []
    clo, chi_ = c_fun(lo), c_fun(hi)
    samples += [(lo, clo), (hi, chi_)]
    k = 0
    while clo * chi_ > 0 and k < max_widen:
        lo, hi = max(0.1, lo / 1.5), min(10.0, hi * 1.5)
        clo, chi_ = c_fun(lo), c_fun(hi)
        samples += [(lo, clo), (hi, chi_)]
        k += 1
        if lo <= 0.1 and hi >= 10.0:
            break
    notes = []
    if clo * chi_ > 0:
        return ReductionReport(eps, samples, c_star, float("nan"), float("nan"),
                               float("nan"), float("nan"), False, (lo, hi),
                               np_.R_eps(eps, d_tilde_safe(eps, lo)), R_tilde(eps),
                               notes=["no sign change in [%.3g, %.3g]" % (lo, hi)])
    a, b = lo, hi
    ca = clo
    width0 = b - a
    while (b - a) > tol * width0:
        m = 0.5 * (a + b)
        cm = c_fun(m)
        samples.append((m, cm))
        if cm == 0:
            a = b = m
            break
        if (cm > 0) == (ca > 0):
            a, ca = m, cm
        else:
            b = m
    d0 = 0.5 * (a + b)
    a0, a1 = compute_a0_a1(p, eps, d0, np_)
    cfg = two_vortex(eps, d0)
    co = reduced_coefficient(cfg, p, c_star, np_)
    return ReductionReport(eps, samples, c_star, a0, a1, d0, math.sqrt(a0 / a1),
                           True, (a, b), np_.R_eps(eps, cfg.d_tilde), R_tilde(eps),
                           B_at_root=co.to_dict(), notes=notes)


def d_tilde_safe(eps, d_hat):
    return d_hat / (eps * math.sqrt(abs(math.log(eps))))
