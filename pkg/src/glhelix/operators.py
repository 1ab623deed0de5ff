"""Discrete operators of the reduced 2D Ginzburg-Landau problem.

    S(v) = Lap v + eps^2 (d_ss v - 2 i D d_s v - D^2 v) + (1 - |v|^2) v

with d_s = x1 d_2 - x2 d_1 and
d_ss u = x2^2 u_11 + x1^2 u_22 - 2 x1 x2 u_12 - x1 u_1 - x2 u_2.

All stencils are centered second order; outputs are NaN on the
boundary ring of the grid.  The linearized operator is handled in the
regular variable Phi = i V psi, where it reads

    A Phi = L_d Phi + (eta_tilde - 1) (E / V) Phi,
    L_d Phi = Lap Phi + eps^2 (d_ss - 2 i D d_s - D^2) Phi
              + (1 - |V|^2) Phi - 2 Re(conj(V) Phi) V,

so that i V L^eps(psi) = A(i V psi) and no division by V is needed
inside the cores (eta_tilde = 1 there).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .fields import (ComplexField, ansatz_factors, build_ansatz,
                     product_derivatives, vortex_factor)


class StencilError(ValueError):
    pass


# --------------------------------------------------------------------------
# cutoffs

def eta1(t):
    """C^2 quintic cutoff: 1 on (-inf, 1], 0 on [2, inf)."""
    u = np.clip(np.asarray(t, dtype=float) - 1.0, 0.0, 1.0)
    return 1.0 - u ** 3 * (10 - 15 * u + 6 * u ** 2)


@dataclass
class OperatorParams:
    eps: float
    D: int = 2
    centers: tuple = ()
    core_cutoff: float = 0.5
    order: int = 2
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_config(cls, cfg, **kw):
        return cls(eps=cfg.eps, D=cfg.total_degree,
                   centers=tuple(complex(c) for c in cfg.centers), **kw)

    def rho(self, grid, j):
        return np.abs(grid.Z - self.centers[j])

    def rho_min(self, grid):
        return np.min([self.rho(grid, j) for j in range(len(self.centers))], axis=0)

    def eta(self, grid):
        return sum(eta1(self.rho(grid, j)) for j in range(len(self.centers)))

    def eta_tilde(self, grid):
        return sum(eta1(self.rho(grid, j) - 1) for j in range(len(self.centers)))

    def chi_j(self, grid, j):
        return eta1(self.rho(grid, j) / 2)

    def eta_jR(self, grid, j, R):
        return eta1(self.rho(grid, j) / R)

    def to_dict(self):
        return {"eps": self.eps, "D": self.D, "core_cutoff": self.core_cutoff,
                "centers": [[c.real, c.imag] for c in self.centers]}


# --------------------------------------------------------------------------
# stencils

def fd_derivatives(u, h, need=("1", "2", "11", "22", "12")):
    """Centered differences on the interior; NaN on the boundary ring."""
    out = {}
    c = u[1:-1, 1:-1]
    E, W = u[1:-1, 2:], u[1:-1, :-2]
    N, S = u[2:, 1:-1], u[:-2, 1:-1]
    vals = {}
    if "1" in need:
        vals["1"] = (E - W) / (2 * h)
    if "2" in need:
        vals["2"] = (N - S) / (2 * h)
    if "11" in need:
        vals["11"] = (E - 2 * c + W) / h ** 2
    if "22" in need:
        vals["22"] = (N - 2 * c + S) / h ** 2
    if "12" in need:
        vals["12"] = (u[2:, 2:] - u[2:, :-2] - u[:-2, 2:] + u[:-2, :-2]) / (4 * h ** 2)
    for k, v in vals.items():
        full = np.full(u.shape, np.nan, dtype=v.dtype)
        full[1:-1, 1:-1] = v
        out[k] = full
    return out


def ds_from(d, X, Y, u=None):
    """d_s and d_ss from a derivative dict (keys 1,2,11,22,12)."""
    ds = X * d["2"] - Y * d["1"]
    dss = (Y ** 2 * d["11"] + X ** 2 * d["22"] - 2 * X * Y * d["12"]
           - X * d["1"] - Y * d["2"])
    return ds, dss


def _check_h(grid):
    if grid.h > 0.5:
        raise StencilError("grid too coarse for the vortex core (h=%.3g > 0.5)" % grid.h)


def _S_from_parts(v, lap, ds, dss, eps, D, variant):
    eps_block = dss - 2j * D * ds
    if variant in ("S", "S1", "S2"):
        eps_block = eps_block - D ** 2 * v
    pot = (1 - np.abs(v) ** 2) * v
    if variant == "S":
        return lap + eps ** 2 * eps_block + pot
    if variant == "S0":
        return lap + pot
    if variant == "S1":
        return eps ** 2 * eps_block
    if variant in ("S2", "S3"):
        return lap + eps ** 2 * eps_block
    raise ValueError("unknown variant %r" % variant)


def S_values(v, grid, eps, D, variant="S"):
    """Finite-difference S applied to an array."""
    _check_h(grid)
    d = fd_derivatives(v, grid.h)
    ds, dss = ds_from(d, grid.X, grid.Y)
    return _S_from_parts(v, d["11"] + d["22"], ds, dss, eps, D, variant)


def apply_S(v, op, variant="S"):
    """S(v) on the grid (variants S, S0, S1, S2, S3 select the pieces).

    S0 = Lap + potential, S1 = eps^2 block, S2 = S without the potential,
    S3 = S2 without the -D^2 term.
    """
    out = S_values(v.values, v.grid, op.eps, op.D, variant)
    return v.copy_with(out, kind="S")


def S_from_derivatives(dv, X, Y, eps, D, variant="S"):
    lap = dv["Wxx"] + dv["Wyy"]
    ds = X * dv["Wy"] - Y * dv["Wx"]
    dss = (Y ** 2 * dv["Wxx"] + X ** 2 * dv["Wyy"] - 2 * X * Y * dv["Wxy"]
           - X * dv["Wx"] - Y * dv["Wy"])
    return _S_from_parts(dv["W"], lap, ds, dss, eps, D, variant)


# --------------------------------------------------------------------------
# error of the ansatz

@dataclass(eq=False)
class ErrorPair:
    E: ComplexField
    R: ComplexField
    E0: np.ndarray = None
    E1: np.ndarray = None
    E_fd: np.ndarray = None
    V: ComplexField = None
    derivs: dict = None
    cache: dict = field(default_factory=dict)


def semi_analytic_error(cfg, p, X, Y, factors=None):
    """S0(V), S1(V) of the product ansatz from the profile derivatives.

    Uses Lap F_k = -(1 - |F_k|^2) F_k for every factor, so
    S0(prod F) = sum_{k<l} 2 grad F_k . grad F_l prod_{m != k,l} F_m
                 + (1 - |V|^2 - sum_k (1 - |F_k|^2)) V.
    """
    if factors is None:
        factors = ansatz_factors(cfg, p, X, Y)
    dv = product_derivatives(factors)
    V = dv["W"]
    n = len(factors)
    E0 = (1 - np.abs(V) ** 2 - sum(1 - np.abs(F["W"]) ** 2 for F in factors)) * V
    for k in range(n):
        for l in range(k + 1, n):
            rest = np.ones_like(V)
            for m in range(n):
                if m not in (k, l):
                    rest = rest * factors[m]["W"]
            E0 = E0 + 2 * (factors[k]["Wx"] * factors[l]["Wx"]
                           + factors[k]["Wy"] * factors[l]["Wy"]) * rest
    E1 = S_from_derivatives(dv, X, Y, cfg.eps, cfg.total_degree, "S1")
    return E0, E1, dv


def compute_error(cfg, p, grid, op=None, check=True, tol=None):
    """Error E = S(V_d) and R = -i E / V_d on the grid.

    E is the semi-analytic value; the finite-difference value is kept in
    E_fd.  R is NaN where min_j rho_j < core cutoff; its regular part
    V_d R = -i E is stored in R.regular.
    """
    if op is None:
        op = OperatorParams.from_config(cfg)
    factors = ansatz_factors(cfg, p, grid.X, grid.Y)
    E0, E1, dv = semi_analytic_error(cfg, p, grid.X, grid.Y, factors)
    E = E0 + E1
    Vf = ComplexField(grid, dv["W"], cfg, "ansatz")
    E_fd = S_values(dv["W"], grid, cfg.eps, cfg.total_degree)
    if check:
        rmin = op.rho_min(grid)
        sel = (rmin >= 1) & np.isfinite(E_fd)
        diff = np.abs(E_fd - E)[sel]
        lim = tol if tol is not None else 2.0 * grid.h ** 2 + 1e-6
        if diff.size and diff.max() > lim:
            k = np.argmax(np.where(sel, np.abs(E_fd - E), -1))
            i, j = np.unravel_index(k, grid.shape)
            raise StencilError("FD and semi-analytic errors disagree by %.3e at "
                               "node (%d, %d)" % (diff.max(), i, j))
    rmin = op.rho_min(grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        R = np.where(rmin >= op.core_cutoff, -1j * E / dv["W"], np.nan)
    Ef = ComplexField(grid, E, cfg, "error")
    Rf = ComplexField(grid, R, cfg, "residual", regular=-1j * E)
    return ErrorPair(Ef, Rf, E0, E1, E_fd, Vf, dv)


# --------------------------------------------------------------------------
# linearized operators

def apply_Ld_values(Phi, V, grid, eps, D):
    d = fd_derivatives(Phi, grid.h)
    ds, dss = ds_from(d, grid.X, grid.Y)
    out = (d["11"] + d["22"] + eps ** 2 * (dss - 2j * D * ds - D ** 2 * Phi)
           + (1 - np.abs(V) ** 2) * Phi - 2 * np.real(np.conj(V) * Phi) * V)
    return out


def conj_coefficient(V, E, op, grid):
    """(eta_tilde - 1) E / V, zero wherever eta_tilde = 1."""
    et = op.eta_tilde(grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(et < 1, (et - 1) * E / V, 0.0)
    return c


def apply_A_values(Phi, V, E, op, grid):
    return apply_Ld_values(Phi, V, grid, op.eps, op.D) + conj_coefficient(V, E, op, grid) * Phi


def _psi_regular(psi, V):
    if psi.regular is not None:
        return psi.regular
    return V * psi.values


def apply_L_eps(psi, base, op, E=None, form="conjugated"):
    """L^eps(psi) for a psi-kind field on the ansatz `base`.

    form="conjugated" evaluates (1/(iV)) A(i V psi) everywhere, the exact
    discrete counterpart of the solver matrix.  form="direct" applies the
    explicit formula with grad V / V; it is used outside the cores only,
    as an O(h^2) cross-check.
    """
    g = psi.grid
    V = base.values
    if E is None:
        E = S_values(V, g, op.eps, op.D)
    if form == "conjugated":
        Phi = 1j * _psi_regular(psi, V)
        AP = apply_A_values(Phi, V, E, op, g)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = AP / (1j * V)
        return psi.copy_with(out, kind="residual", regular=-1j * AP)
    if form != "direct":
        raise ValueError(form)
    u = psi.values
    d = fd_derivatives(u, g.h)
    dV = fd_derivatives(V, g.h, need=("1", "2"))
    ds, dss = ds_from(d, g.X, g.Y)
    dsV = g.X * dV["2"] - g.Y * dV["1"]
    et = op.eta_tilde(g)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (d["11"] + d["22"] + 2 * (dV["1"] * d["1"] + dV["2"] * d["2"]) / V
               - 2j * np.abs(V) ** 2 * u.imag
               + op.eps ** 2 * (dss + 2 * dsV / V * ds - 2j * op.D * ds)
               + et * E / V * u)
    out = np.where(op.rho_min(g) >= op.core_cutoff, out, np.nan)
    return psi.copy_with(out, kind="residual")


def apply_L0(phi, W_field):
    """L0 phi = Lap phi + (1 - |W|^2) phi - 2 Re(conj(W) phi) W."""
    W = W_field.values
    u = phi.values
    d = fd_derivatives(u, phi.grid.h, need=("11", "22"))
    out = d["11"] + d["22"] + (1 - np.abs(W) ** 2) * u - 2 * np.real(np.conj(W) * u) * W
    return phi.copy_with(out, kind="L0")


# --------------------------------------------------------------------------
# nonlinear terms

_EXP_CLAMP = 50.0


def _safe_expi(psi):
    """exp(i psi) with -Im psi clamped to avoid overflow."""
    im = np.clip(psi.imag, -_EXP_CLAMP, None)
    flag = bool(np.any(psi.imag < -_EXP_CLAMP))
    return np.exp(1j * psi.real - im), flag


def composite_unknown(Phi, V, op, grid):
    """v = eta V (1 + i psi) + (1 - eta) V e^{i psi}, written as
    v = V + Phi + (1 - eta) V (e^{i psi} - 1 - i psi) with psi = Phi/(iV).
    """
    eta = op.eta(grid)
    v = V + Phi
    outer = eta < 1
    with np.errstate(divide="ignore", invalid="ignore"):
        psi = np.where(outer, Phi / (1j * V), 0.0)
    ex, flag = _safe_expi(psi)
    gamma = np.where(outer, (1 - eta) * V * (ex - 1 - 1j * psi), 0.0)
    return v + gamma, psi, flag


def phase_factor(psi, op, grid):
    et = op.eta_tilde(grid)
    ex, _ = _safe_expi(np.where(et < 1, psi, 0.0))
    return et + (1 - et) * ex


def nonlinear_remainder(Phi, V, E_h, op, grid):
    """N_Phi = S_h(v)/D - E_h - A Phi, the exact discrete remainder.

    With this definition S_h(v) = D [A Phi + E_h + N_Phi] holds to round
    off, and N_Phi is quadratic in Phi.  Returns (N_Phi, overflow_flag).
    """
    v, psi, flag = composite_unknown(Phi, V, op, grid)
    Sv = S_values(v, grid, op.eps, op.D)
    Dp = phase_factor(psi, op, grid)
    N = Sv / Dp - E_h - apply_A_values(Phi, V, E_h, op, grid)
    return N, flag


def apply_N(psi, base, op, E=None, route="formula"):
    """Nonlinear part N(psi) of L^eps psi + R + N(psi) = 0.

    route="formula" evaluates the explicit near/far expressions with
    finite differences; route="remainder" returns the exact discrete
    remainder (1/(iV)) N_Phi used by the solver.  The two agree to O(h^2).
    """
    g = psi.grid
    V = base.values
    if E is None:
        E = S_values(V, g, op.eps, op.D)
    Vpsi = _psi_regular(psi, V)
    Phi = 1j * Vpsi
    if route == "remainder":
        NPhi, flag = nonlinear_remainder(Phi, V, E, op, g)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = NPhi / (1j * V)
        f = psi.copy_with(out, kind="residual", regular=-1j * NPhi)
        f.meta["overflow"] = flag
        return f
    if route != "formula":
        raise ValueError(route)
    eps, D = op.eps, op.D
    eta = op.eta(g)
    et = op.eta_tilde(g)
    outer = eta < 1
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(outer, Phi / (1j * V), 0.0)
    ex, flag = _safe_expi(u)
    Dp = et + (1 - et) * ex
    gamma = np.where(outer, (1 - eta) * V * (ex - 1 - 1j * u), 0.0)
    # near form
    L0g = apply_Ld_values(gamma, V, g, 0.0, D)
    S1g = _S1_values(gamma, g, eps, D)
    phi = Phi + gamma
    N0 = -2 * np.real(np.conj(V) * phi) * phi - np.abs(phi) ** 2 * (V + phi)
    with np.errstate(divide="ignore", invalid="ignore"):
        near = (et * (1 / Dp - 1) * E / V * u
                - 1j / V * et / Dp * (L0g + S1g + N0))
        # far form
        d = fd_derivatives(u, g.h, need=("1", "2"))
        dsu = g.X * d["2"] - g.Y * d["1"]
        grad2 = d["1"] ** 2 + d["2"] ** 2
        far = ((1 - et) * ex / Dp
               * (1j * grad2 + 1j * np.abs(V) ** 2
                  * (np.exp(np.clip(-2 * u.imag, None, 2 * _EXP_CLAMP)) - 1 + 2 * u.imag)
                  + 1j * eps ** 2 * dsu ** 2))
    far = np.where(et < 1, far, 0.0)
    out = near + far
    out = np.where(op.rho_min(g) >= op.core_cutoff, out, np.nan)
    f = psi.copy_with(out, kind="residual")
    f.meta["overflow"] = flag
    return f


def _S1_values(u, grid, eps, D):
    d = fd_derivatives(u, grid.h)
    ds, dss = ds_from(d, grid.X, grid.Y)
    return eps ** 2 * (dss - 2j * D * ds - D ** 2 * u)


# --------------------------------------------------------------------------
# sparse assembly

_OFFS = [(0, 0), (0, 1), (0, -1), (1, 0), (-1, 0), (1, 1), (1, -1), (-1, 1), (-1, -1)]


def stencil_coefficients(grid, V, c0, eps, D):
    """Complex coefficient arrays (per offset) of the complex-linear part.

    Returns dict offset -> array on the full grid (only interior rows are
    meaningful).  The real-linear term -2 Re(conj V Phi) V is separate.
    """
    h = grid.h
    X, Y = grid.X, grid.Y
    e2 = eps ** 2
    # coefficients multiplying u_1, u_2, u_11, u_22, u_12, u
    a1 = e2 * (-X + 2j * D * Y)
    a2 = e2 * (-Y - 2j * D * X)
    a11 = 1 + e2 * Y ** 2
    a22 = 1 + e2 * X ** 2
    a12 = -2 * e2 * X * Y
    a0 = -e2 * D ** 2 + (1 - np.abs(V) ** 2) + c0
    C = {}
    C[(0, 0)] = a0 - 2 * a11 / h ** 2 - 2 * a22 / h ** 2
    C[(0, 1)] = a11 / h ** 2 + a1 / (2 * h)
    C[(0, -1)] = a11 / h ** 2 - a1 / (2 * h)
    C[(1, 0)] = a22 / h ** 2 + a2 / (2 * h)
    C[(-1, 0)] = a22 / h ** 2 - a2 / (2 * h)
    C[(1, 1)] = a12 / (4 * h ** 2)
    C[(1, -1)] = -a12 / (4 * h ** 2)
    C[(-1, 1)] = -a12 / (4 * h ** 2)
    C[(-1, -1)] = a12 / (4 * h ** 2)
    return {k: np.asarray(v, dtype=complex) * np.ones(grid.shape) for k, v in C.items()}


def assemble_A(grid, V, E, op, rows=None, active=None):
    """Real 2N x 2N sparse matrix of A acting on [Re Phi, Im Phi].

    Unknowns on the boundary ring are fixed to zero (their columns are
    dropped).  `rows` optionally restricts to a subset of equation rows,
    given as (node_index_array, part) pairs, part 0 = Re, 1 = Im.
    `active` replaces the interior mask, e.g. to close on a disc.
    """
    N2, N1 = grid.shape
    Nn = N1 * N2
    c0 = conj_coefficient(V, E, op, grid)
    C = stencil_coefficients(grid, V, c0, op.eps, op.D)
    Vr, Vi = V.real, V.imag
    interior = grid.interior_mask() if active is None else (active & grid.interior_mask())
    if rows is None:
        nodes = np.flatnonzero(interior.ravel())
        rows = [(nodes, 0), (nodes, 1)]
    I, J, A = [], [], []
    for nodes, part in rows:
        ii, jj = np.unravel_index(nodes, grid.shape)
        ok = interior[ii, jj]
        ii, jj, nodes = ii[ok], jj[ok], nodes[ok]
        rid = nodes + part * Nn
        for (di, dj) in _OFFS:
            ni, nj = ii + di, jj + dj
            c = C[(di, dj)][ii, jj]
            inb = interior[ni, nj]
            col = ni * N1 + nj
            if part == 0:
                vals_r, vals_i = c.real, -c.imag
            else:
                vals_r, vals_i = c.imag, c.real
            if (di, dj) == (0, 0):
                vr, vi = Vr[ii, jj], Vi[ii, jj]
                if part == 0:
                    vals_r = vals_r - 2 * vr * vr
                    vals_i = vals_i - 2 * vr * vi
                else:
                    vals_r = vals_r - 2 * vi * vr
                    vals_i = vals_i - 2 * vi * vi
            I.append(rid[inb]); J.append(col[inb]); A.append(vals_r[inb])
            I.append(rid[inb]); J.append(col[inb] + Nn); A.append(vals_i[inb])
    I = np.concatenate(I); J = np.concatenate(J); A = np.concatenate(A)
    return sp.csr_matrix((A, (I, J)), shape=(2 * Nn, 2 * Nn))
