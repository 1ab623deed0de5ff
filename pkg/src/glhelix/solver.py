"""Projected linear solves, the Picard fixed point and the outer loop.

Everything is written in the regular unknown Phi = i V psi.  For psi in
the symmetry class psi(-x1, x2) = psi(x1, -x2) = -conj psi, Phi satisfies
Phi(-x1, x2) = Phi(x1, -x2) = conj Phi, so Re Phi is even in both axes
and Im Phi is odd in both.  The solver keeps one quadrant:

* Re Phi is an unknown at every active node with x1 >= 0, x2 >= 0,
* Im Phi is an unknown only off the axes (it vanishes on them),

and a prolongation P maps the quadrant vector onto the full grid with
the reflection signs.  The projected problem

    A Phi - c F = rhs,   Re sum chi_1 conj(Phi / W^b) W^a_x1 h^2 = 0,

with F = sum_j (-1)^j chi_j W_x1(z - d_j) V / W(z - d_j), is one sparse
bordered matrix, factorized once per configuration.
"""

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.sparse.linalg import eigsh, splu

from .fields import (ComplexField, Grid2D, make_grid, single_vortex,
                     track_vortices, two_vortex, vortex_factor)
from .norms import NormParams, norm_star, norm_star_star
from .operators import (OperatorParams, S_values, apply_A_values,
                        assemble_A, composite_unknown, compute_error, eta1,
                        nonlinear_remainder)
from .reduction import (ReductionReport, R_tilde, compute_a0_a1,
                        orthogonality_defect, projection_cstar,
                        solve_reduced)


class SolverError(RuntimeError):
    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace


@dataclass
class SolveTrace:
    """Per-iteration record of a solve."""
    residuals: list = field(default_factory=list)
    star_norms: list = field(default_factory=list)
    c_history: list = field(default_factory=list)
    times: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def record(self, residual, c, t0, star=None):
        self.residuals.append(float(residual))
        self.c_history.append(float(c))
        self.times.append(time.perf_counter() - t0)
        if star is not None:
            self.star_norms.append(float(star))

    def monotone_after(self, k=2):
        r = self.residuals[k:]
        return all(b <= a for a, b in zip(r, r[1:]))

    def to_dict(self):
        return {"residuals": self.residuals, "star_norms": self.star_norms,
                "c_history": self.c_history, "times": self.times,
                "flags": self.flags, "meta": _plain(self.meta)}

    def to_jsonl(self, path):
        with open(path, "w") as fh:
            for i, r in enumerate(self.residuals):
                fh.write(json.dumps({"iter": i, "residual": r,
                                     "c": self.c_history[i],
                                     "time": self.times[i]}) + "\n")
            fh.write(json.dumps({"summary": _plain(self.meta),
                                 "flags": self.flags}) + "\n")


def _plain(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, (np.floating, np.integer)):
            v = v.item()
        elif isinstance(v, np.ndarray):
            if v.ndim > 1:
                continue  # grid arrays belong in a field file, not the trace
            v = np.stack([v.real, v.imag], -1).tolist() if np.iscomplexobj(v) else v.tolist()
        elif isinstance(v, dict):
            v = _plain(v)
        elif isinstance(v, complex):
            v = [v.real, v.imag]
        out[k] = v
    return out


# --------------------------------------------------------------------------
# quadrant reduction

def quarter_maps(grid, active=None):
    """Index sets and prolongation for the quadrant reduction.

    Returns (re_nodes, im_nodes, P) where re_nodes / im_nodes are flat
    grid indices of the quadrant unknowns and P is the sparse
    (2 Nn) x (n_re + n_im) prolongation onto [Re Phi, Im Phi].
    """
    N2, N1 = grid.shape
    Nn = N1 * N2
    i0, j0 = grid.center
    act = grid.interior_mask() if active is None else (active & grid.interior_mask())
    ii, jj = np.nonzero(act)
    qi = i0 + np.abs(ii - i0)
    qj = j0 + np.abs(jj - j0)
    quad = act.copy()
    quad[:i0, :] = False
    quad[:, :j0] = False
    off = quad.copy()
    off[i0, :] = False
    off[:, j0] = False
    re_nodes = np.flatnonzero(quad.ravel())
    im_nodes = np.flatnonzero(off.ravel())
    re_id = np.full(Nn, -1)
    re_id[re_nodes] = np.arange(re_nodes.size)
    im_id = np.full(Nn, -1)
    im_id[im_nodes] = np.arange(im_nodes.size) + re_nodes.size
    full = ii * N1 + jj
    qflat = qi * N1 + qj
    if np.any(re_id[qflat] < 0):
        raise SolverError("active set is not symmetric about both axes")
    rows = [full]
    cols = [re_id[qflat]]
    vals = [np.ones(full.size)]
    sgn = np.sign(ii - i0) * np.sign(jj - j0)
    m = sgn != 0
    rows.append(full[m] + Nn)
    cols.append(im_id[qflat[m]])
    vals.append(sgn[m].astype(float))
    P = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(2 * Nn, re_nodes.size + im_nodes.size))
    return re_nodes, im_nodes, P


def _class_defect(u):
    """max deviation of u from u(-x1, x2) = u(x1, -x2) = conj u."""
    u = np.where(np.isfinite(u), u, 0.0)
    a = np.max(np.abs(u[:, ::-1] - np.conj(u)))
    b = np.max(np.abs(u[::-1, :] - np.conj(u)))
    return float(max(a, b))


def kernel_forcing(cfg, p, grid, op):
    """F = sum_j (-1)^j chi_j W_x1(z - d_j) prod_{k != j} W(z - d_k)."""
    F = np.zeros(grid.shape, dtype=complex)
    for j, (c, d) in enumerate(cfg.vortices):
        fj = vortex_factor(p, grid.X, grid.Y, c, d, order=1)["Wx"]
        other = np.ones(grid.shape, dtype=complex)
        for k, (ck, dk) in enumerate(cfg.vortices):
            if k != j:
                other = other * vortex_factor(p, grid.X, grid.Y, ck, dk, order=0)["W"]
        F = F + (-1) ** (j + 1) * op.chi_j(grid, j) * fj * other
    return F


def constraint_weight(cfg, p, grid, op):
    """G with Re sum conj(Phi) G = Re sum chi_1 conj(Phi / W^b) W^a_x1."""
    ca, da = cfg.vortices[0]
    Fa = vortex_factor(p, grid.X, grid.Y, ca, da, order=1)
    Wb = np.ones(grid.shape, dtype=complex)
    for c, d in cfg.vortices[1:]:
        Wb = Wb * vortex_factor(p, grid.X, grid.Y, c, d, order=0)["W"]
    return op.chi_j(grid, 0) * Fa["Wx"] / np.conj(Wb)


class LinearSystem:
    """Bordered quadrant system for A Phi - c F = rhs plus the constraint.

    The matrix is factorized on construction; `solve(rhs)` takes a full
    grid complex right-hand side and returns (Phi, c) on the full grid.
    The error array E_h enters through the conjugated coefficient
    (eta_tilde - 1) E_h / V; the nonlinear solver uses the finite
    difference error so that the discrete remainder is exactly quadratic.
    """

    def __init__(self, cfg, p, grid=None, op=None, V=None, E_h=None):
        self.cfg = cfg
        self.p = p
        self.grid = grid if grid is not None else make_grid(cfg)
        self.op = op if op is not None else OperatorParams.from_config(cfg)
        g = self.grid
        if V is None or E_h is None:
            err = compute_error(cfg, p, g, self.op, check=False)
            V = err.V.values if V is None else V
            E_h = np.nan_to_num(err.E_fd) if E_h is None else E_h
        self.V = V
        self.E = E_h
        t0 = time.perf_counter()
        self.re_nodes, self.im_nodes, self.P = quarter_maps(g)
        Nn = g.N1 * g.N2
        self.Nn = Nn
        rows = [(self.re_nodes, 0), (self.im_nodes, 1)]
        A = assemble_A(g, V, E_h, self.op, rows=rows)
        self.rowsel = np.concatenate([self.re_nodes, self.im_nodes + Nn])
        self.Aq = (A[self.rowsel] @ self.P).tocsc()
        self.F = kernel_forcing(cfg, p, g, self.op)
        self.G = constraint_weight(cfg, p, g, self.op)
        Fq = self._restrict(self.F)
        gq = self.P.T @ np.concatenate([self.G.real.ravel(), self.G.imag.ravel()])
        n = self.Aq.shape[0]
        K = sp.bmat([[self.Aq, sp.csc_matrix(-Fq.reshape(n, 1))],
                     [sp.csr_matrix(gq.reshape(1, n)), None]], format="csc")
        self.K = K
        try:
            self.lu = splu(K)
        except RuntimeError as exc:
            raise SolverError("bordered matrix is singular; the kernel is not "
                              "pinned (%s)" % exc) from exc
        self.setup_time = time.perf_counter() - t0

    @property
    def n_unknowns(self):
        return self.Aq.shape[0] + 1

    def _restrict(self, u):
        return np.concatenate([u.real.ravel()[self.re_nodes],
                               u.imag.ravel()[self.im_nodes]])

    def prolong(self, x):
        y = self.P @ x
        return (y[:self.Nn] + 1j * y[self.Nn:]).reshape(self.grid.shape)

    def solve(self, rhs):
        b = np.concatenate([self._restrict(rhs), [0.0]])
        x = self.lu.solve(b)
        return self.prolong(x[:-1]), float(x[-1])

    def residual(self, Phi, c, rhs):
        """Interior max of A Phi - c F - rhs, evaluated matrix-free."""
        g = self.grid
        r = apply_A_values(Phi, self.V, self.E, self.op, g) - c * self.F - rhs
        m = g.interior_mask()
        return float(np.max(np.abs(r[m])))

    def constraint(self, Phi):
        return float(np.sum(np.real(np.conj(Phi) * self.G)) * self.grid.h ** 2)


def _psi_field(Phi, system, kind="perturbation"):
    V = system.V
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = Phi / (1j * V)
    return ComplexField(system.grid, vals, system.cfg, kind, regular=-1j * Phi)


def _base(system):
    return ComplexField(system.grid, system.V, system.cfg, "ansatz")


# --------------------------------------------------------------------------
# linear projected problem

def solve_projected_linear(h, cfg, p, op=None, system=None, norms=False,
                           sym_tol=1e-8):
    """Solve L^eps psi = h + c * forcing with the orthogonality constraint.

    `h` is a residual-kind ComplexField in the psi symmetry class; its
    regular part V h is used when present.  Returns (psi, c, trace).
    """
    t0 = time.perf_counter()
    if system is None:
        system = LinearSystem(cfg, p, h.grid, op)
    V = system.V
    reg = h.regular if h.regular is not None else V * h.values
    rhs = 1j * np.where(np.isfinite(reg), reg, 0.0)
    scale = max(1.0, float(np.max(np.abs(rhs))))
    defect = _class_defect(rhs)
    if defect > sym_tol * scale:
        raise SolverError("right-hand side violates the psi symmetry class by %.3e"
                          % defect)
    Phi, c = system.solve(rhs)
    trace = SolveTrace()
    res = system.residual(Phi, c, rhs)
    psi = _psi_field(Phi, system)
    trace.record(res, c, t0)
    trace.meta.update(orthogonality_defect=orthogonality_defect(psi, cfg, p, 0),
                      orthogonality_defect_2=orthogonality_defect(psi, cfg, p, 1),
                      unknowns=system.n_unknowns, setup_time=system.setup_time)
    if norms:
        np_ = NormParams()
        base = _base(system)
        ns = norm_star(psi, np_, base).total
        nss = norm_star_star(h, np_, base).total
        trace.star_norms.append(ns)
        trace.meta["stability_ratio"] = ns / nss if nss > 0 else float("nan")
    return psi, c, trace


# --------------------------------------------------------------------------
# nonlinear projected problem

def solve_nonlinear_projected(cfg, p, op=None, grid=None, tol=1e-9, max_iter=30,
                              system=None, star_norm=False):
    """Picard iteration Phi <- T(-E - N(Phi)) from Phi = 0.

    Convergence is measured by the sup of the increment of Phi = i V psi.
    Two consecutive increases of the increment are treated as divergence.
    Returns (psi, c, trace); trace.meta carries Phi, the fixed-point
    residual and a convergence flag.
    """
    t0 = time.perf_counter()
    if system is None:
        system = LinearSystem(cfg, p, grid, op)
    g, op = system.grid, system.op
    V, E = system.V, system.E
    trace = SolveTrace()
    Phi = np.zeros(g.shape, dtype=complex)
    c = 0.0
    converged = False
    grow = 0
    for it in range(max_iter):
        N, flag = nonlinear_remainder(Phi, V, E, op, g)
        if flag:
            trace.flags.append("exp clamp at iteration %d" % it)
        Phi_new, c = system.solve(-E - np.nan_to_num(N))
        diff = float(np.max(np.abs(Phi_new - Phi)))
        Phi = Phi_new
        trace.record(diff, c, t0)
        if len(trace.residuals) >= 2 and diff > trace.residuals[-2]:
            grow += 1
        else:
            grow = 0
        if diff <= tol:
            converged = True
            break
        if grow >= 2 or not np.isfinite(diff):
            trace.meta.update(converged=False, iterations=it + 1)
            raise SolverError("Picard iteration diverges at iteration %d "
                              "(increment %.3e)" % (it, diff), trace)
    if not converged:
        trace.flags.append("max_iter reached")
    N, _ = nonlinear_remainder(Phi, V, E, op, g)
    Phi_chk, _ = system.solve(-E - np.nan_to_num(N))
    psi = _psi_field(Phi, system)
    rs = trace.residuals
    rates = [b / a for a, b in zip(rs, rs[1:]) if a > 0]
    trace.meta.update(converged=converged, iterations=len(rs),
                      fixed_point_residual=float(np.max(np.abs(Phi_chk - Phi))),
                      contraction=float(np.median(rates)) if rates else float("nan"),
                      c=c, eps=cfg.eps, d_hat=cfg.d_hat, h=g.h,
                      unknowns=system.n_unknowns, setup_time=system.setup_time)
    if not trace.monotone_after(2):
        trace.flags.append("increment not monotone after iteration 2")
    if star_norm:
        trace.star_norms.append(norm_star(psi, NormParams(), _base(system)).total)
    trace.meta["Phi"] = Phi
    return psi, c, trace


def solution_field(Phi, system):
    """v = eta V (1 + i psi) + (1 - eta) V e^{i psi} as a ComplexField."""
    v, _, _ = composite_unknown(Phi, system.V, system.op, system.grid)
    return ComplexField(system.grid, v, system.cfg, "solution")


def interior_residual(v):
    """max |S(v)| over interior nodes of a solution field."""
    cfg = v.cfg
    S = S_values(v.values, v.grid, cfg.eps, cfg.total_degree)
    return float(np.nanmax(np.abs(S)))


def gibbons_minimum(v, frac=0.1):
    """min |v| on the outer annulus 0.9 R_out <= |z| <= R_out."""
    g = v.grid
    R = min(g.L1, g.L2)
    r = np.abs(g.Z)
    m = (r >= (1 - frac) * R) & (r <= R)
    return float(np.min(np.abs(v.values[m])))


# --------------------------------------------------------------------------
# outer loop over d_hat

def solve_full(eps, p, tol=1e-6, bracket=None, m=None, h_max=0.25,
               picard_tol=1e-9, max_iter=30, np_=None):
    """Find d_hat with c(d_hat) = 0 for the full projected solve.

    The grid has a fixed number of cells per half distance (m), so it
    scales with d_tilde.  The root is bracketed around the leading-order
    root and refined with Brent's bracketing method.  Returns
    (v, report, trace) with v the composite solution at the root.
    """
    np_ = np_ or NormParams()
    lo_rep = solve_reduced(eps, p, tol=1e-8, np_=np_)
    d_lo = lo_rep.d0 if lo_rep.converged else 1.0
    if m is None:
        m = make_grid(two_vortex(eps, d_lo), h_max=h_max).N1 // 4
        if m % 2 == 0:
            m += 1
    cache = {}
    samples = []

    def run(dh):
        cfg = two_vortex(eps, dh)
        g = make_grid(cfg, m=m)
        sysm = LinearSystem(cfg, p, g)
        try:
            psi, c, tr = solve_nonlinear_projected(cfg, p, system=sysm, tol=picard_tol,
                                                   max_iter=max_iter)
        except SolverError as exc:
            raise SolverError("inner solve failed at d_hat=%.8g: %s" % (dh, exc),
                              exc.trace) from exc
        cache[dh] = (sysm, psi, c, tr)
        samples.append((dh, c))
        return c

    if bracket is None:
        bracket = (0.8 * d_lo, 1.25 * d_lo)
    a, b = bracket
    ca, cb = run(a), run(b)
    k = 0
    while ca * cb > 0 and k < 6:
        a, b = a / 1.2, b * 1.2
        ca, cb = run(a), run(b)
        k += 1
    if ca * cb > 0:
        raise SolverError("no sign change of c in [%.4g, %.4g]" % (a, b))
    d0 = brentq(run, a, b, xtol=tol * d_lo, rtol=4 * np.finfo(float).eps)
    if d0 not in cache:
        run(d0)
    sysm, psi, c, tr = cache[d0]
    v = solution_field(tr.meta["Phi"], sysm)
    a0, a1 = compute_a0_a1(p, eps, d0, np_)
    rep = ReductionReport(eps, samples, projection_cstar(p), a0, a1, d0,
                          math.sqrt(a0 / a1), True, (a, b),
                          np_.R_eps(eps, sysm.cfg.d_tilde), R_tilde(eps),
                          notes=["full projected solve, m=%d, h=%.4g" % (m, sysm.grid.h),
                                 "leading-order root %.8g" % d_lo])
    v.meta.update(d_hat=d0, c=c, h=sysm.grid.h, m=m,
                  residual=interior_residual(v))
    tr.meta["d_hat_leading_order"] = d_lo
    return v, rep, tr


# --------------------------------------------------------------------------
# kernel of the single-vortex linearization

def _decay_closure(g, active):
    """Diagonal terms that set off-disc neighbours to phi(node) r_node / r_nb.

    This is the 1/r decay of the kernel element W_x1 imposed across the
    disc boundary.  Only the diagonal changes, so symmetry is kept.
    """
    r = np.abs(g.Z)
    d = np.zeros(g.shape)
    for di, dj in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        nb_act = np.roll(active, (-di, -dj), axis=(0, 1))
        nb_r = np.roll(r, (-di, -dj), axis=(0, 1))
        m = active & ~nb_act
        d[m] += r[m] / nb_r[m] / g.h ** 2
    d = d.ravel()
    return sp.diags(np.concatenate([d, d]))


def kernel_diagnostics(p, h=0.1, R=20.0, k=3, closure="decay"):
    """Smallest eigenvalues of the quadrant-reduced L0 on a disc.

    closure="decay" closes the disc with 1/r extrapolation to the nodes
    just outside; "dirichlet" sets them to zero.

    L0 is symmetric, so its singular values are the moduli of the
    eigenvalues of the generalized problem P^T A P x = lam P^T P x.
    Reports the two smallest, the alignment cosine of the first
    eigenvector with W_x1, and the smallest value after bordering with
    the chi W_x1 multiplier.
    """
    n = int(round(R / h)) + 2
    L = n * h
    g = Grid2D.square(L, h)
    cfg = single_vortex()
    op = OperatorParams(eps=0.0, D=1, centers=(0j,))
    F = vortex_factor(p, g.X, g.Y, 0j, 1, order=1)
    V = F["W"]
    active = np.abs(g.Z) < R
    re_nodes, im_nodes, P = quarter_maps(g, active)
    A = assemble_A(g, V, np.zeros(g.shape, dtype=complex), op, active=active)
    if closure == "decay":
        A = A + _decay_closure(g, active)
    elif closure != "dirichlet":
        raise ValueError(closure)
    M = (P.T @ A @ P).tocsc()
    M = 0.5 * (M + M.T)
    B = (P.T @ P).tocsc()
    vals, vecs = eigsh(M, k=k, M=B, sigma=0, which="LM")
    order = np.argsort(np.abs(vals))
    vals, vecs = vals[order], vecs[:, order]

    def restrict(u):
        return np.concatenate([u.real.ravel()[re_nodes], u.imag.ravel()[im_nodes]])

    w = restrict(F["Wx"])
    x = vecs[:, 0]
    cos = abs(x @ (B @ w)) / math.sqrt((x @ (B @ x)) * (w @ (B @ w)))
    chi = eta1(np.abs(g.Z) / 2)
    b = B @ restrict(chi * F["Wx"])
    b = b / np.linalg.norm(b)
    K = sp.bmat([[M, sp.csc_matrix(b.reshape(-1, 1))],
                 [sp.csr_matrix(b.reshape(1, -1)), None]], format="csc")
    Bk = sp.block_diag([B, sp.identity(1)], format="csc")
    kv = eigsh(K, k=2, M=Bk, sigma=0, which="LM", return_eigenvectors=False)
    return {"h": g.h, "R": R, "closure": closure, "sv": [float(abs(v)) for v in vals],
            "cos_Wx1": float(cos), "bordered_min": float(np.min(np.abs(kv))),
            "unknowns": int(M.shape[0])}


def track_solution(v):
    """Vortex table of a solution field and the implied d_hat."""
    cfg = v.cfg
    vs = track_vortices(v)
    L = abs(math.log(cfg.eps))
    pos = [z for z, w in vs if w == 1]
    d_star = float(np.mean([abs(z.real) for z in pos])) if pos else float("nan")
    return vs, d_star * cfg.eps * math.sqrt(L)


# --------------------------------------------------------------------------
# test fields

def _gauss(X, Y, x0, y0, s):
    dx, dy = X - x0, Y - y0
    g = np.exp(-(dx * dx + dy * dy) / s ** 2)
    return {"u": g, "1": -2 * dx / s ** 2 * g, "2": -2 * dy / s ** 2 * g,
            "11": (4 * dx * dx / s ** 4 - 2 / s ** 2) * g,
            "22": (4 * dy * dy / s ** 4 - 2 / s ** 2) * g,
            "12": 4 * dx * dy / s ** 4 * g}


def _bump_params(cfg, seed, n_bumps, avoid):
    """Random bump centres/amplitudes, kept `avoid` away from every vortex."""
    rng = np.random.default_rng(seed)
    dt = cfg.d_tilde
    out = []
    while len(out) < n_bumps:
        z = complex(rng.uniform(0, 2 * dt), rng.uniform(0, 1.5 * dt))
        if min(abs(z - c) for c in cfg.centers) < avoid:
            continue
        a = complex(rng.normal(), rng.normal())
        s = rng.uniform(1.0, 2.5)
        out.append((z, a, s))
    return out


def _phi_class_sum(X, Y, bumps):
    """Symmetrized bump sum in the Phi class with exact derivatives.

    Each bump f is replaced by [f + conj f(-conj z) + conj f(conj z) + f(-z)] / 4.
    """
    keys = ("u", "1", "2", "11", "22", "12")
    tot = {k: np.zeros(X.shape, dtype=complex) for k in keys}
    for z0, a, s in bumps:
        for sx, sy, conj in ((1, 1, False), (-1, 1, True), (1, -1, True), (-1, -1, False)):
            g = _gauss(X, Y, sx * z0.real, sy * z0.imag, s)
            amp = np.conj(a) if conj else a
            for k in keys:
                tot[k] = tot[k] + 0.25 * amp * g[k]
    return tot


def random_rhs(base, seed, n_bumps=6, avoid=3.0):
    """Smooth right-hand side h in the psi class, as a residual field.

    Built as h = Phi_b / (i V) with Phi_b a symmetrized sum of Gaussian
    bumps kept `avoid` away from the vortices, so V h is smooth.
    """
    cfg, grid = base.cfg, base.grid
    bumps = _bump_params(cfg, seed, n_bumps, avoid)
    Phi_b = _phi_class_sum(grid.X, grid.Y, bumps)["u"]
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = Phi_b / (1j * base.values)
    h = ComplexField(grid, vals, cfg, "residual", regular=-1j * Phi_b)
    h.meta["seed"] = int(seed)
    return h


def manufactured_problem(cfg, p, grid, seed=0, n_bumps=4, avoid=3.0):
    """Exact (Phi_ms, rhs) with rhs = A Phi_ms from analytic derivatives.

    Phi_ms is a symmetrized Gaussian sum plus a multiple of one bump on
    each vortex, chosen so the discrete orthogonality constraint holds
    and c = 0.  A is evaluated with the
    semi-analytic ansatz and error, so the discrete solve recovers Phi_ms
    up to the truncation error of the stencils.
    """
    from .fields import ansatz_factors, product_derivatives
    from .operators import semi_analytic_error
    bumps = _bump_params(cfg, seed, n_bumps, avoid)
    X, Y = grid.X, grid.Y
    # a bump on the vortex removes the projection onto the kernel exactly
    # for the discrete constraint on this grid
    op = OperatorParams.from_config(cfg)
    G = constraint_weight(cfg, p, grid, op)
    d = _phi_class_sum(X, Y, bumps)
    k = _phi_class_sum(X, Y, [(complex(cfg.centers[0]), 1.0, 1.0)])
    gB = np.sum(np.real(np.conj(d["u"]) * G))
    gK = np.sum(np.real(np.conj(k["u"]) * G))
    t = -gB / gK
    d = {key: d[key] + t * k[key] for key in d}
    factors = ansatz_factors(cfg, p, X, Y)
    E0, E1, dv = semi_analytic_error(cfg, p, X, Y, factors)
    V = dv["W"]
    E = E0 + E1
    eps, D = cfg.eps, cfg.total_degree
    u = d["u"]
    ds = X * d["2"] - Y * d["1"]
    dss = (Y ** 2 * d["11"] + X ** 2 * d["22"] - 2 * X * Y * d["12"]
           - X * d["1"] - Y * d["2"])
    Ld = (d["11"] + d["22"] + eps ** 2 * (dss - 2j * D * ds - D ** 2 * u)
          + (1 - np.abs(V) ** 2) * u - 2 * np.real(np.conj(V) * u) * V)
    et = op.eta_tilde(grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        c0 = np.where(et < 1, (et - 1) * E / V, 0.0)
    return u, Ld + c0 * u
