"""Radial profile of the degree-one Ginzburg-Landau vortex.

The modulus w(r) of W(z) = w(|z|) e^{i arg z} solves

    w'' + w'/r - w/r**2 + (1 - w**2) w = 0,    w(0) = 0,  w(inf) = 1.

We solve it by Newton iteration on the second-order finite-difference
system over [0, r_max] with the far-field Dirichlet closure
w(r_max) = 1 - 1/(2 r_max**2), and expose the result through a C^2
piecewise-quintic Hermite interpolant plus the far-field expansion.
"""

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BPoly
from scipy.linalg import solve_banded
from scipy.optimize import minimize_scalar


class ProfileError(RuntimeError):
    """Raised when the BVP solve fails or yields an invalid profile."""


@dataclass(frozen=True, eq=False)
class VortexProfile:
    r_grid: np.ndarray
    w: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    alpha_slope: float
    r_max: float
    bvp_residual: float
    iterations: int = 0
    core_poly: np.ndarray = None
    _interp: object = field(default=None, repr=False)

    @property
    def n_nodes(self):
        return self.r_grid.size

    @property
    def h(self):
        return self.r_grid[1] - self.r_grid[0]

    def T(self):
        """T(r) = w'(r) - w(r)/r at the nodes (T(0) = 0)."""
        r = self.r_grid
        out = np.zeros_like(r)
        out[1:] = self.w1[1:] - self.w[1:] / r[1:]
        return out

    def __call__(self, r):
        return eval_profile(self, r)

    def core_terms(self, rho):
        """f = w/rho, g = T/rho^2 and g'/rho from the core polynomial.

        Valid for rho <= CORE_POLY_R; free of the cancellations that the
        quotients suffer when formed from tabulated values near 0.
        """
        c = self.core_poly
        k = np.arange(1, 2 * c.size, 2)
        f = np.zeros_like(rho)
        g = np.zeros_like(rho)
        gr = np.zeros_like(rho)
        for ck, kk in zip(c, k):
            f = f + ck * rho ** (kk - 1)
            if kk >= 3:
                g = g + (kk - 1) * ck * rho ** (kk - 3)
            if kk >= 5:
                gr = gr + (kk - 1) * (kk - 3) * ck * rho ** (kk - 5)
        return f, g, gr

    def series_coefficients(self):
        """First odd Taylor coefficients (alpha, a3, a5) of w at the origin.

        The ODE forces a3 = -a/8 and a5 = (a**3 + a/8)/24.
        """
        return tuple(float(x) for x in self.core_poly[:3])


def _residual(w, r, h):
    ri = r[1:-1]
    res = ((w[2:] - 2 * w[1:-1] + w[:-2]) / h ** 2
           + (w[2:] - w[:-2]) / (2 * h * ri)
           - w[1:-1] / ri ** 2
           + (1 - w[1:-1] ** 2) * w[1:-1])
    return res


def _newton(w, r, h, tol, max_iter):
    ri = r[1:-1]
    lower = 1 / h ** 2 - 1 / (2 * h * ri)
    upper = 1 / h ** 2 + 1 / (2 * h * ri)
    m = ri.size
    res = _residual(w, r, h)
    err = np.max(np.abs(res))
    it = 0
    step = np.inf
    floor = 64 * np.finfo(float).eps / h ** 2
    while err > tol and it < max_iter and not (step < 1e-15 and err <= floor):
        diag = -2 / h ** 2 - 1 / ri ** 2 + 1 - 3 * w[1:-1] ** 2
        ab = np.zeros((3, m))
        ab[0, 1:] = upper[:-1]
        ab[1] = diag
        ab[2, :-1] = lower[1:]
        dw = solve_banded((1, 1), ab, -res)
        w = w.copy()
        w[1:-1] += dw
        step = np.max(np.abs(dw))
        res = _residual(w, r, h)
        err = np.max(np.abs(res))
        it += 1
    return w, err, it


def _nodal_derivative(w, h, alpha):
    """Fourth-order first derivative; odd extension used at the origin."""
    n = w.size
    ext = np.concatenate([-w[2:0:-1], w])  # w(-r) = -w(r)
    d = np.empty(n)
    d[:n - 2] = (ext[0:n - 2] - 8 * ext[1:n - 1]
                 + 8 * ext[3:n + 1] - ext[4:n + 2]) / (12 * h)
    f = w[n - 5:]
    d[n - 2] = (-f[0] + 6 * f[1] - 18 * f[2] + 10 * f[3] + 3 * f[4]) / (12 * h)
    d[n - 1] = (3 * f[0] - 16 * f[1] + 36 * f[2] - 48 * f[3] + 25 * f[4]) / (12 * h)
    d[0] = alpha
    return d


CORE_POLY_R = 0.3      # series representation below this radius
_BLEND_R = (0.3, 1.2)  # blend series -> finite-difference table


def series_coeffs(alpha, kmax=61):
    """Odd Taylor coefficients c_1, c_3, ... of w with w'(0) = alpha.

    Substituting w = sum c_k r^k into the ODE gives
    c_{k+2} ((k+2)^2 - 1) = -[w - w^3]_k.
    """
    n = (kmax + 1) // 2
    c = np.zeros(n)
    c[0] = alpha
    # dense power coefficients of w, so w^3 is a plain convolution
    full = np.zeros(kmax + 1)
    full[1] = alpha
    for m in range(n - 1):
        k = 2 * m + 1
        sq = np.convolve(full[:k + 1], full[:k + 1])[:k + 1]
        cube = np.dot(sq[:k + 1], full[k::-1])
        c[m + 1] = -(c[m] - cube) / ((k + 2) ** 2 - 1)
        full[k + 2] = c[m + 1]
    return c


def _fit_core(r, w, frac=0.05, r_cap=1.0):
    """Fit alpha so that the Taylor series matches the first nodes.

    The window is the first `frac` of the nodes, capped at r <= r_cap.
    Returns the series coefficients; the first one is alpha.
    """
    n = max(int(frac * r.size), 8)
    rr, ww = r[:n], w[:n]
    sel = rr <= r_cap
    if sel.sum() >= 8:
        rr, ww = rr[sel], ww[sel]

    def cost(a):
        return np.sum((_poly_triple(series_coeffs(a), rr)[0] - ww) ** 2)
    a0 = np.linalg.lstsq(rr[:, None], ww, rcond=None)[0][0]
    res = minimize_scalar(cost, bracket=(0.9 * a0, a0), tol=1e-14)
    return series_coeffs(res.x)


def _poly_triple(c, r):
    k = np.arange(1, 2 * c.size, 2)
    w = sum(ck * r ** kk for ck, kk in zip(c, k))
    w1 = sum(kk * ck * r ** (kk - 1) for ck, kk in zip(c, k))
    w2 = sum(kk * (kk - 1) * ck * r ** (kk - 2) for ck, kk in zip(c, k) if kk > 1)
    return w, w1, w2


def solve_profile(r_max=40.0, n_nodes=8000, tol=1e-10, guess="tanh",
                  max_iter=50):
    """Solve the vortex modulus BVP on a uniform grid over [0, r_max].

    Parameters
    ----------
    r_max : float
        Truncation radius, at least 20.
    n_nodes : int
        Number of nodes including both ends, at least 2000.
    tol : float
        Bound on the max-norm of the discrete residual.
    guess : {"tanh", "ramp"}
        Initial Newton guess, tanh(r/sqrt 2) or min(r, 1).
    """
    if r_max < 20:
        raise ValueError("r_max must be >= 20")
    if n_nodes < 2000:
        raise ValueError("n_nodes must be >= 2000")
    if not tol > 0:
        raise ValueError("tol must be positive")
    r = np.linspace(0.0, r_max, n_nodes)
    h = r[1] - r[0]
    if guess == "tanh":
        w0 = np.tanh(r / np.sqrt(2))
    elif guess == "ramp":
        w0 = np.minimum(r, 1.0)
    else:
        raise ValueError("unknown guess %r" % guess)
    w0[0] = 0.0
    w0[-1] = 1 - 1 / (2 * r_max ** 2)
    w, err, it = _newton(w0, r, h, tol, max_iter)
    # on very fine grids the residual bottoms out at the round-off floor
    # eps/h^2; accept that floor when the Newton step has stagnated
    floor = 64 * np.finfo(float).eps / h ** 2
    if not err <= max(tol, floor):
        raise ProfileError("Newton did not converge after %d iterations, "
                           "last residual %.3e" % (it, err))
    if np.any(w[1:-1] <= 0) or np.any(w[1:-1] >= 1) or np.any(np.diff(w) <= 0):
        raise ProfileError("invalid profile: not monotone in (0, 1)")
    coef = _fit_core(r, w)
    alpha = float(coef[0])
    w1 = _nodal_derivative(w, h, alpha)
    w2 = np.zeros_like(w)
    ri = r[1:]
    w2[1:] = -w1[1:] / ri + w[1:] / ri ** 2 - (1 - w[1:] ** 2) * w[1:]
    # The finite-difference table is only O(h^2) consistent next to r = 0;
    # there it is replaced by the Taylor series, blended into the nodes.
    a, b = _BLEND_R
    sel = r < b
    u = np.clip((r[sel] - a) / (b - a), 0, 1)
    s = u ** 3 * (10 - 15 * u + 6 * u ** 2)
    s1 = 30 * u ** 2 * (1 - u) ** 2 / (b - a)
    s2 = 60 * u * (1 - u) * (1 - 2 * u) / (b - a) ** 2
    pw, pw1, pw2 = _poly_triple(coef, r[sel])
    dw, dw1, dw2 = w[sel] - pw, w1[sel] - pw1, w2[sel] - pw2
    w = w.copy()
    # exact derivatives of P + s (table - P)
    w[sel] = pw + s * dw
    w1[sel] = pw1 + s * dw1 + s1 * dw
    w2[sel] = pw2 + s * dw2 + 2 * s1 * dw1 + s2 * dw
    w[0] = 0.0
    w2[0] = 0.0
    if np.any(w1[1:-1] <= 0):
        raise ProfileError("invalid profile: w' not positive")
    return _rebuild(r, w, w1, w2, alpha, float(r_max), float(err), coef, it)


def _rebuild(r, w, w1, w2, alpha, r_max, res, coef, it=0):
    interp = BPoly.from_derivatives(r, np.column_stack([w, w1, w2]),
                                    orders=5, extrapolate=False)
    return VortexProfile(r_grid=r, w=w, w1=w1, w2=w2, alpha_slope=alpha,
                         r_max=r_max, bvp_residual=res, iterations=it,
                         core_poly=np.asarray(coef, dtype=float), _interp=interp)


def eval_profile(p, r):
    """Return (w, w', w'') at radius r (scalar or array).

    Inside [0, r_max] the C^2 quintic Hermite interpolant of the nodal
    triples is used (it reproduces node values exactly); beyond r_max the
    far-field expansion w = 1 - 1/(2r^2), w' = 1/r^3, w'' = -3/r^4.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(np.isnan(r)):
        raise ValueError("radius must be non-negative")
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    w = np.empty_like(r)
    wp = np.empty_like(r)
    wpp = np.empty_like(r)
    inside = r <= p.r_max
    far = ~inside
    if np.any(far):
        rf = r[far]
        w[far] = 1 - 0.5 / rf ** 2
        wp[far] = 1 / rf ** 3
        wpp[far] = -3 / rf ** 4
    if np.any(inside):
        ri = r[inside]
        P = p._interp
        w[inside] = P(ri)
        wp[inside] = P(ri, 1)
        wpp[inside] = P(ri, 2)
        # nodes: return the tabulated triple bit for bit
        idx = np.searchsorted(p.r_grid, ri)
        idx = np.clip(idx, 0, p.r_grid.size - 1)
        hit = p.r_grid[idx] == ri
        if np.any(hit):
            sub = np.flatnonzero(inside)[hit]
            w[sub] = p.w[idx[hit]]
            wp[sub] = p.w1[idx[hit]]
            wpp[sub] = p.w2[idx[hit]]
    if scalar:
        return float(w[0]), float(wp[0]), float(wpp[0])
    return w, wp, wpp


def asymptotics_report(p, r_lo=5.0):
    """Sup-type constants of the far-field expansion over [r_lo, r_max].

    Returns a dict with sup r^4|w''|, sup r|r^3 w' - 1|,
    sup r^4|w - 1 + 1/(2 r^2)|, the fitted C in
    |w - (1 - 1/(2r^2))| <= C/r^4 on [r_max/2, r_max], and the T column.
    """
    r = p.r_grid
    sel = (r >= r_lo) & (r <= p.r_max)
    rs = r[sel]
    rep = {
        "sup_r4_w2": float(np.max(rs ** 4 * np.abs(p.w2[sel]))),
        "sup_r_r3w1": float(np.max(rs * np.abs(rs ** 3 * p.w1[sel] - 1))),
        "sup_r4_wdev": float(np.max(rs ** 4 * np.abs(p.w[sel] - 1 + 0.5 / rs ** 2))),
    }
    half = (r >= p.r_max / 2) & (r < p.r_max)
    rh = r[half]
    rep["C_fit"] = float(np.max(rh ** 4 * np.abs(p.w[half] - 1 + 0.5 / rh ** 2)))
    rep["T_max_interior"] = float(np.max(p.T()[1:-1]))
    rep["r_lo"] = float(r_lo)
    rep["r_max"] = p.r_max
    return rep


def profile_to_csv(p, path):
    data = np.column_stack([p.r_grid, p.w, p.w1, p.w2])
    np.savetxt(path, data, delimiter=",", header="r,w,wp,wpp", comments="",
               fmt="%.17g")


_MAGIC = b"GLPROF1\n"


def save_profile(p, path):
    """Binary cache (little endian): magic, uint64 node count, uint64
    polynomial length, 3 f64 scalars (alpha, r_max, residual), the core
    polynomial, then the columns r, w, w', w''."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<QQ", p.n_nodes, p.core_poly.size))
        fh.write(struct.pack("<3d", p.alpha_slope, p.r_max, p.bvp_residual))
        fh.write(np.ascontiguousarray(p.core_poly, dtype="<f8").tobytes())
        for col in (p.r_grid, p.w, p.w1, p.w2):
            fh.write(np.ascontiguousarray(col, dtype="<f8").tobytes())


def load_profile(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError("not a GLPROF1 file")
        n, k = struct.unpack("<QQ", fh.read(16))
        alpha, r_max, res = struct.unpack("<3d", fh.read(24))
        coef = np.frombuffer(fh.read(8 * k), dtype="<f8").astype(float)
        cols = [np.frombuffer(fh.read(8 * n), dtype="<f8").astype(float)
                for _ in range(4)]
    return _rebuild(*cols, alpha, r_max, res, coef)


_DEFAULT = {}


def default_profile():
    """Cached profile used by the field modules (r_max=40, 8000 nodes)."""
    if "p" not in _DEFAULT:
        _DEFAULT["p"] = solve_profile(40.0, 8000, 1e-10)
    return _DEFAULT["p"]
