"""Vortex filaments as periodic curves and their logarithmic energy.

A filament configuration is a set of 2 pi-periodic curves f_k(t) with
degrees d_k = +-1, stored as truncated Fourier series.  The energy is

    W_eps(f) = pi int_0^{2pi} [ |log eps| / 2 sum_k |f_k'|^2
                               - sum_{j != k} d_j d_k log|f_j - f_k| ] dt

and in the rescaled variables f~ = sqrt|log eps| f its critical points
solve

    -f~_k'' = 2 sum_{i != k} d_i d_k (f~_k - f~_i) / |f~_k - f~_i|^2 .

All integrals use the trapezoidal rule on equispaced collocation points,
which is spectrally accurate for analytic periodic curves.
"""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np


class CollisionError(ValueError):
    pass


COLLISION_DIST = 1e-8


@dataclass
class FilamentTrajectory:
    """n periodic curves, coefficient array shape (n, 2 m_max + 1).

    Column q + m_max holds the coefficient of exp(i q t), q = -m..m.
    """
    coeffs: np.ndarray
    degrees: np.ndarray
    convention: str = "rescaled"
    eps: float = None
    n_colloc: int = 64
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coeffs = np.atleast_2d(np.asarray(self.coeffs, dtype=complex))
        self.degrees = np.asarray(self.degrees, dtype=int)
        if self.coeffs.shape[1] % 2 != 1:
            raise ValueError("coefficient rows need odd length 2 m + 1")
        if self.coeffs.shape[0] != self.degrees.size:
            raise ValueError("one degree per curve")
        if not np.all(np.abs(self.degrees) == 1):
            raise ValueError("degrees must be +1 or -1")
        if self.convention not in ("rescaled", "physical"):
            raise ValueError("convention must be 'rescaled' or 'physical'")
        if self.n_colloc < self.coeffs.shape[1]:
            raise ValueError("need at least 2 m + 1 collocation points")

    @property
    def n(self):
        return self.coeffs.shape[0]

    @property
    def m_max(self):
        return (self.coeffs.shape[1] - 1) // 2

    @property
    def q(self):
        return np.arange(-self.m_max, self.m_max + 1)

    def times(self, nt=None):
        nt = nt or self.n_colloc
        return 2 * np.pi * np.arange(nt) / nt

    def sample(self, t=None, deriv=0):
        """Values of the curves (or a t-derivative) at times t, shape (n, len t)."""
        t = self.times() if t is None else np.asarray(t, dtype=float)
        q = self.q
        c = self.coeffs * (1j * q) ** deriv
        return c @ np.exp(1j * q[:, None] * t[None, :])

    @classmethod
    def from_function(cls, fun, degrees, m_max=16, n_colloc=64, **kw):
        """Project fun(t) -> (n, len t) onto modes |q| <= m_max."""
        t = 2 * np.pi * np.arange(n_colloc) / n_colloc
        vals = np.atleast_2d(fun(t))
        F = np.fft.fft(vals, axis=1) / n_colloc
        q = np.arange(-m_max, m_max + 1)
        coeffs = F[:, q % n_colloc]
        return cls(coeffs, degrees, n_colloc=n_colloc, **kw)

    def with_coeffs(self, coeffs):
        return FilamentTrajectory(coeffs, self.degrees.copy(), self.convention,
                                  self.eps, self.n_colloc, dict(self.meta))

    def rescaled(self, eps=None):
        """The same configuration in the rescaled convention."""
        if self.convention == "rescaled":
            return self
        e = eps if eps is not None else self.eps
        s = math.sqrt(abs(math.log(e)))
        return FilamentTrajectory(self.coeffs * s, self.degrees, "rescaled", e,
                                  self.n_colloc, dict(self.meta))

    def physical(self, eps=None):
        if self.convention == "physical":
            return self
        e = eps if eps is not None else self.eps
        if e is None:
            raise ValueError("eps needed to convert to the physical convention")
        s = math.sqrt(abs(math.log(e)))
        return FilamentTrajectory(self.coeffs / s, self.degrees, "physical", e,
                                  self.n_colloc, dict(self.meta))

    def min_distance(self, nt=None):
        f = self.sample(self.times(nt))
        best = np.inf
        for j in range(self.n):
            for k in range(j + 1, self.n):
                best = min(best, float(np.min(np.abs(f[j] - f[k]))))
        return best

    # ---- IO
    def to_dict(self):
        return {"degrees": self.degrees.tolist(), "m_max": self.m_max,
                "convention": self.convention, "eps": self.eps,
                "n_colloc": self.n_colloc,
                "coeffs": [[[float(c.real), float(c.imag)] for c in row]
                           for row in self.coeffs],
                "meta": self.meta}

    @classmethod
    def from_dict(cls, d):
        coeffs = np.array([[complex(a, b) for a, b in row] for row in d["coeffs"]])
        return cls(coeffs, d["degrees"], d.get("convention", "rescaled"),
                   d.get("eps"), d.get("n_colloc", 64), d.get("meta", {}))

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_csv(self, path, nt=None):
        t = self.times(nt)
        f = self.sample(t)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            head = ["t"]
            for k in range(self.n):
                head += ["re_f%d" % (k + 1), "im_f%d" % (k + 1)]
            w.writerow(head)
            for i, ti in enumerate(t):
                row = ["%.17g" % ti]
                for k in range(self.n):
                    row += ["%.17g" % f[k, i].real, "%.17g" % f[k, i].imag]
                w.writerow(row)


# --------------------------------------------------------------------------
# equilibria

def polygon_equilibrium(n, m_max=16, n_colloc=64):
    """f~_k = sqrt(n-1) e^{it} e^{2 i (k-1) pi / n}, all degrees +1."""
    if n < 2:
        raise ValueError("need n >= 2")
    coeffs = np.zeros((n, 2 * m_max + 1), dtype=complex)
    coeffs[:, m_max + 1] = math.sqrt(n - 1) * np.exp(2j * np.pi * np.arange(n) / n)
    return FilamentTrajectory(coeffs, np.ones(n, dtype=int), "rescaled",
                              n_colloc=n_colloc, meta={"family": "polygon"})


def centered_equilibrium(n, m_max=16, n_colloc=64):
    """Degree -1 filament at the origin and n-1 unit filaments on a ring
    of radius sqrt(n-4): g~_k = sqrt(n-4) e^{it} e^{2 i (k-1) pi/(n-1)}."""
    if n < 5:
        raise ValueError("need n >= 5")
    coeffs = np.zeros((n, 2 * m_max + 1), dtype=complex)
    coeffs[1:, m_max + 1] = math.sqrt(n - 4) * np.exp(2j * np.pi * np.arange(n - 1) / (n - 1))
    deg = np.ones(n, dtype=int)
    deg[0] = -1
    return FilamentTrajectory(coeffs, deg, "rescaled", n_colloc=n_colloc,
                              meta={"family": "center"})


# --------------------------------------------------------------------------
# energy, residual, gradient

def _pair_check(f):
    n = f.shape[0]
    for j in range(n):
        for k in range(j + 1, n):
            d = np.min(np.abs(f[j] - f[k]))
            if d < COLLISION_DIST:
                raise CollisionError("filaments %d and %d collide (distance %.3e)"
                                     % (j + 1, k + 1, d))


def renormalized_energy(traj, eps):
    """W_eps of the configuration (either convention; eps fixes the scale)."""
    L = abs(math.log(eps))
    tr = traj.physical(eps) if traj.convention == "rescaled" else traj
    t = tr.times()
    f = tr.sample(t)
    fp = tr.sample(t, deriv=1)
    _pair_check(f)
    kin = 0.5 * L * np.sum(np.abs(fp) ** 2, axis=0)
    inter = np.zeros(t.size)
    d = tr.degrees
    for j in range(tr.n):
        for k in range(tr.n):
            if j != k:
                inter += d[j] * d[k] * np.log(np.abs(f[j] - f[k]))
    w = 2 * np.pi / t.size
    return float(np.pi * np.sum(kin - inter) * w)


def residual_samples(traj, t=None):
    """r_k(t) = -f~_k'' - 2 sum_{i != k} d_i d_k (f~_k - f~_i)/|f~_k - f~_i|^2."""
    if traj.convention != "rescaled":
        raise ValueError("ode_residual works in the rescaled convention")
    t = traj.times() if t is None else t
    f = traj.sample(t)
    _pair_check(f)
    r = -traj.sample(t, deriv=2)
    d = traj.degrees
    for k in range(traj.n):
        for i in range(traj.n):
            if i != k:
                u = f[k] - f[i]
                r[k] -= 2 * d[i] * d[k] * u / np.abs(u) ** 2
    return r


def ode_residual(traj, t=None):
    """(max |r_k| over curves and collocation points, per-curve residuals)."""
    r = residual_samples(traj, t)
    return float(np.max(np.abs(r))), r


def energy_gradient(traj):
    """Gradient of W (rescaled convention) with respect to the real and
    imaginary parts of every Fourier coefficient, flattened as
    [Re c, Im c].  Equals pi * <r, delta f> integrated in t.
    """
    t = traj.times()
    r = residual_samples(traj, t)
    q = traj.q
    E = np.exp(1j * q[:, None] * t[None, :])          # (2m+1, nt)
    w = 2 * np.pi / t.size
    # d f_k / d Re c_{k,q} = e^{iqt}, d / d Im c = i e^{iqt}
    g_re = np.pi * w * np.real(r @ np.conj(E).T)
    g_im = np.pi * w * np.real((r @ np.conj(1j * E).T))
    return np.concatenate([g_re.ravel(), g_im.ravel()])


def energy_rescaled(traj):
    """W in the rescaled variables, without the constant log|log eps| term:
    pi int [1/2 sum |f~'|^2 - sum_{j != k} d_j d_k log|f~_j - f~_k|] dt."""
    t = traj.times()
    f = traj.sample(t)
    fp = traj.sample(t, deriv=1)
    _pair_check(f)
    val = 0.5 * np.sum(np.abs(fp) ** 2, axis=0)
    d = traj.degrees
    for j in range(traj.n):
        for k in range(traj.n):
            if j != k:
                val -= d[j] * d[k] * np.log(np.abs(f[j] - f[k]))
    return float(np.pi * np.sum(val) * 2 * np.pi / t.size)


# --------------------------------------------------------------------------
# critical points

def _pack(c):
    return np.concatenate([c.real.ravel(), c.imag.ravel()])


def _unpack(x, shape):
    n = x.size // 2
    return (x[:n] + 1j * x[n:]).reshape(shape)


def _jacobian(traj, t):
    """Real Jacobian of the stacked residual [Re r; Im r] in the packed
    coefficients.  Uses d(u/|u|^2) = -conj(du) / conj(u)^2."""
    f = traj.sample(t)
    n, nt = f.shape
    q = traj.q
    nq = q.size
    E = np.exp(1j * q[:, None] * t[None, :])
    d = traj.degrees
    # K[k, i] = coefficient of conj(delta f_k - delta f_i) in delta r_k
    K = np.zeros((n, n, nt), dtype=complex)
    for k in range(n):
        for i in range(n):
            if i != k:
                u = f[k] - f[i]
                K[k, i] = 2 * d[i] * d[k] / np.conj(u) ** 2
    npar = 2 * n * nq
    J = np.zeros((2 * n * nt, npar))
    for part in (0, 1):
        for a in range(n):
            for qi in range(nq):
                df = E[qi] * (1j if part else 1.0)
                dr = np.zeros((n, nt), dtype=complex)
                dr[a] += (q[qi] ** 2) * df
                for k in range(n):
                    if k == a:
                        dr[k] += np.sum(K[k], axis=0) * np.conj(df)
                    else:
                        dr[k] -= K[k, a] * np.conj(df)
                col = part * n * nq + a * nq + qi
                J[:, col] = np.concatenate([dr.real.ravel(), dr.imag.ravel()])
    return J


def _pins(traj, anchor):
    """Gauge rows: Im f~_1(0) = 0 and sum_k f~_k(0) = anchor."""
    n, nq = traj.coeffs.shape
    rows = []
    vals = []
    row = np.zeros(2 * n * nq)
    row[n * nq:n * nq + nq] = 1.0          # Im f_1(0) = sum Im c_{1,q}
    rows.append(row)
    vals.append(float(np.sum(traj.coeffs[0]).imag))
    for part in (0, 1):
        row = np.zeros(2 * n * nq)
        row[part * n * nq:(part + 1) * n * nq] = 1.0
        s = complex(np.sum(traj.coeffs))
        rows.append(row)
        vals.append((s.imag if part else s.real) - (anchor.imag if part else anchor.real))
    return np.array(rows), np.array(vals)


def find_critical_point(initial, tol=1e-10, max_iter=50):
    """Gauss-Newton on the collocated Euler-Lagrange residual with gauge
    pins, Levenberg damping when a full step does not reduce the residual.

    Returns a trajectory; meta['converged'] is False when the iteration
    stagnates (the best iterate is returned).
    """
    traj = initial.rescaled() if initial.convention == "physical" else initial
    t = traj.times()
    shape = traj.coeffs.shape
    anchor = complex(np.sum(traj.coeffs))

    def resvec(tr):
        r = residual_samples(tr, t)
        pr, pv = _pins(tr, anchor)
        return np.concatenate([r.real.ravel(), r.imag.ravel(), pv]), float(np.max(np.abs(r)))

    try:
        F, err = resvec(traj)
    except CollisionError:
        raise
    history = [err]
    steps = 0
    lam = 0.0
    best = (err, traj)
    while err > tol and steps < max_iter:
        J = _jacobian(traj, t)
        P, _ = _pins(traj, anchor)
        JJ = np.vstack([J, P])
        x = _pack(traj.coeffs)
        accepted = False
        for attempt in range(12):
            if lam == 0.0:
                dx = np.linalg.lstsq(JJ, -F, rcond=None)[0]
            else:
                A = JJ.T @ JJ + lam * np.eye(JJ.shape[1])
                dx = np.linalg.solve(A, -JJ.T @ F)
            alpha = 1.0
            while alpha > 1e-3:
                cand = traj.with_coeffs(_unpack(x + alpha * dx, shape))
                try:
                    if cand.min_distance() < COLLISION_DIST:
                        raise CollisionError("collision")
                    Fn, errn = resvec(cand)
                except CollisionError:
                    alpha *= 0.5
                    continue
                break
            else:
                lam = max(1e-6, 10 * lam)
                continue
            if np.linalg.norm(Fn) < np.linalg.norm(F):
                traj, F, err = cand, Fn, errn
                lam = lam / 10 if lam > 1e-6 else 0.0
                accepted = True
                break
            lam = max(1e-6, 10 * lam)
        steps += 1
        history.append(err)
        if err < best[0]:
            best = (err, traj)
        if not accepted:
            break
    out = best[1].with_coeffs(best[1].coeffs)
    out.meta.update({"converged": bool(best[0] <= tol), "residual": best[0],
                     "iterations": steps, "history": history})
    return out


def gauge_distance(a, b):
    """Distance between two trajectories modulo a global rotation/time shift.

    For rigidly rotating orbits these coincide; the phase is fitted by
    least squares on the samples.
    """
    fa, fb = a.sample(), b.sample()
    s = np.vdot(fa.ravel(), fb.ravel())
    ph = s / abs(s) if abs(s) > 0 else 1.0
    return float(np.max(np.abs(fa * ph - fb)))
