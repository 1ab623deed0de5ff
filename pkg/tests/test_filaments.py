import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from glhelix.filaments import (CollisionError, FilamentTrajectory,
                               centered_equilibrium, energy_gradient,
                               energy_rescaled, find_critical_point,
                               gauge_distance, ode_residual, polygon_equilibrium,
                               renormalized_energy)


def _direct_residual(z, deg):
    """-f'' - 2 sum d_i d_k (z_k - z_i)/|z_k - z_i|^2 for rigid rotation f = z e^{it}."""
    out = []
    for k in range(len(z)):
        s = sum(deg[i] * deg[k] * (z[k] - z[i]) / abs(z[k] - z[i]) ** 2
                for i in range(len(z)) if i != k)
        out.append(z[k] - 2 * s)
    return np.array(out)


@pytest.mark.parametrize("n", range(2, 9))
def test_polygon_equilibrium(n):
    err, r = ode_residual(polygon_equilibrium(n))
    assert err <= 1e-10
    assert r.shape == (n, 64)


@pytest.mark.parametrize("n", range(5, 10))
def test_centered_equilibrium(n):
    tr = centered_equilibrium(n)
    assert ode_residual(tr)[0] <= 1e-10
    # independent oracle: summation at t = 0 without the spectral machinery
    z0 = tr.sample(np.array([0.0]))[:, 0]
    assert np.max(np.abs(_direct_residual(z0, tr.degrees))) <= 1e-12


def test_polygon_identity_direct():
    # for N points on a ring of radius rho,
    # sum_{j != k} (z_k - z_j)/|z_k - z_j|^2 = (N - 1) z_k / (2 rho^2)
    n, rho = 7, 1.3
    z = rho * np.exp(2j * np.pi * np.arange(n) / n)
    s = sum((z[0] - z[j]) / abs(z[0] - z[j]) ** 2 for j in range(1, n))
    assert s == pytest.approx((n - 1) * z[0] / (2 * rho ** 2), abs=1e-13)


@settings(max_examples=20, deadline=None)
@given(phase=st.floats(0, 2 * np.pi), n=st.integers(2, 6))
def test_rotation_equivariance(phase, n):
    tr = polygon_equilibrium(n)
    bent = tr.with_coeffs(tr.coeffs * 1.1 + 0.05)
    a = ode_residual(bent)[0]
    b = ode_residual(bent.with_coeffs(bent.coeffs * np.exp(1j * phase)))[0]
    assert b == pytest.approx(a, rel=1e-10)


def test_two_vortex_energy_closed_form():
    eps = 0.05
    L = abs(math.log(eps))
    tr = polygon_equilibrium(2)
    tr.eps = eps
    W = renormalized_energy(tr, eps)
    ref = math.pi * 2 * math.pi * (1 - 2 * math.log(2 / math.sqrt(L)))
    assert abs(W - ref) <= 1e-10


def _wobbly(n=3, m=8, nc=64):
    base = polygon_equilibrium(n, m_max=m, n_colloc=nc)

    def fun(t):
        f = base.sample(t)
        return f * (1 + 0.1 * np.cos(t)[None, :]) + 0.05j * np.sin(2 * t)[None, :]
    return FilamentTrajectory.from_function(fun, base.degrees, m_max=m, n_colloc=nc, eps=0.1)


def test_energy_spectral_convergence():
    a = renormalized_energy(_wobbly(m=8, nc=64), 0.1)
    b = renormalized_energy(_wobbly(m=16, nc=128), 0.1)
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


def test_energy_time_shift_invariant():
    tr = _wobbly()
    s = 0.37
    shifted = tr.with_coeffs(tr.coeffs * np.exp(1j * tr.q * s)[None, :])
    assert renormalized_energy(shifted, 0.1) == pytest.approx(renormalized_energy(tr, 0.1),
                                                              abs=1e-12)


def test_gradient_matches_finite_differences(rng):
    tr = _wobbly()
    g = energy_gradient(tr)
    x0 = np.concatenate([tr.coeffs.real.ravel(), tr.coeffs.imag.ravel()])
    n = x0.size // 2
    h = 1e-6
    for _ in range(20):
        d = rng.normal(size=x0.size)
        d /= np.linalg.norm(d)

        def E(x):
            return energy_rescaled(tr.with_coeffs((x[:n] + 1j * x[n:]).reshape(tr.coeffs.shape)))
        fd = (E(x0 + h * d) - E(x0 - h * d)) / (2 * h)
        assert abs(fd - g @ d) <= 1e-8 * max(1.0, abs(fd)) + 1e-7


def test_collision_detected():
    c = np.zeros((2, 3), dtype=complex)
    c[:, 1] = 1.0
    tr = FilamentTrajectory(c, [1, 1])
    with pytest.raises(CollisionError):
        ode_residual(tr)
    with pytest.raises(CollisionError):
        renormalized_energy(tr, 0.1)


def test_bad_degrees():
    with pytest.raises(ValueError):
        FilamentTrajectory(np.zeros((1, 3)), [2])


def test_conventions_roundtrip():
    tr = polygon_equilibrium(3)
    p = tr.physical(0.1)
    assert p.min_distance() == pytest.approx(tr.min_distance() / math.sqrt(math.log(10)))
    assert np.allclose(p.rescaled().coeffs, tr.coeffs)


def test_json_and_csv(tmp_path):
    tr = centered_equilibrium(6)
    tr.to_json(tmp_path / "t.json")
    q = FilamentTrajectory.from_json(tmp_path / "t.json")
    assert np.array_equal(q.coeffs, tr.coeffs) and np.array_equal(q.degrees, tr.degrees)
    tr.to_csv(tmp_path / "t.csv")
    data = np.loadtxt(tmp_path / "t.csv", delimiter=",", skiprows=1)
    assert data.shape == (64, 1 + 2 * 6)


def test_newton_at_equilibrium():
    out = find_critical_point(polygon_equilibrium(4))
    assert out.meta["converged"] and out.meta["iterations"] == 0


def test_newton_scaled_start():
    f0 = polygon_equilibrium(3)
    out = find_critical_point(f0.with_coeffs(1.05 * f0.coeffs))
    assert out.meta["converged"]
    assert gauge_distance(out, f0) <= 1e-8


def test_newton_random_perturbation():
    rng = np.random.default_rng(7)
    f0 = polygon_equilibrium(2)
    pert = np.zeros_like(f0.coeffs)
    m = f0.m_max
    pert[:, m - 2:m + 3] = 0.1 * (rng.normal(size=(2, 5)) + 1j * rng.normal(size=(2, 5))) / 3
    out = find_critical_point(f0.with_coeffs(f0.coeffs + pert))
    assert out.meta["converged"]
    f = out.sample()
    d = np.abs(f[0] - f[1])
    assert np.max(d) - np.min(d) <= 1e-6
