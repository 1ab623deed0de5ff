import math

import numpy as np
import pytest

from glhelix.fields import ComplexField, make_grid, two_vortex, vortex_factor
from glhelix.norms import NormParams
from glhelix.operators import compute_error
from glhelix.reduction import (R_tilde, compute_a0, compute_a0_a1, compute_a1,
                               grid_coefficient, orthogonality_defect,
                               projection_cstar, reduced_coefficient,
                               solve_reduced)


@pytest.fixture(scope="module")
def cstar(prof):
    return projection_cstar(prof)


def test_cstar_order_one(cstar):
    assert 0.1 < cstar < 10


def test_cstar_two_quadratures(prof, cstar):
    assert abs(projection_cstar(prof, method="cartesian") - cstar) <= 1e-6


def test_cstar_radius_independent(prof, cstar):
    assert projection_cstar(prof, R=8.0) == cstar
    assert abs(projection_cstar(prof, method="cartesian", R=4.0)
               - projection_cstar(prof, method="cartesian", R=8.0)) <= 1e-12


@pytest.fixture(scope="module")
def fine(prof):
    cfg = two_vortex(0.2, 1.0)
    return cfg, make_grid(cfg, h_max=0.05)


def _psi_from_phi(cfg, prof, g, key):
    a = vortex_factor(prof, g.X, g.Y, cfg.centers[0], 1, order=1)
    b = vortex_factor(prof, g.X, g.Y, cfg.centers[1], 1, order=0)
    # phi = i W^a psi, so V psi = W^b phi / i
    reg = -1j * b["W"] * a[key]
    return ComplexField(g, np.zeros(g.shape, dtype=complex), cfg, "perturbation", regular=reg)


def test_defect_of_Wx2_vanishes(prof, fine):
    cfg, g = fine
    assert abs(orthogonality_defect(_psi_from_phi(cfg, prof, g, "Wy"), cfg, prof)) <= 1e-10


def test_defect_of_Wx1_is_cstar(prof, fine, cstar):
    cfg, g = fine
    d = orthogonality_defect(_psi_from_phi(cfg, prof, g, "Wx"), cfg, prof)
    assert d == pytest.approx(cstar, rel=1e-3)


def test_a1_dual_quadrature(prof):
    for eps in (0.1, 0.05):
        assert abs(compute_a1(prof, eps) - compute_a1(prof, eps, method="quad")) <= 1e-6


def test_a1_trend_towards_pi(prof):
    vals = [compute_a1(prof, e, method="quad") for e in (0.1, 0.03, 0.01, 0.003)]
    assert np.all(np.diff(vals) > 0)
    assert vals[-1] < math.pi


def test_R_tilde():
    assert R_tilde(0.1) == pytest.approx(0.5 / (0.1 * math.sqrt(math.log(10))))


def test_a0_stable_in_d_hat(prof):
    vals = [compute_a0(prof, 0.05, dh) for dh in (0.5, 0.8, 1.0, 1.5, 2.0)]
    assert min(vals) > 0
    assert max(vals) / min(vals) <= 1.1 ** 2
    assert all(abs(v / vals[2] - 1) <= 0.1 for v in vals)


def test_a0_a1_positive_across_eps(prof):
    a0s = []
    for eps in (0.1, 0.05, 0.025):
        a0, a1 = compute_a0_a1(prof, eps, 1.0)
        assert a0 > 0 and a1 > 0
        a0s.append(a0)
    assert max(a0s) / min(a0s) < 2


def test_sign_change(prof, cstar):
    lo = reduced_coefficient(two_vortex(0.05, 0.2), prof, cstar).c
    hi = reduced_coefficient(two_vortex(0.05, 5.0), prof, cstar).c
    assert lo > 0 > hi


def test_modulus_term_small(prof, cstar):
    ratios = []
    for eps in (0.1, 0.05, 0.025):
        co = reduced_coefficient(two_vortex(eps, 1.0), prof, cstar)
        ratios.append(abs(co.B0_mod) / (eps * math.sqrt(abs(math.log(eps)))))
    assert ratios[0] > ratios[1] > ratios[2]


@pytest.mark.xfail(strict=True, reason="B1 / (d eps sqrt L a1) is 1.34 at eps = 0.05; the "
                   "o(eps sqrt L) remainder is not small at this eps")
def test_B1_leading_order(prof, cstar):
    eps = 0.05
    co = reduced_coefficient(two_vortex(eps, 1.0), prof, cstar)
    ratio = co.B1 / (eps * math.sqrt(abs(math.log(eps))) * compute_a1(prof, eps))
    assert 0.8 <= ratio <= 1.2


def test_c_semi_analytic_vs_fd(prof, cstar):
    cfg = two_vortex(0.2, 1.0)
    gaps = []
    for h in (0.2, 0.1):
        g = make_grid(cfg, h_max=h)
        ep = compute_error(cfg, prof, g)
        a = grid_coefficient(cfg, prof, g, ep.E.values, cstar)
        b = grid_coefficient(cfg, prof, g, np.nan_to_num(ep.E_fd), cstar)
        gaps.append(abs(a - b))
    assert gaps[1] < 0.35 * gaps[0]


def test_grid_vs_polar_coefficient(prof, cstar):
    cfg = two_vortex(0.2, 1.0)
    g = make_grid(cfg, h_max=0.1)
    a = grid_coefficient(cfg, prof, g, compute_error(cfg, prof, g).E.values, cstar)
    b = reduced_coefficient(cfg, prof, cstar).c
    assert a == pytest.approx(b, rel=2e-2, abs=1e-3)


def test_solve_reduced_bracket(prof):
    rep = solve_reduced(0.05, prof, tol=1e-10)
    assert rep.converged and 0.2 < rep.d0 < 5
    a, b = rep.bracket
    assert b - a <= 2e-10 * (5.0 - 0.2)
    assert rep.a0 > 0 and rep.a1 > 0
    assert rep.reference == pytest.approx(math.sqrt(rep.a0 / rep.a1))
    assert "rel_gap" in rep.to_json()


def test_solve_reduced_no_root(prof):
    rep = solve_reduced(0.05, prof, c_fun=lambda d: 1.0 + d)
    assert not rep.converged and rep.notes


def test_Wx2x2_orthogonal_to_Wx1(prof):
    from glhelix.reduction import _polar_nodes
    P, T, Wq = _polar_nodes(8.0)
    F = vortex_factor(prof, P * np.cos(T), P * np.sin(T), 0j, 1)
    val = np.sum(np.real(F["Wyy"] * np.conj(F["Wx"])) * Wq)
    assert abs(val) <= 1e-10
