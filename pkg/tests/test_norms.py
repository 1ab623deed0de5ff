import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from glhelix.fields import ComplexField, build_ansatz, make_grid, two_vortex
from glhelix.norms import (NormError, NormParams, norm_star, norm_star_star,
                           seminorm_sharp, seminorm_sharpsharp)

NORMS = (norm_star_star, norm_star, seminorm_sharp, seminorm_sharpsharp)


@pytest.fixture(scope="module")
def setup01(prof):
    cfg = two_vortex(0.1, 1.0)
    g = make_grid(cfg)
    return cfg, g, build_ansatz(cfg, prof, g)


def _rhos(g, cfg):
    return [np.abs(g.Z - c) for c in cfg.centers]


def _field(g, cfg, seed):
    r = np.random.default_rng(seed)
    a, b, c = r.uniform(0.2, 1.0, 3)
    vals = 1e-2 * (np.sin(a * g.X) * np.cos(b * g.Y) + 1j * np.cos(c * g.X * g.Y / 10))
    return ComplexField(g, vals, cfg, "residual")


def test_R_eps_clamped():
    p = NormParams()
    eps = 0.2
    free = 0.25 / (eps * math.sqrt(math.log(5)))
    assert p.R_eps(eps, 100.0) == pytest.approx(free)
    assert p.R_eps(eps, 1.0) == 0.5
    assert NormParams(alpha0=1.0).effective_alpha0(eps, 1.0) < 1.0
    with pytest.raises(NormError):
        NormParams(alpha=1.5)


def test_weight_cancellation_outer(setup01):
    cfg, g, V = setup01
    eps, s = cfg.eps, 0.5
    r1, r2 = _rhos(g, cfg)
    with np.errstate(divide="ignore"):
        vals = (r1 ** -2 + r2 ** -2 + eps ** 2) + 1j * (r1 ** (s - 2) + r2 ** (s - 2) + eps ** (s - 2))
    rep = norm_star_star(ComplexField(g, vals, cfg, "residual"), base=V)
    assert rep["outer_re"] == pytest.approx(1.0, abs=1e-12)
    assert rep["outer_im"] == pytest.approx(1.0, abs=1e-12)


def test_real_constant_outer(two02):
    cfg, g, V = two02
    c = 0.3
    rep = norm_star_star(ComplexField(g, np.full(g.shape, c, dtype=complex), cfg, "residual"),
                         base=V)
    top = c / cfg.eps ** 2
    assert 0.8 * top < rep["outer_re"] <= top
    assert rep["outer_im"] == 0.0


def test_star_zeroth_piece(setup01):
    cfg, g, V = setup01
    eps, s = cfg.eps, 0.5
    r1, r2 = _rhos(g, cfg)
    vals = 1j * (r1 ** (s - 2) + r2 ** (s - 2) + eps ** (s - 2))
    rep = norm_star(ComplexField(g, vals, cfg, "perturbation"), base=V)
    assert rep["sup_2"] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("fn", NORMS)
def test_zero_field(two02, fn):
    cfg, g, V = two02
    rep = fn(ComplexField(g, np.zeros(g.shape, dtype=complex), cfg, "residual"),
             NormParams(alpha0=1.0), V)
    assert rep.total == 0.0


def test_sharpsharp_weight(setup01):
    cfg, g, V = setup01
    p = NormParams(alpha0=1.0)
    r1, r2 = _rhos(g, cfg)
    vals = np.where(r1 < 2 * p.R_eps(cfg.eps, cfg.d_tilde), 1 / r1, 0.0).astype(complex)
    rep = seminorm_sharpsharp(ComplexField(g, vals, cfg, "residual"), p, V)
    R = rep.meta["R_eps"]
    assert 1 - 2 * R / cfg.d_tilde <= rep["outer_re"] <= 1.0


def test_sharp_log_weight(setup01):
    cfg, g, V = setup01
    p = NormParams(alpha0=1.0)
    R = p.R_eps(cfg.eps, cfg.d_tilde)
    r1, r2 = _rhos(g, cfg)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(r1 < 2 * R, r1 * np.log(2 * R / r1), 0.0)
    rep = seminorm_sharp(ComplexField(g, u.astype(complex), cfg, "perturbation"), p, V)
    # the zeroth-order term alone is at most 1; the gradient term adds a bounded amount
    with np.errstate(divide="ignore", invalid="ignore"):
        w1 = r1 * np.log(2 * R / r1) + r2 * np.log(2 * R / r2)
        lower = np.nanmax(np.where((r1 > 2) & (r1 < R), u / w1, np.nan))
    assert rep["sharp_1"] >= lower
    assert np.isfinite(rep["sharp_1"])


def test_missing_base(two02):
    cfg, g, V = two02
    f = ComplexField(g, np.ones(g.shape, dtype=complex), cfg, "residual")
    with pytest.raises(NormError):
        norm_star_star(f)
    with pytest.raises(NormError):
        norm_star_star(ComplexField(g, f.values))


def test_report_provenance(two02):
    cfg, g, V = two02
    rep = norm_star_star(_field(g, cfg, 0), base=V)
    assert rep.meta["params"]["alpha0"] == 0.25
    assert "R_eps" in rep.meta and "holder" in rep.meta
    assert rep.total == pytest.approx(sum(v for k, v in rep.pieces.items()
                                          if k.startswith("core") or k.startswith("holder")
                                          or k == "outer"))
    assert "total" in rep.table()


@settings(max_examples=8, deadline=None)
@given(lam=st.floats(-5, 5).filter(lambda x: abs(x) > 1e-3), seed=st.integers(0, 50))
def test_homogeneity(two02, lam, seed):
    cfg, g, V = two02
    f = _field(g, cfg, seed)
    p = NormParams(alpha0=1.0)
    for fn in NORMS:
        a = fn(f, p, V).total
        b = fn(f.copy_with(lam * f.values), p, V).total
        assert b == pytest.approx(abs(lam) * a, rel=1e-10)


@settings(max_examples=8, deadline=None)
@given(s1=st.integers(0, 50), s2=st.integers(51, 100))
def test_triangle(two02, s1, s2):
    cfg, g, V = two02
    f, h = _field(g, cfg, s1), _field(g, cfg, s2)
    p = NormParams(alpha0=1.0)
    for fn in NORMS:
        tot = fn(f.copy_with(f.values + h.values), p, V).total
        assert tot <= fn(f, p, V).total + fn(h, p, V).total + 1e-12


def test_refinement_monotone(prof):
    # nested grids: the fine node set contains the coarse one
    cfg = two_vortex(0.2, 1.0)
    gc = make_grid(cfg, m=7)
    gf = make_grid(cfg, m=21)
    vals = []
    for g in (gc, gf):
        f = ComplexField(g, np.exp(-np.abs(g.Z) ** 2 / 50) * (1 + 0.5j * np.sin(g.X)),
                         cfg, "residual")
        vals.append(norm_star_star(f, base=build_ansatz(cfg, prof, g)))
    for k in ("outer_re", "outer_im", "outer"):
        assert vals[1][k] >= vals[0][k] - 1e-14
