import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from glhelix.fields import (ComplexField, GeometryError, Grid2D, TrackingError,
                            build_ansatz, centered, helical_lift, make_grid,
                            polygon, read_field, single_vortex, track_vortices,
                            two_vortex, vortex_factor, write_field)


def test_two_vortex_positions():
    cfg = two_vortex(0.1, 1.0)
    dt = 1 / (0.1 * math.sqrt(math.log(10)))
    assert cfg.d_tilde == pytest.approx(dt)
    assert sorted(cfg.centers.real) == pytest.approx([-dt, dt])
    assert cfg.total_degree == 2


def test_family_defaults():
    assert polygon(0.1, 4).d_hat == pytest.approx(math.sqrt(3))
    c = centered(0.1, 6)
    assert c.d_hat == pytest.approx(math.sqrt(2))
    assert c.degrees[0] == -1 and c.centers[0] == 0
    assert c.total_degree == 4
    with pytest.raises(ValueError):
        centered(0.1, 4)


def test_grid_symmetric_and_centers_off_nodes():
    cfg = two_vortex(0.1, 1.0)
    g = make_grid(cfg, h_max=0.25)
    assert g.h <= 0.25
    assert np.allclose(g.x1, -g.x1[::-1])
    dist = np.min(np.abs(g.x1 - cfg.d_tilde))
    assert dist == pytest.approx(g.h / 2, rel=1e-9)


def test_config_dict_roundtrip():
    cfg = centered(0.05, 5)
    from glhelix.fields import VortexConfiguration
    assert VortexConfiguration.from_dict(cfg.to_dict()) == cfg


def test_ansatz_symmetry_and_modulus(two02):
    cfg, g, V = two02
    assert V.symmetry_defect() < 1e-12
    assert np.all(np.abs(V.values) <= 1 + 1e-12)


def test_vortex_factor_derivatives_match_fd(prof):
    # derivatives of W against centered differences of its values
    h = 1e-4
    x = np.array([0.3, 1.7, -2.2, 0.05])
    y = np.array([0.4, -0.9, 3.1, -0.02])
    d = vortex_factor(prof, x, y, 0j, 1)
    W = lambda a, b: vortex_factor(prof, a, b, 0j, 1)["W"]
    fx = (W(x + h, y) - W(x - h, y)) / (2 * h)
    fy = (W(x, y + h) - W(x, y - h)) / (2 * h)
    fxx = (W(x + h, y) - 2 * W(x, y) + W(x - h, y)) / h ** 2
    assert np.allclose(d["Wx"], fx, atol=1e-6)
    assert np.allclose(d["Wy"], fy, atol=1e-6)
    assert np.allclose(d["Wxx"], fxx, atol=1e-4)


def test_single_vortex_solves_gl(prof):
    # W(z) satisfies Delta W + (1-|W|^2) W = 0 away from the core
    x = np.array([1.0, 2.5, -3.0])
    y = np.array([0.5, -1.0, 2.0])
    d = vortex_factor(prof, x, y, 0j, 1)
    res = d["Wxx"] + d["Wyy"] + (1 - np.abs(d["W"]) ** 2) * d["W"]
    assert np.max(np.abs(res)) < 1e-5


def test_track_two_vortex(two02):
    cfg, g, V = two02
    found = track_vortices(V)
    assert len(found) == 2
    pos = sorted(p.real for p, _ in found)
    assert pos == pytest.approx([-cfg.d_tilde, cfg.d_tilde], abs=0.5 * g.h)
    assert all(w == 1 for _, w in found)


def test_track_centered_five(prof):
    cfg = centered(0.2, 5)
    g = make_grid(cfg, h_max=0.25)
    found = track_vortices(build_ansatz(cfg, prof, g))
    assert len(found) == 5
    assert sum(w for _, w in found) == 3
    neg = [p for p, w in found if w == -1]
    assert len(neg) == 1 and abs(neg[0]) < g.h


def test_track_no_zeros():
    g = Grid2D.square(4.0, 0.5)
    f = ComplexField(g, np.exp(1j * g.X))
    assert track_vortices(f) == []
    # a node zero at the origin goes through the shifted resampling
    (p, w), = track_vortices(ComplexField(g, g.Z))
    assert w == 1 and abs(p) < g.h
    with pytest.raises(TrackingError):
        track_vortices(ComplexField(g, g.Z - g.L1))


def test_outside_grid_rejected(prof):
    cfg = two_vortex(0.2, 1.0)
    with pytest.raises(GeometryError):
        build_ansatz(cfg, prof, Grid2D.square(4.0, 0.25))


def test_helical_lift_screw_and_period(two02):
    cfg, g, V = two02
    rng = np.random.default_rng(0)
    r = rng.uniform(0.05, 0.3, 20)
    th = rng.uniform(0, 2 * np.pi, 20)
    t = rng.uniform(0, 2 * np.pi, 20)
    s = 0.7
    u = helical_lift(V, cfg, r, th, t)
    us = helical_lift(V, cfg, r, th + s, t + s)
    assert np.max(np.abs(us - np.exp(2j * s) * u)) < 1e-12
    u2 = helical_lift(V, cfg, r, th, t + 2 * np.pi)
    assert np.max(np.abs(u2 - u)) < 1e-10


def test_helical_lift_too_far(two02):
    cfg, g, V = two02
    with pytest.raises(GeometryError):
        helical_lift(V, cfg, np.array([10.0]), np.array([0.0]), np.array([0.0]))


def test_field_roundtrip(two02, tmp_path):
    cfg, g, V = two02
    V.meta["note"] = "x"
    write_field(V, tmp_path / "a.glf")
    W = read_field(tmp_path / "a.glf")
    assert np.array_equal(W.values, V.values)
    assert W.cfg == cfg and W.grid == g and W.kind == V.kind
    write_field(W, tmp_path / "b.glf")
    assert (tmp_path / "a.glf").read_bytes() == (tmp_path / "b.glf").read_bytes()


@settings(max_examples=20, deadline=None)
@given(cx=st.floats(-2, 2), cy=st.floats(-2, 2), deg=st.sampled_from([1, -1]))
def test_single_vortex_tracked(prof, cx, cy, deg):
    g = Grid2D.square(8.0, 0.25)
    c = complex(cx, cy)
    # keep the zero off grid lines
    if min(np.min(np.abs(g.x1 - cx)), np.min(np.abs(g.x2 - cy))) < 1e-3:
        return
    f = build_ansatz(single_vortex(c, deg), prof, g)
    (p, w), = track_vortices(f)
    assert w == deg and abs(p - c) < g.h
