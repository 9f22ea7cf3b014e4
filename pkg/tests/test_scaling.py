"""Scaling action, closed-form Laplace transforms, and the density ratio."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypersigma import (
    FieldConfig,
    GeneratorSet,
    ScaleParams,
    compute_beta,
    compute_theta,
    h_beta,
    laplace_closed_form,
    radon_nikodym,
    rescale_weights,
    rho_density,
    scale_fields,
    single_edge,
    theta_conditional_covariance,
    triangle,
)

pos_floats = st.floats(0.6, 1.6, allow_nan=False)
b_floats = st.floats(-0.8, 0.8, allow_nan=False)


def test_scale_params_validation():
    with pytest.raises(ValueError):
        ScaleParams(np.array([-1.0, 1.0]), np.zeros(2))
    with pytest.raises(ValueError):
        ScaleParams(np.array([1.0, 2.0]), np.zeros(2))  # pinned a != 1


def test_identity_is_neutral():
    p = ScaleParams.identity(3)
    cfg = FieldConfig(np.array([0.4, -0.2, 0.0]), np.array([0.1, 0.3, 0.0]))
    out = scale_fields(p, cfg)
    assert np.abs(out.u - cfg.u).max() == 0.0
    assert np.abs(out.s - cfg.s).max() == 0.0


def test_log_scale_shifts_u():
    p = ScaleParams(np.array([math.e, 1.0]), np.zeros(2))
    cfg = FieldConfig(np.zeros(2), np.zeros(2))
    out = scale_fields(p, cfg)
    assert out.u[0] == pytest.approx(1.0, abs=1e-14)


@settings(max_examples=50, deadline=None)
@given(pos_floats, b_floats, st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_forward_inverse_round_trip(a1, b1, u1, s1):
    p = ScaleParams(np.array([a1, 1.0]), np.array([b1, 0.0]))
    cfg = FieldConfig(np.array([u1, 0.0]), np.array([s1, 0.0]))
    back = scale_fields(p, scale_fields(p, cfg, "forward"), "inverse")
    assert np.abs(back.u - cfg.u).max() < 1e-13
    assert np.abs(back.s - cfg.s).max() < 1e-13


@settings(max_examples=50, deadline=None)
@given(pos_floats, b_floats, pos_floats, b_floats, st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_group_law_matches_composed_action(a1, b1, a2, b2, u1, s1):
    p1 = ScaleParams(np.array([a1, 1.0]), np.array([b1, 0.0]))
    p2 = ScaleParams(np.array([a2, 1.0]), np.array([b2, 0.0]))
    cfg = FieldConfig(np.array([u1, 0.0]), np.array([s1, 0.0]))
    lhs = scale_fields(p1, scale_fields(p2, cfg))
    rhs = scale_fields(p1.compose(p2), cfg)
    assert np.abs(lhs.u - rhs.u).max() < 1e-12
    assert np.abs(lhs.s - rhs.s).max() < 1e-12


def test_compose_with_inverse_is_identity():
    p = ScaleParams(np.array([1.3, 0.8, 1.0]), np.array([0.4, -0.2, 0.0]))
    q = p.compose(p.inverse())
    assert np.abs(q.a - 1.0).max() < 1e-14
    assert np.abs(q.b).max() < 1e-14


def test_rescale_weights_action_property():
    g = triangle(1.2, 0.8, 1.5)
    p1 = ScaleParams(np.array([1.4, 0.7, 1.0]), np.zeros(3))
    p2 = ScaleParams(np.array([0.9, 1.2, 1.0]), np.zeros(3))
    lhs = rescale_weights(p2, rescale_weights(p1, g))
    p12 = ScaleParams(p1.a * p2.a, np.zeros(3))
    rhs = rescale_weights(p12, g)
    assert np.abs(lhs.weights - rhs.weights).max() < 1e-12
    ident = rescale_weights(ScaleParams.identity(3), g)
    assert np.abs(ident.weights - g.weights).max() == 0.0


def test_laplace_closed_form_frozen_value():
    """Single edge, a = 1.2, b = 0.3: exp(-0.2) / 1.2 (b drops against the
    pinned entry)."""
    g = single_edge()
    p = ScaleParams(np.array([1.2, 1.0]), np.array([0.3, 0.0]))
    val = laplace_closed_form(g, p)
    assert val == pytest.approx(math.exp(-0.2) / 1.2, rel=1e-14)
    assert val == pytest.approx(0.68228, abs=5e-6)


def test_laplace_closed_form_identity_params():
    g = triangle()
    assert laplace_closed_form(g, ScaleParams.identity(3)) == pytest.approx(1.0, rel=1e-14)


def test_laplace_closed_form_grassmann_body_matches_real():
    g = single_edge()
    algebra = GeneratorSet(["cb", "c"])
    p = ScaleParams(np.array([1.2, 1.0]), np.array([0.3, 0.0]))
    chibar = [algebra.gen("cb") * 0.8, algebra.zero()]
    chi = [algebra.gen("c") * 0.6, algebra.zero()]
    out = laplace_closed_form(g, p, chibar, chi, algebra)
    assert out.body == pytest.approx(laplace_closed_form(g, p), rel=1e-12)
    # the top coefficient carries the odd pairing through the edge to delta,
    # which vanishes here because the pinned chi components are zero
    top = out.coeffs.get(0b11, 0.0)
    assert top == pytest.approx(0.0, abs=1e-12)


def test_radon_nikodym_matches_density_ratio():
    rng = np.random.default_rng(7)
    g = triangle(1.1, 0.9, 1.3)
    p = ScaleParams(np.array([1.25, 0.85, 1.0]), np.array([0.3, -0.4, 0.0]))
    g2 = rescale_weights(p, g)
    for _ in range(200):
        u = np.concatenate([0.8 * rng.standard_normal(2), [0.0]])
        s = np.concatenate([0.8 * rng.standard_normal(2), [0.0]])
        cfg = FieldConfig(u, s)
        lhs = radon_nikodym(g, p, cfg)
        rhs = rho_density(g2, scale_fields(p, cfg, "inverse")) * np.prod(p.a[:-1]) / rho_density(g, cfg)
        assert lhs == pytest.approx(rhs, rel=1e-10)


def test_theta_conditional_covariance_is_h_beta_block():
    rng = np.random.default_rng(8)
    g = triangle()
    u = np.concatenate([rng.standard_normal(2), [0.0]])
    cov = theta_conditional_covariance(g, u)
    assert np.abs(cov - h_beta(g, u)[:-1, :-1]).max() < 1e-14


def test_tilt_exponent_identity():
    """The density ratio equals the explicit tilt in (beta, theta) divided by
    the closed-form transform value, pointwise."""
    rng = np.random.default_rng(9)
    g = triangle()
    p = ScaleParams(np.array([1.2, 0.9, 1.0]), np.array([0.2, -0.3, 0.0]))
    lap = laplace_closed_form(g, p)
    for _ in range(100):
        u = np.concatenate([rng.standard_normal(2), [0.0]])
        s = np.concatenate([rng.standard_normal(2), [0.0]])
        cfg = FieldConfig(u, s)
        beta = compute_beta(g, u)
        theta = compute_theta(g, u, s)
        tilt = math.exp(-(p.a[:-1] ** 2 + p.b[:-1] ** 2 - 1.0) @ beta - p.b[:-1] @ theta)
        assert radon_nikodym(g, p, cfg) == pytest.approx(tilt / lap, rel=1e-12)
