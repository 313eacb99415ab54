"""Transform catalog: affine maps, sphere maps, radial lifts, scalar fields."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bmcheck import (AffineTransform, AxisPolynomial, ComponentView,
                     DimensionMismatch, HarmonicGallery, NotDifferentiableHere,
                     QuadraticForm, RadialLift, RestrictedDomain, SphereMap,
                     affine_field, eikonal_profile, fd_gradient, fd_laplacian,
                     gradient, identity_transform, laplacian, parse_transform)
from bmcheck.transforms import gradient_many, laplacian_many


def test_affine_eval_and_compose():
    f = AffineTransform([[2.0, 0.0], [1.0, 1.0]], [3.0, -1.0])
    x = np.array([3.0, 4.0])
    assert_allclose(f.eval(x), [9.0, 6.0])
    g = AffineTransform([[0.0, 1.0], [1.0, 0.0]])
    fg = f.compose(g)
    assert_allclose(fg.eval(x), f.eval(g.eval(x)))


def test_affine_rejects_wrong_width():
    f = AffineTransform(np.eye(2))
    with pytest.raises(DimensionMismatch):
        f.eval(np.zeros(3))
    with pytest.raises(DimensionMismatch):
        AffineTransform(np.eye(2), np.zeros(3))


def test_affine_field_scalar_interface():
    f = affine_field([0.6, 0.8], 0.25)
    assert f.n_out == 1
    assert f.scalar_eval([1.0, 1.0]) == pytest.approx(1.65)
    X = np.array([[0.0, 0.0], [1.0, 2.0]])
    assert_allclose(f.grad(X), [[0.6, 0.8], [0.6, 0.8]])
    assert_allclose(f.lap(X), [0.0, 0.0])


def test_identity_transform_roundtrip():
    f = identity_transform(3)
    X = np.random.default_rng(0).normal(size=(6, 3))
    assert_allclose(f.eval(X), X)


def test_sphere_rotation_preserves_norm():
    th = 0.7
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    h = SphereMap("rotation", 2, R=R)
    u = np.array([[0.6, 0.8], [1.0, 0.0]])
    out = h.apply(u)
    assert_allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-14)
    assert_allclose(out[1], [np.cos(th), np.sin(th)])


def test_sphere_rotation_demands_orthogonal():
    with pytest.raises(ValueError):
        SphereMap("rotation", 2, R=np.array([[1.0, 0.1], [0.0, 1.0]]))


def test_angle_multiply_algebraic_matches_trig():
    h = SphereMap("angle_multiply", 2, k=2)
    ang = np.linspace(0.0, 2 * np.pi, 17, endpoint=False)
    u = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    assert_allclose(h.apply(u), h.apply_trig(u), atol=1e-12)
    # doubling: (cos a, sin a) -> (cos 2a, sin 2a)
    assert_allclose(h.apply(u), np.stack([np.cos(2 * ang), np.sin(2 * ang)],
                                         axis=1), atol=1e-12)


def test_angle_multiply_validation():
    with pytest.raises(DimensionMismatch):
        SphereMap("angle_multiply", 3, k=2)
    with pytest.raises(ValueError):
        SphereMap("angle_multiply", 2, k=0)
    with pytest.raises(ValueError):
        SphereMap("no-such-kind", 2)


def test_radial_lift_counterexample_values():
    g = RadialLift(SphereMap("angle_multiply", 2, k=2))
    assert_allclose(g.eval(np.array([3.0, 4.0])), [-1.4, 4.8])
    assert_allclose(g.eval(np.zeros(2)), [0.0, 0.0])
    X = np.random.default_rng(1).normal(size=(200, 2))
    out = g.eval(X)
    # the lift acts on the angle only, so it preserves every radius
    assert_allclose(np.linalg.norm(out, axis=1),
                    np.linalg.norm(X, axis=1), rtol=1e-13)


def test_radial_lift_origin_not_differentiable():
    g = RadialLift(SphereMap("angle_multiply", 2, k=2))
    flags = g.differentiable_at(np.array([[0.0, 0.0], [1.0, 0.0]]))
    assert list(flags) == [False, True]
    comp = ComponentView(g, 0)
    with pytest.raises(NotDifferentiableHere):
        gradient(comp, [0.0, 0.0])


def test_gallery_analytic_laplacian_is_zero():
    X = np.random.default_rng(2).normal(size=(40, 2))
    for f in HarmonicGallery.entries():
        assert_allclose(laplacian_many(f, X), 0.0, atol=1e-30)


def test_gallery_gradients_match_finite_differences():
    X = np.random.default_rng(3).normal(size=(25, 2))
    for f in HarmonicGallery.entries():
        assert f.has_analytic_grad
        assert_allclose(f.grad(X), fd_gradient(f, X), rtol=2e-6, atol=2e-6)


def test_gallery_get_and_names():
    names = [f.name for f in HarmonicGallery.entries()]
    assert len(names) == len(set(names)) == 10
    f = HarmonicGallery.get("re_z^2")
    assert f.scalar_eval([0.3, 0.4]) == pytest.approx(-0.07)
    assert HarmonicGallery.get("im_z^3").scalar_eval([1.0, 1.0]) \
        == pytest.approx(2.0)
    with pytest.raises(ValueError):
        HarmonicGallery.get("re_w^2")


def test_harmonic_field_values():
    re2 = HarmonicGallery.get("re_z^2")
    im2 = HarmonicGallery.get("im_z^2")
    x = np.array([1.5, -0.5])
    z = complex(*x)
    assert re2.scalar_eval(x) == pytest.approx((z ** 2).real)
    assert im2.scalar_eval(x) == pytest.approx((z ** 2).imag)


def test_quadratic_form():
    Q = np.array([[1.0, 0.3], [0.3, 2.0]])
    p = np.array([0.5, -1.0])
    f = QuadraticForm(Q, p=p, c=2.0)
    x = np.array([1.0, -2.0])
    assert f.scalar_eval(x) == pytest.approx(x @ Q @ x + p @ x + 2.0)
    assert_allclose(gradient(f, x), 2.0 * Q @ x + p)
    assert_allclose(f.lap(x[None, :]), [2.0 * np.trace(Q)])


def test_axis_polynomial():
    f = AxisPolynomial([0.0, 0.0, 0.0, 1.0], axis=1, n=2)  # x2^3
    x = np.array([5.0, 2.0])
    assert f.scalar_eval(x) == pytest.approx(8.0)
    assert_allclose(gradient(f, x), [0.0, 12.0])
    assert_allclose(f.lap(x[None, :]), [12.0])


def test_component_view_matches_column():
    g = RadialLift(SphereMap("angle_multiply", 2, k=2))
    X = np.random.default_rng(4).normal(size=(30, 2))
    comp = ComponentView(g, 1)
    assert_allclose(comp.scalar_eval(X), g.eval(X)[:, 1])


def test_restricted_domain_defined_at():
    inner = affine_field([1.0, 0.0])
    f = RestrictedDomain(inner, lambda X: np.linalg.norm(X, axis=1) < 0.5)
    flags = f.defined_at(np.array([[0.1, 0.1], [2.0, 0.0]]))
    assert list(flags) == [True, False]
    assert_allclose(f.scalar_eval([0.1, 0.1]), 0.1)


def test_eikonal_profile_constant_for_affine():
    X = np.random.default_rng(5).normal(size=(50, 2))
    prof = eikonal_profile(affine_field([0.6, 0.8], 0.25), X)
    assert_allclose(prof, 1.0, atol=1e-9)
    prof2 = eikonal_profile(HarmonicGallery.get("re_z^2"), X)
    assert_allclose(prof2, 2.0 * np.linalg.norm(X, axis=1), rtol=1e-6)


def test_fd_laplacian_on_nonharmonic():
    f = QuadraticForm(np.array([[1.0, 0.0], [0.0, 0.0]]))  # x1^2
    X = np.random.default_rng(6).normal(size=(10, 2))
    assert_allclose(fd_laplacian(f, X), 2.0, atol=1e-4)
    assert_allclose(laplacian(f, X[0]), 2.0)


@pytest.mark.parametrize("spec,point,value", [
    ("identity(2)", [1.0, 2.0], [1.0, 2.0]),
    ("affine(P=[[2,0],[1,1]], q=[3,-1])", [3.0, 4.0], [9.0, 6.0]),
    ("affine_field([0.6,0.8], 0.25)", [1.0, 1.0], [1.65]),
    ("radial_lift(angle_multiply(2))", [3.0, 4.0], [-1.4, 4.8]),
    ("radial_lift(rotation([[0,-1],[1,0]]))", [1.0, 0.0], [0.0, 1.0]),
    ("harmonic(re_z^2)", [0.3, 0.4], [-0.07]),
    ("quadratic(Q=[[1,0],[0,0]])", [2.0, 5.0], [4.0]),
    ("axis_poly([0,0,1], axis=0, n=2)", [3.0, 9.0], [9.0]),
    ("component(radial_lift(angle_multiply(2)), 0)", [3.0, 4.0], [-1.4]),
])
def test_parse_transform_catalog(spec, point, value):
    f = parse_transform(spec)
    assert_allclose(np.atleast_1d(f.eval(np.array(point))), value, atol=1e-12)


def test_parse_transform_rejects_garbage():
    for bad in ("no_such(2)", "affine(", "identity(2) trailing",
                "radial_lift(affine_field([1,0]))", "harmonic(re_z^0)", ""):
        with pytest.raises(ValueError):
            parse_transform(bad)
