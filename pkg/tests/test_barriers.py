import numpy as np
import pytest

from conescale.barriers import (
    BarrierPoint,
    barrier_gradient,
    barrier_value,
    conjugate_gradient_map,
    hessian_apply,
    hessian_inverse_apply,
    hessian_sqrt,
    theta,
)
from conescale.cones import ConeDescriptor, Orthant, Psd, SecondOrder, contains, sample_point, svec
from conescale.errors import PreconditionError, UnsupportedConeError
from conescale.recovery import verify_automorphism

from helpers import SYMMETRIC_CONES


def test_theta_examples():
    assert theta(ConeDescriptor.orthant(5)) == 5
    assert theta(ConeDescriptor.soc(9)) == 2
    assert theta(ConeDescriptor((Orthant(2), Psd(3)))) == 5


@pytest.mark.parametrize("cone,x", [
    (ConeDescriptor.orthant(3), [1, 1, 1]),
    (ConeDescriptor.soc(3), [0, 0, 1]),
    (ConeDescriptor.psd(2), svec(np.diag([2.0, 0.5]))),
])
def test_barrier_vanishes_at_unit_points(cone, x):
    assert barrier_value(BarrierPoint(cone, x)) == pytest.approx(0.0, abs=1e-15)


def test_gradient_closed_forms():
    np.testing.assert_allclose(-barrier_gradient(BarrierPoint(ConeDescriptor.orthant(2), [2, 4])), [0.5, 0.25])
    p = BarrierPoint(ConeDescriptor.soc(3), [0, 0, 1])
    np.testing.assert_allclose(p.neg_gradient(), [0, 0, 2])
    assert p.neg_gradient() @ p.x == pytest.approx(2)
    q = BarrierPoint(ConeDescriptor.psd(2), svec(np.diag([2.0, 1.0])))
    np.testing.assert_allclose(q.neg_gradient(), svec(np.diag([0.5, 1.0])))


def test_hessian_closed_forms():
    p = BarrierPoint(ConeDescriptor.orthant(2), [2, 1])
    np.testing.assert_allclose(hessian_apply(p, [4, 1]), [1, 1])
    q = BarrierPoint(ConeDescriptor.psd(2), svec(np.diag([2.0, 1.0])))
    np.testing.assert_allclose(hessian_apply(q, svec(np.eye(2))), svec(np.diag([0.25, 1.0])))


def test_hessian_sqrt_closed_forms():
    p = BarrierPoint(ConeDescriptor.orthant(2), [2, 1])
    L = hessian_sqrt(p)
    np.testing.assert_allclose(L.matrix(), np.diag([0.5, 1.0]))
    h = np.array([3.0, -2.0])
    np.testing.assert_allclose(L.apply(L.apply(h)), h / p.x**2)
    q = BarrierPoint(ConeDescriptor.psd(2), svec(np.diag([4.0, 1.0])))
    X = np.array([[1.0, 2.0], [2.0, 3.0]])
    P = np.diag([0.5, 1.0])
    np.testing.assert_allclose(hessian_sqrt(q).apply(svec(X)), svec(P @ X @ P))


def test_conjugate_round_trip_examples():
    x = np.array([1.0, 0.0, 2.0])
    p = BarrierPoint(ConeDescriptor.soc(3), x)
    np.testing.assert_allclose(p.neg_gradient(), [-2 / 3, 0, 4 / 3])
    np.testing.assert_allclose(conjugate_gradient_map(p), x)
    o = BarrierPoint(ConeDescriptor.orthant(4), [1, 2, 4, 8])
    np.testing.assert_array_equal(conjugate_gradient_map(o), [1, 2, 4, 8])


def test_rejects_non_interior_and_half_cone():
    with pytest.raises(PreconditionError):
        BarrierPoint(ConeDescriptor.soc(3), [1, 0, 1])
    with pytest.raises(UnsupportedConeError):
        BarrierPoint(ConeDescriptor.halfsoc3(), [0.5, 0, 1])


# ---------------------------------------------------------------------------
# identities on random interior points


def _points(cone, rng, count):
    pts = []
    while len(pts) < count:
        x = sample_point(cone, rng)
        try:
            pts.append(BarrierPoint(cone, x))
        except PreconditionError:
            continue
    return pts


@pytest.mark.parametrize("cone", SYMMETRIC_CONES, ids=str)
def test_hessian_applied_to_x_is_negative_gradient(cone):
    rng = np.random.default_rng(1)
    for p in _points(cone, rng, 200):
        g = p.neg_gradient()
        assert np.linalg.norm(p.hessian_apply(p.x) - g) <= 1e-9 * np.linalg.norm(g)
        assert abs(g @ p.x - p.theta) <= 1e-9 * p.theta


@pytest.mark.parametrize("cone", SYMMETRIC_CONES, ids=str)
def test_inequalities_b_f_g(cone):
    rng = np.random.default_rng(2)
    for p in _points(cone, rng, 40):
        g = p.neg_gradient()
        for _ in range(10):
            h = rng.standard_normal(cone.dim)
            assert (g @ h) ** 2 <= p.theta * (p.hessian_apply(h) @ h) * (1 + 1e-8)
            hc = sample_point(cone, rng)
            assert p.hessian_apply(hc) @ hc <= (g @ hc) ** 2 * (1 + 1e-8)
            hd = sample_point(cone, rng, dual=True)
            assert p.hessian_inverse_apply(hd) @ hd <= (p.x @ hd) ** 2 * (1 + 1e-8)


@pytest.mark.parametrize("cone", SYMMETRIC_CONES, ids=str)
def test_hessian_inverse_and_sqrt_consistency(cone):
    rng = np.random.default_rng(3)
    for p in _points(cone, rng, 20):
        L = p.hessian_sqrt()
        for _ in range(5):
            h = rng.standard_normal(cone.dim)
            Hh = p.hessian_apply(h)
            np.testing.assert_allclose(hessian_inverse_apply(p, Hh), h, rtol=1e-9, atol=1e-9 * np.linalg.norm(h))
            assert np.linalg.norm(L.apply(L.apply(h)) - Hh) <= 1e-8 * max(1.0, np.linalg.norm(Hh))
            y = rng.standard_normal(cone.dim)
            assert L.apply(h) @ y == pytest.approx(h @ L.apply(y), rel=1e-9, abs=1e-9)
        np.testing.assert_allclose(p.hessian_matrix() @ p.hessian_inverse_matrix(), np.eye(cone.dim), atol=1e-8)


@pytest.mark.parametrize("cone", SYMMETRIC_CONES, ids=str)
def test_conjugate_gradient_round_trip(cone):
    rng = np.random.default_rng(4)
    for p in _points(cone, rng, 100):
        np.testing.assert_allclose(conjugate_gradient_map(p), p.x, rtol=1e-9, atol=1e-9 * np.linalg.norm(p.x))


@pytest.mark.parametrize("cone", SYMMETRIC_CONES, ids=str)
def test_gradient_matches_central_differences(cone):
    rng = np.random.default_rng(5)
    step = 1e-5
    for _ in range(20):
        x = sample_point(cone, rng)
        p = BarrierPoint(cone, x)
        if p.hessian_matrix().max() > 1e3:
            continue  # poorly conditioned; differences are not meaningful there
        fd = np.array([
            (barrier_value(BarrierPoint(cone, x + step * e)) - barrier_value(BarrierPoint(cone, x - step * e))) / (2 * step)
            for e in np.eye(cone.dim)
        ])
        g = barrier_gradient(p)
        assert np.linalg.norm(fd - g) <= 1e-5 * np.linalg.norm(g)


@pytest.mark.parametrize("cone", SYMMETRIC_CONES, ids=str)
def test_hessian_sqrt_is_automorphism(cone):
    rng = np.random.default_rng(6)
    for p in _points(cone, rng, 5):
        L = p.hessian_sqrt()
        rep = verify_automorphism(cone, L.matrix(), n_samples=100, rng=rng)
        assert rep.ok, rep
        # the inverse maps the dual cone into itself as well
        for _ in range(20):
            y = sample_point(cone, rng, dual=True)
            assert contains(cone, L.apply_inverse(y), tol=1e-8 * (1 + np.linalg.norm(y)))


def test_theta_additive_under_products():
    rng = np.random.default_rng(8)
    cone = ConeDescriptor((Orthant(2), SecondOrder(4), Psd(3)))
    assert theta(cone) == 2 + 2 + 3
    for p in _points(cone, rng, 50):
        assert p.neg_gradient() @ p.x == pytest.approx(7, rel=1e-12)
