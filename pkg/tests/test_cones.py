import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conescale.cones import (
    ConeDescriptor,
    HalfSoc3,
    Orthant,
    Psd,
    SecondOrder,
    conic_hull_meets_interior,
    contains,
    contains_interior,
    dual_contains,
    halfsoc3_dual_margin,
    halfsoc3_dual_margin_search,
    identity_point,
    max_step,
    project,
    sample_point,
    smat,
    svec,
)
from conescale.errors import PreconditionError, SchemaError, UnsupportedConeError

from helpers import SYMMETRIC_CONES, halfsoc3_rays, random_symmetric


# ---------------------------------------------------------------------------
# membership


def test_orthant_boundary_point_is_member():
    assert contains(ConeDescriptor.orthant(3), [1, 0, 2], tol=0)


def test_soc_pythagorean_triple():
    cone = ConeDescriptor.soc(3)
    assert contains(cone, [3, 4, 5], tol=0)
    assert not contains(cone, [3, 4, 4.9], tol=0)


def test_halfsoc3_rejects_negative_first_coordinate():
    assert not contains(ConeDescriptor.halfsoc3(), [-1, 0, 2])
    assert contains(ConeDescriptor.halfsoc3(), [1, 0, 2])


def test_interior_examples():
    assert contains_interior(ConeDescriptor.orthant(2), [1, 1], tol=1e-12)
    soc = ConeDescriptor.soc(3)
    assert contains_interior(soc, [0, 0, 1])
    assert not contains_interior(soc, [1, 0, 1])
    assert not contains_interior(ConeDescriptor.psd(2), svec(np.diag([1.0, 0.0])))


def test_dual_membership_examples():
    assert dual_contains(ConeDescriptor.orthant(2), [0, 3])
    hs = ConeDescriptor.halfsoc3()
    assert dual_contains(hs, [-1, 0, 2])
    assert dual_contains(hs, [5, 3, 4])
    assert not dual_contains(hs, [-2, 0, 1])


def test_wrong_dimension_raises():
    with pytest.raises(PreconditionError):
        contains(ConeDescriptor.orthant(3), [1, 2])


# ---------------------------------------------------------------------------
# svec


def test_svec_definition():
    v = svec(np.array([[1.0, 2.0], [2.0, 3.0]]))
    np.testing.assert_allclose(v, [1, 2 * np.sqrt(2), 3])


def test_svec_identity_norm():
    v = svec(np.eye(2))
    np.testing.assert_allclose(v, [1, 0, 1])
    assert np.linalg.norm(v) == pytest.approx(np.linalg.norm(np.eye(2)))


def test_svec_rejects_asymmetric():
    with pytest.raises(PreconditionError):
        svec(np.array([[1.0, 2.0], [0.0, 1.0]]))


@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_svec_isometry_against_trace(k):
    rng = np.random.default_rng(k)
    for _ in range(200):
        X, Y = random_symmetric(rng, k), random_symmetric(rng, k)
        lhs = svec(X) @ svec(Y)
        assert abs(lhs - np.trace(X @ Y)) <= 1e-12 * np.linalg.norm(X) * np.linalg.norm(Y) + 1e-15
        np.testing.assert_allclose(smat(svec(X)), X, rtol=0, atol=1e-15 * np.abs(X).max())


# ---------------------------------------------------------------------------
# self-duality and the half cone


@pytest.mark.parametrize("cone", SYMMETRIC_CONES, ids=str)
def test_symmetric_cones_are_self_dual(cone):
    rng = np.random.default_rng(7)
    for _ in range(1000):
        # mix of members and non-members
        x = sample_point(cone, rng, boundary=rng.random() < 0.3) + 0.5 * rng.standard_normal(cone.dim)
        assert contains(cone, x) == dual_contains(cone, x)


def _ray_oracle(y, rays):
    return float(np.min(rays @ y / np.linalg.norm(rays, axis=1)))


def test_halfsoc3_dual_agrees_with_ray_grid():
    rng = np.random.default_rng(3)
    rays = halfsoc3_rays()
    hs = ConeDescriptor.halfsoc3()
    checked = 0
    for _ in range(1000):
        y = rng.standard_normal(3)
        y[2] += 1.0
        margin = _ray_oracle(y, rays)
        if abs(margin) < 1e-3 * np.linalg.norm(y):
            continue  # too close to the boundary for a finite grid
        assert dual_contains(hs, y) == (margin > 0), y
        checked += 1
    assert checked > 900


def test_halfsoc3_margin_closed_form_matches_search():
    rng = np.random.default_rng(4)
    for _ in range(200):
        y = rng.standard_normal(3) + np.array([0, 0, 1.0])
        a, b = halfsoc3_dual_margin(y), halfsoc3_dual_margin_search(y)
        assert np.sign(a) == np.sign(b) or min(abs(a), abs(b)) < 1e-8


# ---------------------------------------------------------------------------
# conic hull meets interior


def test_conic_hull_examples():
    o2 = ConeDescriptor.orthant(2)
    assert conic_hull_meets_interior(o2, [[1, 0], [0, 1]])
    assert not conic_hull_meets_interior(o2, [[1, 0], [2, 0]])
    p2 = ConeDescriptor.psd(2)
    S = [svec(np.diag([1.0, 0.0])), svec(np.diag([0.0, 1.0]))]
    assert conic_hull_meets_interior(p2, S)
    assert np.linalg.eigvalsh(smat(S[0] + S[1])).min() > 0


def _grid_oracle(cone, S, steps=6):
    """Search a grid of nonnegative combinations for an interior point."""
    weights = np.linspace(0, 1, steps)
    for lam in itertools.product(weights, repeat=len(S)):
        if sum(lam) == 0:
            continue
        if contains_interior(cone, np.asarray(lam) @ S, tol=1e-9):
            return True
    return False


def test_conic_hull_against_grid_oracle():
    rng = np.random.default_rng(11)
    cones = [ConeDescriptor.orthant(2), ConeDescriptor.orthant(3), ConeDescriptor.soc(3), ConeDescriptor.psd(2)]
    for i in range(100):
        cone = cones[i % len(cones)]
        k = int(rng.integers(1, 4))
        S = np.array([sample_point(cone, rng, boundary=True) for _ in range(k)])
        if rng.random() < 0.3:
            S[0] = sample_point(cone, rng)
        # a positive sum is interior as soon as any combination is, so the grid is exact here
        assert conic_hull_meets_interior(cone, S) == _grid_oracle(cone, S), (cone, S)


def test_conic_hull_requires_members():
    with pytest.raises(PreconditionError):
        conic_hull_meets_interior(ConeDescriptor.orthant(2), [[-1, 1]])


# ---------------------------------------------------------------------------
# projections, steps, descriptors


@pytest.mark.parametrize("cone", SYMMETRIC_CONES, ids=str)
def test_projection_is_member_and_idempotent(cone):
    rng = np.random.default_rng(2)
    for _ in range(50):
        x = rng.standard_normal(cone.dim)
        p = project(cone, x)
        assert contains(cone, p, tol=1e-9)
        np.testing.assert_allclose(project(cone, p), p, atol=1e-10)
        # Moreau: x - p lies in the polar cone and is orthogonal to p
        assert abs((x - p) @ p) < 1e-8 * (1 + np.linalg.norm(x) ** 2)
        assert dual_contains(cone, p - x, tol=1e-9)


@pytest.mark.parametrize("cone", SYMMETRIC_CONES, ids=str)
def test_max_step_reaches_boundary(cone):
    rng = np.random.default_rng(5)
    e = identity_point(cone)
    for _ in range(20):
        d = rng.standard_normal(cone.dim)
        s = max_step(cone, e, d)
        if np.isfinite(s):
            assert contains(cone, e + 0.999 * s * d)
            assert not contains_interior(cone, e + 1.001 * s * d)


@given(st.lists(st.sampled_from(["orthant", "soc", "psd"]), min_size=1, max_size=4),
       st.lists(st.integers(1, 5), min_size=4, max_size=4))
@settings(max_examples=50, deadline=None)
def test_descriptor_dict_round_trip(kinds, sizes):
    blocks = []
    for kind, n in zip(kinds, sizes):
        blocks.append({"orthant": Orthant, "psd": Psd}.get(kind, SecondOrder)(n if kind != "soc" else n + 1))
    cone = ConeDescriptor(tuple(blocks))
    again = ConeDescriptor.from_dict(cone.to_dict())
    assert again == cone
    assert sum(s.length for s in cone.slices) == cone.dim


def test_descriptor_rejects_bad_input():
    with pytest.raises(SchemaError, match=r"cone\.blocks\[0\]"):
        ConeDescriptor.from_dict({"blocks": [{"type": "cube", "dim": 2}]})
    with pytest.raises(PreconditionError):
        ConeDescriptor((HalfSoc3(), Orthant(1)))
    with pytest.raises(UnsupportedConeError):
        ConeDescriptor.halfsoc3().require_symmetric()
