import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conescale.errors import PreconditionError
from conescale.nets import (
    NetSpec,
    enumerate_net,
    expansion_coefficients,
    max_volume_subsystem,
    net_cardinality_bound,
    net_cardinality_bound_log2,
    net_coordinates,
    round_to_net,
)


def _ball_samples(rng, n, rho, count):
    u = rng.standard_normal((count, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u * rho * rng.random((count, 1)) ** (1.0 / n)


def test_cardinality_bound_arithmetic():
    expected = math.e * (3 * math.log(3) + 3 * math.log(math.log(3)) + 15) * 27
    assert net_cardinality_bound(3, 1.0, 1 / 3) == pytest.approx(expected, rel=1e-12)
    assert abs(net_cardinality_bound(3, 1.0, 1 / 3) - 1363.5) <= 0.1
    assert net_cardinality_bound_log2(3, 1.0, 1 / 3) == pytest.approx(math.log2(expected), rel=1e-12)


def test_cardinality_bound_precondition():
    with pytest.raises(PreconditionError):
        net_cardinality_bound(3, 1.0, 0.5)
    with pytest.raises(PreconditionError):
        net_cardinality_bound(2, 10.0, 0.1)


@given(st.integers(3, 40), st.floats(1.0, 100.0), st.floats(1e-3, 1.0))
@settings(max_examples=100, deadline=None)
def test_cardinality_bound_homogeneity(n, rho, frac):
    eps = rho * frac / n
    ratio = net_cardinality_bound_log2(n, 2 * rho, eps) - net_cardinality_bound_log2(n, rho, eps)
    assert ratio == pytest.approx(n, rel=1e-12)


def test_spec_validation():
    with pytest.raises(PreconditionError):
        NetSpec(3, 1.0, 0.5)
    with pytest.raises(PreconditionError):
        NetSpec(0, 1.0, 0.1)
    with pytest.raises(PreconditionError):
        NetSpec(2, 1.0, 0.1, mode="random")


@pytest.mark.parametrize("n", [2, 3, 4, 6])
def test_covering_radius(n):
    rng = np.random.default_rng(n)
    spec = NetSpec(n, 1.0, 1.0 / n)
    u = _ball_samples(rng, n, spec.rho, 10_000)
    dist = np.array([np.linalg.norm(x - round_to_net(spec, x)) for x in u])
    assert np.all(dist <= spec.eps)


def test_lattice_points_are_fixed():
    spec = NetSpec(3, 2.0, 0.5)
    z = np.array([1, -2, 0]) * spec.spacing
    np.testing.assert_array_equal(round_to_net(spec, z), z)
    np.testing.assert_array_equal(net_coordinates(spec, z), [1, -2, 0])


def test_rounding_outside_ball_is_rejected():
    with pytest.raises(PreconditionError):
        round_to_net(NetSpec(2, 1.0, 0.5), [1.0, 1.0])


def test_enumerated_net_contains_every_rounding():
    spec = NetSpec(3, 1.0, 1 / 3, mode="enumerated")
    pts = enumerate_net(spec)
    assert pts.shape == (179, 3)
    keys = {tuple(np.rint(p / spec.spacing).astype(int)) for p in pts}
    rng = np.random.default_rng(0)
    for u in _ball_samples(rng, 3, 1.0, 20_000):
        assert tuple(net_coordinates(spec, u)) in keys
    # the constructive lattice is well below the analytic bound here
    assert len(pts) < net_cardinality_bound(3, 1.0, 1 / 3)


# ---------------------------------------------------------------------------
# maximum-volume subsystem


def _gram_det(R, idx):
    S = R[list(idx)]
    return np.linalg.det(S @ S.T)


def test_max_volume_examples():
    e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert sorted(max_volume_subsystem([e1, 2 * e1, e2])) == [1, 2]
    v = np.array([1.0, -2.0, 0.5])
    assert max_volume_subsystem([v, 2 * v, 3 * v]) == [2]


@pytest.mark.parametrize("seed", range(5))
def test_cramer_coefficients_bounded(seed):
    rng = np.random.default_rng(seed)
    R = rng.standard_normal((50, 5)) * rng.lognormal(0, 1, (50, 1))
    I = max_volume_subsystem(R)
    assert len(I) == 5
    # independent solve for the expansion coefficients
    nu = np.linalg.solve(R[I].T, R.T).T
    assert np.max(np.abs(nu)) <= 1 + 1e-9
    np.testing.assert_allclose(nu, expansion_coefficients(R, I), atol=1e-9)


def test_selection_is_locally_maximal():
    rng = np.random.default_rng(11)
    R = rng.standard_normal((9, 3))
    I = max_volume_subsystem(R)
    base = _gram_det(R, I)
    for j in range(len(I)):
        for i in range(len(R)):
            if i in I:
                continue
            J = list(I)
            J[j] = i
            assert _gram_det(R, J) <= base * (1 + 1e-9)


@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_rank_deficient_rows(rank, dim, seed):
    rank = min(rank, dim)
    rng = np.random.default_rng(seed)
    R = rng.standard_normal((12, rank)) @ rng.standard_normal((rank, dim))
    I = max_volume_subsystem(R)
    assert len(I) == np.linalg.matrix_rank(R)
    assert np.max(np.abs(expansion_coefficients(R, I))) <= 1 + 1e-9


def test_empty_rows_rejected():
    with pytest.raises(PreconditionError):
        max_volume_subsystem(np.zeros((0, 3)))
