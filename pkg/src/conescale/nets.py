"""Epsilon-nets of Euclidean balls and maximum-volume row selection.

The net is the cubic lattice with spacing 2*eps/sqrt(n): rounding each
coordinate moves a point by at most eps in Euclidean norm.  The analytic
cardinality bound for an optimal covering is kept as a formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import PreconditionError

MODES = ("implicit-lattice", "enumerated")


@dataclass(frozen=True)
class NetSpec:
    n: int
    rho: float
    eps: float
    mode: str = "implicit-lattice"

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise PreconditionError("net dimension must be a positive integer")
        if not (self.eps > 0 and self.rho > 0):
            raise PreconditionError("rho and eps must be positive")
        if self.rho / self.eps < self.n * (1 - 1e-12):
            raise PreconditionError(f"rho/eps = {self.rho / self.eps:.6g} is below n = {self.n}")
        if self.mode not in MODES:
            raise PreconditionError(f"unknown net mode {self.mode!r}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.eps / math.sqrt(self.n)


def net_cardinality_bound_log(n: int, rho: float, eps: float) -> float:
    """Natural log of e (n ln n + n ln ln n + 5n) (rho/eps)^n."""
    if n < 3:
        raise PreconditionError("the cardinality bound needs n >= 3")
    if not (rho > 0 and eps > 0) or rho / eps < n * (1 - 1e-12):
        raise PreconditionError(f"need rho/eps >= n, got {rho / eps:.6g} < {n}")
    return 1.0 + math.log(n * math.log(n) + n * math.log(math.log(n)) + 5 * n) + n * math.log(rho / eps)


def net_cardinality_bound_log2(n: int, rho: float, eps: float) -> float:
    return net_cardinality_bound_log(n, rho, eps) / math.log(2.0)


def net_cardinality_bound(n: int, rho: float, eps: float) -> float:
    """Size bound for an eps-net of the radius-rho ball in R^n (n >= 3, rho/eps >= n)."""
    return math.exp(net_cardinality_bound_log(n, rho, eps))


def _check_ball(spec: NetSpec, u: np.ndarray) -> None:
    if u.shape != (spec.n,):
        raise PreconditionError(f"expected a vector of length {spec.n}")
    if np.linalg.norm(u) > spec.rho * (1 + 1e-12):
        raise PreconditionError(f"|u| = {np.linalg.norm(u):.6g} exceeds rho = {spec.rho:.6g}")


def net_coordinates(spec: NetSpec, u) -> np.ndarray:
    """Integer lattice coordinates of the net point nearest to u."""
    u = np.asarray(u, dtype=float)
    _check_ball(spec, u)
    return np.rint(u / spec.spacing).astype(np.int64)


def round_to_net(spec: NetSpec, u) -> np.ndarray:
    """Net point within eps of u."""
    return net_coordinates(spec, u) * spec.spacing


def enumerate_net(spec: NetSpec, max_points: int = 2_000_000) -> np.ndarray:
    """All lattice points whose rounding cell meets the ball, as an (N, n) array.

    These are exactly the points :func:`round_to_net` can return.
    """
    h = spec.spacing
    K = int(math.ceil(spec.rho / h + 0.5))
    side = 2 * K + 1
    if side**spec.n > max_points:
        raise PreconditionError(f"enumeration would visit {side}^{spec.n} lattice points")
    grid = np.indices((side,) * spec.n).reshape(spec.n, -1).T - K
    pts = grid * h
    # distance from the origin to the cube cell around each lattice point
    gap = np.maximum(np.abs(pts) - h / 2, 0.0)
    keep = np.einsum("ij,ij->i", gap, gap) <= spec.rho**2 * (1 + 1e-12)
    return pts[keep]


# ---------------------------------------------------------------------------
# maximum-volume subsystem


def expansion_coefficients(rows, basis) -> np.ndarray:
    """Coefficients nu with rows = nu @ rows[basis] (least squares on the row space)."""
    rows = np.asarray(rows, dtype=float)
    Bm = rows[list(basis)]
    return rows @ np.linalg.pinv(Bm)


def max_volume_subsystem(rows, rank_tol: float = 1e-10, max_swaps: int = 10_000) -> list[int]:
    """Indices of a locally volume-maximal basis of the row space.

    Starts from greedy pivoted QR and swaps a basis row for a non-basis row
    while some expansion coefficient exceeds 1 in magnitude; each swap
    multiplies the Gram determinant by that coefficient squared.
    """
    R = np.asarray(rows, dtype=float)
    if R.ndim != 2 or R.shape[0] == 0:
        raise PreconditionError("max_volume_subsystem needs a non-empty 2-d array")
    _, Rq, piv = linalg.qr(R.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(Rq))
    if diag.size == 0 or diag[0] == 0:
        return []
    rank = int(np.sum(diag > rank_tol * diag[0]))
    basis = [int(i) for i in piv[:rank]]
    for _ in range(max_swaps):
        nu = expansion_coefficients(R, basis)
        i, j = np.unravel_index(np.argmax(np.abs(nu)), nu.shape)
        if abs(nu[i, j]) <= 1 + 1e-12:
            break
        basis[j] = int(i)
    return basis
