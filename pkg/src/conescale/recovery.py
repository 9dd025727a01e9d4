"""Recovering linear maps from normalized pairs, and the half-cone counterexample.

If two paired families satisfy <g(a), q(b)> = <a, b> and both span the
space, g and q are forced to be linear with q = g^{-T}.  The counterexample
shows a non-homogeneous cone whose automorphisms cannot shrink a pair with
zero pairing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .cones import (
    ConeDescriptor,
    block_margins,
    contains,
    dual_block_margins,
    dual_contains,
    sample_points,
)
from .errors import NumericalError, PreconditionError

RANK_TOL = 1e-10


@dataclass
class RecoveredMaps:
    G: np.ndarray
    Q: np.ndarray
    basis_A: list[int]
    basis_B: list[int]
    consistency_residual: float

    @property
    def inverse_adjoint_error(self) -> float:
        """Relative distance between Q and G^{-T}."""
        Git = np.linalg.inv(self.G).T
        return float(np.linalg.norm(self.Q - Git) / np.linalg.norm(Git))


def _as_rows(X, name: str) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.ndim != 2 or X.shape[0] == 0:
        raise PreconditionError(f"{name} must be a non-empty list of vectors")
    return X


def pivoted_basis(rows: np.ndarray, tol: float = RANK_TOL) -> tuple[list[int], int]:
    """Indices of a well-conditioned maximal independent subset of rows (greedy largest pivot)."""
    _, R, piv = linalg.qr(rows.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0:
        return [], 0
    rank = int(np.sum(diag > tol * diag[0]))
    return [int(i) for i in piv[:rank]], rank


def recover_linear_maps(A, A_t, B, B_t, tol: float = 1e-9) -> RecoveredMaps:
    """Rebuild g, q from paired families with <g(a), q(b)> = <a, b>.

    Parameters
    ----------
    A, A_t : array_like, shape (m, n)
        Original and transformed first family, paired by position.
    B, B_t : array_like, shape (k, n)
        Original and transformed second family.
    tol : float
        Allowed pairing discrepancy, relative to ``1 + max |<a, b>|``.

    Returns
    -------
    RecoveredMaps
        ``G`` with ``G a = g(a)`` and ``Q`` with ``Q b = q(b)``.
    """
    A, A_t, B, B_t = (_as_rows(X, nm) for X, nm in ((A, "A"), (A_t, "A~"), (B, "B"), (B_t, "B~")))
    n = A.shape[1]
    if A_t.shape != A.shape or B_t.shape != B.shape or B.shape[1] != n:
        raise PreconditionError("paired families must have matching shapes")
    P, P_t = A @ B.T, A_t @ B_t.T
    viol = float(np.max(np.abs(P - P_t)))
    if viol > tol * (1.0 + float(np.max(np.abs(P)))):
        raise PreconditionError(f"pairing not preserved: max violation {viol:.3g}")

    basis_B, rB = pivoted_basis(B)
    basis_A, rA = pivoted_basis(A)
    if rB < n:
        raise PreconditionError(f"B spans a subspace of rank {rB} < {n}")
    if rA < n:
        raise PreconditionError(f"A spans a subspace of rank {rA} < {n}")
    L, L_t = B[basis_B], B_t[basis_B]
    R, R_t = A[basis_A], A_t[basis_A]
    try:
        # <g(a), b~_i> = <a, b_i>  =>  L~ G = L
        G = linalg.solve(L_t, L)
        Q = linalg.solve(R_t, R)
    except linalg.LinAlgError as exc:
        raise PreconditionError("transformed family does not span the space") from exc
    scale = max(1.0, float(np.max(np.abs(A_t))), float(np.max(np.abs(B_t))))
    resid = max(float(np.max(np.abs(A @ G.T - A_t))), float(np.max(np.abs(B @ Q.T - B_t)))) / scale
    return RecoveredMaps(G, Q, basis_A, basis_B, resid)


@dataclass
class AutomorphismReport:
    forward_ok: bool
    inverse_ok: bool
    worst_margin: float
    n_samples: int

    @property
    def ok(self) -> bool:
        return self.forward_ok and self.inverse_ok


def verify_automorphism(
    cone: ConeDescriptor,
    G,
    n_samples: int = 100,
    tol: float = 1e-9,
    rng: np.random.Generator | int | None = 0,
    dual: bool = False,
) -> AutomorphismReport:
    """Check by sampling that G and G^{-1} map the cone (or its dual) into itself.

    ``worst_margin`` is the smallest block margin of an image divided by the
    image norm; negative values mean some image left the cone.
    """
    G = np.asarray(G, dtype=float)
    if G.shape != (cone.dim, cone.dim):
        raise PreconditionError(f"map must be {cone.dim}x{cone.dim}")
    try:
        Ginv = linalg.inv(G)
    except linalg.LinAlgError as exc:
        raise PreconditionError("map is singular") from exc
    if not np.all(np.isfinite(Ginv)) or np.linalg.cond(G) > 1e14:
        raise PreconditionError("map is singular to working precision")
    rng = np.random.default_rng(rng)
    X = sample_points(cone, rng, n_samples, boundary_fraction=0.5, dual=dual)
    test = dual_contains if dual else contains
    margins = dual_block_margins if dual else block_margins
    worst = math.inf
    ok = [True, True]
    for j, T in enumerate((G, Ginv)):
        for x in X:
            y = T @ x
            nrm = max(float(np.linalg.norm(y)), 1e-300)
            worst = min(worst, float(np.min(margins(cone, y))) / nrm)
            if not test(cone, y, tol * nrm):
                ok[j] = False
    return AutomorphismReport(ok[0], ok[1], worst, n_samples)


# ---------------------------------------------------------------------------
# half-cone counterexample


def halfsoc3_automorphism(alpha: float, beta: float, family: int) -> tuple[np.ndarray, np.ndarray]:
    """The pair (g, g^{-T}) from one of the two automorphism families of HalfSoc3."""
    if alpha <= 0:
        raise PreconditionError("alpha must be positive")
    c = math.sqrt(1.0 + beta * beta)
    if family == 1:
        g = np.array([[1.0, 0.0, 0.0], [0.0, c, beta], [0.0, beta, c]])
        q = np.array([[1.0, 0.0, 0.0], [0.0, c, -beta], [0.0, -beta, c]])
    elif family == 2:
        g = np.array([[1.0, 0.0, 0.0], [0.0, -c, -beta], [0.0, beta, c]])
        q = np.array([[1.0, 0.0, 0.0], [0.0, -c, beta], [0.0, -beta, c]])
    else:
        raise ValueError("family must be 1 or 2")
    return alpha * g, q / alpha


@dataclass
class FamilyResult:
    family: int
    min_max_norm: float
    beta_at_min: float
    alpha_at_min: float
    max_product_error: float       # relative, against M^2 (2 + 2 beta^2)
    max_inverse_adjoint_error: float


@dataclass
class CounterexampleRecord:
    M: float
    beta_range: tuple[float, float]
    grid_size: int
    delta: float
    lower_bound: float
    families: list[FamilyResult] = field(default_factory=list)

    @property
    def min_max_norm(self) -> float:
        return min(f.min_max_norm for f in self.families)

    @property
    def certified(self) -> bool:
        """The optimum never drops below sqrt(2) M, while any bound f * Delta is zero."""
        return self.delta == 0.0 and self.min_max_norm >= self.lower_bound - 1e-9 * self.M


def counterexample_search(M: float, beta_range=(-10.0, 10.0), grid_size: int = 4001) -> CounterexampleRecord:
    """Best achievable max(|g(a)|, |q(b)|) for a = (M, 0, M), b = (-M, 0, M).

    For each beta on the grid alpha is chosen to balance the two norms,
    which minimizes their maximum since the norms scale as alpha and 1/alpha.
    """
    if not M > 0:
        raise PreconditionError("M must be positive")
    lo, hi = map(float, beta_range)
    if grid_size < 1 or lo > hi:
        raise PreconditionError("invalid beta grid")
    a = np.array([M, 0.0, M])
    b = np.array([-M, 0.0, M])
    delta = float(a @ b)
    betas = np.linspace(lo, hi, grid_size)
    rec = CounterexampleRecord(float(M), (lo, hi), grid_size, delta, math.sqrt(2.0) * M)
    for family in (1, 2):
        best = (math.inf, 0.0, 1.0)
        prod_err = inv_err = 0.0
        for beta in betas:
            g, q = halfsoc3_automorphism(1.0, float(beta), family)
            ng, nq = float(np.linalg.norm(g @ a)), float(np.linalg.norm(q @ b))
            alpha = math.sqrt(nq / ng)
            val = max(alpha * ng, nq / alpha)
            exact = M * M * (2.0 + 2.0 * beta * beta)
            prod_err = max(prod_err, float(abs(ng * nq - exact) / exact))
            inv_err = max(inv_err, float(np.max(np.abs(q - np.linalg.inv(g).T))))
            if val < best[0]:
                best = (val, float(beta), alpha)
        rec.families.append(FamilyResult(family, best[0], best[1], best[2], prod_err, inv_err))
    if max(f.max_inverse_adjoint_error for f in rec.families) > 1e-10:
        raise NumericalError("dual family is not the inverse-adjoint of the primal family")
    return rec
