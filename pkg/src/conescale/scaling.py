"""Scaling automorphisms that normalize factorizations over symmetric cones.

Given A in C and B in the dual cone, the scaling point w minimizes

    t(w) = max( max_a <-grad F(w), a>,  max_b <w, b> )

over the interior of C.  The map L = hess F(w)^{1/2} then satisfies
<La, La> <= theta*Delta and <L^{-1}b, L^{-1}b> <= theta*Delta while keeping
every pairing <La, L^{-1}b> = <a, b>.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg, optimize

from .barriers import BarrierPoint, ScalingOperator, theta
from .cones import (
    ConeDescriptor,
    Orthant,
    Psd,
    as_vector,
    conic_hull_meets_interior,
    contains,
    contains_interior,
    dual_contains,
    dual_contains_interior,
    ensure_matrix,
    identity_point,
    max_step,
    smat,
    svec,
)
from .errors import ConvergenceError, NumericalError, PreconditionError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    kkt_tol: float = 1e-6          # relative to (1 + Delta)
    active_tol: float = 1e-7       # relative to (1 + t)
    interior_tol: float = 1e-9     # relative to the norm of the summed set
    max_iters: int = 2000          # Newton steps over all smoothing stages
    eta0_scale: float = 0.1
    eta_factor: float = 0.2
    extra_stages: int = 10
    eps_zero: float | None = None
    blockwise: bool = False
    debug: bool = False
    seed: int = 0

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class Factorization:
    cone: ConeDescriptor
    A: np.ndarray
    B: np.ndarray
    labels: dict | None = None
    # images under an automorphism may leave the cone by rounding; skip the check for those
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        A = ensure_matrix(self.cone, self.A, "A")
        B = ensure_matrix(self.cone, self.B, "B")
        for name, rows, test in (("A", A, contains), ("B", B, dual_contains)) if self.check else ():
            for i, x in enumerate(rows):
                if not test(self.cone, x, 1e-9 * max(1.0, float(np.linalg.norm(x)))):
                    where = "cone" if name == "A" else "dual cone"
                    raise PreconditionError(f"{name}[{i}] is not in the {where}")
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def pairings(self) -> np.ndarray:
        return self.A @ self.B.T

    @property
    def delta(self) -> float:
        if self.A.shape[0] == 0 or self.B.shape[0] == 0:
            return 0.0
        return float(max(self.pairings.max(), 0.0))


@dataclass
class Sym1Solution:
    w: np.ndarray
    t: float
    lam: np.ndarray
    mu: np.ndarray
    kkt_residual: float
    complementarity: float
    iterations: int


@dataclass
class ScalingCertificate:
    L: ScalingOperator
    theta: int
    delta: float
    t_bar: float
    max_primal_norm_sq: float
    max_dual_norm_sq: float
    inner_product_max_error: float
    w_bar: np.ndarray | None = None
    kkt_residual: float = 0.0
    sym2_value: float = 0.0
    lam: np.ndarray | None = None
    mu: np.ndarray | None = None
    degenerate: bool = False
    blockwise: bool = False

    @property
    def f_c(self) -> float:
        return math.sqrt(self.theta)

    @property
    def bound(self) -> float:
        return self.theta * self.delta

    def violations(self, rel: float = 1e-6) -> list[str]:
        """Invariants of the certificate that do not hold."""
        out = []
        if self.degenerate:
            return out
        cap = self.bound * (1 + rel)
        if self.max_primal_norm_sq > cap:
            out.append(f"max |La|^2 = {self.max_primal_norm_sq:.6g} exceeds theta*Delta = {self.bound:.6g}")
        if self.max_dual_norm_sq > cap:
            out.append(f"max |L^-1 b|^2 = {self.max_dual_norm_sq:.6g} exceeds theta*Delta = {self.bound:.6g}")
        if self.inner_product_max_error > 1e-8 * (1 + self.delta):
            out.append(f"pairing error {self.inner_product_max_error:.3g} too large")
        return out


# ---------------------------------------------------------------------------
# (SYM1)


def _constraint_values(fac: Factorization, p: BarrierPoint) -> np.ndarray:
    return np.concatenate((fac.A @ p.neg_gradient(), fac.B @ p.x))


def check_hypotheses(fac: Factorization, tol: float = 1e-9) -> None:
    cone = fac.cone
    cone.require_symmetric()
    for name, rows, dual in (("A", fac.A, False), ("B", fac.B, True)):
        if rows.shape[0] == 0:
            raise PreconditionError(f"set {name} is empty")
        total = rows.sum(axis=0)
        scale = tol * max(float(np.linalg.norm(total)), 1e-300)
        if not conic_hull_meets_interior(cone, rows, scale, dual=dual):
            where = "C" if name == "A" else "the dual cone"
            raise PreconditionError(f"cone({name}) does not meet the interior of {where}")


def _balanced_start(fac: Factorization) -> np.ndarray:
    cone = fac.cone
    for w in (fac.A.sum(axis=0), identity_point(cone)):
        if not contains_interior(cone, w, 0.0):
            continue
        p = BarrierPoint(cone, w)
        primal = float(np.max(fac.A @ p.neg_gradient()))
        dual = float(np.max(fac.B @ w))
        if primal > 0 and dual > 0:
            return w * math.sqrt(primal / dual)
    raise PreconditionError("no interior starting point found")


def solve_sym1(fac: Factorization, opts: SolverOptions | None = None) -> Sym1Solution:
    """Minimize the larger of the two constraint families over int C.

    The max is replaced by eta*log(sum exp(c/eta)); each smoothing level is
    solved by damped Newton with an interior line search, then eta is
    reduced.  Optimality of the final point is certified by
    :func:`kkt_residual`, not by the inner stopping rule.
    """
    opts = opts or SolverOptions()
    check_hypotheses(fac, opts.interior_tol)
    delta = fac.delta
    if delta <= 0:
        raise PreconditionError("Delta = 0; use normalize_factorization for the degenerate case")
    cone, A, B = fac.cone, fac.A, fac.B
    mA = A.shape[0]
    n = cone.dim

    w = _balanced_start(fac)
    t0 = float(np.max(_constraint_values(fac, BarrierPoint(cone, w))))
    eta = opts.eta0_scale * t0
    iters = 0
    best = (math.inf, w)
    extra = 0
    last_value = math.inf

    def smoothed(wv, eta_):
        p = BarrierPoint(cone, wv)
        c = _constraint_values(fac, p)
        cmax = c.max()
        z = np.exp((c - cmax) / eta_)
        Z = z.sum()
        return p, c, cmax + eta_ * math.log(Z), z / Z

    while True:
        eta_final = opts.active_tol * (1.0 + best[0] if best[0] < math.inf else 1.0 + t0) / 40.0
        stage_tol = 1e-15 if eta <= eta_final else 1e-9
        p, c, val, pr = smoothed(w, eta)
        if opts.debug and val > last_value * (1 + 1e-12) + 1e-300:
            raise AssertionError(f"smoothed objective increased across stages: {last_value} -> {val}")
        for _ in range(100):
            H = p.hessian_matrix()
            G = np.vstack((-A @ H, B))
            grad = pr @ G
            ahat = pr[:mA] @ A
            K = p.pairing_hessian(ahat) + ((G.T * pr) @ G - np.outer(grad, grad)) / eta
            K = 0.5 * (K + K.T)
            reg = 1e-13 * max(np.trace(K) / n, 1e-300)
            try:
                d = linalg.solve(K + reg * np.eye(n), -grad, assume_a="pos")
            except (linalg.LinAlgError, ValueError):
                d = np.linalg.lstsq(K + reg * np.eye(n), -grad, rcond=None)[0]
            dec = float(-grad @ d)
            iters += 1
            if dec <= stage_tol * (1.0 + abs(val)) or not np.all(np.isfinite(d)):
                break
            alpha = min(1.0, 0.99 * max_step(cone, w, d))
            accepted = False
            while alpha > 1e-14:
                w_new = w + alpha * d
                if contains_interior(cone, w_new, 0.0):
                    try:
                        p_new, c_new, val_new, pr_new = smoothed(w_new, eta)
                    except PreconditionError:
                        val_new = math.inf
                    if val_new <= val - 1e-4 * alpha * dec:
                        accepted = True
                        break
                alpha *= 0.5
            if not accepted:
                break
            if opts.debug and val_new > val:
                raise AssertionError("Newton step increased the smoothed objective")
            w, p, c, val, pr = w_new, p_new, c_new, val_new, pr_new
            if iters >= opts.max_iters:
                break
        last_value = val
        tmax = float(c.max())
        if tmax < best[0]:
            best = (tmax, w.copy())
        if iters >= opts.max_iters:
            raise ConvergenceError(
                f"SYM1 did not converge within {opts.max_iters} Newton steps (best t = {best[0]:.6g})",
                best={"w": best[1], "t": best[0]},
            )
        if eta <= eta_final:
            w_bar = best[1]
            t_bar = best[0]
            res, lam, mu, comp = kkt_residual(fac, w_bar, t_bar, opts.active_tol)
            if res <= opts.kkt_tol * (1.0 + delta):
                return Sym1Solution(w_bar, t_bar, lam, mu, res, comp, iters)
            extra += 1
            if extra > opts.extra_stages:
                raise ConvergenceError(
                    f"KKT residual {res:.3g} above tolerance after {iters} Newton steps",
                    best={"w": w_bar, "t": t_bar, "kkt_residual": res},
                )
        eta *= opts.eta_factor


def min_norm_simplex(M: np.ndarray) -> tuple[np.ndarray, float]:
    """Point of minimum norm in the convex hull of the columns of M.

    Uses min_{x>=0} ||M x||^2 + c^2 (1'x - 1)^2, whose solution normalized
    to the simplex is the exact minimum-norm point (the objective along
    each ray is monotone in ||M y||).
    """
    k = M.shape[1]
    c = max(1.0, float(np.max(np.linalg.norm(M, axis=0), initial=0.0)))
    # a tiny ridge term picks the most spread-out weights when the minimizer is not unique
    ridge = 1e-7 * c
    aug = np.vstack((M, ridge * np.eye(k), np.full((1, k), c)))
    rhs = np.zeros(M.shape[0] + k + 1)
    rhs[-1] = c
    x, _ = optimize.nnls(aug, rhs, maxiter=50 * (k + 1))
    s = x.sum()
    if s <= 0:
        x = np.full(k, 1.0 / k)
    else:
        x = x / s
    return x, float(np.linalg.norm(M @ x))


def kkt_residual(fac: Factorization, w, t: float, active_tol: float = 1e-7):
    """Best stationarity residual over multipliers on the active constraints.

    Returns ``(residual, lam, mu, complementarity)`` where lam, mu are the
    multipliers (zero off the active set, summing to one together) and
    complementarity is the largest gap t - c_i over constraints carrying
    positive weight.
    """
    cone = fac.cone
    p = BarrierPoint(cone, w)
    c = _constraint_values(fac, p)
    mA = fac.A.shape[0]
    active = np.flatnonzero(c >= t - active_tol * (1.0 + abs(t)))
    H = p.hessian_matrix()
    cols = np.vstack((fac.A @ H, -fac.B))[active].T
    y, res = min_norm_simplex(cols)
    weights = np.zeros(c.shape[0])
    weights[active] = y
    pos = weights > 1e-12
    comp = float(np.max(t - c[pos], initial=0.0))
    return res, weights[:mA], weights[mA:], comp


def evaluate_sym2(cone: ConeDescriptor, w, A, B) -> float:
    """max( max_a <hess F(w) a, a>, max_b <hess F(w)^{-1} b, b> )."""
    p = BarrierPoint(cone, w)
    A = ensure_matrix(cone, A, "A")
    B = ensure_matrix(cone, B, "B")
    vals = [0.0]
    if A.shape[0]:
        vals.append(float(np.max(np.einsum("ij,ij->i", A @ p.hessian_matrix(), A))))
    if B.shape[0]:
        vals.append(float(np.max(np.einsum("ij,ij->i", B @ p.hessian_inverse_matrix(), B))))
    return max(vals)


# ---------------------------------------------------------------------------
# Nesterov-Todd scaling point


def nt_scaling_point(cone: ConeDescriptor, a, b, method: str = "auto") -> np.ndarray:
    """Unique interior w with hess F(w) a = b.

    ``method="auto"`` uses the orthant and PSD closed forms blockwise and
    Newton for second-order blocks; ``method="newton"`` runs Newton on the
    whole cone.
    """
    cone.require_symmetric()
    a = as_vector(cone, a)
    b = as_vector(cone, b)
    if not contains_interior(cone, a, 0.0):
        raise PreconditionError("a is not interior to the cone")
    if not dual_contains_interior(cone, b, 0.0):
        raise PreconditionError("b is not interior to the dual cone")
    if method == "newton":
        return _nt_newton(cone, a, b)
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    w = np.empty(cone.dim)
    for s, blk in zip(cone.slices, cone.blocks):
        ab, bb = a[s.slice], b[s.slice]
        if isinstance(blk, Orthant):
            w[s.slice] = np.sqrt(ab / bb)
        elif isinstance(blk, Psd):
            w[s.slice] = _nt_psd(smat(ab), smat(bb))
        else:
            w[s.slice] = _nt_newton(ConeDescriptor((blk,)), ab, bb)
    return w


def _psd_sqrt(X):
    lam, V = np.linalg.eigh(X)
    return (V * np.sqrt(np.maximum(lam, 0.0))) @ V.T


def _psd_inv_sqrt(X):
    lam, V = np.linalg.eigh(X)
    return (V / np.sqrt(lam)) @ V.T


def _nt_psd(Am, Bm):
    Ah = _psd_sqrt(Am)
    W = Ah @ _psd_inv_sqrt(Ah @ Bm @ Ah) @ Ah
    return svec(0.5 * (W + W.T))


def _nt_newton(cone: ConeDescriptor, a, b, max_iters: int = 200) -> np.ndarray:
    """Minimize <-grad F(w), a> + <w, b>; its stationarity condition is hess F(w) a = b."""
    w = identity_point(cone)
    p = BarrierPoint(cone, w)
    w = w * math.sqrt((p.neg_gradient() @ a) / (w @ b))
    bnorm = float(np.linalg.norm(b))

    def phi(p_):
        return float(p_.neg_gradient() @ a + p_.x @ b)

    p = BarrierPoint(cone, w)
    val = phi(p)
    for _ in range(max_iters):
        grad = b - p.hessian_apply(a)
        if np.linalg.norm(grad) <= 1e-14 * bnorm:
            break
        K = p.pairing_hessian(a)
        try:
            d = linalg.solve(0.5 * (K + K.T), -grad, assume_a="pos")
        except (linalg.LinAlgError, ValueError):
            d = np.linalg.lstsq(K, -grad, rcond=None)[0]
        dec = float(-grad @ d)
        if dec <= 1e-30 * (1 + abs(val)):
            break
        alpha = min(1.0, 0.99 * max_step(cone, w, d))
        while alpha > 1e-16:
            w_new = w + alpha * d
            if contains_interior(cone, w_new, 0.0):
                p_new = BarrierPoint(cone, w_new)
                v_new = phi(p_new)
                # near the optimum the value stalls at rounding level; accept full steps there
                if v_new <= val - 1e-4 * alpha * dec or (alpha == 1.0 and dec < 1e-12 * (1 + abs(val))):
                    break
            alpha *= 0.5
        else:
            break
        w, p, val = w_new, p_new, v_new
    res = float(np.linalg.norm(p.hessian_apply(a) - b))
    if res > 1e-8 * bnorm:
        raise ConvergenceError(f"NT scaling Newton stalled with residual {res:.3g}", best={"w": w})
    return w


# ---------------------------------------------------------------------------
# normalization


def _eps_scaling(fac: Factorization, opts: SolverOptions):
    norms = [np.linalg.norm(fac.A, axis=1).max(initial=0.0), np.linalg.norm(fac.B, axis=1).max(initial=0.0)]
    eps = opts.eps_zero if opts.eps_zero is not None else min(1.0, 1.0 / (1.0 + max(norms)))
    At, Bt = eps * fac.A, eps * fac.B
    cert = ScalingCertificate(
        L=ScalingOperator.scalar(fac.cone, eps),
        theta=theta(fac.cone),
        delta=0.0,
        t_bar=0.0,
        max_primal_norm_sq=_max_sq_norm(At),
        max_dual_norm_sq=_max_sq_norm(Bt),
        inner_product_max_error=_pair_error(fac.A, fac.B, At, Bt),
        degenerate=True,
    )
    return Factorization(fac.cone, At, Bt, fac.labels, check=False), cert


def _max_sq_norm(X) -> float:
    if X.shape[0] == 0:
        return 0.0
    return float(np.max(np.einsum("ij,ij->i", X, X)))


def _pair_error(A, B, At, Bt) -> float:
    if A.shape[0] == 0 or B.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(At @ Bt.T - A @ B.T)))


def normalize_factorization(fac: Factorization, opts: SolverOptions | None = None):
    """Rescale (A, B) by a self-adjoint automorphism; returns (scaled factorization, certificate).

    With Delta = 0 both sets are multiplied by a small epsilon instead.
    """
    opts = opts or SolverOptions()
    fac.cone.require_symmetric()
    delta = fac.delta
    scale = np.linalg.norm(fac.A, axis=1).max(initial=0.0) * np.linalg.norm(fac.B, axis=1).max(initial=0.0)
    if delta <= 1e-14 * scale or delta == 0.0:
        return _eps_scaling(fac, opts)

    if opts.blockwise and len(fac.cone.blocks) > 1:
        ops, ws, sols = [], [], []
        for s in fac.cone.slices:
            sub = Factorization(fac.cone.subcone(s.index), fac.A[:, s.slice], fac.B[:, s.slice])
            try:
                sol = solve_sym1(sub, opts)
            except PreconditionError as exc:
                raise PreconditionError(f"block {s.index}: {exc}") from exc
            sols.append(sol)
            ws.append(sol.w)
            ops.append(BarrierPoint(sub.cone, sol.w).hessian_sqrt())
        L = ScalingOperator.block_diagonal(fac.cone, ops)
        w_bar = np.concatenate(ws)
        t_bar = max(s.t for s in sols)
        kkt = max(s.kkt_residual for s in sols)
        lam = mu = None
    else:
        sol = solve_sym1(fac, opts)
        w_bar, t_bar, kkt, lam, mu = sol.w, sol.t, sol.kkt_residual, sol.lam, sol.mu
        L = BarrierPoint(fac.cone, w_bar).hessian_sqrt()

    At = np.array([L.apply(a) for a in fac.A])
    Bt = np.array([L.apply_inverse(b) for b in fac.B])
    cert = ScalingCertificate(
        L=L,
        theta=theta(fac.cone),
        delta=delta,
        t_bar=t_bar,
        max_primal_norm_sq=_max_sq_norm(At),
        max_dual_norm_sq=_max_sq_norm(Bt),
        inner_product_max_error=_pair_error(fac.A, fac.B, At, Bt),
        w_bar=w_bar,
        kkt_residual=kkt,
        sym2_value=evaluate_sym2(fac.cone, w_bar, fac.A, fac.B),
        lam=lam,
        mu=mu,
        blockwise=bool(opts.blockwise and len(fac.cone.blocks) > 1),
    )
    bad = cert.violations()
    if bad:
        raise NumericalError("scaling certificate failed: " + "; ".join(bad))
    return Factorization(fac.cone, At, Bt, fac.labels, check=False), cert


def normalize_on_support(fac: Factorization, opts: SolverOptions | None = None):
    """Normalize an orthant factorization on the coordinates where cone(A) is positive.

    Coordinates on which every a vanishes play no part in the pairings and
    keep the identity scaling.  This handles slack matrices whose equality
    columns are identically zero, where the interiority hypothesis fails.
    """
    opts = opts or SolverOptions()
    cone = fac.cone
    if len(cone.blocks) != 1 or not isinstance(cone.blocks[0], Orthant):
        raise PreconditionError("support normalization is only defined for a single orthant")
    if fac.A.shape[0] == 0 or fac.delta == 0.0:
        return normalize_factorization(fac, opts)
    support = np.flatnonzero(fac.A.sum(axis=0) > 0)
    sub_cone = ConeDescriptor.orthant(len(support))
    sub = Factorization(sub_cone, fac.A[:, support], fac.B[:, support])
    _, sub_cert = normalize_factorization(sub, opts)
    diag = np.ones(cone.dim)
    diag[support] = sub_cert.L.matrix().diagonal()
    L = ScalingOperator.diagonal(cone, diag)
    At = fac.A * diag
    Bt = fac.B / diag
    w_bar = np.ones(cone.dim)
    w_bar[support] = sub_cert.w_bar
    cert = replace(
        sub_cert,
        L=L,
        theta=theta(cone),
        max_primal_norm_sq=_max_sq_norm(At),
        max_dual_norm_sq=_max_sq_norm(Bt),
        inner_product_max_error=_pair_error(fac.A, fac.B, At, Bt),
        w_bar=w_bar,
    )
    bad = cert.violations()
    if bad:
        raise NumericalError("scaling certificate failed: " + "; ".join(bad))
    return Factorization(cone, At, Bt, fac.labels, check=False), cert
