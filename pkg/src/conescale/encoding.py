"""Compact encoding of a factorized point set and its reconstruction.

A normalized factorization <v, f> = <a_v, b_f> is reduced to n + d pairs
(f_i, u_i): inequality vectors from a volume-maximal subsystem of
{(f, b_f)} together with net roundings u_i of their b_f.  A candidate point
x belongs to V exactly when some y in C with |y| <= rho fits every slab
|<f_i, x> - <u_i, y>| <= 1/(4(n+d)); non-members miss some slab by at least
twice that amount.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .cones import ConeDescriptor, HalfSoc3, Orthant, Psd, SecondOrder, project, side_from_size
from .errors import PreconditionError
from .nets import NetSpec, max_volume_subsystem, net_coordinates
from .scaling import Factorization

log = logging.getLogger(__name__)

RHO_VARIANTS = ("d+1", "n+1")


@dataclass(frozen=True)
class EncodedPolytope:
    """n + d selected inequalities with lattice coordinates of their rounded dual vectors."""

    cone: ConeDescriptor
    d: int
    F: tuple[tuple[int, ...], ...]
    coords: tuple[tuple[int, ...], ...]
    selected: tuple[int, ...]
    rank: int
    rho: float
    eps: float
    M: int
    f_c: float
    rho_variant: str = "d+1"

    @property
    def n(self) -> int:
        return self.cone.dim

    @property
    def delta(self) -> float:
        return 1.0 / (4 * (self.n + self.d))

    @property
    def spacing(self) -> float:
        return 2.0 * self.eps / math.sqrt(self.n)

    @property
    def U(self) -> np.ndarray:
        return np.array(self.coords, dtype=float) * self.spacing

    @property
    def Fm(self) -> np.ndarray:
        return np.array(self.F, dtype=float)

    def key(self) -> tuple:
        """Hashable content; two encodings with equal keys reconstruct the same set."""
        return (self.F, self.coords)

    def to_dict(self) -> dict:
        return {
            "cone": self.cone.to_dict(),
            "d": self.d,
            "n": self.n,
            "F": [list(f) for f in self.F],
            "net_coords": [list(c) for c in self.coords],
            "U": self.U.tolist(),
            "selected": list(self.selected),
            "rank": self.rank,
            "rho": self.rho,
            "eps": self.eps,
            "delta": self.delta,
            "M": self.M,
            "f_c": self.f_c,
            "rho_variant": self.rho_variant,
        }


def encoding_radius(d: int, n: int, M: float, f_c: float, rho_variant: str = "d+1", v_bound: float = 1.0) -> float:
    if rho_variant not in RHO_VARIANTS:
        raise PreconditionError(f"unknown rho variant {rho_variant!r}")
    k = d + 1 if rho_variant == "d+1" else n + 1
    return math.sqrt(k * M * v_bound) * f_c


def encode(
    fac: Factorization,
    M: int,
    f_c: float,
    rho_variant: str = "d+1",
    v_bound: float = 1.0,
    ground_set=None,
    tol: float = 1e-9,
) -> EncodedPolytope:
    """Select n + d inequalities and round their dual vectors to the lattice net.

    Parameters
    ----------
    fac : Factorization
        Must carry ``labels`` with integer lists ``V`` and ``F`` so that
        ``<a_v, b_f> = <v, f>``, and be normalized so every factor norm is at
        most ``sqrt(d * M * v_bound) * f_c``.
    M : int
        Bound on the entries of the inequality vectors.
    f_c : float
        Normalization constant of the cone.
    rho_variant : {"d+1", "n+1"}
        Which dimension enters the ball radius.
    ground_set : iterable of int vectors, optional
        When given, every point outside V must be cut off by some f with
        ``<p, f> <= -1``.
    """
    labels = fac.labels or {}
    if "V" not in labels or "F" not in labels:
        raise PreconditionError("factorization labels must provide V and F")
    V = [tuple(int(x) for x in v) for v in labels["V"]]
    F = [tuple(int(x) for x in f) for f in labels["F"]]
    if len(V) != fac.A.shape[0] or len(F) != fac.B.shape[0]:
        raise PreconditionError("labels do not match the factorization sizes")
    if not F:
        raise PreconditionError("need at least one inequality")
    d = len(F[0])
    n = fac.cone.dim

    Fm = np.array(F, dtype=float)
    if np.max(np.abs(Fm)) > M:
        raise PreconditionError(f"an inequality has an entry above M = {M}")
    if V:
        Vm = np.array(V, dtype=float)
        if np.max(np.abs(Vm)) > v_bound:
            raise PreconditionError(f"a point has an entry above {v_bound}")
        S = Vm @ Fm.T
        if np.min(S) < 0:
            raise PreconditionError("some point violates some inequality")
        err = float(np.max(np.abs(fac.A @ fac.B.T - S)))
        if err > 1e-8 * (1 + float(np.max(S))):
            raise PreconditionError(f"factorization does not reproduce <v, f> (error {err:.3g})")
    if ground_set is not None:
        Vs = set(V)
        for p in ground_set:
            p = tuple(int(x) for x in p)
            if p not in Vs and not any(np.dot(p, f) <= -1 for f in F):
                raise PreconditionError(f"point {p} outside V is not cut off by any inequality")

    guard = math.sqrt(d * M * v_bound) * f_c * (1 + tol)
    for name, X in (("a", fac.A), ("b", fac.B)):
        if X.shape[0] and float(np.max(np.linalg.norm(X, axis=1))) > guard:
            raise PreconditionError(f"a factor {name} exceeds the normalized norm bound {guard:.6g}; normalize first")

    rho = encoding_radius(d, n, M, f_c, rho_variant, v_bound)
    eps = 1.0 / (4 * (n + d) * rho)
    spec = NetSpec(n, rho, eps)

    basis = max_volume_subsystem(np.hstack((Fm, fac.B)))
    if not basis:
        raise PreconditionError("the inequality system has rank 0")
    rank = len(basis)
    # pad to exactly n + d entries by repeating the last selected row
    sel = list(basis) + [basis[-1]] * (n + d - rank)
    coords = tuple(tuple(int(c) for c in net_coordinates(spec, fac.B[i])) for i in sel)
    return EncodedPolytope(
        cone=fac.cone,
        d=d,
        F=tuple(F[i] for i in sel),
        coords=coords,
        selected=tuple(sel),
        rank=rank,
        rho=rho,
        eps=eps,
        M=int(M),
        f_c=float(f_c),
        rho_variant=rho_variant,
    )


# ---------------------------------------------------------------------------
# convex feasibility


@dataclass
class FeasibilityResult:
    status: str                      # "feasible", "infeasible" or "indeterminate"
    violation: float                 # best achieved excess over the slab half-widths
    lower_bound: float               # certified-ish lower bound on the least excess
    witness: np.ndarray | None = None
    method: str = ""

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


def project_cone_ball(cone: ConeDescriptor, rho: float, y) -> np.ndarray:
    """Projection onto C intersected with the radius-rho ball (project, then shrink)."""
    p = project(cone, y)
    nrm = float(np.linalg.norm(p))
    return p if nrm <= rho else p * (rho / nrm)


def slab_excess(slabs, y) -> float:
    U, c, h = slabs
    return float(np.max(np.abs(U @ y - c) - h, initial=-math.inf))


def _dykstra(cone, rho, U, c, h, y0, iters: int, tol: float):
    m = U.shape[0]
    norms2 = np.einsum("ij,ij->i", U, U)
    x = y0.copy()
    incs = np.zeros((m + 1, x.size))
    best = (math.inf, x)
    for _ in range(iters):
        z = x + incs[m]
        x = project_cone_ball(cone, rho, z)
        incs[m] = z - x
        ex = slab_excess((U, c, h), x)
        if ex < best[0]:
            best = (ex, x.copy())
            if ex <= tol:
                break
        for i in range(m):
            z = x + incs[i]
            if norms2[i] > 0:
                s = U[i] @ z - c[i]
                if s > h[i]:
                    z = z - (s - h[i]) / norms2[i] * U[i]
                elif s < -h[i]:
                    z = z - (s + h[i]) / norms2[i] * U[i]
            incs[i] = x + incs[i] - z
            x = z
    return best


def _cone_constraints(cone: ConeDescriptor, y):
    import cvxpy as cp

    cons = []
    for s, blk in zip(cone.slices, cone.blocks):
        yb = y[s.offset:s.offset + s.length]
        if isinstance(blk, Orthant):
            cons.append(yb >= 0)
        elif isinstance(blk, SecondOrder):
            cons.append(cp.SOC(yb[blk.dim - 1], yb[: blk.dim - 1]))
        elif isinstance(blk, Psd):
            k = side_from_size(blk.size)
            X = cp.Variable((k, k), symmetric=True)
            iu = np.triu_indices(k)
            for j, (a, b) in enumerate(zip(*iu)):
                scale = 1.0 if a == b else math.sqrt(2.0)
                cons.append(yb[j] == scale * X[a, b])
            cons.append(X >> 0)
        elif isinstance(blk, HalfSoc3):
            cons += [cp.SOC(yb[2], yb[:2]), yb[0] >= 0]
    return cons


def _conic_min_excess(cone, rho, U, c, h):
    import cvxpy as cp

    y = cp.Variable(cone.dim)
    s = cp.Variable()
    cons = _cone_constraints(cone, y) + [cp.norm(y, 2) <= rho, cp.abs(U @ y - c) <= h + s]
    prob = cp.Problem(cp.Minimize(s), cons)
    try:
        prob.solve(solver=cp.CLARABEL)
    except cp.error.SolverError:
        prob.solve(solver=cp.SCS, eps=1e-9)
    if prob.status not in ("optimal", "optimal_inaccurate") or y.value is None:
        return None
    return float(s.value), np.asarray(y.value, dtype=float), prob.status


def feasibility_check(cone: ConeDescriptor, rho: float, slabs, tol: float, max_iters: int = 300):
    """Decide whether some y in C with |y| <= rho meets every slab within tol.

    ``slabs`` is a list of (vector, center, halfwidth).  The least excess
    max_i (|<u_i, y> - c_i| - h_i) is driven down by Dykstra's alternating
    projections; if that does not reach ``tol`` a conic program gives the
    exact minimum.  Excess at most ``tol`` is feasible, at least ``2 tol``
    infeasible, anything in between is indeterminate.
    """
    if not rho > 0:
        raise PreconditionError("rho must be positive")
    U = np.array([np.asarray(s[0], dtype=float) for s in slabs]).reshape(len(slabs), cone.dim)
    c = np.array([float(s[1]) for s in slabs])
    h = np.array([float(s[2]) for s in slabs])
    if np.any(h < 0):
        raise PreconditionError("slab half-widths must be nonnegative")
    if len(slabs) == 0:
        return FeasibilityResult("feasible", -math.inf, -math.inf, np.zeros(cone.dim), "trivial")

    zero = np.zeros(cone.dim)
    ex0 = slab_excess((U, c, h), zero)
    if ex0 <= tol:
        return FeasibilityResult("feasible", ex0, -math.inf, zero, "origin")
    ex, y = _dykstra(cone, rho, U, c, h, zero, max_iters, tol)
    if ex <= tol:
        return FeasibilityResult("feasible", ex, -math.inf, y, "dykstra")

    sol = _conic_min_excess(cone, rho, U, c, h)
    if sol is None:
        return FeasibilityResult("indeterminate", ex, -math.inf, y, "dykstra")
    s_opt, y_opt, status = sol
    y_opt = project_cone_ball(cone, rho, y_opt)
    ex_opt = slab_excess((U, c, h), y_opt)
    if ex_opt < ex:
        ex, y = ex_opt, y_opt
    # solver accuracy margin on the optimal value
    lb = s_opt - 1e-7 * (1.0 + float(np.max(np.abs(c))) + rho * float(np.max(np.linalg.norm(U, axis=1))))
    if ex <= tol:
        verdict = "feasible"
    elif lb >= 2 * tol and status == "optimal":
        verdict = "infeasible"
    else:
        verdict = "indeterminate"
    return FeasibilityResult(verdict, ex, lb, y, "conic")


# ---------------------------------------------------------------------------
# reconstruction


@dataclass
class CandidateResult:
    point: tuple[int, ...]
    status: str
    violation: float
    method: str


@dataclass
class Reconstruction:
    accepted: list[tuple[int, ...]]
    candidates: list[CandidateResult] = field(default_factory=list)

    @property
    def indeterminate(self) -> list[tuple[int, ...]]:
        return [c.point for c in self.candidates if c.status == "indeterminate"]


def reconstruct(enc: EncodedPolytope, P, max_iters: int = 300) -> Reconstruction:
    """Members of P consistent with the encoding.

    A candidate is accepted when some y in C, |y| <= rho, exceeds the slab
    half-width 1/(4(n+d)) by at most a quarter of 1/(2(n+d)).
    """
    delta = enc.delta
    tol = delta / 2
    U, Fm = enc.U, enc.Fm
    out = Reconstruction([])
    for p in P:
        p = tuple(int(x) for x in p)
        if len(p) != enc.d:
            raise PreconditionError(f"candidate {p} has length {len(p)}, expected {enc.d}")
        centers = Fm @ np.array(p, dtype=float)
        slabs = [(U[i], centers[i], delta) for i in range(U.shape[0])]
        res = feasibility_check(enc.cone, enc.rho, slabs, tol, max_iters)
        out.candidates.append(CandidateResult(p, res.status, res.violation, res.method))
        if res.feasible:
            out.accepted.append(p)
    return out
