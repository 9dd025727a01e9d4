"""Self-scaled barriers for orthant, second-order and PSD blocks.

The product barrier is the sum of the block barriers

    orthant   F(x) = -sum log x_i
    SOC       F(x) = -log(x_n^2 - ||x~||^2)
    PSD       F(x) = -log det X

and its parameter (theta) is additive over blocks.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .cones import (
    ConeDescriptor,
    HalfSoc3,
    Orthant,
    Psd,
    SecondOrder,
    as_vector,
    smat,
    svec,
)
from .errors import NumericalError, PreconditionError, UnsupportedConeError

EIG_FLOOR = 1e-14


def theta(cone: ConeDescriptor) -> int:
    """Barrier parameter (the Caratheodory number of the cone)."""
    total = 0
    for blk in cone.blocks:
        if isinstance(blk, Orthant):
            total += blk.dim
        elif isinstance(blk, SecondOrder):
            total += 2
        elif isinstance(blk, Psd):
            total += blk.side
        else:
            raise UnsupportedConeError("HalfSoc3 has no self-scaled barrier")
    return total


@lru_cache(maxsize=None)
def svec_basis(k: int) -> np.ndarray:
    """Matrix U with svec(X) = U @ X.ravel() for symmetric X and smat(v).ravel() = U.T @ v."""
    m = k * (k + 1) // 2
    U = np.zeros((m, k * k))
    r = 0
    for i in range(k):
        for j in range(i, k):
            if i == j:
                U[r, i * k + i] = 1.0
            else:
                U[r, i * k + j] = U[r, j * k + i] = 1.0 / np.sqrt(2.0)
            r += 1
    return U


def _congruence_matrix(A: np.ndarray, B: np.ndarray | None = None) -> np.ndarray:
    """svec-coordinate matrix of D -> A D B + B D A (or A D A when B is None)."""
    k = A.shape[0]
    U = svec_basis(k)
    if B is None:
        K = (A[:, None, :, None] * A[None, :, None, :]).reshape(k * k, k * k)
    else:
        K = A[:, None, :, None] * B[None, :, None, :]
        K = (K + K.transpose(1, 0, 3, 2)).reshape(k * k, k * k)
    return U @ K @ U.T


def _sym_funcs(X: np.ndarray):
    lam, V = np.linalg.eigh(X)
    if lam[0] <= 0:
        raise PreconditionError("PSD block is not positive definite")
    lam = np.maximum(lam, EIG_FLOOR * lam[-1])
    return lam, V


def _congruence_svec(M: np.ndarray, H: np.ndarray) -> np.ndarray:
    """svec(M H M) with the rounding asymmetry of the product removed."""
    P = M @ H @ M
    return svec(0.5 * (P + P.T))


def _sym(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


class _SocData:
    __slots__ = ("x", "s", "Jx")

    def __init__(self, x):
        self.x = x
        r = np.linalg.norm(x[:-1])
        # factored form keeps precision near the boundary
        self.s = (x[-1] - r) * (x[-1] + r)
        Jx = -x.copy()
        Jx[-1] = x[-1]
        self.Jx = Jx


class _PsdData:
    __slots__ = ("X", "lam", "V", "Xinv", "Xinv_half", "X_half")

    def __init__(self, xb):
        X = smat(xb)
        lam, V = _sym_funcs(X)
        self.X = X
        self.lam, self.V = lam, V
        self.Xinv = _sym((V / lam) @ V.T)
        self.Xinv_half = _sym((V / np.sqrt(lam)) @ V.T)
        self.X_half = _sym((V * np.sqrt(lam)) @ V.T)


class BarrierPoint:
    """The product barrier evaluated at a strictly interior point.

    Per-block factorizations are computed once at construction; every
    method afterwards is a pure function of the cached data.
    """

    def __init__(self, cone: ConeDescriptor, x):
        cone.require_symmetric()
        self.cone = cone
        self.x = as_vector(cone, x).copy()
        self.x.setflags(write=False)
        self._data = []
        for s, blk in zip(cone.slices, cone.blocks):
            xb = self.x[s.slice]
            if isinstance(blk, Orthant):
                if np.any(xb <= 0):
                    raise PreconditionError("point is not interior to the orthant block")
                self._data.append(1.0 / xb)
            elif isinstance(blk, SecondOrder):
                d = _SocData(xb)
                if d.s <= 0 or xb[-1] <= 0:
                    raise PreconditionError("point is not interior to the second-order block")
                self._data.append(d)
            else:
                self._data.append(_PsdData(xb))

    @property
    def theta(self) -> int:
        return theta(self.cone)

    def _blocks(self):
        return zip(self.cone.slices, self.cone.blocks, self._data)

    def value(self) -> float:
        total = 0.0
        for s, blk, d in self._blocks():
            if isinstance(blk, Orthant):
                total += np.sum(np.log(d))
            elif isinstance(blk, SecondOrder):
                total -= np.log(d.s)
            else:
                total -= np.sum(np.log(d.lam))
        return float(total)

    def neg_gradient(self) -> np.ndarray:
        """-grad F(x), a point interior to the dual cone."""
        g = np.empty(self.cone.dim)
        for s, blk, d in self._blocks():
            if isinstance(blk, Orthant):
                g[s.slice] = d
            elif isinstance(blk, SecondOrder):
                g[s.slice] = 2.0 * d.Jx / d.s
            else:
                g[s.slice] = svec(d.Xinv)
        return g

    def gradient(self) -> np.ndarray:
        return -self.neg_gradient()

    def hessian_apply(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        out = np.empty(self.cone.dim)
        for s, blk, d in self._blocks():
            hb = h[s.slice]
            if isinstance(blk, Orthant):
                out[s.slice] = hb * d * d
            elif isinstance(blk, SecondOrder):
                Jh = -hb.copy()
                Jh[-1] = hb[-1]
                out[s.slice] = -2.0 * Jh / d.s + 4.0 * d.Jx * (d.Jx @ hb) / d.s**2
            else:
                out[s.slice] = _congruence_svec(d.Xinv, smat(hb))
        return out

    def hessian_inverse_apply(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        out = np.empty(self.cone.dim)
        for s, blk, d in self._blocks():
            hb = h[s.slice]
            if isinstance(blk, Orthant):
                out[s.slice] = hb / (d * d)
            elif isinstance(blk, SecondOrder):
                Jh = -hb.copy()
                Jh[-1] = hb[-1]
                out[s.slice] = d.x * (d.x @ hb) - 0.5 * d.s * Jh
            else:
                out[s.slice] = _congruence_svec(d.X, smat(hb))
        return out

    def hessian_matrix(self) -> np.ndarray:
        n = self.cone.dim
        H = np.zeros((n, n))
        for s, blk, d in self._blocks():
            sl = s.slice
            if isinstance(blk, Orthant):
                H[sl, sl] = np.diag(d * d)
            elif isinstance(blk, SecondOrder):
                H[sl, sl] = _soc_hessian(d)
            else:
                H[sl, sl] = _congruence_matrix(d.Xinv)
        return H

    def hessian_inverse_matrix(self) -> np.ndarray:
        n = self.cone.dim
        H = np.zeros((n, n))
        for s, blk, d in self._blocks():
            sl = s.slice
            if isinstance(blk, Orthant):
                H[sl, sl] = np.diag(1.0 / (d * d))
            elif isinstance(blk, SecondOrder):
                J = np.ones(blk.dim)
                J[:-1] = -1.0
                H[sl, sl] = np.outer(d.x, d.x) - 0.5 * d.s * np.diag(J)
            else:
                H[sl, sl] = _congruence_matrix(d.X)
        return H

    def pairing_hessian(self, u) -> np.ndarray:
        """Hessian in x of the convex function x -> <-grad F(x), u>, for u in the cone.

        Its gradient is -hess F(x) u; the Hessian is minus the third
        derivative of F contracted with u.
        """
        u = np.asarray(u, dtype=float)
        n = self.cone.dim
        T = np.zeros((n, n))
        for s, blk, d in self._blocks():
            sl = s.slice
            ub = u[sl]
            if isinstance(blk, Orthant):
                T[sl, sl] = np.diag(2.0 * ub * d**3)
            elif isinstance(blk, SecondOrder):
                Ju = -ub.copy()
                Ju[-1] = ub[-1]
                J = np.ones(blk.dim)
                J[:-1] = -1.0
                wu = d.x @ Ju
                s2 = d.s * d.s
                T[sl, sl] = (
                    -4.0 * (np.outer(Ju, d.Jx) + np.outer(d.Jx, Ju)) / s2
                    - 4.0 * wu * np.diag(J) / s2
                    + 16.0 * wu * np.outer(d.Jx, d.Jx) / (s2 * d.s)
                )
            else:
                P = d.Xinv @ smat(ub) @ d.Xinv
                T[sl, sl] = _congruence_matrix(d.Xinv, P)
        return T

    def hessian_sqrt(self) -> "ScalingOperator":
        parts = []
        for s, blk, d in self._blocks():
            if isinstance(blk, Orthant):
                parts.append((s, "diag", d.copy(), 1.0 / d))
            elif isinstance(blk, SecondOrder):
                H = _soc_hessian(d)
                try:
                    lam, V = np.linalg.eigh(H)
                except np.linalg.LinAlgError as exc:
                    raise NumericalError(f"eigendecomposition of SOC Hessian failed at s={d.s:g}: {exc}") from exc
                if lam[0] <= 0:
                    raise NumericalError(f"SOC Hessian not positive definite (min eigenvalue {lam[0]:g}, s={d.s:g})")
                root = np.sqrt(lam)
                parts.append((s, "dense", (V * root) @ V.T, (V / root) @ V.T))
            else:
                parts.append((s, "congruence", d.Xinv_half, d.X_half))
        return ScalingOperator(self.cone, parts)

    def conjugate_gradient_map(self) -> np.ndarray:
        """Apply x -> -grad F(x) twice; returns x for self-scaled barriers."""
        y = self.neg_gradient()
        return BarrierPoint(self.cone, y).neg_gradient()


def _soc_hessian(d: _SocData) -> np.ndarray:
    n = d.x.shape[0]
    J = np.ones(n)
    J[:-1] = -1.0
    return -2.0 * np.diag(J) / d.s + 4.0 * np.outer(d.Jx, d.Jx) / d.s**2


class ScalingOperator:
    """Block-structured self-adjoint linear map with an explicit inverse.

    Each part is ``(slice, kind, forward, inverse)`` where kind is
    ``"diag"`` (vectors), ``"dense"`` (matrices acting on the block) or
    ``"congruence"`` (H -> W H W in svec coordinates).
    """

    def __init__(self, cone: ConeDescriptor, parts):
        self.cone = cone
        self.parts = list(parts)

    @classmethod
    def from_matrix(cls, cone: ConeDescriptor, M, M_inv=None) -> "ScalingOperator":
        M = np.asarray(M, dtype=float)
        if M_inv is None:
            M_inv = np.linalg.inv(M)
        full = cone.slices[0].__class__(0, 0, cone.dim)
        return cls(cone, [(full, "dense", M, np.asarray(M_inv, dtype=float))])

    @classmethod
    def scalar(cls, cone: ConeDescriptor, c: float) -> "ScalingOperator":
        full = cone.slices[0].__class__(0, 0, cone.dim)
        return cls(cone, [(full, "diag", np.full(cone.dim, c), np.full(cone.dim, 1.0 / c))])

    @classmethod
    def diagonal(cls, cone: ConeDescriptor, diag) -> "ScalingOperator":
        diag = np.asarray(diag, dtype=float)
        full = cone.slices[0].__class__(0, 0, cone.dim)
        return cls(cone, [(full, "diag", diag, 1.0 / diag)])

    @classmethod
    def block_diagonal(cls, cone: ConeDescriptor, ops) -> "ScalingOperator":
        """Combine one operator per block of ``cone`` into a single operator."""
        parts = []
        for s, op in zip(cone.slices, ops):
            for ps, kind, fwd, inv in op.parts:
                parts.append((s.__class__(s.index, s.offset + ps.offset, ps.length), kind, fwd, inv))
        return cls(cone, parts)

    def _apply(self, x, inverse: bool) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        for s, kind, fwd, inv in self.parts:
            M = inv if inverse else fwd
            xb = x[s.slice]
            if kind == "diag":
                out[s.slice] = M * xb
            elif kind == "dense":
                out[s.slice] = M @ xb
            else:
                out[s.slice] = _congruence_svec(M, smat(xb))
        return out

    def apply(self, x) -> np.ndarray:
        return self._apply(x, False)

    __call__ = apply

    def apply_inverse(self, x) -> np.ndarray:
        return self._apply(x, True)

    def apply_adjoint(self, x) -> np.ndarray:
        return self._apply(x, False)

    def _matrix(self, inverse: bool) -> np.ndarray:
        n = self.cone.dim
        out = np.zeros((n, n))
        for s, kind, fwd, inv in self.parts:
            M = inv if inverse else fwd
            sl = s.slice
            if kind == "diag":
                out[sl, sl] = np.diag(M)
            elif kind == "dense":
                out[sl, sl] = M
            else:
                out[sl, sl] = _congruence_matrix(M)
        return out

    def matrix(self) -> np.ndarray:
        return self._matrix(False)

    def inverse_matrix(self) -> np.ndarray:
        return self._matrix(True)


# functional aliases --------------------------------------------------------


def barrier_value(p: BarrierPoint) -> float:
    return p.value()


def barrier_gradient(p: BarrierPoint) -> np.ndarray:
    return p.gradient()


def hessian_apply(p: BarrierPoint, h) -> np.ndarray:
    return p.hessian_apply(h)


def hessian_inverse_apply(p: BarrierPoint, h) -> np.ndarray:
    return p.hessian_inverse_apply(h)


def hessian_sqrt(p: BarrierPoint) -> ScalingOperator:
    return p.hessian_sqrt()


def conjugate_gradient_map(p: BarrierPoint) -> np.ndarray:
    return p.conjugate_gradient_map()


def is_halfsoc3(cone: ConeDescriptor) -> bool:
    return isinstance(cone.blocks[0], HalfSoc3)
