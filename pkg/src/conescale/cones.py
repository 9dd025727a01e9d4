"""Cone descriptors, coordinate embeddings and membership tests.

A cone is an ordered product of primitive blocks.  Points live in one flat
coordinate vector; positive semidefinite blocks use the sqrt(2)-scaled
symmetric vectorization so that the Euclidean inner product of coordinates
equals the trace inner product of matrices.  Second-order blocks keep the
axis in the *last* coordinate.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import PreconditionError, SchemaError, UnsupportedConeError

MEMBERSHIP_TOL = 1e-10
INTERIOR_TOL = 1e-9

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class Orthant:
    dim: int
    kind = "orthant"

    @property
    def size(self) -> int:
        return self.dim


@dataclass(frozen=True)
class SecondOrder:
    dim: int
    kind = "soc"

    @property
    def size(self) -> int:
        return self.dim


@dataclass(frozen=True)
class Psd:
    side: int
    kind = "psd"

    @property
    def size(self) -> int:
        return self.side * (self.side + 1) // 2


@dataclass(frozen=True)
class HalfSoc3:
    """{x in R^3 : x1^2 + x2^2 <= x3^2, x1 >= 0, x3 >= 0}."""

    kind = "halfsoc3"

    @property
    def size(self) -> int:
        return 3


Block = Orthant | SecondOrder | Psd | HalfSoc3


@dataclass(frozen=True)
class BlockSlice:
    index: int
    offset: int
    length: int

    @property
    def slice(self) -> slice:
        return slice(self.offset, self.offset + self.length)


@dataclass(frozen=True)
class ConeDescriptor:
    blocks: tuple

    def __post_init__(self):
        blocks = tuple(self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if not blocks:
            raise PreconditionError("a cone needs at least one block")
        for blk in blocks:
            if isinstance(blk, (Orthant, SecondOrder)):
                lo = 1 if isinstance(blk, Orthant) else 2
                if not isinstance(blk.dim, int) or blk.dim < lo:
                    raise PreconditionError(f"invalid block dimension in {blk!r}")
            elif isinstance(blk, Psd):
                if not isinstance(blk.side, int) or blk.side < 1:
                    raise PreconditionError(f"invalid block side in {blk!r}")
            elif not isinstance(blk, HalfSoc3):
                raise PreconditionError(f"unknown block {blk!r}")
        if any(isinstance(b, HalfSoc3) for b in blocks) and len(blocks) > 1:
            raise PreconditionError("HalfSoc3 may only appear as a single-block cone")

    # convenience constructors
    @classmethod
    def orthant(cls, n: int) -> "ConeDescriptor":
        return cls((Orthant(n),))

    @classmethod
    def soc(cls, n: int) -> "ConeDescriptor":
        return cls((SecondOrder(n),))

    @classmethod
    def psd(cls, k: int) -> "ConeDescriptor":
        return cls((Psd(k),))

    @classmethod
    def halfsoc3(cls) -> "ConeDescriptor":
        return cls((HalfSoc3(),))

    @property
    def dim(self) -> int:
        return sum(b.size for b in self.blocks)

    @functools.cached_property
    def slices(self) -> tuple[BlockSlice, ...]:
        out, off = [], 0
        for i, b in enumerate(self.blocks):
            out.append(BlockSlice(i, off, b.size))
            off += b.size
        return tuple(out)

    @property
    def is_symmetric(self) -> bool:
        return not any(isinstance(b, HalfSoc3) for b in self.blocks)

    def require_symmetric(self) -> None:
        if not self.is_symmetric:
            raise UnsupportedConeError("operation requires a symmetric cone; HalfSoc3 is not supported")

    def subcone(self, index: int) -> "ConeDescriptor":
        return ConeDescriptor((self.blocks[index],))

    def to_dict(self) -> dict:
        blocks = []
        for b in self.blocks:
            if isinstance(b, Psd):
                blocks.append({"type": "psd", "side": b.side})
            elif isinstance(b, HalfSoc3):
                blocks.append({"type": "halfsoc3"})
            else:
                blocks.append({"type": b.kind, "dim": b.dim})
        return {"blocks": blocks}

    @classmethod
    def from_dict(cls, data, path: str = "cone") -> "ConeDescriptor":
        if not isinstance(data, dict) or "blocks" not in data:
            raise SchemaError("expected an object with a 'blocks' list", path)
        raw = data["blocks"]
        if not isinstance(raw, list) or not raw:
            raise SchemaError("expected a non-empty list", f"{path}.blocks")
        blocks = []
        for i, item in enumerate(raw):
            p = f"{path}.blocks[{i}]"
            if not isinstance(item, dict) or "type" not in item:
                raise SchemaError("expected an object with a 'type' field", p)
            kind = item["type"]
            try:
                if kind == "orthant":
                    blocks.append(Orthant(_pos_int(item, "dim", p)))
                elif kind == "soc":
                    blocks.append(SecondOrder(_pos_int(item, "dim", p)))
                elif kind == "psd":
                    blocks.append(Psd(_pos_int(item, "side", p)))
                elif kind == "halfsoc3":
                    blocks.append(HalfSoc3())
                else:
                    raise SchemaError(f"unknown block type {kind!r}", f"{p}.type")
            except KeyError as exc:
                raise SchemaError("missing field", f"{p}.{exc.args[0]}") from None
        try:
            return cls(tuple(blocks))
        except PreconditionError as exc:
            raise SchemaError(str(exc), f"{path}.blocks") from None

    def __str__(self) -> str:
        parts = []
        for b in self.blocks:
            if isinstance(b, Psd):
                parts.append(f"Psd({b.side})")
            elif isinstance(b, HalfSoc3):
                parts.append("HalfSoc3")
            else:
                parts.append(f"{type(b).__name__}({b.dim})")
        return " x ".join(parts)


def _pos_int(item, key, path):
    val = item[key]
    if isinstance(val, bool) or not isinstance(val, int) or val < 1:
        raise SchemaError("expected a positive integer", f"{path}.{key}")
    return val


def as_vector(cone: ConeDescriptor, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != cone.dim:
        raise PreconditionError(f"vector of shape {x.shape} does not match ambient dimension {cone.dim} of {cone}")
    return x


# ---------------------------------------------------------------------------
# symmetric vectorization


def svec(X, tol: float = 1e-10) -> np.ndarray:
    """Stack the upper triangle of a symmetric matrix row by row, off-diagonals scaled by sqrt(2)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise PreconditionError("svec expects a square matrix")
    if np.max(np.abs(X - X.T), initial=0.0) > tol * max(1.0, np.max(np.abs(X), initial=0.0)):
        raise PreconditionError("svec expects a symmetric matrix")
    iu, scale, _ = _svec_index(X.shape[0])
    return 0.5 * (X + X.T)[iu] * scale


def smat(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    k = side_from_size(v.shape[0])
    iu, _, inv_scale = _svec_index(k)
    X = np.empty((k, k))
    X[iu] = v * inv_scale
    X[iu[1], iu[0]] = X[iu]
    return X


@functools.lru_cache(maxsize=64)
def _svec_index(k: int):
    iu = np.triu_indices(k)
    off = iu[0] != iu[1]
    scale = np.where(off, SQRT2, 1.0)
    for a in (*iu, scale):
        a.setflags(write=False)
    return iu, scale, 1.0 / scale


def side_from_size(m: int) -> int:
    k = int(round((math.sqrt(8 * m + 1) - 1) / 2))
    if k * (k + 1) // 2 != m:
        raise PreconditionError(f"{m} is not a triangular number")
    return k


# ---------------------------------------------------------------------------
# membership


def block_margins(cone: ConeDescriptor, x) -> np.ndarray:
    """Signed distance-like margin of each block; negative means outside."""
    x = as_vector(cone, x)
    out = np.empty(len(cone.blocks))
    for s, blk in zip(cone.slices, cone.blocks):
        xb = x[s.slice]
        if isinstance(blk, Orthant):
            out[s.index] = xb.min()
        elif isinstance(blk, SecondOrder):
            out[s.index] = xb[-1] - np.linalg.norm(xb[:-1])
        elif isinstance(blk, Psd):
            out[s.index] = np.linalg.eigvalsh(smat(xb))[0]
        else:
            out[s.index] = min(xb[2] - math.hypot(xb[0], xb[1]), xb[0])
    return out


def dual_block_margins(cone: ConeDescriptor, y) -> np.ndarray:
    y = as_vector(cone, y)
    if cone.is_symmetric:
        return block_margins(cone, y)
    return np.array([halfsoc3_dual_margin(y)])


def halfsoc3_dual_margin(y) -> float:
    """Margin of y in the dual of HalfSoc3, which is SOC + cone(e1).

    Minimising ||(y1 - s, y2)|| over s >= 0 picks s = max(y1, 0).
    """
    y1, y2, y3 = (float(v) for v in y)
    if y1 >= 0:
        return y3 - abs(y2)
    return y3 - math.hypot(y1, y2)


def halfsoc3_dual_margin_search(y, iters: int = 200) -> float:
    """Same margin as :func:`halfsoc3_dual_margin` by golden-section search over s."""
    y = np.asarray(y, dtype=float)

    def violation(s):
        return math.hypot(y[0] - s, y[1]) - y[2]

    lo, hi = 0.0, float(np.linalg.norm(y)) + 1.0
    invphi = (math.sqrt(5) - 1) / 2
    c, d = hi - invphi * (hi - lo), lo + invphi * (hi - lo)
    fc, fd = violation(c), violation(d)
    for _ in range(iters):
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = violation(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = violation(d)
    return -min(fc, fd, violation(0.0))


def contains(cone: ConeDescriptor, x, tol: float = MEMBERSHIP_TOL) -> bool:
    return bool(np.all(block_margins(cone, x) >= -tol))


def contains_interior(cone: ConeDescriptor, x, tol: float = INTERIOR_TOL) -> bool:
    return bool(np.all(block_margins(cone, x) > tol))


def dual_contains(cone: ConeDescriptor, y, tol: float = MEMBERSHIP_TOL) -> bool:
    return bool(np.all(dual_block_margins(cone, y) >= -tol))


def dual_contains_interior(cone: ConeDescriptor, y, tol: float = INTERIOR_TOL) -> bool:
    return bool(np.all(dual_block_margins(cone, y) > tol))


def conic_hull_meets_interior(cone: ConeDescriptor, S: Iterable, tol: float = INTERIOR_TOL, dual: bool = False) -> bool:
    """Whether cone(S) meets the interior of the cone (or of its dual when ``dual``).

    Any interior conic combination plus the remaining members stays interior,
    so it suffices to test the plain sum.
    """
    S = [as_vector(cone, s) for s in S]
    if not S:
        raise PreconditionError("conic_hull_meets_interior needs a non-empty set")
    member = dual_contains if dual else contains
    for i, s in enumerate(S):
        if not member(cone, s, MEMBERSHIP_TOL * (1 + float(np.linalg.norm(s)))):
            raise PreconditionError(f"element {i} of the set is not in the cone")
    total = np.sum(S, axis=0)
    if dual:
        return dual_contains_interior(cone, total, tol)
    return contains_interior(cone, total, tol)


# ---------------------------------------------------------------------------
# geometry helpers used by the solvers


def identity_point(cone: ConeDescriptor) -> np.ndarray:
    """Canonical interior point: ones, SOC axis point, identity matrix."""
    x = np.zeros(cone.dim)
    for s, blk in zip(cone.slices, cone.blocks):
        if isinstance(blk, Orthant):
            x[s.slice] = 1.0
        elif isinstance(blk, SecondOrder):
            x[s.offset + s.length - 1] = 1.0
        elif isinstance(blk, Psd):
            x[s.slice] = svec(np.eye(blk.side))
        else:
            x[s.slice] = (0.5, 0.0, 1.0)
    return x


def max_step(cone: ConeDescriptor, x, d) -> float:
    """Largest alpha with x + alpha*d in the closed cone (inf if unbounded); x must be interior."""
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    alpha = math.inf
    for s, blk in zip(cone.slices, cone.blocks):
        xb, db = x[s.slice], d[s.slice]
        if isinstance(blk, Orthant):
            neg = db < 0
            if np.any(neg):
                alpha = min(alpha, float(np.min(-xb[neg] / db[neg])))
        elif isinstance(blk, SecondOrder):
            alpha = min(alpha, _soc_max_step(xb, db))
        elif isinstance(blk, Psd):
            X = smat(xb)
            lam, V = np.linalg.eigh(X)
            Xih = (V / np.sqrt(lam)) @ V.T
            mu = np.linalg.eigvalsh(Xih @ smat(db) @ Xih)[0]
            if mu < 0:
                alpha = min(alpha, -1.0 / mu)
        else:
            alpha = min(alpha, _soc_max_step(xb, db))
            if db[0] < 0:
                alpha = min(alpha, -xb[0] / db[0])
    return alpha


def _soc_max_step(x, d) -> float:
    # (x_n + a d_n)^2 - ||x~ + a d~||^2 >= 0 together with x_n + a d_n >= 0
    qa = d[-1] ** 2 - d[:-1] @ d[:-1]
    qb = 2 * (x[-1] * d[-1] - x[:-1] @ d[:-1])
    qc = x[-1] ** 2 - x[:-1] @ x[:-1]
    roots = []
    if abs(qa) < 1e-300:
        if qb < 0:
            roots.append(-qc / qb)
    else:
        disc = qb * qb - 4 * qa * qc
        if disc >= 0:
            sq = math.sqrt(disc)
            # numerically stable quadratic roots
            q = -0.5 * (qb + math.copysign(sq, qb))
            for r in (q / qa, qc / q if q != 0 else math.inf):
                roots.append(r)
    pos = [r for r in roots if r > 0]
    alpha = min(pos) if pos else math.inf
    if d[-1] < 0:
        alpha = min(alpha, -x[-1] / d[-1])
    return alpha


def project(cone: ConeDescriptor, x) -> np.ndarray:
    """Euclidean projection onto the cone."""
    x = as_vector(cone, x)
    out = np.empty_like(x)
    for s, blk in zip(cone.slices, cone.blocks):
        xb = x[s.slice]
        if isinstance(blk, Orthant):
            out[s.slice] = np.maximum(xb, 0.0)
        elif isinstance(blk, SecondOrder):
            out[s.slice] = _project_soc(xb)
        elif isinstance(blk, Psd):
            lam, V = np.linalg.eigh(smat(xb))
            out[s.slice] = svec((V * np.maximum(lam, 0.0)) @ V.T)
        else:
            if xb[0] >= 0:
                out[s.slice] = _project_soc(xb)
            else:
                # the half-space is active: project onto the face x1 = 0
                out[s.slice] = np.concatenate(([0.0], _project_soc(xb[1:])))
    return out


def _project_soc(x) -> np.ndarray:
    r = np.linalg.norm(x[:-1])
    t = x[-1]
    if r <= t:
        return x.copy()
    if r <= -t:
        return np.zeros_like(x)
    c = 0.5 * (r + t)
    out = np.empty_like(x)
    out[:-1] = c * x[:-1] / r
    out[-1] = c
    return out


# ---------------------------------------------------------------------------
# sampling


def sample_point(cone: ConeDescriptor, rng: np.random.Generator, boundary: bool = False, dual: bool = False) -> np.ndarray:
    """Random point of the cone (or its dual); with ``boundary`` each block lies on its boundary."""
    x = np.zeros(cone.dim)
    for s, blk in zip(cone.slices, cone.blocks):
        if isinstance(blk, Orthant):
            v = rng.exponential(1.0, blk.dim)
            if boundary:
                k = rng.integers(1, blk.dim + 1)
                v[rng.choice(blk.dim, size=k, replace=False)] = 0.0
            x[s.slice] = v
        elif isinstance(blk, SecondOrder):
            u = rng.standard_normal(blk.dim - 1)
            r = np.linalg.norm(u)
            axis = r if boundary else r + rng.exponential(1.0) + 1e-3
            x[s.slice] = np.concatenate((u, [axis]))
        elif isinstance(blk, Psd):
            k = blk.side
            rank = rng.integers(0, k) if boundary else k
            G = rng.standard_normal((k, rank))
            X = G @ G.T
            if not boundary:
                X += 1e-3 * np.eye(k)
            x[s.slice] = svec(X)
        else:
            if dual:
                u = rng.standard_normal(2)
                r = np.linalg.norm(u)
                base = np.array([u[0], u[1], r if boundary else r + rng.exponential(1.0)])
                base[0] += 0.0 if boundary else rng.exponential(1.0)
                x[s.slice] = base
            else:
                theta = rng.uniform(-math.pi / 2, math.pi / 2)
                rad = 1.0 if boundary else rng.uniform(0.0, 0.95)
                scale = rng.exponential(1.0) + 1e-3
                x[s.slice] = scale * np.array([rad * math.cos(theta), rad * math.sin(theta), 1.0])
    return x


def sample_points(cone: ConeDescriptor, rng: np.random.Generator, count: int, boundary_fraction: float = 0.5, dual: bool = False) -> np.ndarray:
    return np.array([
        sample_point(cone, rng, boundary=bool(rng.random() < boundary_fraction), dual=dual)
        for _ in range(count)
    ]).reshape(count, cone.dim)


def ensure_matrix(cone: ConeDescriptor, rows: Sequence, name: str = "set") -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    if arr.size == 0:
        return np.zeros((0, cone.dim))
    if arr.ndim != 2 or arr.shape[1] != cone.dim:
        raise PreconditionError(f"{name} has shape {arr.shape}; expected rows of length {cone.dim}")
    return arr
