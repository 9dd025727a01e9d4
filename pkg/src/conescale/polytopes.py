"""Integer polytope families (0/1 point sets and cyclic polytopes) with exact facet descriptions.

Points are lifted to Z^{d-1} x {1}; an inequality is an integer vector f
with <v, f> >= 0 on the lifted points.  Facet normals are computed exactly
with rational arithmetic and normalized to primitive integer vectors, so a
given point set always yields the same description.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .cones import ConeDescriptor
from .errors import NumericalError, PreconditionError
from .scaling import Factorization

ZERO_ONE_MAX_D = 8
CYCLIC_MAX_POINTS = 4096
BRUTE_FORCE_SUBSETS = 20000

IntVec = tuple[int, ...]


# ---------------------------------------------------------------------------
# exact linear algebra


def _rref(rows: Sequence[Sequence[int]], ncols: int) -> tuple[list[list[Fraction]], list[int]]:
    M = [[Fraction(x) for x in r] for r in rows]
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, len(M)) if M[i][c] != 0), None)
        if p is None:
            continue
        M[r], M[p] = M[p], M[r]
        pv = M[r][c]
        M[r] = [x / pv for x in M[r]]
        for i in range(len(M)):
            if i != r and M[i][c] != 0:
                fac = M[i][c]
                M[i] = [a - fac * b for a, b in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
        if r == len(M):
            break
    return M[:r], pivots


def exact_rank(rows: Sequence[Sequence[int]], ncols: int) -> int:
    if not rows:
        return 0
    return len(_rref(rows, ncols)[1])


def primitive(v: Iterable) -> IntVec:
    """Scale a rational vector to the integer vector with coprime entries (same direction)."""
    v = [Fraction(x) for x in v]
    den = reduce(math.lcm, (x.denominator for x in v), 1)
    ints = [int(x * den) for x in v]
    g = reduce(math.gcd, (abs(x) for x in ints), 0)
    if g == 0:
        raise ValueError("zero vector has no primitive form")
    return tuple(x // g for x in ints)


def nullspace(rows: Sequence[Sequence[int]], ncols: int) -> list[IntVec]:
    """Primitive integer basis of {x : <r, x> = 0 for all rows r}, one vector per free column."""
    if not rows:
        return [tuple(int(i == j) for j in range(ncols)) for i in range(ncols)]
    R, pivots = _rref(rows, ncols)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fcol in free:
        x = [Fraction(0)] * ncols
        x[fcol] = Fraction(1)
        for row, pc in zip(R, pivots):
            x[pc] = -row[fcol]
        basis.append(primitive(x))
    return basis


def _dot(u: Sequence[int], v: Sequence[int]) -> int:
    return sum(a * b for a, b in zip(u, v))


# ---------------------------------------------------------------------------
# facets of cone(V)


def _facet_from_subset(S: Sequence[IntVec], E: Sequence[IntVec], V: Sequence[IntVec], d: int) -> IntVec | None:
    ns = nullspace(list(S) + list(E), d)
    if len(ns) != 1:
        return None
    f = ns[0]
    vals = [_dot(v, f) for v in V]
    if all(x >= 0 for x in vals):
        return f
    if all(x <= 0 for x in vals):
        return tuple(-x for x in f)
    return None


def _candidate_subsets(V: Sequence[IntVec], r: int):
    """Index sets of r-1 points that may span a facet of cone(V)."""
    k = r - 1
    if math.comb(len(V), k) <= BRUTE_FORCE_SUBSETS or k < 2:
        yield from itertools.combinations(range(len(V)), k)
        return
    from scipy.spatial import ConvexHull, QhullError

    X = np.array([v[:-1] for v in V], dtype=float)
    X -= X.mean(axis=0)
    _, s, Vt = np.linalg.svd(X, full_matrices=False)
    coords = X @ Vt[:k].T
    try:
        hull = ConvexHull(coords, qhull_options="Qt")
    except QhullError:
        yield from itertools.combinations(range(len(V)), k)
        return
    for simplex in hull.simplices:
        yield tuple(int(i) for i in simplex)


def facet_description(V: Sequence[IntVec], d: int) -> tuple[list[IntVec], list[IntVec]]:
    """Exact primitive facet normals of cone(V), and an integer basis of the equalities.

    Returns ``(facets, equalities)``.  For a lower-dimensional hull the
    facets are taken inside span(V) and the equalities come in one
    orientation; callers add both.
    """
    V = [tuple(int(x) for x in v) for v in V]
    r = exact_rank(V, d)
    if r == 0:
        raise PreconditionError("facet description needs a non-empty point set")
    E = nullspace(V, d) if r < d else []
    facets: set[IntVec] = set()
    for idx in _candidate_subsets(V, r):
        S = [V[i] for i in idx]
        if exact_rank(S, d) != r - 1:
            continue
        f = _facet_from_subset(S, E, V, d)
        if f is not None:
            facets.add(f)
    if not facets:
        raise NumericalError("no facet found for a non-empty point set")
    return sorted(facets), E


# ---------------------------------------------------------------------------
# instances


@dataclass(frozen=True)
class PolytopeInstance:
    """Lifted points V, integer inequalities F and coefficient bound M of one family member.

    ``M`` is the analytic bound of the family and ``M_observed`` the largest
    entry of F.  ``separation_violations`` lists ground-set points outside V
    that no inequality cuts off by at least one.
    """

    d: int
    V: tuple[IntVec, ...]
    F: tuple[IntVec, ...]
    M: int
    family: str
    X: tuple
    t: int | None = None
    M_observed: int = 0
    separation_violations: tuple[IntVec, ...] = field(default=())

    @property
    def conditions(self) -> dict[str, bool]:
        vbound = 1 if self.family == "zero-one" else max(1, (self.t or 0) ** (self.d - 1))
        return {
            "i": all(max(map(abs, f)) <= self.M for f in self.F)
            and all(max(map(abs, v)) <= vbound for v in self.V),
            "ii": all(_dot(v, f) >= 0 for v in self.V for f in self.F),
            "iii": not self.separation_violations,
        }

    def ground_set(self) -> list[IntVec]:
        if self.family == "zero-one":
            return zero_one_ground_set(self.d)
        return cyclic_ground_set(self.d, self.t or 0)

    def slack_matrix(self) -> np.ndarray:
        return np.array([[_dot(v, f) for f in self.F] for v in self.V], dtype=np.int64).reshape(len(self.V), len(self.F))

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "d": self.d,
            "t": self.t,
            "X": [list(x) if isinstance(x, tuple) else x for x in self.X],
            "V": [list(v) for v in self.V],
            "F": [list(f) for f in self.F],
            "M": self.M,
            "M_observed": self.M_observed,
            "conditions": self.conditions,
            "separation_violations": [list(p) for p in self.separation_violations],
        }


def zero_one_ground_set(d: int) -> list[IntVec]:
    return [tuple(bits) + (1,) for bits in itertools.product((0, 1), repeat=d - 1)]


def cyclic_ground_set(d: int, t: int) -> list[IntVec]:
    return [moment_point(k, d) for k in range(t + 1)]


def moment_point(k: int, d: int) -> IntVec:
    return tuple(k**j for j in range(1, d)) + (1,)


def zero_one_bound(d: int) -> int:
    """2^{d log2(2d)} = (2d)^d."""
    return (2 * d) ** d


def cyclic_bound(d: int, t: int) -> int:
    """((d+1) t^d)^d, clamped to at least 1 so the t = 0 family stays meaningful."""
    return max(1, ((d + 1) * t**d) ** d)


def _inequalities(V: list[IntVec], d: int) -> list[IntVec]:
    if not V:
        # nothing is kept: one inequality cuts off every lifted point
        return [tuple([0] * (d - 1) + [-1])]
    facets, E = facet_description(V, d)
    F = set(facets)
    for e in E:
        F.add(e)
        F.add(tuple(-x for x in e))
    return sorted(F)


def _separation_violations(V: list[IntVec], F: list[IntVec], ground: Iterable[IntVec]) -> tuple[IntVec, ...]:
    Vs = set(V)
    bad = []
    for p in ground:
        if p in Vs:
            continue
        if not any(_dot(p, f) <= -1 for f in F):
            bad.append(p)
    return tuple(bad)


def _parse_bits(X, d: int) -> list[tuple[int, ...]]:
    out = set()
    for x in X:
        if isinstance(x, (int, np.integer)):
            if not 0 <= int(x) < 2 ** (d - 1):
                raise PreconditionError(f"index {x} outside 0..{2 ** (d - 1) - 1}")
            bits = tuple((int(x) >> (d - 2 - j)) & 1 for j in range(d - 1))
        else:
            bits = tuple(int(b) for b in x)
            if len(bits) != d - 1 or any(b not in (0, 1) for b in bits):
                raise PreconditionError(f"{x!r} is not a 0/1 vector of length {d - 1}")
        out.add(bits)
    return sorted(out)


def zero_one_instance(d: int, X, max_d: int = ZERO_ONE_MAX_D) -> PolytopeInstance:
    """Instance for a subset X of {0,1}^{d-1}.

    X holds 0/1 tuples or integer indices read as binary (most significant
    bit first).  An empty X is allowed and yields F = {-e_d}.
    """
    if d < 2:
        raise PreconditionError("d must be at least 2")
    if d > max_d:
        raise PreconditionError(f"d = {d} exceeds the exact-hull cap {max_d}")
    bits = _parse_bits(X, d)
    V = [b + (1,) for b in bits]
    F = _inequalities(V, d)
    return PolytopeInstance(
        d=d,
        V=tuple(V),
        F=tuple(F),
        M=zero_one_bound(d),
        family="zero-one",
        X=tuple(bits),
        M_observed=max(max(map(abs, f)) for f in F),
        separation_violations=_separation_violations(V, F, zero_one_ground_set(d)),
    )


def cyclic_instance(d: int, t: int, X, max_points: int = CYCLIC_MAX_POINTS) -> PolytopeInstance:
    """Instance for a subset X of {0, ..., t}, lifted onto the moment curve.

    Separation is checked on the moment-curve ground set; for d = 2 points
    of the ground set strictly inside the hull cannot be separated and are
    reported in ``separation_violations``.
    """
    if d < 2 or t < 0:
        raise PreconditionError("need d >= 2 and t >= 0")
    ks = sorted({int(k) for k in X})
    if any(k < 0 or k > t for k in ks):
        raise PreconditionError(f"subset must lie in 0..{t}")
    if d * len(ks) > max_points or t + 1 > 64 * max_points:
        raise PreconditionError("instance exceeds the exact-hull cap")
    V = [moment_point(k, d) for k in ks]
    F = _inequalities(V, d)
    return PolytopeInstance(
        d=d,
        V=tuple(V),
        F=tuple(F),
        M=cyclic_bound(d, t),
        family="cyclic",
        X=tuple(ks),
        t=t,
        M_observed=max(max(map(abs, f)) for f in F),
        separation_violations=_separation_violations(V, F, cyclic_ground_set(d, t)),
    )


def non_vertices(inst: PolytopeInstance) -> list[int]:
    """Indices of members of V that are not extreme rays of cone(V)."""
    if not inst.V:
        return []
    d = inst.d
    r = exact_rank(list(inst.V), d)
    E = nullspace(list(inst.V), d) if r < d else []
    facets = [f for f in inst.F if any(_dot(v, f) > 0 for v in inst.V)]
    bad = []
    for i, v in enumerate(inst.V):
        tight = [f for f in facets if _dot(v, f) == 0]
        if exact_rank(tight + list(E), d) != d - 1:
            bad.append(i)
    return bad


def slack_factorization(inst: PolytopeInstance) -> Factorization:
    """Orthant factorization a_v = (<v, f>)_f, b_f = e_f of the slack matrix."""
    S = inst.slack_matrix().astype(float)
    k = len(inst.F)
    return Factorization(
        ConeDescriptor.orthant(k),
        S,
        np.eye(k),
        labels={"V": [list(v) for v in inst.V], "F": [list(f) for f in inst.F]},
    )
