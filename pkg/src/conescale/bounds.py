"""Counting bounds that rule out small normalized cones for polytope families.

If every member of a family of N point sets factors through a cone in R^n
with normalization constant f, each member is determined by n + d pairs
(inequality, net point), so N <= (|Gamma| * |H_M|)^{n+d}.  Everything is
evaluated in log2 so the huge numbers involved never materialize; an exact
big-integer path cross-checks the logarithms for small d.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

from .errors import PreconditionError
from .polytopes import zero_one_bound

LOG2E = 1.0 / math.log(2.0)


def _log2_int(x: int) -> float:
    """log2 of a positive integer of any size."""
    return math.log2(x)


def _log2_2m_plus_1(log2_M: float) -> float:
    """log2(2M + 1) from log2 M without forming M."""
    return log2_M + 1.0 + math.log2(1.0 + 2.0 ** (-(log2_M + 1.0)))


@dataclass
class BoundReport:
    """Both sides of the counting inequality in log2.

    ``ruled_out`` compares against the compact closed form
    ((2M+1)^{d+1} n^2 (3 (d+1) M f^2 n)^n)^{n+d}.  ``corollary_rhs_log2``
    is the unsimplified count (|Gamma| * (2M+1)^d)^{n+d}, reported alongside
    with its own verdict.
    """

    family: str
    d: int
    n: int
    f_c: float
    M_log2: float
    t: int | None
    rho_variant: str
    gamma_log2: float
    h_count_log2: float
    lhs_log2: float
    rhs_log2: float
    corollary_rhs_log2: float
    ruled_out: bool
    ruled_out_corollary: bool

    def to_dict(self) -> dict:
        return asdict(self)


def counting_bound_log2(d: int, n: int, M: float, f_c: float, gamma_log2: float | None = None,
                        h_count_log2: float | None = None, rho_variant: str = "d+1",
                        v_bound: float = 1.0) -> float:
    """log2 of (|Gamma| * |H|)^{n+d}.

    With ``gamma_log2`` omitted the net bound is evaluated at
    rho = sqrt((d+1) M v_bound) f_c and eps = 1/(4 (n+d) rho); with
    ``h_count_log2`` omitted |H| = (2M+1)^d integer vectors of sup-norm <= M.
    """
    if min(d, n) < 1 or not (M > 0 and f_c > 0):
        raise PreconditionError("all parameters must be positive")
    log2_M = math.log2(M) if not isinstance(M, int) else _log2_int(M)
    if gamma_log2 is None:
        gamma_log2 = gamma_log2_default(d, n, log2_M, f_c, rho_variant, v_bound)
    if h_count_log2 is None:
        h_count_log2 = d * _log2_2m_plus_1(log2_M)
    return (n + d) * (gamma_log2 + h_count_log2)


def gamma_log2_default(d: int, n: int, log2_M: float, f_c: float, rho_variant: str = "d+1", v_bound: float = 1.0) -> float:
    """Net bound at the encoding radius, in log2, without forming rho or eps."""
    if n < 3:
        raise PreconditionError("the net bound needs n >= 3")
    k = d + 1 if rho_variant == "d+1" else n + 1
    # rho/eps = 4 (n+d) rho^2 and rho^2 = k M v_bound f^2
    log2_ratio = 2.0 + math.log2(n + d) + math.log2(k * v_bound * f_c * f_c) + log2_M
    head = math.log2(math.e * (n * math.log(n) + n * math.log(math.log(n)) + 5 * n))
    return head + n * log2_ratio


def _chain_rhs_log2(d: int, n: int, log2_M: float, f_c: float, k: int, v_bound: float) -> float:
    """log2 of ((2M+1)^{d+1} n^2 (3 k v_bound M f^2 n)^n)^{n+d}."""
    inner = (d + 1) * _log2_2m_plus_1(log2_M) + 2 * math.log2(n)
    inner += n * (math.log2(3 * k * v_bound * f_c * f_c * n) + log2_M)
    return (n + d) * inner


def _report(family, d, n, f_c, log2_M, t, rho_variant, lhs_log2, v_bound) -> BoundReport:
    if rho_variant not in ("d+1", "n+1"):
        raise PreconditionError(f"unknown rho variant {rho_variant!r}")
    k = d + 1 if rho_variant == "d+1" else n + 1
    gamma = gamma_log2_default(d, n, log2_M, f_c, rho_variant, v_bound)
    h = d * _log2_2m_plus_1(log2_M)
    rhs = _chain_rhs_log2(d, n, log2_M, f_c, k, v_bound)
    cor = (n + d) * (gamma + h)
    return BoundReport(family, d, n, float(f_c), log2_M, t, rho_variant, gamma, h, lhs_log2, rhs, cor,
                       lhs_log2 > rhs, lhs_log2 > cor)


def zero_one_ruled_out(d: int, n: int, f_c: float, rho_variant: str = "d+1") -> BoundReport:
    """Compare 2^{2^d} - 1 with the counting bound for M = (2d)^d."""
    if d < 2 or n < 3:
        raise PreconditionError("need d >= 2 and n >= 3")
    log2_M = d * math.log2(2 * d)
    # log2(2^{2^d} - 1), exact to rounding even for small d
    lhs = 2.0**d + math.log1p(-(2.0 ** -(2.0**d))) * LOG2E
    return _report("zero-one", d, n, f_c, log2_M, None, rho_variant, lhs, 1.0)


def cyclic_ruled_out(d: int, t: int, n: int, f_c: float, rho_variant: str = "d+1") -> BoundReport:
    """Compare the 2^{t+1} subsets of the moment curve with the counting bound.

    Uses M = ((d+1) t^d)^d and point entries up to t^{d-1}, both clamped
    below by 1 (t = 0 gives a single point).
    """
    if d < 2 or t < 0 or n < 3:
        raise PreconditionError("need d >= 2, t >= 0 and n >= 3")
    if t == 0:
        log2_M = 0.0
    else:
        log2_M = max(0.0, d * (math.log2(d + 1) + d * math.log2(t)))
    v_bound = float(max(1, t) ** (d - 1))
    return _report("cyclic", d, n, f_c, log2_M, t, rho_variant, float(t + 1), v_bound)


# ---------------------------------------------------------------------------
# exact evaluation for small parameters


def zero_one_chain_exact(d: int, n: int, f_c_sq: int | Fraction, rho_variant: str = "d+1") -> tuple[int, Fraction]:
    """Exact (LHS, RHS) of the zero-one chain; f_c enters through its square."""
    M = zero_one_bound(d)
    k = d + 1 if rho_variant == "d+1" else n + 1
    inner = (2 * M + 1) ** (d + 1) * n**2 * (Fraction(3 * k * M * n) * Fraction(f_c_sq)) ** n
    return 2 ** (2**d) - 1, inner ** (n + d)


def log2_fraction(x: Fraction) -> float:
    return math.log2(x.numerator) - math.log2(x.denominator)


def zero_one_threshold(d: int, n_max: int = 10**7) -> tuple[float, int, float]:
    """Smallest n * f_c (n >= 3, f_c >= 1) that the chain fails to rule out.

    Returns ``(log2(n f_c), n, log2 f_c)``.  For each n the least f_c
    solves rhs = lhs in closed form since the rhs is affine in log2 f_c.
    """
    if d < 2:
        raise PreconditionError("need d >= 2")
    lhs = zero_one_ruled_out(d, 3, 1.0).lhs_log2
    log2_M = d * math.log2(2 * d)
    best = None
    n = 3
    while n <= n_max:
        base = _chain_rhs_log2(d, n, log2_M, 1.0, d + 1, 1.0)
        lf = max(0.0, (lhs - base) / (2.0 * n * (n + d)))
        val = math.log2(n) + lf
        if best is None or val < best[0]:
            best = (val, n, lf)
        if lf == 0.0:
            break
        n += 1
    return best
