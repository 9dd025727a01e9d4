"""Shared generators for the test suite."""

from __future__ import annotations

import numpy as np

from conescale.cones import ConeDescriptor, Orthant, Psd, SecondOrder, sample_points
from conescale.errors import ConeScaleError
from conescale.scaling import Factorization, check_hypotheses

FAMILIES = {
    "orthant": lambda rng: ConeDescriptor.orthant(int(rng.integers(1, 21))),
    "soc": lambda rng: ConeDescriptor.soc(int(rng.integers(2, 11))),
    "psd": lambda rng: ConeDescriptor.psd(int(rng.integers(1, 6))),
    "mixed-a": lambda rng: ConeDescriptor((Orthant(3), SecondOrder(4), Psd(2))),
    "mixed-b": lambda rng: ConeDescriptor((SecondOrder(3), Psd(3), Orthant(2))),
}

SYMMETRIC_CONES = [
    ConeDescriptor.orthant(4),
    ConeDescriptor.soc(3),
    ConeDescriptor.soc(6),
    ConeDescriptor.psd(2),
    ConeDescriptor.psd(4),
    ConeDescriptor((Orthant(2), SecondOrder(3), Psd(3))),
]


def random_factorization(cone: ConeDescriptor, rng: np.random.Generator, max_size: int = 7) -> Factorization:
    """A factorization whose sets both have a conic hull meeting the interior."""
    while True:
        A = sample_points(cone, rng, int(rng.integers(1, max_size + 1)), 0.5)
        B = sample_points(cone, rng, int(rng.integers(1, max_size + 1)), 0.5, dual=True)
        try:
            fac = Factorization(cone, A, B)
            check_hypotheses(fac)
            return fac
        except ConeScaleError:
            continue


def random_symmetric(rng: np.random.Generator, k: int) -> np.ndarray:
    X = rng.standard_normal((k, k))
    return (X + X.T) / 2


def halfsoc3_rays(count: int = 10_000) -> np.ndarray:
    """Extreme rays of the half cone {x in SOC(3) : x_1 >= 0}, axis last."""
    phi = np.linspace(-np.pi / 2, np.pi / 2, count)
    return np.column_stack([np.cos(phi), np.sin(phi), np.ones_like(phi)])
