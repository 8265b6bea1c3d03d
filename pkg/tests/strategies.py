"""Hypothesis strategies shared by the test modules."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from hypothesis import strategies as st

from kgres.algebra import CubicNonlinearity, MassVector, make_term

FACTOR_KINDS = ("u", "ut", "ux")


@st.composite
def masses(draw, max_n: int = 4):
    n = draw(st.integers(1, max_n))
    vals = [Fraction(draw(st.integers(1, 12)), draw(st.integers(1, 4))) for _ in range(n)]
    return MassVector(sorted(vals))


@st.composite
def resonant_masses(draw, max_n: int = 4):
    """Mass vectors with at least one exact resonance (the largest is a sum of three)."""
    n = draw(st.integers(2, max_n))
    base = sorted(Fraction(draw(st.integers(1, 8)), draw(st.integers(1, 4))) for _ in range(n - 1))
    idx = [draw(st.integers(0, n - 2)) for _ in range(3)]
    top = sum(base[i] for i in idx)
    return MassVector(sorted(base + [top]))


@st.composite
def nonlinearities(draw, n: int, max_terms: int = 6):
    k = draw(st.integers(1, max_terms))
    terms = []
    for _ in range(k):
        target = draw(st.integers(0, n - 1))
        factors = [f"{draw(st.sampled_from(FACTOR_KINDS))}{draw(st.integers(1, n))}" for _ in range(3)]
        coeff = draw(st.floats(-2.0, 2.0, allow_nan=False).filter(lambda c: abs(c) > 0.05))
        terms.append(make_term(target, factors, coeff))
    return CubicNonlinearity(n, terms)


@st.composite
def systems(draw, max_n: int = 4):
    m = draw(st.one_of(masses(max_n), resonant_masses(max_n)))
    return m, draw(nonlinearities(m.n))


def complex_vectors(n: int):
    comp = st.floats(-2.0, 2.0, allow_nan=False)
    return st.lists(st.tuples(comp, comp), min_size=n, max_size=n).map(
        lambda pairs: np.array([complex(a, b) for a, b in pairs])
    )


rapidities = st.floats(-3.0, 3.0, allow_nan=False)
