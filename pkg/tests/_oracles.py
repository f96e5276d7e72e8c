"""Slow, obviously-correct reference implementations used only by the tests.

They walk the noise grid or the column subsets directly instead of reusing
the package's shortcuts.
"""

from __future__ import annotations

import itertools
import random

import numpy as np

from svspectra.volatility_field import CoefficientField


def random_field(rng: random.Random, kspan=2, lspan=1, max_terms=5) -> CoefficientField:
    cells = [(k, l) for k in range(-kspan, kspan + 1) for l in range(-lspan, lspan + 1)]
    chosen = rng.sample(cells, rng.randint(1, max_terms))
    ws = [rng.choice((0.25, 0.5, 0.75, 1.0)) for _ in chosen]
    ws[rng.randrange(len(ws))] = 1.0
    return CoefficientField(tuple(sorted(zip(chosen, ws))))


def _coeff(field, k, l):
    for (kk, ll), w in field.weights:
        if (kk, ll) == (k, l):
            return w
    return 0.0


def _grid(field, i, j, t):
    kmin, kmax, lmin, lmax = field.bounds
    us = range(min(i, j) - kmax - 1, max(i, j) - kmin + 2)
    vs = range(t - lmax - 1, t - lmin + 2)
    return [(u, v) for u in us for v in vs]


def naive_psi(field, i, j, t=0):
    """Largest combined weight any single noise cell puts on X_it X_jt."""
    return max(_coeff(field, i - u, t - v) + _coeff(field, j - u, t - v) for u, v in _grid(field, i, j, t))


def naive_lambda(field, i, j, t=0):
    top = naive_psi(field, i, j, 0)
    return {
        (u, v) for u, v in _grid(field, i, j, t)
        if _coeff(field, i - u, t - v) + _coeff(field, j - u, t - v) == top
    }


def naive_gamma(field, p):
    return {(i, j) for i in range(1, p + 1) for j in range(1, p + 1) if naive_psi(field, i, j) == 2.0}


def naive_peff(a):
    """Search every column subset for a row that attains the maximum on all of it."""
    a = np.asarray(a, dtype=float)
    top = a.max()
    rows, cols = a.shape
    for size in range(cols, 0, -1):
        hits = set()
        for sub in itertools.combinations(range(cols), size):
            if any(all(a[r, c] == top for c in sub) for r in range(rows)):
                hits.add(frozenset(c + 1 for c in sub))
        if hits:
            return float(top), size, frozenset(hits)
    raise AssertionError("matrix has no maximum")


def random_exponent_matrix(rng: random.Random, max_dim=6):
    """Random matrix whose every column attains the overall maximum somewhere."""
    n, p = rng.randint(1, max_dim), rng.randint(1, max_dim)
    vals = (0.0, 0.5, 1.0, 1.5, 2.0)
    a = [[rng.choice(vals) for _ in range(p)] for _ in range(n)]
    top = max(max(r) for r in a)
    if top == 0.0:
        top = 2.0
    for c in range(p):
        a[rng.randrange(n)][c] = top
    return np.array(a)


def cubic_eigenvalues(s):
    """Eigenvalues of a symmetric 3x3 matrix from its characteristic cubic (trigonometric roots)."""
    import math

    s = np.asarray(s, dtype=float)
    q = np.trace(s) / 3.0
    p1 = s[0, 1] ** 2 + s[0, 2] ** 2 + s[1, 2] ** 2
    p2 = (s[0, 0] - q) ** 2 + (s[1, 1] - q) ** 2 + (s[2, 2] - q) ** 2 + 2 * p1
    if p2 == 0.0:
        return [q, q, q]
    p = math.sqrt(p2 / 6.0)
    b = (s - q * np.eye(3)) / p
    r = max(-1.0, min(1.0, np.linalg.det(b) / 2.0))
    phi = math.acos(r) / 3.0
    e1 = q + 2 * p * math.cos(phi)
    e3 = q + 2 * p * math.cos(phi + 2 * math.pi / 3)
    return [e1, 3 * q - e1 - e3, e3]


def random_symmetric(rng: np.random.Generator, p: int, heavy: bool = False):
    a = rng.standard_t(2, (p, p)) if heavy else rng.normal(size=(p, p))
    return (a + a.T) / 2
