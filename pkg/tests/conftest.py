"""Shared fixtures and construction helpers for the test suite.

Two worked systems appear throughout: a double zero of a planar quadratic
pair (EX_DOUBLE) and a triple zero of a quadratic/cubic pair (EX_TRIPLE),
both at the origin. The triple system's second equation is the cube of a
linear form, which pins its third-order chain value at exactly 192.

`make_normalized_system` builds random square systems with an exact
multiplicity-mu zero at the origin whose Jacobian is already in the
distinguished shape (kernel along the first variable). The exactness comes
from banning the handful of monomials whose coefficients feed the chain
values below order mu.
"""

import itertools

import numpy as np
import pytest

from mzero.polycore import Poly, PolySystem, parse_system

EX_DOUBLE = """
vars: X1 X2
f1: X1^2 - 1/4*X1 - 1/2*X2
f2: 1/2*X1*X2
"""

EX_TRIPLE = """
vars: X1 X2
f1: 64/73*X1^2 - 48/73*X1*X2 + 9/73*X2^2 + sqrt(73)/12*X2
f2: (8*X1 - 3*X2)^2*(3*X1 + 8*X2)
"""


@pytest.fixture(scope="session")
def ex_double():
    return parse_system(EX_DOUBLE)


@pytest.fixture(scope="session")
def ex_triple():
    return parse_system(EX_TRIPLE)


@pytest.fixture
def ex_double_path(tmp_path):
    p = tmp_path / "double.mz"
    p.write_text(EX_DOUBLE)
    return str(p)


@pytest.fixture
def ex_triple_path(tmp_path):
    p = tmp_path / "triple.mz"
    p.write_text(EX_TRIPLE)
    return str(p)


def random_unitary(n, rng):
    """Haar-distributed unitary via QR with the R diagonal made positive."""
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def monomials(nvars, degree):
    """All exponent tuples of the given total degree."""
    out = []
    for combo in itertools.combinations_with_replacement(range(nvars), degree):
        alpha = [0] * nvars
        for j in combo:
            alpha[j] += 1
        out.append(tuple(alpha))
    return out


def _unit(nvars, j, power=1):
    return tuple(power if i == j else 0 for i in range(nvars))


def make_normalized_system(n, mu, rng, coeff_scale=0.2, fill=0.6):
    """Random system with an exact multiplicity-mu zero at the origin.

    The leading n-1 equations are s_i * X_{i+1} plus random quadratics and
    cubics; the last equation is X1^mu plus random higher terms with the
    monomials X1^k (k < mu) excluded, and for mu = 4 the X1*X_sigma
    quadratics as well, so the chain values below order mu vanish exactly.
    """
    if mu not in (2, 3, 4):
        raise ValueError("generator covers mu in {2, 3, 4}")

    def coeff():
        return coeff_scale * complex(rng.normal(), rng.normal())

    quad = monomials(n, 2)
    cub = monomials(n, 3)
    sing = np.sort(rng.uniform(0.8, 2.0, size=n - 1))[::-1]
    polys = []
    for i in range(n - 1):
        terms = {_unit(n, i + 1): complex(sing[i])}
        for m in quad + cub:
            if rng.uniform() < fill:
                terms[m] = terms.get(m, 0j) + coeff()
        polys.append(Poly(n, terms))

    banned = {_unit(n, 0, k) for k in range(1, mu + 1)}
    if mu >= 4:
        banned |= {m for m in quad if m[0] == 1}
    terms = {_unit(n, 0, mu): 1.0 + 0j}
    for m in quad + cub:
        if m in banned:
            continue
        if rng.uniform() < fill:
            terms[m] = terms.get(m, 0j) + coeff()
    polys.append(Poly(n, terms))

    names = ["X%d" % (i + 1) for i in range(n)]
    labels = ["f%d" % (i + 1) for i in range(n)]
    return PolySystem(polys, names, labels)


def macaulay_multiplicity(system, max_order=6, tol=1e-8):
    """Dimension of the local dual space at the origin, by rank counting.

    Order by order, assemble the coefficient matrix of all products
    X^beta * f_i over the monomials of total degree <= D. Functionals of
    order <= D that kill the ideal are the null space; the multiplicity is
    the nullity once it stops growing with D.
    """
    n = system.nvars
    prev = None
    for order in range(1, max_order + 1):
        cols = [(0,) * n]
        for d in range(1, order + 1):
            cols.extend(monomials(n, d))
        col_index = {m: j for j, m in enumerate(cols)}
        rows = []
        shifts = [(0,) * n]
        for d in range(1, order):
            shifts.extend(monomials(n, d))
        for beta in shifts:
            for p in system.polys:
                row = np.zeros(len(cols), dtype=complex)
                for mono, c in p.terms.items():
                    shifted = tuple(a + b for a, b in zip(mono, beta))
                    j = col_index.get(shifted)
                    if j is not None:
                        row[j] = c
                rows.append(row)
        M = np.array(rows)
        s = np.linalg.svd(M, compute_uv=False)
        rank = int(np.sum(s > tol * s[0])) if s.size else 0
        nullity = len(cols) - rank
        if prev is not None and nullity == prev:
            return nullity
        prev = nullity
    raise RuntimeError("nullity did not stabilize up to order %d" % max_order)


def lowering_residual(basis):
    """Largest defect of the lowered functionals against the chain span."""
    alphas = sorted(
        {a for lam in basis.lambdas for a in lam.coeffs},
        key=lambda t: (sum(t), t),
    )
    span = np.array([lam.as_vector(alphas) for lam in basis.lambdas]).T
    worst = 0.0
    nvars = basis.lambdas[0].nvars
    for k, lam in enumerate(basis.lambdas):
        for sigma in range(nvars):
            low = lam.lower(sigma)
            vec = low.as_vector(alphas)
            if not np.any(vec):
                continue
            sub = span[:, :k] if k else np.zeros((len(alphas), 1))
            coef, *_ = np.linalg.lstsq(sub, vec, rcond=None)
            worst = max(worst, float(np.linalg.norm(sub @ coef - vec)))
    return worst
