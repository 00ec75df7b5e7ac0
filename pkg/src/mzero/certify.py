"""Certified separation bounds and cluster certificates.

For a multiplicity-mu zero in normalized coordinates, a universal
constant d(mu) in (0, 1) controls a punctured ball around the zero that
contains no other zero: the exclusion radius is d / (2 gamma^mu). The
constant is the minimum of three quantities; two are in closed form, the
third is the first positive root of a scalar function assembled from an
integer coefficient table.

For an approximate zero x, `certify_cluster` builds the order-mu
truncation of the system at x (exactly normalized there by construction),
measures how far the input is from that truncation, and compares against
a threshold. When the comparison holds, the ball of radius
d / (4 gamma^mu) around x contains exactly mu zeros of the original
system counted with multiplicity.
"""

import math
from dataclasses import dataclass

import numpy as np

from .dualspace import (
    DualFunctional,
    _delta_from_chain,
    compute_dual_basis,
    is_normalized,
    normalizing_frame,
)
from .errors import NoRootError
from .gamma import GammaReport, _hat_supremum, _merge_rows, _n_supremum, gamma_mu
from .numkit import matrix_spectral_norm, smallest_positive_root, solve_linear

# table entries above this order have no independent cross-check yet
_ANCHORED_MAX = 3


@dataclass
class CoefficientTable:
    mu: int
    c: dict
    t: dict
    anchored: bool


@dataclass
class SeparationResult:
    mu: int
    d: float
    d1: float
    d2: float
    d3: float
    gamma: GammaReport = None
    bound: float = None


@dataclass
class ResidualBound:
    mu: int
    bound: float
    fy_norm: float
    distance: float
    within_radius: bool
    a_inv_norm: float
    d: float
    gamma: GammaReport = None


@dataclass
class ClusterCertificate:
    center: np.ndarray
    radius: float
    mu: int
    lhs: float
    rhs: float
    holds: bool
    h_norms: list
    a_inv_norm: float
    gamma_on_g: GammaReport
    d: float
    mode: str


def coefficient_table(mu):
    """Integer tables (c, t) driving the exclusion function for order mu.

    Entries of c sit on total degree mu; entries of t have total degree
    at most mu - 2. Both are produced by repeatedly substituting the
    non-diagonal part of a split Taylor expansion into itself until every
    term reaches total degree mu.
    """
    if mu < 2:
        raise ValueError("order must be at least 2")
    c = {}
    t = {}

    def push(i, j, beta):
        if j == 0:
            # pure diagonal powers are handled exactly, not tabulated
            return
        if i + j == mu:
            c[(i, j)] = c.get((i, j), 0) + beta
            return
        t[(i, j - 1)] = t.get((i, j - 1), 0) + beta
        for k in range(mu + 1):
            for l in range(mu + 1):
                if k + l < 2:
                    continue
                if i + k + j - 1 + l > mu:
                    continue
                factor = math.factorial(k + l) // (
                    math.factorial(k) * math.factorial(l)
                )
                push(i + k, j - 1 + l, beta * factor)

    for s in range(2, mu + 1):
        for j in range(s + 1):
            i = s - j
            push(i, j, math.factorial(s) // (math.factorial(i) * math.factorial(j)))

    return CoefficientTable(mu=mu, c=c, t=t, anchored=(mu <= _ANCHORED_MAX))


def p_of_d(mu, table=None):
    """Scalar exclusion function whose first positive root gives d3.

    Every tabulated term carries the (1 - d^2)^(i/2) factor, including
    the t-terms with j = 0; the function is positive at zero and crosses
    below zero before d reaches one.
    """
    if table is None:
        table = coefficient_table(mu)
    mu = table.mu
    c_items = sorted(table.c.items())
    t_items = sorted(table.t.items())

    def p(d):
        w = (1.0 - d * d) ** 0.5
        total = w**mu
        for (i, j), coeff in c_items:
            total = total - coeff * w**i * d**j
        tail = 1.0
        for (i, j), coeff in t_items:
            tail = tail + coeff * w**i * d**j
        return total - d * tail

    return p


def separation_constant(mu, tol=1e-10):
    """Universal constant d(mu) with its three ingredients."""
    table = coefficient_table(mu)
    cm = table.c[(mu - 1, 1)]
    d1 = math.sqrt(1.0 / (cm * cm + 1.0))
    d2 = math.sqrt(1.0 / (mu - 1.0))
    p = p_of_d(mu, table)
    try:
        d3 = smallest_positive_root(p, d2, tol=tol)
    except NoRootError:
        d3 = smallest_positive_root(p, 1.0 - 1e-9, tol=tol)
    d = min(d1, d2, d3)
    return SeparationResult(mu=mu, d=d, d1=d1, d2=d2, d3=d3)


def separation_bound(source, x, mu=None, mode="estimate", auto_frame=True):
    """Exclusion radius d / (2 gamma^mu) around a normalized zero.

    Unnormalized input is moved to a normalizing frame first (distances
    are invariant under the rotation, so the radius applies unchanged in
    the original coordinates).
    """
    x = np.asarray(x, dtype=complex)
    J = source.jacobian(x)
    if not is_normalized(J):
        if not auto_frame:
            raise ValueError("point is not normalized and auto_frame is off")
        frame, w, _ = normalizing_frame(source, x)
        return separation_bound(frame, w, mu=mu, mode=mode, auto_frame=False)
    report = gamma_mu(source, x, mu=mu, mode=mode)
    sep = separation_constant(report.mu)
    sep.gamma = report
    sep.bound = sep.d / (2.0 * report.gamma**report.mu)
    return sep


def _a_inv_norm(Jhat, delta_mu):
    s = np.linalg.svd(Jhat, compute_uv=False)
    inv_hat = 1.0 / float(s[-1])
    return max(inv_hat / math.sqrt(2.0), math.sqrt(2.0) / abs(delta_mu))


def residual_lower_bound(source, x, y, mu=None, mode="estimate", auto_frame=True):
    """Lower bound on the residual norm at y, forced by the zero at x.

    Valid for y within distance d / (4 gamma^mu) of the normalized zero
    x; the `within_radius` flag reports whether that held.
    """
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    J = source.jacobian(x)
    if not is_normalized(J):
        if not auto_frame:
            raise ValueError("point is not normalized and auto_frame is off")
        frame, w, _ = normalizing_frame(source, x)
        return residual_lower_bound(
            frame, w, frame.to_frame(y), mu=mu, mode=mode, auto_frame=False
        )
    n = source.nvars
    report = gamma_mu(source, x, mu=mu, mode=mode)
    mu = report.mu
    sep = separation_constant(mu)
    Jhat = J[: n - 1, 1:]
    ainv = _a_inv_norm(Jhat, report.delta_mu)
    dist = float(np.linalg.norm(y - x))
    r_max = sep.d / (4.0 * report.gamma**mu)
    bound = sep.d * dist**mu / (2.0 * ainv)
    fy = float(np.linalg.norm(source.eval_at(y)))
    return ResidualBound(
        mu=mu,
        bound=bound,
        fy_norm=fy,
        distance=dist,
        within_radius=bool(dist <= r_max),
        a_inv_norm=ainv,
        d=sep.d,
        gamma=report,
    )


def _truncation_chain(system, x, mu):
    """Chain data for the order-mu truncation of the system at x.

    The truncation subtracts the value, the full first-order term, and
    the pure first-variable terms of orders 2..mu-1 of the last equation.
    Its Jacobian block at x is exactly the leading (n-1) x (n-1) slice of
    the input, so the correction solves run against that block directly.
    Returns (h_values, delta_mu_value, a_rows).
    """
    n = system.nvars
    J = system.jacobian(x)
    Jhat = J[: n - 1, 1:]
    a1 = np.zeros(n, dtype=complex)
    a1[0] = 1.0
    lambdas = [DualFunctional.one(n), DualFunctional.d(n, 0)]
    a_rows = [a1]
    h_values = []
    delta_mu_value = None
    for k in range(2, mu + 1):
        delta = _delta_from_chain(a_rows, lambdas, k, n)
        vals = delta.apply(system, x)
        if k == mu:
            delta_mu_value = vals[-1]
            break
        h_values.append(vals[-1])
        ahat = solve_linear(Jhat, -vals[: n - 1])
        a_k = np.zeros(n, dtype=complex)
        a_k[1:] = ahat
        lam = delta
        for sigma in range(1, n):
            if a_k[sigma] != 0:
                lam = lam + DualFunctional.d(n, sigma) * a_k[sigma]
        lambdas.append(lam)
        a_rows.append(a_k)
    return h_values, delta_mu_value, a_rows


def certify_cluster(system, x, mu=None, mode="estimate"):
    """Certificate that a ball around x holds exactly mu zeros.

    The input point should be an approximate zero in (close to)
    normalized coordinates; mu defaults to the chain length detected at
    x. The certificate compares the deviation of the system from its
    order-mu truncation at x against a threshold; `holds` reports the
    comparison, and the radius d / (4 gamma^mu) is meaningful only when
    it holds.
    """
    x = np.asarray(x, dtype=complex)
    n = system.nvars
    if mu is None:
        basis = compute_dual_basis(system, x)
        mu = basis.mu

    J = system.jacobian(x)
    Jhat = J[: n - 1, 1:]

    # first-order deviation: everything the truncation removes at order 1
    H1 = np.zeros((n, n), dtype=complex)
    H1[: n - 1, 0] = J[: n - 1, 0]
    H1[n - 1, :] = J[n - 1, :]
    h_values, delta_mu_value, _ = _truncation_chain(system, x, mu)
    h_norms = [matrix_spectral_norm(H1)] + [abs(h) for h in h_values]

    # growth invariant of the truncated system, from adjusted tensors
    deg = system.max_degree()
    hat_tensors = []
    n_tensors = []
    for k in range(2, deg + 1):
        raw = system.derivative_tensor(x, k).array
        hat_tensors.append((k, raw[: n - 1]))
        last = raw[n - 1 : n].copy()
        if 2 <= k <= mu - 1:
            idx = (0,) + (0,) * k
            last[idx] -= math.factorial(k) * h_values[k - 2]
        n_tensors.append((k, last))
    ghat, hat_rows = _hat_supremum(Jhat, hat_tensors, mode)
    gn, n_rows = _n_supremum(delta_mu_value, n_tensors, mode)
    gamma = max(ghat, gn)
    report = GammaReport(
        gamma=gamma,
        gamma_hat=ghat,
        gamma_n=gn,
        mu=mu,
        delta_mu=complex(delta_mu_value),
        mode=mode,
        per_order=_merge_rows(hat_rows, n_rows),
    )

    sep = separation_constant(mu)
    radius = sep.d / (4.0 * gamma**mu)
    lhs = float(np.linalg.norm(system.eval_at(x)))
    for k in range(1, mu):
        lhs += h_norms[k - 1] * radius**k
    ainv = _a_inv_norm(Jhat, delta_mu_value)
    rhs = sep.d ** (mu + 1) / (2.0 * (4.0 * gamma**mu) ** mu * ainv)

    return ClusterCertificate(
        center=x,
        radius=radius,
        mu=mu,
        lhs=lhs,
        rhs=rhs,
        holds=bool(lhs < rhs),
        h_norms=h_norms,
        a_inv_norm=ainv,
        gamma_on_g=report,
        d=sep.d,
        mode=mode,
    )
