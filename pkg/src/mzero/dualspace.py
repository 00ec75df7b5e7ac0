"""Local dual bases for corank-one isolated zeros.

The multiplicity structure of a zero whose Jacobian has a one-dimensional
kernel is a single chain of differential functionals Lambda_0, ...,
Lambda_{mu-1}. Each step of the chain is built from the previous ones by
the order-raising map `psi`, corrected by first-order terms whose
coefficients solve a small linear system against the invertible Jacobian
block. The chain terminates at the first order whose raw functional falls
outside the column space of the Jacobian; that order is the multiplicity.

Two independent construction routes are provided. `compute_dual_basis`
uses the order-raising recursion directly on the input system.
`chainrule_Lk` rebuilds the same functionals on a rotated view of the
system through a derivative-level product rule, without expanding the
rotated polynomials. Agreement of the two routes is a useful end-to-end
check and is exercised in the test suite.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import polycore
from .errors import (
    BreadthError,
    CorankError,
    MultiplicityNotFoundError,
    NotNormalizedError,
)
from .numkit import solve_least_squares, solve_linear, svd

DEFAULT_MAX_ORDER = 10
DEFAULT_GAP_TOL = 1e-8
DEFAULT_DELTA_ZERO_TOL = 1e-8
_NORMALIZED_RTOL = 1e-8
_BREADTH_RTOL = 1e-6


class DualFunctional:
    """Finite combination sum_alpha c_alpha d^alpha of scaled partials.

    d^alpha denotes (1/alpha!) times the |alpha|-fold partial derivative,
    evaluated at the base point supplied on application.
    """

    __slots__ = ("nvars", "coeffs")

    def __init__(self, nvars, coeffs=None):
        self.nvars = nvars
        self.coeffs = {}
        if coeffs:
            for alpha, c in coeffs.items():
                c = complex(c)
                if c != 0:
                    self.coeffs[alpha] = c

    @classmethod
    def one(cls, nvars):
        return cls(nvars, {(0,) * nvars: 1.0})

    @classmethod
    def d(cls, nvars, sigma):
        """The first-order functional along variable index sigma (0-based)."""
        alpha = tuple(1 if j == sigma else 0 for j in range(nvars))
        return cls(nvars, {alpha: 1.0})

    def order(self):
        return max((sum(a) for a in self.coeffs), default=0)

    def sorted_items(self):
        return sorted(self.coeffs.items(), key=lambda kv: (sum(kv[0]), kv[0]))

    def __add__(self, other):
        out = dict(self.coeffs)
        for alpha, c in other.coeffs.items():
            s = out.get(alpha, 0j) + c
            if s == 0:
                out.pop(alpha, None)
            else:
                out[alpha] = s
        return DualFunctional(self.nvars, out)

    def __mul__(self, scalar):
        scalar = complex(scalar)
        return DualFunctional(
            self.nvars, {a: c * scalar for a, c in self.coeffs.items()}
        )

    __rmul__ = __mul__

    def psi(self, sigma):
        """Order-raising map: keep terms with no support left of sigma,
        then append one derivative along sigma."""
        out = {}
        for alpha, c in self.coeffs.items():
            if any(alpha[j] for j in range(sigma)):
                continue
            shifted = list(alpha)
            shifted[sigma] += 1
            out[tuple(shifted)] = out.get(tuple(shifted), 0j) + c
        return DualFunctional(self.nvars, out)

    def dop(self, sigma):
        """Derivative-composition map d^beta -> (beta_sigma + 1) d^(beta+e)."""
        out = {}
        for alpha, c in self.coeffs.items():
            shifted = list(alpha)
            shifted[sigma] += 1
            key = tuple(shifted)
            out[key] = out.get(key, 0j) + c * (alpha[sigma] + 1)
        return DualFunctional(self.nvars, out)

    def lower(self, sigma):
        """Formal anti-raising map d^beta -> d^(beta - e_sigma), dropping
        terms with no derivative along sigma. Used by closedness checks."""
        out = {}
        for alpha, c in self.coeffs.items():
            if alpha[sigma] == 0:
                continue
            shifted = list(alpha)
            shifted[sigma] -= 1
            key = tuple(shifted)
            out[key] = out.get(key, 0j) + c
        return DualFunctional(self.nvars, out)

    def apply(self, target, x):
        return polycore.apply_functional(self.coeffs, target, x)

    def as_vector(self, alphas):
        return np.array([self.coeffs.get(a, 0j) for a in alphas], dtype=complex)

    def __repr__(self):
        parts = []
        for alpha, c in self.sorted_items():
            parts.append("%r*d%s" % (c, "".join(str(a) for a in alpha)))
        return "DualFunctional(" + (" + ".join(parts) if parts else "0") + ")"


@dataclass
class DualBasis:
    """Chain of dual functionals at a corank-one zero.

    lambdas holds Lambda_0 .. Lambda_{mu-1}; deltas holds the raw
    functionals of orders 2 .. mu before first-order correction, with
    delta_values their application to the system at the base point.
    a_coeffs row k-1 is the correction vector of step k (row 0 is the
    kernel direction). corank_gap is sigma_n / sigma_{n-1}.
    """

    lambdas: list
    deltas: list
    a_coeffs: np.ndarray
    mu: int
    breadth_one: bool
    corank_gap: float
    delta_values: list = field(default_factory=list)
    duality_residuals: np.ndarray = None
    normalized: bool = True
    singular_values: np.ndarray = None


def is_normalized(J, rel_tol=_NORMALIZED_RTOL):
    """Whether a Jacobian has the distinguished shape: first column and
    the off-first entries of the last row both negligible."""
    J = np.asarray(J, dtype=complex)
    scale = float(np.linalg.svd(J, compute_uv=False)[0]) if J.size else 0.0
    if scale == 0.0:
        return True
    col = float(np.linalg.norm(J[:, 0]))
    row = float(np.linalg.norm(J[-1, 1:]))
    return col <= rel_tol * scale and row <= rel_tol * scale


def corank_one_check(source, x, gap_tol=DEFAULT_GAP_TOL):
    """Return (ok, singular_values) for the Jacobian at x.

    ok means exactly one negligible singular value: the smallest is below
    gap_tol relative to the second smallest, and the second smallest is
    not itself negligible against the largest.
    """
    J = source.jacobian(np.asarray(x, dtype=complex))
    s = np.linalg.svd(J, compute_uv=False)
    if len(s) < 2:
        return False, s
    ok = bool(s[-1] <= gap_tol * s[-2] and s[-2] > gap_tol * s[0])
    return ok, s


def _delta_from_chain(a_rows, lambdas, k, nvars):
    """Raw order-k functional from the chain built so far."""
    delta = DualFunctional(nvars)
    for sigma in range(nvars):
        acc = DualFunctional(nvars)
        for i in range(1, k):
            coeff = a_rows[i - 1][sigma]
            if coeff != 0:
                acc = acc + lambdas[k - i] * coeff
        delta = delta + acc.psi(sigma)
    return delta


def compute_dual_basis(
    source,
    x,
    max_order=DEFAULT_MAX_ORDER,
    gap_tol=DEFAULT_GAP_TOL,
    delta_zero_tol=DEFAULT_DELTA_ZERO_TOL,
):
    """Multiplicity structure of an isolated zero with corank-one Jacobian.

    Parameters
    ----------
    source : PolySystem or NormalizedFrame
    x : array_like
        Base point, in the coordinates of `source`.
    max_order : int
        Recursion cap; exceeding it raises MultiplicityNotFoundError.
    gap_tol, delta_zero_tol : float
        Relative tolerances for the corank test and for deciding when a
        raw functional still lies in the Jacobian column space.

    Raises
    ------
    CorankError
        If the Jacobian does not show a clean one-dimensional kernel.
    BreadthError
        If a correction solve leaves a residual incompatible with a
        single-chain structure.
    """
    x = np.asarray(x, dtype=complex)
    n = source.nvars
    J = source.jacobian(x)
    res = svd(J)
    s = res.s
    if len(s) < 2 or not (s[-1] <= gap_tol * s[-2] and s[-2] > gap_tol * s[0]):
        raise CorankError(
            "Jacobian is not corank one at the point (singular values %s)"
            % np.array2string(s, precision=3)
        )
    corank_gap = float(s[-1] / s[-2])
    normalized = is_normalized(J)

    if normalized:
        a1 = np.zeros(n, dtype=complex)
        a1[0] = 1.0
    else:
        a1 = res.V[:, -1].copy()
    u_last = res.U[:, -1]

    lam0 = DualFunctional.one(n)
    lam1 = DualFunctional(n)
    for sigma in range(n):
        if a1[sigma] != 0:
            lam1 = lam1 + DualFunctional.d(n, sigma) * a1[sigma]
    lambdas = [lam0, lam1]
    a_rows = [a1]
    deltas = []
    delta_values = []

    mu = None
    Jhat = J[: n - 1, 1:]
    for k in range(2, max_order + 1):
        delta = _delta_from_chain(a_rows, lambdas, k, n)
        vals = delta.apply(source, x)
        scale = float(np.linalg.norm(vals))
        if normalized:
            resid = abs(vals[-1])
        else:
            resid = abs(np.vdot(u_last, vals))
        deltas.append(delta)
        delta_values.append(vals)
        if resid > delta_zero_tol * scale + 1e-14:
            mu = k
            break
        # still inside the column space: solve for the correction
        if normalized:
            ahat = solve_linear(Jhat, -vals[: n - 1])
            solve_resid = 0.0
        else:
            ahat, solve_resid = solve_least_squares(J[:, 1:], -vals)
        if solve_resid > _BREADTH_RTOL * scale + 1e-12:
            raise BreadthError(
                "correction solve residual %.3e is too large for a "
                "single-chain structure at order %d" % (solve_resid, k)
            )
        a_k = np.zeros(n, dtype=complex)
        a_k[1:] = ahat
        lam = delta
        for sigma in range(1, n):
            if a_k[sigma] != 0:
                lam = lam + DualFunctional.d(n, sigma) * a_k[sigma]
        lambdas.append(lam)
        a_rows.append(a_k)

    if mu is None:
        raise MultiplicityNotFoundError(
            "no terminating order found up to max_order=%d" % max_order
        )

    lambdas = lambdas[:mu]
    duality = np.zeros(mu - 1)
    for j in range(1, mu):
        duality[j - 1] = float(np.max(np.abs(lambdas[j].apply(source, x))))

    return DualBasis(
        lambdas=lambdas,
        deltas=deltas,
        a_coeffs=np.array(a_rows),
        mu=mu,
        breadth_one=True,
        corank_gap=corank_gap,
        delta_values=delta_values,
        duality_residuals=duality,
        normalized=normalized,
        singular_values=np.array(s, dtype=float),
    )


def chainrule_Lk(
    frame,
    w,
    kmax=None,
    max_order=DEFAULT_MAX_ORDER,
    gap_tol=DEFAULT_GAP_TOL,
    delta_zero_tol=DEFAULT_DELTA_ZERO_TOL,
    require_normalized=True,
):
    """Dual chain on a rotated view, via the derivative product rule.

    The raw order-k functionals are accumulated as P_k = sum over j and
    sigma of (j/k) a_{j,sigma} D_sigma(L_{k-j}), with L_k = P_k plus its
    first-order correction and L_1 the derivative along the first frame
    variable. Derivatives of the rotated system come from contracted
    tensors of the original system; nothing is expanded symbolically.

    With kmax=None the recursion terminates like `compute_dual_basis` and
    returns the multiplicity. With an explicit kmax it runs to exactly
    that order with no membership test, which is what the refinement
    iterations need near (rather than at) a multiple zero.
    """
    w = np.asarray(w, dtype=complex)
    n = frame.nvars
    J = frame.jacobian(w)
    if require_normalized and not is_normalized(J):
        raise NotNormalizedError(
            "frame Jacobian at the point is not in the distinguished shape"
        )
    s = np.linalg.svd(J, compute_uv=False)
    corank_gap = float(s[-1] / s[-2]) if len(s) >= 2 and s[-2] > 0 else float("inf")
    Jhat = J[: n - 1, 1:]

    a1 = np.zeros(n, dtype=complex)
    a1[0] = 1.0
    lambdas = [DualFunctional.one(n), DualFunctional.d(n, 0)]
    a_rows = [a1]
    deltas = []
    delta_values = []
    mu = None

    limit = kmax if kmax is not None else max_order
    for k in range(2, limit + 1):
        pk = DualFunctional(n)
        for j in range(1, k):
            L = lambdas[k - j]
            for sigma in range(n):
                coeff = a_rows[j - 1][sigma]
                if coeff != 0:
                    pk = pk + L.dop(sigma) * (coeff * j / k)
        vals = pk.apply(frame, w)
        deltas.append(pk)
        delta_values.append(vals)
        if kmax is None:
            scale = float(np.linalg.norm(vals))
            if abs(vals[-1]) > delta_zero_tol * scale + 1e-14:
                mu = k
                break
        if k == limit and kmax is not None:
            break
        ahat = solve_linear(Jhat, -vals[: n - 1])
        a_k = np.zeros(n, dtype=complex)
        a_k[1:] = ahat
        lam = pk
        for sigma in range(1, n):
            if a_k[sigma] != 0:
                lam = lam + DualFunctional.d(n, sigma) * a_k[sigma]
        lambdas.append(lam)
        a_rows.append(a_k)

    if kmax is None:
        if mu is None:
            raise MultiplicityNotFoundError(
                "no terminating order found up to max_order=%d" % max_order
            )
        lambdas = lambdas[:mu]
    else:
        mu = kmax

    duality = np.zeros(max(len(lambdas) - 1, 0))
    for j in range(1, len(lambdas)):
        duality[j - 1] = float(np.max(np.abs(lambdas[j].apply(frame, w))))

    return DualBasis(
        lambdas=lambdas,
        deltas=deltas,
        a_coeffs=np.array(a_rows),
        mu=mu,
        breadth_one=True,
        corank_gap=corank_gap,
        delta_values=delta_values,
        duality_residuals=duality,
        normalized=True,
        singular_values=np.array(s, dtype=float),
    )


def normalizing_frame(source, x):
    """Rotated view whose Jacobian at x is the distinguished shape.

    Returns (frame, w, svd_result) where w are the coordinates of x in the
    frame. The kernel-most right singular vector becomes the first frame
    variable; the left factor is kept in its original order, which places
    the near-degenerate row last.
    """
    x = np.asarray(x, dtype=complex)
    n = source.nvars
    J = source.jacobian(x)
    res = svd(J)
    perm = [n - 1] + list(range(n - 1))
    W = res.V[:, perm]
    frame = polycore.unitary_pullback(source, res.U, W)
    return frame, frame.to_frame(x), res
