"""Refinement iterations for corank-one multiple zeros, with the
threshold constants that quantify their convergence regions.

Three iterations are provided. The two normalized variants assume the
system is presented in the distinguished coordinate shape at the zero:
`refine_double` for order two, `refine_triple` for order three. The
general variant re-rotates into a fresh normalizing frame on every step
and updates the kernel coordinate by a ratio of chain functionals, which
works in any coordinates and for any order.

Each variant contracts quadratically once the scale-free start quality
u = gamma^mu * distance is below the variant's threshold constant. The
constants are the first positive roots of explicit one-variable rational
equations; `threshold_constants` solves them to ten digits.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .dualspace import chainrule_Lk, compute_dual_basis, is_normalized, normalizing_frame
from .errors import SingularMatrixError
from .numkit import smallest_positive_root, solve_linear, svd

VARIANTS = ("normalized_double", "normalized_triple", "general")
_THRESHOLD_VARIANTS = ("normalized_double", "normalized_triple", "general_triple")

# scan brackets sit safely below the first pole of each equation
_BRACKET = {
    "normalized_double": 0.05,
    "normalized_triple": 0.05,
    "general_triple": 0.03,
}

_LOOSE_NORMALIZED_RTOL = 0.1


@dataclass
class ThresholdSet:
    variant: str
    mu: int
    u_converge: float
    u_quadratic: float


@dataclass
class NewtonTrace:
    iterates: list
    residual_norms: list
    step_norms: list
    frames: list
    converged: bool
    stop_reason: str
    variant: str
    mu: int
    warnings: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# single steps


def n1_step(source, z):
    """Correct the trailing coordinates by one regular step on the
    leading equations, holding the first coordinate fixed."""
    z = np.asarray(z, dtype=complex)
    n = source.nvars
    J = source.jacobian(z)
    fz = source.eval_at(z)
    y = z.copy()
    y[1:] = z[1:] - solve_linear(J[: n - 1, 1:], fz[: n - 1])
    return y


def refine_double(source, z):
    """One step of the order-two normalized iteration."""
    z = np.asarray(z, dtype=complex)
    n = source.nvars
    y = n1_step(source, z)
    e1 = (1,) + (0,) * (n - 1)
    e11 = (2,) + (0,) * (n - 1)
    d1 = source.partials_vector(e1, y)[n - 1]
    d11 = source.partials_vector(e11, y)[n - 1]
    if d11 == 0:
        raise SingularMatrixError("vanishing second derivative in the kernel direction")
    out = y.copy()
    out[0] = z[0] - d1 / d11
    return out


def refine_triple(source, z):
    """One step of the order-three normalized iteration."""
    z = np.asarray(z, dtype=complex)
    n = source.nvars
    y = n1_step(source, z)
    J = source.jacobian(y)
    Jhat = J[: n - 1, 1:]
    T2 = source.derivative_tensor(y, 2).array
    T3 = source.derivative_tensor(y, 3).array
    # correction shared by numerator and denominator
    C = solve_linear(Jhat, 0.5 * T2[: n - 1, 0, 0])
    num = T2[n - 1, 0, 0] / 6.0 - J[n - 1, 1:] @ C
    den = T3[n - 1, 0, 0, 0] / 6.0 - T2[n - 1, 0, 1:] @ C
    if den == 0:
        raise SingularMatrixError("vanishing third-order denominator")
    out = y.copy()
    out[0] = z[0] - num / den
    return out


def refine_general(source, z, mu):
    """One step of the frame-based iteration for any order mu >= 2.

    Returns (next_point, info) with info carrying the combined frame
    rotation and a drift warning if the two per-step frames differ more
    than a fifth of the singular value gap.
    """
    z = np.asarray(z, dtype=complex)
    n = source.nvars
    frame1, w, res1 = normalizing_frame(source, z)
    gap = float(res1.s[-2] - res1.s[-1]) if n >= 2 else 0.0
    Jw = frame1.jacobian(w)

    y = n1_step(frame1, w)

    Jy = frame1.jacobian(y)
    res2 = svd(Jy)
    perm = [n - 1] + list(range(n - 1))
    W2 = res2.V[:, perm]
    frame2 = frame1.compose(res2.U, W2)
    v = W2.conj().T @ y

    warning = None
    drift = float(np.linalg.norm(Jy - Jw))
    if gap > 0 and drift > gap / 5.0:
        warning = (
            "frame drift %.3e exceeds a fifth of the singular gap %.3e"
            % (drift, gap)
        )

    if mu == 2:
        e1 = (1,) + (0,) * (n - 1)
        prev = frame2.partials_vector(e1, v)[n - 1]
        chain = chainrule_Lk(frame2, v, kmax=2, require_normalized=False)
        dmu = chain.delta_values[-1][-1]
    else:
        chain = chainrule_Lk(frame2, v, kmax=mu, require_normalized=False)
        prev = chain.delta_values[mu - 3][-1]
        dmu = chain.delta_values[mu - 2][-1]
    if dmu == 0:
        raise SingularMatrixError("vanishing terminating chain value")

    out = v.copy()
    out[0] = v[0] - prev / (mu * dmu)
    info = {"frame_W": frame2.W, "warning": warning}
    return frame2.from_frame(out), info


# ---------------------------------------------------------------------------
# driver


def _choose_variant(source, z, mu):
    if mu in (2, 3) and is_normalized(source.jacobian(z), _LOOSE_NORMALIZED_RTOL):
        return "normalized_double" if mu == 2 else "normalized_triple"
    return "general"


def iterate_until(
    source,
    z0,
    mu=None,
    variant="auto",
    eps=1e-10,
    max_iter=50,
):
    """Run a refinement iteration to tolerance and report the trace.

    Stops when either the residual norm or the step norm drops to eps
    ('tolerance'), after three consecutive growing steps ('divergence'),
    when a linear solve degenerates ('singular_step'), or at max_iter.
    A point that already meets the residual tolerance returns a
    zero-iteration trace.
    """
    z = np.asarray(z0, dtype=complex)
    if mu is None:
        basis = compute_dual_basis(source, z)
        mu = basis.mu
    if variant == "auto":
        variant = _choose_variant(source, z, mu)
    if variant not in VARIANTS:
        raise ValueError("unknown variant %r" % variant)
    if variant == "normalized_double" and mu != 2:
        raise ValueError("order-two variant needs mu == 2")
    if variant == "normalized_triple" and mu != 3:
        raise ValueError("order-three variant needs mu == 3")

    iterates = [z.copy()]
    residuals = [float(np.linalg.norm(source.eval_at(z)))]
    steps = []
    frames = []
    warnings = []
    converged = False
    reason = "max_iter"

    if residuals[0] <= eps:
        return NewtonTrace(
            iterates=iterates,
            residual_norms=residuals,
            step_norms=[],
            frames=[],
            converged=True,
            stop_reason="tolerance",
            variant=variant,
            mu=mu,
            warnings=[],
        )

    grow = 0
    for _ in range(max_iter):
        try:
            if variant == "normalized_double":
                z_next = refine_double(source, z)
                frames.append(None)
            elif variant == "normalized_triple":
                z_next = refine_triple(source, z)
                frames.append(None)
            else:
                z_next, info = refine_general(source, z, mu)
                frames.append(info["frame_W"])
                if info["warning"]:
                    warnings.append(info["warning"])
        except SingularMatrixError as exc:
            reason = "singular_step"
            warnings.append(str(exc))
            break
        step = float(np.linalg.norm(z_next - z))
        z = z_next
        iterates.append(z.copy())
        residuals.append(float(np.linalg.norm(source.eval_at(z))))
        steps.append(step)
        if residuals[-1] <= eps or step <= eps:
            converged = True
            reason = "tolerance"
            break
        if len(steps) >= 2 and steps[-1] > steps[-2]:
            grow += 1
            if grow >= 3:
                reason = "divergence"
                break
        else:
            grow = 0

    return NewtonTrace(
        iterates=iterates,
        residual_norms=residuals,
        step_norms=steps,
        frames=frames,
        converged=converged,
        stop_reason=reason,
        variant=variant,
        mu=mu,
        warnings=warnings,
    )


# ---------------------------------------------------------------------------
# threshold constants


def _b21(u):
    return (1 - 2 * u) ** 2 * u / ((2 * (1 - 2 * u) ** 2 - 1) * (1 - u))


def _b22(u):
    return u / ((2 * (1 - 2 * u) ** 2 - 1) * (1 - u))


def _b23(u):
    num = u * (
        32 * u**6 - 144 * u**5 + 272 * u**4 - 288 * u**3 + 174 * u**2 - 52 * u + 5
    )
    den = (
        (24 * u**3 - 36 * u**2 + 18 * u - 1)
        * (u - 1) ** 3
        * (8 * u**2 - 8 * u + 1)
    )
    return num / den


def _b24(u):
    num = (2 * u - 1) ** 3 * (u - 2) * u
    den = (
        (24 * u**3 - 36 * u**2 + 18 * u - 1)
        * (u - 1) ** 3
        * (8 * u**2 - 8 * u + 1)
    )
    return num / den


def _a2(u):
    return 1.0 / ((2 * (1 - 2 * u) ** 2 - 1) * (1 - 2 * u))


def _a3(u):
    num = (2 * u - 1) ** 4 * (8 * u**2 - 8 * u + 1)
    den = 128 * u**6 - 384 * u**5 + 464 * u**4 - 320 * u**3 + 136 * u**2 - 30 * u + 1
    return num / den


def _b33(u):
    poly = (
        3072 * u**12
        - 25088 * u**11
        + 92480 * u**10
        - 202336 * u**9
        + 289640 * u**8
        - 282020 * u**7
        + 188614 * u**6
        - 85997 * u**5
        + 26342 * u**4
        - 5368 * u**3
        + 702 * u**2
        - 42 * u
    )
    pref = -_a3(u) / (
        3 * (2 * u - 1) ** 4 * (8 * u**2 - 8 * u + 1) ** 2 * (u - 1) ** 4
    )
    return pref * poly


def _b34(u):
    num = _a3(u) * (
        16 * u**6 - 72 * u**5 + 130 * u**4 - 106 * u**3 + 42 * u**2 - 9 * u
    )
    den = 3 * (8 * u**2 - 8 * u + 1) ** 2 * (u - 1) ** 4 * (2 * u - 1)
    return num / den


def _general_parts(u):
    l1 = (1 - 2 * u) ** 2 / ((2 * (1 - 2 * u) ** 2 - 1) * (1 - u) ** 3)
    l2 = (2 * u - 1) ** 6 / (
        (128 * u**6 - 384 * u**5 + 480 * u**4 - 336 * u**3 + 140 * u**2 - 32 * u + 1)
        * (1 - u) ** 3
    )
    r = l1 * u / (1 - l1 * u)
    l3 = math.sqrt(1 + r * r)
    return l1, l2, l3, r


def _general_b1(u):
    l1, _, _, r = _general_parts(u)
    return u + r


def _general_b2(u):
    l1, l2, l3, r = _general_parts(u)
    s = l1 * l3 * u
    t2 = l2 * l3 * u
    A = 4 * s * (1 - s) / ((1 - 2 * u) ** 2 * (1 - 2 * s) ** 2)
    P = (1 + A) ** 2
    terms = [
        (l2 / 3) * P * (u + r),
        (l2 / 3) * P * l1 * l3**2 * u / (1 - s),
        (l2**2 / 3) * (8 + 7 * A + 2 * A**2) * (u + r),
        (7 * l2**2 / 3) * P * (u**2 + (l1 * u) ** 2 / (1 - l1 * u)),
        (4 * l2**2 / 3) * P * u * (u + r) ** 2,
        (17 * l2 / 3) * P * l3**2 * u,
        (P / 6) * 8 * l2**3 * l3**2 * u * (12 * t2**2 - 16 * t2 + 6) / (1 - 2 * t2) ** 3,
        (P / 3) * u * 8 * l2**3 * l3**3 * u * (4 - 6 * t2) / (1 - 2 * t2) ** 2,
        (l2 / 2) * P * 4 * l1**2 * l3**2 * u * (4 * s**2 - 6 * s + 3) / (1 - 2 * s) ** 3,
        P * l2 * u * 4 * l1**2 * l3**3 * u * (3 - 4 * s) / (1 - 2 * s) ** 2,
    ]
    return sum(terms)


def rational_functions(variant, u):
    """Named values of the bound-tracking rational functions at u."""
    if variant == "normalized_double":
        return {
            "b_2_1": _b21(u),
            "b_2_2": _b22(u),
            "b_2_3": _b23(u),
            "b_2_4": _b24(u),
        }
    if variant == "normalized_triple":
        return {
            "a_2": _a2(u),
            "a_3": _a3(u),
            "b_2_1": _b21(u),
            "b_3_3": _b33(u),
            "b_3_4": _b34(u),
        }
    if variant == "general_triple":
        l1, l2, l3, _ = _general_parts(u)
        return {
            "l_1": l1,
            "l_2": l2,
            "l_3": l3,
            "b_1": _general_b1(u),
            "b_2": _general_b2(u),
        }
    raise ValueError("unknown variant %r" % variant)


def _threshold_equation(variant):
    if variant == "normalized_double":
        return lambda u: 2 * _b21(u) ** 2 + 2 * _b23(u) ** 2
    if variant == "normalized_triple":
        return lambda u: 2 * _b21(u) ** 2 + 2 * _b33(u) ** 2
    if variant == "general_triple":
        return lambda u: _general_b1(u) ** 2 + _general_b2(u) ** 2
    raise ValueError("unknown variant %r" % variant)


def threshold_constants(variant, tol=1e-12):
    """Convergence and quadratic-decay thresholds for a variant.

    u_converge solves sum-of-squares = 1 (the next error is strictly
    smaller); u_quadratic solves sum-of-squares = 1/4 (the error at step
    k shrinks by (1/2)^(2^k - 1)).
    """
    if variant not in _THRESHOLD_VARIANTS:
        raise ValueError(
            "variant must be one of %s" % (", ".join(_THRESHOLD_VARIANTS))
        )
    eq = _threshold_equation(variant)
    upper = _BRACKET[variant]
    u_conv = smallest_positive_root(lambda u: 1.0 - eq(u), upper, tol=tol)
    u_quad = smallest_positive_root(lambda u: 0.25 - eq(u), upper, tol=tol)
    mu = 2 if variant == "normalized_double" else 3
    return ThresholdSet(
        variant=variant, mu=mu, u_converge=u_conv, u_quadratic=u_quad
    )
