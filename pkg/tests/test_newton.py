import numpy as np
import pytest

from mzero.newton import (
    VARIANTS,
    iterate_until,
    n1_step,
    rational_functions,
    refine_double,
    refine_general,
    refine_triple,
    threshold_constants,
)
from mzero.polycore import parse_system

from conftest import make_normalized_system

START = np.array([-0.01, 0.01], dtype=complex)


# ---------------------------------------------------------------------------
# threshold constants


@pytest.mark.parametrize(
    "variant,conv,quad",
    [
        ("normalized_double", 0.041814421474919074, 0.0317533471785282),
        ("normalized_triple", 0.022162723471046773, 0.015389030364531207),
        ("general_triple", 0.01371438771529938, 0.0098235878894047356),
    ],
)
def test_threshold_values(variant, conv, quad):
    ts = threshold_constants(variant)
    assert ts.u_converge == pytest.approx(conv, abs=1e-10)
    assert ts.u_quadratic == pytest.approx(quad, abs=1e-10)
    assert ts.u_quadratic < ts.u_converge


def test_threshold_solves_its_equation():
    for variant in ("normalized_double", "normalized_triple"):
        ts = threshold_constants(variant)
        r = rational_functions(variant, ts.u_converge)
        first = r["b_2_1"]
        second = r["b_2_3"] if variant == "normalized_double" else r["b_3_3"]
        assert 2 * first**2 + 2 * second**2 == pytest.approx(1.0, abs=1e-9)
        r = rational_functions(variant, ts.u_quadratic)
        second = r["b_2_3"] if variant == "normalized_double" else r["b_3_3"]
        assert 2 * r["b_2_1"] ** 2 + 2 * second**2 == pytest.approx(0.25, abs=1e-9)


def test_general_threshold_solves_its_equation():
    ts = threshold_constants("general_triple")
    r = rational_functions("general_triple", ts.u_converge)
    assert r["b_1"] ** 2 + r["b_2"] ** 2 == pytest.approx(1.0, abs=1e-9)
    r = rational_functions("general_triple", ts.u_quadratic)
    assert r["b_1"] ** 2 + r["b_2"] ** 2 == pytest.approx(0.25, abs=1e-9)


def test_rational_functions_unknown_variant():
    with pytest.raises(ValueError):
        rational_functions("cubic", 0.01)
    with pytest.raises(ValueError):
        threshold_constants("cubic")


# ---------------------------------------------------------------------------
# single steps on decoupled model systems


def test_double_step_is_exact_on_model():
    sys_ = parse_system("vars: X1 X2\nf1: X2\nf2: X1^2")
    for z in [np.array([0.3, 0.2]), np.array([0.05 - 0.02j, -0.04 + 0.01j])]:
        out = refine_double(sys_, z)
        assert np.linalg.norm(out) <= 1e-15


def test_triple_step_is_exact_on_model():
    sys_ = parse_system("vars: X1 X2\nf1: X2\nf2: X1^3")
    for z in [np.array([0.2, 0.1]), np.array([-0.03 + 0.01j, 0.02])]:
        out = refine_triple(sys_, z)
        assert np.linalg.norm(out) <= 1e-15


def test_general_step_matches_model():
    sys_ = parse_system("vars: X1 X2\nf1: X2\nf2: X1^2")
    out, info = refine_general(sys_, np.array([0.05, 0.03]), mu=2)
    assert np.linalg.norm(out) <= 1e-12
    assert info["warning"] is None


def test_n1_step_clears_trailing_residual():
    rng = np.random.default_rng(61)
    sys_ = make_normalized_system(3, 2, rng)
    z = np.array([1e-3, 2e-3, -1e-3], dtype=complex)
    y = n1_step(sys_, z)
    # the leading coordinate is untouched, the rest take a Newton update
    assert y[0] == z[0]
    resid_before = np.linalg.norm(sys_.eval_at(z)[:2])
    resid_after = np.linalg.norm(sys_.eval_at(y)[:2])
    assert resid_after < resid_before * 0.01


# ---------------------------------------------------------------------------
# the worked triple zero


def test_triple_iteration_trace(ex_triple):
    trace = iterate_until(ex_triple, START, mu=3, variant="normalized_triple")
    assert trace.converged
    assert trace.stop_reason == "tolerance"
    assert trace.mu == 3
    two = trace.iterates[2]
    assert two[0] == pytest.approx(-4.12918259e-8, abs=5e-12)
    assert two[1] == pytest.approx(-2.95058179e-8, abs=5e-12)
    assert np.linalg.norm(trace.iterates[-1]) <= 1e-10


def test_general_iteration_trace(ex_triple):
    trace = iterate_until(ex_triple, START, mu=3, variant="general")
    assert trace.converged
    assert trace.stop_reason == "tolerance"
    norms = [np.linalg.norm(z) for z in trace.iterates]
    assert norms[1] == pytest.approx(4.5139e-4, rel=1e-3)
    assert norms[2] == pytest.approx(6.3531e-7, rel=1e-3)
    assert norms[-1] <= 1e-10
    # each step contracts roughly quadratically
    assert norms[2] <= norms[1] ** 2 * 10
    assert norms[3] <= norms[2] ** 2 * 10


def test_zero_iteration_trace(ex_triple):
    trace = iterate_until(ex_triple, np.zeros(2), mu=3)
    assert trace.converged
    assert trace.stop_reason == "tolerance"
    assert len(trace.iterates) == 1
    assert trace.variant == "normalized_triple"


def test_auto_variant_prefers_general_off_shape(ex_triple):
    # away from the zero the Jacobian leaves the distinguished shape, the
    # loose check fails and the frame-based iteration takes over
    trace = iterate_until(ex_triple, START, mu=3)
    assert trace.variant == "general"


def test_variant_mu_mismatch(ex_triple):
    with pytest.raises(ValueError):
        iterate_until(ex_triple, START, mu=3, variant="normalized_double")
    with pytest.raises(ValueError):
        iterate_until(ex_triple, START, mu=3, variant="thirdorder")


def test_variants_tuple():
    assert set(VARIANTS) == {"normalized_double", "normalized_triple", "general"}


# ---------------------------------------------------------------------------
# stop reasons


def test_singular_step_stop():
    sys_ = parse_system("vars: X1 X2\nf1: X2^2\nf2: X1^2")
    trace = iterate_until(
        sys_, np.array([0.1, 0.0]), mu=2, variant="normalized_double"
    )
    assert not trace.converged
    assert trace.stop_reason == "singular_step"
    assert trace.warnings


def test_divergence_stop():
    sys_ = parse_system("vars: X1 X2\nf1: X2 + X1^2\nf2: X1^2 + 10*X1*X2")
    trace = iterate_until(
        sys_,
        np.array([1.0, 0.1]),
        mu=2,
        variant="normalized_double",
        eps=1e-14,
        max_iter=30,
    )
    assert not trace.converged
    assert trace.stop_reason == "divergence"


def test_max_iter_stop(ex_triple):
    trace = iterate_until(
        ex_triple, START, mu=3, variant="normalized_triple", eps=1e-16, max_iter=1
    )
    assert not trace.converged
    assert trace.stop_reason == "max_iter"
    assert len(trace.iterates) == 2


# ---------------------------------------------------------------------------
# contraction on constructed zeros


@pytest.mark.parametrize("n", [2, 3, 4])
def test_double_contraction(n):
    rng = np.random.default_rng(70 + n)
    sys_ = make_normalized_system(n, 2, rng)
    z = np.zeros(n, dtype=complex)
    z += 1e-3 * (rng.normal(size=n) + 1j * rng.normal(size=n))
    for _ in range(3):
        z = refine_double(sys_, z)
    assert np.linalg.norm(z) <= 1e-12


@pytest.mark.parametrize("n", [2, 3, 4])
def test_triple_contraction(n):
    rng = np.random.default_rng(80 + n)
    sys_ = make_normalized_system(n, 3, rng)
    z = np.zeros(n, dtype=complex)
    z += 1e-3 * (rng.normal(size=n) + 1j * rng.normal(size=n))
    for _ in range(3):
        z = refine_triple(sys_, z)
    assert np.linalg.norm(z) <= 1e-11
