import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mzero.errors import ParseError
from mzero.polycore import (
    Poly,
    PolySystem,
    apply_functional,
    parse_system,
    shift_basepoint,
    unitary_pullback,
)

from conftest import EX_DOUBLE, EX_TRIPLE, random_unitary


# ---------------------------------------------------------------------------
# parsing


def test_parse_double_system_exact():
    sys_ = parse_system(EX_DOUBLE)
    assert sys_.var_names == ["X1", "X2"]
    assert sys_.labels == ["f1", "f2"]
    f1, f2 = sys_.polys
    assert f1.terms[(2, 0)] == 1.0
    assert f1.terms[(1, 0)] == -0.25
    assert f1.terms[(0, 1)] == -0.5
    assert f2.terms == {(1, 1): 0.5}


def test_parse_triple_system_expands_cube():
    sys_ = parse_system(EX_TRIPLE)
    f2 = sys_.polys[1]
    # (8 X1 - 3 X2)^2 (3 X1 + 8 X2), expanded by hand
    assert f2.terms[(3, 0)] == 192.0
    assert f2.terms[(2, 1)] == 368.0
    assert f2.terms[(1, 2)] == -357.0
    assert f2.terms[(0, 3)] == 72.0
    f1 = sys_.polys[0]
    assert f1.terms[(0, 1)] == pytest.approx(math.sqrt(73) / 12, rel=1e-15)
    assert f1.terms[(2, 0)] == pytest.approx(64 / 73, rel=1e-15)


def test_parse_sqrt_of_perfect_square_is_exact():
    sys_ = parse_system("vars: X\nf: sqrt(9)*X")
    assert sys_.polys[0].terms[(1,)] == 3.0


def test_parse_imaginary_and_scientific():
    sys_ = parse_system("vars: X Y\nf: 2i*X + 1.5e-3*Y\ng: X*Y")
    f = sys_.polys[0]
    assert f.terms[(1, 0)] == 2j
    assert f.terms[(0, 1)] == 1.5e-3


def test_parse_comments_and_semicolons():
    text = "# heading\nvars: X Y\nf: X^2; g: Y - 1/2  # inline\n"
    sys_ = parse_system(text)
    assert sys_.n == 2
    assert sys_.polys[1].terms[(0, 0)] == -0.5


@pytest.mark.parametrize(
    "bad",
    [
        "f: X^2",                       # no vars line
        "vars: X Y\nf: X*Y",            # not square
        "vars: X\nf: X\nf: X^2",        # duplicate label
        "vars: X X\nf: X\ng: X",        # duplicate variable
        "vars: X\nf: X^(1/2)",          # fractional exponent
        "vars: X\nf: 1/X",              # division by a variable
        "vars: X\nf: X +",              # dangling operator
        "vars: X\nf: sqrt(X)",          # sqrt of a non-constant
    ],
)
def test_parse_rejects(bad):
    with pytest.raises(ParseError):
        parse_system(bad)


def test_unary_minus_and_power():
    sys_ = parse_system("vars: X\nf: -X^3 + (-2)*X")
    assert sys_.polys[0].terms[(3,)] == -1.0
    assert sys_.polys[0].terms[(1,)] == -2.0


# ---------------------------------------------------------------------------
# evaluation and derivatives


def _hand_partial(poly, j):
    """Differentiate a Poly along variable j by direct term bookkeeping."""
    out = {}
    for mono, c in poly.terms.items():
        if mono[j] == 0:
            continue
        lowered = list(mono)
        lowered[j] -= 1
        out[tuple(lowered)] = out.get(tuple(lowered), 0j) + c * mono[j]
    return Poly(poly.nvars, out)


def test_eval_matches_direct():
    sys_ = parse_system(EX_DOUBLE)
    x = np.array([0.3 + 0.1j, -0.2])
    vals = sys_.eval_at(x)
    f1 = x[0] ** 2 - 0.25 * x[0] - 0.5 * x[1]
    f2 = 0.5 * x[0] * x[1]
    assert np.allclose(vals, [f1, f2], atol=1e-15)


def test_partial_at_matches_hand_derivative():
    rng = np.random.default_rng(21)
    sys_ = parse_system(EX_TRIPLE)
    f2 = sys_.polys[1]
    x = rng.normal(size=2) + 1j * rng.normal(size=2)
    dd = _hand_partial(_hand_partial(f2, 0), 1)
    assert f2.partial_at((1, 1), x) == pytest.approx(dd.eval_at(x), rel=1e-12)
    ddd = _hand_partial(dd, 0)
    assert f2.partial_at((2, 1), x) == pytest.approx(ddd.eval_at(x), rel=1e-12)


def test_jacobian_matches_hand_derivative():
    rng = np.random.default_rng(22)
    sys_ = parse_system(EX_TRIPLE)
    x = rng.normal(size=2) + 1j * rng.normal(size=2)
    J = sys_.jacobian(x)
    for i, p in enumerate(sys_.polys):
        for j in range(2):
            assert J[i, j] == pytest.approx(_hand_partial(p, j).eval_at(x), rel=1e-12)


def test_derivative_tensor_symmetric_and_consistent():
    rng = np.random.default_rng(23)
    sys_ = parse_system(EX_TRIPLE)
    x = rng.normal(size=2)
    T = sys_.derivative_tensor(x, 3).array
    assert np.allclose(T, np.swapaxes(T, 1, 2), atol=1e-12)
    assert np.allclose(T, np.swapaxes(T, 2, 3), atol=1e-12)
    # entry (i, alpha) carries the raw mixed partial
    f2 = sys_.polys[1]
    ref = _hand_partial(_hand_partial(_hand_partial(f2, 0), 0), 1).eval_at(x)
    assert T[1, 0, 0, 1] == pytest.approx(ref, rel=1e-12)


def test_taylor_identity_on_binomials():
    # the scaled functionals are dual to the shifted monomial basis
    x = np.array([0.4, -0.7 + 0.2j])
    for beta in [(1, 0), (0, 2), (2, 1), (1, 2)]:
        p = Poly.constant(2, 1.0)
        for j, e in enumerate(beta):
            base = Poly(2, {tuple(1 if i == j else 0 for i in range(2)): 1.0,
                            (0, 0): -x[j]})
            p = p * base.pow_int(e)
        for alpha in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (2, 1), (1, 2)]:
            got = apply_functional({alpha: 1.0}, p, x)
            want = 1.0 if alpha == beta else 0.0
            assert got == pytest.approx(want, abs=1e-10)


small = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False, width=32)


@settings(max_examples=25, deadline=None)
@given(st.lists(small, min_size=6, max_size=6), st.lists(small, min_size=2, max_size=2))
def test_shift_round_trip(coeffs, point):
    p = Poly(2, {(2, 0): coeffs[0], (1, 1): coeffs[1], (0, 2): coeffs[2],
                 (1, 0): coeffs[3], (0, 1): coeffs[4], (0, 0): coeffs[5]})
    x = np.array(point, dtype=complex)
    back = p.shift(x).shift(-x)
    for mono in p.terms:
        assert back.terms.get(mono, 0.0) == pytest.approx(p.terms[mono], abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.lists(small, min_size=6, max_size=6),
       st.lists(small, min_size=2, max_size=2),
       st.lists(small, min_size=2, max_size=2))
def test_shift_evaluates_at_offset(coeffs, xs, ys):
    p = Poly(2, {(2, 0): coeffs[0], (1, 1): coeffs[1], (0, 2): coeffs[2],
                 (1, 0): coeffs[3], (0, 1): coeffs[4], (0, 0): coeffs[5]})
    x = np.array(xs, dtype=complex)
    y = np.array(ys, dtype=complex)
    assert p.shift(x).eval_at(y) == pytest.approx(p.eval_at(y + x), abs=1e-9)


def test_shift_basepoint_moves_zero():
    sys_ = parse_system(EX_DOUBLE)
    moved = shift_basepoint(sys_, np.array([0.25, 0.0]))
    # (1/4, 0) is a zero of the original, so the origin is one of the shifted
    assert np.allclose(moved.eval_at(np.zeros(2)), 0.0, atol=1e-15)


def test_subs_linear_evaluates_through_matrix():
    rng = np.random.default_rng(24)
    sys_ = parse_system(EX_TRIPLE)
    W = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    y = rng.normal(size=2) + 1j * rng.normal(size=2)
    for p in sys_.polys:
        assert p.subs_linear(W).eval_at(y) == pytest.approx(p.eval_at(W @ y), rel=1e-12)


# ---------------------------------------------------------------------------
# rotated views


def test_frame_matches_materialized():
    rng = np.random.default_rng(25)
    sys_ = parse_system(EX_TRIPLE)
    U = random_unitary(2, rng)
    W = random_unitary(2, rng)
    frame = unitary_pullback(sys_, U, W)
    flat = frame.materialize()
    y = rng.normal(size=2) + 1j * rng.normal(size=2)
    assert np.allclose(frame.eval_at(y), flat.eval_at(y), atol=1e-12)
    assert np.allclose(frame.jacobian(y), flat.jacobian(y), atol=1e-12)
    T_frame = frame.derivative_tensor(y, 3).array
    T_flat = flat.derivative_tensor(y, 3).array
    assert np.allclose(T_frame, T_flat, atol=1e-10)


def test_frame_round_trip_coordinates():
    rng = np.random.default_rng(26)
    sys_ = parse_system(EX_DOUBLE)
    W = random_unitary(2, rng)
    frame = unitary_pullback(sys_, np.eye(2), W)
    x = rng.normal(size=2) + 1j * rng.normal(size=2)
    assert np.allclose(frame.from_frame(frame.to_frame(x)), x, atol=1e-14)


def test_frames_compose():
    rng = np.random.default_rng(27)
    sys_ = parse_system(EX_DOUBLE)
    U1, W1 = random_unitary(2, rng), random_unitary(2, rng)
    U2, W2 = random_unitary(2, rng), random_unitary(2, rng)
    once = unitary_pullback(unitary_pullback(sys_, U1, W1), U2, W2)
    twice = unitary_pullback(sys_, U1 @ U2, W1 @ W2)
    y = rng.normal(size=2) + 1j * rng.normal(size=2)
    assert np.allclose(once.eval_at(y), twice.eval_at(y), atol=1e-13)
    assert once.system is sys_


def test_partials_vector_through_frame():
    rng = np.random.default_rng(28)
    sys_ = parse_system(EX_TRIPLE)
    U = random_unitary(2, rng)
    W = random_unitary(2, rng)
    frame = unitary_pullback(sys_, U, W)
    flat = frame.materialize()
    y = np.array([0.1, -0.2 + 0.05j])
    for alpha in [(1, 0), (0, 1), (2, 0), (1, 1), (2, 1)]:
        got = frame.partials_vector(alpha, y)
        want = np.array([p.partial_at(alpha, y) for p in flat.polys])
        assert np.allclose(got, want, atol=1e-10)


def test_system_shift_composition():
    sys_ = parse_system(EX_TRIPLE)
    a = np.array([0.1, 0.2])
    b = np.array([-0.05, 0.15])
    once = sys_.shift(a).shift(b)
    both = sys_.shift(a + b)
    y = np.array([0.3, -0.4])
    assert np.allclose(once.eval_at(y), both.eval_at(y), atol=1e-12)
