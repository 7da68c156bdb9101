import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import adjoint_error, as_matrix, crandn
from nritv.operators import (
    GRIDS,
    encode,
    encode_adjoint,
    fft2c,
    grad,
    grad_adjoint,
    ifft2c,
    interp,
    interp_adjoint,
    interp_adjoint_sum,
    map_rotated_gf,
    rotate90,
    rotate_mask,
)
from nritv.prox import field_set_nuclear_norms


def loop_interp_adjoint(s, v):
    """Pixel loop evaluation of the four averaging stencils, 1-based, zero outside."""
    n = v.shape[-1]

    def at(comp, i, j):
        if 1 <= i <= n and 1 <= j <= n:
            return v[comp, i - 1, j - 1]
        return 0.0

    out = np.zeros_like(v)
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if s == "vertical":
                a = at(0, i, j)
                b = 0.25 * (at(1, i, j) + at(1, i, j + 1) + at(1, i - 1, j) + at(1, i - 1, j + 1))
            elif s == "horizontal":
                a = 0.25 * (at(0, i, j) + at(0, i + 1, j) + at(0, i, j - 1) + at(0, i + 1, j - 1))
                b = at(1, i, j)
            elif s == "center":
                a = 0.5 * (at(0, i, j) + at(0, i + 1, j))
                b = 0.5 * (at(1, i, j) + at(1, i, j + 1))
            else:
                a = 0.5 * (at(0, i, j) + at(0, i, j - 1))
                b = 0.5 * (at(1, i, j) + at(1, i - 1, j))
            out[0, i - 1, j - 1] = a
            out[1, i - 1, j - 1] = b
    return out


# --- grad -------------------------------------------------------------------

def test_grad_constant_is_zero():
    assert np.all(grad(np.full((5, 5), 3.0 - 2j)) == 0)


def test_grad_hand_case():
    g = grad(np.array([[0.0, 1.0], [0.0, 1.0]]))
    np.testing.assert_array_equal(g[0], [[0, 0], [0, 0]])
    np.testing.assert_array_equal(g[1], [[1, 0], [1, 0]])


def test_grad_rejects_bad_shapes():
    with pytest.raises(ValueError):
        grad(np.zeros((3, 4)))
    with pytest.raises(ValueError):
        grad(np.zeros((1, 1)))


def test_grad_adjoint_zero_field():
    assert np.all(grad_adjoint(np.zeros((2, 4, 4))) == 0)


def test_grad_adjoint_matches_explicit_transpose():
    n = 3
    G = as_matrix(grad, (n, n))
    h = np.zeros((2, n, n))
    h[0, 0, 0] = 1.0
    expected = (G.T @ h.ravel()).reshape(n, n)
    np.testing.assert_array_equal(grad_adjoint(h), expected)
    assert expected[0, 0] == -1 and expected[1, 0] == 1 and np.count_nonzero(expected) == 2
    np.testing.assert_allclose(as_matrix(grad_adjoint, (2, n, n)), G.T, atol=0)


@pytest.mark.parametrize("n", [8, 16])
def test_grad_adjoint_identity(rng, n):
    for _ in range(100):
        u, h = crandn(rng, n, n), crandn(rng, 2, n, n)
        assert adjoint_error(grad(u), h, u, grad_adjoint(h)) <= 1e-12


def test_grad_adjoint_shape_error():
    with pytest.raises(ValueError):
        grad_adjoint(np.zeros((3, 4, 4)))


# --- interpolators -----------------------------------------------------------

@pytest.mark.parametrize("s", GRIDS)
def test_interp_adjoint_matches_loop_oracle(rng, s):
    v = crandn(rng, 2, 6, 6)
    np.testing.assert_allclose(interp_adjoint(s, v), loop_interp_adjoint(s, v), rtol=0, atol=1e-15)


def test_interp_adjoint_center_hand_case():
    v = np.stack([np.ones((2, 2)), np.zeros((2, 2))])
    out = interp_adjoint("center", v)
    np.testing.assert_array_equal(out[0], [[1, 1], [0.5, 0.5]])
    np.testing.assert_array_equal(out[1], np.zeros((2, 2)))


def test_interp_center_hand_case():
    h = np.stack([np.ones((2, 2)), np.zeros((2, 2))])
    out = interp("center", h)
    np.testing.assert_array_equal(out[0], [[0.5, 0.5], [1, 1]])
    np.testing.assert_array_equal(out[1], np.zeros((2, 2)))


@pytest.mark.parametrize("s", GRIDS)
def test_interp_zero(s):
    assert np.all(interp(s, np.zeros((2, 3, 3))) == 0)
    assert np.all(interp_adjoint(s, np.zeros((2, 3, 3))) == 0)


@pytest.mark.parametrize("s", GRIDS)
def test_interp_is_explicit_transpose(s):
    n = 4
    A = as_matrix(lambda v: loop_interp_adjoint(s, v), (2, n, n))
    np.testing.assert_allclose(as_matrix(lambda h: interp(s, h), (2, n, n)), A.T, atol=0)


@pytest.mark.parametrize("s", GRIDS)
@pytest.mark.parametrize("n", [8, 16])
def test_interp_adjoint_identity(rng, s, n):
    for _ in range(100):
        v, w = crandn(rng, 2, n, n), crandn(rng, 2, n, n)
        assert adjoint_error(interp_adjoint(s, v), w, v, interp(s, w)) <= 1e-12


def test_unknown_grid_tag():
    with pytest.raises(ValueError):
        interp("diagonal", np.zeros((2, 3, 3)))
    with pytest.raises(ValueError):
        interp_adjoint(7, np.zeros((2, 3, 3)))


# --- encoding ---------------------------------------------------------------

def test_fft2c_unitary(rng):
    x = crandn(rng, 8, 8)
    np.testing.assert_allclose(np.linalg.norm(fft2c(x)), np.linalg.norm(x), rtol=1e-13)
    np.testing.assert_allclose(ifft2c(fft2c(x)), x, atol=1e-14)


def test_fft2c_dc_is_centred():
    k = fft2c(np.ones((8, 8)))
    assert np.argmax(np.abs(k)) == np.ravel_multi_index((4, 4), (8, 8))


@pytest.mark.parametrize("pixel", [(0, 0), (3, 5), (7, 7)])
def test_encode_impulse_has_flat_spectrum(pixel):
    n = 8
    u = np.zeros((n, n))
    u[pixel] = 1.0
    k = encode(u, np.ones((1, n, n)), np.ones((n, n)))
    np.testing.assert_allclose(np.abs(k[0]), 1 / n, rtol=1e-13)


def test_encode_zero():
    assert np.all(encode(np.zeros((4, 4)), np.ones((2, 4, 4)), np.ones((4, 4))) == 0)
    assert np.all(encode_adjoint(np.zeros((2, 4, 4)), np.ones((2, 4, 4)), np.ones((4, 4))) == 0)


def test_encode_adjoint_inverts_full_single_coil(rng):
    u = crandn(rng, 8, 8)
    sens, mask = np.ones((1, 8, 8)), np.ones((8, 8))
    np.testing.assert_allclose(encode_adjoint(encode(u, sens, mask), sens, mask), u, atol=1e-14)


@pytest.mark.parametrize("P", [1, 4])
@pytest.mark.parametrize("n", [8, 16])
def test_encode_adjoint_identity(rng, n, P):
    for _ in range(100):
        sens = crandn(rng, P, n, n)
        mask = rng.random((n, n)) < 0.4
        u, r = crandn(rng, n, n), crandn(rng, P, n, n)
        assert adjoint_error(encode(u, sens, mask), r, u, encode_adjoint(r, sens, mask)) <= 1e-12


def test_encode_batched_contrasts(rng):
    u = crandn(rng, 3, 8, 8)
    sens = crandn(rng, 2, 8, 8)
    mask = rng.random((8, 8)) < 0.5
    k = encode(u, sens, mask)
    assert k.shape == (3, 2, 8, 8)
    np.testing.assert_allclose(k[1], encode(u[1], sens, mask))


def test_encode_shape_errors():
    with pytest.raises(ValueError):
        encode(np.zeros((4, 4)), np.ones((2, 5, 5)), np.ones((4, 4)))
    with pytest.raises(ValueError):
        encode(np.zeros((4, 4)), np.ones((2, 4, 4)), np.ones((5, 5)))
    with pytest.raises(ValueError):
        encode_adjoint(np.zeros((3, 4, 4)), np.ones((2, 4, 4)), np.ones((4, 4)))


# --- linearity (property based) ---------------------------------------------

@given(
    seed=st.integers(0, 2**32 - 1),
    alpha=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
    beta=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
    op=st.sampled_from(["grad", "grad_adjoint", "encode", "encode_adjoint"] + [f"L{k}" for k in range(4)] + [f"Ls{k}" for k in range(4)]),
)
def test_linearity(seed, alpha, beta, op):
    rng = np.random.default_rng(seed)
    n = 8
    sens = crandn(rng, 3, n, n)
    mask = rng.random((n, n)) < 0.5
    ops = {
        "grad": (grad, (n, n)),
        "grad_adjoint": (grad_adjoint, (2, n, n)),
        "encode": (lambda x: encode(x, sens, mask), (n, n)),
        "encode_adjoint": (lambda x: encode_adjoint(x, sens, mask), (3, n, n)),
    }
    for k in range(4):
        ops[f"L{k}"] = ((lambda x, k=k: interp(k, x)), (2, n, n))
        ops[f"Ls{k}"] = ((lambda x, k=k: interp_adjoint(k, x)), (2, n, n))
    f, shape = ops[op]
    x, y = crandn(rng, *shape), crandn(rng, *shape)
    lhs = f(alpha * x + beta * y)
    rhs = alpha * f(x) + beta * f(y)
    scale = (abs(alpha) * np.linalg.norm(f(x)) + abs(beta) * np.linalg.norm(f(y))) + 1e-300
    assert np.linalg.norm(lhs - rhs) / scale <= 1e-12


# --- rotation --------------------------------------------------------------

def test_rotate90_hand_case():
    np.testing.assert_array_equal(rotate90(np.array([[1, 2], [3, 4]])), [[2, 4], [1, 3]])


def test_rotate90_index_map(rng):
    n = 5
    u = rng.standard_normal((n, n))
    out = rotate90(u)
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            assert out[j - 1, i - 1] == u[i - 1, n - j]


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 9), N=st.integers(1, 3))
def test_rotate90_group_properties(seed, n, N):
    u = crandn(np.random.default_rng(seed), N, n, n)
    four = rotate90(rotate90(rotate90(rotate90(u))))
    assert np.array_equal(four, u)
    assert np.array_equal(rotate90(rotate90(u)), u[..., ::-1, ::-1])


def test_rotate90_rejects_rectangles():
    with pytest.raises(ValueError):
        rotate90(np.zeros((3, 4)))


def test_rotate_mask_makes_rotated_encoding_equivalent(rng):
    n = 12
    u, sens = crandn(rng, n, n), crandn(rng, 2, n, n)
    mask = rng.random((n, n)) < 0.5
    k1 = encode(u, sens, mask)
    k2 = encode(rotate90(u), rotate90(sens), rotate_mask(mask))
    np.testing.assert_allclose(np.linalg.norm(k2), np.linalg.norm(k1), rtol=1e-13)
    np.testing.assert_allclose(
        encode_adjoint(k2, rotate90(sens), rotate_mask(mask)), rotate90(encode_adjoint(k1, sens, mask)), atol=1e-13
    )


def test_rotate_mask_of_line_mask_is_transpose():
    mask = np.zeros((10, 10), dtype=bool)
    mask[[0, 3, 4, 5, 8], :] = True
    np.testing.assert_array_equal(rotate_mask(mask), mask.T)


# --- gradient field remapping -----------------------------------------------

def _interior_field_set(rng, N, n, pad=1):
    v = np.zeros((4, N, 2, n, n), dtype=complex)
    v[..., pad:n - pad, pad:n - pad] = crandn(rng, 4, N, 2, n - 2 * pad, n - 2 * pad)
    return v


def test_map_rotated_gf_zero():
    assert np.all(map_rotated_gf(np.zeros((4, 2, 2, 5, 5))) == 0)


def test_map_rotated_gf_preserves_nuclear_cost(rng):
    for _ in range(20):
        v = _interior_field_set(rng, 3, 8)
        before = field_set_nuclear_norms(v)
        after = field_set_nuclear_norms(map_rotated_gf(v))
        # vertical <-> horizontal trade places, the other two map to themselves
        np.testing.assert_allclose(after, before[[1, 0, 2, 3]], rtol=1e-12)


def test_map_rotated_gf_carries_constraint(rng):
    n = 10
    u = np.zeros((2, n, n), dtype=complex)
    u[:, 2:-2, 2:-2] = crandn(rng, 2, n - 4, n - 4)
    v = _interior_field_set(rng, 2, n, pad=2)
    # Make (u, v) feasible by absorbing the residual into the vertical grid's
    # row component and the horizontal grid's column component.
    res = grad(u) - interp_adjoint_sum(v)
    v[0, :, 0] += res[:, 0]
    v[1, :, 1] += res[:, 1]
    assert np.abs(interp_adjoint_sum(v) - grad(u)).max() < 1e-14
    moved = map_rotated_gf(v)
    np.testing.assert_allclose(interp_adjoint_sum(moved), grad(rotate90(u)), atol=1e-13)


def test_map_rotated_gf_shape_error():
    with pytest.raises(ValueError):
        map_rotated_gf(np.zeros((3, 1, 2, 4, 4)))
