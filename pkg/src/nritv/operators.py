"""Linear operators of the joint reconstruction model.

Array layout conventions used throughout the package:

* image / contrast stack: ``(..., n, n)`` complex, rows first
* gradient vector field: ``(..., 2, n, n)``; index ``0`` of the component axis
  is the row difference ``u(i+1, j) - u(i, j)``, index ``1`` the column
  difference ``u(i, j+1) - u(i, j)``
* gradient field set: ``(4, N, 2, n, n)`` with the grid axis ordered as
  :data:`GRIDS`
* per-coil k-space: ``(..., P, n, n)``, stored with DC at index ``n // 2``

Boundaries: ``grad`` uses the Neumann rule (differences leaving the grid are
zero) and the grid interpolators use zero extension for out-of-range
neighbours.  Every adjoint below is the exact algebraic transpose under those
rules.
"""
from __future__ import annotations

import numpy as np
import scipy.fft

#: Refined gradient-field grids: vertical edges, horizontal edges, pixel
#: centres and pixel corners.
GRIDS = ("vertical", "horizontal", "center", "cross")


def _grid_index(s):
    if isinstance(s, (int, np.integer)):
        if 0 <= s < len(GRIDS):
            return int(s)
    elif s in GRIDS:
        return GRIDS.index(s)
    raise ValueError(f"unknown grid tag {s!r}; expected one of {GRIDS}")


def _check_field(v):
    v = np.asarray(v)
    if v.ndim < 3 or v.shape[-3] != 2 or v.shape[-1] != v.shape[-2]:
        raise ValueError(f"expected a (..., 2, n, n) gradient field, got shape {v.shape}")
    return v


# Zero-extended shifts along the last two axes.  ``_prev_row(x)[i] = x[i-1]``
# and ``_next_row(x)[i] = x[i+1]``, with zero where the index leaves the grid.

def _next_row(x):
    out = np.zeros_like(x)
    out[..., :-1, :] = x[..., 1:, :]
    return out


def _prev_row(x):
    out = np.zeros_like(x)
    out[..., 1:, :] = x[..., :-1, :]
    return out


def _next_col(x):
    out = np.zeros_like(x)
    out[..., :, :-1] = x[..., :, 1:]
    return out


def _prev_col(x):
    out = np.zeros_like(x)
    out[..., :, 1:] = x[..., :, :-1]
    return out


def grad(u):
    """Forward differences with a Neumann far edge.

    Args:
        u: image(s) of shape ``(..., n, n)``, ``n >= 2``.

    Returns:
        Gradient field of shape ``(..., 2, n, n)``.
    """
    u = np.asarray(u)
    if u.ndim < 2 or u.shape[-1] != u.shape[-2]:
        raise ValueError(f"expected square image(s), got shape {u.shape}")
    if u.shape[-1] < 2:
        raise ValueError("grad needs n >= 2")
    out = np.zeros(u.shape[:-2] + (2,) + u.shape[-2:], dtype=np.result_type(u, np.float64))
    out[..., 0, :-1, :] = u[..., 1:, :] - u[..., :-1, :]
    out[..., 1, :, :-1] = u[..., :, 1:] - u[..., :, :-1]
    return out


def grad_adjoint(h):
    """Adjoint of :func:`grad` (negative divergence)."""
    h = _check_field(h)
    h1, h2 = h[..., 0, :, :], h[..., 1, :, :]
    out = np.zeros(h.shape[:-3] + h.shape[-2:], dtype=h.dtype)
    out[..., :-1, :] -= h1[..., :-1, :]
    out[..., 1:, :] += h1[..., :-1, :]
    out[..., :, :-1] -= h2[..., :, :-1]
    out[..., :, 1:] += h2[..., :, :-1]
    return out


def interp_adjoint(s, v):
    """Map a field living on grid ``s`` back onto the finite-difference grids.

    These are the four averaging stencils of the refined discretisation; the
    ``vertical`` grid carries the row component unchanged and averages four
    neighbours of the column component, ``horizontal`` does the opposite,
    ``center`` and ``cross`` average two neighbours per component.
    """
    k = _grid_index(s)
    v = _check_field(v)
    v1, v2 = v[..., 0, :, :], v[..., 1, :, :]
    out = np.empty_like(v)
    if k == 0:
        out[..., 0, :, :] = v1
        out[..., 1, :, :] = 0.25 * (v2 + _next_col(v2) + _prev_row(v2) + _prev_row(_next_col(v2)))
    elif k == 1:
        out[..., 0, :, :] = 0.25 * (v1 + _next_row(v1) + _prev_col(v1) + _next_row(_prev_col(v1)))
        out[..., 1, :, :] = v2
    elif k == 2:
        out[..., 0, :, :] = 0.5 * (v1 + _next_row(v1))
        out[..., 1, :, :] = 0.5 * (v2 + _next_col(v2))
    else:
        out[..., 0, :, :] = 0.5 * (v1 + _prev_col(v1))
        out[..., 1, :, :] = 0.5 * (v2 + _prev_row(v2))
    return out


def interp(s, h):
    """Interpolate a finite-difference field onto grid ``s``.

    Transpose of :func:`interp_adjoint`: each stencil's shifts are reversed.
    """
    k = _grid_index(s)
    h = _check_field(h)
    h1, h2 = h[..., 0, :, :], h[..., 1, :, :]
    out = np.empty_like(h)
    if k == 0:
        out[..., 0, :, :] = h1
        out[..., 1, :, :] = 0.25 * (h2 + _prev_col(h2) + _next_row(h2) + _next_row(_prev_col(h2)))
    elif k == 1:
        out[..., 0, :, :] = 0.25 * (h1 + _prev_row(h1) + _next_col(h1) + _prev_row(_next_col(h1)))
        out[..., 1, :, :] = h2
    elif k == 2:
        out[..., 0, :, :] = 0.5 * (h1 + _prev_row(h1))
        out[..., 1, :, :] = 0.5 * (h2 + _prev_col(h2))
    else:
        out[..., 0, :, :] = 0.5 * (h1 + _next_col(h1))
        out[..., 1, :, :] = 0.5 * (h2 + _next_row(h2))
    return out


def interp_all(h):
    """Stack ``interp(s, h)`` over all grids: ``(..., 2, n, n) -> (4, ..., 2, n, n)``."""
    return np.stack([interp(s, h) for s in range(len(GRIDS))])


def interp_adjoint_sum(v):
    """``sum_s interp_adjoint(s, v[s])`` for a field set with leading grid axis."""
    v = np.asarray(v)
    if v.shape[0] != len(GRIDS):
        raise ValueError(f"expected leading grid axis of length {len(GRIDS)}, got {v.shape}")
    out = interp_adjoint(0, v[0])
    for k in range(1, len(GRIDS)):
        out += interp_adjoint(k, v[k])
    return out


def fft2c(x):
    """Unitary 2D FFT over the last two axes, centred storage (DC at ``n // 2``)."""
    x = scipy.fft.ifftshift(x, axes=(-2, -1))
    return scipy.fft.fftshift(scipy.fft.fft2(x, norm="ortho"), axes=(-2, -1))


def ifft2c(k):
    """Inverse of :func:`fft2c`."""
    k = scipy.fft.ifftshift(k, axes=(-2, -1))
    return scipy.fft.fftshift(scipy.fft.ifft2(k, norm="ortho"), axes=(-2, -1))


def _check_encoding(u_shape, sens, mask):
    sens = np.asarray(sens)
    mask = np.asarray(mask)
    if sens.ndim != 3 or sens.shape[-2:] != tuple(u_shape[-2:]):
        raise ValueError(f"sensitivities {sens.shape} do not match image grid {tuple(u_shape[-2:])}")
    if mask.shape != sens.shape[-2:]:
        raise ValueError(f"mask {mask.shape} does not match image grid {sens.shape[-2:]}")
    return sens, mask


def encode(u, sens, mask):
    """Sensitivity-weighted, masked Fourier encoding.

    Args:
        u: images ``(..., n, n)``.
        sens: coil maps ``(P, n, n)``.
        mask: sampling mask ``(n, n)``.

    Returns:
        Per-coil k-space ``(..., P, n, n)``.
    """
    u = np.asarray(u)
    sens, mask = _check_encoding(u.shape, sens, mask)
    coil_images = u[..., None, :, :] * sens
    return mask * fft2c(coil_images)


def encode_adjoint(r, sens, mask):
    """Adjoint of :func:`encode`: ``sum_p conj(s_p) * ifft2c(mask * r_p)``."""
    r = np.asarray(r)
    sens, mask = _check_encoding(r.shape, sens, mask)
    if r.ndim < 3 or r.shape[-3] != sens.shape[0]:
        raise ValueError(f"k-space {r.shape} does not carry {sens.shape[0]} coils")
    return np.sum(np.conj(sens) * ifft2c(mask * r), axis=-3)


def encode_adjoint_per_coil(r, sens, mask):
    """The per-coil terms ``conj(s_p) * ifft2c(mask * r_p)`` before coil summation."""
    r = np.asarray(r)
    sens, mask = _check_encoding(r.shape, sens, mask)
    return np.conj(sens) * ifft2c(mask * r)


def rotate90(u):
    """Rotate every image by 90 degrees: ``out[j, i] = u[i, n - 1 - j]``."""
    u = np.asarray(u)
    if u.ndim < 2 or u.shape[-1] != u.shape[-2]:
        raise ValueError(f"rotate90 needs square images, got shape {u.shape}")
    return np.rot90(u, k=1, axes=(-2, -1))


def rotate_mask(mask):
    """Sampling mask of the rotated acquisition.

    Under :func:`rotate90` the centred k-space of ``s_p * u`` rotates up to a
    phase ramp with the row frequency negated.  For line masks constant along
    the frequency-encode axis this is a plain transpose.
    """
    mask = np.asarray(mask)
    n = mask.shape[-1]
    neg = (n - np.arange(n)) % n
    return np.swapaxes(mask, -1, -2)[..., neg, :]


def map_rotated_gf(v):
    """Carry a gradient field set of ``u`` over to one of ``rotate90(u)``.

    Each grid's field is rotated with its components swapped (first one
    negated).  Vertical-edge and horizontal-edge grids trade places; fields on
    the two staggered grids that move by half a pixel under the rotation
    (horizontal edges -> vertical edges, and pixel corners) are shifted by one
    row, with zero fill at the last row.

    Args:
        v: field set ``(4, ..., 2, n, n)``.
    """
    v = np.asarray(v)
    if v.shape[0] != len(GRIDS):
        raise ValueError(f"expected leading grid axis of length {len(GRIDS)}, got {v.shape}")
    _check_field(v[0])

    def turn(field):
        return np.stack([-rotate90(field[..., 1, :, :]), rotate90(field[..., 0, :, :])], axis=-3)

    out = np.empty_like(v)
    out[0] = _next_row(turn(v[1]))
    out[1] = turn(v[0])
    out[2] = turn(v[2])
    out[3] = _next_row(turn(v[3]))
    return out
