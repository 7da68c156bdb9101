"""Proximal maps and dual updates.

The hot path is :func:`prox_nuclear` on stacks of 2 x N joint gradient
matrices.  Rather than a general SVD per pixel it works on the 2 x 2 Gram
matrix ``G = M M^H``: with ``f(g) = max(sqrt(g) - t, 0) / sqrt(g)`` the
shrunk matrix is ``f(G) M``, and ``f(G)`` of a 2 x 2 Hermitian matrix follows
from its two eigenvalues and the spectral projector onto the leading one.
"""
from __future__ import annotations

import numpy as np

from .operators import GRIDS, interp_all

_TINY_OFFDIAG = 1e-30


def _gram_spectrum(m):
    """Eigen-data of ``M M^H`` for a stack of ``(..., 2, N)`` matrices.

    Returns ``(lam1, lam2, p00, p11, p01)``: descending eigenvalues and the
    entries of the projector onto the leading eigenvector.
    """
    r0, r1 = m[..., 0, :], m[..., 1, :]
    a = np.sum(np.abs(r0) ** 2, axis=-1)
    d = np.sum(np.abs(r1) ** 2, axis=-1)
    b = np.sum(r0 * np.conj(r1), axis=-1)
    half_gap = 0.5 * (a - d)
    rad = np.hypot(half_gap, np.abs(b))
    lam1 = 0.5 * (a + d) + rad

    # det(G) by Cauchy-Binet: sum of |2x2 minors|^2, no cancellation against lam1.
    n_cols = m.shape[-1]
    det = np.zeros_like(a)
    for k in range(n_cols):
        for l in range(k + 1, n_cols):
            det += np.abs(r0[..., k] * r1[..., l] - r0[..., l] * r1[..., k]) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        lam2 = np.where(lam1 > 0, det / lam1, 0.0)
    lam2 = np.minimum(lam2, lam1)

    degenerate = np.abs(b) < _TINY_OFFDIAG
    safe_rad = np.where(degenerate, 1.0, rad)
    denom = safe_rad + np.abs(half_gap)
    denom = np.where(denom > 0, denom, 1.0)
    # The larger diagonal entry of the projector is (rad + |gap|) / (2 rad); the
    # smaller one |b|^2 / (2 rad (rad + |gap|)) avoids cancellation.
    big = (safe_rad + np.abs(half_gap)) / (2 * safe_rad)
    small = np.abs(b) ** 2 / (2 * safe_rad * denom)
    upper = half_gap >= 0
    p00 = np.where(upper, big, small)
    p11 = np.where(upper, small, big)
    p01 = b / (2 * safe_rad)
    p00 = np.where(degenerate, upper.astype(float), p00)
    p11 = np.where(degenerate, (~upper).astype(float), p11)
    p01 = np.where(degenerate, 0.0, p01)
    return lam1, lam2, p00, p11, p01


def singular_values_2xn(m):
    """Descending singular values ``(..., 2)`` of a stack of 2 x N matrices."""
    m = np.asarray(m)
    lam1, lam2, *_ = _gram_spectrum(m)
    return np.stack([np.sqrt(lam1), np.sqrt(np.maximum(lam2, 0.0))], axis=-1)


def nuclear_norm_2xn(m):
    """Nuclear norm of each matrix in a ``(..., 2, N)`` stack."""
    return singular_values_2xn(m).sum(axis=-1)


def prox_nuclear(m, t):
    """Singular value soft-thresholding of 2 x N matrices.

    Minimiser of ``0.5 * ||X - M||_F^2 + t * ||X||_*``, applied independently
    to every matrix of a ``(..., 2, N)`` stack.

    Args:
        m: complex array with the last two axes of shape ``(2, N)``.
        t: nonnegative threshold.
    """
    if t < 0:
        raise ValueError(f"threshold must be nonnegative, got {t}")
    m = np.asarray(m)
    if m.ndim < 2 or m.shape[-2] != 2:
        raise ValueError(f"expected (..., 2, N) matrices, got shape {m.shape}")
    if t == 0:
        return m.copy()
    lam1, lam2, p00, p11, p01 = _gram_spectrum(m)
    s1 = np.sqrt(lam1)
    s2 = np.sqrt(np.maximum(lam2, 0.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        f1 = np.where(s1 > t, 1.0 - t / s1, 0.0)
        f2 = np.where(s2 > t, 1.0 - t / s2, 0.0)
    df = f1 - f2
    # W = f2 I + (f1 - f2) P; X = W M.
    w00 = (f2 + df * p00)[..., None]
    w11 = (f2 + df * p11)[..., None]
    w01 = (df * p01)[..., None]
    r0, r1 = m[..., 0, :], m[..., 1, :]
    out = np.empty(m.shape, dtype=np.result_type(m, np.complex128))
    out[..., 0, :] = w00 * r0 + w01 * r1
    out[..., 1, :] = np.conj(w01) * r0 + w11 * r1
    return out


def _as_matrices(v):
    """``(4, N, 2, n, n)`` field set -> ``(4, n, n, 2, N)`` joint matrices."""
    return np.moveaxis(v, (1, 2), (-1, -2))


def _from_matrices(m):
    return np.moveaxis(m, (-1, -2), (1, 2))


def field_set_nuclear_norms(v):
    """Per-grid sums of pixel-wise nuclear norms, shape ``(4,)``."""
    v = np.asarray(v)
    return nuclear_norm_2xn(_as_matrices(v)).sum(axis=(-2, -1))


def joint_v_prox(v, h, tau, lam):
    """Joint gradient-field update.

    Forms ``nu_s = v_s - tau * interp(s, h)`` for every grid and contrast, then
    soft-thresholds the singular values of each pixel's 2 x N matrix
    ``[nu_s^1(i,j) ... nu_s^N(i,j)]`` by ``tau * lam``.

    Args:
        v: field set ``(4, N, 2, n, n)``.
        h: per-contrast dual field ``(N, 2, n, n)``.
    """
    v = np.asarray(v)
    h = np.asarray(h)
    if v.shape[0] != len(GRIDS) or v.shape[1:] != h.shape:
        raise ValueError(f"field set {v.shape} does not match dual field {h.shape}")
    if tau <= 0 or lam < 0:
        raise ValueError(f"need tau > 0 and lam >= 0, got tau={tau}, lam={lam}")
    return threshold_field_set(v - tau * interp_all(h), tau * lam)


def threshold_field_set(nu, t):
    """Pixel-wise singular value thresholding of a ``(4, N, 2, n, n)`` field set."""
    if t == 0:
        return np.array(nu, copy=True)
    return _from_matrices(prox_nuclear(_as_matrices(nu), t))


def project_nonneg(u):
    """Clamp real and imaginary parts at zero independently."""
    u = np.asarray(u)
    if np.iscomplexobj(u):
        return np.maximum(u.real, 0.0) + 1j * np.maximum(u.imag, 0.0)
    return np.maximum(u, 0.0)


def prox_r(r, fu, b, beta_tau):
    """Dual ascent on the k-space residual variables.

    ``(r + beta_tau * (fu - b)) / (1 + beta_tau)``, i.e. the prox of the
    conjugate of ``0.5 * ||. - b||^2``.
    """
    if beta_tau <= 0:
        raise ValueError(f"beta_tau must be positive, got {beta_tau}")
    r, fu, b = np.asarray(r), np.asarray(fu), np.asarray(b)
    if not (r.shape == fu.shape == b.shape):
        raise ValueError(f"shape mismatch: r {r.shape}, Fu {fu.shape}, b {b.shape}")
    return (r + beta_tau * fu - beta_tau * b) / (1 + beta_tau)


def update_h(h, du, lv_sum, beta_tau):
    """Dual ascent on the gradient-field constraint: ``h + beta_tau * (lv_sum - du)``."""
    if beta_tau <= 0:
        raise ValueError(f"beta_tau must be positive, got {beta_tau}")
    h, du, lv_sum = np.asarray(h), np.asarray(du), np.asarray(lv_sum)
    if not (h.shape == du.shape == lv_sum.shape):
        raise ValueError(f"shape mismatch: h {h.shape}, Du {du.shape}, Lv {lv_sum.shape}")
    return h + beta_tau * (-du + lv_sum)
