"""Reconstruction quality metrics and the joint-gradient rank probe."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .operators import grad

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _same_shape(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def snr(u, ref, *, numerator="recon"):
    """``20 log10(||u|| / ||u - ref||)`` in dB.

    ``numerator="recon"`` puts the reconstruction norm on top;
    ``"reference"`` gives the conventional ``||ref||`` variant.  Returns ``+inf`` when ``u == ref`` and ``-inf`` when the
    numerator vanishes.
    """
    u, ref = _same_shape(u, ref)
    if numerator not in ("recon", "reference"):
        raise ValueError(f"numerator must be 'recon' or 'reference', got {numerator!r}")
    top = np.linalg.norm((u if numerator == "recon" else ref).ravel())
    err = np.linalg.norm((u - ref).ravel())
    if err == 0:
        return math.inf
    if top == 0:
        return -math.inf
    return 20.0 * math.log10(top / err)


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    """Normalised 1D Gaussian taps; the 2D window is their outer product."""
    x = np.arange(size) - (size - 1) / 2
    w = np.exp(-(x**2) / (2 * sigma**2))
    return w / w.sum()


def _filter(x, w):
    # Replicated borders, no cropping.
    return correlate1d(correlate1d(x, w, axis=0, mode="nearest"), w, axis=1, mode="nearest")


def ssim_map(u, ref):
    u, ref = _same_shape(u, ref)
    if np.iscomplexobj(u) or np.iscomplexobj(ref):
        raise ValueError("ssim expects real (magnitude) images")
    if u.ndim != 2:
        raise ValueError(f"ssim expects 2D images, got shape {u.shape}")
    if min(u.shape) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW} pixels per side, got {u.shape}")
    L = float(np.max(ref))
    if not L > 0:
        raise ValueError("reference has zero dynamic range")
    u = u.astype(np.float64)
    ref = ref.astype(np.float64)
    w = gaussian_window()
    c1 = (SSIM_K1 * L) ** 2
    c2 = (SSIM_K2 * L) ** 2
    mu_x = _filter(u, w)
    mu_y = _filter(ref, w)
    sxx = _filter(u * u, w) - mu_x * mu_x
    syy = _filter(ref * ref, w) - mu_y * mu_y
    sxy = _filter(u * ref, w) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sxx + syy + c2)
    return num / den


def ssim(u, ref):
    """Mean SSIM: 11x11 Gaussian window (sigma 1.5), K = (0.01, 0.03), range max(ref)."""
    return float(np.mean(ssim_map(u, ref)))


def rlne(est, ref):
    """Relative l2 error of stacked coil maps, ``||ref - est|| / ||ref||``."""
    est, ref = _same_shape(est, ref)
    denom = np.linalg.norm(ref.ravel())
    if denom == 0:
        raise ValueError("reference sensitivities are all zero")
    return float(np.linalg.norm((ref - est).ravel()) / denom)


def joint_gradient_matrix(u, i, j):
    """2 x N matrix of the contrasts' forward differences at pixel ``(i, j)``."""
    u = np.asarray(u)
    if u.ndim == 2:
        u = u[None]
    n = u.shape[-1]
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"pixel ({i}, {j}) outside a {n}x{n} image")
    return grad(u)[:, :, i, j].T


def rank_probe(u, i, j):
    """Descending singular values ``(s1, s2)`` of the joint gradient matrix at ``(i, j)``."""
    s = np.linalg.svd(joint_gradient_matrix(u, i, j), compute_uv=False)
    s = np.concatenate([s, np.zeros(2 - s.size)])
    return float(s[0]), float(s[1])


@dataclass
class MetricReport:
    snr: list
    ssim: list
    mean_snr: float
    mean_ssim: float
    rlne: float | None = None

    def to_dict(self):
        return asdict(self)


def evaluate(recon, truth, *, sens=None, sens_ref=None, snr_numerator="recon"):
    """Per-contrast SNR (complex values) and SSIM (magnitudes) of a stack."""
    recon, truth = _same_shape(recon, truth)
    if recon.ndim == 2:
        recon, truth = recon[None], truth[None]
    snrs = [snr(recon[c], truth[c], numerator=snr_numerator) for c in range(recon.shape[0])]
    ssims = [ssim(np.abs(recon[c]), np.abs(truth[c])) for c in range(recon.shape[0])]
    report = MetricReport(
        snr=snrs,
        ssim=ssims,
        mean_snr=float(np.mean(snrs)),
        mean_ssim=float(np.mean(ssims)),
    )
    if sens is not None and sens_ref is not None:
        report.rlne = rlne(sens, sens_ref)
    return report
