"""Synthetic multi-contrast, multi-coil test problems."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .operators import fft2c

# (x0, y0, semi-axis along x, semi-axis along y, rotation in degrees) of the
# ten Shepp-Logan ellipses, in normalised coordinates [-1, 1]^2 with y up.
SHEPP_LOGAN_GEOMETRY = (
    (0.0, 0.0, 0.69, 0.92, 0.0),
    (0.0, -0.0184, 0.6624, 0.874, 0.0),
    (0.22, 0.0, 0.11, 0.31, -18.0),
    (-0.22, 0.0, 0.16, 0.41, 18.0),
    (0.0, 0.35, 0.21, 0.25, 0.0),
    (0.0, 0.1, 0.046, 0.046, 0.0),
    (0.0, -0.1, 0.046, 0.046, 0.0),
    (-0.08, -0.605, 0.046, 0.023, 0.0),
    (0.0, -0.605, 0.023, 0.023, 0.0),
    (0.06, -0.605, 0.023, 0.046, 0.0),
)

# Additive ellipse intensities per contrast.  "SL" is the modified
# (high-contrast) Shepp-Logan table; the others mimic tissue orderings:
# dark CSF in T1, bright CSF in T2, compressed range in PD.
DEFAULT_REMAPS = {
    "SL": (1.0, -0.8, -0.2, -0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1),
    "T1": (1.0, -0.4, -0.35, -0.35, 0.15, 0.2, 0.2, 0.2, 0.2, 0.2),
    "T2": (0.7, -0.4, 0.6, 0.6, 0.2, 0.3, 0.3, 0.3, 0.3, 0.3),
    "PD": (0.8, -0.3, 0.25, 0.25, 0.1, 0.15, 0.15, 0.15, 0.15, 0.15),
}


@dataclass(frozen=True)
class Lesion:
    """Regular flat-topped hexagon painted into one contrast."""

    center: tuple[float, float]  # (x, y), normalised coordinates
    radius: float  # circumradius, normalised units
    intensity: float
    contrast: int  # 0-based target contrast

    def top_right_vertex(self):
        cx, cy = self.center
        return cx + 0.5 * self.radius, cy + 0.5 * math.sqrt(3) * self.radius


@dataclass(frozen=True)
class PhantomSpec:
    n: int
    remaps: tuple[tuple[float, ...], ...] = (DEFAULT_REMAPS["T1"], DEFAULT_REMAPS["T2"], DEFAULT_REMAPS["PD"])
    lesions: tuple[Lesion, ...] = ()

    @property
    def N(self):
        return len(self.remaps)

    def validate(self):
        if self.n < 2:
            raise ValueError(f"phantom size must be >= 2, got {self.n}")
        if not self.remaps:
            raise ValueError("need at least one contrast")
        for c, table in enumerate(self.remaps):
            if len(table) != len(SHEPP_LOGAN_GEOMETRY):
                raise ValueError(
                    f"remap table {c} has {len(table)} entries, expected {len(SHEPP_LOGAN_GEOMETRY)}"
                )
        for lesion in self.lesions:
            if not 0 <= lesion.contrast < self.N:
                raise ValueError(f"lesion targets contrast {lesion.contrast}, only {self.N} contrasts")
            if lesion.radius <= 0:
                raise ValueError(f"lesion radius must be positive, got {lesion.radius}")


def pixel_coordinates(n):
    """Normalised (x, y) of every pixel centre; row 0 is the top (y near +1)."""
    t = -1.0 + (2.0 * np.arange(n) + 1.0) / n
    x = np.broadcast_to(t[None, :], (n, n))
    y = np.broadcast_to(-t[:, None], (n, n))
    return x, y


def ellipse_masks(n):
    """Boolean support of each Shepp-Logan ellipse at size ``n``."""
    x, y = pixel_coordinates(n)
    masks = []
    for x0, y0, a, b, phi in SHEPP_LOGAN_GEOMETRY:
        c, s = math.cos(math.radians(phi)), math.sin(math.radians(phi))
        dx, dy = x - x0, y - y0
        xr = c * dx + s * dy
        yr = -s * dx + c * dy
        masks.append((xr / a) ** 2 + (yr / b) ** 2 <= 1.0)
    return masks


def hexagon_mask(n, lesion):
    x, y = pixel_coordinates(n)
    dx = np.abs(x - lesion.center[0])
    dy = np.abs(y - lesion.center[1])
    r = lesion.radius
    return (dy <= 0.5 * math.sqrt(3) * r) & (math.sqrt(3) * dx + dy <= math.sqrt(3) * r)


def make_phantom(spec):
    """Rasterise a multi-contrast Shepp-Logan phantom, shape ``(N, n, n)``.

    All contrasts share the ellipse geometry and differ only in the additive
    intensity of each ellipse.  Lesions overwrite their target contrast last;
    the result is clamped to ``[0, 1]``.
    """
    spec.validate()
    masks = ellipse_masks(spec.n)
    out = np.zeros((spec.N, spec.n, spec.n))
    for c, table in enumerate(spec.remaps):
        for mask, value in zip(masks, table):
            out[c][mask] += value
    for lesion in spec.lesions:
        out[lesion.contrast][hexagon_mask(spec.n, lesion)] = lesion.intensity
    return np.clip(out, 0.0, 1.0)


def lesion_corner_pixel(n, lesion):
    """Index ``(i, j)`` of the lesion pixel nearest its top-right vertex."""
    inside = hexagon_mask(n, lesion)
    if not inside.any():
        raise ValueError("lesion covers no pixel centre at this resolution")
    x, y = pixel_coordinates(n)
    vx, vy = lesion.top_right_vertex()
    dist = np.where(inside, (x - vx) ** 2 + (y - vy) ** 2, np.inf)
    i, j = np.unravel_index(np.argmin(dist), dist.shape)
    return int(i), int(j)


def make_coils(n, P, width_frac=0.35, seed=0):
    """Simulated receive coils, shape ``(P, n, n)``, with ``sum_p |s_p|^2 = 1``.

    Gaussian magnitude bumps centred on a circle of radius ``0.55 n`` around
    the field of view, each with its own linear phase ramp.
    """
    if P < 1:
        raise ValueError(f"need at least one coil, got P={P}")
    if width_frac <= 0:
        raise ValueError(f"width_frac must be positive, got {width_frac}")
    rng = np.random.default_rng(seed)
    rows, cols = np.meshgrid(np.arange(n) + 0.5, np.arange(n) + 0.5, indexing="ij")
    centre = n / 2
    sd = width_frac * n
    # Slopes in radians per field of view, plus a constant offset.
    slopes = rng.uniform(-np.pi, np.pi, size=(P, 2))
    offsets = rng.uniform(-np.pi, np.pi, size=P)
    maps = np.empty((P, n, n), dtype=np.complex128)
    for p in range(P):
        angle = 2 * np.pi * p / P
        cr = centre - 0.55 * n * math.sin(angle)
        cc = centre + 0.55 * n * math.cos(angle)
        mag = np.exp(-((rows - cr) ** 2 + (cols - cc) ** 2) / (2 * sd**2))
        phase = offsets[p] + (slopes[p, 0] * (rows - centre) + slopes[p, 1] * (cols - centre)) / n
        maps[p] = mag * np.exp(1j * phase)
    return normalize_coils(maps)


def normalize_coils(maps):
    """Scale coil maps pixel-wise so that ``sum_p |s_p|^2 = 1`` wherever nonzero."""
    maps = np.asarray(maps, dtype=np.complex128)
    rss = np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))
    return np.where(rss > 0, maps / np.where(rss > 0, rss, 1.0), 0.0)


def coil_normalization_error(maps):
    """Max deviation of ``sum_p |s_p|^2`` from 1 over pixels where any map is nonzero."""
    ss = np.sum(np.abs(np.asarray(maps)) ** 2, axis=0)
    support = ss > 0
    if not support.any():
        return 0.0
    return float(np.max(np.abs(ss[support] - 1.0)))


@dataclass(frozen=True)
class MaskSpec:
    n: int
    R: float
    acs_fraction: float = 0.4
    seed: int = 0

    @property
    def n_lines(self):
        return int(math.floor(self.n / self.R + 0.5))

    @property
    def n_acs(self):
        # Guard against floating noise in products such as 0.4 * 40.
        return int(math.floor(round(self.acs_fraction * self.n / self.R, 9)))


@dataclass
class SamplingMask:
    """Cartesian line mask; rows of the array are phase-encode lines."""

    mask: np.ndarray
    reduction: float
    acs_lines: np.ndarray
    lines: np.ndarray
    seed: int = 0

    @property
    def n(self):
        return self.mask.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.mask if dtype is None else self.mask.astype(dtype)


def acs_block(n, count):
    """Contiguous centred ACS line indices around DC at ``n // 2``.

    An even count puts the extra line on the positive-frequency side.
    """
    start = n // 2 - (count - 1) // 2
    return np.arange(start, start + count)


def make_mask(spec):
    """Random Cartesian mask: a centred ACS block plus random phase-encode lines."""
    if spec.R < 1:
        raise ValueError(f"reduction factor must be >= 1, got {spec.R}")
    if not 0 <= spec.acs_fraction <= 1:
        raise ValueError(f"acs_fraction must lie in [0, 1], got {spec.acs_fraction}")
    n_lines, n_acs = spec.n_lines, spec.n_acs
    if n_lines < 1 or n_lines < n_acs:
        raise ValueError(f"line budget {n_lines} exhausted at n={spec.n}, R={spec.R}")
    acs = acs_block(spec.n, n_acs)
    rest = np.setdiff1d(np.arange(spec.n), acs)
    rng = np.random.default_rng(spec.seed)
    picked = rng.choice(rest, size=n_lines - n_acs, replace=False)
    lines = np.sort(np.concatenate([acs, picked]))
    mask = np.zeros((spec.n, spec.n), dtype=bool)
    mask[lines, :] = True
    return SamplingMask(mask=mask, reduction=spec.R, acs_lines=acs, lines=lines, seed=spec.seed)


def acquire(truth, sens, mask, sigma=0.0, seed=0):
    """Simulate undersampled multi-coil k-space ``(N, P, n, n)``.

    Complex white Gaussian noise of total standard deviation ``sigma`` is added
    to the fully sampled k-space before masking.
    """
    if sigma < 0:
        raise ValueError(f"noise level must be nonnegative, got {sigma}")
    truth = np.asarray(truth)
    sens = np.asarray(sens)
    mask = np.asarray(mask)
    full = fft2c(truth[:, None, :, :] * sens[None])
    if sigma > 0:
        rng = np.random.default_rng(seed)
        scale = sigma / math.sqrt(2)
        full = full + scale * (rng.standard_normal(full.shape) + 1j * rng.standard_normal(full.shape))
    return mask * full


def _lesion_at_vertex(vertex, radius, intensity, contrast):
    vx, vy = vertex
    return Lesion(
        center=(vx - 0.5 * radius, vy - 0.5 * math.sqrt(3) * radius),
        radius=radius,
        intensity=intensity,
        contrast=contrast,
    )


def rank_demo_spec(n=200):
    """Four contrasts sharing the geometry, a hexagon only in the first.

    The hexagon's top-right vertex sits at pixel ``(139, 129)`` for ``n = 200``.
    """
    lesion = _lesion_at_vertex((0.2955, -0.3945), 0.06, 1.0, 0)
    remaps = tuple(DEFAULT_REMAPS[k] for k in ("SL", "T1", "T2", "PD"))
    return PhantomSpec(n=n, remaps=remaps, lesions=(lesion,))


def misaligned_rank_demo(n=200):
    """Rank-two counterexample to :func:`rank_demo_spec`.

    The hexagon is painted into the second contrast as well, and that whole
    contrast is then shifted down by one row, so near the lesion corner the two
    contrasts' edges no longer coincide.
    """
    spec = rank_demo_spec(n)
    lesion = spec.lesions[0]
    u = make_phantom(replace(spec, lesions=(lesion, replace(lesion, contrast=1))))
    u[1, 1:] = u[1, :-1].copy()
    u[1, 0] = 0.0
    return u


def default_lesions():
    """A white hexagon in T1 (contrast 0) and a black one in PD (contrast 2)."""
    return (
        Lesion(center=(0.265, -0.447), radius=0.08, intensity=1.0, contrast=0),
        Lesion(center=(-0.45, -0.3), radius=0.08, intensity=0.0, contrast=2),
    )
