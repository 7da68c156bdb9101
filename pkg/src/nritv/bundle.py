"""On-disk dataset bundles and reconstruction outputs.

A bundle is a directory::

    meta.json    dimensions, seed, noise level, layout, format version
    kspace.bin   complex64 [contrast][coil][row][col]
    mask.u8      uint8 0/1 [row][col]
    sens.bin     complex64 [coil][row][col]
    truth.bin    complex64 [contrast][row][col], optional

Complex payloads are interleaved real/imaginary little-endian float32,
row-major.  Every file is written to a temporary name and renamed into place.
"""
from __future__ import annotations

import hashlib
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

FORMAT_NAME = "nritv-bundle"
RECON_FORMAT_NAME = "nritv-recon"
FORMAT_VERSION = 1
COMPLEX_DTYPE = np.dtype("<c8")

LAYOUT = {
    "kspace.bin": "complex64 interleaved re/im little-endian, [contrast][coil][row][col]",
    "sens.bin": "complex64 interleaved re/im little-endian, [coil][row][col]",
    "mask.u8": "uint8 0/1, [row][col], rows are phase-encode lines",
    "truth.bin": "complex64 interleaved re/im little-endian, [contrast][row][col]",
    "kspace_centering": "DC at index n // 2 (fftshift order)",
}
RECON_LAYOUT = {"recon.bin": LAYOUT["truth.bin"]}


class FormatError(ValueError):
    """A bundle or output directory does not match its declared layout."""


@dataclass
class DatasetBundle:
    kspace: np.ndarray  # (N, P, n, n) complex64
    mask: np.ndarray  # (n, n) bool
    sens: np.ndarray  # (P, n, n) complex64
    truth: np.ndarray | None = None  # (N, n, n) complex64
    R: float = 1.0
    seed: int = 0
    sigma: float = 0.0

    @property
    def shape(self):
        N, P, n, _ = self.kspace.shape
        return N, P, n

    def meta(self):
        N, P, n = self.shape
        return {
            "format": FORMAT_NAME,
            "format_version": FORMAT_VERSION,
            "n": n,
            "N": N,
            "P": P,
            "R": self.R,
            "seed": self.seed,
            "sigma": self.sigma,
            "has_truth": self.truth is not None,
            "layout": LAYOUT,
        }


def atomic_write_bytes(path, data):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_json(path, obj):
    atomic_write_bytes(path, (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode())


def to_complex_bytes(a):
    return np.ascontiguousarray(a, dtype=COMPLEX_DTYPE).tobytes()


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def manifest(directory, names):
    directory = Path(directory)
    return {name: sha256_file(directory / name) for name in sorted(names) if (directory / name).exists()}


def write_bundle(directory, bundle):
    """Write ``bundle`` under ``directory`` and return the content-hash manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    N, P, n = bundle.shape
    if bundle.mask.shape != (n, n) or bundle.sens.shape != (P, n, n):
        raise ValueError("bundle arrays have inconsistent shapes")
    names = ["kspace.bin", "mask.u8", "sens.bin", "meta.json"]
    atomic_write_bytes(directory / "kspace.bin", to_complex_bytes(bundle.kspace))
    atomic_write_bytes(directory / "mask.u8", np.ascontiguousarray(bundle.mask, dtype=np.uint8).tobytes())
    atomic_write_bytes(directory / "sens.bin", to_complex_bytes(bundle.sens))
    if bundle.truth is not None:
        if bundle.truth.shape != (N, n, n):
            raise ValueError("truth shape does not match k-space")
        atomic_write_bytes(directory / "truth.bin", to_complex_bytes(bundle.truth))
        names.append("truth.bin")
    elif (directory / "truth.bin").exists():
        os.unlink(directory / "truth.bin")
    atomic_write_json(directory / "meta.json", bundle.meta())
    hashes = manifest(directory, names)
    atomic_write_json(directory / "manifest.json", hashes)
    return hashes


def _read_meta(directory, expected_format):
    path = Path(directory) / "meta.json"
    if not path.is_file():
        raise FormatError(f"{path}: missing")
    try:
        meta = json.loads(path.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(meta, dict):
        raise FormatError(f"{path}: expected a JSON object")
    if meta.get("format") != expected_format:
        raise FormatError(f"{path}: format is {meta.get('format')!r}, expected {expected_format!r}")
    if meta.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format_version {meta.get('format_version')!r}")
    return meta


def _meta_int(meta, key, path, minimum=1):
    value = meta.get(key)
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise FormatError(f"{path}: field {key!r} must be an integer >= {minimum}, got {value!r}")
    return value


def _read_payload(path, count, dtype):
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"{path}: missing")
    raw = path.read_bytes()
    expected = count * dtype.itemsize
    if len(raw) != expected:
        where = "truncated" if len(raw) < expected else "trailing data"
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)} ({where} at offset {min(len(raw), expected)})")
    return np.frombuffer(raw, dtype=dtype).copy()


def _check_finite(path, a):
    flat = a.view(np.float32)
    bad = np.flatnonzero(~np.isfinite(flat))
    if bad.size:
        raise FormatError(f"{path}: non-finite value at byte offset {int(bad[0]) * 4}")


def read_complex(path, shape):
    a = _read_payload(path, int(np.prod(shape)), COMPLEX_DTYPE)
    _check_finite(path, a)
    return a.reshape(shape)


def read_bundle(directory):
    """Load a bundle written by :func:`write_bundle`; raises :class:`FormatError`."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FormatError(f"{directory}: not a bundle directory")
    meta = _read_meta(directory, FORMAT_NAME)
    mpath = directory / "meta.json"
    n, N, P = (_meta_int(meta, k, mpath) for k in ("n", "N", "P"))
    kspace = read_complex(directory / "kspace.bin", (N, P, n, n))
    sens = read_complex(directory / "sens.bin", (P, n, n))
    mask_raw = _read_payload(directory / "mask.u8", n * n, np.dtype(np.uint8))
    bad = np.flatnonzero(mask_raw > 1)
    if bad.size:
        raise FormatError(f"{directory / 'mask.u8'}: byte {int(mask_raw[bad[0]])} at offset {int(bad[0])} is not 0 or 1")
    truth = None
    if meta.get("has_truth", (directory / "truth.bin").exists()):
        truth = read_complex(directory / "truth.bin", (N, n, n))
    return DatasetBundle(
        kspace=kspace,
        mask=mask_raw.reshape(n, n).astype(bool),
        sens=sens,
        truth=truth,
        R=meta.get("R", 1.0),
        seed=meta.get("seed", 0),
        sigma=meta.get("sigma", 0.0),
    )


def write_recon(directory, u, extra_meta=None):
    """Write ``recon.bin`` and its ``meta.json``; returns the manifest of both."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    N, n, _ = u.shape
    atomic_write_bytes(directory / "recon.bin", to_complex_bytes(u))
    meta = {"format": RECON_FORMAT_NAME, "format_version": FORMAT_VERSION, "n": n, "N": N, "layout": RECON_LAYOUT}
    meta.update(extra_meta or {})
    atomic_write_json(directory / "meta.json", meta)
    return manifest(directory, ["recon.bin", "meta.json"])


def read_recon(directory):
    directory = Path(directory)
    meta = _read_meta(directory, RECON_FORMAT_NAME)
    mpath = directory / "meta.json"
    n, N = _meta_int(meta, "n", mpath), _meta_int(meta, "N", mpath)
    return read_complex(directory / "recon.bin", (N, n, n))


def read_images(path):
    """Image stack from a reconstruction directory or a bundle's ground truth."""
    path = Path(path)
    if (path / "recon.bin").exists():
        return read_recon(path)
    bundle = read_bundle(path)
    if bundle.truth is None:
        raise FormatError(f"{path}: bundle has no truth.bin")
    return bundle.truth


def png_bytes(image):
    """8-bit grayscale PNG of ``|image|`` scaled linearly so the maximum maps to 255."""
    mag = np.abs(np.asarray(image, dtype=np.complex128))
    top = mag.max()
    scaled = np.zeros(mag.shape, dtype=np.uint8) if top == 0 else np.round(255.0 * mag / top).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(scaled, mode="L").save(buf, format="PNG")
    return buf.getvalue()
