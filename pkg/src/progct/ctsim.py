"""Synthetic CT acquisition for paired low-dose/normal-dose images.

Ellipse phantoms are projected with a parallel-beam ray-driven radon
transform (bilinear sampling, detector spacing = pixel spacing),
reconstructed with ramp-filtered backprojection, and corrupted by
Poisson counting noise in the projection domain. The geometry works in
pixel-length units; a physical attenuation scale converts line integrals
to realistic magnitudes before the photon statistics are applied.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


class GeometryError(ValueError):
    pass


class SinogramModeError(ValueError):
    pass


# display windows as (low, high) in HU: level 40 width 400, level -600 width 1500
WINDOWS_HU = {
    "abdomen": (-160.0, 240.0),
    "chest": (-1350.0, 150.0),
}

# water reference: phantom value 1.0 reconstructs to 0 HU, empty space to -1000
WATER_VALUE = 1.0

# physical scale for line integrals: mu_water ~ 0.02/mm, 400 mm field of view
MU_WATER_PER_MM = 0.02
FOV_MM = 400.0


@dataclass
class Ellipse:
    cx: float
    cy: float
    a: float
    b: float
    angle: float = 0.0  # radians
    value: float = 1.0


@dataclass
class PhantomSpec:
    ellipses: list[Ellipse]
    size: int
    jitter: float = 0.0      # relative perturbation of centers/axes/values
    max_value: float = 2.0   # attenuation clamp inside the field of view


@dataclass
class DoseParams:
    i0: float = 1e5
    dose_factor: float = 0.25

    def __post_init__(self):
        if self.i0 <= 0:
            raise ValueError(f"incident photon count must be positive, got {self.i0}")
        if not (0.0 < self.dose_factor <= 1.0):
            raise ValueError(f"dose_factor must be in (0,1], got {self.dose_factor}")


@dataclass
class Sinogram:
    values: np.ndarray          # [n_views, n_det]
    mode: str                   # "line_integral" | "counts"
    image_size: int
    det_spacing: float = 1.0    # pixel-lengths
    clamped_bins: int = 0

    @property
    def n_views(self) -> int:
        return self.values.shape[0]

    @property
    def n_det(self) -> int:
        return self.values.shape[1]

    def angles(self) -> np.ndarray:
        return np.arange(self.n_views) * (np.pi / self.n_views)


def make_phantom(spec: PhantomSpec, seed: int = 0) -> np.ndarray:
    """Rasterize additive ellipses on [-1,1]^2; deterministic per seed."""
    n = spec.size
    img = np.zeros((n, n), dtype=np.float64)
    rng = np.random.default_rng(seed)
    coords = (np.arange(n) + 0.5) / n * 2.0 - 1.0
    x, y = np.meshgrid(coords, coords)
    for e in spec.ellipses:
        cx, cy, a, b, val = e.cx, e.cy, e.a, e.b, e.value
        if spec.jitter > 0:
            j = spec.jitter
            cx += rng.uniform(-j, j) * a
            cy += rng.uniform(-j, j) * b
            a *= 1.0 + rng.uniform(-j, j)
            b *= 1.0 + rng.uniform(-j, j)
            val *= 1.0 + rng.uniform(-j, j)
        ct, st = math.cos(e.angle), math.sin(e.angle)
        xr = (x - cx) * ct + (y - cy) * st
        yr = -(x - cx) * st + (y - cy) * ct
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += val
    return np.clip(img, 0.0, spec.max_value)


def default_body_spec(size: int, region: str = "abdomen") -> PhantomSpec:
    """A water body with randomized soft-tissue inserts (jitter drives variety)."""
    if region == "chest":
        inserts = [
            Ellipse(-0.32, 0.0, 0.28, 0.38, 0.1, -0.75),   # lung-like low density
            Ellipse(0.32, 0.0, 0.28, 0.38, -0.1, -0.75),
            Ellipse(0.0, 0.30, 0.10, 0.12, 0.0, 0.06),
            Ellipse(0.0, -0.42, 0.10, 0.06, 0.0, 0.80),    # spine-like
        ]
    else:
        inserts = [
            Ellipse(-0.25, -0.08, 0.26, 0.20, 0.3, 0.05),  # liver-like
            Ellipse(0.30, 0.05, 0.12, 0.16, -0.2, -0.06),
            Ellipse(0.05, 0.28, 0.09, 0.07, 0.0, 0.09),
            Ellipse(0.0, -0.42, 0.09, 0.06, 0.0, 0.80),
            Ellipse(-0.05, 0.02, 0.05, 0.05, 0.0, 0.12),
        ]
    body = [Ellipse(0.0, 0.0, 0.80, 0.62, 0.0, WATER_VALUE)]
    return PhantomSpec(ellipses=body + inserts, size=size, jitter=0.12)


def shepp_logan_like(size: int) -> PhantomSpec:
    """High-contrast head-style phantom for reconstruction accuracy checks."""
    es = [
        Ellipse(0.0, 0.0, 0.69, 0.92, 0.0, 1.0),
        Ellipse(0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8),
        Ellipse(0.22, 0.0, 0.11, 0.31, -0.314, -0.2),
        Ellipse(-0.22, 0.0, 0.16, 0.41, 0.314, -0.2),
        Ellipse(0.0, 0.35, 0.21, 0.25, 0.0, 0.1),
        Ellipse(0.0, 0.1, 0.046, 0.046, 0.0, 0.1),
        Ellipse(0.0, -0.1, 0.046, 0.046, 0.0, 0.1),
        Ellipse(-0.08, -0.605, 0.046, 0.023, 0.0, 0.1),
        Ellipse(0.0, -0.605, 0.023, 0.023, 0.0, 0.1),
        Ellipse(0.06, -0.605, 0.023, 0.046, 0.0, 0.1),
    ]
    return PhantomSpec(ellipses=es, size=size, jitter=0.0)


def min_detectors(size: int) -> int:
    return int(math.ceil(size * math.sqrt(2.0)))


def radon(img: np.ndarray, n_views: int, n_det: int | None = None) -> Sinogram:
    """Parallel-beam line integrals over [0, pi), in pixel-length units."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise GeometryError(f"radon expects a square image, got {img.shape}")
    if n_views < 1:
        raise GeometryError(f"n_views must be >= 1, got {n_views}")
    n = img.shape[0]
    if n_det is None:
        n_det = min_detectors(n)
    elif n_det < min_detectors(n):
        raise GeometryError(f"n_det {n_det} below minimum {min_detectors(n)} for size {n}")
    half = (n - 1) / 2.0
    t = (np.arange(n_det) - (n_det - 1) / 2.0)          # detector positions
    n_steps = int(math.ceil(n * math.sqrt(2.0))) + 1
    s = np.arange(n_steps) - (n_steps - 1) / 2.0        # integration steps, ds = 1
    sino = np.zeros((n_views, n_det), dtype=np.float64)
    angles = np.arange(n_views) * (np.pi / n_views)
    for vi, th in enumerate(angles):
        ct, st = math.cos(th), math.sin(th)
        # ray point = t*(ct,st) + s*(-st,ct)
        x = t[:, None] * ct - s[None, :] * st + half
        y = t[:, None] * st + s[None, :] * ct + half
        x0 = np.floor(x).astype(np.int64)
        y0 = np.floor(y).astype(np.int64)
        fx = x - x0
        fy = y - y0
        acc = np.zeros_like(x)
        for dy in (0, 1):
            wy = np.where(dy == 0, 1.0 - fy, fy)
            yy = y0 + dy
            ok_y = (yy >= 0) & (yy < n)
            for dx in (0, 1):
                wx = np.where(dx == 0, 1.0 - fx, fx)
                xx = x0 + dx
                ok = ok_y & (xx >= 0) & (xx < n)
                acc += np.where(ok, img[yy.clip(0, n - 1), xx.clip(0, n - 1)] * wy * wx, 0.0)
        sino[vi] = acc.sum(axis=1)
    return Sinogram(values=sino, mode="line_integral", image_size=n)


def _ramp_filter(n_fft: int, d: float) -> np.ndarray:
    return np.abs(np.fft.fftfreq(n_fft, d=d))


def fbp(sino: Sinogram, size: int | None = None) -> np.ndarray:
    """Ramp-filtered backprojection onto the original pixel grid."""
    if sino.mode != "line_integral":
        raise SinogramModeError(
            "fbp requires a line-integral sinogram; log-convert photon counts first")
    n = size or sino.image_size
    p = sino.values
    n_views, n_det = p.shape
    n_fft = 1 << max(6, int(math.ceil(math.log2(2 * n_det))))
    ramp = _ramp_filter(n_fft, sino.det_spacing)
    q = np.real(np.fft.ifft(np.fft.fft(p, n=n_fft, axis=1) * ramp[None, :], axis=1))[:, :n_det]
    half = (n - 1) / 2.0
    coords = np.arange(n) - half
    x, y = np.meshgrid(coords, coords)
    recon = np.zeros((n, n), dtype=np.float64)
    t0 = (n_det - 1) / 2.0
    angles = sino.angles()
    for vi in range(n_views):
        th = angles[vi]
        t = (x * math.cos(th) + y * math.sin(th)) / sino.det_spacing + t0
        i0 = np.floor(t).astype(np.int64)
        f = t - i0
        i1 = i0 + 1
        ok0 = (i0 >= 0) & (i0 < n_det)
        ok1 = (i1 >= 0) & (i1 < n_det)
        row = q[vi]
        recon += np.where(ok0, row[i0.clip(0, n_det - 1)] * (1.0 - f), 0.0)
        recon += np.where(ok1, row[i1.clip(0, n_det - 1)] * f, 0.0)
    return recon * (np.pi / n_views)


def insert_poisson_noise(sino: Sinogram, dose: DoseParams, seed: int) -> Sinogram:
    """Photon counting noise at a dose fraction, returned as line integrals.

    Mean counts per bin are dose*I0*exp(-p); sampled counts are clamped
    to >= 1 so the log transform stays finite (firings are counted).
    """
    if sino.mode != "line_integral":
        raise SinogramModeError("noise insertion operates on line integrals")
    flux = dose.dose_factor * dose.i0
    if flux < 1.0:
        raise ValueError(f"dose_factor*I0 must be >= 1, got {flux}")
    rng = np.random.default_rng(seed)
    mean = flux * np.exp(-sino.values)
    counts = rng.poisson(mean).astype(np.float64)
    clamped = int(np.count_nonzero(counts < 1.0))
    counts = np.maximum(counts, 1.0)
    noisy = np.log(flux / counts)
    return replace(sino, values=noisy, clamped_bins=clamped)


def hu_window(img_hu: np.ndarray, window: str) -> np.ndarray:
    """Affine map of the window interval onto [0,1], clamped outside."""
    if window not in WINDOWS_HU:
        raise ValueError(f"unknown window {window!r}; expected one of {sorted(WINDOWS_HU)}")
    lo, hi = WINDOWS_HU[window]
    return np.clip((np.asarray(img_hu, dtype=np.float64) - lo) / (hi - lo), 0.0, 1.0)


def attenuation_to_hu(img: np.ndarray) -> np.ndarray:
    return 1000.0 * (np.asarray(img, dtype=np.float64) - WATER_VALUE)


def mu_per_pixel(size: int) -> float:
    """Physical attenuation per pixel-length for a water-valued pixel."""
    return MU_WATER_PER_MM * (FOV_MM / size)


def simulate_pair(phantom: np.ndarray, n_views: int, dose: DoseParams, seed: int,
                  n_det: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(LDCT, NDCT) HU images from one noiseless sinogram and geometry.

    The normal-dose image uses dose_factor=1, the low-dose image the
    configured fraction; both reconstruct onto the identical pixel grid.
    """
    scalef = mu_per_pixel(phantom.shape[0])
    clean = radon(phantom * scalef, n_views=n_views, n_det=n_det)
    nd_sino = insert_poisson_noise(clean, replace(dose, dose_factor=1.0), seed=seed * 2 + 1)
    ld_sino = insert_poisson_noise(clean, dose, seed=seed * 2 + 2)
    nd = attenuation_to_hu(fbp(nd_sino) / scalef)
    ld = attenuation_to_hu(fbp(ld_sino) / scalef)
    return ld, nd
