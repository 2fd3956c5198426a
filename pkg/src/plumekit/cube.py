"""Hyperspectral cube model, band selection, and synthetic scene generation.

A :class:`SpectralCube` carries radiance (or reflectance) as a
(rows, cols, bands) array with per-band center wavelengths in nm, a boolean
validity plane, a sensor id, and the ground sample distance. All operations
here are pure; invalid pixels are excluded from statistics downstream, never
zero-filled.

Synthetic scenes serve as the test substrate for the retrieval chain: a
Gaussian background plus a plume injected either through the physical
Beer-Lambert transmittance exp(c * s_b) or through its linearization
x + c * (mu * s), which the matched filter inverts exactly.
"""

from __future__ import annotations

import importlib.resources
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np


class SensorId(str, Enum):
    EMIT = "EMIT"
    PRISMA = "PRISMA"
    ENMAP = "EnMAP"
    SYNTHETIC = "SYNTHETIC"


#: Ground sample distance in meters per sensor.
SENSOR_GSD_M = {
    SensorId.EMIT: 60.0,
    SensorId.PRISMA: 30.0,
    SensorId.ENMAP: 30.0,
    SensorId.SYNTHETIC: 60.0,
}


class BandSelectionError(ValueError):
    """Raised when a window set selects no bands."""


@dataclass(frozen=True)
class BandWindowSet:
    """Closed wavelength intervals [lo, hi] in nm, non-overlapping."""

    windows: tuple[tuple[float, float], ...]

    def __post_init__(self):
        for lo, hi in self.windows:
            if not lo < hi:
                raise ValueError(f"window [{lo}, {hi}] must satisfy lo < hi")
        ordered = sorted(self.windows)
        for (_, hi_a), (lo_b, _) in zip(ordered, ordered[1:]):
            if lo_b <= hi_a:
                raise ValueError("windows overlap")

    def contains(self, wavelengths_nm: np.ndarray) -> np.ndarray:
        """Boolean selector over band centers."""
        wl = np.asarray(wavelengths_nm, dtype=float)
        inside = np.zeros(wl.shape, dtype=bool)
        for lo, hi in self.windows:
            inside |= (wl >= lo) & (wl <= hi)
        return inside


@dataclass(frozen=True)
class TargetSignature:
    """Per-band unit absorption: change in log-transmittance per ppm·m.

    Coefficients are <= 0 inside absorption features (absorption darkens
    radiance); zero elsewhere.
    """

    wavelengths_nm: np.ndarray
    coefficients: np.ndarray
    source_tag: str = "unknown"

    def __post_init__(self):
        object.__setattr__(self, "wavelengths_nm", np.asarray(self.wavelengths_nm, dtype=float))
        object.__setattr__(self, "coefficients", np.asarray(self.coefficients, dtype=float))
        if self.wavelengths_nm.shape != self.coefficients.shape:
            raise ValueError("signature wavelengths and coefficients differ in length")

    def aligned_to(self, wavelengths_nm: np.ndarray, atol: float = 1e-6) -> np.ndarray:
        """Coefficients for exactly the given band centers.

        Every requested wavelength must appear in the signature table;
        interpolation is deliberately not done here (band sets are sensor
        tables, not arbitrary grids).
        """
        wl = np.asarray(wavelengths_nm, dtype=float)
        idx = np.searchsorted(self.wavelengths_nm, wl)
        idx = np.clip(idx, 0, len(self.wavelengths_nm) - 1)
        left = np.clip(idx - 1, 0, len(self.wavelengths_nm) - 1)
        use_left = np.abs(self.wavelengths_nm[left] - wl) < np.abs(self.wavelengths_nm[idx] - wl)
        idx = np.where(use_left, left, idx)
        if not np.allclose(self.wavelengths_nm[idx], wl, atol=atol):
            raise ValueError("signature does not cover the requested band centers")
        return self.coefficients[idx]

    def to_json(self) -> dict:
        return {
            "schema": "plumekit.signature.v1",
            "wavelengths_nm": self.wavelengths_nm.tolist(),
            "coefficients": self.coefficients.tolist(),
            "source_tag": self.source_tag,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "TargetSignature":
        return cls(
            wavelengths_nm=np.asarray(payload["wavelengths_nm"], dtype=float),
            coefficients=np.asarray(payload["coefficients"], dtype=float),
            source_tag=payload.get("source_tag", "unknown"),
        )


@dataclass
class SpectralCube:
    """3-D hyperspectral raster.

    values has shape (rows, cols, bands) so per-pixel spectra are contiguous.
    validity marks pixels usable for statistics; invalid pixels may hold any
    value (including NaN).
    """

    values: np.ndarray
    wavelengths_nm: np.ndarray
    sensor_id: SensorId = SensorId.SYNTHETIC
    gsd_m: float = 60.0
    validity: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.wavelengths_nm = np.asarray(self.wavelengths_nm, dtype=float)
        if self.values.ndim != 3:
            raise ValueError(f"cube values must be (rows, cols, bands), got {self.values.shape}")
        if self.wavelengths_nm.ndim != 1 or len(self.wavelengths_nm) != self.values.shape[2]:
            raise ValueError("wavelength count does not match band count")
        if np.any(np.diff(self.wavelengths_nm) <= 0):
            raise ValueError("wavelengths must be strictly increasing")
        if self.gsd_m <= 0:
            raise ValueError("gsd_m must be positive")
        if self.validity is None:
            self.validity = np.isfinite(self.values).all(axis=2)
        else:
            self.validity = np.asarray(self.validity, dtype=bool)
            if self.validity.shape != self.values.shape[:2]:
                raise ValueError("validity plane shape does not match cube")
        if not np.isfinite(self.values[self.validity]).all():
            raise ValueError("non-finite values on valid pixels")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def bands(self) -> int:
        return self.values.shape[2]


def select_bands(cube: SpectralCube, windows: BandWindowSet) -> SpectralCube:
    """Keep exactly the bands whose center lies inside any window.

    Band order, rows/cols, and validity are unchanged. Raises
    :class:`BandSelectionError` when nothing falls inside the windows.
    """
    keep = windows.contains(cube.wavelengths_nm)
    if not keep.any():
        raise BandSelectionError("no bands in window")
    return SpectralCube(
        values=cube.values[:, :, keep],
        wavelengths_nm=cube.wavelengths_nm[keep],
        sensor_id=cube.sensor_id,
        gsd_m=cube.gsd_m,
        validity=cube.validity.copy(),
    )


# ---------------------------------------------------------------------------
# Shipped sensor tables and signatures
# ---------------------------------------------------------------------------

def _data_path(name: str) -> Path:
    return Path(str(importlib.resources.files("plumekit") / "data" / name))


def sensor_wavelengths(sensor: SensorId) -> np.ndarray:
    """Band-center table shipped for the sensor, in nm."""
    sig = load_signature(sensor)
    return sig.wavelengths_nm


def load_signature(sensor: SensorId) -> TargetSignature:
    """Unit methane absorption signature shipped for the sensor.

    These tables are generated stand-ins shaped like the real absorption
    spectrum (see :func:`methane_absorption_signature`); swap in calibrated
    tables by replacing the data files.
    """
    name = f"signature_{sensor.value.lower()}.json"
    payload = json.loads(_data_path(name).read_text(encoding="utf-8"))
    return TargetSignature.from_json(payload)


# Gaussian absorption wells approximating the methane features around
# 1150 / 1650 / 2300 nm; depth in ln-transmittance per ppm·m.
_ABSORPTION_WELLS = (
    (1150.0, 40.0, -2.0e-5),
    (1660.0, 45.0, -6.0e-5),
    (2150.0, 60.0, -3.0e-5),
    (2310.0, 55.0, -1.5e-4),
)


def methane_absorption_signature(wavelengths_nm: np.ndarray,
                                 source_tag: str = "synthetic-gaussian-wells-v1") -> TargetSignature:
    """Synthetic unit absorption curve on an arbitrary band grid.

    The curve is a sum of negative Gaussian wells at the main methane
    features; it is physically shaped but not a line-by-line computation, so
    retrievals made with it are self-consistent rather than calibrated.
    """
    wl = np.asarray(wavelengths_nm, dtype=float)
    coeff = np.zeros_like(wl)
    for center, width, depth in _ABSORPTION_WELLS:
        coeff += depth * np.exp(-0.5 * ((wl - center) / width) ** 2)
    # Flatten the numerically irrelevant far tails to exact zero.
    coeff[np.abs(coeff) < 1e-12] = 0.0
    return TargetSignature(wavelengths_nm=wl, coefficients=coeff, source_tag=source_tag)


# ---------------------------------------------------------------------------
# Synthetic scenes
# ---------------------------------------------------------------------------

class CovarianceError(ValueError):
    """Raised for background covariances that are not positive semi-definite."""


@dataclass
class SyntheticSpec:
    """Recipe for a synthetic scene.

    background_cov is one of:
      - None: zero covariance (noiseless);
      - 1-D array: per-band variances (diagonal covariance);
      - 2-D array: full covariance, must be positive definite.
    concentration_ppmm is either a scalar applied inside the disk given by
    (plume_center, plume_radius_px), or a full (rows, cols) map.
    """

    rows: int
    cols: int
    wavelengths_nm: np.ndarray
    background_mean: np.ndarray
    background_cov: np.ndarray | None = None
    concentration_ppmm: float | np.ndarray = 0.0
    plume_center: tuple[int, int] | None = None
    plume_radius_px: float = 0.0
    signature: TargetSignature | None = None
    injection: str = "multiplicative"  # or "linearized"
    seed: int = 0
    gsd_m: float = 60.0

    @classmethod
    def from_json(cls, payload: dict) -> "SyntheticSpec":
        cov = payload.get("background_cov")
        conc = payload["concentration_ppmm"]
        return cls(
            rows=payload["rows"],
            cols=payload["cols"],
            wavelengths_nm=np.asarray(payload["wavelengths_nm"], dtype=float),
            background_mean=np.asarray(payload["background_mean"], dtype=float),
            background_cov=None if cov is None else np.asarray(cov, dtype=float),
            concentration_ppmm=np.asarray(conc, dtype=float) if isinstance(conc, list) else float(conc),
            plume_center=tuple(payload["plume_center"]) if payload.get("plume_center") else None,
            plume_radius_px=float(payload.get("plume_radius_px", 0.0)),
            signature=TargetSignature.from_json(payload["signature"]) if payload.get("signature") else None,
            injection=payload.get("injection", "multiplicative"),
            seed=int(payload.get("seed", 0)),
            gsd_m=float(payload.get("gsd_m", 60.0)),
        )


def disk_mask(rows: int, cols: int, center: tuple[int, int], radius_px: float) -> np.ndarray:
    rr, cc = np.mgrid[0:rows, 0:cols]
    return (rr - center[0]) ** 2 + (cc - center[1]) ** 2 <= radius_px ** 2


def _noise_factor(cov: np.ndarray | None, bands: int) -> np.ndarray | None:
    """Matrix A with A @ A.T = cov, or None for zero covariance."""
    if cov is None:
        return None
    cov = np.asarray(cov, dtype=float)
    if cov.ndim == 1:
        if len(cov) != bands:
            raise CovarianceError("diagonal covariance length does not match band count")
        if np.any(cov < 0):
            raise CovarianceError("covariance not positive semi-definite")
        if np.all(cov == 0):
            return None
        return np.diag(np.sqrt(cov))
    if cov.shape != (bands, bands):
        raise CovarianceError("covariance shape does not match band count")
    if np.all(cov == 0):
        return None
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise CovarianceError("covariance not positive semi-definite") from exc


def synthesize_scene(spec: SyntheticSpec) -> tuple[SpectralCube, np.ndarray, np.ndarray]:
    """Generate (cube, plume mask, true concentration map).

    Background pixels are mu + n with n ~ N(0, cov). Plume pixels are
    perturbed by exp(c * s_b) per band ("multiplicative"), or shifted by
    c * (mu * s) ("linearized", the model the matched filter inverts
    exactly). Deterministic under a fixed seed.
    """
    bands = len(spec.wavelengths_nm)
    mu = np.asarray(spec.background_mean, dtype=float)
    if mu.shape != (bands,):
        raise ValueError("background mean length does not match band count")

    conc = np.zeros((spec.rows, spec.cols), dtype=float)
    if isinstance(spec.concentration_ppmm, np.ndarray):
        if spec.concentration_ppmm.shape != (spec.rows, spec.cols):
            raise ValueError("concentration map shape does not match scene")
        conc = spec.concentration_ppmm.astype(float)
    elif spec.concentration_ppmm != 0.0:
        if spec.plume_center is None:
            raise ValueError("scalar concentration requires a plume disk (center, radius)")
        mask = disk_mask(spec.rows, spec.cols, spec.plume_center, spec.plume_radius_px)
        conc[mask] = float(spec.concentration_ppmm)

    rng = np.random.default_rng(spec.seed)
    factor = _noise_factor(spec.background_cov, bands)
    values = np.broadcast_to(mu, (spec.rows, spec.cols, bands)).copy()
    if factor is not None:
        z = rng.standard_normal((spec.rows, spec.cols, bands))
        values = values + z @ factor.T

    plume = conc > 0
    if plume.any():
        if spec.signature is None:
            raise ValueError("plume injection requires a target signature")
        s = spec.signature.aligned_to(spec.wavelengths_nm)
        if spec.injection == "multiplicative":
            transmittance = np.exp(conc[plume][:, None] * s[None, :])
            values[plume] = values[plume] * transmittance
        elif spec.injection == "linearized":
            values[plume] = values[plume] + conc[plume][:, None] * (mu * s)[None, :]
        else:
            raise ValueError(f"unknown injection mode: {spec.injection}")

    cube = SpectralCube(
        values=values,
        wavelengths_nm=spec.wavelengths_nm,
        sensor_id=SensorId.SYNTHETIC,
        gsd_m=spec.gsd_m,
    )
    return cube, plume, conc


def save_cube(path: str | Path, cube: SpectralCube,
              transform=None) -> None:
    """Write a cube as a bands-first multi-band GeoTIFF, NaN on invalid."""
    from .raster import apply_validity, write_geotiff

    values = apply_validity(cube.values, cube.validity).astype(np.float32)
    write_geotiff(path, values.transpose(2, 0, 1), transform, {
        "kind": "cube",
        "sensor_id": cube.sensor_id.value,
        "gsd_m": cube.gsd_m,
        "wavelengths_nm": [float(w) for w in cube.wavelengths_nm],
    })


def load_cube(path: str | Path):
    """Read a cube GeoTIFF back into a SpectralCube plus its transform."""
    from .raster import read_geotiff

    values, transform, description = read_geotiff(path)
    if description.get("kind") != "cube":
        raise ValueError(f"{path} is not a cube raster")
    values = np.asarray(values, dtype=float)
    if values.ndim == 2:
        values = values[None, :, :]
    cube = SpectralCube(
        values=values.transpose(1, 2, 0),
        wavelengths_nm=np.asarray(description["wavelengths_nm"], dtype=float),
        sensor_id=SensorId(description.get("sensor_id", "SYNTHETIC")),
        gsd_m=float(description.get("gsd_m", 60.0)),
    )
    return cube, transform
