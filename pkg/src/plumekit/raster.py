"""GeoTIFF raster I/O.

Rasters move through the pipeline as plain numpy arrays plus an affine
geo-transform and an optional free-form description dict. Files are written
as GeoTIFF (EPSG:4326, north-up) via tifffile; GDAL and QGIS read them
directly. Multi-band cubes are stored band-interleaved (planar separate),
band order = wavelength order.

Invalid pixels are NaN in float rasters; integer rasters are fully valid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tifffile

# GeoTIFF tag codes
_MODEL_PIXEL_SCALE = 33550
_MODEL_TIEPOINT = 33922
_MODEL_TRANSFORMATION = 34264
_GEO_KEY_DIRECTORY = 34735

# Minimal key directory: geographic model, pixel-is-area, WGS84 (EPSG:4326)
_WGS84_KEYS = (1, 1, 0, 3, 1024, 0, 1, 2, 1025, 0, 1, 1, 2048, 0, 1, 4326)


@dataclass(frozen=True)
class GeoTransform:
    """Affine pixel->geographic mapping in GDAL coefficient order.

    x = x0 + col * dx + row * rx
    y = y0 + col * ry + row * dy

    For the usual north-up raster, rx = ry = 0 and dy < 0.
    """

    x0: float
    dx: float
    rx: float
    y0: float
    ry: float
    dy: float

    def pixel_to_geo(self, row: float, col: float) -> tuple[float, float]:
        x = self.x0 + col * self.dx + row * self.rx
        y = self.y0 + col * self.ry + row * self.dy
        return x, y

    def geo_to_pixel(self, x: float, y: float) -> tuple[float, float]:
        det = self.dx * self.dy - self.rx * self.ry
        if det == 0.0:
            raise ValueError("degenerate geo-transform")
        col = ((x - self.x0) * self.dy - (y - self.y0) * self.rx) / det
        row = ((y - self.y0) * self.dx - (x - self.x0) * self.ry) / det
        return row, col

    def shifted(self, drow: int, dcol: int) -> "GeoTransform":
        """Transform for a window whose (0,0) sits at (drow, dcol) of this raster."""
        x0, y0 = self.pixel_to_geo(drow, dcol)
        return GeoTransform(x0, self.dx, self.rx, y0, self.ry, self.dy)

    @property
    def is_axis_aligned(self) -> bool:
        return self.rx == 0.0 and self.ry == 0.0

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (self.x0, self.dx, self.rx, self.y0, self.ry, self.dy)


#: Identity transform: geographic coords equal pixel coords (col, row).
IDENTITY_TRANSFORM = GeoTransform(0.0, 1.0, 0.0, 0.0, 0.0, 1.0)


def write_geotiff(
    path: str | Path,
    values: np.ndarray,
    transform: GeoTransform | None = None,
    description: dict | None = None,
) -> None:
    """Write a (rows, cols) or (bands, rows, cols) array as GeoTIFF.

    ``description`` is serialized as JSON into the ImageDescription tag and
    round-trips through :func:`read_geotiff`.
    """
    values = np.asarray(values)
    if values.ndim not in (2, 3):
        raise ValueError(f"expected 2-D or 3-D array, got shape {values.shape}")

    extratags = []
    if transform is not None:
        if transform.is_axis_aligned:
            extratags.append((_MODEL_PIXEL_SCALE, "d", 3, (transform.dx, abs(transform.dy), 0.0)))
            extratags.append((_MODEL_TIEPOINT, "d", 6, (0.0, 0.0, 0.0, transform.x0, transform.y0, 0.0)))
        else:
            mat = (
                transform.dx, transform.rx, 0.0, transform.x0,
                transform.ry, transform.dy, 0.0, transform.y0,
                0.0, 0.0, 0.0, 0.0,
                0.0, 0.0, 0.0, 1.0,
            )
            extratags.append((_MODEL_TRANSFORMATION, "d", 16, mat))
        extratags.append((_GEO_KEY_DIRECTORY, "H", len(_WGS84_KEYS), _WGS84_KEYS))

    kwargs = {}
    if values.ndim == 3:
        kwargs["planarconfig"] = "separate"
    tifffile.imwrite(
        str(path),
        values,
        photometric="minisblack",
        description=json.dumps(description) if description else None,
        extratags=extratags,
        **kwargs,
    )


def read_geotiff(path: str | Path) -> tuple[np.ndarray, GeoTransform | None, dict]:
    """Read a GeoTIFF written by :func:`write_geotiff`.

    Returns (values, transform, description). ``transform`` is None when the
    file carries no georeferencing; ``description`` is {} when absent or not
    JSON.
    """
    with tifffile.TiffFile(str(path)) as tif:
        values = tif.asarray()
        page = tif.pages[0]
        transform = None
        scale_tag = page.tags.get(_MODEL_PIXEL_SCALE)
        tie_tag = page.tags.get(_MODEL_TIEPOINT)
        matrix_tag = page.tags.get(_MODEL_TRANSFORMATION)
        if scale_tag is not None and tie_tag is not None:
            sx, sy = scale_tag.value[0], scale_tag.value[1]
            _, _, _, x0, y0, _ = tie_tag.value[:6]
            transform = GeoTransform(float(x0), float(sx), 0.0, float(y0), 0.0, -float(sy))
        elif matrix_tag is not None:
            m = matrix_tag.value
            transform = GeoTransform(float(m[3]), float(m[0]), float(m[1]),
                                     float(m[7]), float(m[4]), float(m[5]))
        description = {}
        desc_tag = page.tags.get(270)
        if desc_tag is not None:
            try:
                parsed = json.loads(desc_tag.value)
                if isinstance(parsed, dict):
                    description = parsed
            except (json.JSONDecodeError, TypeError):
                pass
    return values, transform, description


def validity_from_values(values: np.ndarray) -> np.ndarray:
    """Validity plane of a raster: finite pixels are valid.

    For a cube, a pixel is valid only when every band is finite.
    """
    finite = np.isfinite(values)
    if values.ndim == 3:
        return finite.all(axis=0)
    return finite


def apply_validity(values: np.ndarray, validity: np.ndarray) -> np.ndarray:
    """Return a float copy with invalid pixels set to NaN (for file output).

    3-D rasters may be bands-first (bands, rows, cols) or bands-last
    (rows, cols, bands); the orientation is inferred from the validity
    shape, preferring bands-last when both would match.
    """
    out = np.array(values, dtype=np.float32 if values.dtype.kind == "f" else values.dtype)
    if out.dtype.kind != "f":
        out = out.astype(np.float32)
    if values.ndim == 3:
        if values.shape[:2] == validity.shape:
            out[~validity] = math.nan
        elif values.shape[1:] == validity.shape:
            out[:, ~validity] = math.nan
        else:
            raise ValueError("validity shape matches neither raster orientation")
    else:
        out[~validity] = math.nan
    return out


def sidecar_path(raster_path: str | Path) -> Path:
    return Path(raster_path).with_suffix(".json")


def write_sidecar(raster_path: str | Path, metadata: dict) -> Path:
    path = sidecar_path(raster_path)
    path.write_text(json.dumps(metadata, indent=2) + "\n", encoding="utf-8")
    return path


def read_sidecar(raster_path: str | Path) -> dict:
    path = sidecar_path(raster_path)
    if not path.exists():
        raise FileNotFoundError(f"sidecar metadata not found: {path}")
    return json.loads(path.read_text(encoding="utf-8"))
