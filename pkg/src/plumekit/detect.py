"""Binary detection from enhancement and probability maps.

Covers the thresholding + morphology baseline, auxiliary input encodings
(wind and location planes), probability-map ensembling, and the padding
helper for full-granule inference. Neural probability maps are not computed
here; they enter the pipeline as externally produced rasters tagged with
their provider.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import ndimage

from .mf import EnhancementMap
from .raster import GeoTransform, read_geotiff, write_geotiff

#: Baseline enhancement threshold in ppm·m.
DEFAULT_BASELINE_THRESHOLD_PPMM = 500.0

#: Probability-map scaling for enhancement products: full scale in ppm·m
#: (0.5 maps to 4000 ppm·m).
ENHANCEMENT_PROB_FULL_SCALE_PPMM = 8000.0


class MorphKernel(str, Enum):
    """3x3 structuring elements for the baseline morphology."""

    ONES3X3 = "ones"
    CROSS3X3 = "cross"

    def footprint(self) -> np.ndarray:
        if self is MorphKernel.ONES3X3:
            return np.ones((3, 3), dtype=bool)
        cross = np.zeros((3, 3), dtype=bool)
        cross[1, :] = True
        cross[:, 1] = True
        return cross


@dataclass
class ProbabilityMap:
    """Single-band [0, 1] detector output raster."""

    values: np.ndarray
    provider_tag: str = "unknown"
    validity: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("probability map must be 2-D")
        if self.validity is None:
            self.validity = np.isfinite(self.values)
        else:
            self.validity = np.asarray(self.validity, dtype=bool)
            if self.validity.shape != self.values.shape:
                raise ValueError("validity shape mismatch")
        valid_vals = self.values[self.validity]
        if valid_vals.size and (np.nanmin(valid_vals) < 0.0 or np.nanmax(valid_vals) > 1.0):
            raise ValueError("probabilities outside [0, 1] on valid pixels")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def save(self, path: str | Path, transform: GeoTransform | None = None) -> None:
        out = self.values.astype(np.float32)
        out[~self.validity] = np.nan
        write_geotiff(path, out, transform,
                      {"kind": "probability", "provider_tag": self.provider_tag})

    @classmethod
    def load(cls, path: str | Path) -> tuple["ProbabilityMap", GeoTransform | None]:
        values, transform, desc = read_geotiff(path)
        values = np.asarray(values, dtype=float)
        return cls(values=values, provider_tag=desc.get("provider_tag", Path(path).stem)), transform


def baseline_detect(em: EnhancementMap, threshold_ppmm: float = DEFAULT_BASELINE_THRESHOLD_PPMM,
                    kernel: MorphKernel = MorphKernel.CROSS3X3) -> np.ndarray:
    """Threshold an enhancement product and open with the 3x3 kernel.

    mask = dilate(erode(em >= threshold)); neighbors outside the image count
    as background for both operations, so nothing is ever detected at a
    border that erosion would not keep inside it. Invalid pixels never
    detect.
    """
    if threshold_ppmm <= 0:
        raise ValueError("threshold must be positive")
    above = (em.values >= threshold_ppmm) & em.validity
    fp = kernel.footprint()
    eroded = ndimage.binary_erosion(above, structure=fp, border_value=0)
    return ndimage.binary_dilation(eroded, structure=fp, border_value=0)


def enhancement_to_probability(em: EnhancementMap,
                               full_scale_ppmm: float = ENHANCEMENT_PROB_FULL_SCALE_PPMM,
                               provider_tag: str = "baseline") -> ProbabilityMap:
    """Linear rescale of an enhancement product into [0, 1].

    Provider adapter for running the plume scoring chain on non-neural
    products; 0.5 corresponds to half the full scale.
    """
    scaled = np.clip(em.values / full_scale_ppmm, 0.0, 1.0)
    scaled[~em.validity] = np.nan
    return ProbabilityMap(values=scaled, provider_tag=provider_tag, validity=em.validity.copy())


@dataclass(frozen=True)
class AuxiliaryPlanes:
    """Constant per-tile input planes encoding wind and location.

    wind_u / wind_v hold the wind vector at the tile center in m/s. Latitude
    is scaled to [-1, 1]; longitude is wrapped onto the circle as
    (sin, cos) of 2*pi*lon/360 so that -180 and +180 coincide.
    """

    wind_u: np.ndarray
    wind_v: np.ndarray
    lat_plane: np.ndarray
    lon_sin_plane: np.ndarray
    lon_cos_plane: np.ndarray

    def stack(self) -> np.ndarray:
        return np.stack([self.wind_u, self.wind_v, self.lat_plane,
                         self.lon_sin_plane, self.lon_cos_plane])


def encode_auxiliary(wind_uv: tuple[float, float], lat_deg: float, lon_deg: float,
                     shape: tuple[int, int]) -> AuxiliaryPlanes:
    if not -90.0 <= lat_deg <= 90.0:
        raise ValueError(f"latitude out of range: {lat_deg}")
    if not -180.0 <= lon_deg <= 180.0:
        raise ValueError(f"longitude out of range: {lon_deg}")
    angle = 2.0 * np.pi * lon_deg / 360.0
    def plane(v: float) -> np.ndarray:
        return np.full(shape, v, dtype=float)
    return AuxiliaryPlanes(
        wind_u=plane(wind_uv[0]),
        wind_v=plane(wind_uv[1]),
        lat_plane=plane(lat_deg / 90.0),
        lon_sin_plane=plane(np.sin(angle)),
        lon_cos_plane=plane(np.cos(angle)),
    )


def ensemble(maps: list[ProbabilityMap]) -> ProbabilityMap:
    """Pixel-wise arithmetic mean of member probability maps.

    Validity is the intersection of member validities; the provider tag
    records the members. Averaging independent members suppresses pixels
    only one model fires on, which is what cuts false alarms on full
    granules.
    """
    if not maps:
        raise ValueError("ensemble needs at least one member")
    shape = maps[0].shape
    for m in maps[1:]:
        if m.shape != shape:
            raise ValueError(f"member shape {m.shape} != {shape}")
    validity = np.logical_and.reduce([m.validity for m in maps])
    stacked = np.stack([m.values for m in maps])
    mean = np.full(shape, np.nan)
    mean[validity] = stacked[:, validity].mean(axis=0)
    tag = "ensemble(" + ",".join(m.provider_tag for m in maps) + ")"
    return ProbabilityMap(values=mean, provider_tag=tag, validity=validity)


@dataclass(frozen=True)
class CropRecord:
    """Original size of a raster padded by :func:`pad_to_multiple`."""

    rows: int
    cols: int


def pad_to_multiple(values: np.ndarray, multiple: int = 32) -> tuple[np.ndarray, CropRecord]:
    """Zero-pad the bottom/right of a 2-D or 3-D (bands-first) raster.

    Full granules have arbitrary sizes; inference tiling wants multiples of
    32. The crop record inverts the padding exactly via :func:`crop_to_record`.
    """
    if multiple < 1:
        raise ValueError("multiple must be >= 1")
    rows, cols = values.shape[-2], values.shape[-1]
    pad_r = (-rows) % multiple
    pad_c = (-cols) % multiple
    if pad_r == 0 and pad_c == 0:
        return values.copy(), CropRecord(rows, cols)
    pad_width = [(0, 0)] * (values.ndim - 2) + [(0, pad_r), (0, pad_c)]
    return np.pad(values, pad_width, mode="constant"), CropRecord(rows, cols)


def crop_to_record(values: np.ndarray, record: CropRecord) -> np.ndarray:
    return values[..., : record.rows, : record.cols].copy()


def save_mask(mask: np.ndarray, path: str | Path, transform: GeoTransform | None = None) -> None:
    """Write a binary mask as single-band 8-bit GeoTIFF with values {0, 1}."""
    write_geotiff(path, mask.astype(np.uint8), transform, {"kind": "mask"})


def load_mask(path: str | Path) -> tuple[np.ndarray, GeoTransform | None]:
    values, transform, _ = read_geotiff(path)
    return values.astype(bool), transform
