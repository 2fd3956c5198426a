"""Emission rate estimation with the integrated mass enhancement method.

IME sums the column enhancement over a plume mask and converts it to mass;
the flux divides that mass by a residence time L / U_eff built from the
plume length scale and an effective wind speed. The conversion constant and
the U_eff calibration are configuration, not constants of nature: defaults
ship in ``data/ime_defaults.toml`` and are placeholders until replaced by a
site calibration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .cube import _data_path


@dataclass(frozen=True)
class WindSample:
    """10 m wind vector from a reanalysis product, m/s components."""

    u10: float
    v10: float
    source_tag: str = "unspecified"

    def __post_init__(self):
        if not (math.isfinite(self.u10) and math.isfinite(self.v10)):
            raise ValueError("wind components must be finite")

    @property
    def speed(self) -> float:
        return math.hypot(self.u10, self.v10)


@dataclass(frozen=True)
class ImeConfig:
    """IME conversion and effective-wind coefficients.

    mass_per_ppmm: kg/m^2 of CH4 per ppm*m of enhancement.
    ueff_a, ueff_b: U_eff = a * wind_speed + b, m/s.
    """

    mass_per_ppmm: float
    ueff_a: float
    ueff_b: float

    def __post_init__(self):
        if self.mass_per_ppmm <= 0:
            raise ValueError("mass_per_ppmm must be > 0")
        if self.ueff_a <= 0:
            raise ValueError("ueff_a must be > 0")

    @classmethod
    def from_toml(cls, path=None) -> "ImeConfig":
        """Load coefficients; without a path, the shipped defaults."""
        source = path if path is not None else _data_path("ime_defaults.toml")
        with open(source, "rb") as fh:
            doc = tomllib.load(fh)
        return cls(
            mass_per_ppmm=float(doc["ime"]["mass_per_ppmm"]),
            ueff_a=float(doc["ueff"]["a"]),
            ueff_b=float(doc["ueff"]["b"]),
        )


@dataclass(frozen=True)
class ImeResult:
    ime_kg: float
    clamped_px: int  # pixels whose negative enhancement was clamped to 0


@dataclass(frozen=True)
class FluxResult:
    q_kg_per_hr: float
    u_eff: float
    quantifiable: bool  # False when U_eff = 0 gives no transport estimate


def ime(enhancement: np.ndarray, mask: np.ndarray, gsd_m: float,
        cfg: ImeConfig) -> ImeResult:
    """Integrated mass enhancement over the mask, in kg.

    IME = mass_per_ppmm * gsd^2 * sum of enhancement (ppm*m) over the mask.
    Negative retrievals inside the mask are clamped to zero and counted;
    additive over disjoint mask partitions.
    """
    enhancement = np.asarray(enhancement, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if enhancement.shape != mask.shape:
        raise ValueError("enhancement and mask shapes differ")
    if not mask.any():
        raise ValueError("empty plume mask")
    values = enhancement[mask]
    values = np.where(np.isfinite(values), values, 0.0)
    clamped = int(np.count_nonzero(values < 0))
    total_ppmm = float(np.clip(values, 0.0, None).sum())
    return ImeResult(ime_kg=cfg.mass_per_ppmm * gsd_m * gsd_m * total_ppmm,
                     clamped_px=clamped)


def plume_length_m(area_px: int, gsd_m: float) -> float:
    """Default length scale: square root of the plume area in m^2."""
    if area_px < 1:
        raise ValueError("area_px must be >= 1")
    return math.sqrt(area_px) * gsd_m


def flux(ime_kg: float, length_m: float, wind: WindSample,
         cfg: ImeConfig) -> FluxResult:
    """Emission rate Q = (U_eff / L) * IME * 3600, kg/hr.

    Calm wind with a zero intercept yields U_eff = 0; the result is flagged
    unquantifiable rather than raising, since the IME itself is still valid.
    """
    if length_m <= 0:
        raise ValueError("length scale must be > 0")
    if ime_kg < 0:
        raise ValueError("IME must be >= 0")
    u_eff = cfg.ueff_a * wind.speed + cfg.ueff_b
    if u_eff == 0.0:
        return FluxResult(q_kg_per_hr=0.0, u_eff=0.0, quantifiable=False)
    return FluxResult(q_kg_per_hr=(u_eff / length_m) * ime_kg * 3600.0,
                      u_eff=u_eff, quantifiable=True)
