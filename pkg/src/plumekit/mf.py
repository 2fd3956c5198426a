"""Matched-filter methane enhancement products.

Three single-band products, all in ppm·m mixing-ratio length:

* ``matched_filter`` - classic per-group matched filter
  alpha(x) = ((x - mu)' C^-1 t) / (t' C^-1 t) with target t = mu * s,
  where s is the unit absorption signature (ln-transmittance per ppm·m).
* ``mag1c`` - iterative variant: optional per-pixel albedo normalization,
  non-negativity clamping, and background re-estimation with the current
  methane contribution subtracted.
* ``wmf`` - the matched filter restricted to wide spectral windows that
  better constrain the background; identical to ``matched_filter`` on the
  band-selected cube.

Statistics groups are either the whole scene or each detector column
(pushbroom striping). Covariance is shrunk toward its diagonal and solved
through a Cholesky factorization, never inverted explicitly.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .cube import BandWindowSet, SpectralCube, TargetSignature, select_bands
from .raster import GeoTransform, read_geotiff, write_geotiff


class ProductKind(str, Enum):
    MF = "MF"
    MAG1C = "MAG1C"
    WMF = "WMF"


#: Default wide-window band set (nm): the short-wave infrared windows used
#: for the wide-window product on EMIT-like band tables. For sensors whose
#: range does not span these windows, the intersection applies.
DEFAULT_WMF_WINDOWS = BandWindowSet(windows=((976.9, 1260.0), (1330.0, 2441.1)))


class SingularCovarianceError(RuntimeError):
    """Covariance factorization failed for a statistics group."""


class SignatureMismatchError(ValueError):
    """Signature does not cover the cube's band centers."""


class DivergenceError(RuntimeError):
    """Iterative retrieval produced values beyond the divergence limit."""


@dataclass
class MfConfig:
    """Knobs for the matched-filter family.

    grouping: "whole_scene" or "per_column". Per-column suits pushbroom
    sensors; whole-scene suits synthetic tests.
    shrinkage: weight of diag(C) in C <- (1-l) C + l diag(C), in [0, 1].
    windows: band windows; presence means the wide-window product.
    """

    grouping: str = "whole_scene"
    shrinkage: float = 0.05
    mag1c_iterations: int = 5
    mag1c_albedo_correction: bool = True
    windows: BandWindowSet | None = None
    divergence_limit_ppmm: float = 1e5

    def __post_init__(self):
        if self.grouping not in ("whole_scene", "per_column"):
            raise ValueError(f"unknown grouping: {self.grouping}")
        if not 0.0 <= self.shrinkage <= 1.0:
            raise ValueError("shrinkage must be in [0, 1]")
        if self.mag1c_iterations < 1:
            raise ValueError("mag1c_iterations must be >= 1")


@dataclass
class EnhancementMap:
    """Single-band ppm·m methane enhancement raster."""

    values: np.ndarray
    product_kind: ProductKind
    validity: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("enhancement map must be 2-D")
        if self.validity is None:
            self.validity = np.isfinite(self.values)
        else:
            self.validity = np.asarray(self.validity, dtype=bool)
            if self.validity.shape != self.values.shape:
                raise ValueError("validity shape mismatch")
        if not np.isfinite(self.values[self.validity]).all():
            raise ValueError("non-finite enhancement on valid pixels")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def save(self, path: str | Path, transform: GeoTransform | None = None) -> None:
        out = self.values.astype(np.float32)
        out[~self.validity] = np.nan
        write_geotiff(path, out, transform,
                      {"kind": "enhancement", "product_kind": self.product_kind.value,
                       "units": "ppmm"})

    @classmethod
    def load(cls, path: str | Path) -> tuple["EnhancementMap", GeoTransform | None]:
        values, transform, desc = read_geotiff(path)
        kind = ProductKind(desc.get("product_kind", "MF"))
        return cls(values=np.asarray(values, dtype=float), product_kind=kind), transform


def _group_columns(cols: int, grouping: str) -> list[tuple[str, slice]]:
    if grouping == "whole_scene":
        return [("scene", slice(0, cols))]
    return [(f"column {c}", slice(c, c + 1)) for c in range(cols)]


def _shrink(cov: np.ndarray, shrinkage: float) -> np.ndarray:
    if shrinkage == 0.0:
        return cov
    diag = np.diag(np.diag(cov))
    return (1.0 - shrinkage) * cov + shrinkage * diag


def _solve_spd(cov: np.ndarray, rhs: np.ndarray, group: str) -> np.ndarray:
    try:
        return cho_solve(cho_factor(cov, lower=True), rhs)
    except (LinAlgError, np.linalg.LinAlgError) as exc:
        raise SingularCovarianceError(
            f"singular covariance after shrinkage in group '{group}'") from exc


def _aligned_signature(cube: SpectralCube, sig: TargetSignature) -> np.ndarray:
    try:
        return sig.aligned_to(cube.wavelengths_nm)
    except ValueError as exc:
        raise SignatureMismatchError(str(exc)) from exc


def _group_stats(x_valid: np.ndarray, shrinkage: float, group: str) -> tuple[np.ndarray, np.ndarray]:
    if x_valid.shape[0] < 2:
        raise SingularCovarianceError(
            f"group '{group}' has {x_valid.shape[0]} valid pixels, need at least 2")
    mu = x_valid.mean(axis=0)
    centered = x_valid - mu
    cov = centered.T @ centered / x_valid.shape[0]
    return mu, _shrink(cov, shrinkage)


def matched_filter(
    cube: SpectralCube,
    sig: TargetSignature,
    cfg: MfConfig | None = None,
    stats: tuple[np.ndarray, np.ndarray] | None = None,
    product_kind: ProductKind = ProductKind.MF,
    workers: int = 1,
) -> EnhancementMap:
    """Classic matched filter over the cube's bands.

    The signature must already be aligned to the cube (band selection for the
    wide-window product happens in :func:`wmf`). ``stats`` optionally fixes
    (mean, covariance) for every group instead of estimating them from the
    scene; shrinkage is not applied to supplied statistics.

    Groups are independent; with ``workers`` > 1 they run on a thread pool.
    Output is identical regardless of scheduling (disjoint writes).
    """
    cfg = cfg or MfConfig()
    s = _aligned_signature(cube, sig)
    out = np.full((cube.rows, cube.cols), np.nan)
    groups = _group_columns(cube.cols, cfg.grouping)

    def run_group(item: tuple[str, slice]) -> None:
        label, cols = item
        block = cube.values[:, cols, :]
        valid = cube.validity[:, cols]
        x_valid = block[valid]
        if stats is not None:
            mu, cov = np.asarray(stats[0], dtype=float), np.asarray(stats[1], dtype=float)
        else:
            mu, cov = _group_stats(x_valid, cfg.shrinkage, label)
        t = mu * s
        w = _solve_spd(cov, t, label)
        q = float(t @ w)
        if q <= 0.0:
            raise SingularCovarianceError(
                f"non-positive filter normalization in group '{label}' (zero target?)")
        out[:, cols][valid] = (x_valid - mu) @ w / q

    if workers > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_group, groups))
    else:
        for item in groups:
            run_group(item)

    return EnhancementMap(values=out, product_kind=product_kind, validity=cube.validity.copy())


def mag1c(
    cube: SpectralCube,
    sig: TargetSignature,
    cfg: MfConfig | None = None,
) -> EnhancementMap:
    """Iterative matched filter with albedo normalization and background re-estimation.

    Each iteration: (1) alpha from the current group statistics, with the
    numerator divided by the per-pixel albedo factor r = (x·mu)/(mu·mu) when
    enabled; (2) clamp alpha at 0; (3) re-estimate mean and covariance from
    x' = x - max(alpha, 0) * t. Returns the clamped alpha of the final
    iteration. The albedo factor is computed once, from the initial mean.

    With one iteration and albedo off this reduces to ``matched_filter``
    with negatives clamped to zero.
    """
    cfg = cfg or MfConfig()
    s = _aligned_signature(cube, sig)
    out = np.full((cube.rows, cube.cols), np.nan)

    for label, cols in _group_columns(cube.cols, cfg.grouping):
        block = cube.values[:, cols, :]
        valid = cube.validity[:, cols]
        x = block[valid]
        if x.shape[0] < 2:
            raise SingularCovarianceError(
                f"group '{label}' has {x.shape[0]} valid pixels, need at least 2")
        x_work = x
        r = None
        alpha = np.zeros(x.shape[0])
        for _ in range(cfg.mag1c_iterations):
            mu = x_work.mean(axis=0)
            centered = x_work - mu
            cov = _shrink(centered.T @ centered / x_work.shape[0], cfg.shrinkage)
            t = mu * s
            w = _solve_spd(cov, t, label)
            q = float(t @ w)
            if q <= 0.0:
                raise SingularCovarianceError(
                    f"non-positive filter normalization in group '{label}' (zero target?)")
            if r is None:
                if cfg.mag1c_albedo_correction:
                    r = (x @ mu) / float(mu @ mu)
                else:
                    r = np.ones(x.shape[0])
            alpha = (x - mu) @ w / (r * q)
            if np.any(np.abs(alpha) > cfg.divergence_limit_ppmm):
                raise DivergenceError(
                    f"retrieval exceeded {cfg.divergence_limit_ppmm:g} ppm·m in group '{label}'")
            alpha = np.maximum(alpha, 0.0)
            x_work = x - alpha[:, None] * t
        out[:, cols][valid] = alpha

    return EnhancementMap(values=out, product_kind=ProductKind.MAG1C,
                          validity=cube.validity.copy())


def wmf(
    cube: SpectralCube,
    sig: TargetSignature,
    cfg: MfConfig | None = None,
    workers: int = 1,
) -> EnhancementMap:
    """Wide-window matched filter: MF on the band-selected cube.

    Uses ``cfg.windows`` when set, else :data:`DEFAULT_WMF_WINDOWS`. By
    definition equal to ``matched_filter(select_bands(cube, windows), ...)``.
    """
    cfg = cfg or MfConfig()
    windows = cfg.windows or DEFAULT_WMF_WINDOWS
    sub = select_bands(cube, windows)
    sub_cfg = replace(cfg, windows=None)
    return matched_filter(sub, sig, sub_cfg, product_kind=ProductKind.WMF, workers=workers)
