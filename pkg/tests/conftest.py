"""Shared fixtures: small spectral grids and synthetic scene helpers."""

import numpy as np
import pytest


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance PASS/FAIL lines even when capture is on."""
    import sys

    results = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results:
            terminalreporter.write_line(line)

from plumekit.cube import (
    SyntheticSpec,
    TargetSignature,
    methane_absorption_signature,
    synthesize_scene,
)

#: 8-band grid covering the absorption wells; enough for fast MF tests.
WL8 = np.array([980.0, 1100.0, 1150.0, 1700.0, 2150.0, 2250.0, 2310.0, 2400.0])


@pytest.fixture(scope="session")
def sig8() -> TargetSignature:
    return methane_absorption_signature(WL8)


@pytest.fixture(scope="session")
def mean8() -> np.ndarray:
    return np.linspace(1.0, 2.0, len(WL8))


def make_scene(sig, mean, *, rows=32, cols=32, conc=1000.0, radius=4.0,
               noise_rel=0.01, injection="multiplicative", seed=0,
               center=None):
    """Disk-plume scene with diagonal background covariance."""
    spec = SyntheticSpec(
        rows=rows, cols=cols, wavelengths_nm=WL8, background_mean=mean,
        background_cov=None if noise_rel == 0 else (noise_rel * mean) ** 2,
        concentration_ppmm=conc,
        plume_center=center or (rows // 2, cols // 2),
        plume_radius_px=radius, signature=sig, injection=injection, seed=seed)
    return synthesize_scene(spec)
