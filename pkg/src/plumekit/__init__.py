"""Methane point-source detection pipeline for hyperspectral imagery.

Subsystems: spectral cube handling (:mod:`plumekit.cube`), matched-filter
enhancement products (:mod:`plumekit.mf`), detection baselines and ensembling
(:mod:`plumekit.detect`), plume delineation and scoring (:mod:`plumekit.plume`),
flux quantification (:mod:`plumekit.quantify`), evaluation
(:mod:`plumekit.evalkit`), dataset splits and tiling (:mod:`plumekit.datakit`),
and the analyst review service (:mod:`plumekit.review`).
"""

__version__ = "0.1.0"
