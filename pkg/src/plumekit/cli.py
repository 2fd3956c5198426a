"""Command-line entry points for the detection pipeline.

The commands chain through files on disk: synthesize a granule, run a
matched-filter product over it, threshold into a detection mask, delineate
and score plume candidates, quantify their flux, and evaluate predictions
against ground truth. ``ingest`` and ``serve`` feed the review service;
ingest is CLI/library only, the HTTP API never writes granules.
"""

from __future__ import annotations

import csv
import glob as globlib
import json
from pathlib import Path

import click
import numpy as np

from . import cube as cubemod
from . import datakit, detect, evalkit, mf, plume, quantify
from .raster import IDENTITY_TRANSFORM, read_geotiff


@click.group()
def main() -> None:
    """Methane point-source detection pipeline."""


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True),
              help="Synthetic scene recipe (JSON).")
@click.option("--out-dir", required=True, type=click.Path())
def synth(spec_path: str, out_dir: str) -> None:
    """Generate a synthetic granule: cube, ground-truth mask, signature."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = json.loads(Path(spec_path).read_text())
    spec = cubemod.SyntheticSpec.from_json(payload)
    scene, gt_mask, conc = cubemod.synthesize_scene(spec)
    cubemod.save_cube(out / "cube.tif", scene)
    detect.save_mask(gt_mask, out / "gt_mask.tif")
    np.save(out / "concentration.npy", conc)
    if spec.signature is not None:
        (out / "signature.json").write_text(json.dumps(spec.signature.to_json()))
    click.echo(f"granule written to {out} "
               f"({spec.rows}x{spec.cols}x{len(spec.wavelengths_nm)} bands, "
               f"{int(gt_mask.sum())} plume px)")


@main.command("mf")
@click.option("--product", type=click.Choice(["mf", "mag1c", "wmf"]), default="mf")
@click.option("--cube", "cube_path", required=True, type=click.Path(exists=True))
@click.option("--signature", "sig_path", required=True, type=click.Path(exists=True))
@click.option("--per-column", is_flag=True, default=False,
              help="Estimate statistics per detector column instead of per scene.")
@click.option("--iterations", type=int, default=5, show_default=True,
              help="Iterations for the iterative product.")
@click.option("--out", "out_path", required=True, type=click.Path())
def mf_command(product: str, cube_path: str, sig_path: str, per_column: bool,
               iterations: int, out_path: str) -> None:
    """Run a matched-filter enhancement product over a cube."""
    scene, transform = cubemod.load_cube(cube_path)
    sig = cubemod.TargetSignature.from_json(json.loads(Path(sig_path).read_text()))
    cfg = mf.MfConfig(grouping="per_column" if per_column else "whole_scene",
                      mag1c_iterations=iterations)
    if product == "mf":
        em = mf.matched_filter(scene, sig, cfg)
    elif product == "mag1c":
        em = mf.mag1c(scene, sig, cfg)
    else:
        em = mf.wmf(scene, sig, cfg)
    em.save(out_path, transform)
    valid = em.values[em.validity]
    peak = f"max {valid.max():.1f} ppm·m" if valid.size else "no valid pixels"
    click.echo(f"{product} enhancement written to {out_path} ({peak})")


@main.group("detect")
def detect_group() -> None:
    """Detection products from enhancement maps."""


@detect_group.command("baseline")
@click.option("--product", "product_path", required=True, type=click.Path(exists=True))
@click.option("--threshold", type=float, default=detect.DEFAULT_BASELINE_THRESHOLD_PPMM,
              show_default=True, help="Detection threshold in ppm·m.")
@click.option("--kernel", type=click.Choice(["ones", "cross"]), default="cross",
              show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def detect_baseline(product_path: str, threshold: float, kernel: str,
                    out_path: str) -> None:
    """Threshold an enhancement map and clean it morphologically."""
    em, transform = mf.EnhancementMap.load(product_path)
    mask = detect.baseline_detect(em, threshold_ppmm=threshold,
                                  kernel=detect.MorphKernel(kernel))
    detect.save_mask(mask, out_path, transform)
    click.echo(f"mask written to {out_path} ({int(mask.sum())} px detected)")


@detect_group.command("ensemble")
@click.option("--maps", "maps_glob", required=True,
              help="Glob of probability map GeoTIFFs.")
@click.option("--out", "out_path", required=True, type=click.Path())
def detect_ensemble(maps_glob: str, out_path: str) -> None:
    """Average probability maps into an ensemble map."""
    paths = sorted(globlib.glob(maps_glob))
    if not paths:
        raise click.ClickException(f"no files match {maps_glob!r}")
    loaded = [detect.ProbabilityMap.load(p) for p in paths]
    ens = detect.ensemble([pm for pm, _ in loaded])
    ens.save(out_path, loaded[0][1])
    click.echo(f"ensemble of {len(paths)} maps written to {out_path}")


def _probability_from_raster(path: str) -> tuple[detect.ProbabilityMap, object]:
    values, transform, desc = read_geotiff(path)
    kind = desc.get("kind")
    if kind == "mask":
        pm = detect.ProbabilityMap(values=values.astype(float), provider_tag="mask")
    else:
        pm, transform = detect.ProbabilityMap.load(path)
    return pm, transform


@main.command()
@click.option("--prob", "prob_path", required=True, type=click.Path(exists=True),
              help="Probability map or binary mask GeoTIFF.")
@click.option("--initial-threshold", type=float, default=0.1, show_default=True)
@click.option("--min-pixels", type=int, default=25, show_default=True)
@click.option("--connectivity", type=click.Choice(["4", "8"]), default="8",
              show_default=True)
@click.option("--granule-id", default=None, help="Defaults to the raster stem.")
@click.option("--out", "out_path", required=True, type=click.Path())
def plumes(prob_path: str, initial_threshold: float, min_pixels: int,
           connectivity: str, granule_id: str | None, out_path: str) -> None:
    """Delineate and score plume candidates from a probability map."""
    pm, transform = _probability_from_raster(prob_path)
    cfg = plume.ScoringConfig(initial_threshold=initial_threshold,
                              min_pixels=min_pixels,
                              connectivity=int(connectivity))
    gid = granule_id or Path(prob_path).stem
    candidates = plume.delineate(pm, cfg, granule_id=gid, transform=transform)
    ranked = plume.sort_alerts(candidates)
    Path(out_path).write_text(json.dumps(plume.candidates_to_geojson(ranked)))
    click.echo(f"{len(ranked)} candidates written to {out_path}")


@main.command("quantify")
@click.option("--plumes", "plumes_path", required=True, type=click.Path(exists=True))
@click.option("--enhancement", "enh_path", required=True, type=click.Path(exists=True))
@click.option("--wind", "wind_path", required=True, type=click.Path(exists=True),
              help='JSON {"u10": .., "v10": .., "source_tag": ..}.')
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="IME coefficients (TOML); shipped defaults otherwise.")
@click.option("--gsd", type=float, default=60.0, show_default=True,
              help="Ground sample distance in meters.")
@click.option("--out", "out_path", required=True, type=click.Path())
def quantify_command(plumes_path: str, enh_path: str, wind_path: str,
                     config_path: str | None, gsd: float, out_path: str) -> None:
    """Estimate per-candidate emission rates via IME."""
    candidates = plume.candidates_from_geojson(json.loads(Path(plumes_path).read_text()))
    em, _ = mf.EnhancementMap.load(enh_path)
    wind_doc = json.loads(Path(wind_path).read_text())
    wind = quantify.WindSample(u10=float(wind_doc["u10"]), v10=float(wind_doc["v10"]),
                               source_tag=wind_doc.get("source_tag", "file"))
    cfg = quantify.ImeConfig.from_toml(config_path)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["candidate_id", "granule_id", "score", "area_px",
                         "ime_kg", "clamped_px", "u_eff_m_s", "q_kg_per_hr",
                         "quantifiable"])
        for cand in candidates:
            mask = np.zeros(em.values.shape, dtype=bool)
            mask[cand.pixels[:, 0], cand.pixels[:, 1]] = True
            res = quantify.ime(em.values, mask, gsd, cfg)
            length = quantify.plume_length_m(cand.area_px, gsd)
            fx = quantify.flux(res.ime_kg, length, wind, cfg)
            writer.writerow([cand.id, cand.granule_id, f"{cand.score:.6g}",
                             cand.area_px, f"{res.ime_kg:.6g}", res.clamped_px,
                             f"{fx.u_eff:.6g}", f"{fx.q_kg_per_hr:.6g}",
                             int(fx.quantifiable)])
    click.echo(f"flux table for {len(candidates)} candidates written to {out_path}")


@main.command("eval")
@click.option("--pred", "pred_glob", required=True, help="Glob of predicted masks.")
@click.option("--gt", "gt_glob", required=True, help="Glob of ground-truth masks.")
@click.option("--report", "report_path", required=True, type=click.Path())
def eval_command(pred_glob: str, gt_glob: str, report_path: str) -> None:
    """Evaluate predicted masks against ground truth, pixel and event level."""
    pred_paths = sorted(globlib.glob(pred_glob))
    gt_paths = sorted(globlib.glob(gt_glob))
    if not pred_paths:
        raise click.ClickException(f"no files match {pred_glob!r}")
    if len(pred_paths) != len(gt_paths):
        raise click.ClickException(
            f"{len(pred_paths)} predictions vs {len(gt_paths)} ground-truth masks")
    granules = []
    for pred_path, gt_path in zip(pred_paths, gt_paths):
        pred_mask, _ = detect.load_mask(pred_path)
        gt_mask, _ = detect.load_mask(gt_path)
        counts = evalkit.pixel_metrics(pred_mask, gt_mask)
        pm = detect.ProbabilityMap(values=pred_mask.astype(float), provider_tag="mask")
        cfg = plume.ScoringConfig(initial_threshold=0.5, min_pixels=1)
        candidates = plume.delineate(pm, cfg, granule_id=Path(pred_path).stem)
        gt_events = _split_events(gt_mask)
        match = evalkit.event_match(candidates, gt_events)
        auprc_value = None
        if gt_mask.any():
            auprc_value = evalkit.auprc(pred_mask.astype(float), gt_mask)
        granules.append(evalkit.GranuleReport(
            granule_id=Path(pred_path).stem, pixels=counts,
            events=match.counts, auprc=auprc_value))
    report = evalkit.aggregate(granules, config={
        "pred": pred_glob, "gt": gt_glob, "criterion": "any_overlap"})
    Path(report_path).write_text(json.dumps(report.to_json(), indent=2))
    ev = report.events
    click.echo(f"report written to {report_path} (detected {ev.detected}, "
               f"missed {ev.missed}, false alarms {ev.false_alarms})")


def _split_events(gt_mask: np.ndarray) -> list[np.ndarray]:
    from scipy import ndimage
    labels, count = ndimage.label(gt_mask,
                                  structure=ndimage.generate_binary_structure(2, 2))
    return [labels == k for k in range(1, count + 1)]


@main.command()
@click.option("--sensor", type=click.Choice(["emit"]), default="emit", show_default=True)
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
def split(sensor: str, manifest_path: str) -> None:
    """Annotate manifest records with their temporal split, in place."""
    records = datakit.read_manifest(manifest_path)
    rule = datakit.SplitRule(kind="temporal_emit")
    records = datakit.annotate_splits(records, rule)
    datakit.write_manifest(manifest_path, records)
    tally = {s: sum(1 for r in records if r.split == s) for s in ("train", "val", "test")}
    click.echo(f"{len(records)} records annotated: {tally}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--size", type=int, default=datakit.TILE_SIZE, show_default=True)
def tile(manifest_path: str, out_dir: str, size: int) -> None:
    """Cut fixed-size tiles around each granule's center point."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = 0
    for rec in datakit.read_manifest(manifest_path):
        cube_path = rec.paths.get("cube")
        if not cube_path:
            continue
        scene, transform = cubemod.load_cube(cube_path)
        if transform is not None:
            row, col = transform.geo_to_pixel(rec.center_lon, rec.center_lat)
            row, col = int(round(row)), int(round(col))
        else:
            row, col = scene.rows // 2, scene.cols // 2
        row = min(max(row, 0), scene.rows - 1)
        col = min(max(col, 0), scene.cols - 1)
        t = datakit.extract_tile(scene.values, transform or IDENTITY_TRANSFORM,
                                 row, col, size=size)
        tile_cube = cubemod.SpectralCube(
            values=t.values, wavelengths_nm=scene.wavelengths_nm,
            sensor_id=scene.sensor_id, gsd_m=scene.gsd_m)
        cubemod.save_cube(out / f"{rec.granule_id}_tile.tif", tile_cube, t.transform)
        written += 1
    click.echo(f"{written} tiles written to {out}")


@main.command()
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("--granule", "granule_path", required=True, type=click.Path(exists=True),
              help="Granule record (JSON).")
@click.option("--candidates", "cand_path", required=True, type=click.Path(exists=True),
              help="Scored candidates (GeoJSON).")
def ingest(store_dir: str, granule_path: str, cand_path: str) -> None:
    """Ingest a granule and its candidates into a review store."""
    from .review import ReviewStore

    store = ReviewStore(store_dir)
    record = datakit.GranuleRecord.from_json(json.loads(Path(granule_path).read_text()))
    candidates = plume.candidates_from_geojson(json.loads(Path(cand_path).read_text()))
    ids = store.ingest_granule(record, candidates)
    click.echo(f"ingested {record.granule_id} with {len(ids)} candidates")


@main.command()
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--token", default=None, help="Bearer token; open access if unset.")
@click.option("--ui", "ui_dir", type=click.Path(), default=None,
              help="Static UI bundle to serve at /ui.")
def serve(store_dir: str, port: int, host: str, token: str | None,
          ui_dir: str | None) -> None:
    """Serve the review API over HTTP."""
    import uvicorn

    from .review import ReviewStore, create_app

    app = create_app(ReviewStore(store_dir), token=token, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port)
