"""Dataset manifests, tile extraction, and train/val/test split rules.

The temporal rule for EMIT carves 2024 into month-long ranges running 15th
to 15th: ranges starting in odd months go to validation, even months to
test, the final range (2024-12-15 to 2025-01-15) stays in test, and
everything outside stays in train. The spatial rule assigns points to
polygon regions with train closed on boundaries and test open. Tiles cut
around events record their geographic extents so overlapping tiles can be
pinned to the same split.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from shapely.geometry import Point, shape

from .cube import SensorId
from .raster import GeoTransform

MANIFEST_SCHEMA_ID = "plumekit.granule_manifest.v1"

SPLITS = ("train", "val", "test", "none")


def parse_utc(value: str | datetime) -> datetime:
    """Parse an ISO-8601 timestamp as UTC; naive values are taken as UTC."""
    if isinstance(value, datetime):
        ts = value
    else:
        try:
            ts = datetime.fromisoformat(value.replace("Z", "+00:00"))
        except ValueError as exc:
            raise ValueError(f"unparseable timestamp: {value!r}") from exc
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


@dataclass
class GranuleRecord:
    """One acquisition in the dataset manifest (NDJSON line)."""

    granule_id: str
    sensor_id: SensorId
    acquired_utc: datetime
    center_lat: float
    center_lon: float
    has_plume: bool = False
    event_ids: list[str] = field(default_factory=list)
    paths: dict[str, str] = field(default_factory=dict)
    split: str = "none"

    def __post_init__(self):
        self.sensor_id = SensorId(self.sensor_id)
        self.acquired_utc = parse_utc(self.acquired_utc)
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}")

    def to_json(self) -> dict:
        return {
            "schema": MANIFEST_SCHEMA_ID,
            "granule_id": self.granule_id,
            "sensor_id": self.sensor_id.value,
            "acquired_utc": self.acquired_utc.isoformat(),
            "center_lat": self.center_lat,
            "center_lon": self.center_lon,
            "has_plume": self.has_plume,
            "event_ids": list(self.event_ids),
            "paths": dict(self.paths),
            "split": self.split,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "GranuleRecord":
        if doc.get("schema") != MANIFEST_SCHEMA_ID:
            raise ValueError(f"unsupported manifest record schema: {doc.get('schema')!r}")
        return cls(
            granule_id=doc["granule_id"],
            sensor_id=SensorId(doc["sensor_id"]),
            acquired_utc=doc["acquired_utc"],
            center_lat=float(doc["center_lat"]),
            center_lon=float(doc["center_lon"]),
            has_plume=bool(doc.get("has_plume", False)),
            event_ids=list(doc.get("event_ids", [])),
            paths=dict(doc.get("paths", {})),
            split=doc.get("split", "none"),
        )


def read_manifest(path: str | Path) -> list[GranuleRecord]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(GranuleRecord.from_json(json.loads(line)))
    return records


def write_manifest(path: str | Path, records: Iterable[GranuleRecord]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json()) + "\n")


# ---------------------------------------------------------------------------
# Temporal split (EMIT)
# ---------------------------------------------------------------------------

_YEAR_START = datetime(2024, 1, 1, tzinfo=timezone.utc)
_FIRST_RANGE = datetime(2024, 1, 15, tzinfo=timezone.utc)
_LAST_RANGE = datetime(2024, 12, 15, tzinfo=timezone.utc)
_LAST_RANGE_END = datetime(2025, 1, 15, tzinfo=timezone.utc)


def classify_date_emit(timestamp: str | datetime) -> str:
    """Split for an EMIT acquisition time.

    Ranges [15th of M, 15th of M+1) inside 2024: odd M -> val, even M ->
    test. The closing range [2024-12-15, 2025-01-15) -> test, as is the
    leading stub [2024-01-01, 2024-01-15), which keeps all of calendar 2024
    out of train. Everything else -> train.
    """
    ts = parse_utc(timestamp)
    if ts < _YEAR_START or ts >= _LAST_RANGE_END:
        return "train"
    if ts < _FIRST_RANGE or ts >= _LAST_RANGE:
        return "test"
    month_start = datetime(ts.year, ts.month, 15, tzinfo=timezone.utc)
    start_month = ts.month if ts >= month_start else ts.month - 1
    return "val" if start_month % 2 == 1 else "test"


# ---------------------------------------------------------------------------
# Spatial split
# ---------------------------------------------------------------------------

@dataclass
class SpatialSplitRule:
    """Region polygons for a spatial split; train is closed on boundaries,
    test open (realized by checking train regions first)."""

    train_regions: list
    test_regions: list

    def __post_init__(self):
        regions = [(g, "train") for g in self.train_regions]
        regions += [(g, "test") for g in self.test_regions]
        for i, (a, _) in enumerate(regions):
            for b, _ in regions[i + 1:]:
                if a.intersection(b).area > 0:
                    raise ValueError("split regions overlap")

    @classmethod
    def from_geojson(cls, payload: dict) -> "SpatialSplitRule":
        train, test = [], []
        for feature in payload["features"]:
            split = feature["properties"]["split"]
            geom = shape(feature["geometry"])
            if split == "train":
                train.append(geom)
            elif split == "test":
                test.append(geom)
            else:
                raise ValueError(f"region split must be train or test, got {split!r}")
        return cls(train_regions=train, test_regions=test)


def classify_spatial(lat: float, lon: float, rule: SpatialSplitRule) -> str:
    point = Point(lon, lat)
    if any(region.covers(point) for region in rule.train_regions):
        return "train"
    if any(region.covers(point) for region in rule.test_regions):
        return "test"
    raise ValueError(f"unassigned: point ({lat}, {lon}) in no split region")


@dataclass(frozen=True)
class SplitRule:
    kind: str  # "temporal_emit" or "spatial"
    spatial: SpatialSplitRule | None = None

    def __post_init__(self):
        if self.kind not in ("temporal_emit", "spatial"):
            raise ValueError("kind must be temporal_emit or spatial")
        if self.kind == "spatial" and self.spatial is None:
            raise ValueError("spatial rule requires regions")

    def classify(self, record: GranuleRecord) -> str:
        if self.kind == "temporal_emit":
            return classify_date_emit(record.acquired_utc)
        return classify_spatial(record.center_lat, record.center_lon, self.spatial)


def annotate_splits(records: Sequence[GranuleRecord],
                    rule: SplitRule) -> list[GranuleRecord]:
    return [replace(rec, split=rule.classify(rec)) for rec in records]


# ---------------------------------------------------------------------------
# Tile extraction
# ---------------------------------------------------------------------------

TILE_SIZE = 256


@dataclass
class Tile:
    """Fixed-size window cut from a source raster, NaN/invalid outside it."""

    values: np.ndarray
    validity: np.ndarray
    transform: GeoTransform
    origin_row: int  # source row of tile row 0 (may be negative near edges)
    origin_col: int


def extract_tile(values: np.ndarray, transform: GeoTransform,
                 center_row: int, center_col: int,
                 size: int = TILE_SIZE,
                 validity: np.ndarray | None = None) -> Tile:
    """Cut a size x size window centered on (center_row, center_col).

    The window is not repositioned near edges; out-of-image parts are
    NaN-filled and masked invalid so every tile is shape-exact.
    """
    values = np.asarray(values, dtype=float)
    rows, cols = values.shape[:2]
    if not (0 <= center_row < rows and 0 <= center_col < cols):
        raise ValueError("tile center outside the raster")
    if validity is None:
        validity = np.isfinite(values) if values.ndim == 2 \
            else np.isfinite(values).all(axis=2)
    r0 = center_row - size // 2
    c0 = center_col - size // 2

    out_shape = (size, size) + values.shape[2:]
    out = np.full(out_shape, np.nan)
    out_valid = np.zeros((size, size), dtype=bool)
    src_r = slice(max(r0, 0), min(r0 + size, rows))
    src_c = slice(max(c0, 0), min(c0 + size, cols))
    dst_r = slice(src_r.start - r0, src_r.stop - r0)
    dst_c = slice(src_c.start - c0, src_c.stop - c0)
    out[dst_r, dst_c] = values[src_r, src_c]
    out_valid[dst_r, dst_c] = validity[src_r, src_c]
    return Tile(values=out, validity=out_valid,
                transform=transform.shifted(drow=r0, dcol=c0),
                origin_row=r0, origin_col=c0)


# ---------------------------------------------------------------------------
# Overlap bookkeeping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TileExtent:
    """Axis-aligned geographic extent of a tile, plus its split label."""

    tile_id: str
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    split: str = "none"

    def overlaps(self, other: "TileExtent") -> bool:
        # positive-area intersection; edge-touching tiles share no pixels
        return (min(self.x_max, other.x_max) > max(self.x_min, other.x_min)
                and min(self.y_max, other.y_max) > max(self.y_min, other.y_min))


@dataclass
class OverlapLedger:
    groups: list[list[str]]  # tile ids, grouped by transitive overlap
    violations: list[tuple[int, tuple[str, ...]]]  # (group index, splits seen)


def overlap_ledger(tiles: Sequence[TileExtent]) -> OverlapLedger:
    """Group tiles by transitive extent overlap and flag any group whose
    members sit in different splits (ignoring unassigned tiles)."""
    n = len(tiles)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if tiles[i].overlaps(tiles[j]):
                parent[find(i)] = find(j)

    members: dict[int, list[int]] = {}
    for i in range(n):
        members.setdefault(find(i), []).append(i)
    groups = sorted(
        (sorted(tiles[i].tile_id for i in idxs) for idxs in members.values()))
    violations = []
    by_id = {t.tile_id: t for t in tiles}
    for gi, group in enumerate(groups):
        splits = sorted({by_id[tid].split for tid in group} - {"none"})
        if len(splits) > 1:
            violations.append((gi, tuple(splits)))
    return OverlapLedger(groups=groups, violations=violations)
