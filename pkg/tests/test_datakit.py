"""Manifests, split rules, tile extraction, overlap bookkeeping."""

import json
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plumekit.cube import SensorId
from plumekit.datakit import (
    GranuleRecord,
    OverlapLedger,
    SpatialSplitRule,
    SplitRule,
    Tile,
    TileExtent,
    annotate_splits,
    classify_date_emit,
    classify_spatial,
    extract_tile,
    overlap_ledger,
    parse_utc,
    read_manifest,
    write_manifest,
)
from plumekit.raster import GeoTransform, IDENTITY_TRANSFORM

UTC = timezone.utc


class TestParseUtc:
    def test_z_suffix_and_offset(self):
        assert parse_utc("2024-01-01T00:00:00Z") == datetime(2024, 1, 1, tzinfo=UTC)
        got = parse_utc("2024-01-01T02:00:00+02:00")
        assert got == datetime(2024, 1, 1, 0, 0, tzinfo=UTC)

    def test_naive_taken_as_utc(self):
        assert parse_utc("2024-05-05") == datetime(2024, 5, 5, tzinfo=UTC)

    def test_unparseable_raises(self):
        with pytest.raises(ValueError, match="unparseable"):
            parse_utc("not-a-date")


class TestTemporalSplit:
    @pytest.mark.parametrize("ts,want", [
        ("2024-01-20", "val"),    # range starting odd January
        ("2024-02-20", "test"),   # range starting even February
        ("2023-06-01", "train"),
        ("2025-01-10", "test"),   # inside the final pinned range
        ("2025-02-01", "train"),
        ("2024-12-20", "test"),   # final range start
        ("2024-11-20", "val"),    # November (odd) range
        ("2024-12-10", "val"),    # still the November range
        ("2024-01-05", "test"),   # leading stub of 2024 stays out of train
        ("2024-01-15", "val"),    # boundary: first range is closed at start
        ("2024-02-15", "test"),   # boundary: ranges are right-open
        ("2025-01-15", "train"),  # boundary: final range is right-open
    ])
    def test_dated_examples(self, ts, want):
        assert classify_date_emit(ts) == want

    def test_partition_is_exhaustive_and_single_valued(self):
        t = datetime(2023, 11, 1, tzinfo=UTC)
        end = datetime(2025, 4, 1, tzinfo=UTC)
        while t < end:
            got = classify_date_emit(t)
            assert got in ("train", "val", "test")
            t += timedelta(hours=7)

    def test_calendar_2024_never_trains(self):
        t = datetime(2024, 1, 1, tzinfo=UTC)
        while t < datetime(2025, 1, 15, tzinfo=UTC):
            assert classify_date_emit(t) != "train"
            t += timedelta(days=1)

    def test_val_test_ranges_alternate(self):
        # midpoint of each 15th-to-15th range in 2024
        want = ["val", "test"] * 5 + ["val"]  # Jan..Nov starts
        got = [classify_date_emit(datetime(2024, m, 28, tzinfo=UTC))
               for m in range(1, 12)]
        assert got == want

    @settings(max_examples=50, deadline=None)
    @given(st.datetimes(min_value=datetime(2020, 1, 1),
                        max_value=datetime(2030, 1, 1)))
    def test_total_over_datetimes(self, ts):
        assert classify_date_emit(ts.replace(tzinfo=UTC)) in ("train", "val", "test")


def ray_cast(point, ring):
    """Even-odd point-in-polygon for a closed ring of (x, y) vertices."""
    x, y = point
    inside = False
    for (x0, y0), (x1, y1) in zip(ring, ring[1:]):
        if (y0 > y) != (y1 > y):
            x_cross = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            if x < x_cross:
                inside = not inside
    return inside


TRAIN_RING = [(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0), (0.0, 0.0)]
TEST_RING = [(10.0, 0.0), (20.0, 0.0), (20.0, 10.0), (10.0, 10.0), (10.0, 0.0)]


def demo_rule():
    return SpatialSplitRule.from_geojson({
        "type": "FeatureCollection",
        "features": [
            {"type": "Feature", "properties": {"split": "train"},
             "geometry": {"type": "Polygon", "coordinates": [TRAIN_RING]}},
            {"type": "Feature", "properties": {"split": "test"},
             "geometry": {"type": "Polygon", "coordinates": [TEST_RING]}},
        ]})


class TestSpatialSplit:
    def test_interior_points(self):
        rule = demo_rule()
        assert classify_spatial(5.0, 5.0, rule) == "train"
        assert classify_spatial(5.0, 15.0, rule) == "test"

    def test_shared_boundary_goes_to_train(self):
        assert classify_spatial(5.0, 10.0, demo_rule()) == "train"

    def test_unassigned_point_raises(self):
        with pytest.raises(ValueError, match="unassigned"):
            classify_spatial(50.0, 50.0, demo_rule())

    def test_overlapping_regions_rejected_at_load(self):
        bad = {"type": "FeatureCollection", "features": [
            {"type": "Feature", "properties": {"split": "train"},
             "geometry": {"type": "Polygon", "coordinates": [TRAIN_RING]}},
            {"type": "Feature", "properties": {"split": "test"},
             "geometry": {"type": "Polygon",
                          "coordinates": [[(5, 5), (15, 5), (15, 15), (5, 15), (5, 5)]]}},
        ]}
        with pytest.raises(ValueError, match="overlap"):
            SpatialSplitRule.from_geojson(bad)

    def test_unknown_split_label_rejected(self):
        bad = {"type": "FeatureCollection", "features": [
            {"type": "Feature", "properties": {"split": "holdout"},
             "geometry": {"type": "Polygon", "coordinates": [TRAIN_RING]}}]}
        with pytest.raises(ValueError, match="train or test"):
            SpatialSplitRule.from_geojson(bad)

    def test_1000_random_points_match_ray_casting_oracle(self):
        rule = demo_rule()
        rng = np.random.default_rng(12)
        checked = 0
        for _ in range(1000):
            lon, lat = rng.uniform(-2, 22), rng.uniform(-2, 12)
            in_train = ray_cast((lon, lat), TRAIN_RING)
            in_test = ray_cast((lon, lat), TEST_RING)
            if in_train:
                assert classify_spatial(lat, lon, rule) == "train"
            elif in_test:
                assert classify_spatial(lat, lon, rule) == "test"
            else:
                with pytest.raises(ValueError):
                    classify_spatial(lat, lon, rule)
            checked += 1
        assert checked == 1000


class TestSplitRule:
    def test_temporal_dispatch(self):
        rec = GranuleRecord(granule_id="g", sensor_id=SensorId.EMIT,
                            acquired_utc="2024-01-20T00:00:00Z",
                            center_lat=0.0, center_lon=0.0)
        assert SplitRule(kind="temporal_emit").classify(rec) == "val"

    def test_spatial_dispatch(self):
        rec = GranuleRecord(granule_id="g", sensor_id=SensorId.EMIT,
                            acquired_utc="2024-01-20T00:00:00Z",
                            center_lat=5.0, center_lon=15.0)
        rule = SplitRule(kind="spatial", spatial=demo_rule())
        assert rule.classify(rec) == "test"

    def test_spatial_without_regions_rejected(self):
        with pytest.raises(ValueError):
            SplitRule(kind="spatial")

    def test_annotate_splits(self):
        recs = [GranuleRecord(granule_id=f"g{i}", sensor_id=SensorId.EMIT,
                              acquired_utc=ts, center_lat=0.0, center_lon=0.0)
                for i, ts in enumerate(["2024-01-20", "2024-02-20", "2023-01-01"])]
        got = annotate_splits(recs, SplitRule(kind="temporal_emit"))
        assert [r.split for r in got] == ["val", "test", "train"]
        assert all(r.split == "none" for r in recs)  # originals untouched


class TestManifest:
    def test_round_trip(self, tmp_path):
        recs = [GranuleRecord(granule_id="g1", sensor_id=SensorId.EMIT,
                              acquired_utc="2024-03-01T12:00:00Z",
                              center_lat=31.5, center_lon=5.25, has_plume=True,
                              event_ids=["e1", "e2"], paths={"cube": "/x/c.tif"},
                              split="test")]
        path = tmp_path / "m.ndjson"
        write_manifest(path, recs)
        back = read_manifest(path)
        assert back == recs

    def test_schema_field_checked(self, tmp_path):
        path = tmp_path / "bad.ndjson"
        path.write_text(json.dumps({"schema": "other.v9", "granule_id": "g"}) + "\n")
        with pytest.raises(ValueError, match="schema"):
            read_manifest(path)

    def test_invalid_split_rejected(self):
        with pytest.raises(ValueError, match="split"):
            GranuleRecord(granule_id="g", sensor_id=SensorId.EMIT,
                          acquired_utc="2024-01-01", center_lat=0.0,
                          center_lon=0.0, split="holdout")


class TestExtractTile:
    def test_interior_tile_copies_window(self):
        values = np.arange(400.0).reshape(20, 20)
        tile = extract_tile(values, IDENTITY_TRANSFORM, 10, 10, size=6)
        assert tile.values.shape == (6, 6)
        assert tile.validity.all()
        np.testing.assert_array_equal(tile.values, values[7:13, 7:13])

    def test_corner_tile_has_masked_padding(self):
        values = np.arange(100.0).reshape(10, 10)
        tile = extract_tile(values, IDENTITY_TRANSFORM, 0, 0, size=8)
        assert tile.values.shape == (8, 8)
        assert tile.validity[4:, 4:].all() and not tile.validity[:4, :].any()
        assert np.isnan(tile.values[0, 0]) and tile.values[4, 4] == values[0, 0]

    def test_transform_shifts_with_window(self):
        t = GeoTransform(100.0, 2.0, 0.0, 50.0, 0.0, -2.0)
        values = np.zeros((20, 20))
        tile = extract_tile(values, t, 10, 10, size=6)
        assert tile.transform.pixel_to_geo(0, 0) == t.pixel_to_geo(7, 7)

    def test_center_outside_rejected(self):
        with pytest.raises(ValueError, match="center"):
            extract_tile(np.zeros((4, 4)), IDENTITY_TRANSFORM, 9, 0)

    def test_cube_input_keeps_bands(self):
        values = np.random.default_rng(0).uniform(size=(10, 10, 3))
        tile = extract_tile(values, IDENTITY_TRANSFORM, 5, 5, size=4)
        assert tile.values.shape == (4, 4, 3)

    @settings(max_examples=40, deadline=None)
    @given(center_row=st.integers(0, 11), center_col=st.integers(0, 11),
           size=st.sampled_from([4, 5, 8]))
    def test_index_arithmetic_oracle(self, center_row, center_col, size):
        values = np.arange(144.0).reshape(12, 12)
        tile = extract_tile(values, IDENTITY_TRANSFORM, center_row, center_col,
                            size=size)
        r0, c0 = center_row - size // 2, center_col - size // 2
        for i in range(size):
            for j in range(size):
                sr, sc = r0 + i, c0 + j
                if 0 <= sr < 12 and 0 <= sc < 12:
                    assert tile.values[i, j] == values[sr, sc]
                    assert tile.validity[i, j]
                else:
                    assert np.isnan(tile.values[i, j])
                    assert not tile.validity[i, j]


def overlap_groups_oracle(tiles):
    """Brute force: pairwise AABB intersection, then BFS closure."""
    n = len(tiles)
    adj = {i: set() for i in range(n)}
    for i in range(n):
        for j in range(i + 1, n):
            a, b = tiles[i], tiles[j]
            if (min(a.x_max, b.x_max) > max(a.x_min, b.x_min)
                    and min(a.y_max, b.y_max) > max(a.y_min, b.y_min)):
                adj[i].add(j)
                adj[j].add(i)
    seen, groups = set(), []
    for i in range(n):
        if i in seen:
            continue
        stack, comp = [i], []
        while stack:
            k = stack.pop()
            if k in seen:
                continue
            seen.add(k)
            comp.append(k)
            stack.extend(adj[k] - seen)
        groups.append(sorted(tiles[k].tile_id for k in comp))
    return sorted(groups)


class TestOverlapLedger:
    def test_disjoint_tiles_two_groups(self):
        tiles = [TileExtent("a", 0, 0, 1, 1), TileExtent("b", 5, 5, 6, 6)]
        assert overlap_ledger(tiles).groups == [["a"], ["b"]]

    def test_chain_transitivity(self):
        tiles = [TileExtent("a", 0, 0, 2, 2), TileExtent("b", 1, 1, 3, 3),
                 TileExtent("c", 2.5, 2.5, 4, 4)]
        assert overlap_ledger(tiles).groups == [["a", "b", "c"]]

    def test_edge_touching_does_not_group(self):
        tiles = [TileExtent("a", 0, 0, 1, 1), TileExtent("b", 1, 0, 2, 1)]
        assert len(overlap_ledger(tiles).groups) == 2

    def test_split_violations_reported(self):
        tiles = [TileExtent("a", 0, 0, 2, 2, split="train"),
                 TileExtent("b", 1, 1, 3, 3, split="test"),
                 TileExtent("c", 9, 9, 10, 10, split="val")]
        ledger = overlap_ledger(tiles)
        assert ledger.violations == [(0, ("test", "train"))]

    def test_unassigned_tiles_ignored_in_violations(self):
        tiles = [TileExtent("a", 0, 0, 2, 2, split="train"),
                 TileExtent("b", 1, 1, 3, 3, split="none")]
        assert overlap_ledger(tiles).violations == []

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000), n=st.integers(0, 12))
    def test_random_layouts_match_bfs_oracle(self, seed, n):
        rng = np.random.default_rng(seed)
        tiles = []
        for i in range(n):
            x0, y0 = rng.uniform(0, 10, 2)
            w, h = rng.uniform(0.5, 3, 2)
            tiles.append(TileExtent(f"t{i}", x0, y0, x0 + w, y0 + h))
        assert overlap_ledger(tiles).groups == overlap_groups_oracle(tiles)
