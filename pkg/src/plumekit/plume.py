"""Plume candidate delineation, scoring, ranking, and vectorization.

A probability map is cut at an initial threshold; every connected component
becomes a candidate. Its score is the highest probability threshold at which
the component still contains a connected core of at least ``min_pixels``
pixels, found by an exact sweep over the component's probability values.
Candidates across granules are merged into one alert queue sorted by score,
and outlines are traced as pixel-exact polygons for the review tools.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy import ndimage

from .detect import ProbabilityMap
from .raster import GeoTransform, IDENTITY_TRANSFORM


@dataclass(frozen=True)
class ScoringConfig:
    """Delineation and scoring parameters.

    Model maps use (0.1, 25); thresholding baselines use (0.05, 20).
    """

    initial_threshold: float = 0.1
    min_pixels: int = 25
    connectivity: int = 8

    def __post_init__(self):
        if not 0.0 < self.initial_threshold < 1.0:
            raise ValueError("initial_threshold must be in (0, 1)")
        if self.min_pixels < 1:
            raise ValueError("min_pixels must be >= 1")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")

    def structure(self) -> np.ndarray:
        return ndimage.generate_binary_structure(2, 2 if self.connectivity == 8 else 1)


MODEL_SCORING = ScoringConfig(initial_threshold=0.1, min_pixels=25)
BASELINE_SCORING = ScoringConfig(initial_threshold=0.05, min_pixels=20)

REVIEW_STATES = ("proposed", "validated", "rejected")


@dataclass
class PlumeCandidate:
    """A delineated connected component proposed for analyst review."""

    id: str
    granule_id: str
    pixels: np.ndarray  # (K, 2) array of (row, col), scan order
    score: float
    area_px: int
    polygon: list[list[tuple[float, float]]] = field(default_factory=list)  # geo rings
    flux_kg_per_hr: float | None = None
    review_state: str = "proposed"
    replacement_polygon: list[list[tuple[float, float]]] | None = None

    def to_feature(self) -> dict:
        rings = [[list(v) for v in ring] for ring in self.polygon]
        geometry = {"type": "Polygon", "coordinates": rings} if rings else None
        props = {
            "id": self.id,
            "granule_id": self.granule_id,
            "score": self.score,
            "area_px": self.area_px,
            "review_state": self.review_state,
            "pixels": self.pixels.tolist(),
        }
        if self.flux_kg_per_hr is not None:
            props["flux_kg_per_hr"] = self.flux_kg_per_hr
        if self.replacement_polygon is not None:
            props["replacement_polygon"] = [[list(v) for v in r] for r in self.replacement_polygon]
        return {"type": "Feature", "geometry": geometry, "properties": props}

    @classmethod
    def from_feature(cls, feature: dict) -> "PlumeCandidate":
        props = feature["properties"]
        geometry = feature.get("geometry") or {}
        rings = [[tuple(v) for v in ring] for ring in geometry.get("coordinates", [])]
        repl = props.get("replacement_polygon")
        return cls(
            id=props["id"],
            granule_id=props["granule_id"],
            pixels=np.asarray(props.get("pixels", []), dtype=int).reshape(-1, 2),
            score=float(props["score"]),
            area_px=int(props["area_px"]),
            polygon=rings,
            flux_kg_per_hr=props.get("flux_kg_per_hr"),
            review_state=props.get("review_state", "proposed"),
            replacement_polygon=[[tuple(v) for v in r] for r in repl] if repl else None,
        )


def candidates_to_geojson(candidates: Iterable[PlumeCandidate]) -> dict:
    return {
        "type": "FeatureCollection",
        "schema": "plumekit.candidates.v1",
        "features": [c.to_feature() for c in candidates],
    }


def candidates_from_geojson(payload: dict) -> list[PlumeCandidate]:
    return [PlumeCandidate.from_feature(f) for f in payload["features"]]


# ---------------------------------------------------------------------------
# Delineation and scoring
# ---------------------------------------------------------------------------

class _UnionFind:
    def __init__(self, n: int):
        self.parent = np.arange(n)
        self.size = np.ones(n, dtype=int)
        self.max_size = 1 if n else 0

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:  # path compression
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        if self.size[ra] > self.max_size:
            self.max_size = self.size[ra]


_OFFSETS_4 = ((-1, 0), (1, 0), (0, -1), (0, 1))
_OFFSETS_8 = _OFFSETS_4 + ((-1, -1), (-1, 1), (1, -1), (1, 1))


def score_plume(pm: ProbabilityMap, pixels: np.ndarray, cfg: ScoringConfig) -> float:
    """Highest threshold at which the component keeps a connected core of
    ``min_pixels`` pixels.

    Pixels are activated in order of decreasing probability and merged with
    already-active neighbors (union-find); the first threshold whose
    activation leaves a component of size >= min_pixels is the score. This
    sweep is exact over the component's probability values. Components that
    never reach min_pixels score 0 and rank last.
    """
    pixels = np.asarray(pixels, dtype=int)
    if pixels.size == 0:
        return 0.0
    p = pm.values[pixels[:, 0], pixels[:, 1]]
    order = np.argsort(p, kind="stable")[::-1]
    offsets = _OFFSETS_8 if cfg.connectivity == 8 else _OFFSETS_4
    uf = _UnionFind(len(pixels))
    index_of = {(int(r), int(c)): i for i, (r, c) in enumerate(pixels)}
    active = np.zeros(len(pixels), dtype=bool)

    pos = 0
    while pos < len(order):
        tau = p[order[pos]]
        # activate the whole tie group for this threshold
        while pos < len(order) and p[order[pos]] == tau:
            i = order[pos]
            active[i] = True
            r, c = int(pixels[i, 0]), int(pixels[i, 1])
            for dr, dc in offsets:
                j = index_of.get((r + dr, c + dc))
                if j is not None and active[j]:
                    uf.union(i, j)
            pos += 1
        if uf.max_size >= cfg.min_pixels:
            return float(tau)
    return 0.0


def delineate(pm: ProbabilityMap, cfg: ScoringConfig = MODEL_SCORING,
              granule_id: str = "granule",
              transform: GeoTransform | None = None) -> list[PlumeCandidate]:
    """Connected components of {p >= initial_threshold}, each scored.

    Components are disjoint and cover exactly the suprathreshold set.
    Candidate ids are granule-scoped and deterministic (label scan order).
    """
    transform = transform or IDENTITY_TRANSFORM
    mask = (pm.values >= cfg.initial_threshold) & pm.validity
    labels, count = ndimage.label(mask, structure=cfg.structure())
    candidates = []
    for k in range(1, count + 1):
        pixels = np.argwhere(labels == k)
        score = score_plume(pm, pixels, cfg)
        rings_px = vectorize(pixels)
        candidates.append(PlumeCandidate(
            id=f"{granule_id}-{k:04d}",
            granule_id=granule_id,
            pixels=pixels,
            score=score,
            area_px=int(len(pixels)),
            polygon=rings_to_geo(rings_px, transform),
        ))
    return candidates


def sort_alerts(candidates: Iterable[PlumeCandidate]) -> list[PlumeCandidate]:
    """Alert queue order: score desc, then area desc, then granule id, then id.

    Total and stable, so pagination across the queue is reproducible.
    """
    return sorted(candidates, key=lambda c: (-c.score, -c.area_px, c.granule_id, c.id))


@dataclass(frozen=True)
class SortingCurve:
    """Step curves of review effort vs. catch, with the oracle references.

    Index k holds the totals after reviewing the first k alerts; the oracle
    assumes every review catches an event (events: the 1:1 line capped at
    the total; flux: highest-flux events first).
    """

    reviewed: np.ndarray
    events: np.ndarray
    flux: np.ndarray
    oracle_events: np.ndarray
    oracle_flux: np.ndarray


def sorting_curve(ranked: list[PlumeCandidate], truth: Mapping[str, bool],
                  flux_by_id: Mapping[str, float] | None = None) -> SortingCurve:
    flux_by_id = flux_by_id or {}
    hits = np.array([bool(truth.get(c.id, False)) for c in ranked], dtype=float)
    flux = np.array([float(flux_by_id.get(c.id, 0.0)) if truth.get(c.id, False) else 0.0
                     for c in ranked])
    n = len(ranked)
    reviewed = np.arange(n + 1)
    events = np.concatenate([[0.0], np.cumsum(hits)])
    flux_cum = np.concatenate([[0.0], np.cumsum(flux)])
    total_true = int(hits.sum())
    oracle_events = np.minimum(reviewed, total_true).astype(float)
    best_flux = np.sort(flux[hits > 0])[::-1]
    oracle_flux = np.concatenate([[0.0], np.cumsum(best_flux)])
    if len(oracle_flux) < n + 1:
        oracle_flux = np.concatenate([
            oracle_flux, np.full(n + 1 - len(oracle_flux), oracle_flux[-1])])
    return SortingCurve(reviewed=reviewed, events=events, flux=flux_cum,
                        oracle_events=oracle_events, oracle_flux=oracle_flux)


# ---------------------------------------------------------------------------
# Vectorization: pixel sets <-> polygons
# ---------------------------------------------------------------------------

# Directions in (x, y) with y down; right turn rotates (x, y) -> (-y, x).
_EAST, _SOUTH, _WEST, _NORTH = (1, 0), (0, 1), (-1, 0), (0, -1)


def _right_of(d: tuple[int, int]) -> tuple[int, int]:
    return (-d[1], d[0])


def _left_of(d: tuple[int, int]) -> tuple[int, int]:
    return (d[1], -d[0])


def vectorize(pixels: np.ndarray) -> list[list[tuple[int, int]]]:
    """Trace the boundary of a pixel set as closed rings on the pixel grid.

    Each pixel occupies the unit square [c, c+1) x [r, r+1) in (x, y) =
    (col, row) coordinates. Boundary segments are directed with the set on
    the right of travel; at corner contacts the walk takes the rightmost
    turn, which keeps every ring simple. Exterior rings come out with
    positive shoelace area in this y-down frame, holes negative.
    Rasterizing the rings (even-odd rule) recovers the pixel set exactly.
    """
    pixels = np.asarray(pixels, dtype=int)
    if pixels.size == 0:
        return []
    pixset = {(int(r), int(c)) for r, c in pixels}
    # directed edges keyed by start vertex: start -> {direction: end}
    out_edges: dict[tuple[int, int], dict[tuple[int, int], tuple[int, int]]] = {}

    def add_edge(start: tuple[int, int], direction: tuple[int, int]) -> None:
        end = (start[0] + direction[0], start[1] + direction[1])
        out_edges.setdefault(start, {})[direction] = end

    for r, c in pixset:
        if (r - 1, c) not in pixset:
            add_edge((c, r), _EAST)          # top edge
        if (r, c + 1) not in pixset:
            add_edge((c + 1, r), _SOUTH)     # right edge
        if (r + 1, c) not in pixset:
            add_edge((c + 1, r + 1), _WEST)  # bottom edge
        if (r, c - 1) not in pixset:
            add_edge((c, r + 1), _NORTH)     # left edge

    rings = []
    while out_edges:
        start = next(iter(out_edges))
        direction = next(iter(out_edges[start]))
        ring = [start]
        vertex, heading = start, direction
        while True:
            nxt = out_edges[vertex].pop(heading)
            if not out_edges[vertex]:
                del out_edges[vertex]
            ring.append(nxt)
            if nxt == start:
                break
            options = out_edges.get(nxt, {})
            for cand in (_right_of(heading), heading, _left_of(heading)):
                if cand in options:
                    vertex, heading = nxt, cand
                    break
            else:  # no continuation would mean an open chain; cannot happen
                raise RuntimeError("boundary tracing failed to close a ring")
        rings.append(_merge_collinear(ring))
    return rings


def _merge_collinear(ring: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Drop intermediate vertices of straight runs; ring stays closed."""
    if len(ring) <= 2:
        return ring
    pts = ring[:-1]
    kept = []
    n = len(pts)
    for i, pt in enumerate(pts):
        prev_pt = pts[i - 1]
        next_pt = pts[(i + 1) % n]
        d_in = (pt[0] - prev_pt[0], pt[1] - prev_pt[1])
        d_out = (next_pt[0] - pt[0], next_pt[1] - pt[1])
        if d_in != d_out:
            kept.append(pt)
    kept.append(kept[0])
    return kept


def ring_area(ring: list[tuple[float, float]]) -> float:
    """Signed shoelace area (positive = counterclockwise in a y-up frame)."""
    area = 0.0
    for (x0, y0), (x1, y1) in zip(ring, ring[1:]):
        area += x0 * y1 - x1 * y0
    return area / 2.0


def rasterize_rings(rings: list[list[tuple[int, int]]], shape: tuple[int, int]) -> np.ndarray:
    """Fill rings on the pixel grid by the even-odd rule at pixel centers.

    All ring vertices must be integers (pixel-grid rings from
    :func:`vectorize`); the scanline crossing counts are then exact.
    """
    mask = np.zeros(shape, dtype=bool)
    # collect vertical segments as (x, y_min, y_max)
    segments = []
    for ring in rings:
        for (x0, y0), (x1, y1) in zip(ring, ring[1:]):
            if x0 == x1:
                segments.append((x0, min(y0, y1), max(y0, y1)))
    for r in range(shape[0]):
        y = r + 0.5
        xs = sorted(x for x, ylo, yhi in segments if ylo < y < yhi)
        for x_enter, x_exit in zip(xs[0::2], xs[1::2]):
            mask[r, x_enter:x_exit] = True
    return mask


def rings_to_geo(rings: list[list[tuple[int, int]]], transform: GeoTransform
                 ) -> list[list[tuple[float, float]]]:
    """Map pixel-grid rings into geographic coordinates.

    Ring order is normalized for GeoJSON: exteriors counterclockwise
    (positive area in lon/lat), holes clockwise.
    """
    geo_rings = []
    for ring in rings:
        pixel_exterior = ring_area([(float(x), float(y)) for x, y in ring]) > 0
        geo = [transform.pixel_to_geo(row=y, col=x) for x, y in ring]
        ccw = ring_area(geo) > 0
        if pixel_exterior != ccw:
            geo = geo[::-1]
        geo_rings.append(geo)
    return geo_rings
