"""Event-sourced persistence for the analyst review workflow.

Every mutation is one NDJSON line appended to ``events.ndjson``; the
in-memory state is a pure fold over those lines, so replaying the log from
empty reproduces the store exactly. A snapshot file only short-circuits
replay, it never holds information absent from the log. Candidate review
states move proposed -> validated or proposed -> rejected and never back.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from ..datakit import GranuleRecord, parse_utc
from ..plume import PlumeCandidate, sort_alerts

EVENT_SCHEMA_ID = "plumekit.review_event.v1"
SNAPSHOT_SCHEMA_ID = "plumekit.review_snapshot.v1"

REVIEW_ACTIONS = ("validate", "validate_with_redraw", "reject",
                  "bulk_delete_unvalidated", "create_monitoring_site")


class ReviewError(Exception):
    """Base class for review store failures."""


class ConflictError(ReviewError):
    """Re-ingest of an existing granule with different content."""


class TransitionError(ReviewError):
    """Review action not legal for the candidate's current state."""


@dataclass(frozen=True)
class ReviewEvent:
    """One analyst action; the payload carries action-specific data
    (redraw polygon, monitoring square, bulk-delete granule)."""

    event_id: str
    action: str
    actor: str
    timestamp: str  # ISO-8601 UTC
    candidate_id: str | None = None
    payload: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.action not in REVIEW_ACTIONS:
            raise ValueError(f"unknown review action {self.action!r}")
        parse_utc(self.timestamp)

    def to_json(self) -> dict:
        return {
            "schema": EVENT_SCHEMA_ID,
            "kind": "review",
            "event_id": self.event_id,
            "action": self.action,
            "actor": self.actor,
            "timestamp": self.timestamp,
            "candidate_id": self.candidate_id,
            "payload": self.payload,
        }


@dataclass(frozen=True)
class MonitoringSite:
    """Persistent watch square drawn around a confirmed emitter."""

    site_id: str
    square: tuple[float, float, float, float]  # lon_min, lat_min, lon_max, lat_max
    created_from: str
    active: bool = True

    def __post_init__(self):
        x0, y0, x1, y1 = self.square
        if not (x1 > x0 and y1 > y0):
            raise ValueError("monitoring square must be nondegenerate")

    def to_json(self) -> dict:
        return {"site_id": self.site_id, "square": list(self.square),
                "created_from": self.created_from, "active": self.active}


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def _fold(state: dict[str, Any], record: dict) -> None:
    """Apply one log record to the state in place. Must stay total over
    every record ever written: replay calls it on historical logs."""
    kind = record["kind"]
    if kind == "ingest":
        gid = record["granule"]["granule_id"]
        state["granules"][gid] = record["granule"]
        for feature in record["candidates"]:
            cand = dict(feature["properties"])
            cand["polygon"] = (feature.get("geometry") or {}).get("coordinates", [])
            cand.setdefault("review_state", "proposed")
            cand.setdefault("flux_kg_per_hr", None)
            cand.setdefault("replacement_polygon", None)
            state["candidates"][cand["id"]] = cand
    elif kind == "review":
        action = record["action"]
        if action in ("validate", "validate_with_redraw"):
            cand = state["candidates"][record["candidate_id"]]
            cand["review_state"] = "validated"
            cand["reviewed_utc"] = record["timestamp"]
            cand["reviewed_by"] = record["actor"]
            if action == "validate_with_redraw":
                cand["replacement_polygon"] = record["payload"]["polygon"]
        elif action == "reject":
            cand = state["candidates"][record["candidate_id"]]
            cand["review_state"] = "rejected"
            cand["reviewed_utc"] = record["timestamp"]
            cand["reviewed_by"] = record["actor"]
        elif action == "bulk_delete_unvalidated":
            gid = record["payload"]["granule_id"]
            for cand in state["candidates"].values():
                if cand["granule_id"] == gid and cand["review_state"] == "proposed":
                    cand["review_state"] = "rejected"
                    cand["reviewed_utc"] = record["timestamp"]
                    cand["reviewed_by"] = record["actor"]
        elif action == "create_monitoring_site":
            site = record["payload"]
            state["sites"][site["site_id"]] = dict(site)
        else:  # pragma: no cover - to_json validates actions up front
            raise ValueError(f"unknown action in log: {action!r}")
    else:
        raise ValueError(f"unknown log record kind: {kind!r}")


def _empty_state() -> dict[str, Any]:
    return {"granules": {}, "candidates": {}, "sites": {}}


class ReviewStore:
    """Append-only review store rooted at a directory.

    Writes are serialized under one lock, which also covers the per-granule
    single-writer requirement; reads see the in-memory fold.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.events_path = self.root / "events.ndjson"
        self.snapshot_path = self.root / "snapshot.json"
        self._lock = threading.Lock()
        self._state = _empty_state()
        self._applied = 0
        self._load()

    # -- persistence ------------------------------------------------------

    def _load(self) -> None:
        if self.snapshot_path.exists():
            snap = json.loads(self.snapshot_path.read_text())
            if snap.get("schema") != SNAPSHOT_SCHEMA_ID:
                raise ReviewError(f"unsupported snapshot schema: {snap.get('schema')!r}")
            self._state = snap["state"]
            self._applied = int(snap["events_applied"])
        for i, record in enumerate(self._iter_log()):
            if i >= self._applied:
                _fold(self._state, record)
                self._applied = i + 1

    def _iter_log(self) -> Iterable[dict]:
        if not self.events_path.exists():
            return
        with open(self.events_path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield json.loads(line)

    def _append(self, record: dict) -> None:
        line = json.dumps(record, sort_keys=True)
        with open(self.events_path, "a") as fh:
            fh.write(line + "\n")
            fh.flush()
        _fold(self._state, record)
        self._applied += 1

    def write_snapshot(self) -> None:
        doc = {"schema": SNAPSHOT_SCHEMA_ID, "events_applied": self._applied,
               "state": self._state}
        tmp = self.snapshot_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(doc, sort_keys=True))
        tmp.replace(self.snapshot_path)

    def replay(self) -> dict[str, Any]:
        """Fold the full log from empty; equals the live state by
        construction, asserted in tests as the persistence oracle."""
        state = _empty_state()
        for record in self._iter_log():
            _fold(state, record)
        return state

    def _next_event_id(self) -> str:
        return f"ev-{self._applied:06d}"

    # -- operations -------------------------------------------------------

    def ingest_granule(self, granule: GranuleRecord,
                       candidates: list[PlumeCandidate]) -> list[str]:
        """Persist a granule and its scored candidates.

        Idempotent: re-ingesting identical content returns the same ids
        without a new log entry; different content for the same granule id
        is a conflict.
        """
        record = {
            "schema": EVENT_SCHEMA_ID,
            "kind": "ingest",
            "granule": granule.to_json(),
            "candidates": [c.to_feature() for c in candidates],
        }
        with self._lock:
            existing = self._state["granules"].get(granule.granule_id)
            if existing is not None:
                same_granule = existing == record["granule"]
                old_ids = [c["id"] for c in self._state["candidates"].values()
                           if c["granule_id"] == granule.granule_id]
                same_candidates = (
                    sorted(old_ids) == sorted(c.id for c in candidates)
                    and all(self._ingested_equal(c) for c in candidates))
                if same_granule and same_candidates:
                    return [c.id for c in candidates]
                raise ConflictError(
                    f"granule {granule.granule_id!r} already ingested with different content")
            self._append(record)
        return [c.id for c in candidates]

    def _ingested_equal(self, cand: PlumeCandidate) -> bool:
        stored = self._state["candidates"].get(cand.id)
        if stored is None:
            return False
        fresh = dict(cand.to_feature()["properties"])
        fresh["polygon"] = [[list(v) for v in ring] for ring in cand.polygon]
        # review fields evolve after ingest; compare the immutable part
        keys = ("granule_id", "score", "area_px", "pixels", "polygon")
        return all(stored.get(k) == fresh.get(k) for k in keys)

    def apply_review(self, action: str, actor: str,
                     candidate_id: str | None = None,
                     granule_id: str | None = None,
                     polygon: list | None = None,
                     square: tuple[float, float, float, float] | None = None,
                     timestamp: str | None = None) -> ReviewEvent:
        """Validate, reject, bulk-delete, or create a monitoring site.

        Only proposed candidates can be validated or rejected; bulk delete
        rejects every proposed candidate of a granule in one event and
        leaves validated ones untouched.
        """
        timestamp = timestamp or _now_iso()
        with self._lock:
            payload: dict[str, Any] = {}
            if action in ("validate", "validate_with_redraw", "reject"):
                if candidate_id not in self._state["candidates"]:
                    raise KeyError(f"unknown candidate {candidate_id!r}")
                current = self._state["candidates"][candidate_id]["review_state"]
                if current != "proposed":
                    raise TransitionError(
                        f"candidate {candidate_id!r} is {current}, not proposed")
                if action == "validate_with_redraw":
                    if not polygon:
                        raise ValueError("validate_with_redraw requires a polygon")
                    # normalize to the JSON shape the log stores, so the live
                    # fold and a replayed fold see identical values
                    payload["polygon"] = [[list(map(float, pt)) for pt in ring]
                                          for ring in polygon]
            elif action == "bulk_delete_unvalidated":
                if granule_id not in self._state["granules"]:
                    raise KeyError(f"unknown granule {granule_id!r}")
                payload["granule_id"] = granule_id
                # audit record of what this event rejected; the fold derives
                # the same set from state, so replay stays consistent
                payload["rejected"] = sorted(
                    cid for cid, c in self._state["candidates"].items()
                    if c["granule_id"] == granule_id
                    and c["review_state"] == "proposed")
            elif action == "create_monitoring_site":
                if candidate_id not in self._state["candidates"]:
                    raise KeyError(f"unknown candidate {candidate_id!r}")
                if square is None:
                    raise ValueError("create_monitoring_site requires a square")
                site = MonitoringSite(
                    site_id=f"site-{len(self._state['sites']):04d}",
                    square=tuple(square), created_from=candidate_id)
                payload = site.to_json()
            else:
                raise ValueError(f"unknown review action {action!r}")

            event = ReviewEvent(event_id=self._next_event_id(), action=action,
                                actor=actor, timestamp=timestamp,
                                candidate_id=candidate_id, payload=payload)
            self._append(event.to_json())
        return event

    # -- queries ----------------------------------------------------------

    def granules(self) -> list[dict]:
        out = []
        for gid in sorted(self._state["granules"]):
            doc = dict(self._state["granules"][gid])
            states = [c["review_state"] for c in self._state["candidates"].values()
                      if c["granule_id"] == gid]
            doc["candidate_counts"] = {
                s: states.count(s) for s in ("proposed", "validated", "rejected")}
            out.append(doc)
        return out

    def get_candidate(self, candidate_id: str) -> dict:
        cand = self._state["candidates"].get(candidate_id)
        if cand is None:
            raise KeyError(f"unknown candidate {candidate_id!r}")
        return dict(cand)

    def _ranked(self, cands: list[dict]) -> list[dict]:
        # delegate ordering to the alert sorter so queue order and offline
        # ranking can never drift apart
        order = sort_alerts([
            PlumeCandidate(id=c["id"], granule_id=c["granule_id"],
                           pixels=np.empty((0, 2), dtype=int),
                           score=c["score"], area_px=c["area_px"])
            for c in cands])
        by_id = {c["id"]: c for c in cands}
        return [dict(by_id[c.id]) for c in order]

    def queue(self, sensor: str | None = None,
              date_from: str | None = None, date_to: str | None = None,
              bbox: tuple[float, float, float, float] | None = None,
              min_score: float | None = None,
              page: int = 0, page_size: int = 50) -> dict:
        """Proposed candidates in alert order, filtered and paginated.

        The order is total (score desc, area desc, granule, id), so page
        boundaries are stable for a frozen store.
        """
        if page < 0 or page_size < 1:
            raise ValueError("page must be >= 0 and page_size >= 1")
        selected = []
        for cand in self._state["candidates"].values():
            if cand["review_state"] != "proposed":
                continue
            granule = self._state["granules"][cand["granule_id"]]
            if sensor is not None and granule["sensor_id"] != sensor:
                continue
            acquired = parse_utc(granule["acquired_utc"])
            if date_from is not None and acquired < parse_utc(date_from):
                continue
            if date_to is not None and acquired >= parse_utc(date_to):
                continue
            if bbox is not None:
                x0, y0, x1, y1 = bbox
                if not (x0 <= granule["center_lon"] <= x1
                        and y0 <= granule["center_lat"] <= y1):
                    continue
            if min_score is not None and cand["score"] < min_score:
                continue
            selected.append(cand)
        ranked = self._ranked(selected)
        start = page * page_size
        return {"total": len(ranked), "page": page, "page_size": page_size,
                "items": ranked[start:start + page_size]}

    def monitoring_sites(self) -> list[dict]:
        return [dict(self._state["sites"][k]) for k in sorted(self._state["sites"])]

    def export_notifications(self, sensor: str | None = None,
                             date_from: str | None = None,
                             date_to: str | None = None) -> list[dict]:
        """Validated candidates serialized for operator notification."""
        out = []
        for cand in self._state["candidates"].values():
            if cand["review_state"] != "validated":
                continue
            granule = self._state["granules"][cand["granule_id"]]
            if sensor is not None and granule["sensor_id"] != sensor:
                continue
            acquired = parse_utc(granule["acquired_utc"])
            if date_from is not None and acquired < parse_utc(date_from):
                continue
            if date_to is not None and acquired >= parse_utc(date_to):
                continue
            polygon = cand.get("replacement_polygon") or cand.get("polygon") or []
            if polygon:
                ring = polygon[0]
                pts = ring[:-1] if len(ring) > 1 and ring[0] == ring[-1] else ring
                lon = sum(p[0] for p in pts) / len(pts)
                lat = sum(p[1] for p in pts) / len(pts)
            else:
                lon, lat = granule["center_lon"], granule["center_lat"]
            out.append({
                "candidate_id": cand["id"],
                "granule_id": cand["granule_id"],
                "sensor_id": granule["sensor_id"],
                "acquired_utc": granule["acquired_utc"],
                "validated_utc": cand.get("reviewed_utc"),
                "validated_by": cand.get("reviewed_by"),
                "flux_kg_per_hr": cand.get("flux_kg_per_hr"),
                "score": cand["score"],
                "location": {"lon": lon, "lat": lat},
                "polygon": polygon,
            })
        out.sort(key=lambda n: n["candidate_id"])
        return out
