"""Pixel- and event-level evaluation of detection products.

Pixel metrics are confusion-count based and micro-averaged across granules
by summing counts before recomputing ratios. Event matching links plume
candidates to ground-truth event masks many-to-many: a ground-truth event
is detected if any candidate meets the criterion, a candidate is a false
alarm if it meets the criterion against nothing. The default criterion is
any shared pixel; an IoU threshold is available for sensitivity studies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from .plume import PlumeCandidate

REPORT_SCHEMA_ID = "plumekit.evaluation_report.v1"


@dataclass(frozen=True)
class PixelCounts:
    """Confusion counts over valid pixels; ratios use the 0/0 -> 0 convention."""

    tp: int
    fp: int
    fn: int
    tn: int

    def __add__(self, other: "PixelCounts") -> "PixelCounts":
        return PixelCounts(self.tp + other.tp, self.fp + other.fp,
                           self.fn + other.fn, self.tn + other.tn)

    @property
    def precision(self) -> float:
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


def pixel_metrics(pred: np.ndarray, gt: np.ndarray,
                  validity: np.ndarray | None = None) -> PixelCounts:
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ValueError("pred and gt shapes differ")
    if validity is None:
        validity = np.ones(pred.shape, dtype=bool)
    p, g = pred[validity], gt[validity]
    return PixelCounts(
        tp=int(np.count_nonzero(p & g)),
        fp=int(np.count_nonzero(p & ~g)),
        fn=int(np.count_nonzero(~p & g)),
        tn=int(np.count_nonzero(~p & ~g)),
    )


def auprc(prob: np.ndarray, gt: np.ndarray,
          validity: np.ndarray | None = None) -> float:
    """Area under the precision-recall curve, step-wise rule.

    The curve is formed at every distinct probability value (descending)
    and integrated as sum of precision * recall increment, which makes the
    result invariant under strictly monotone transforms of the scores.
    """
    prob = np.asarray(prob, dtype=float)
    gt = np.asarray(gt, dtype=bool)
    if prob.shape != gt.shape:
        raise ValueError("prob and gt shapes differ")
    if validity is None:
        validity = np.isfinite(prob)
    scores, labels = prob[validity], gt[validity]
    positives = int(np.count_nonzero(labels))
    if positives == 0:
        raise ValueError("AUPRC undefined: no positive pixels")
    order = np.argsort(scores, kind="stable")[::-1]
    scores, labels = scores[order], labels[order]
    # cut after each tie group of equal score
    boundaries = np.nonzero(np.diff(scores))[0]
    cuts = np.concatenate([boundaries, [len(scores) - 1]])
    tp = np.cumsum(labels)[cuts]
    taken = cuts + 1
    precision = tp / taken
    recall = tp / positives
    return float(np.sum(np.diff(recall, prepend=0.0) * precision))


@dataclass(frozen=True)
class EventCounts:
    detected: int
    missed: int
    false_alarms: int

    def __add__(self, other: "EventCounts") -> "EventCounts":
        return EventCounts(self.detected + other.detected,
                           self.missed + other.missed,
                           self.false_alarms + other.false_alarms)


@dataclass(frozen=True)
class EventMatchConfig:
    criterion: str = "any_overlap"
    min_iou: float = 0.25  # only read when criterion == "min_iou"

    def __post_init__(self):
        if self.criterion not in ("any_overlap", "min_iou"):
            raise ValueError("criterion must be any_overlap or min_iou")
        if self.criterion == "min_iou" and not 0.0 < self.min_iou <= 1.0:
            raise ValueError("iou threshold must be in (0, 1]")


@dataclass
class EventMatchResult:
    counts: EventCounts
    links: list[tuple[str, int]]  # (candidate id, gt event index), many-to-many


def event_match(candidates: list[PlumeCandidate], gt_masks: list[np.ndarray],
                cfg: EventMatchConfig | None = None) -> EventMatchResult:
    """Match candidates against ground-truth event masks on a shared grid.

    One candidate may detect several events and one event may be claimed by
    several candidates; the links list exposes every such pair so either
    counting convention can be derived downstream.
    """
    cfg = cfg or EventMatchConfig()
    gt_sets = [frozenset(map(tuple, np.argwhere(np.asarray(m, dtype=bool))))
               for m in gt_masks]
    links: list[tuple[str, int]] = []
    matched_candidates: set[str] = set()
    matched_events: set[int] = set()
    for cand in candidates:
        cand_set = frozenset((int(r), int(c)) for r, c in cand.pixels)
        for gi, gt_set in enumerate(gt_sets):
            inter = len(cand_set & gt_set)
            if inter == 0:
                continue
            if cfg.criterion == "min_iou":
                iou = inter / len(cand_set | gt_set)
                if iou < cfg.min_iou:
                    continue
            links.append((cand.id, gi))
            matched_candidates.add(cand.id)
            matched_events.add(gi)
    detected = len(matched_events)
    counts = EventCounts(
        detected=detected,
        missed=len(gt_sets) - detected,
        false_alarms=sum(1 for c in candidates if c.id not in matched_candidates),
    )
    return EventMatchResult(counts=counts, links=links)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class GranuleReport:
    granule_id: str
    pixels: PixelCounts
    events: EventCounts
    auprc: float | None = None


@dataclass
class EvaluationReport:
    pixels: PixelCounts
    events: EventCounts
    auprc: float | None
    per_granule: list[GranuleReport] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        doc = {
            "schema": REPORT_SCHEMA_ID,
            "pixel": {
                "precision": self.pixels.precision,
                "recall": self.pixels.recall,
                "f1": self.pixels.f1,
                "auprc": self.auprc,
                "counts": {"tp": self.pixels.tp, "fp": self.pixels.fp,
                           "fn": self.pixels.fn, "tn": self.pixels.tn},
            },
            "events": {"detected": self.events.detected,
                       "missed": self.events.missed,
                       "false_alarms": self.events.false_alarms},
            "per_granule": [
                {
                    "granule_id": g.granule_id,
                    "pixel": {"precision": g.pixels.precision,
                              "recall": g.pixels.recall,
                              "f1": g.pixels.f1,
                              "auprc": g.auprc,
                              "counts": {"tp": g.pixels.tp, "fp": g.pixels.fp,
                                         "fn": g.pixels.fn, "tn": g.pixels.tn}},
                    "events": {"detected": g.events.detected,
                               "missed": g.events.missed,
                               "false_alarms": g.events.false_alarms},
                }
                for g in self.per_granule
            ],
            "config": self.config,
        }
        validate_report(doc)
        return doc


def report_schema() -> dict:
    text = resources.files("plumekit").joinpath(
        "schemas/evaluation_report.v1.json").read_text()
    return json.loads(text)


def validate_report(doc: dict) -> None:
    jsonschema.validate(doc, report_schema())


def aggregate(reports: list[GranuleReport],
              config: dict | None = None) -> EvaluationReport:
    """Combine per-granule reports: events summed, pixel ratios recomputed
    from summed confusion counts (micro-averaging), AUPRC averaged over the
    granules that define one (it does not decompose into counts).
    """
    pixels = PixelCounts(0, 0, 0, 0)
    events = EventCounts(0, 0, 0)
    for rep in reports:
        pixels = pixels + rep.pixels
        events = events + rep.events
    with_auprc = [r.auprc for r in reports if r.auprc is not None]
    mean_auprc = float(np.mean(with_auprc)) if with_auprc else None
    return EvaluationReport(pixels=pixels, events=events, auprc=mean_auprc,
                            per_granule=list(reports), config=config or {})
