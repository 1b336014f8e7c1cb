"""Persistent review queue: append-only JSONL log with replay and compaction.

Every mutation (enqueue, duplicate-enqueue marker, decision) is one JSON line
appended to the log, so rebuilding the store is a replay from line 1 and
``stats()`` is identical before and after a restart. ``compact()`` collapses
the log into a single snapshot line. All mutations serialize through one lock
and the in-memory item table is swapped copy-on-write, so readers never block
and concurrent ``decide`` calls on one item resolve to exactly one winner.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from ..core import (
    Annotation,
    BoundingBox,
    ImageKey,
    ImageRecord,
    InvariantViolation,
    LabelFuseError,
    Pseudo,
    UnifiedDataset,
    Verified,
)
from .items import (
    ACCEPTED,
    ADJUSTED,
    ALL_STATUSES,
    PENDING,
    REJECTED,
    RELABELED,
    ReviewItem,
)


class StorageError(LabelFuseError, RuntimeError):
    """The backing log could not be read or written."""


class NotFound(LabelFuseError, KeyError):
    """No review item with the given id."""


class AlreadyDecided(LabelFuseError, ValueError):
    """The item already holds a terminal decision."""


class BadPage(LabelFuseError, ValueError):
    """Paging parameters outside the allowed range."""


class InvalidCategory(LabelFuseError, ValueError):
    """Relabel target outside the unified label space."""


class InvalidBox(LabelFuseError, ValueError):
    """Adjusted box is degenerate or not inside its image."""


ACTION_TO_STATUS = {
    "accept": ACCEPTED,
    "reject": REJECTED,
    "relabel": RELABELED,
    "adjust": ADJUSTED,
}

PAGE_LIMIT_MAX = 500


@dataclass(frozen=True)
class AuditRecord:
    """One append-only log entry for a decision."""

    sequence_no: int
    item_id: str
    prior_status: str
    new_status: str
    actor: str
    timestamp: str

    def to_dict(self) -> dict:
        return {
            "sequence_no": self.sequence_no,
            "item_id": self.item_id,
            "prior_status": self.prior_status,
            "new_status": self.new_status,
            "actor": self.actor,
            "timestamp": self.timestamp,
        }


def _bbox_list(b: BoundingBox | None) -> list[float] | None:
    if b is None:
        return None
    return [b.x, b.y, b.w, b.h]


def item_to_dict(item: ReviewItem) -> dict:
    """Serialize a review item to the wire/log dictionary form."""
    prov = item.candidate.provenance
    return {
        "item_id": item.item_id,
        "image": {
            "dataset": item.image.source_dataset,
            "image_id": item.image.id,
            "file_path": item.image.file_path,
            "width": item.image.width,
            "height": item.image.height,
        },
        "category_id": item.candidate.category_id,
        "bbox": _bbox_list(item.candidate.bbox),
        "model_id": prov.model_id,
        "confidence": prov.confidence,
        "status": item.status,
        "decided_by": item.decided_by,
        "decided_at": item.decided_at,
        "new_category_id": item.new_category_id,
        "new_bbox": _bbox_list(item.new_bbox),
    }


def item_from_dict(d: dict) -> ReviewItem:
    """Rebuild a review item from its dictionary form."""
    img = d["image"]
    record = ImageRecord(
        id=img["image_id"],
        source_dataset=img["dataset"],
        file_path=img["file_path"],
        width=img["width"],
        height=img["height"],
    )
    candidate = Annotation(
        image=ImageKey(img["dataset"], img["image_id"]),
        category_id=d["category_id"],
        bbox=BoundingBox(*d["bbox"]),
        provenance=Pseudo(model_id=d["model_id"], confidence=d["confidence"]),
    )
    new_bbox = d.get("new_bbox")
    return ReviewItem(
        item_id=d["item_id"],
        candidate=candidate,
        image=record,
        status=d.get("status", PENDING),
        decided_by=d.get("decided_by"),
        decided_at=d.get("decided_at"),
        new_category_id=d.get("new_category_id"),
        new_bbox=BoundingBox(*new_bbox) if new_bbox is not None else None,
    )


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class ReviewStore:
    """Review items persisted to a line-delimited JSON log.

    Opening an existing log replays it; ``num_categories`` is the size of the
    unified label space and bounds relabel targets.
    """

    def __init__(self, path: str | os.PathLike, num_categories: int):
        if num_categories <= 0:
            raise InvariantViolation("num_categories must be positive")
        self._path = Path(path)
        self._num_categories = num_categories
        self._lock = threading.Lock()
        self._items: dict[str, ReviewItem] = {}
        self._audit: list[AuditRecord] = []
        self._next_seq = 1
        self._duplicate_enqueues = 0
        if self._path.exists():
            self._replay()
        try:
            self._fh = open(self._path, "a", encoding="utf-8")
        except OSError as e:
            raise StorageError(f"cannot open review log {self._path}: {e}") from e

    # -- persistence ------------------------------------------------------

    def _replay(self) -> None:
        try:
            lines = self._path.read_text(encoding="utf-8").splitlines()
        except OSError as e:
            raise StorageError(f"cannot read review log {self._path}: {e}") from e
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise StorageError(f"{self._path}:{lineno}: malformed log line: {e}") from e
            try:
                self._apply_record(record)
            except (KeyError, TypeError, ValueError) as e:
                raise StorageError(f"{self._path}:{lineno}: bad log record: {e}") from e

    def _apply_record(self, record: dict) -> None:
        kind = record["kind"]
        if kind == "snapshot":
            self._items = {d["item_id"]: item_from_dict(d) for d in record["items"]}
            self._audit = [AuditRecord(**a) for a in record["audit"]]
            self._next_seq = record["next_sequence_no"]
            self._duplicate_enqueues = record.get("duplicate_enqueues", 0)
        elif kind == "enqueue":
            item = item_from_dict(record["item"])
            if item.item_id in self._items:
                self._duplicate_enqueues += 1
            else:
                self._items = {**self._items, item.item_id: item}
        elif kind == "dup_enqueue":
            self._duplicate_enqueues += 1
        elif kind == "decision":
            audit = AuditRecord(**record["record"])
            item = item_from_dict(record["item"])
            if audit.sequence_no < self._next_seq:
                raise ValueError(f"sequence_no {audit.sequence_no} not increasing")
            self._items = {**self._items, item.item_id: item}
            self._audit.append(audit)
            self._next_seq = audit.sequence_no + 1
        else:
            raise ValueError(f"unknown record kind {kind!r}")

    def _append(self, record: dict) -> None:
        try:
            self._fh.write(json.dumps(record) + "\n")
            self._fh.flush()
        except OSError as e:
            raise StorageError(f"cannot append to review log {self._path}: {e}") from e

    def compact(self) -> None:
        """Rewrite the log as a single snapshot line."""
        with self._lock:
            snapshot = {
                "kind": "snapshot",
                "items": [item_to_dict(self._items[k]) for k in sorted(self._items)],
                "audit": [a.to_dict() for a in self._audit],
                "next_sequence_no": self._next_seq,
                "duplicate_enqueues": self._duplicate_enqueues,
            }
            tmp = self._path.with_suffix(self._path.suffix + ".tmp")
            try:
                self._fh.close()
                with open(tmp, "w", encoding="utf-8") as out:
                    out.write(json.dumps(snapshot) + "\n")
                os.replace(tmp, self._path)
                self._fh = open(self._path, "a", encoding="utf-8")
            except OSError as e:
                raise StorageError(f"cannot compact review log {self._path}: {e}") from e

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "ReviewStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- queue operations --------------------------------------------------

    def enqueue(self, items: Sequence[ReviewItem]) -> int:
        """Persist pending items; returns how many were new.

        Re-enqueueing an already-known item id is a no-op (tracked in
        ``stats()['duplicate_enqueues']``), so replaying the same fusion
        output is safe.
        """
        seen = set()
        for item in items:
            if not item.is_pending:
                raise InvariantViolation(f"enqueue requires pending items, got {item.status!r}")
            if item.item_id in seen:
                raise InvariantViolation(f"duplicate item id in one enqueue call: {item.item_id!r}")
            if not 0 <= item.candidate.category_id < self._num_categories:
                raise InvariantViolation(
                    f"candidate category {item.candidate.category_id} outside label space"
                )
            seen.add(item.item_id)
        added = 0
        with self._lock:
            table = dict(self._items)
            for item in items:
                if item.item_id in table:
                    # Logged as a marker (not the full item) so stats() comes
                    # out identical after a replay.
                    self._duplicate_enqueues += 1
                    self._append({"kind": "dup_enqueue", "item_id": item.item_id})
                    continue
                self._append({"kind": "enqueue", "item": item_to_dict(item)})
                table[item.item_id] = item
                added += 1
            self._items = table
        return added

    def get(self, item_id: str) -> ReviewItem:
        try:
            return self._items[item_id]
        except KeyError:
            raise NotFound(f"no review item {item_id!r}") from None

    def list_items(
        self,
        status: str | None = None,
        offset: int = 0,
        limit: int = 50,
    ) -> tuple[tuple[ReviewItem, ...], int]:
        """Page through items in ascending item-id order.

        Returns (page, total) where total counts every item matching the
        status filter regardless of paging.
        """
        if not 1 <= limit <= PAGE_LIMIT_MAX:
            raise BadPage(f"limit must be in [1, {PAGE_LIMIT_MAX}], got {limit}")
        if offset < 0:
            raise BadPage(f"offset must be >= 0, got {offset}")
        if status is not None and status not in ALL_STATUSES:
            raise BadPage(f"unknown status filter {status!r}")
        table = self._items
        keys = sorted(k for k in table if status is None or table[k].status == status)
        page = tuple(table[k] for k in keys[offset:offset + limit])
        return page, len(keys)

    def decide(
        self,
        item_id: str,
        action: str,
        actor: str,
        category_id: int | None = None,
        bbox: BoundingBox | Sequence[float] | None = None,
    ) -> ReviewItem:
        """Apply one terminal decision; exactly one concurrent caller wins."""
        try:
            status = ACTION_TO_STATUS[action]
        except KeyError:
            raise InvariantViolation(
                f"unknown action {action!r}; expected one of {sorted(ACTION_TO_STATUS)}"
            ) from None
        with self._lock:
            item = self._items.get(item_id)
            if item is None:
                raise NotFound(f"no review item {item_id!r}")
            if not item.is_pending:
                raise AlreadyDecided(f"item {item_id!r} is already {item.status}")
            new_category_id = None
            new_bbox = None
            if status == RELABELED:
                if category_id is None or not 0 <= category_id < self._num_categories:
                    raise InvalidCategory(
                        f"relabel target {category_id!r} outside label space of size {self._num_categories}"
                    )
                new_category_id = category_id
            if status == ADJUSTED:
                if bbox is None:
                    raise InvalidBox("adjust requires a bounding box")
                try:
                    box = bbox if isinstance(bbox, BoundingBox) else BoundingBox(*bbox)
                except (InvariantViolation, TypeError) as e:
                    raise InvalidBox(f"bad adjusted box: {e}") from None
                img = item.image
                if box.x < 0 or box.y < 0 or box.x2 > img.width or box.y2 > img.height:
                    raise InvalidBox(
                        f"adjusted box {box} outside {img.width}x{img.height} image"
                    )
                new_bbox = box
            ts = _now()
            updated = item.decided(status, actor, ts,
                                   new_category_id=new_category_id, new_bbox=new_bbox)
            audit = AuditRecord(self._next_seq, item_id, item.status, status, actor, ts)
            self._append({
                "kind": "decision",
                "record": audit.to_dict(),
                "item": item_to_dict(updated),
            })
            self._items = {**self._items, item_id: updated}
            self._audit.append(audit)
            self._next_seq += 1
        return updated

    # -- inspection --------------------------------------------------------

    @property
    def audit_log(self) -> tuple[AuditRecord, ...]:
        return tuple(self._audit)

    def status_counts(self) -> dict[str, int]:
        counts = {status: 0 for status in ALL_STATUSES}
        for item in self._items.values():
            counts[item.status] += 1
        return counts

    def stats(self) -> dict:
        counts = self.status_counts()
        return {
            "total": sum(counts.values()),
            "by_status": counts,
            "duplicate_enqueues": self._duplicate_enqueues,
            "decisions": len(self._audit),
        }

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        table = self._items
        return iter(table[k] for k in sorted(table))


@dataclass
class ApplyReport:
    """What apply_decisions folded in (or skipped)."""

    accepted: int = 0
    relabeled: int = 0
    adjusted: int = 0
    rejected: int = 0
    pending: int = 0
    duplicates: int = 0
    by_action: dict = field(default_factory=dict)

    @property
    def applied(self) -> int:
        return self.accepted + self.relabeled + self.adjusted

    def to_dict(self) -> dict:
        return {
            "applied": self.applied,
            "accepted": self.accepted,
            "relabeled": self.relabeled,
            "adjusted": self.adjusted,
            "rejected": self.rejected,
            "pending": self.pending,
            "duplicates": self.duplicates,
        }


def _verified_annotation(item: ReviewItem) -> Annotation:
    prov = Verified(
        reviewer=item.decided_by or "",
        original=item.candidate.provenance,
        action=item.status,
    )
    category_id = item.candidate.category_id
    bbox = item.candidate.bbox
    if item.status == RELABELED:
        category_id = item.new_category_id
    elif item.status == ADJUSTED:
        bbox = item.new_bbox
    return Annotation(
        image=item.candidate.image,
        category_id=category_id,
        bbox=bbox,
        provenance=prov,
    )


def apply_decisions(
    u: UnifiedDataset,
    store: ReviewStore | Iterable[ReviewItem],
) -> tuple[UnifiedDataset, ApplyReport]:
    """Fold decided review items into the unified dataset.

    Accepted, relabeled and adjusted items become annotations with verified
    provenance embedding the original pseudo payload; rejected and pending
    items are skipped and counted. Annotations already present are not
    duplicated, so applying twice equals applying once.
    """
    report = ApplyReport()
    existing = set(u.annotations)
    new_annotations = []
    for item in store:
        if item.status == PENDING:
            report.pending += 1
            continue
        if item.status == REJECTED:
            report.rejected += 1
            continue
        annotation = _verified_annotation(item)
        if annotation in existing:
            report.duplicates += 1
            continue
        existing.add(annotation)
        new_annotations.append(annotation)
        if item.status == ACCEPTED:
            report.accepted += 1
        elif item.status == RELABELED:
            report.relabeled += 1
        else:
            report.adjusted += 1
    report.by_action = {
        "accepted": report.accepted,
        "relabeled": report.relabeled,
        "adjusted": report.adjusted,
    }
    if not new_annotations:
        return u, report
    merged = UnifiedDataset(
        label_space=u.label_space,
        images=u.images,
        annotations=tuple(u.annotations) + tuple(new_annotations),
    )
    return merged, report
