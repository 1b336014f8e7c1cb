"""The review-queue item: a flagged pseudo-label candidate and its decision."""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..core import (
    Annotation,
    BoundingBox,
    ImageRecord,
    InvariantViolation,
    Pseudo,
)

PENDING = "pending"
ACCEPTED = "accepted"
REJECTED = "rejected"
RELABELED = "relabeled"
ADJUSTED = "adjusted"

DECIDED_STATUSES = (ACCEPTED, REJECTED, RELABELED, ADJUSTED)
ALL_STATUSES = (PENDING,) + DECIDED_STATUSES


@dataclass(frozen=True)
class ReviewItem:
    """One flagged candidate awaiting (or holding) a human decision.

    The image record is embedded so the review service can serve dimensions
    and pixels without access to the original dataset files. Decision
    payloads (``new_category_id`` for relabel, ``new_bbox`` for adjust) are
    only set in the corresponding terminal status.
    """

    item_id: str
    candidate: Annotation
    image: ImageRecord
    status: str = PENDING
    decided_by: str | None = None
    decided_at: str | None = None
    new_category_id: int | None = None
    new_bbox: BoundingBox | None = None

    def __post_init__(self):
        if not self.item_id:
            raise InvariantViolation("item id must be non-empty")
        if self.status not in ALL_STATUSES:
            raise InvariantViolation(f"unknown status {self.status!r}")
        if not isinstance(self.candidate.provenance, Pseudo):
            raise InvariantViolation("review candidates must carry pseudo provenance")
        if self.candidate.image != self.image.key:
            raise InvariantViolation("embedded image does not match the candidate's image reference")
        if (self.new_category_id is not None) != (self.status == RELABELED):
            raise InvariantViolation("new_category_id is set exactly for relabeled items")
        if (self.new_bbox is not None) != (self.status == ADJUSTED):
            raise InvariantViolation("new_bbox is set exactly for adjusted items")

    @property
    def is_pending(self) -> bool:
        return self.status == PENDING

    def decided(self, status: str, actor: str, at: str,
                new_category_id: int | None = None,
                new_bbox: BoundingBox | None = None) -> "ReviewItem":
        return replace(
            self,
            status=status,
            decided_by=actor,
            decided_at=at,
            new_category_id=new_category_id,
            new_bbox=new_bbox,
        )
