"""Human-verification queue: item model, persistent store and wire API."""

from .items import (
    ACCEPTED,
    ADJUSTED,
    DECIDED_STATUSES,
    PENDING,
    REJECTED,
    RELABELED,
    ReviewItem,
)
from .store import (
    AlreadyDecided,
    ApplyReport,
    AuditRecord,
    BadPage,
    InvalidBox,
    InvalidCategory,
    NotFound,
    ReviewStore,
    StorageError,
    apply_decisions,
)

__all__ = [
    "ACCEPTED",
    "ADJUSTED",
    "DECIDED_STATUSES",
    "PENDING",
    "REJECTED",
    "RELABELED",
    "ReviewItem",
    "AlreadyDecided",
    "ApplyReport",
    "AuditRecord",
    "BadPage",
    "InvalidBox",
    "InvalidCategory",
    "NotFound",
    "ReviewStore",
    "StorageError",
    "apply_decisions",
]
