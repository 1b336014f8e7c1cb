"""Shared domain types for datasets, boxes, annotations and detections.

Everything here is an immutable value object: construction validates the
type's invariants and instances can be shared freely across threads.
Box convention is top-left (x, y, w, h) in absolute pixels throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union


class LabelFuseError(Exception):
    """Base class for all errors raised by this package."""


class InvariantViolation(LabelFuseError, ValueError):
    """A constructor received values that violate the type's invariants."""


class DegenerateBox(LabelFuseError, ValueError):
    """A box has no area inside its image."""


class UnknownImage(LabelFuseError, ValueError):
    """A detection references an image the operand dataset does not contain."""


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box, top-left corner at (x, y), extent (w, h) in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise InvariantViolation(f"box extent must be positive, got w={self.w}, h={self.h}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class CategorySpec:
    """One category of a label space: dense id, canonical name, known aliases."""

    id: int
    canonical_name: str
    aliases: frozenset[str] = frozenset()

    def __post_init__(self):
        # Names are normalized here so the rest of the pipeline never sees
        # casing or whitespace variants of the same category.
        name = self.canonical_name.strip().lower()
        if not name:
            raise InvariantViolation("canonical name must be non-empty")
        if self.id < 0:
            raise InvariantViolation(f"category id must be >= 0, got {self.id}")
        object.__setattr__(self, "canonical_name", name)
        object.__setattr__(self, "aliases", frozenset(a.strip().lower() for a in self.aliases))


@dataclass(frozen=True)
class LabelSpace:
    """Ordered list of categories with ids 0..k-1 and pairwise-distinct names."""

    categories: tuple[CategorySpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))
        ids = [c.id for c in self.categories]
        if ids != list(range(len(ids))):
            raise InvariantViolation(f"category ids must be dense 0..k-1, got {ids}")
        names = [c.canonical_name for c in self.categories]
        if len(set(names)) != len(names):
            raise InvariantViolation(f"canonical names must be pairwise distinct: {names}")
        # An alias may not be the canonical name of a *different* category.
        for c in self.categories:
            clash = c.aliases & (set(names) - {c.canonical_name})
            if clash:
                raise InvariantViolation(
                    f"aliases of {c.canonical_name!r} collide with other canonical names: {sorted(clash)}"
                )

    def __len__(self) -> int:
        return len(self.categories)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.canonical_name for c in self.categories)

    def name_of(self, category_id: int) -> str:
        return self.categories[category_id].canonical_name

    def id_of(self, name: str) -> int:
        for c in self.categories:
            if c.canonical_name == name:
                return c.id
        raise KeyError(name)


def category_specs(names: "Sequence[str]",
                   aliases: "dict[str, Sequence[str]] | None" = None) -> tuple[CategorySpec, ...]:
    """Dense category tuple from an ordered name list (ids follow the order)."""
    alias_map = aliases or {}
    return tuple(
        CategorySpec(i, name, frozenset(alias_map.get(name, ())))
        for i, name in enumerate(names)
    )


@dataclass(frozen=True)
class ImageRecord:
    """One image: opaque id, owning dataset, relative path and pixel size."""

    id: str
    source_dataset: str
    file_path: str
    width: int
    height: int

    def __post_init__(self):
        if not self.id:
            raise InvariantViolation("image id must be non-empty")
        if self.width <= 0 or self.height <= 0:
            raise InvariantViolation(f"image size must be positive, got {self.width}x{self.height}")

    @property
    def key(self) -> "ImageKey":
        return ImageKey(self.source_dataset, self.id)


class ImageKey(NamedTuple):
    """Globally unique image reference: (source dataset id, image id)."""

    dataset: str
    image_id: str


@dataclass(frozen=True)
class GroundTruth:
    """Label authored by the source dataset. Confidence is 1.0 by definition."""


@dataclass(frozen=True)
class Pseudo:
    """Label produced by one or more external models."""

    model_id: str
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise InvariantViolation(f"confidence must be in [0,1], got {self.confidence}")


VERIFY_ACTIONS = ("accepted", "relabeled", "adjusted")


@dataclass(frozen=True)
class Verified:
    """Human-verified label; keeps the pre-verification payload as an audit trail."""

    reviewer: str
    original: Pseudo
    action: str

    def __post_init__(self):
        if self.action not in VERIFY_ACTIONS:
            raise InvariantViolation(f"unknown verify action {self.action!r}")


Provenance = Union[GroundTruth, Pseudo, Verified]


def confidence_of(provenance: Provenance) -> float:
    """Score to use wherever a confidence is required; authoritative labels are 1.0."""
    if isinstance(provenance, Pseudo):
        return provenance.confidence
    return 1.0


@dataclass(frozen=True)
class Annotation:
    """One label in a dataset: image reference, category, box, origin."""

    image: ImageKey
    category_id: int
    bbox: BoundingBox
    provenance: Provenance

    def __post_init__(self):
        object.__setattr__(self, "image", ImageKey(*self.image))
        if self.category_id < 0:
            raise InvariantViolation(f"category id must be >= 0, got {self.category_id}")


@dataclass(frozen=True)
class Detection:
    """One raw prediction from an external model, in that model's label space."""

    image_id: str
    category_id: int
    bbox: BoundingBox
    score: float
    model_id: str

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise InvariantViolation(f"score must be in [0,1], got {self.score}")
        if self.category_id < 0:
            raise InvariantViolation(f"category id must be >= 0, got {self.category_id}")


def _check_annotations(label_space: LabelSpace, images: tuple[ImageRecord, ...],
                       annotations: tuple[Annotation, ...]) -> None:
    keys = set()
    for img in images:
        if img.key in keys:
            raise InvariantViolation(f"duplicate image {img.key}")
        keys.add(img.key)
    by_key = {img.key: img for img in images}
    k = len(label_space)
    for a in annotations:
        if a.image not in by_key:
            raise InvariantViolation(f"annotation references unknown image {a.image}")
        if a.category_id >= k:
            raise InvariantViolation(f"annotation category {a.category_id} outside label space of size {k}")
        img = by_key[a.image]
        if a.bbox.x < 0 or a.bbox.y < 0 or a.bbox.x2 > img.width or a.bbox.y2 > img.height:
            raise InvariantViolation(f"annotation box {a.bbox} outside image {a.image} ({img.width}x{img.height})")


@dataclass(frozen=True)
class Dataset:
    """One source dataset: its label space, images and ground-truth-or-better labels."""

    id: str
    label_space: LabelSpace
    images: tuple[ImageRecord, ...]
    annotations: tuple[Annotation, ...]

    def __post_init__(self):
        object.__setattr__(self, "images", tuple(self.images))
        object.__setattr__(self, "annotations", tuple(self.annotations))
        if not self.id:
            raise InvariantViolation("dataset id must be non-empty")
        _check_annotations(self.label_space, self.images, self.annotations)

    def image_by_id(self, image_id: str) -> ImageRecord:
        matches = [img for img in self.images if img.id == image_id]
        if not matches:
            raise KeyError(image_id)
        if len(matches) > 1:
            raise InvariantViolation(f"image id {image_id!r} is ambiguous across source datasets")
        return matches[0]


@dataclass(frozen=True)
class UnifiedDataset:
    """The merged dataset over the unified label space, mixed provenance."""

    label_space: LabelSpace
    images: tuple[ImageRecord, ...]
    annotations: tuple[Annotation, ...]

    def __post_init__(self):
        object.__setattr__(self, "images", tuple(self.images))
        object.__setattr__(self, "annotations", tuple(self.annotations))
        _check_annotations(self.label_space, self.images, self.annotations)
        if len(set(self.annotations)) != len(self.annotations):
            raise InvariantViolation("unified dataset contains byte-identical duplicate annotations")


def clamp_box(b: BoundingBox, img: ImageRecord) -> BoundingBox:
    """Intersect a box with its image frame.

    A box already inside the frame comes back unchanged (bit-exact, no
    float round trip). Raises DegenerateBox when the intersection has zero
    area (box fully outside, or touching the frame edge only).
    """
    if b.x >= 0 and b.y >= 0 and b.x2 <= img.width and b.y2 <= img.height:
        return b
    x1 = max(b.x, 0.0)
    y1 = max(b.y, 0.0)
    x2 = min(b.x2, float(img.width))
    y2 = min(b.y2, float(img.height))
    if x2 - x1 <= 0 or y2 - y1 <= 0:
        raise DegenerateBox(f"box {b} has no area inside {img.width}x{img.height} image")
    return BoundingBox(x1, y1, x2 - x1, y2 - y1)
