"""Builds the unified label space from per-dataset spaces and remaps into it.

Two source categories land on the same unified category exactly when their
names are equal after lowercasing and alias resolution. Alias groups are
explicit user configuration; nothing is merged by string similarity.
Unified ids are assigned by lexicographic sort of the canonical names so the
result is identical across runs, machines and input orderings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import (
    Annotation,
    CategorySpec,
    Dataset,
    Detection,
    InvariantViolation,
    LabelFuseError,
    LabelSpace,
)


class AliasConflict(LabelFuseError, ValueError):
    """A name is claimed by two alias groups, or by a group and a category."""


class EmptyInput(LabelFuseError, ValueError):
    """No label spaces were given to unify."""


class TableMismatch(LabelFuseError, ValueError):
    """A remap table does not belong to, or does not cover, the dataset."""


@dataclass(frozen=True)
class AliasGroup:
    """One merge rule: every member name resolves to the canonical name."""

    canonical: str
    members: frozenset[str]

    def __post_init__(self):
        canonical = self.canonical.strip().lower()
        if not canonical:
            raise InvariantViolation("alias group canonical must be non-empty")
        object.__setattr__(self, "canonical", canonical)
        object.__setattr__(self, "members", frozenset(m.strip().lower() for m in self.members if m.strip()))

    @property
    def texts(self) -> frozenset[str]:
        return self.members | {self.canonical}


@dataclass(frozen=True)
class AliasMap:
    """User-curated alias groups; no name may appear in two groups."""

    groups: tuple[AliasGroup, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        seen: dict[str, str] = {}
        for g in self.groups:
            for text in sorted(g.texts):
                if text in seen and seen[text] != g.canonical:
                    raise AliasConflict(f"name {text!r} appears in groups {seen[text]!r} and {g.canonical!r}")
                if text in seen:
                    raise AliasConflict(f"name {text!r} appears in two groups with canonical {g.canonical!r}")
                seen[text] = g.canonical
        object.__setattr__(self, "_canonical_by_text", seen)

    def resolve(self, name: str) -> str:
        name = name.strip().lower()
        return self._canonical_by_text.get(name, name)


def parse_alias_map(text: str) -> AliasMap:
    """Parse the alias map format: one ``canonical = member, member, ...`` per line."""
    groups = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise AliasConflict(f"aliases:{lineno}: expected 'canonical = member1, member2, ...'")
        canonical, _, members = line.partition("=")
        groups.append(AliasGroup(canonical, frozenset(m for m in (p.strip() for p in members.split(",")) if m)))
    return AliasMap(tuple(groups))


@dataclass(frozen=True)
class RemapTable:
    """Total mapping from one dataset's category ids into unified ids."""

    dataset_id: str
    mapping: dict[int, int] = field(default_factory=dict)

    def apply(self, category_id: int) -> int:
        if category_id not in self.mapping:
            raise TableMismatch(f"category {category_id} not covered by remap table for {self.dataset_id!r}")
        return self.mapping[category_id]

    @property
    def native_unified_ids(self) -> frozenset[int]:
        """The unified-space ids this dataset natively annotates."""
        return frozenset(self.mapping.values())


def build_unified_space(
    spaces: list[tuple[str, LabelSpace]],
    aliases: AliasMap = AliasMap(),
) -> tuple[LabelSpace, list[RemapTable]]:
    """Union of the input label spaces after alias resolution.

    Returns the unified space (ids assigned by lexicographic name sort) and
    one remap table per input space, in input order.
    """
    if not spaces:
        raise EmptyInput("no label spaces to unify")

    resolved_names: set[str] = set()
    for _, space in spaces:
        for cat in space.categories:
            resolved_names.add(aliases.resolve(cat.canonical_name))

    ordered = sorted(resolved_names)
    unified_id = {name: i for i, name in enumerate(ordered)}

    # Collect every spelling that fed a unified category, as its aliases.
    collected: dict[str, set[str]] = {name: set() for name in ordered}
    for g in aliases.groups:
        if g.canonical in collected:
            collected[g.canonical] |= g.members
    for _, space in spaces:
        for cat in space.categories:
            r = aliases.resolve(cat.canonical_name)
            collected[r].add(cat.canonical_name)
            collected[r] |= cat.aliases

    try:
        unified = LabelSpace(
            tuple(
                CategorySpec(i, name, frozenset(collected[name] - {name}))
                for i, name in enumerate(ordered)
            )
        )
    except InvariantViolation as e:
        raise AliasConflict(f"alias resolution collides with a category name: {e}") from None

    tables = []
    for dataset_id, space in spaces:
        mapping = {
            cat.id: unified_id[aliases.resolve(cat.canonical_name)] for cat in space.categories
        }
        tables.append(RemapTable(dataset_id, mapping))
    return unified, tables


def remap_dataset(d: Dataset, t: RemapTable, target: LabelSpace) -> Dataset:
    """Rewrite a dataset's annotation categories through a remap table.

    Images and boxes are untouched; only category ids change and the dataset
    adopts the target (unified) label space.
    """
    if t.dataset_id != d.id:
        raise TableMismatch(f"table is for {t.dataset_id!r}, dataset is {d.id!r}")
    for cat in d.label_space.categories:
        if cat.id not in t.mapping:
            raise TableMismatch(f"table for {t.dataset_id!r} does not cover category {cat.id}")
        if not 0 <= t.mapping[cat.id] < len(target):
            raise TableMismatch(f"table maps {cat.id} to {t.mapping[cat.id]}, outside the target space")
    annotations = tuple(
        Annotation(a.image, t.mapping[a.category_id], a.bbox, a.provenance) for a in d.annotations
    )
    return Dataset(d.id, target, d.images, annotations)


def remap_detections(dets: list[Detection], t: RemapTable) -> list[Detection]:
    """Rewrite detections from a model's native label space into unified ids."""
    return [
        Detection(d.image_id, t.apply(d.category_id), d.bbox, d.score, d.model_id) for d in dets
    ]
