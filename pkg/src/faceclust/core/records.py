# records.py
# SPDX-License-Identifier: MIT
"""Data model shared by every faceclust module.

Samples carry one media item's feature vector plus identity, media,
template and attribute metadata; templates carry one or more aggregated
representations; a dataset is an ordered, validated collection of samples.
All records are frozen and their arrays are read-only, so they can be
shared between worker threads without copies.
"""

from __future__ import annotations

import hashlib
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, InvalidInput

__all__ = [
    "Gender",
    "Modality",
    "Role",
    "SKIN_TONES",
    "AttributeRecord",
    "Sample",
    "Template",
    "Dataset",
    "SplitEntry",
    "as_embedding",
    "sha256_text",
]

SKIN_TONES = range(1, 7)


class Gender(str, Enum):
    MALE = "male"
    FEMALE = "female"
    UNKNOWN = "unknown"


class Modality(str, Enum):
    IMAGE = "image"
    VIDEO_FRAME = "frame"


class Role(str, Enum):
    GALLERY1 = "gallery1"
    GALLERY2 = "gallery2"
    PROBE = "probe"

    @property
    def is_gallery(self) -> bool:
        return self is not Role.PROBE


def sha256_text(text: str) -> str:
    """Return hex sha256 of UTF-8 encoded text (no BOM)."""
    h = hashlib.sha256()
    h.update(text.encode("utf-8", "strict"))
    return h.hexdigest()


def as_embedding(values: Iterable[float] | np.ndarray) -> np.ndarray:
    """Return a read-only, contiguous float32 vector.

    Raises:
        InvalidInput: If the input is not one-dimensional or is empty.
    """
    arr = np.ascontiguousarray(np.asarray(values, dtype=np.float32))
    if arr.ndim != 1 or arr.shape[0] < 1:
        raise InvalidInput(f"embedding must be a non-empty 1-D vector; got shape {arr.shape}")
    if arr.flags.writeable:
        arr = arr.copy()
        arr.flags.writeable = False
    return arr


@dataclass(frozen=True, slots=True)
class AttributeRecord:
    """Ground-truth soft-biometric attributes of a sample or template.

    Attributes:
        gender (Gender): MALE, FEMALE or UNKNOWN.
        skin_tone (int | None): Bucket 1..6, or None for UNKNOWN.
    """

    gender: Gender = Gender.UNKNOWN
    skin_tone: int | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.gender, Gender):
            object.__setattr__(self, "gender", Gender(self.gender))
        if self.skin_tone is not None and self.skin_tone not in SKIN_TONES:
            raise InvalidInput(f"skin_tone must be in 1..6 or UNKNOWN; got {self.skin_tone!r}")

    def value_of(self, key: str) -> Gender | int | None:
        """Return the attribute named ``key``; None when UNKNOWN."""
        if key == "gender":
            return None if self.gender is Gender.UNKNOWN else self.gender
        if key == "skin_tone":
            return self.skin_tone
        raise InvalidInput(f"unknown attribute {key!r}; expected 'gender' or 'skin_tone'")


@dataclass(frozen=True, slots=True)
class Sample:
    """One media item's feature vector and metadata.

    Attributes:
        sample_id (int): Unique within a dataset.
        subject_id (int | None): Identity, or None when UNKNOWN.
        template_id (int): Template the sample belongs to.
        media_id (int): Image or video the sample came from; all frames of a
            media share its template.
        modality (Modality): IMAGE or VIDEO_FRAME.
        attributes (AttributeRecord): Ground-truth attributes.
        embedding (np.ndarray): Read-only float32 feature vector.
    """

    sample_id: int
    subject_id: int | None
    template_id: int
    media_id: int
    modality: Modality
    attributes: AttributeRecord
    embedding: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "embedding", as_embedding(self.embedding))
        if not isinstance(self.modality, Modality):
            object.__setattr__(self, "modality", Modality(self.modality))

    @property
    def dimension(self) -> int:
        return int(self.embedding.shape[0])


@dataclass(frozen=True, slots=True)
class Template:
    """Aggregated representation of one enrollment or query.

    Attributes:
        template_id (int): Template identifier.
        subject_id (int | None): Identity, or None when UNKNOWN.
        representations (tuple[np.ndarray, ...]): One vector for mean
            aggregation, k vectors for cluster aggregation.
        attributes (AttributeRecord): Template-level attributes.
    """

    template_id: int
    subject_id: int | None
    representations: tuple[np.ndarray, ...]
    attributes: AttributeRecord = field(default_factory=AttributeRecord)

    def __post_init__(self) -> None:
        reps = tuple(as_embedding(r) for r in self.representations)
        if not reps:
            raise InvalidInput(f"template {self.template_id} has no representations")
        dims = {r.shape[0] for r in reps}
        if len(dims) != 1:
            raise DimensionMismatch(
                f"template {self.template_id} mixes dimensions {sorted(dims)}"
            )
        object.__setattr__(self, "representations", reps)

    @property
    def dimension(self) -> int:
        return int(self.representations[0].shape[0])

    def matrix(self) -> np.ndarray:
        """Stack representations into a (k, d) float32 array."""
        return np.stack(self.representations)


@dataclass(frozen=True, slots=True)
class SplitEntry:
    """Protocol role of a template.

    Attributes:
        template_id (int): Template identifier.
        role (Role): gallery1, gallery2 or probe.
        mated_gallery_template_id (int | None): For probes, the gallery
            template of the same subject (None for open-set probes). When a
            probe is mated in several galleries, one entry per gallery is
            written.
    """

    template_id: int
    role: Role
    mated_gallery_template_id: int | None = None


@dataclass(frozen=True, slots=True)
class Dataset:
    """Validated, ordered collection of samples.

    Attributes:
        samples (tuple[Sample, ...]): Samples in storage order.
        dimension (int): Shared embedding dimension d.
        provenance (str): Digest of the configuration that produced the data.
    """

    samples: tuple[Sample, ...]
    dimension: int
    provenance: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        self.validate()

    def validate(self) -> None:
        """Check dimension, id uniqueness and media→template integrity.

        Raises:
            DimensionMismatch: If any sample differs from ``dimension``.
            InvalidInput: On duplicate sample ids, a media spread over
                several templates, or a non-finite embedding.
        """
        if self.dimension < 1:
            raise InvalidInput("dataset dimension must be >= 1")
        seen: set[int] = set()
        media_owner: dict[int, int] = {}
        for s in self.samples:
            if s.dimension != self.dimension:
                raise DimensionMismatch(
                    f"sample {s.sample_id} has dimension {s.dimension}, expected {self.dimension}"
                )
            if s.sample_id in seen:
                raise InvalidInput(f"duplicate sample_id {s.sample_id}")
            seen.add(s.sample_id)
            owner = media_owner.setdefault(s.media_id, s.template_id)
            if owner != s.template_id:
                raise InvalidInput(
                    f"media {s.media_id} appears in templates {owner} and {s.template_id}"
                )
            if not np.all(np.isfinite(s.embedding)):
                raise InvalidInput(f"sample {s.sample_id} has a non-finite embedding")

    def __len__(self) -> int:
        return len(self.samples)

    def matrix(self) -> np.ndarray:
        """Return all embeddings as an (n, d) float32 array in storage order."""
        if not self.samples:
            return np.zeros((0, self.dimension), dtype=np.float32)
        return np.stack([s.embedding for s in self.samples])

    def by_template(self) -> dict[int, list[Sample]]:
        """Group samples by template id, ordered by template id."""
        groups: dict[int, list[Sample]] = {}
        for s in self.samples:
            groups.setdefault(s.template_id, []).append(s)
        return {tid: groups[tid] for tid in sorted(groups)}

    def subjects_by_template(self) -> dict[int, int | None]:
        return {tid: samples[0].subject_id for tid, samples in self.by_template().items()}

    def subset(self, template_ids: Sequence[int] | set[int]) -> Dataset:
        keep = set(template_ids)
        return Dataset(
            samples=tuple(s for s in self.samples if s.template_id in keep),
            dimension=self.dimension,
            provenance=self.provenance,
        )


def template_attributes(samples: Sequence[Sample]) -> AttributeRecord:
    """Collapse sample attributes to one record; disagreement becomes UNKNOWN."""
    genders = {s.attributes.gender for s in samples}
    tones = {s.attributes.skin_tone for s in samples}
    gender = genders.pop() if len(genders) == 1 else Gender.UNKNOWN
    tone = tones.pop() if len(tones) == 1 else None
    return AttributeRecord(gender=gender, skin_tone=tone)


def group_by(items: Iterable[Sample], key: str) -> Mapping[int, list[Sample]]:
    out: dict[int, list[Sample]] = {}
    for s in items:
        out.setdefault(getattr(s, key), []).append(s)
    return out
