# vectors.py
# SPDX-License-Identifier: MIT
"""Vector math and media-averaged template construction.

Vectors are stored as float32; every reduction accumulates in float64 and
casts back once at the end.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyTemplate, InvalidInput, ZeroVector
from .log import get_logger
from .records import Dataset, Sample, Template, as_embedding, group_by, template_attributes

__all__ = [
    "cosine_distance",
    "cosine_similarity",
    "l2_normalize",
    "normalize_rows",
    "media_average",
    "build_templates",
]

log = get_logger(__name__)


def _norm64(a: np.ndarray) -> float:
    return float(np.sqrt(np.dot(a, a)))


def _pair64(a: Iterable[float] | np.ndarray, b: Iterable[float] | np.ndarray):
    a64 = np.asarray(a, dtype=np.float64).ravel()
    b64 = np.asarray(b, dtype=np.float64).ravel()
    if a64.shape != b64.shape:
        raise DimensionMismatch(f"dimension {a64.shape[0]} vs {b64.shape[0]}")
    return a64, b64


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Return (a·b)/(‖a‖‖b‖) computed in float64, clamped to [-1, 1].

    Raises:
        ZeroVector: If either input has zero norm.
        DimensionMismatch: If the inputs differ in length.
    """
    a64, b64 = _pair64(a, b)
    na, nb = _norm64(a64), _norm64(b64)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine is undefined for a zero-norm vector")
    sim = float(np.dot(a64 / na, b64 / nb))
    return min(1.0, max(-1.0, sim))


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Return 1 − cosine similarity, in [0, 2]."""
    return 1.0 - cosine_similarity(a, b)


def l2_normalize(a: np.ndarray) -> np.ndarray:
    """Return ``a / ‖a‖`` as a float32 embedding.

    Raises:
        ZeroVector: If ``a`` has zero norm.
    """
    a64 = np.asarray(a, dtype=np.float64).ravel()
    norm = _norm64(a64)
    if norm == 0.0:
        raise ZeroVector("cannot normalize a zero-norm vector")
    return as_embedding(a64 / norm)


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """Row-normalize an (n, d) matrix in float64.

    Raises:
        ZeroVector: If any row has zero norm; the message names the row.
    """
    m64 = np.asarray(matrix, dtype=np.float64)
    norms = np.sqrt(np.einsum("ij,ij->i", m64, m64))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroVector(f"row {int(zero[0])} has zero norm")
    return m64 / norms[:, None]


def media_average(samples: Sequence[Sample], *, renormalize: bool = False) -> np.ndarray:
    """Two-stage mean: frames within each media, then media with equal weight.

    Samples are ordered by (media_id, sample_id) before accumulation so the
    result is bit-identical under any permutation of the input.

    Args:
        samples (Sequence[Sample]): Samples of one template.
        renormalize (bool): L2-normalize the result.

    Returns:
        np.ndarray: Read-only float32 vector of dimension d.

    Raises:
        EmptyTemplate: If ``samples`` is empty.
        DimensionMismatch: If samples differ in dimension.
        InvalidInput: If samples span several templates.
    """
    if not samples:
        raise EmptyTemplate("media_average needs at least one sample")
    template_ids = {s.template_id for s in samples}
    if len(template_ids) != 1:
        raise InvalidInput(f"samples span several templates: {sorted(template_ids)}")
    dims = {s.dimension for s in samples}
    if len(dims) != 1:
        raise DimensionMismatch(f"samples mix dimensions {sorted(dims)}")

    ordered = sorted(samples, key=lambda s: (s.media_id, s.sample_id))
    per_media = group_by(ordered, "media_id")
    means = np.stack(
        [
            np.stack([s.embedding for s in per_media[mid]]).astype(np.float64).mean(axis=0)
            for mid in sorted(per_media)
        ]
    )
    out = means.mean(axis=0)
    if renormalize:
        return l2_normalize(out)
    return as_embedding(out)


def build_templates(
    dataset: Dataset,
    *,
    template_ids: Iterable[int] | None = None,
    renormalize: bool = False,
) -> list[Template]:
    """Media-average every template of a dataset.

    Args:
        dataset (Dataset): Source samples.
        template_ids (Iterable[int] | None): Restrict to these templates.
        renormalize (bool): L2-normalize each template vector.

    Returns:
        list[Template]: Templates ordered by template id, one representation
        each, with collapsed attributes.
    """
    groups = dataset.by_template()
    wanted = sorted(set(template_ids)) if template_ids is not None else list(groups)
    templates: list[Template] = []
    for tid in wanted:
        samples = groups.get(tid)
        if not samples:
            raise EmptyTemplate(f"template {tid} has no samples")
        subjects = {s.subject_id for s in samples}
        if len(subjects) != 1:
            log.warning("Template %s mixes subjects %s; treating as UNKNOWN.", tid, subjects)
        subject = subjects.pop() if len(subjects) == 1 else None
        templates.append(
            Template(
                template_id=tid,
                subject_id=subject,
                representations=(media_average(samples, renormalize=renormalize),),
                attributes=template_attributes(samples),
            )
        )
    return templates
