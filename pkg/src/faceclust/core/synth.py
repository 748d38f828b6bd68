# synth.py
# SPDX-License-Identifier: MIT
"""Deterministic synthetic embedding datasets.

Every subject gets a prototype drawn uniformly on the unit sphere; a
sample is ``normalize(prototype + noise)`` with per-coordinate noise
N(0, σ²/d), so the expected squared noise norm is σ² whatever the
dimension. Subjects carry fixed gender and skin-tone attributes, enrolled
subjects put one template in each gallery, and open-set subjects appear
only as probes.

Multi-modal probes draw the second half of their media from a pose
regime ``normalize(α·prototype + β·pose + noise)`` whose pose direction
comes from a small pool shared by all subjects. Averaging such a probe
blends two unrelated directions; clustering its features can keep them
apart.

All draws come from one SplitMix64 stream in a fixed order, so a seed
reproduces the dataset bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .config import SynthConfig, to_plain_dict
from .errors import InvalidConfig
from .log import get_logger
from .records import (
    AttributeRecord,
    Dataset,
    Gender,
    Modality,
    Role,
    Sample,
    SplitEntry,
    sha256_text,
)
from .rng import SplitMix64
from .vectors import normalize_rows

__all__ = ["SynthResult", "generate", "config_digest", "similarity_margin"]

log = get_logger(__name__)

_GALLERY_ROLES = (Role.GALLERY1, Role.GALLERY2)


@dataclass(frozen=True, slots=True)
class SynthResult:
    """Generated samples plus the probe/gallery split.

    Attributes:
        dataset (Dataset): Samples ordered by template, media and frame.
        splits (tuple[SplitEntry, ...]): One row per gallery template, one
            row per (probe, gallery) mate, and one mate-less row per
            open-set probe.
        open_set_subjects (tuple[int, ...]): Subjects with no gallery template.
        multimodal_templates (tuple[int, ...]): Probe templates that mix the
            pose regime.
    """

    dataset: Dataset
    splits: tuple[SplitEntry, ...]
    open_set_subjects: tuple[int, ...] = ()
    multimodal_templates: tuple[int, ...] = ()


def config_digest(config: SynthConfig) -> str:
    """SHA-256 of the canonical JSON form of ``config``."""
    return sha256_text(json.dumps(to_plain_dict(config), sort_keys=True, separators=(",", ":")))


def _unit_rows(rng: SplitMix64, rows: int, dim: int) -> np.ndarray:
    return normalize_rows(rng.normal_array(rows * dim).reshape(rows, dim))


def _draw_tone(rng: SplitMix64, tones: list[int], cumulative: np.ndarray) -> int:
    u = rng.uniform() * float(cumulative[-1])
    idx = int(np.searchsorted(cumulative, u, side="right"))
    return tones[min(idx, len(tones) - 1)]


def generate(config: SynthConfig) -> SynthResult:
    """Generate a dataset and its split.

    Raises:
        InvalidConfig: If ``config`` violates its documented domains.
    """
    config.validate()
    rng = SplitMix64(config.seed)
    d = config.dim
    noise_scale = config.within_subject_noise / math.sqrt(d)

    prototypes = _unit_rows(rng, config.num_subjects, d)
    poses = _unit_rows(rng, config.num_poses, d)

    tones = sorted(int(t) for t in config.skin_tone_probabilities)
    cumulative = np.cumsum([float(config.skin_tone_probabilities[t]) for t in tones])
    attributes = []
    for _ in range(config.num_subjects):
        gender = Gender.MALE if rng.uniform() < config.male_probability else Gender.FEMALE
        tone = _draw_tone(rng, tones, cumulative)
        attributes.append(AttributeRecord(gender=gender, skin_tone=tone))

    n_open = min(
        int(math.floor(config.openset_fraction * config.num_subjects + 0.5)),
        config.num_subjects - 1,
    )
    order = rng.permutation(config.num_subjects)
    open_set = {int(s) for s in order[:n_open]}

    samples: list[Sample] = []
    splits: list[SplitEntry] = []
    multimodal: list[int] = []
    template_id = media_id = sample_id = 0
    galleries = _GALLERY_ROLES[: config.num_galleries]
    probes_per_subject = config.templates_per_subject - config.num_galleries

    for subject in range(config.num_subjects):
        proto = prototypes[subject]
        enrolled = subject not in open_set
        roles = (list(galleries) if enrolled else []) + [Role.PROBE] * probes_per_subject
        gallery_ids: list[int] = []
        for role in roles:
            mixed = role is Role.PROBE and rng.uniform() < config.multimodal_fraction
            pose = poses[rng.randbelow(config.num_poses)] if mixed else None
            if mixed:
                multimodal.append(template_id)
            for m in range(config.media_per_template):
                video = rng.uniform() < config.video_fraction
                frames = config.frames_per_media if video else 1
                noise = rng.normal_array(frames * d).reshape(frames, d) * noise_scale
                if pose is not None and m >= config.media_per_template // 2 and m > 0:
                    base = config.pose_identity_weight * proto + config.pose_weight * pose
                    raw = base + noise * config.pose_noise_scale
                else:
                    raw = proto + noise
                vectors = normalize_rows(raw)
                modality = Modality.VIDEO_FRAME if video else Modality.IMAGE
                for row in vectors:
                    samples.append(
                        Sample(
                            sample_id=sample_id,
                            subject_id=subject,
                            template_id=template_id,
                            media_id=media_id,
                            modality=modality,
                            attributes=attributes[subject],
                            embedding=row,
                        )
                    )
                    sample_id += 1
                media_id += 1
            if role.is_gallery:
                gallery_ids.append(template_id)
                splits.append(SplitEntry(template_id, role))
            elif enrolled:
                for gid in gallery_ids:
                    splits.append(SplitEntry(template_id, Role.PROBE, gid))
            else:
                splits.append(SplitEntry(template_id, Role.PROBE, None))
            template_id += 1

    if not samples:
        raise InvalidConfig("synth: configuration produced no samples")
    dataset = Dataset(samples=tuple(samples), dimension=d, provenance=config_digest(config))
    log.info(
        "Generated %d samples in %d templates for %d subjects (%d open-set).",
        len(samples),
        template_id,
        config.num_subjects,
        len(open_set),
    )
    return SynthResult(
        dataset=dataset,
        splits=tuple(splits),
        open_set_subjects=tuple(sorted(open_set)),
        multimodal_templates=tuple(multimodal),
    )


def similarity_margin(dataset: Dataset) -> float:
    """Mean within-subject minus mean between-subject sample cosine."""
    unit = normalize_rows(dataset.matrix())
    subjects = np.array(
        [-1 if s.subject_id is None else s.subject_id for s in dataset.samples], dtype=np.int64
    )
    sims = unit @ unit.T
    same = subjects[:, None] == subjects[None, :]
    np.fill_diagonal(same, False)
    diff = subjects[:, None] != subjects[None, :]
    if not same.any() or not diff.any():
        raise InvalidConfig("similarity_margin needs at least two subjects with repeated samples")
    return float(sims[same].mean() - sims[diff].mean())
