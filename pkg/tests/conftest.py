import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from faceclust.core.records import (  # noqa: E402
    AttributeRecord,
    Dataset,
    Gender,
    Modality,
    Sample,
)

DATA_DIR = Path(__file__).resolve().parent / "data"


def make_sample(
    sample_id: int,
    embedding,
    *,
    subject_id: int | None = 1,
    template_id: int = 1,
    media_id: int | None = None,
    modality: Modality = Modality.IMAGE,
    gender: Gender = Gender.MALE,
    skin_tone: int | None = 1,
) -> Sample:
    return Sample(
        sample_id=sample_id,
        subject_id=subject_id,
        template_id=template_id,
        media_id=sample_id if media_id is None else media_id,
        modality=modality,
        attributes=AttributeRecord(gender=gender, skin_tone=skin_tone),
        embedding=np.asarray(embedding, dtype=np.float32),
    )


@pytest.fixture
def sample_factory():
    return make_sample


@pytest.fixture
def tiny_dataset() -> Dataset:
    """Two subjects, two templates each, one video template with frames."""
    samples = [
        make_sample(1, [1.0, 0.0], subject_id=1, template_id=10),
        make_sample(2, [0.9, 0.1], subject_id=1, template_id=11, media_id=20,
                    modality=Modality.VIDEO_FRAME),
        make_sample(3, [0.8, 0.2], subject_id=1, template_id=11, media_id=20,
                    modality=Modality.VIDEO_FRAME),
        make_sample(4, [0.0, 1.0], subject_id=2, template_id=12, gender=Gender.FEMALE,
                    skin_tone=3),
        make_sample(5, [0.1, 0.9], subject_id=2, template_id=13, gender=Gender.FEMALE,
                    skin_tone=3),
    ]
    return Dataset(samples=tuple(samples), dimension=2, provenance="test")
