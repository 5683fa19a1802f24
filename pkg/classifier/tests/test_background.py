from pathlib import Path

import pytest

from annotation.records import BACKGROUND_LABEL, Annotation, TimeInterval
from annotation.utils.manifest import CorpusManifest, Recording
from classifier.evaluation.background import sample_background
from pipeline.exceptions import AnnotationReferenceError, ExhaustionError


def _manifest():
    recordings = [
        Recording("tone_1", Path("tone_1.wav"), None, "A", "tone"),
        Recording("tone_2", Path("tone_2.wav"), None, "A", "tone"),
        Recording("chirp_1", Path("chirp_1.wav"), None, "A", "chirp"),
    ]
    return CorpusManifest(recordings, ["tone", "chirp", BACKGROUND_LABEL])


def _annotations():
    return [
        Annotation("tone_1", TimeInterval(1.0, 1.5), "tone"),
        Annotation("tone_1", TimeInterval(4.0, 4.8), "tone"),
        Annotation("tone_2", TimeInterval(2.0, 2.3), "tone"),
        Annotation("chirp_1", TimeInterval(0.5, 1.1), "chirp"),
        Annotation("chirp_1", TimeInterval(7.0, 7.4), "chirp"),
    ]


DURATIONS = {"tone_1": 10.0, "tone_2": 20.0, "chirp_1": 10.0}


def test_one_background_chunk_per_species_chunk_with_matching_duration():
    annotations = _annotations()
    sampled = sample_background(DURATIONS, annotations, _manifest(), seed=3)

    assert all(chunk.label == BACKGROUND_LABEL for chunk in sampled)
    assert sorted(round(c.duration, 9) for c in sampled) == sorted(round(a.duration, 9) for a in annotations)
    for chunk in sampled:
        assert 0.0 <= chunk.begin_s and chunk.end_s <= DURATIONS[chunk.source_id]


def test_background_stays_on_the_species_recordings():
    sampled = sample_background(DURATIONS, _annotations(), _manifest(), seed=5)
    tone_like = [c for c in sampled if c.source_id.startswith("tone")]
    chirp_like = [c for c in sampled if c.source_id == "chirp_1"]
    assert len(tone_like) == 3 and len(chirp_like) == 2


def test_background_overlaps_neither_annotations_nor_each_other():
    annotations = _annotations()
    sampled = sample_background(DURATIONS, annotations, _manifest(), seed=11)
    taken = annotations + sampled
    for i, first in enumerate(taken):
        for second in taken[i + 1:]:
            if first.source_id == second.source_id:
                assert not first.interval.overlaps(second.interval)


def test_sampling_is_reproducible_for_a_seed():
    first = sample_background(DURATIONS, _annotations(), _manifest(), seed=7)
    second = sample_background(DURATIONS, _annotations(), _manifest(), seed=7)
    other = sample_background(DURATIONS, _annotations(), _manifest(), seed=8)
    assert first == second
    assert first != other


def test_exhausted_recordings_raise_with_the_shortfall():
    annotations = [Annotation("chirp_1", TimeInterval(0.0, 6.0), "chirp")]
    with pytest.raises(ExhaustionError) as excinfo:
        sample_background(DURATIONS, annotations, _manifest(), seed=0, retry_cap=200)
    assert excinfo.value.shortfall_chunks == 1
    assert excinfo.value.shortfall_s == pytest.approx(6.0)


def test_unknown_recording_duration_is_reported():
    durations = {"tone_1": 10.0, "chirp_1": 10.0}
    with pytest.raises(AnnotationReferenceError, match="tone_2"):
        sample_background(durations, _annotations(), _manifest(), seed=0)
