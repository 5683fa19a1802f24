import numpy as np
import pytest

from annotation.utils.manifest import load_manifest
from annotation.utils.selection_table import read_annotation_dir
from annotation.utils.wave_io import read_wave
from pipeline.config import load_config
from pipeline.exceptions import PreconditionError
from pipeline.fixtures import ARCHETYPES, PAIRED_DELAY_S, SESSION_STRIDE_S, generate_fixtures, plant_calls


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    return generate_fixtures(tmp_path_factory.mktemp("corpus"), seed=3, sessions=2, session_s=10.0, calls_per_recording=2)


def test_every_archetype_is_recorded_each_session(corpus):
    names = [recording.source_id for recording in corpus.manifest]
    assert len(names) == 2 * (len(ARCHETYPES) + 1)
    assert "burst_b_s2" in names and "tone_a_s1" in names
    assert corpus.manifest.label_set == [archetype.name for archetype in ARCHETYPES]
    assert corpus.manifest.session_group("burst_b_s1") == ("burst_a_s1", "burst_b_s1")


def test_written_files_match_the_returned_corpus(corpus):
    manifest = load_manifest(corpus.root / "manifest.txt")
    assert [(r.source_id, r.start, r.enclosure) for r in manifest] == [
        (r.source_id, r.start, r.enclosure) for r in corpus.manifest
    ]
    annotations = read_annotation_dir(corpus.root / "tables", manifest)
    assert sorted(annotations, key=str) == sorted(corpus.annotations, key=str)

    clip = read_wave(manifest.get("chirp_a_s2").path)
    assert clip.sample_rate == 16000 and clip.duration == pytest.approx(10.0)
    assert np.max(np.abs(clip.samples)) <= 1.0


def test_sessions_are_spaced_in_time(corpus):
    first = corpus.manifest.get("tone_a_s1").start
    second = corpus.manifest.get("tone_a_s2").start
    assert (second - first).total_seconds() == SESSION_STRIDE_S


def test_paired_recorder_hears_calls_later(corpus):
    a = [x for x in corpus.annotations if x.source_id == "burst_a_s1"]
    b = [x for x in corpus.annotations if x.source_id == "burst_b_s1"]
    assert [y.begin_s - x.begin_s for x, y in zip(a, b)] == pytest.approx([PAIRED_DELAY_S] * len(a))


def test_generated_config_loads(corpus):
    config = load_config(corpus.config_path)
    assert config.seed == 3
    assert config.path("manifest") == (corpus.root / "manifest.txt").resolve()
    assert config.frame.fft_size == 512


def test_generation_is_reproducible(tmp_path):
    first = generate_fixtures(tmp_path / "a", seed=1, sessions=1, session_s=6.0, calls_per_recording=1)
    second = generate_fixtures(tmp_path / "b", seed=1, sessions=1, session_s=6.0, calls_per_recording=1)
    assert first.annotations == second.annotations
    assert (tmp_path / "a" / "audio" / "tone_a_s1.wav").read_bytes() == (tmp_path / "b" / "audio" / "tone_a_s1.wav").read_bytes()


def test_calls_must_fit_their_slots():
    with pytest.raises(PreconditionError):
        plant_calls(np.random.default_rng(0), ARCHETYPES[2], 10, 5.0, (0.0, 10.0), 16000)
