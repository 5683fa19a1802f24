from datetime import datetime, timezone

import pytest

from annotation.utils.manifest import load_manifest, write_manifest
from pipeline.exceptions import AnnotationReferenceError, ConfigError

MANIFEST = """# two enclosures
label_set = tone, chirp, background
pair = tone_a_s1 tone_b_s1
source_id\tpath\tstart\trecorder\tenclosure
tone_a_s1\taudio/tone_a_s1.wav\t2021-03-01T06:00:00\tA\ttone
tone_b_s1\taudio/tone_b_s1.wav\t2021-03-01T06:00:00\tB\ttone
tone_a_s0\taudio/tone_a_s0.wav\t2021-02-28T06:00:00+00:00\tA\ttone
chirp_a_s1\taudio/chirp_a_s1.wav\t-\tA\tchirp
"""


def _write(tmp_path, text):
    path = tmp_path / "manifest.txt"
    path.write_text(text, encoding="utf-8")
    return path


def test_manifest_is_parsed(tmp_path):
    manifest = load_manifest(_write(tmp_path, MANIFEST))
    assert manifest.label_set == ["tone", "chirp", "background"]
    assert len(manifest) == 4 and "chirp_a_s1" in manifest
    assert manifest.get("tone_a_s1").path == (tmp_path / "audio" / "tone_a_s1.wav").resolve()
    assert manifest.get("tone_a_s1").start == datetime(2021, 3, 1, 6, tzinfo=timezone.utc)
    assert manifest.get("chirp_a_s1").start is None
    assert manifest.species == ["tone", "chirp"]


def test_recordings_for_a_species_are_chronological(tmp_path):
    manifest = load_manifest(_write(tmp_path, MANIFEST))
    assert [r.source_id for r in manifest.recordings_for("tone")] == ["tone_a_s0", "tone_a_s1", "tone_b_s1"]


def test_session_groups(tmp_path):
    manifest = load_manifest(_write(tmp_path, MANIFEST))
    assert manifest.session_group("tone_b_s1") == ("tone_a_s1", "tone_b_s1")
    assert manifest.session_group("chirp_a_s1") == ("chirp_a_s1",)
    with pytest.raises(AnnotationReferenceError):
        manifest.session_group("nope")


@pytest.mark.parametrize(
    "text, line",
    [
        (MANIFEST.replace("pair = tone_a_s1 tone_b_s1", "pair = tone_a_s1"), 3),
        (MANIFEST.replace("label_set", "labels"), 2),
        (MANIFEST.replace("2021-02-28T06:00:00+00:00", "yesterday"), 7),
    ],
)
def test_errors_name_the_line(tmp_path, text, line):
    with pytest.raises(ConfigError) as excinfo:
        load_manifest(_write(tmp_path, text))
    assert excinfo.value.line == line


def test_pairing_must_refer_to_listed_recordings(tmp_path):
    with pytest.raises(ConfigError, match="ghost"):
        load_manifest(_write(tmp_path, MANIFEST.replace("pair = tone_a_s1 tone_b_s1", "pair = tone_a_s1 ghost")))


def test_written_manifest_loads_identically(tmp_path):
    manifest = load_manifest(_write(tmp_path, MANIFEST))
    copy_path = tmp_path / "copy.txt"
    write_manifest(manifest, copy_path)
    copy = load_manifest(copy_path)
    assert copy.recordings == manifest.recordings
    assert copy.pairing == manifest.pairing
