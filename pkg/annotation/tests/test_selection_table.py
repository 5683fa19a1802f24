from pathlib import Path

import pytest

from annotation.records import Annotation, TimeInterval
from annotation.utils.manifest import CorpusManifest, Recording
from annotation.utils.selection_table import (
    read_annotation_dir,
    read_annotations,
    source_id_from_table,
    write_annotations,
)
from pipeline.exceptions import AnnotationReferenceError, AnnotationTableError, SchemaError

HEADER = "Selection\tView\tChannel\tBegin Time (s)\tEnd Time (s)\tLow Freq (Hz)\tHigh Freq (Hz)\tSpecies\n"


@pytest.fixture
def manifest():
    recordings = [Recording(name, Path(f"{name}.wav"), None, "A", "tone") for name in ("rec01", "rec02")]
    return CorpusManifest(recordings, ["tone", "chirp"])


def _table(tmp_path, name, *rows):
    path = tmp_path / name
    path.write_text(HEADER + "".join(row + "\n" for row in rows), encoding="utf-8")
    return path


def test_source_id_comes_from_the_table_name():
    assert source_id_from_table(Path("tables/rec01.Table.1.selections.txt")) == "rec01"


def test_rows_are_read_in_order(tmp_path, manifest):
    path = _table(
        tmp_path,
        "rec01.Table.1.selections.txt",
        "1\tSpectrogram 1\t1\t3.5\t4.0\t500\t1400\ttone",
        "2\tSpectrogram 1\t1\t1.0\t1.25\t\t\tbackground",
    )
    annotations = read_annotations(path, manifest)
    assert [(a.source_id, a.begin_s, a.end_s, a.label) for a in annotations] == [
        ("rec01", 3.5, 4.0, "tone"),
        ("rec01", 1.0, 1.25, "background"),
    ]
    assert annotations[0].high_freq_hz == 1400.0 and annotations[1].low_freq_hz is None


def test_invalid_rows_are_collected_with_row_numbers(tmp_path, manifest):
    path = _table(
        tmp_path,
        "rec01.Table.1.selections.txt",
        "1\tSpectrogram 1\t1\t2.0\t1.0\t\t\ttone",
        "2\tSpectrogram 1\t1\t0.5\t1.0\t\t\tparrot",
        "3\tSpectrogram 1\t1\tabc\t1.0\t\t\ttone",
        "4\tSpectrogram 1\t1\t0.5\t1.0\t\t\ttone",
    )
    with pytest.raises(AnnotationTableError) as excinfo:
        read_annotations(path, manifest)
    assert [error["row"] for error in excinfo.value.errors] == [2, 3, 4]
    assert "parrot" in excinfo.value.errors[1]["error"]


def test_error_records_are_capped(tmp_path, manifest, settings):
    settings.VOCAL_MAX_ERROR_RECORDS = 2
    rows = [f"{i}\tSpectrogram 1\t1\t1.0\t0.5\t\t\ttone" for i in range(1, 6)]
    with pytest.raises(AnnotationTableError) as excinfo:
        read_annotations(_table(tmp_path, "rec01.txt", *rows), manifest)
    assert len(excinfo.value.errors) == 2


def test_missing_required_column_fails_before_rows(tmp_path, manifest):
    path = tmp_path / "rec01.txt"
    path.write_text("Selection\tBegin Time (s)\tEnd Time (s)\n1\t0\t1\n", encoding="utf-8")
    with pytest.raises(SchemaError, match="Species"):
        read_annotations(path, manifest)


def test_unknown_source_is_rejected_unless_unchecked(tmp_path, manifest):
    path = _table(tmp_path, "tone.Table.1.selections.txt", "1\tSpectrogram 1\t1\t0.5\t1.0\t\t\ttone")
    with pytest.raises(AnnotationReferenceError, match="tone"):
        read_annotations(path, manifest)
    assert read_annotations(path, manifest, check_sources=False)[0].source_id == "tone"


def test_written_tables_read_back(tmp_path, manifest):
    annotations = [
        Annotation("rec02", TimeInterval(0.1, 0.35), "chirp", 350.0, 1700.0),
        Annotation("rec01", TimeInterval(2.0, 2.5), "tone"),
    ]
    path = tmp_path / "mixed.Table.1.selections.txt"
    assert write_annotations(annotations, path) == 2
    assert read_annotations(path, manifest) == annotations


def test_directory_tables_are_read_in_name_order(tmp_path, manifest):
    _table(tmp_path, "rec02.Table.1.selections.txt", "1\tSpectrogram 1\t1\t0.5\t1.0\t\t\tchirp")
    _table(tmp_path, "rec01.Table.1.selections.txt", "1\tSpectrogram 1\t1\t0.5\t1.0\t\t\ttone")
    annotations = read_annotation_dir(tmp_path, manifest)
    assert [a.source_id for a in annotations] == ["rec01", "rec02"]
