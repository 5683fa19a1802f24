from io import StringIO

import pytest
from django.core.management import call_command

from annotation.utils.manifest import load_manifest
from annotation.utils.selection_table import read_annotation_dir, read_annotations
from pipeline.fixtures import generate_fixtures
from pipeline.utils.table_loader import TableBatchLoader

pytestmark = pytest.mark.slow


def _call(*args):
    out = StringIO()
    call_command(*args, stdout=out)
    return out.getvalue()


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("e2e") / "corpus"
    generate_fixtures(root, seed=7, sessions=5, session_s=30.0, calls_per_recording=4, snr_range_db=(0.0, 20.0))
    return root


def test_classifier_pipeline(corpus):
    config = str(corpus / "pipeline.conf")
    work = corpus / "work"

    _call("sample_background", "--config", config)
    assert (work / "background.txt").exists()

    tables = [str(corpus / "tables"), str(work / "background.txt")]
    _call("extract_features", "--config", config, "--annotations", *tables)
    _call("split", "--config", config, "--annotations", *tables)
    _call("evaluate", "--config", config)

    rows = {
        (row["task"], row["norm"]): float(row["test_uar"])
        for _, row in TableBatchLoader(work / "evaluation" / "report.tsv", delimiter="\t").iter_rows()
    }
    assert set(rows) == {(task, norm) for task in ("4class", "5class") for norm in ("zn", "zn+l2")}
    assert min(rows[("4class", norm)] for norm in ("zn", "zn+l2")) >= 0.9
    assert min(rows[("5class", norm)] for norm in ("zn", "zn+l2")) >= 0.8

    statuses = [line.split("\t")[-1] for line in (corpus / "runs.log").read_text(encoding="utf-8").splitlines()]
    assert statuses and set(statuses) == {"ok"}


def test_annotation_pipeline(corpus):
    config = str(corpus / "pipeline.conf")
    work = corpus / "work"

    _call("optimize_thresholds", "--config", config, "--species", "tone")
    [(_, report)] = list(TableBatchLoader(work / "thresholds.tsv", delimiter="\t").iter_rows())
    assert report["species"] == "tone"
    assert float(report["recall"]) > 0.95
    assert float(report["retained_fraction"]) < 0.3
    _call("detect", "--config", config, "--species", "tone", "--thresholds", str(work / "thresholds.tsv"))
    _call("condense", "--config", config, "--species", "tone", "--annotations", str(corpus / "tables"))

    condensed = work / "condensed"
    assert (condensed / "tone.wav").exists()
    _call(
        "lift",
        "--config", config,
        "--table", str(condensed / "tone.Table.1.selections.txt"),
        "--index", str(condensed / "tone.index.tsv"),
        "--out", str(work / "lifted.txt"),
    )

    manifest = load_manifest(corpus / "manifest.txt")
    originals = [a for a in read_annotation_dir(corpus / "tables", manifest) if a.label == "tone"]
    lifted = read_annotations(work / "lifted.txt", manifest)
    assert lifted
    for fragment in lifted:
        assert fragment.label == "tone"
        assert any(
            o.source_id == fragment.source_id
            and o.begin_s - 1e-3 <= fragment.begin_s
            and fragment.end_s <= o.end_s + 1e-3
            for o in originals
        )
