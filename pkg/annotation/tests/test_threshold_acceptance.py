import pytest

from annotation.tasks import optimize_task
from pipeline.config import load_config
from pipeline.fixtures import ARCHETYPES, generate_fixtures

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance") / "corpus"
    return generate_fixtures(root, seed=7, sessions=5, session_s=60.0, calls_per_recording=12, snr_range_db=(0.0, 20.0))


def test_every_species_meets_the_recall_target(corpus, tmp_path):
    assert len(corpus.annotations) >= 200
    config = load_config(corpus.root / "pipeline.conf")
    results = optimize_task(
        corpus.manifest, corpus.annotations, config.detector_for, config.frame, tmp_path / "thresholds.tsv"
    )

    assert sorted(results) == sorted(archetype.name for archetype in ARCHETYPES)
    for species, (_, report) in results.items():
        assert report.n_annotations >= 60, species
        assert report.target_met, species
        assert report.recall > 0.95, species
        assert report.retained_fraction <= 0.5, species
