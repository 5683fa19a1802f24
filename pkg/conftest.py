import pytest


@pytest.fixture(autouse=True)
def isolated_run_log(settings, tmp_path):
    """Keep run-log lines and environment config out of the working tree."""
    settings.VOCAL_RUN_LOG = tmp_path / "runs.log"
    settings.VOCAL_CONFIG = ""
    settings.VOCAL_JOBS = 1
    return settings.VOCAL_RUN_LOG
