from datetime import datetime, timezone

from pipeline.provenance import append_run_line, config_hash, format_run_line, package_versions


def test_run_line_fields():
    when = datetime(2024, 5, 6, 7, 8, 9, tzinfo=timezone.utc)
    line = format_run_line("detect", "seed = 1\n", "ok", when=when)
    fields = line.split("\t")
    assert fields[0] == "2024-05-06T07:08:09Z"
    assert fields[1] == "detect"
    assert fields[2] == f"sha256={config_hash('seed = 1' + chr(10))}"
    assert set(name.split("=")[0] for name in fields[3].split(",")) == set(package_versions())
    assert fields[4] == "ok"


def test_hash_depends_on_the_rendered_config():
    assert config_hash("seed = 1\n") != config_hash("seed = 2\n")
    assert len(config_hash("")) == 64


def test_lines_are_appended(tmp_path):
    path = tmp_path / "logs" / "runs.log"
    append_run_line(path, "split", "seed = 0\n", "ok")
    append_run_line(path, "split", "seed = 0\n", "error:ProtocolError")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert [line.split("\t")[-1] for line in lines] == ["ok", "error:ProtocolError"]


def test_unwritable_log_does_not_raise(tmp_path, caplog):
    blocker = tmp_path / "file"
    blocker.write_text("")
    line = append_run_line(blocker / "runs.log", "split", "", "ok")
    assert line.endswith("\tok")
    assert "Could not append to run log" in caplog.text
