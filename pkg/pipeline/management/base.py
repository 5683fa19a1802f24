import logging
from pathlib import Path
from typing import List, Optional

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from annotation.records import Annotation
from annotation.utils.manifest import CorpusManifest, load_manifest
from annotation.utils.selection_table import read_annotation_dir
from pipeline.config import PipelineConfig, load_config, render_config
from pipeline.exceptions import PipelineError
from pipeline.provenance import append_run_line

logger = logging.getLogger(__name__)


class PipelineCommand(BaseCommand):
    """Shared flags, config loading, error mapping and run-log provenance.

    Subclasses implement ``add_command_arguments`` and ``run``. A
    ``PipelineError`` ends the command with exit status 1; usage errors
    exit with 2.
    """

    def add_arguments(self, parser):
        parser.add_argument("--config", type=Path, help="Pipeline config file (default: $VOCAL_CONFIG).")
        parser.add_argument("--seed", type=int, help="Override the configured random seed.")
        parser.add_argument("--jobs", type=int, help="Worker threads (default: $VOCAL_JOBS).")
        parser.add_argument("--print-config", action="store_true", help="Print the effective config and exit.")
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser) -> None:
        pass

    def run(self, config: PipelineConfig, jobs: int, **options) -> Optional[str]:
        raise NotImplementedError

    def _config_path(self, options) -> Optional[Path]:
        if options.get("config"):
            return Path(options["config"])
        default = getattr(settings, "VOCAL_CONFIG", "")
        return Path(default) if default else None

    def require(self, options, *names: str) -> None:
        """Missing inputs are usage errors."""
        missing = [f"--{name.replace('_', '-')}" for name in names if options.get(name) in (None, "")]
        if missing:
            raise CommandError(f"Missing required option(s): {', '.join(missing)}", returncode=2)

    def input_path(self, options, name: str, config: PipelineConfig, config_key: Optional[str] = None) -> Path:
        """A CLI path option, falling back to ``paths.<config_key>`` of the config."""
        value = options.get(name)
        path = Path(value) if value else (config.path(config_key) if config_key else None)
        if path is None:
            raise CommandError(f"Missing required option --{name.replace('_', '-')}", returncode=2)
        if not path.exists():
            raise CommandError(f"Input {path} does not exist.", returncode=2)
        return path

    def work_input(self, options, name: str, config: PipelineConfig, default_name: str) -> Path:
        """An input produced by an earlier stage, defaulting to ``default_name`` under ``paths.work_dir``."""
        value = options.get(name)
        path = Path(value) if value else config.work_path(default_name)
        if not path.exists():
            raise CommandError(f"Input {path} does not exist; pass --{name.replace('_', '-')}.", returncode=2)
        return path

    def output_path(self, options, name: str, config: PipelineConfig, default_name: str) -> Path:
        """A CLI output option, defaulting to ``default_name`` under ``paths.work_dir``."""
        value = options.get(name)
        path = Path(value) if value else config.work_path(default_name)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def load_manifest(self, options, config: PipelineConfig) -> CorpusManifest:
        return load_manifest(self.input_path(options, "manifest", config, "manifest"))

    def load_annotations(
        self, options, config: PipelineConfig, manifest: CorpusManifest, name: str = "annotations"
    ) -> List[Annotation]:
        """Annotations from every ``--<name>`` path (table or directory), or ``paths.annotations``."""
        values = options.get(name) or []
        paths = [Path(value) for value in values] or [self.input_path(options, name, config, "annotations")]
        annotations: List[Annotation] = []
        for path in paths:
            if not path.exists():
                raise CommandError(f"Input {path} does not exist.", returncode=2)
            annotations.extend(read_annotation_dir(path, manifest))
        return annotations

    def handle(self, *args, **options):
        command = self.__module__.rsplit(".", 1)[-1]
        try:
            config = load_config(self._config_path(options))
        except PipelineError as exc:
            raise CommandError(str(exc)) from exc
        if options.get("seed") is not None:
            config.seed = options["seed"]
        jobs = options["jobs"] if options.get("jobs") is not None else getattr(settings, "VOCAL_JOBS", 1)
        if jobs < 1:
            raise CommandError("--jobs must be at least 1.", returncode=2)

        rendered = render_config(config)
        if options.get("print_config"):
            self.stdout.write(rendered, ending="")
            return

        run_log = config.path("run_log") or settings.VOCAL_RUN_LOG
        logger.info("Starting %s (seed %s, %s job(s))", command, config.seed, jobs)
        try:
            run_options = {key: value for key, value in options.items() if key not in ("config", "jobs")}
            summary = self.run(config, jobs, **run_options)
        except PipelineError as exc:
            logger.exception("%s failed", command)
            append_run_line(run_log, command, rendered, f"error:{type(exc).__name__}")
            raise CommandError(str(exc)) from exc
        except CommandError:
            append_run_line(run_log, command, rendered, "usage-error")
            raise
        append_run_line(run_log, command, rendered, "ok")
        if summary:
            self.stdout.write(summary)
        logger.info("Completed %s", command)
