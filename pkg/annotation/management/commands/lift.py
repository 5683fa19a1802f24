from pathlib import Path

from annotation.tasks import lift_task
from pipeline.management.base import PipelineCommand


class Command(PipelineCommand):
    help = "Map a selection table made on a condensed file back to the source recordings."

    def add_command_arguments(self, parser):
        parser.add_argument("--manifest", type=Path)
        parser.add_argument("--table", type=Path, help="Selection table of the condensed file.")
        parser.add_argument("--index", type=Path, help="Condensed index written by condense.")
        parser.add_argument("--out", type=Path, help="Lifted selection table.")

    def run(self, config, jobs, **options):
        self.require(options, "table", "index", "out")
        manifest = self.load_manifest(options, config)
        out = self.output_path(options, "out", config, "lifted.txt")
        lifted = lift_task(
            manifest, self.input_path(options, "table", config), self.input_path(options, "index", config), out
        )
        return f"{len(lifted)} annotation(s) written to {out}"
