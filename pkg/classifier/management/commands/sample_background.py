from pathlib import Path

from classifier.tasks import background_task
from pipeline.management.base import PipelineCommand


class Command(PipelineCommand):
    help = "Sample duration-matched background chunks from unannotated audio."

    def add_command_arguments(self, parser):
        parser.add_argument("--manifest", type=Path)
        parser.add_argument("--annotations", type=Path, nargs="+", help="Species selection tables or directories.")
        parser.add_argument("--out", type=Path, help="Background table (default: <work_dir>/background.txt).")

    def run(self, config, jobs, **options):
        manifest = self.load_manifest(options, config)
        annotations = self.load_annotations(options, config, manifest)
        out = self.output_path(options, "out", config, "background.txt")
        sampled = background_task(manifest, annotations, config.seed, out, config.retry_cap)
        return f"{len(sampled)} background chunk(s) written to {out}"
