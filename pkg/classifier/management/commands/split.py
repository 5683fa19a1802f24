from pathlib import Path

from classifier.tasks import split_task
from pipeline.management.base import PipelineCommand


class Command(PipelineCommand):
    help = "Split chunks chronologically into train, valid and test without separating sessions."

    def add_command_arguments(self, parser):
        parser.add_argument("--manifest", type=Path)
        parser.add_argument("--annotations", type=Path, nargs="+", help="Species and background tables.")
        parser.add_argument("--out", type=Path, help="Split table (default: <work_dir>/split.tsv).")

    def run(self, config, jobs, **options):
        manifest = self.load_manifest(options, config)
        annotations = self.load_annotations(options, config, manifest)
        out = self.output_path(options, "out", config, "split.tsv")
        spec = split_task(manifest, annotations, config.split_ratios, out)
        train, valid, test = spec.achieved_ratio()
        return f"Achieved ratio train {train:.3f} / valid {valid:.3f} / test {test:.3f}; written to {out}"
