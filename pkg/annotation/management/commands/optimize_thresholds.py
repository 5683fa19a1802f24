from pathlib import Path

from annotation.tasks import optimize_task
from pipeline.management.base import PipelineCommand


class Command(PipelineCommand):
    help = "Choose per-species detector thresholds that recall over 95% of the seed annotations."

    def add_command_arguments(self, parser):
        parser.add_argument("--manifest", type=Path)
        parser.add_argument("--annotations", type=Path, nargs="+", help="Seed selection tables or directories.")
        parser.add_argument("--species", nargs="+")
        parser.add_argument("--out", type=Path, help="Threshold report (default: <work_dir>/thresholds.tsv).")

    def run(self, config, jobs, **options):
        manifest = self.load_manifest(options, config)
        annotations = self.load_annotations(options, config, manifest)
        out = self.output_path(options, "out", config, "thresholds.tsv")
        results = optimize_task(
            manifest, annotations, config.detector_for, config.frame, out, species=options["species"], jobs=jobs
        )
        lines = [
            f"{species}: recall {report.recall:.3f}, retained {report.retained_fraction:.3f}"
            for species, (_, report) in results.items()
        ]
        return "\n".join(lines + [f"Thresholds written to {out}"])
