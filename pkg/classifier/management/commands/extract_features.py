from pathlib import Path

from classifier.tasks import extract_features_task
from pipeline.management.base import PipelineCommand


class Command(PipelineCommand):
    help = "Compute 114 LLDs per frame and 1140 functionals per annotated chunk."

    def add_command_arguments(self, parser):
        parser.add_argument("--manifest", type=Path)
        parser.add_argument("--annotations", type=Path, nargs="+", help="Selection tables or directories.")
        parser.add_argument("--out", type=Path, help="Feature CSV (default: <work_dir>/features.csv).")
        parser.add_argument("--lld-dir", type=Path, help="Also write one LLD CSV per chunk here.")

    def run(self, config, jobs, **options):
        manifest = self.load_manifest(options, config)
        annotations = self.load_annotations(options, config, manifest)
        out = self.output_path(options, "out", config, "features.csv")
        vectors = extract_features_task(manifest, annotations, config.frame, out, options.get("lld_dir"), jobs=jobs)
        return f"{len(vectors)} feature vector(s) written to {out}"
