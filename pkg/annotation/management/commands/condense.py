from pathlib import Path

from annotation.tasks import condense_task
from annotation.utils.event_tables import read_events
from pipeline.management.base import PipelineCommand


class Command(PipelineCommand):
    help = "Concatenate detected events into one condensed file and index per species."

    def add_command_arguments(self, parser):
        parser.add_argument("--manifest", type=Path)
        parser.add_argument("--events", type=Path, help="Event table (default: <work_dir>/events.tsv).")
        parser.add_argument(
            "--annotations", type=Path, nargs="+", help="Source annotations to project onto the condensed files."
        )
        parser.add_argument("--species", nargs="+")
        parser.add_argument("--out-dir", type=Path, help="Output directory (default: <work_dir>/condensed).")

    def run(self, config, jobs, **options):
        manifest = self.load_manifest(options, config)
        events_path = self.work_input(options, "events", config, "events.tsv")
        annotations = self.load_annotations(options, config, manifest) if options.get("annotations") else []
        out_dir = Path(options["out_dir"]) if options.get("out_dir") else config.work_path("condensed")
        indices = condense_task(
            manifest, read_events(events_path), out_dir, annotations, species=options["species"], jobs=jobs
        )
        return "\n".join(
            f"{species}: {index.total_condensed_s:.1f} s of {index.total_source_s:.1f} s"
            for species, index in indices.items()
        )
