from pathlib import Path

from annotation.tasks import detect_task
from annotation.utils.event_tables import read_thresholds
from pipeline.management.base import PipelineCommand


class Command(PipelineCommand):
    help = "Detect candidate vocalisation events on every recording of the manifest."

    def add_command_arguments(self, parser):
        parser.add_argument("--manifest", type=Path)
        parser.add_argument("--thresholds", type=Path, help="Threshold report from optimize_thresholds.")
        parser.add_argument("--species", nargs="+")
        parser.add_argument("--out", type=Path, help="Event table (default: <work_dir>/events.tsv).")

    def run(self, config, jobs, **options):
        manifest = self.load_manifest(options, config)
        optimized = {}
        if options.get("thresholds"):
            optimized = read_thresholds(self.input_path(options, "thresholds", config))

        def detector_for(species):
            return optimized.get(species) or config.detector_for(species)

        out = self.output_path(options, "out", config, "events.tsv")
        events = detect_task(manifest, detector_for, config.frame, out, species=options["species"], jobs=jobs)
        return f"{sum(len(v) for v in events.values())} event(s) on {len(events)} recording(s) written to {out}"
