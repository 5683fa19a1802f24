from pathlib import Path

from classifier.tasks import snr_task
from pipeline.config import SnrMode
from pipeline.management.base import PipelineCommand


class Command(PipelineCommand):
    help = "Per-frequency mean dB difference between a species' calls and background chunks."

    def add_command_arguments(self, parser):
        parser.add_argument("--manifest", type=Path)
        parser.add_argument("--annotations", type=Path, nargs="+", help="Species selection tables or directories.")
        parser.add_argument("--background", type=Path, nargs="+", help="Background table (default: <work_dir>/background.txt).")
        parser.add_argument("--species")
        parser.add_argument("--out", type=Path, help="Profile CSV (default: <work_dir>/snr_<species>.csv).")
        parser.add_argument("--plot", type=Path, help="Also render the profile to this image file.")

    def run(self, config, jobs, **options):
        self.require(options, "species")
        manifest = self.load_manifest(options, config)
        annotations = self.load_annotations(options, config, manifest)
        if not options.get("background"):
            options["background"] = [self.work_input(options, "background", config, "background.txt")]
        background = self.load_annotations(options, config, manifest, name="background")
        species = options["species"]
        out = self.output_path(options, "out", config, f"snr_{species}.csv")
        profile = snr_task(
            manifest,
            annotations,
            background,
            species,
            config.frame,
            out,
            max_hz=config.snr_max_hz,
            db_of_mean=config.snr_mode is SnrMode.DB_OF_MEAN,
            plot_path=options.get("plot"),
            jobs=jobs,
        )
        return f"Peak difference {float(profile.diff_db.max()):.1f} dB at {profile.peak_hz:.0f} Hz; written to {out}"
