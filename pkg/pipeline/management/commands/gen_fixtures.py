from pathlib import Path

from pipeline.fixtures import CALLS_PER_RECORDING, generate_fixtures
from pipeline.management.base import PipelineCommand


class Command(PipelineCommand):
    help = "Generate a synthetic four-species corpus with ground-truth annotations and a pipeline config."

    def add_command_arguments(self, parser):
        parser.add_argument("--out", type=Path, help="Directory to write the corpus into.")
        parser.add_argument("--sessions", type=int, default=5)
        parser.add_argument("--calls", type=int, default=CALLS_PER_RECORDING, help="Calls per recording.")
        parser.add_argument("--session-s", type=float, default=60.0)
        parser.add_argument("--snr-min", type=float, default=-5.0)
        parser.add_argument("--snr-max", type=float, default=20.0)

    def run(self, config, jobs, **options):
        self.require(options, "out")
        corpus = generate_fixtures(
            options["out"],
            seed=config.seed,
            sessions=options["sessions"],
            session_s=options["session_s"],
            calls_per_recording=options["calls"],
            snr_range_db=(options["snr_min"], options["snr_max"]),
        )
        return (
            f"Wrote {len(corpus.manifest)} recordings and {len(corpus.annotations)} annotations; "
            f"config at {corpus.config_path}"
        )
