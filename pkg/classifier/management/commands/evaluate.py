from pathlib import Path

from classifier.evaluation.splits import read_split
from classifier.features.functionals import read_feature_csv
from classifier.normalization import NormMode
from classifier.tasks import TASKS, evaluate_task
from pipeline.management.base import PipelineCommand


class Command(PipelineCommand):
    help = "Grid-search C on validation UAR, refit on train+valid and test once per task and normalisation."

    def add_command_arguments(self, parser):
        parser.add_argument("--features", type=Path, help="Feature CSV (default: <work_dir>/features.csv).")
        parser.add_argument("--split", type=Path, help="Split table (default: <work_dir>/split.tsv).")
        parser.add_argument("--tasks", nargs="+", choices=TASKS, default=list(TASKS))
        parser.add_argument("--norms", nargs="+", choices=[mode.value for mode in NormMode])
        parser.add_argument("--out-dir", type=Path, help="Report directory (default: <work_dir>/evaluation).")
        parser.add_argument("--ledger", type=Path, help="Test-probe ledger (default: <out-dir>/test_probes.tsv).")

    def run(self, config, jobs, **options):
        features = self.work_input(options, "features", config, "features.csv")
        split = read_split(self.work_input(options, "split", config, "split.tsv"))
        out_dir = Path(options["out_dir"]) if options.get("out_dir") else config.work_path("evaluation")
        norms = [NormMode(value) for value in options.get("norms") or [mode.value for mode in NormMode]]
        results = evaluate_task(
            read_feature_csv(features),
            split,
            out_dir,
            tasks=options["tasks"],
            norm_modes=norms,
            grid=config.c_grid,
            ledger_path=options.get("ledger"),
        )
        lines = [
            f"{test.task}/{test.norm_mode.value}: C={test.C:g} valid UAR {grid.best.uar:.4f}, "
            f"test accuracy {test.accuracy:.4f}, test UAR {test.uar:.4f}"
            for grid, test in results
        ]
        return "\n".join(lines + [f"Report written to {out_dir / 'report.tsv'}"])
