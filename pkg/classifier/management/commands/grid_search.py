from pathlib import Path

from django.core.management.base import CommandError

from classifier.evaluation.splits import read_split
from classifier.features.functionals import read_feature_csv
from classifier.normalization import NormMode
from classifier.tasks import FIVE_CLASS, TASKS, grid_search_task
from pipeline.config import expand_grid
from pipeline.management.base import PipelineCommand


class Command(PipelineCommand):
    help = "Train on the train split for every C of the grid and report validation UAR."

    def add_command_arguments(self, parser):
        parser.add_argument("--features", type=Path, help="Feature CSV (default: <work_dir>/features.csv).")
        parser.add_argument("--split", type=Path, help="Split table (default: <work_dir>/split.tsv).")
        parser.add_argument("--task", choices=TASKS, default=FIVE_CLASS)
        parser.add_argument("--norm", choices=[mode.value for mode in NormMode])
        parser.add_argument("--grid", help="C grid, e.g. '1e-1..1e6 by decade' (default: learn.c_grid).")
        parser.add_argument("--out", type=Path, help="Grid table (default: <work_dir>/grid_<task>_<norm>.tsv).")

    def run(self, config, jobs, **options):
        features = self.work_input(options, "features", config, "features.csv")
        split = read_split(self.work_input(options, "split", config, "split.tsv"))
        norm_mode = NormMode(options.get("norm") or config.norm_mode)
        grid = config.c_grid
        if options.get("grid"):
            try:
                grid = expand_grid(options["grid"])
            except ValueError as exc:
                raise CommandError(f"Invalid --grid: {exc}", returncode=2) from exc
        task = options["task"]
        out = self.output_path(options, "out", config, f"grid_{task}_{norm_mode.name.lower()}.tsv")
        best_C, report = grid_search_task(read_feature_csv(features), split, task, norm_mode, grid, out)
        return f"Best C={best_C:g} (valid UAR {report.best.uar:.4f}); grid written to {out}"
