from pathlib import Path

from classifier.evaluation.splits import read_split
from classifier.features.functionals import read_feature_csv
from classifier.normalization import NormMode
from classifier.tasks import FIVE_CLASS, TASKS, train_task
from pipeline.management.base import PipelineCommand


class Command(PipelineCommand):
    help = "Train a kernel ELM at a fixed C and save it."

    def add_command_arguments(self, parser):
        parser.add_argument("--features", type=Path, help="Feature CSV (default: <work_dir>/features.csv).")
        parser.add_argument("--split", type=Path, help="Train on the train and valid chunks of this split only.")
        parser.add_argument("--task", choices=TASKS, default=FIVE_CLASS)
        parser.add_argument("--norm", choices=[mode.value for mode in NormMode])
        parser.add_argument("--C", dest="C", type=float, help="Regularisation constant.")
        parser.add_argument("--out", type=Path, help="Model file (default: <work_dir>/model.kelm).")

    def run(self, config, jobs, **options):
        self.require(options, "C")
        features = self.work_input(options, "features", config, "features.csv")
        split = read_split(self.input_path(options, "split", config)) if options.get("split") else None
        out = self.output_path(options, "out", config, "model.kelm")
        model = train_task(
            read_feature_csv(features),
            options["C"],
            options.get("norm") or config.norm_mode,
            out,
            split=split,
            task=options["task"],
        )
        return f"Model with {len(model.labels)} classes and {model.train_matrix.shape[0]} rows saved to {out}"
