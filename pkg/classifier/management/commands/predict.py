from pathlib import Path

from classifier.features.functionals import read_feature_csv
from classifier.tasks import predict_task
from pipeline.management.base import PipelineCommand


class Command(PipelineCommand):
    help = "Classify feature vectors with a saved model."

    def add_command_arguments(self, parser):
        parser.add_argument("--model", type=Path, help="Model file (default: <work_dir>/model.kelm).")
        parser.add_argument("--features", type=Path, help="Feature CSV (default: <work_dir>/features.csv).")
        parser.add_argument("--out", type=Path, help="Prediction table (default: <work_dir>/predictions.tsv).")

    def run(self, config, jobs, **options):
        model = self.work_input(options, "model", config, "model.kelm")
        features = self.work_input(options, "features", config, "features.csv")
        out = self.output_path(options, "out", config, "predictions.tsv")
        predicted = predict_task(model, read_feature_csv(features), out)
        return f"{len(predicted)} prediction(s) written to {out}"
