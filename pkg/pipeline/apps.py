from django.apps import AppConfig


class PipelineAppConfig(AppConfig):
    name = "pipeline"
    verbose_name = "Pipeline plumbing"
