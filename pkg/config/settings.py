import os
from pathlib import Path

from dotenv import load_dotenv


BASE_DIR = Path(__file__).resolve().parent.parent

# Load environment variables from .env file if present
load_dotenv(BASE_DIR / ".env")

SECRET_KEY = os.getenv("SECRET_KEY", "django-insecure-change-me")
DEBUG = os.getenv("DEBUG", "False").lower() in {"1", "true", "yes"}

VOCAL_CONFIG = os.getenv("VOCAL_CONFIG", "")
VOCAL_RUN_LOG = Path(os.getenv("VOCAL_RUN_LOG", str(BASE_DIR / "runs.log")))
VOCAL_SEED = int(os.getenv("VOCAL_SEED", "0"))
VOCAL_JOBS = int(os.getenv("VOCAL_JOBS", "1"))
VOCAL_TABLE_BATCH_SIZE = int(os.getenv("VOCAL_TABLE_BATCH_SIZE", "5000"))
VOCAL_MAX_ERROR_RECORDS = int(os.getenv("VOCAL_MAX_ERROR_RECORDS", "50"))
VOCAL_LOG_LEVEL = os.getenv("VOCAL_LOG_LEVEL", "INFO").upper()

INSTALLED_APPS = [
    "pipeline.apps.PipelineAppConfig",
    "annotation.apps.AnnotationConfig",
    "classifier.apps.ClassifierConfig",
]

# The pipeline is file based; no database is configured.
DATABASES: dict = {}

LANGUAGE_CODE = "en-us"
TIME_ZONE = "UTC"
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "plain"},
    },
    "loggers": {
        "pipeline": {"handlers": ["console"], "level": VOCAL_LOG_LEVEL},
        "annotation": {"handlers": ["console"], "level": VOCAL_LOG_LEVEL},
        "classifier": {"handlers": ["console"], "level": VOCAL_LOG_LEVEL},
    },
}
