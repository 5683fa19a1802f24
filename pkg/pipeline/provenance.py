"""Run-log provenance: one line per command run."""

import hashlib
import logging
import platform
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Optional

import django
import numpy
import scipy
import sklearn

logger = logging.getLogger(__name__)


def package_versions() -> Dict[str, str]:
    return {
        "python": platform.python_version(),
        "django": django.get_version(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "sklearn": sklearn.__version__,
    }


def config_hash(rendered_config: str) -> str:
    return hashlib.sha256(rendered_config.encode("utf-8")).hexdigest()


def format_run_line(command: str, rendered_config: str, status: str, when: Optional[datetime] = None) -> str:
    when = when or datetime.now(timezone.utc)
    versions = ",".join(f"{name}={version}" for name, version in package_versions().items())
    return "\t".join(
        [when.strftime("%Y-%m-%dT%H:%M:%SZ"), command, f"sha256={config_hash(rendered_config)}", versions, status]
    )


def append_run_line(path: Path, command: str, rendered_config: str, status: str) -> str:
    """Append a provenance line; a failure to write the log is logged, never raised."""
    line = format_run_line(command, rendered_config, status)
    try:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding="utf-8") as handle:
            handle.write(line + "\n")
    except OSError:
        logger.exception("Could not append to run log %s", path)
    return line
