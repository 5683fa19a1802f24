import os
from contextlib import contextmanager
from pathlib import Path
from tempfile import NamedTemporaryFile
from typing import IO, Iterator, Optional


@contextmanager
def atomic_write(path: Path, mode: str = "w", encoding: Optional[str] = "utf-8", newline: Optional[str] = "") -> Iterator[IO]:
    """Write to a temporary sibling of ``path`` and move it into place on success."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    binary = "b" in mode
    tmp_path: Optional[Path] = None
    try:
        with NamedTemporaryFile(
            mode,
            dir=target.parent,
            prefix=f".{target.name}.",
            suffix=".tmp",
            delete=False,
            encoding=None if binary else encoding,
            newline=None if binary else newline,
        ) as handle:
            tmp_path = Path(handle.name)
            yield handle
        os.replace(tmp_path, target)
        tmp_path = None
    finally:
        # Temp file only survives here when the write failed.
        if tmp_path is not None:
            try:
                tmp_path.unlink(missing_ok=True)
            except FileNotFoundError:
                pass
