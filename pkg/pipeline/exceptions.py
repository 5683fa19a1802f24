from typing import Dict, List, Optional


class PipelineError(Exception):
    """Base class for every processing error raised by the pipeline."""


class WaveFormatError(PipelineError, ValueError):
    pass


class UnsupportedEncodingError(PipelineError, ValueError):
    def __init__(self, encoding: str, path: Optional[str] = None) -> None:
        self.encoding = encoding
        where = f" in {path}" if path else ""
        super().__init__(f"Unsupported WAVE encoding {encoding}{where}.")


class WaveWriteError(PipelineError, OSError):
    pass


class PreconditionError(PipelineError, ValueError):
    pass


class FrameTooShortError(PreconditionError):
    pass


class SchemaError(PipelineError, ValueError):
    pass


class AnnotationReferenceError(PipelineError, LookupError):
    pass


class AnnotationTableError(PipelineError, ValueError):
    """Raised after a table scan with the offending rows collected."""

    def __init__(self, path: str, errors: List[Dict[str, object]]) -> None:
        self.path = path
        self.errors = errors
        first = errors[0] if errors else {}
        super().__init__(
            f"{len(errors)} invalid row(s) in {path}; first at row {first.get('row')}: {first.get('error')}"
        )


class ConfigError(PipelineError, ValueError):
    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None) -> None:
        self.line = line
        self.path = path
        location = ""
        if path and line is not None:
            location = f"{path}:{line}: "
        elif line is not None:
            location = f"line {line}: "
        super().__init__(f"{location}{message}")


class DetectorConfigError(ConfigError):
    pass


class BoundsError(PipelineError, ValueError):
    pass


class ProtocolError(PipelineError):
    pass


class NumericalError(PipelineError, ArithmeticError):
    pass


class ShapeError(PipelineError, ValueError):
    pass


class LabelError(PipelineError, ValueError):
    pass


class UndefinedClassError(PipelineError, ValueError):
    def __init__(self, label: str) -> None:
        self.label = label
        super().__init__(f"Class '{label}' has no ground-truth items; recall is undefined.")


class ExhaustionError(PipelineError):
    def __init__(self, message: str, shortfall_chunks: int, shortfall_s: float) -> None:
        self.shortfall_chunks = shortfall_chunks
        self.shortfall_s = shortfall_s
        super().__init__(f"{message} (short by {shortfall_chunks} chunk(s), {shortfall_s:.3f} s)")
