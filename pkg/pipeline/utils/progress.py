import logging


def calculate_percent(processed: int, total: int) -> int:
    if total <= 0:
        return 100 if processed > 0 else 0
    return min(100, int((processed / total) * 100))


def log_progress(logger: logging.Logger, stage: str, processed: int, total: int) -> None:
    logger.info("%s: %s/%s (%s%%)", stage, processed, total, calculate_percent(processed, total))
