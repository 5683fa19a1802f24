import csv
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from pipeline.exceptions import SchemaError


Row = Dict[str, str]
RowWithLineNumber = Tuple[int, Row]


class TableBatchLoader:
    """Iterate over the rows of a delimited text table in fixed-size batches."""

    def __init__(
        self,
        file_path: Path,
        batch_size: int = 5000,
        delimiter: str = ",",
        encoding: str = "utf-8",
    ) -> None:
        self.file_path = Path(file_path)
        self.batch_size = batch_size
        self.delimiter = delimiter
        self.encoding = encoding

    def fieldnames(self) -> List[str]:
        with self.file_path.open(newline="", encoding=self.encoding) as handle:
            reader = csv.reader(handle, delimiter=self.delimiter)
            header = next(reader, None)
        if not header:
            raise SchemaError(f"Table {self.file_path} must include a header row.")
        return [name.strip() for name in header]

    def require_columns(self, required: Sequence[str]) -> List[str]:
        present = self.fieldnames()
        missing = [name for name in required if name not in present]
        if missing:
            raise SchemaError(
                f"Table {self.file_path} is missing required column(s): {', '.join(missing)}"
            )
        return present

    def count_rows(self) -> int:
        """Count data rows (excluding header)."""
        total = 0
        with self.file_path.open(newline="", encoding=self.encoding) as handle:
            reader = csv.reader(handle, delimiter=self.delimiter)
            for index, row in enumerate(reader):
                if index == 0 or not row:
                    continue  # skip header and blank lines
                total += 1
        return total

    def iter_batches(self) -> Iterator[List[RowWithLineNumber]]:
        """Yield batches of rows with their original line numbers."""
        with self.file_path.open(newline="", encoding=self.encoding) as handle:
            reader = csv.DictReader(handle, delimiter=self.delimiter)
            if reader.fieldnames is None:
                raise SchemaError(f"Table {self.file_path} must include a header row.")
            reader.fieldnames = [name.strip() for name in reader.fieldnames]

            batch: List[RowWithLineNumber] = []
            for row in reader:
                batch.append((reader.line_num, row))
                if len(batch) >= self.batch_size:
                    yield batch
                    batch = []

            if batch:
                yield batch

    def iter_rows(self) -> Iterator[RowWithLineNumber]:
        for batch in self.iter_batches():
            yield from batch

    def __iter__(self) -> Iterable[List[RowWithLineNumber]]:
        return self.iter_batches()


def write_table(handle, fieldnames: Sequence[str], rows: Iterable[Sequence[object]], delimiter: str = "\t") -> int:
    writer = csv.writer(handle, delimiter=delimiter, lineterminator="\n")
    writer.writerow(list(fieldnames))
    count = 0
    for row in rows:
        writer.writerow(list(row))
        count += 1
    return count


def parse_float(value: Optional[str]) -> Optional[float]:
    if value is None:
        return None
    text = value.strip()
    if not text:
        return None
    return float(text)
