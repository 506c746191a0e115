"""Sensitive / non-sensitive CSV reports and parsing of user-marked reports."""

import io
import os
import re
from collections import Counter
from collections.abc import Callable

import pandas as pd

from backend.models.findings import ReportRow
from backend.utils.crypto import REPORT_MAGIC, seal, unseal
from backend.utils.errors import ConfigError, FeedbackError, ReportError
from backend.utils.logger import get_logger
from backend.utils.utils import write_atomic

logger = get_logger(__name__)

REPORT_COLUMNS = ["token", "entity_type", "count", "Is_Analysis_Correct"]
PAGE_ROW_PREFIXES = ("PAGE:", "PARAGRAPH:")


def aggregate_rows(counts: Counter) -> list[ReportRow]:
    """Rows from a (token, entity_type) -> count map, by descending count then token."""
    rows = [ReportRow(token, entity, count) for (token, entity), count in counts.items() if count > 0]
    rows.sort(key=lambda r: (-r.count, r.token, r.entity_type))
    return rows


def rows_to_csv(rows: list[ReportRow]) -> bytes:
    df = pd.DataFrame(
        [(r.token, r.entity_type, r.count, r.is_analysis_correct) for r in rows], columns=REPORT_COLUMNS
    )
    return df.to_csv(index=False, lineterminator="\n").encode("utf-8")


def seal_report(data: bytes, key: bytes) -> bytes:
    return seal(data, key)


def unseal_report(blob: bytes, key: bytes | None) -> bytes:
    if key is None:
        raise ReportError("report is sealed and no key was supplied")
    return unseal(blob, key)


def write_report(path: str, rows: list[ReportRow], encrypt: bool = False, key: bytes | None = None):
    data = rows_to_csv(rows)
    if encrypt:
        if key is None:
            raise ConfigError("encrypt_reports requires key material", field="redaction.key_file")
        data = seal_report(data, key)
    write_atomic(path, data)


def write_reports(
    sensitive: Counter,
    non_sensitive: Counter,
    paths: tuple[str, str],
    encrypt: bool = False,
    key: bytes | None = None,
    on_written: Callable[[str], None] | None = None,
) -> tuple[list[ReportRow], list[ReportRow]]:
    """Write both reports; returns the rows written. `on_written` sees each path once its write succeeded."""
    sensitive_rows = aggregate_rows(sensitive)
    non_sensitive_rows = aggregate_rows(non_sensitive)
    for path, rows in zip(paths, (sensitive_rows, non_sensitive_rows)):
        write_report(path, rows, encrypt, key)
        if on_written:
            on_written(path)
    logger.info(
        f"Reports written: {len(sensitive_rows)} sensitive row(s) to {paths[0]}, "
        f"{len(non_sensitive_rows)} non-sensitive row(s) to {paths[1]}"
    )
    return sensitive_rows, non_sensitive_rows


def _load_bytes(source) -> bytes:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return bytes(source)
    if not os.path.exists(source):
        raise ReportError(f"report not found: {source}")
    with open(source, "rb") as f:
        return f.read()


def read_report(source, key: bytes | None = None) -> list[ReportRow]:
    """Parse a report (path or bytes, sealed or plain) into rows.

    Line numbers in errors are 1-based file lines; the header is line 1.
    """
    data = _load_bytes(source)
    if data.startswith(REPORT_MAGIC):
        data = unseal_report(data, key)
    try:
        df = pd.read_csv(io.BytesIO(data), dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise FeedbackError("empty report, expected a header", line=1) from None
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        raise FeedbackError(f"malformed row: {e}", line=int(match.group(1)) if match else None) from e
    if list(df.columns) != REPORT_COLUMNS:
        raise FeedbackError(f"bad header {list(df.columns)}, expected {REPORT_COLUMNS}", line=1)

    rows = []
    for idx, record in enumerate(df.itertuples(index=False, name=None)):
        line = idx + 2
        if any(not isinstance(value, str) for value in record):
            raise FeedbackError("row has missing fields", line=line)
        token, entity_type, count, mark = record
        if not token or not entity_type:
            raise FeedbackError("token and entity_type must be non-empty", line=line)
        if not count.isdigit() or int(count) < 1:
            raise FeedbackError(f"count must be a positive integer, got {count!r}", line=line)
        mark = mark.strip().upper()
        if mark not in ("Y", "N"):
            raise FeedbackError(f"Is_Analysis_Correct must be Y or N, got {mark!r}", line=line)
        rows.append(ReportRow(token, entity_type, int(count), mark))
    return rows


def parse_marked_report(source, key: bytes | None = None) -> list[ReportRow]:
    """Rows whose Is_Analysis_Correct is N; everything else is ignored."""
    return [row for row in read_report(source, key) if row.is_analysis_correct == "N"]
