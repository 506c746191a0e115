"""Parsing of KDMP dumps and plain-text logs into PageGroups of ParsedTokens.

Dump layout: a sequence of 4096-byte pages, each a 64-byte big-endian header followed by a
payload of which the first `data_len` bytes are in use. Logs are grouped by blank-line
separated paragraphs.
"""

import bisect
import re
import struct
from collections.abc import Iterator

from config import DUMP_MAGIC, DUMP_VERSION, HEADER_SIZE, PAGE_SIZE, PAYLOAD_CAPACITY, default_min_token_len
from backend.models.dump import PageGroup, PageHeader, ParsedToken, WorkChunk
from backend.utils.codepage import decode_bytes, to_ascii_table
from backend.utils.errors import DumpParseError
from backend.utils.logger import get_logger

logger = get_logger(__name__)

HEADER_STRUCT = struct.Struct(">4sHIQHH")
TOKEN_RE = re.compile(rb"[A-Za-z0-9](?:[A-Za-z0-9@._+\-]*[A-Za-z0-9])?")
TOKEN_TEXT_RE = re.compile(TOKEN_RE.pattern.decode("ascii"))
BLANK_LINE_RE = re.compile(rb"[ \t\r\x0b\x0c]*")


def pack_page_header(header: PageHeader) -> bytes:
    packed = HEADER_STRUCT.pack(
        header.magic, header.version, header.asid, header.logical_address, header.flags, header.data_len
    )
    return packed.ljust(HEADER_SIZE, b"\x00")


def read_page_header(page_bytes, page_index: int) -> PageHeader:
    """Decode and validate the header at the start of `page_bytes`."""
    if len(page_bytes) < HEADER_SIZE:
        raise DumpParseError("truncated page header", page_index=page_index)
    magic, version, asid, logical_address, flags, data_len = HEADER_STRUCT.unpack_from(page_bytes, 0)
    if magic != DUMP_MAGIC:
        raise DumpParseError(f"bad magic {bytes(magic)!r}", page_index=page_index)
    if version != DUMP_VERSION:
        raise DumpParseError(f"unsupported version {version}", page_index=page_index)
    if data_len > PAYLOAD_CAPACITY:
        raise DumpParseError(f"data_len {data_len} exceeds payload capacity {PAYLOAD_CAPACITY}", page_index=page_index)
    return PageHeader(asid=asid, logical_address=logical_address, data_len=data_len, flags=flags, version=version)


def page_payload(dump_bytes, page_index: int, data_len: int) -> bytes:
    start = page_index * PAGE_SIZE + HEADER_SIZE
    return bytes(dump_bytes[start : start + data_len])


def scan_dump(dump_bytes) -> list[PageGroup]:
    """Read every header and gather pages by address space, without tokenizing."""
    if len(dump_bytes) % PAGE_SIZE:
        raise DumpParseError(
            f"dump length {len(dump_bytes)} is not a multiple of {PAGE_SIZE}", page_index=len(dump_bytes) // PAGE_SIZE
        )
    groups: dict[int, PageGroup] = {}
    for page_index in range(len(dump_bytes) // PAGE_SIZE):
        offset = page_index * PAGE_SIZE
        header = read_page_header(dump_bytes[offset : offset + HEADER_SIZE], page_index)
        group = groups.setdefault(header.asid, PageGroup(group_id=header.asid))
        group.pages.append(page_index)
        group.headers[page_index] = header
    for group in groups.values():
        group.pages.sort(key=lambda p: (group.headers[p].logical_address, p))
    logger.debug(f"Scanned {len(dump_bytes) // PAGE_SIZE} pages into {len(groups)} address spaces")
    return [groups[asid] for asid in sorted(groups)]


def iter_tokens(payload: bytes, encoding: str, min_len: int = default_min_token_len):
    """Yield (text, offset, length) for every token in the payload."""
    translated = payload.translate(to_ascii_table(encoding))
    for match in TOKEN_RE.finditer(translated):
        length = match.end() - match.start()
        if length >= min_len:
            yield match.group().decode("ascii"), match.start(), length


def decode_payload(
    payload_bytes: bytes, encoding: str, min_len: int = default_min_token_len
) -> list[tuple[str, int, int]]:
    return list(iter_tokens(payload_bytes, encoding, min_len))


def count_tokens(payload: bytes, encoding: str, min_len: int = default_min_token_len) -> int:
    translated = payload.translate(to_ascii_table(encoding))
    if min_len <= 1:
        return len(TOKEN_RE.findall(translated))
    return sum(1 for tok in TOKEN_RE.findall(translated) if len(tok) >= min_len)


def tokenize_page(
    payload: bytes, encoding: str, page_index: int, group_id: int, min_len: int = default_min_token_len
) -> list[ParsedToken]:
    return [
        ParsedToken(text, page_index, offset, length, group_id)
        for text, offset, length in iter_tokens(payload, encoding, min_len)
    ]


def parse_dump(dump_bytes, encoding: str, min_len: int = default_min_token_len) -> list[PageGroup]:
    to_ascii_table(encoding)
    groups = scan_dump(dump_bytes)
    for group in groups:
        for page_index in group.pages:
            payload = page_payload(dump_bytes, page_index, group.headers[page_index].data_len)
            group.tokens.extend(tokenize_page(payload, encoding, page_index, group.group_id, min_len))
    return groups


def _iter_lines(translated: bytes) -> Iterator[tuple[int, int]]:
    start = 0
    while start < len(translated):
        newline = translated.find(b"\n", start)
        end = len(translated) if newline < 0 else newline + 1
        yield start, end
        start = end


def log_paragraphs(text_bytes: bytes, encoding: str) -> list[PageGroup]:
    """Split a log into paragraph groups (span only, no tokens)."""
    decode_bytes(bytes(text_bytes), encoding)
    translated = bytes(text_bytes).translate(to_ascii_table(encoding))
    groups: list[PageGroup] = []
    para_start: int | None = None
    para_end = 0
    for start, end in _iter_lines(translated):
        blank = BLANK_LINE_RE.fullmatch(translated, start, end - 1 if translated[end - 1 : end] == b"\n" else end)
        if blank:
            if para_start is not None:
                groups.append(PageGroup(len(groups), [len(groups)], span=(para_start, para_end)))
                para_start = None
        else:
            if para_start is None:
                para_start = start
            para_end = end
    if para_start is not None:
        groups.append(PageGroup(len(groups), [len(groups)], span=(para_start, para_end)))
    return groups


def line_starts(text_bytes: bytes, encoding: str) -> list[int]:
    translated = bytes(text_bytes).translate(to_ascii_table(encoding))
    return [start for start, _ in _iter_lines(translated)] or [0]


def tokenize_span(
    text_bytes: bytes,
    encoding: str,
    paragraph: int,
    span: tuple[int, int],
    starts: list[int] | None = None,
    min_len: int = default_min_token_len,
) -> list[ParsedToken]:
    tokens = []
    for text, offset, length in iter_tokens(bytes(text_bytes[span[0] : span[1]]), encoding, min_len):
        offset += span[0]
        line = column = None
        if starts is not None:
            line = bisect.bisect_right(starts, offset)
            column = offset - starts[line - 1] + 1
        tokens.append(ParsedToken(text, paragraph, offset, length, paragraph, line, column))
    return tokens


def parse_log(text_bytes: bytes, encoding: str = "ascii", min_len: int = default_min_token_len) -> list[PageGroup]:
    groups = log_paragraphs(text_bytes, encoding)
    starts = line_starts(text_bytes, encoding)
    for group in groups:
        group.tokens = tokenize_span(text_bytes, encoding, group.group_id, group.span, starts, min_len)
    return groups


def chunk_groups(groups: list[PageGroup], chunk_pages: int) -> list[WorkChunk]:
    """Split groups into work units of at most `chunk_pages` pages; unit ids follow group order."""
    chunks: list[WorkChunk] = []
    for group in groups:
        if group.span is not None:
            chunks.append(WorkChunk(len(chunks), group.group_id, tuple(group.pages), (), True, True, group.span))
            continue
        for start in range(0, max(len(group.pages), 1), chunk_pages):
            pages = tuple(group.pages[start : start + chunk_pages])
            chunks.append(
                WorkChunk(
                    unit_id=len(chunks),
                    group_id=group.group_id,
                    pages=pages,
                    data_lens=tuple(group.headers[p].data_len for p in pages),
                    is_first=start == 0,
                    is_last=start + chunk_pages >= len(group.pages),
                )
            )
    return chunks
