"""Dump and log structures produced by the input parser."""

from dataclasses import dataclass, field

from config import DUMP_MAGIC, DUMP_VERSION


@dataclass(frozen=True)
class PageHeader:
    asid: int
    logical_address: int
    data_len: int
    flags: int = 0
    version: int = DUMP_VERSION
    magic: bytes = DUMP_MAGIC


@dataclass(frozen=True)
class ParsedToken:
    """A printable token and the bytes it came from.

    For dumps `byte_offset` is relative to the page payload. For logs the whole file is one
    payload, so `byte_offset` is absolute and `page_index` is the paragraph ordinal.
    """

    text: str
    page_index: int
    byte_offset: int
    byte_len: int
    group_id: int
    line: int | None = None
    column: int | None = None

    @property
    def end(self) -> int:
        return self.byte_offset + self.byte_len


@dataclass(slots=True)
class PageGroup:
    """Pages sharing an address space (or one log paragraph)."""

    group_id: int
    pages: list[int] = field(default_factory=list)
    tokens: list[ParsedToken] = field(default_factory=list)
    headers: dict[int, PageHeader] = field(default_factory=dict)
    # Byte range [start, end) of a log paragraph; None for dump groups
    span: tuple[int, int] | None = None


@dataclass(frozen=True)
class WorkChunk:
    """Unit of parallel work: a contiguous run of a group's pages."""

    unit_id: int
    group_id: int
    pages: tuple[int, ...]
    data_lens: tuple[int, ...]
    is_first: bool = True
    is_last: bool = True
    span: tuple[int, int] | None = None

    @property
    def payload_bytes(self) -> int:
        if self.span is not None:
            return self.span[1] - self.span[0]
        return sum(self.data_lens)
