"""Byte tables for the two supported input encodings.

Both encodings are reduced to one 256-entry table that maps every byte to its ASCII
equivalent when it is printable (0x20-0x7E) or layout whitespace, and to 0x00 otherwise.
Translating a payload through the table keeps byte offsets intact, so tokenization can run
on ASCII regardless of the source code page.
"""

import functools

from .errors import EncodingError

CODECS = {"ascii": "ascii", "ebcdic037": "cp037"}
LAYOUT_WHITESPACE = "\t\n\r\x0b\x0c"


def codec_name(encoding: str) -> str:
    try:
        return CODECS[encoding]
    except KeyError:
        raise EncodingError(f"unknown encoding '{encoding}', expected one of {sorted(CODECS)}") from None


def _decode_byte(value: int, encoding: str) -> str | None:
    if encoding == "ascii":
        return chr(value) if value < 0x80 else None
    return bytes([value]).decode(codec_name(encoding))


@functools.cache
def to_ascii_table(encoding: str) -> bytes:
    """Translation table for `bytes.translate`: printable and whitespace survive, the rest become NUL."""
    codec_name(encoding)
    table = bytearray(256)
    for value in range(256):
        char = _decode_byte(value, encoding)
        if char is not None and (0x20 <= ord(char) <= 0x7E or char in LAYOUT_WHITESPACE):
            table[value] = ord(char)
    return bytes(table)


@functools.cache
def control_bytes(encoding: str) -> bytes:
    """Every byte value that is not a printable character under `encoding`."""
    table = to_ascii_table(encoding)
    return bytes(value for value in range(256) if not 0x20 <= table[value] <= 0x7E)


def encode_text(text: str, encoding: str) -> bytes:
    """Encode printable text into the input encoding."""
    try:
        return text.encode(codec_name(encoding))
    except UnicodeEncodeError as e:
        raise EncodingError(f"cannot encode {text[e.start:e.end]!r} as {encoding}", byte_offset=e.start) from e


def decode_bytes(data: bytes, encoding: str) -> str:
    """Strictly decode `data`; the error names the first offending byte offset."""
    try:
        return data.decode(codec_name(encoding))
    except UnicodeDecodeError as e:
        raise EncodingError(f"invalid {encoding} byte 0x{data[e.start]:02x}", byte_offset=e.start) from e
