"""Output reconstruction: sensitive extents are spliced over, everything else is kept byte-exact."""

import hashlib
from collections.abc import Iterable
from dataclasses import dataclass, field

from config import HEADER_SIZE, PAGE_SIZE, PAYLOAD_CAPACITY, default_overwrite_string
from backend.models.findings import Finding
from backend.services.input_parser import iter_tokens, read_page_header
from backend.utils.codepage import encode_text
from backend.utils.crypto import DIGITS, PRINTABLE_94, FF1Cipher, aes_replacement
from backend.utils.errors import ConfigError, EncodingError, RedactionError
from backend.utils.logger import get_logger

logger = get_logger(__name__)

METHODS = ("overwrite", "hash", "encrypt")
HASH_ALGOS = ("md5", "sha1", "sha256")
LENGTH_POLICIES = ("full", "fit")
ENCRYPT_SCHEMES = ("aes", "fpe_ff1")
DIGIT_ENTITIES = frozenset({"CREDIT_CARD", "SSN", "ZIPCODE", "PHONE_US"})


@dataclass
class RedactionPolicy:
    method: str = "overwrite"
    overwrite_string: str = default_overwrite_string
    overwrite_by_entity: dict[str, str] = field(default_factory=dict)
    hash_algo: str = "sha256"
    hash_length_policy: str = "fit"
    encrypt_scheme: str = "fpe_ff1"
    key_file: str | None = None

    @classmethod
    def from_dict(cls, data: dict | None) -> "RedactionPolicy":
        data = dict(data or {})
        overwrite = data.pop("overwrite_string", default_overwrite_string)
        by_entity = {}
        if isinstance(overwrite, dict):
            by_entity = {k: v for k, v in overwrite.items() if k != "default"}
            overwrite = overwrite.get("default", default_overwrite_string)
        known = {"method", "hash_algo", "hash_length_policy", "encrypt_scheme", "key_file"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}", field="redaction")
        return cls(overwrite_string=overwrite, overwrite_by_entity=by_entity, **data)

    def overwrite_for(self, entity_type: str | None) -> str:
        return self.overwrite_by_entity.get(entity_type, self.overwrite_string)

    def overwrite_strings(self) -> list[str]:
        return [self.overwrite_string, *self.overwrite_by_entity.values()]

    @property
    def needs_key(self) -> bool:
        return self.method == "encrypt"

    def validate(self, input_type: str):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method '{self.method}', expected one of {METHODS}", field="redaction.method")
        if any(not s for s in self.overwrite_strings()):
            raise ConfigError("overwrite string must be non-empty", field="redaction.overwrite_string")
        if self.hash_algo not in HASH_ALGOS:
            raise ConfigError(f"unsupported hash '{self.hash_algo}'", field="redaction.hash_algo")
        if self.hash_length_policy not in LENGTH_POLICIES:
            raise ConfigError(
                f"unknown length policy '{self.hash_length_policy}'", field="redaction.hash_length_policy"
            )
        if self.encrypt_scheme not in ENCRYPT_SCHEMES:
            raise ConfigError(f"unknown scheme '{self.encrypt_scheme}'", field="redaction.encrypt_scheme")
        if input_type == "dump":
            if self.method == "hash" and self.hash_length_policy != "fit":
                raise ConfigError("dump inputs require the fit length policy", field="redaction.hash_length_policy")
            if self.method == "encrypt" and self.encrypt_scheme == "aes":
                raise ConfigError("aes changes lengths and is not allowed for dumps", field="redaction.encrypt_scheme")


def redact_overwrite(plain_len: int, overwrite_string: str) -> str:
    """`overwrite_string` repeated cyclically and cut to `plain_len` characters."""
    if plain_len < 1:
        raise RedactionError(f"plain_len must be >= 1, got {plain_len}")
    if not overwrite_string:
        raise RedactionError("overwrite string must be non-empty")
    repeats = plain_len // len(overwrite_string) + 1
    return (overwrite_string * repeats)[:plain_len]


def redact_hash(
    plain_bytes: bytes, algo: str, length_policy: str, input_type: str = "log", fit_len: int | None = None
) -> str:
    """Hex digest of `plain_bytes`; the fit policy cycles it to `fit_len` (default: the plain length)."""
    if algo not in HASH_ALGOS:
        raise RedactionError(f"unsupported hash algorithm '{algo}'")
    digest = hashlib.new(algo, plain_bytes).hexdigest()
    if length_policy == "full":
        if input_type == "dump":
            raise RedactionError("full-length digests change the dump length")
        return digest
    target = len(plain_bytes) if fit_len is None else fit_len
    if target == 0:
        return ""
    return redact_overwrite(target, digest)


def _ff1_alphabet(entity_type: str | None) -> str:
    return DIGITS if entity_type in DIGIT_ENTITIES else PRINTABLE_94


def _ff1_for(entity_type: str, key: bytes) -> FF1Cipher:
    return FF1Cipher(key, _ff1_alphabet(entity_type))


def fpe_accepts(text: str, entity_type: str | None) -> bool:
    """Whether FF1 can encipher `text`; digit entities count only their digits."""
    alphabet = _ff1_alphabet(entity_type)
    length = sum(c.isdigit() for c in text) if alphabet == DIGITS else len(text)
    return length >= FF1Cipher.min_length(len(alphabet))


def encrypt_fpe(text: str, entity_type: str, key: bytes) -> str:
    """FF1 over digits (separators kept in place) or over printable-94."""
    cipher = _ff1_for(entity_type, key)
    tweak = entity_type.encode("utf-8")
    if cipher.alphabet == DIGITS:
        digits = [c for c in text if c.isdigit()]
        enciphered = iter(cipher.encrypt("".join(digits), tweak))
        return "".join(next(enciphered) if c.isdigit() else c for c in text)
    return cipher.encrypt(text, tweak)


def decrypt_fpe(ciphertext: str, entity_type: str, key: bytes) -> str:
    cipher = _ff1_for(entity_type, key)
    tweak = entity_type.encode("utf-8")
    if cipher.alphabet == DIGITS:
        digits = [c for c in ciphertext if c.isdigit()]
        deciphered = iter(cipher.decrypt("".join(digits), tweak))
        return "".join(next(deciphered) if c.isdigit() else c for c in ciphertext)
    return cipher.decrypt(ciphertext, tweak)


def redact_encrypt(
    plain_bytes: bytes, scheme: str, key: bytes | None, entity_type: str = "", input_type: str = "log"
) -> bytes:
    if key is None:
        raise RedactionError("encryption requires key material")
    if scheme == "fpe_ff1":
        try:
            text = plain_bytes.decode("ascii")
        except UnicodeDecodeError as e:
            raise RedactionError("FF1 plaintext must be printable ASCII") from e
        return encrypt_fpe(text, entity_type, key).encode("ascii")
    if scheme == "aes":
        if input_type == "dump":
            raise RedactionError("aes is not allowed for dump inputs")
        return aes_replacement(plain_bytes, key).encode("ascii")
    raise RedactionError(f"unknown encryption scheme '{scheme}'")


class Redactor:
    """Computes replacements for one run; equal plaintexts get equal replacements."""

    def __init__(self, policy: RedactionPolicy, encoding: str, input_type: str, key: bytes | None = None):
        self.policy = policy
        self.encoding = encoding
        self.input_type = input_type
        self.key = key
        self._cache: dict[tuple[str, str | None], bytes] = {}

    def _encode(self, text: str) -> bytes:
        try:
            return encode_text(text, self.encoding)
        except EncodingError as e:
            raise RedactionError(f"replacement encoding failure: {e.message}") from e

    def replacement_text(self, text: str, entity_type: str | None) -> str:
        """Replacement for one token; FF1 inputs below the cipher minimum get the overwrite pattern."""
        policy = self.policy
        ff1 = policy.method == "encrypt" and policy.encrypt_scheme == "fpe_ff1"
        if policy.method == "overwrite" or (ff1 and not fpe_accepts(text, entity_type)):
            return redact_overwrite(len(text), policy.overwrite_for(entity_type))
        plain = text.encode("ascii")
        if policy.method == "hash":
            return redact_hash(plain, policy.hash_algo, policy.hash_length_policy, self.input_type)
        return redact_encrypt(plain, policy.encrypt_scheme, self.key, entity_type or "", self.input_type).decode(
            "ascii"
        )

    def replacement_for(self, text: str, entity_type: str | None) -> bytes:
        cache_key = (text, entity_type)
        replacement = self._cache.get(cache_key)
        if replacement is None:
            replacement = self._encode(self.replacement_text(text, entity_type))
            self._cache[cache_key] = replacement
        return replacement

    def page_fill(self, payload: bytes) -> bytes:
        """Replacement for a whole payload region of `len(payload)` bytes."""
        if not payload:
            return b""
        if self.policy.method == "hash":
            return self._encode(redact_hash(payload, self.policy.hash_algo, "fit"))
        return self._encode(redact_overwrite(len(payload), self.policy.overwrite_string))


def _token_edits(findings: Iterable[Finding], redactor: Redactor, input_type: str, total: int):
    edits = []
    for finding in findings:
        token = finding.token
        if input_type == "dump":
            if token.end > PAYLOAD_CAPACITY:
                raise RedactionError(f"extent {token.byte_offset}+{token.byte_len} outside payload", phase="redact")
            start = token.page_index * PAGE_SIZE + HEADER_SIZE + token.byte_offset
        else:
            start = token.byte_offset
        end = start + token.byte_len
        if start < 0 or end > total:
            raise RedactionError(f"extent [{start}, {end}) out of range for {total} input bytes")
        edits.append((start, end, redactor.replacement_for(token.text, finding.entity_type)))
    return edits


def apply_redactions(
    input_bytes,
    sensitive_findings: Iterable[Finding],
    policy: RedactionPolicy,
    mode: str = "concise",
    encoding: str = "ascii",
    input_type: str = "dump",
    wipe_units: Iterable = (),
    key: bytes | None = None,
    redactor: Redactor | None = None,
) -> bytes:
    """Return the redacted copy of `input_bytes`.

    Concise findings replace only their extents. `wipe_units` are whole units to redact: page
    indices for dumps (payload regions, headers untouched) or (start, end) paragraph spans for
    logs (every token extent in the span). In boolean/skip mode the pages of the given
    findings are wiped as a whole.
    """
    redactor = redactor or Redactor(policy, encoding, input_type, key)
    findings = list(sensitive_findings)
    total = len(input_bytes)
    wipe = set(wipe_units)
    if mode in ("boolean", "skip"):
        wipe |= {f.token.page_index for f in findings} if input_type == "dump" else set()
        if input_type == "dump":
            findings = []

    edits = []
    if input_type == "dump":
        for page_index in sorted(wipe):
            offset = page_index * PAGE_SIZE
            if offset + PAGE_SIZE > total:
                raise RedactionError(f"page {page_index} out of range")
            header = read_page_header(input_bytes[offset : offset + HEADER_SIZE], page_index)
            start = offset + HEADER_SIZE
            payload = bytes(input_bytes[start : start + header.data_len])
            edits.append((start, start + header.data_len, redactor.page_fill(payload)))
        findings = [f for f in findings if f.token.page_index not in wipe]
    else:
        for span_start, span_end in sorted(wipe):
            for text, offset, length in iter_tokens(bytes(input_bytes[span_start:span_end]), encoding, 1):
                edits.append((span_start + offset, span_start + offset + length, redactor.replacement_for(text, None)))
        findings = [f for f in findings if not any(s <= f.token.byte_offset < e for s, e in wipe)]
    edits.extend(_token_edits(findings, redactor, input_type, total))
    edits.sort(key=lambda e: e[0])

    parts = []
    cursor = 0
    for start, end, replacement in edits:
        if start < cursor:
            raise RedactionError(f"overlapping extents at byte {start}")
        parts.append(bytes(input_bytes[cursor:start]))
        parts.append(replacement)
        cursor = end
    parts.append(bytes(input_bytes[cursor:]))
    output = b"".join(parts)
    if input_type == "dump" and len(output) != total:
        raise RedactionError(f"output length {len(output)} differs from input length {total}")
    return output
