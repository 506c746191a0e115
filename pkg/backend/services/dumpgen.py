"""Deterministic synthetic KDMP dumps with planted sensitive tokens and a ground-truth manifest."""

import math
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import pandas as pd

from config import PAGE_SIZE, PAYLOAD_CAPACITY, SUPPORTED_ENCODINGS
from backend.models.dump import PageHeader
from backend.services.input_parser import pack_page_header
from backend.services.knowledge_base import GENDER_TERMS, PERSON_NAMES_PATH, load_dictionary_file
from backend.utils.codepage import control_bytes, encode_text
from backend.utils.errors import ConfigError, GenerationError
from backend.utils.helper import time_execution
from backend.utils.logger import get_logger
from backend.utils.utils import get_resource_path, write_atomic

logger = get_logger(__name__)

FILLER_WORDS_PATH = os.path.join("data", "dumpgen", "filler_words.txt")
MANIFEST_COLUMNS = ["page_index", "byte_offset", "byte_len", "entity_type", "plaintext"]
EMAIL_DOMAINS = ("example.com", "example.org", "mail.example.net", "corp.example.io")
ASID_BASE = 0x100
LOGICAL_BASE = 0x7F0000000000
MAX_U64 = 2**64 - 1


@dataclass(frozen=True, order=True)
class GroundTruthEntry:
    page_index: int
    byte_offset: int
    byte_len: int
    entity_type: str
    plaintext: str


@dataclass
class DumpGenConfig:
    total_size: int
    pct_sensitive_pages: float = 0.1
    pct_sensitive_per_page: float = 0.05
    pct_control_data: float = 0.3
    encoding: str = "ascii"
    entity_mix: list[tuple[str, float]] = field(
        default_factory=lambda: [
            ("CREDIT_CARD", 1.0),
            ("EMAIL", 1.0),
            ("SSN", 1.0),
            ("PHONE_US", 1.0),
            ("IPV4", 1.0),
            ("PERSON_NAME", 1.0),
        ]
    )
    seed: int = 0
    pages_per_asid: int = 16
    quasi_groups: list[list[str]] = field(default_factory=lambda: [["GENDER", "ZIPCODE"]])
    custom_terms: dict[str, list[str]] = field(default_factory=dict)
    max_total_size: int = 8 * 1024**3

    @classmethod
    def from_dict(cls, data: dict) -> "DumpGenConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}", field="generate")
        if "total_size" not in data:
            raise ConfigError("missing required key", field="total_size")
        data = dict(data)
        if "entity_mix" in data:
            data["entity_mix"] = [_mix_entry(entry, i) for i, entry in enumerate(data["entity_mix"])]
        config = cls(**data)
        config.validate()
        return config

    @property
    def page_count(self) -> int:
        return self.total_size // PAGE_SIZE

    def validate(self):
        if not isinstance(self.total_size, int) or self.total_size < PAGE_SIZE:
            raise ConfigError(f"must be an integer >= {PAGE_SIZE}", field="total_size")
        if self.total_size % PAGE_SIZE:
            raise ConfigError(f"must be divisible by the page size {PAGE_SIZE}", field="total_size")
        if self.total_size > self.max_total_size:
            raise GenerationError(f"size overflow: total_size {self.total_size} exceeds {self.max_total_size}")
        for name in ("pct_sensitive_pages", "pct_sensitive_per_page", "pct_control_data"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
                raise ConfigError(f"must be a fraction in [0, 1], got {value!r}", field=name)
        if self.pct_sensitive_per_page + self.pct_control_data > 1.0:
            raise ConfigError("pct_sensitive_per_page + pct_control_data must not exceed 1", field="pct_control_data")
        if self.encoding not in SUPPORTED_ENCODINGS:
            raise ConfigError(f"unknown encoding '{self.encoding}'", field="encoding")
        if not isinstance(self.seed, int) or not 0 <= self.seed <= MAX_U64:
            raise ConfigError("must be a 64-bit unsigned integer", field="seed")
        if not isinstance(self.pages_per_asid, int) or self.pages_per_asid < 1:
            raise ConfigError("must be an integer >= 1", field="pages_per_asid")
        constructible = set(PLANT_CONSTRUCTORS) | set(self.custom_terms)
        for name, weight in self.entity_mix:
            if name not in constructible:
                raise ConfigError(f"no constructor for entity type '{name}'", field="entity_mix")
            if weight <= 0:
                raise ConfigError(f"weight for {name} must be positive", field="entity_mix")
        for name, terms in self.custom_terms.items():
            if not terms or any(not isinstance(t, str) or not t.strip() or " " in t.strip() for t in terms):
                raise ConfigError(f"terms for {name} must be non-empty single tokens", field="custom_terms")
        if self.pct_sensitive_pages > 0 and not self.entity_mix:
            raise ConfigError("sensitive pages requested but entity_mix is empty", field="entity_mix")
        for group in self.quasi_groups:
            if len(set(group)) < 2:
                raise ConfigError("each quasi group needs two distinct entities", field="quasi_groups")


def _mix_entry(entry, index: int) -> tuple[str, float]:
    if isinstance(entry, dict):
        if "entity_type" not in entry:
            raise ConfigError("entries need entity_type", field=f"entity_mix[{index}]")
        return entry["entity_type"], float(entry.get("weight", 1.0))
    if isinstance(entry, str):
        return entry, 1.0
    name, weight = entry
    return name, float(weight)


def _luhn_complete(body: str) -> str:
    """Append the check digit that makes `body` + digit Luhn-valid."""
    total = 0
    for idx, char in enumerate(reversed(body)):
        digit = int(char)
        if idx % 2 == 0:
            digit *= 2
            if digit > 9:
                digit -= 9
        total += digit
    return body + str((10 - total % 10) % 10)


def make_credit_card(rng: np.random.Generator) -> str:
    prefix = "4" if rng.random() < 0.5 else "5" + str(rng.integers(1, 6))
    body = prefix + "".join(str(d) for d in rng.integers(0, 10, size=15 - len(prefix)))
    return _luhn_complete(body)


def make_ssn(rng: np.random.Generator) -> str:
    area = 666
    while area == 666:
        area = int(rng.integers(1, 900))
    return f"{area:03d}-{int(rng.integers(1, 100)):02d}-{int(rng.integers(1, 10000)):04d}"


def make_phone(rng: np.random.Generator) -> str:
    return f"{int(rng.integers(200, 1000))}-{int(rng.integers(200, 1000))}-{int(rng.integers(0, 10000)):04d}"


def make_ipv4(rng: np.random.Generator) -> str:
    return ".".join(str(int(o)) for o in rng.integers(1, 255, size=4))


def make_zipcode(rng: np.random.Generator) -> str:
    return f"{int(rng.integers(0, 100000)):05d}"


class _Vocabulary:
    def __init__(self):
        self.names = sorted(load_dictionary_file(get_resource_path(PERSON_NAMES_PATH)))
        self.genders = sorted(t for t in GENDER_TERMS if len(t) >= 2)
        self.filler = sorted(load_dictionary_file(get_resource_path(FILLER_WORDS_PATH)))


def make_email(rng: np.random.Generator, vocab: _Vocabulary) -> str:
    local = vocab.names[int(rng.integers(len(vocab.names)))]
    return f"{local}{int(rng.integers(1, 1000))}@{EMAIL_DOMAINS[int(rng.integers(len(EMAIL_DOMAINS)))]}"


def make_person_name(rng: np.random.Generator, vocab: _Vocabulary) -> str:
    return vocab.names[int(rng.integers(len(vocab.names)))].title()


def make_gender(rng: np.random.Generator, vocab: _Vocabulary) -> str:
    return vocab.genders[int(rng.integers(len(vocab.genders)))]


PLANT_CONSTRUCTORS = {
    "CREDIT_CARD": lambda rng, vocab: make_credit_card(rng),
    "SSN": lambda rng, vocab: make_ssn(rng),
    "EMAIL": make_email,
    "PHONE_US": lambda rng, vocab: make_phone(rng),
    "IPV4": lambda rng, vocab: make_ipv4(rng),
    "ZIPCODE": lambda rng, vocab: make_zipcode(rng),
    "GENDER": make_gender,
    "PERSON_NAME": make_person_name,
}


class _PageBuilder:
    """Builds payloads for one dump; all randomness flows through one generator."""

    def __init__(self, config: DumpGenConfig, rng: np.random.Generator, vocab: _Vocabulary):
        self.config = config
        self.rng = rng
        self.vocab = vocab
        self.control = np.frombuffer(control_bytes(config.encoding), dtype=np.uint8)
        self.names = [name for name, _ in config.entity_mix]
        weights = np.array([w for _, w in config.entity_mix], dtype=float)
        self.weights = weights / weights.sum() if len(weights) else weights
        mix = set(self.names)
        self.bundles = {}
        for group in config.quasi_groups:
            if set(group) <= mix:
                for member in group:
                    self.bundles.setdefault(member, sorted(set(group)))
        words = rng.choice(np.array(vocab.filler, dtype=object), size=4 * PAYLOAD_CAPACITY // 5)
        self.corpus = " ".join(words) + " "

    def _plant_text(self, entity: str) -> str:
        terms = self.config.custom_terms.get(entity)
        if terms is not None:
            return terms[int(self.rng.integers(len(terms)))].strip()
        return PLANT_CONSTRUCTORS[entity](self.rng, self.vocab)

    def _plants(self, budget: int, available: int) -> list[list[tuple[str, str]]]:
        """Planted bundles (lists of (entity, text)) whose padded size stays within budget."""
        plants: list[list[tuple[str, str]]] = []
        used = 0
        while True:
            entity = self.names[int(self.rng.choice(len(self.names), p=self.weights))]
            members = self.bundles.get(entity, [entity])
            bundle = [(member, self._plant_text(member)) for member in members]
            size = sum(len(text) + 2 for _, text in bundle)
            if plants and used + size > budget:
                break
            if used + size > available:
                break
            plants.append(bundle)
            used += size
        return plants

    def _filler(self, length: int) -> str:
        if length <= 0:
            return ""
        start = int(self.rng.integers(0, len(self.corpus) - length))
        window = self.corpus[start : start + length]
        first = window.find(" ")
        last = window.rfind(" ")
        if first < 0 or first == last:
            return " " * length
        return " " * (first + 1) + window[first + 1 : last] + " " * (length - last)

    def _control_runs(self, total: int) -> list[bytes]:
        if total <= 0:
            return []
        data = self.rng.choice(self.control, size=total).tobytes()
        lengths = self.rng.integers(4, 65, size=total // 4 + 1)
        runs = []
        pos = 0
        for length in lengths:
            if pos >= total:
                break
            end = min(total, pos + int(length))
            if 0 < total - end < 4:
                end = total
            runs.append(data[pos:end])
            pos = end
        return runs

    def build(self, sensitive: bool) -> tuple[bytes, list[tuple[int, str, str]]]:
        """One full payload and its plants as (offset, entity, text)."""
        config = self.config
        control_total = round(config.pct_control_data * PAYLOAD_CAPACITY)
        plants = []
        if sensitive:
            budget = round(config.pct_sensitive_per_page * PAYLOAD_CAPACITY)
            plants = self._plants(budget, PAYLOAD_CAPACITY)
            plant_bytes = sum(len(text) + 2 for bundle in plants for _, text in bundle)
            control_total = min(control_total, PAYLOAD_CAPACITY - plant_bytes)
        else:
            plant_bytes = 0
        runs = self._control_runs(control_total)
        filler_total = PAYLOAD_CAPACITY - control_total - plant_bytes

        pieces = len(runs) + 1
        cuts = np.sort(self.rng.integers(0, filler_total + 1, size=pieces - 1)) if pieces > 1 else np.array([], int)
        bounds = [0, *[int(c) for c in cuts], filler_total]
        texts: list[tuple[str, list[tuple[str, str]] | None]] = [
            (self._filler(bounds[i + 1] - bounds[i]), None) for i in range(pieces)
        ]
        texts.extend(("".join(f" {text} " for _, text in bundle), bundle) for bundle in plants)
        order = self.rng.permutation(len(texts))

        payload = bytearray()
        planted: list[tuple[int, str, str]] = []
        run_iter = iter(runs)
        for slot, index in enumerate(order):
            text, bundle = texts[int(index)]
            if bundle is not None:
                cursor = len(payload)
                for entity, token in bundle:
                    planted.append((cursor + 1, entity, token))
                    cursor += len(token) + 2
            payload += encode_text(text, config.encoding)
            if slot < len(runs):
                payload += next(run_iter)
        for run in run_iter:
            payload += run
        if len(payload) != PAYLOAD_CAPACITY:
            raise GenerationError(f"internal payload size {len(payload)} != {PAYLOAD_CAPACITY}")
        return bytes(payload), planted


@time_execution("generate_dump")
def generate_dump(config: DumpGenConfig) -> tuple[bytes, list[GroundTruthEntry]]:
    """Build a dump and its sorted manifest; a pure function of the config (seed included)."""
    config.validate()
    rng = np.random.Generator(np.random.PCG64(config.seed))
    page_count = config.page_count
    sensitive_count = min(page_count, math.ceil(config.pct_sensitive_pages * page_count - 1e-9))
    sensitive = set(int(p) for p in rng.choice(page_count, size=sensitive_count, replace=False))
    logical_order = rng.permutation(page_count)
    builder = _PageBuilder(config, rng, _Vocabulary())

    out = bytearray()
    manifest: list[GroundTruthEntry] = []
    for page_index in range(page_count):
        ordinal = int(logical_order[page_index])
        asid, slot = divmod(ordinal, config.pages_per_asid)
        header = PageHeader(
            asid=ASID_BASE + asid,
            logical_address=LOGICAL_BASE + slot * PAGE_SIZE,
            data_len=PAYLOAD_CAPACITY,
        )
        payload, planted = builder.build(page_index in sensitive)
        out += pack_page_header(header)
        out += payload
        manifest.extend(
            GroundTruthEntry(page_index, offset, len(text), entity, text) for offset, entity, text in planted
        )
    manifest.sort()
    logger.info(
        f"Generated {page_count} pages ({sensitive_count} sensitive, {len(manifest)} plants) "
        f"with seed {config.seed}, encoding {config.encoding}"
    )
    return bytes(out), manifest


def write_manifest(manifest: list[GroundTruthEntry], path: str):
    df = pd.DataFrame([asdict(e) for e in manifest], columns=MANIFEST_COLUMNS)
    write_atomic(path, df.to_csv(index=False, lineterminator="\n").encode("utf-8"))


def read_manifest(path: str) -> list[GroundTruthEntry]:
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    if list(df.columns) != MANIFEST_COLUMNS:
        raise GenerationError(f"bad manifest header {list(df.columns)}")
    return [
        GroundTruthEntry(int(page), int(offset), int(length), entity, plaintext)
        for page, offset, length, entity, plaintext in df.itertuples(index=False, name=None)
    ]


def write_dump(dump_bytes: bytes, path: str):
    write_atomic(path, dump_bytes)


def craft_dump(page_texts: list[str], encoding: str = "ascii", asids: list[int] | None = None) -> bytes:
    """A dump whose page i carries `page_texts[i]`; pages share one address space unless `asids` is given."""
    asids = asids or [ASID_BASE] * len(page_texts)
    if len(asids) != len(page_texts):
        raise GenerationError("one asid per page is required")
    out = bytearray()
    slots: dict[int, int] = {}
    for text, asid in zip(page_texts, asids):
        payload = encode_text(text, encoding)
        if len(payload) > PAYLOAD_CAPACITY:
            raise GenerationError(f"page text of {len(payload)} bytes exceeds payload capacity {PAYLOAD_CAPACITY}")
        slot = slots.get(asid, 0)
        slots[asid] = slot + 1
        header = PageHeader(asid=asid, logical_address=LOGICAL_BASE + slot * PAGE_SIZE, data_len=len(payload))
        out += pack_page_header(header)
        out += payload.ljust(PAYLOAD_CAPACITY, b"\x00")
    return bytes(out)
