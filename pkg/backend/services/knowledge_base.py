"""Identifiers, sensitivity mappings, feedback and augment ingestion."""

import json
import os
import re
from collections.abc import Callable, Iterable

from config import PAYLOAD_CAPACITY, default_min_token_len, default_vicinity_window
from backend.models.knowledge import (
    FEEDBACK_ENTITY,
    RESERVED_ENTITIES,
    CustomIdentifierRef,
    FeedbackStore,
    Identifier,
    QuasiGroup,
    SensitivityMapping,
    normalize_term,
)
from backend.repositories.knowledge_repository import KnowledgeRepository
from backend.services.input_parser import TOKEN_TEXT_RE
from backend.services.reporting import PAGE_ROW_PREFIXES, parse_marked_report
from backend.utils.errors import ConfigError, FeedbackError, KnowledgeBaseError
from backend.utils.logger import get_logger
from backend.utils.utils import get_resource_path, write_atomic

logger = get_logger(__name__)

PERSON_NAMES_PATH = os.path.join("data", "identifiers", "person_names.txt")
GENDER_TERMS = frozenset({"male", "female", "m", "f", "man", "woman", "nonbinary", "non-binary"})

_LABEL = r"[A-Za-z0-9](?:[A-Za-z0-9\-]*[A-Za-z0-9])?"
EMAIL_PATTERN = rf"[A-Za-z0-9](?:[A-Za-z0-9._+\-]*[A-Za-z0-9])?@{_LABEL}(?:\.{_LABEL})*\.[A-Za-z]{{2,}}"

_REGEX_BUILTINS = {
    "CREDIT_CARD": (r"(?:\d{4}-){3}\d{1,7}|\d{13,19}", "luhn", 13, 23),
    "SSN": (r"(?!000|666|9\d\d)\d{3}-(?!00)\d{2}-(?!0000)\d{4}", None, 11, 11),
    "EMAIL": (EMAIL_PATTERN, None, 6, 254),
    "PHONE_US": (r"(?:1-)?[2-9]\d{2}-[2-9]\d{2}-\d{4}", None, 12, 14),
    "IPV4": (r"(?:(?:25[0-5]|2[0-4]\d|1\d\d|[1-9]?\d)\.){3}(?:25[0-5]|2[0-4]\d|1\d\d|[1-9]?\d)", None, 7, 15),
    "ZIPCODE": (r"\d{5}(?:-\d{4})?", None, 5, 10),
}


def luhn_check(digit_string: str) -> bool:
    """True iff the Luhn checksum of `digit_string` is 0 mod 10."""
    if not digit_string or not digit_string.isascii() or not digit_string.isdigit():
        raise ValueError(f"luhn_check expects ASCII digits, got {digit_string!r}")
    total = 0
    for idx, char in enumerate(reversed(digit_string)):
        digit = int(char)
        if idx % 2 == 1:
            digit *= 2
            if digit > 9:
                digit -= 9
        total += digit
    return total % 10 == 0


def _luhn_token(text: str) -> bool:
    return luhn_check(text.replace("-", ""))


VALIDATORS: dict[str, Callable[[str], bool]] = {"luhn": _luhn_token}


def load_dictionary_file(path: str) -> frozenset[str]:
    with open(path, encoding="utf-8") as f:
        return frozenset(term for term in (normalize_term(line) for line in f) if term)


def _dictionary_identifier(name: str, terms: Iterable[str], source: str = "builtin") -> Identifier:
    terms = frozenset(normalize_term(t) for t in terms if normalize_term(t))
    lengths = [len(t) for t in terms] or [1]
    return Identifier(name, "dictionary", terms=terms, min_len=min(lengths), max_len=max(lengths), source=source)


def load_builtin_identifiers() -> list[Identifier]:
    identifiers = [
        Identifier(name, "regex", pattern=pattern, validator=validator, min_len=lo, max_len=hi)
        for name, (pattern, validator, lo, hi) in _REGEX_BUILTINS.items()
    ]
    identifiers.append(_dictionary_identifier("GENDER", GENDER_TERMS))
    names = load_dictionary_file(get_resource_path(PERSON_NAMES_PATH))
    identifiers.append(_dictionary_identifier("PERSON_NAME", names))
    return sorted(identifiers, key=lambda i: i.name)


def feedback_identifier(feedback: FeedbackStore) -> Identifier:
    """Exact-text pseudo identifier for tokens forced sensitive by feedback."""
    lengths = [len(t) for t in feedback.force_sensitive] or [1]
    return Identifier(
        FEEDBACK_ENTITY,
        "exact",
        terms=frozenset(feedback.force_sensitive),
        min_len=min(lengths),
        max_len=max(lengths),
        source="feedback",
    )


def build_matcher(identifier: Identifier) -> Callable[[str], bool]:
    """Compile an identifier into a predicate over token text."""
    if identifier.kind == "dictionary":
        terms = identifier.terms
        return lambda text: text.casefold() in terms
    if identifier.kind == "exact":
        terms = identifier.terms
        return lambda text: text in terms
    if identifier.kind == "regex":
        fullmatch = re.compile(identifier.pattern).fullmatch
        if identifier.validator is None:
            return lambda text: fullmatch(text) is not None
        validator = VALIDATORS[identifier.validator]
        return lambda text: fullmatch(text) is not None and validator(text)
    raise KnowledgeBaseError(f"unknown identifier kind '{identifier.kind}' for {identifier.name}")


class KnowledgeBase:
    """Identifiers by entity name plus the feedback store; read-only during a run."""

    def __init__(self, identifiers: Iterable[Identifier], feedback: FeedbackStore | None = None):
        self.identifiers: dict[str, Identifier] = {}
        for identifier in identifiers:
            if identifier.name in self.identifiers:
                raise KnowledgeBaseError(f"duplicate identifier name {identifier.name}")
            if identifier.min_len > identifier.max_len:
                raise KnowledgeBaseError(
                    f"{identifier.name}: min_len {identifier.min_len} > max_len {identifier.max_len}"
                )
            for dependency in identifier.depends_on:
                if dependency == identifier.name:
                    raise KnowledgeBaseError(f"{identifier.name} depends on itself")
            self.identifiers[identifier.name] = identifier
        self.feedback = feedback or FeedbackStore()

    def get(self, name: str) -> Identifier:
        try:
            return self.identifiers[name]
        except KeyError:
            raise KnowledgeBaseError(f"unresolved entity type '{name}'") from None

    def __contains__(self, name: str) -> bool:
        return name in self.identifiers

    def all_identifiers(self) -> list[Identifier]:
        """Every loaded identifier (plus FEEDBACK when feedback forces tokens), alphabetical."""
        identifiers = list(self.identifiers.values())
        if self.feedback.force_sensitive:
            identifiers.append(feedback_identifier(self.feedback))
        return sorted(identifiers, key=lambda i: i.name)


def _parse_quasi(entry, index: int) -> QuasiGroup:
    if isinstance(entry, dict):
        entities = entry.get("entities", [])
        vicinity = entry.get("vicinity", default_vicinity_window)
    else:
        entities, vicinity = entry, default_vicinity_window
    if len(set(entities)) < 2:
        raise ConfigError("a quasi group needs at least two distinct entities", field=f"quasi[{index}].entities")
    if not isinstance(vicinity, int) or vicinity < 1:
        raise ConfigError(f"vicinity must be an integer >= 1, got {vicinity!r}", field=f"quasi[{index}].vicinity")
    return QuasiGroup(frozenset(entities), vicinity)


def sensitivity_mapping_from_dict(data: dict) -> SensitivityMapping:
    unknown = set(data) - {"direct", "quasi", "custom_identifiers"}
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", field="sensitivity_mapping")
    customs = []
    for i, entry in enumerate(data.get("custom_identifiers", [])):
        if "entity_type" not in entry or "path" not in entry:
            raise ConfigError("entries need entity_type and path", field=f"custom_identifiers[{i}]")
        customs.append(CustomIdentifierRef(entry["entity_type"], entry["path"]))
    return SensitivityMapping(
        direct=frozenset(data.get("direct", [])),
        quasi=tuple(_parse_quasi(entry, i) for i, entry in enumerate(data.get("quasi", []))),
        custom_identifiers=tuple(customs),
    )


def load_sensitivity_mapping(path: str | None) -> SensitivityMapping:
    """Load a mapping JSON file; without a file every built-in entity type is direct."""
    if not path:
        return SensitivityMapping(direct=frozenset(i.name for i in load_builtin_identifiers()))
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"sensitivity mapping not found: {path}", field="sensitivity_mapping") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {path}: {e}", field="sensitivity_mapping") from e
    return sensitivity_mapping_from_dict(data)


def load_custom_identifier(entity_type: str, path: str) -> Identifier:
    if not os.path.exists(path):
        raise KnowledgeBaseError(f"custom identifier artifact not found: {path}")
    return _dictionary_identifier(entity_type, load_dictionary_file(path), source="custom")


def load_knowledge_base(
    mapping: SensitivityMapping,
    repository: KnowledgeRepository | None = None,
    feedback: FeedbackStore | None = None,
) -> KnowledgeBase:
    """Built-ins, the mapping's custom identifiers, registered augments and persisted feedback."""
    identifiers = {i.name: i for i in load_builtin_identifiers()}
    for ref in mapping.custom_identifiers:
        if ref.entity_type in identifiers or ref.entity_type in RESERVED_ENTITIES:
            raise KnowledgeBaseError(f"custom identifier {ref.entity_type} clashes with a built-in or reserved name")
        identifiers[ref.entity_type] = load_custom_identifier(ref.entity_type, ref.path)
    if repository is not None:
        for row in repository.get_custom_identifiers():
            if row["entity_type"] not in identifiers and os.path.exists(row["path"]):
                identifiers[row["entity_type"]] = load_custom_identifier(row["entity_type"], row["path"])
        if feedback is None:
            feedback = repository.load_feedback()
    kb = KnowledgeBase(identifiers.values(), feedback)
    logger.info(
        f"Knowledge base loaded: {len(kb.identifiers)} identifiers, "
        f"{len(kb.feedback.suppress)} suppressed, {len(kb.feedback.force_sensitive)} forced"
    )
    return kb


def minimal_identifier_set(mapping: SensitivityMapping, kb: KnowledgeBase) -> list[Identifier]:
    """Identifiers the mapping needs, closed over dependencies, in alphabetical order."""
    pending = sorted(mapping.named_entities)
    selected: dict[str, Identifier] = {}
    while pending:
        name = pending.pop()
        if name in selected:
            continue
        if name == FEEDBACK_ENTITY:
            raise KnowledgeBaseError(f"{FEEDBACK_ENTITY} is reserved and cannot appear in a mapping")
        identifier = kb.get(name)
        selected[name] = identifier
        pending.extend(identifier.depends_on)
    if kb.feedback.force_sensitive:
        selected[FEEDBACK_ENTITY] = feedback_identifier(kb.feedback)
    return sorted(selected.values(), key=lambda i: i.name)


def overwrite_tokens(overwrite_string: str, min_len: int = default_min_token_len) -> set[str]:
    """Every token a cyclic overwrite replacement of any length can contain."""
    if not overwrite_string:
        return set()
    probe = (overwrite_string * 4)[: 3 * len(overwrite_string)]
    bounded = all(len(t) < 2 * len(overwrite_string) for t in TOKEN_TEXT_RE.findall(probe))
    base = probe if bounded else (overwrite_string * (PAYLOAD_CAPACITY // len(overwrite_string) + 1))[:PAYLOAD_CAPACITY]
    tokens = set()
    for word in set(TOKEN_TEXT_RE.findall(base)):
        for end in range(1, len(word) + 1):
            tokens.update(t for t in TOKEN_TEXT_RE.findall(word[:end]) if len(t) >= min_len)
    return tokens


def validate_overwrite_strings(
    strings: Iterable[str], identifiers: Iterable[Identifier], feedback: FeedbackStore | None = None
) -> None:
    """Reject overwrite strings whose replacements could themselves be classified."""
    matchers = [(i.name, build_matcher(i)) for i in identifiers]
    forced = feedback.force_sensitive if feedback else set()
    for string in strings:
        if not string:
            raise ConfigError("overwrite string must be non-empty", field="redaction.overwrite_string")
        for token in sorted(overwrite_tokens(string)):
            if token in forced:
                raise ConfigError(
                    f"replacement token {token!r} is forced sensitive", field="redaction.overwrite_string"
                )
            for name, matches in matchers:
                if matches(token):
                    raise ConfigError(
                        f"replacement token {token!r} of {string!r} matches identifier {name}",
                        field="redaction.overwrite_string",
                    )


def ingest_augment(
    source_file: str, entity_type: str, output_path: str, repository: KnowledgeRepository | None = None
) -> Identifier:
    """Normalize, dedupe and sort a term list into a dictionary artifact."""
    if entity_type in RESERVED_ENTITIES or entity_type in {i.name for i in load_builtin_identifiers()}:
        raise KnowledgeBaseError(f"entity type {entity_type} duplicates a built-in or reserved name")
    if not os.path.exists(source_file):
        raise KnowledgeBaseError(f"augment source not found: {source_file}")
    terms = sorted(load_dictionary_file(source_file))
    if not terms:
        raise KnowledgeBaseError(f"augment source {source_file} contains no terms")
    write_atomic(output_path, ("\n".join(terms) + "\n").encode("utf-8"))
    if repository is not None:
        repository.register_custom_identifier(entity_type, os.path.abspath(output_path), len(terms))
    logger.info(f"Augment stored {len(terms)} terms for {entity_type} at {output_path}")
    return _dictionary_identifier(entity_type, terms, source="custom")


def apply_feedback(
    sensitive_report,
    nonsensitive_report,
    store: FeedbackStore | None = None,
    key: bytes | None = None,
) -> FeedbackStore:
    """Fold N-marked report rows into the feedback store.

    N in the sensitive report suppresses (token, entity); N in the non-sensitive report forces
    the token sensitive. Rows from this ingest override earlier state for the same token.
    """
    store = store or FeedbackStore()
    suppress_rows = [r for r in parse_marked_report(sensitive_report, key) if not r.token.startswith(PAGE_ROW_PREFIXES)]
    force_rows = [r for r in parse_marked_report(nonsensitive_report, key) if not r.token.startswith(PAGE_ROW_PREFIXES)]

    force_tokens = {r.token for r in force_rows}
    conflicts = sorted({r.token for r in suppress_rows if r.entity_type != FEEDBACK_ENTITY} & force_tokens)
    if conflicts:
        raise FeedbackError(f"conflicting marks for {len(conflicts)} token(s), first: {conflicts[0]!r}")

    suppress = {(t, e) for t, e in store.suppress if t not in force_tokens}
    force = set(store.force_sensitive)
    for row in suppress_rows:
        if row.entity_type == FEEDBACK_ENTITY:
            force.discard(row.token)
        else:
            suppress.add((row.token, row.entity_type))
            force.discard(row.token)
    force |= force_tokens
    updated = FeedbackStore(suppress=suppress, force_sensitive=force)
    logger.info(
        f"Feedback applied: {len(suppress_rows)} suppress row(s), {len(force_rows)} force row(s); "
        f"store now {len(updated.suppress)} suppressed, {len(updated.force_sensitive)} forced"
    )
    return updated
