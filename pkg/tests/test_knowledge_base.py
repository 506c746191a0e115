"""Tests for identifiers, mappings, augment ingestion and feedback folding."""

import json

import pytest

from backend.models.findings import ReportRow
from backend.models.knowledge import FEEDBACK_ENTITY, FeedbackStore, QuasiGroup, SensitivityMapping
from backend.repositories.knowledge_repository import KnowledgeRepository
from backend.services.knowledge_base import (
    KnowledgeBase,
    apply_feedback,
    build_matcher,
    ingest_augment,
    load_builtin_identifiers,
    load_knowledge_base,
    load_sensitivity_mapping,
    luhn_check,
    minimal_identifier_set,
    overwrite_tokens,
    validate_overwrite_strings,
)
from backend.services.reporting import rows_to_csv
from backend.utils.errors import ConfigError, FeedbackError, KnowledgeBaseError


def _matcher(name):
    identifier = next(i for i in load_builtin_identifiers() if i.name == name)
    return build_matcher(identifier)


def test_luhn_examples():
    assert luhn_check("0") is True
    assert luhn_check("4539578763621486") is True
    assert luhn_check("4539578763621487") is False
    with pytest.raises(ValueError):
        luhn_check("12a4")
    with pytest.raises(ValueError):
        luhn_check("")


def test_builtins_are_alphabetical():
    names = [i.name for i in load_builtin_identifiers()]
    assert names == sorted(names)
    assert {"CREDIT_CARD", "EMAIL", "GENDER", "IPV4", "PERSON_NAME", "PHONE_US", "SSN", "ZIPCODE"} <= set(names)


@pytest.mark.parametrize(
    "name, positive, negative",
    [
        ("CREDIT_CARD", ["4539578763621486", "4539-5787-6362-1486"], ["4539578763621487", "1234"]),
        ("SSN", ["123-45-6789"], ["666-45-6789", "123-00-6789", "123456789"]),
        ("EMAIL", ["alice@example.com", "a.b+c@mail.example.net"], ["alice@", "example.com"]),
        ("PHONE_US", ["212-555-1234", "1-212-555-1234"], ["112-555-1234", "2125551234"]),
        ("IPV4", ["10.0.0.1", "255.255.255.255"], ["256.1.1.1", "10.0.0"]),
        ("ZIPCODE", ["98112", "98112-1234"], ["9811", "981123"]),
        ("GENDER", ["Female", "non-binary"], ["females"]),
    ],
)
def test_builtin_matchers(name, positive, negative):
    matches = _matcher(name)
    assert all(matches(text) for text in positive)
    assert not any(matches(text) for text in negative)


def test_mapping_defaults_to_every_builtin_direct():
    mapping = load_sensitivity_mapping(None)
    assert mapping.direct == {i.name for i in load_builtin_identifiers()}
    assert mapping.quasi == ()


def test_mapping_file_parsing(tmp_path):
    path = tmp_path / "mapping.json"
    path.write_text(
        json.dumps(
            {"direct": ["EMAIL"], "quasi": [{"entities": ["GENDER", "ZIPCODE"], "vicinity": 20}, ["SSN", "IPV4"]]}
        )
    )
    mapping = load_sensitivity_mapping(str(path))
    assert mapping.direct == {"EMAIL"}
    assert mapping.quasi == (
        QuasiGroup(frozenset({"GENDER", "ZIPCODE"}), 20),
        QuasiGroup(frozenset({"SSN", "IPV4"}), 100),
    )

    path.write_text(json.dumps({"quasi": [{"entities": ["GENDER"]}]}))
    with pytest.raises(ConfigError):
        load_sensitivity_mapping(str(path))
    path.write_text(json.dumps({"direct": [], "bogus": 1}))
    with pytest.raises(ConfigError):
        load_sensitivity_mapping(str(path))
    with pytest.raises(ConfigError):
        load_sensitivity_mapping(str(tmp_path / "missing.json"))


def test_minimal_identifier_set():
    kb = KnowledgeBase(load_builtin_identifiers())
    mapping = SensitivityMapping(direct=frozenset({"SSN"}), quasi=(QuasiGroup(frozenset({"ZIPCODE", "GENDER"})),))
    assert [i.name for i in minimal_identifier_set(mapping, kb)] == ["GENDER", "SSN", "ZIPCODE"]
    assert minimal_identifier_set(SensitivityMapping(), kb) == []
    with pytest.raises(KnowledgeBaseError):
        minimal_identifier_set(SensitivityMapping(direct=frozenset({"UNKNOWN_TYPE"})), kb)


def test_forced_tokens_add_the_feedback_identifier():
    kb = KnowledgeBase(load_builtin_identifiers(), FeedbackStore(force_sensitive={"project-x"}))
    names = [i.name for i in minimal_identifier_set(SensitivityMapping(direct=frozenset({"EMAIL"})), kb)]
    assert names == ["EMAIL", FEEDBACK_ENTITY]


def test_duplicate_identifier_names_are_rejected():
    builtins = load_builtin_identifiers()
    with pytest.raises(KnowledgeBaseError):
        KnowledgeBase([*builtins, builtins[0]])


def test_default_overwrite_string_is_accepted():
    validate_overwrite_strings(["This data has been redacted "], load_builtin_identifiers())


def test_overwrite_tokens_cover_truncations():
    """Cycling "ab cd" glues "cd" to the next "ab"; every prefix a cut can leave is listed."""
    assert overwrite_tokens("ab cd") == {"ab", "cd", "cda", "cdab"}


@pytest.mark.parametrize("string", ["male ", "12345 ", "x alice@example.com "])
def test_overwrite_strings_that_classify_are_rejected(string):
    with pytest.raises(ConfigError):
        validate_overwrite_strings([string], load_builtin_identifiers())


def test_forced_token_in_overwrite_string_is_rejected():
    with pytest.raises(ConfigError):
        validate_overwrite_strings(["zz top "], load_builtin_identifiers(), FeedbackStore(force_sensitive={"top"}))


def test_augment_writes_a_sorted_dictionary(tmp_path):
    source = tmp_path / "terms.txt"
    source.write_text("Zeta\n  alpha \n\nzeta\nBeta\n")
    output = tmp_path / "custom" / "project.txt"
    with KnowledgeRepository(str(tmp_path / "knowledge.json")) as repository:
        identifier = ingest_augment(str(source), "PROJECT", str(output), repository)
        assert identifier.terms == {"alpha", "beta", "zeta"}
        assert output.read_text() == "alpha\nbeta\nzeta\n"
        assert repository.get_custom_identifier("PROJECT")["term_count"] == 3

        kb = load_knowledge_base(SensitivityMapping(), repository)
        assert "PROJECT" in kb
        assert build_matcher(kb.get("PROJECT"))("ALPHA")


@pytest.mark.parametrize("entity", ["EMAIL", FEEDBACK_ENTITY, "UNIDENTIFIED"])
def test_augment_refuses_reserved_or_builtin_names(tmp_path, entity):
    source = tmp_path / "terms.txt"
    source.write_text("term\n")
    with pytest.raises(KnowledgeBaseError):
        ingest_augment(str(source), entity, str(tmp_path / "out.txt"))


def test_augment_needs_terms(tmp_path):
    source = tmp_path / "terms.txt"
    source.write_text("\n  \n")
    with pytest.raises(KnowledgeBaseError):
        ingest_augment(str(source), "PROJECT", str(tmp_path / "out.txt"))


def _report(rows):
    return rows_to_csv([ReportRow(*row) for row in rows])


def test_feedback_suppresses_and_forces():
    sensitive = _report([("10.0.0.1", "IPV4", 3, "N"), ("alice@example.com", "EMAIL", 1, "Y")])
    nonsensitive = _report([("project-x", "UNIDENTIFIED", 2, "N"), ("hello", "UNIDENTIFIED", 9, "Y")])
    store = apply_feedback(sensitive, nonsensitive)
    assert store.suppress == {("10.0.0.1", "IPV4")}
    assert store.force_sensitive == {"project-x"}


def test_latest_feedback_wins():
    store = FeedbackStore(suppress={("project-x", "PERSON_NAME")}, force_sensitive={"old-token"})
    sensitive = _report([("old-token", FEEDBACK_ENTITY, 1, "N")])
    nonsensitive = _report([("project-x", "UNIDENTIFIED", 1, "N")])
    updated = apply_feedback(sensitive, nonsensitive, store)
    assert updated.suppress == set()
    assert updated.force_sensitive == {"project-x"}


def test_conflicting_marks_in_one_ingest_fail():
    sensitive = _report([("token-1", "PERSON_NAME", 1, "N")])
    nonsensitive = _report([("token-1", "UNIDENTIFIED", 1, "N")])
    with pytest.raises(FeedbackError):
        apply_feedback(sensitive, nonsensitive)


def test_page_rows_are_not_feedback():
    sensitive = _report([("PAGE:4", "EMAIL", 1, "N")])
    store = apply_feedback(sensitive, _report([]))
    assert store.suppress == set()
