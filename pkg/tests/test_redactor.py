"""Tests for replacement strategies and output reconstruction."""

import pytest

from config import HEADER_SIZE, PAGE_SIZE, PAYLOAD_CAPACITY
from backend.models.dump import ParsedToken
from backend.models.findings import DIRECT, Finding
from backend.services.dumpgen import craft_dump
from backend.services.input_parser import parse_dump, parse_log, read_page_header
from backend.services.redactor import (
    RedactionPolicy,
    Redactor,
    apply_redactions,
    decrypt_fpe,
    encrypt_fpe,
    fpe_accepts,
    redact_encrypt,
    redact_hash,
    redact_overwrite,
)
from backend.utils.crypto import FF1Cipher, decrypt_aes_replacement
from backend.utils.errors import ConfigError, RedactionError

NIST_KEY = bytes.fromhex("2B7E151628AED2A6ABF7158809CF4F3C")


def test_ff1_reference_vectors():
    cipher = FF1Cipher(NIST_KEY)
    assert cipher.encrypt("0123456789") == "2433477484"
    assert cipher.decrypt("2433477484") == "0123456789"
    tweak = bytes.fromhex("39383736353433323130")
    assert cipher.encrypt("0123456789", tweak) == "6124200773"
    assert cipher.decrypt("6124200773", tweak) == "0123456789"


def test_ff1_rejects_short_inputs_and_foreign_symbols():
    cipher = FF1Cipher(NIST_KEY)
    with pytest.raises(RedactionError):
        cipher.encrypt("7")
    with pytest.raises(RedactionError):
        cipher.encrypt("12a4")
    with pytest.raises(ConfigError):
        FF1Cipher(b"short")


def test_overwrite_examples():
    address = "123 Dummy Street. Seattle, WA 98112"
    assert redact_overwrite(len(address), "This data has been redacted ") == "This data has been redacted This da"
    assert redact_overwrite(1, "XY") == "X"
    assert redact_overwrite(5, "ab") == "ababa"
    with pytest.raises(RedactionError):
        redact_overwrite(0, "ab")


def test_hash_examples():
    assert redact_hash(b"", "md5", "full") == "d41d8cd98f00b204e9800998ecf8427e"
    assert redact_hash(b"abc", "sha256", "fit", fit_len=8) == "ba7816bf"
    assert redact_hash(b"abc", "sha256", "fit") == "ba7"
    assert redact_hash(b"abc", "sha1", "full") == redact_hash(b"abc", "sha1", "full")
    assert len(redact_hash(b"x" * 100, "md5", "fit")) == 100
    with pytest.raises(RedactionError):
        redact_hash(b"abc", "sha256", "full", input_type="dump")
    with pytest.raises(RedactionError):
        redact_hash(b"abc", "crc32", "fit")


def test_fpe_keeps_separators_and_round_trips(test_key):
    card = "4539-5787-6362-1486"
    encrypted = encrypt_fpe(card, "CREDIT_CARD", test_key)
    assert len(encrypted) == len(card)
    assert [i for i, c in enumerate(encrypted) if c == "-"] == [4, 9, 14]
    assert encrypted.replace("-", "").isdigit()
    assert encrypted != card
    assert decrypt_fpe(encrypted, "CREDIT_CARD", test_key) == card


def test_fpe_printable_alphabet_for_text_entities(test_key):
    email = "alice@example.com"
    encrypted = encrypt_fpe(email, "EMAIL", test_key)
    assert len(encrypted) == len(email)
    assert all(0x21 <= ord(c) <= 0x7E for c in encrypted)
    assert decrypt_fpe(encrypted, "EMAIL", test_key) == email


def test_aes_replacement_is_deterministic_and_reversible(test_key):
    first = redact_encrypt(b"alice@example.com", "aes", test_key, "EMAIL", "log")
    assert first == redact_encrypt(b"alice@example.com", "aes", test_key, "EMAIL", "log")
    assert decrypt_aes_replacement(first.decode("ascii"), test_key) == b"alice@example.com"
    with pytest.raises(RedactionError):
        redact_encrypt(b"alice@example.com", "aes", test_key, "EMAIL", "dump")
    with pytest.raises(RedactionError):
        redact_encrypt(b"alice@example.com", "fpe_ff1", None, "EMAIL")


@pytest.mark.parametrize(
    "policy",
    [
        {"method": "encrypt", "encrypt_scheme": "aes"},
        {"method": "hash", "hash_length_policy": "full"},
        {"method": "scramble"},
        {"overwrite_string": ""},
    ],
)
def test_policies_that_break_dump_layout_are_rejected(policy):
    with pytest.raises(ConfigError):
        RedactionPolicy.from_dict(policy).validate("dump")


def test_log_policies_may_change_lengths():
    RedactionPolicy.from_dict({"method": "encrypt", "encrypt_scheme": "aes"}).validate("log")
    RedactionPolicy.from_dict({"method": "hash", "hash_length_policy": "full"}).validate("log")


def test_per_entity_overwrite_strings():
    policy = RedactionPolicy.from_dict({"overwrite_string": {"default": "xx ", "EMAIL": "mail "}})
    assert policy.overwrite_for("EMAIL") == "mail "
    assert policy.overwrite_for("SSN") == "xx "
    assert sorted(policy.overwrite_strings()) == ["mail ", "xx "]


def test_redactor_is_consistent_per_plaintext(test_key):
    redactor = Redactor(RedactionPolicy(method="encrypt"), "ascii", "dump", test_key)
    assert redactor.replacement_for("10.0.0.1", "IPV4") == redactor.replacement_for("10.0.0.1", "IPV4")


def _sensitive(dump, texts):
    tokens = [t for g in parse_dump(dump, "ascii") for t in g.tokens if t.text in texts]
    return [Finding(t, "EMAIL", DIRECT, i) for i, t in enumerate(tokens)]


def test_concise_redaction_touches_only_extents():
    dump = craft_dump(["mail alice@example.com now", "nothing here"])
    output = apply_redactions(dump, _sensitive(dump, {"alice@example.com"}), RedactionPolicy())
    assert len(output) == len(dump)
    start = HEADER_SIZE + 5
    assert output[start : start + 17] == b"This data has bee"
    assert output[:start] == dump[:start]
    assert output[start + 17 :] == dump[start + 17 :]


def test_wiped_pages_keep_headers_and_padding():
    dump = craft_dump(["mail alice@example.com now", "nothing here"])
    output = apply_redactions(dump, [], RedactionPolicy(), wipe_units=[0])
    data_len = len("mail alice@example.com now")
    assert output[:HEADER_SIZE] == dump[:HEADER_SIZE]
    fill = redact_overwrite(data_len, "This data has been redacted ").encode("ascii")
    assert output[HEADER_SIZE : HEADER_SIZE + data_len] == fill
    assert output[HEADER_SIZE + data_len : PAGE_SIZE] == bytes(PAYLOAD_CAPACITY - data_len)
    assert output[PAGE_SIZE:] == dump[PAGE_SIZE:]
    assert read_page_header(output, 0).data_len == data_len


def test_boolean_mode_wipes_pages_of_findings():
    dump = craft_dump(["clean page", "mail alice@example.com now"])
    output = apply_redactions(dump, _sensitive(dump, {"alice@example.com"}), RedactionPolicy(), mode="boolean")
    assert output[:PAGE_SIZE] == dump[:PAGE_SIZE]
    assert b"mail" not in output[PAGE_SIZE:]


def test_ebcdic_replacements_are_encoded():
    dump = craft_dump(["id 10.0.0.1"], encoding="ebcdic037")
    token = parse_dump(dump, "ebcdic037")[0].tokens[1]
    output = apply_redactions(dump, [Finding(token, "IPV4", DIRECT)], RedactionPolicy(), encoding="ebcdic037")
    start = HEADER_SIZE + token.byte_offset
    assert output[start : start + 8] == "This dat".encode("cp037")


def test_log_hash_full_changes_length_and_keeps_lines():
    text = b"user alice@example.com logged in\nsecond line\n"
    token = parse_log(text)[0].tokens[1]
    policy = RedactionPolicy(method="hash", hash_algo="md5", hash_length_policy="full")
    output = apply_redactions(text, [Finding(token, "EMAIL", DIRECT)], policy, input_type="log")
    digest = redact_hash(b"alice@example.com", "md5", "full")
    assert output == f"user {digest} logged in\nsecond line\n".encode()


def test_log_paragraph_wipe_replaces_every_token():
    text = b"a bc def\n\nkeep this\n"
    output = apply_redactions(text, [], RedactionPolicy(overwrite_string="z"), input_type="log", wipe_units=[(0, 9)])
    assert output == b"z zz zzz\n\nkeep this\n"


def test_fpe_minimum_lengths():
    assert FF1Cipher.min_length(10) == 2
    assert FF1Cipher.min_length(94) == 2
    assert not fpe_accepts("a", None)
    assert fpe_accepts("ab", None)
    assert not fpe_accepts("(7)", "PHONE_US")


def test_log_paragraph_wipe_with_ff1_overwrites_single_characters(test_key):
    text = b"a bc def\n\nkeep this\n"
    policy = RedactionPolicy(method="encrypt", encrypt_scheme="fpe_ff1", overwrite_string="z")
    output = apply_redactions(text, [], policy, input_type="log", wipe_units=[(0, 9)], key=test_key)
    assert len(output) == len(text)
    assert output[:2] == b"z "
    assert decrypt_fpe(output[2:4].decode("ascii"), "", test_key) == "bc"
    assert decrypt_fpe(output[5:8].decode("ascii"), "", test_key) == "def"
    assert output[8:] == b"\n\nkeep this\n"


def test_overlapping_extents_fail():
    dump = craft_dump(["alice@example.com"])
    token = parse_dump(dump, "ascii")[0].tokens[0]
    inner = ParsedToken("example", 0, 6, 7, token.group_id)
    with pytest.raises(RedactionError):
        apply_redactions(dump, [Finding(token, "EMAIL", DIRECT), Finding(inner, "EMAIL", DIRECT)], RedactionPolicy())
