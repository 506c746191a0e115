"""End-to-end tests for analyze, feedback, augment and generate, plus the run plumbing."""

import json
import os
import threading

import numpy as np
import pandas as pd
import pytest

from config import DUMP_MAGIC, HEADER_SIZE, PAGE_SIZE, default_overwrite_string
from backend.models.dump import ParsedToken, WorkChunk
from backend.models.findings import DIRECT, QUASI, ChunkResult, Finding
from backend.models.knowledge import QuasiGroup, SensitivityMapping
from backend.services.dumpgen import craft_dump, read_manifest, write_dump
from backend.services.engine import (
    ANALYZE_PHASES,
    ChunkWorker,
    EngineConfig,
    WorkerContext,
    analyze,
    load_engine_config,
    mapped_input,
    merge_chunk_results,
    register_in_mapping,
    run_augment,
    run_feedback,
    run_generate,
    run_identifiers,
    run_parallel,
)
from backend.services.input_parser import chunk_groups, scan_dump
from backend.services.knowledge_base import KnowledgeBase, load_builtin_identifiers
from backend.services.redactor import RedactionPolicy, decrypt_fpe, redact_overwrite
from backend.services.reporting import read_report
from backend.utils.errors import ConfigError, DumpParseError, RunCancelled, ScrubError

DIRECT_TYPES = ["CREDIT_CARD", "EMAIL", "IPV4", "PERSON_NAME", "PHONE_US", "SSN"]
ALL_TYPES = DIRECT_TYPES + ["GENDER", "ZIPCODE"]
FULL_MIX = [(name, 1.0) for name in ALL_TYPES]
GENDER_ZIP = [{"entities": ["GENDER", "ZIPCODE"], "vicinity": 10}]


def _read(path):
    with open(path, "rb") as f:
        return f.read()


def _extent(entry):
    start = entry.page_index * PAGE_SIZE + HEADER_SIZE + entry.byte_offset
    return start, start + entry.byte_len


def _expected_overwrite(dump, manifest):
    expected = bytearray(dump)
    for entry in manifest:
        start, end = _extent(entry)
        expected[start:end] = redact_overwrite(entry.byte_len, default_overwrite_string).encode("ascii")
    return bytes(expected)


def test_concise_run_redacts_exactly_the_planted_tokens(make_dump, make_config):
    path, dump, manifest = make_dump(pages=64)
    result = analyze(make_config(path))

    assert _read(result["output"]) == _expected_overwrite(dump, manifest)
    stats = result["stats"]
    assert sum(stats["findings_by_entity"].values()) == len(manifest)
    assert set(stats["phase_seconds"]) == set(ANALYZE_PHASES)
    assert stats["tokens_classified"] == stats["tokens_total"]
    assert json.loads(_read(result["stats_path"]))["chunks"] == stats["chunks"]

    sensitive = read_report(result["sensitive_report"])
    assert sum(r.count for r in sensitive) == len(manifest)
    assert all(r.is_analysis_correct == "Y" for r in sensitive)


def test_rescanning_the_output_finds_nothing(make_dump, make_config):
    path, _, _ = make_dump(pages=64)
    first = analyze(make_config(path))
    second = analyze(make_config(first["output"], output_name="rescan.kdmp"))
    assert second["stats"]["findings_by_entity"] == {}
    assert read_report(second["sensitive_report"]) == []


@pytest.mark.parametrize("seed", range(20))
def test_every_entity_type_is_redacted_exactly(make_dump, make_mapping, make_config, seed):
    path, dump, manifest = make_dump(pages=16, seed=seed, entity_mix=FULL_MIX, pct_sensitive_pages=0.5)
    mapping = make_mapping(direct=DIRECT_TYPES, quasi=GENDER_ZIP)
    result = analyze(make_config(path, sensitivity_mapping=mapping))
    assert _read(result["output"]) == _expected_overwrite(dump, manifest)

    rescan = analyze(make_config(result["output"], output_name="rescan.kdmp", sensitivity_mapping=mapping))
    assert rescan["stats"]["findings_by_entity"] == {}
    assert read_report(rescan["sensitive_report"]) == []


def test_seeded_dumps_plant_every_entity_type(make_dump):
    planted = set()
    for seed in range(20):
        _, _, manifest = make_dump(pages=16, seed=seed, entity_mix=FULL_MIX, pct_sensitive_pages=0.5)
        planted |= {entry.entity_type for entry in manifest}
    assert planted == set(ALL_TYPES)


@pytest.mark.parametrize(
    "toggles",
    [
        {"min_identifiers": False, "quasi_skip": False, "mru": False},
        {"min_identifiers": False},
        {"quasi_skip": False},
        {"mru": False},
    ],
)
def test_optimizations_do_not_change_the_output(make_dump, make_mapping, make_config, toggles):
    path, _, _ = make_dump(pages=64, entity_mix=FULL_MIX)
    mapping = make_mapping(direct=DIRECT_TYPES, quasi=[{"entities": ["GENDER", "ZIPCODE"], "vicinity": 100}])
    baseline = analyze(make_config(path, output_name="on.kdmp", sensitivity_mapping=mapping))
    toggled = analyze(make_config(path, output_name="off.kdmp", sensitivity_mapping=mapping, **toggles))
    assert _read(toggled["output"]) == _read(baseline["output"])
    assert _read(toggled["sensitive_report"]) == _read(baseline["sensitive_report"])


def _random_case(seed):
    """Seeded mapping, quasi layout and chunking for one equivalence run."""
    rng = np.random.Generator(np.random.PCG64(seed))
    names = [ALL_TYPES[int(i)] for i in rng.permutation(len(ALL_TYPES))]
    size = int(rng.integers(2, 5))
    quasi, rest = sorted(names[:size]), names[size:]
    direct = sorted(rest[: int(rng.integers(0, len(rest) + 1))])
    unit = "pages" if rng.random() < 0.2 else "tokens"
    vicinity = int(rng.integers(1, 3)) if unit == "pages" else int(rng.integers(2, 120))
    planted = [quasi] if rng.random() < 0.7 else []
    settings = {"chunk_pages": int(rng.choice([1, 2, 3, 8])), "vicinity_unit": unit}
    return direct, [{"entities": quasi, "vicinity": vicinity}], planted, settings


@pytest.mark.parametrize("seed", range(100))
def test_optimizations_do_not_change_randomized_runs(make_dump, make_mapping, make_config, seed):
    direct, quasi, planted, settings = _random_case(seed)
    path, _, _ = make_dump(pages=8, seed=seed, entity_mix=FULL_MIX, quasi_groups=planted, pct_sensitive_pages=0.5)
    mapping = make_mapping(direct=direct, quasi=quasi)
    baseline = analyze(make_config(path, output_name="on.kdmp", sensitivity_mapping=mapping, **settings))
    expected = _read(baseline["output"])
    for toggle in ("quasi_skip", "min_identifiers", "mru"):
        settings_off = {**settings, toggle: False}
        config = make_config(path, output_name=f"{toggle}.kdmp", sensitivity_mapping=mapping, **settings_off)
        assert _read(analyze(config)["output"]) == expected, toggle


def test_quasi_pairs_are_redacted(make_dump, make_mapping, make_config):
    path, dump, manifest = make_dump(pages=64, entity_mix=[("GENDER", 1.0), ("ZIPCODE", 1.0)])
    mapping = make_mapping(direct=[], quasi=[{"entities": ["GENDER", "ZIPCODE"], "vicinity": 10}])
    result = analyze(make_config(path, sensitivity_mapping=mapping))
    assert _read(result["output"]) == _expected_overwrite(dump, manifest)


@pytest.mark.parametrize("threads", [2, 4])
def test_worker_count_does_not_change_results(make_dump, make_config, threads):
    path, _, _ = make_dump(pages=64)
    single = analyze(make_config(path, output_name="one.kdmp", chunk_pages=4))
    multi = analyze(make_config(path, output_name="many.kdmp", chunk_pages=4, threads=threads))
    assert _read(multi["output"]) == _read(single["output"])
    assert _read(multi["sensitive_report"]) == _read(single["sensitive_report"])
    assert _read(multi["nonsensitive_report"]) == _read(single["nonsensitive_report"])
    for key in ("tokens_total", "identifier_evaluations", "findings_by_entity", "chunks"):
        assert multi["stats"][key] == single["stats"][key]


def test_process_workers_match_inline_run(make_dump, make_config):
    path, dump, manifest = make_dump(pages=32)
    result = analyze(make_config(path, chunk_pages=4, threads=2, executor="process"))
    assert _read(result["output"]) == _expected_overwrite(dump, manifest)


def test_empty_mapping_leaves_input_unchanged(make_dump, make_mapping, make_config):
    path, dump, _ = make_dump(pages=16)
    result = analyze(make_config(path, sensitivity_mapping=make_mapping(direct=[])))
    assert _read(result["output"]) == dump
    assert result["stats"]["identifiers"] == []


def test_empty_input_produces_empty_output(workspace, make_config):
    path = workspace / "empty.kdmp"
    path.write_bytes(b"")
    result = analyze(make_config(str(path)))
    assert _read(result["output"]) == b""
    assert result["stats"]["chunks"] == 0


def test_boolean_mode_wipes_at_least_the_sensitive_pages(make_dump, make_config):
    path, dump, manifest = make_dump(pages=64)
    concise = analyze(make_config(path, output_name="concise.kdmp"))
    boolean = analyze(make_config(path, output_name="boolean.kdmp", processing_mode="boolean"))

    rows = read_report(boolean["sensitive_report"])
    wiped = {int(r.token.split(":")[1]) for r in rows if r.token.startswith("PAGE:")}
    assert {e.page_index for e in manifest} <= wiped
    output = _read(boolean["output"])
    assert len(output) == len(dump)
    for entry in manifest:
        start, end = _extent(entry)
        assert output[start:end] != dump[start:end]
    for page in range(64):
        header = slice(page * PAGE_SIZE, page * PAGE_SIZE + HEADER_SIZE)
        assert output[header] == dump[header]
    assert boolean["stats"]["early_exits"] > 0
    assert boolean["stats"]["payload_bytes_classified"] <= concise["stats"]["payload_bytes_classified"]
    assert boolean["stats"]["tokens_classified"] < concise["stats"]["tokens_classified"]


def test_dynamic_mode_with_an_exhausted_budget_skips(make_dump, make_config):
    path, dump, _ = make_dump(pages=64)
    result = analyze(make_config(path, processing_mode="dynamic", time_budget=1e-9, chunk_pages=4))
    stats = result["stats"]
    assert stats["chunks_by_mode"] == {"concise": 1, "skip": stats["chunks"] - 1}
    assert [(t["from"], t["to"]) for t in stats["mode_transitions"]] == [("concise", "boolean"), ("boolean", "skip")]
    assert stats["units_wiped"] == 4 * (stats["chunks"] - 1)
    assert any(r.entity_type == "UNCLASSIFIED" for r in read_report(result["sensitive_report"]))
    assert len(_read(result["output"])) == len(dump)


def test_dynamic_mode_meets_a_tight_budget(make_dump, make_config):
    path, _, _ = make_dump(pages=1024)
    concise = analyze(make_config(path, output_name="concise.kdmp", chunk_pages=2))
    budget = 0.3 * concise["stats"]["total_seconds"]
    config = make_config(path, output_name="dynamic.kdmp", chunk_pages=2, processing_mode="dynamic", time_budget=budget)
    stats = analyze(config)["stats"]
    assert stats["total_seconds"] <= 1.1 * budget
    steps = [(t["from"], t["to"]) for t in stats["mode_transitions"]]
    assert steps[0] == ("concise", "boolean")
    assert stats["chunks_by_mode"]["concise"] < stats["chunks"]


def test_ebcdic_dump(make_dump, make_config):
    path, dump, manifest = make_dump(pages=16, encoding="ebcdic037")
    result = analyze(make_config(path, encoding="ebcdic037"))
    output = _read(result["output"])
    for entry in manifest:
        start, end = _extent(entry)
        assert output[start:end] == redact_overwrite(entry.byte_len, default_overwrite_string).encode("cp037")


def test_fpe_redaction_is_reversible(make_dump, make_config, test_key):
    path, _, manifest = make_dump(pages=16)
    config = make_config(path, redaction=RedactionPolicy(method="encrypt", encrypt_scheme="fpe_ff1"))
    output = _read(analyze(config, key=test_key)["output"])
    for entry in manifest:
        start, end = _extent(entry)
        ciphertext = output[start:end].decode("ascii")
        assert decrypt_fpe(ciphertext, entry.entity_type, test_key) == entry.plaintext


def test_sealed_reports(make_dump, make_config, test_key):
    path, _, _ = make_dump(pages=16)
    config = make_config(path, encrypt_reports=True, redaction=RedactionPolicy(key_file="unused.salt"))
    result = analyze(config, key=test_key)
    with pytest.raises(ScrubError):
        read_report(result["sensitive_report"])
    assert read_report(result["sensitive_report"], test_key)


def test_log_input_keeps_lines(workspace, make_config):
    log = workspace / "app.log"
    log.write_bytes(b"login alice@example.com from 10.0.0.7\nretry ok\n\nshutdown by bob@example.org\n")
    result = analyze(make_config(str(log), output_name="app.redacted.log", input_type="log"))
    output = _read(result["output"]).decode("ascii")
    assert output.count("\n") == 4
    assert "alice@example.com" not in output and "10.0.0.7" not in output and "bob@example.org" not in output
    assert output.startswith("login This data has bee from ")
    assert result["stats"]["groups"] == 2


def test_log_full_hash(workspace, make_config):
    log = workspace / "app.log"
    log.write_bytes(b"user alice@example.com\n")
    policy = RedactionPolicy(method="hash", hash_algo="md5", hash_length_policy="full")
    result = analyze(make_config(str(log), output_name="out.log", input_type="log", redaction=policy))
    output = _read(result["output"]).decode("ascii")
    assert output.startswith("user ") and len(output) == len("user ") + 32 + 1


def test_log_boolean_wipe_with_ff1(workspace, make_config, test_key):
    text = b"login alice@example.com by a user\n"
    log = workspace / "app.log"
    log.write_bytes(text)
    policy = RedactionPolicy(method="encrypt", encrypt_scheme="fpe_ff1")
    config = make_config(str(log), output_name="out.log", input_type="log", processing_mode="boolean", redaction=policy)
    output = _read(analyze(config, key=test_key)["output"])
    assert len(output) == len(text)
    words = output.decode("ascii").split(" ")
    assert [len(w) for w in words] == [5, 17, 2, 1, 5]
    assert words[3] == "T"
    assert b"alice@example.com" not in output


PAGE_TEXTS = [
    "order 4411 shipped to warehouse contact alice@example.com status feedback-keyword-1 done",
    "batch import finished with ingested-keyword-1 and checksum verified for node 10.1.2.3",
]


def _crafted(workspace):
    path = str(workspace / "crafted.kdmp")
    write_dump(craft_dump(PAGE_TEXTS), path)
    return path


def test_feedback_and_augment_round_trip(workspace, make_mapping, make_config):
    path = _crafted(workspace)
    mapping = make_mapping()
    config = make_config(path, sensitivity_mapping=mapping)
    first = analyze(config)
    output = _read(first["output"])
    assert b"feedback-keyword-1" in output and b"ingested-keyword-1" in output
    assert b"alice@example.com" not in output

    report = pd.read_csv(first["nonsensitive_report"], dtype=str, keep_default_na=False)
    report.loc[report["token"] == "feedback-keyword-1", "Is_Analysis_Correct"] = "N"
    report.to_csv(first["nonsensitive_report"], index=False, lineterminator="\n")
    assert run_feedback(config)["forced"] == 1

    terms = workspace / "terms.txt"
    terms.write_text("Ingested-Keyword-1\n")
    config.augment = {
        "source": str(terms),
        "entity_type": "INGESTED_KEYWORD",
        "output": str(workspace / "ingested_keyword.txt"),
        "mapping": mapping,
    }
    assert run_augment(config) == {"status": "completed", "entity_type": "INGESTED_KEYWORD", "terms": 1}

    second = analyze(config)
    output = _read(second["output"])
    assert b"feedback-keyword-1" not in output and b"ingested-keyword-1" not in output
    assert second["stats"]["findings_by_entity"]["FEEDBACK"] == 1
    assert second["stats"]["findings_by_entity"]["INGESTED_KEYWORD"] == 1


def test_suppression_feedback_keeps_the_token(workspace, make_config):
    path = _crafted(workspace)
    config = make_config(path)
    first = analyze(config)
    assert b"10.1.2.3" not in _read(first["output"])

    report = pd.read_csv(first["sensitive_report"], dtype=str, keep_default_na=False)
    report.loc[report["token"] == "10.1.2.3", "Is_Analysis_Correct"] = "N"
    report.to_csv(first["sensitive_report"], index=False, lineterminator="\n")
    assert run_feedback(config)["suppressed"] == 1

    second = analyze(config)
    assert b"10.1.2.3" in _read(second["output"])
    nonsensitive = {(r.token, r.entity_type) for r in read_report(second["nonsensitive_report"])}
    assert ("10.1.2.3", "IPV4") in nonsensitive


def test_failed_run_removes_its_outputs(make_dump, make_config, workspace):
    path, _, _ = make_dump(pages=8)
    blocker = workspace / "reports"
    blocker.mkdir()
    config = make_config(path, sensitive_report=str(blocker))
    stale = workspace / "stale.csv"
    stale.write_text("token,entity_type,count,Is_Analysis_Correct\n")
    config.nonsensitive_report = str(stale)
    with pytest.raises(ScrubError) as excinfo:
        analyze(config)
    assert excinfo.value.phase == "report"
    assert not os.path.exists(config.output_path)
    assert not os.path.exists(config.stats_path)
    assert stale.exists()


def test_missing_and_corrupt_inputs(workspace, make_config):
    config = make_config(str(workspace / "missing.kdmp"))
    with pytest.raises(ConfigError):
        analyze(config)

    corrupt = workspace / "corrupt.kdmp"
    corrupt.write_bytes(craft_dump(["x"]) + b"\x00" * 100)
    with pytest.raises(DumpParseError) as excinfo:
        analyze(make_config(str(corrupt)))
    assert excinfo.value.exit_code == 2
    assert excinfo.value.phase == "parse"


def test_merge_treats_unclassified_tokens_as_evidence():
    """A lone quasi match next to an early-exited chunk is redacted."""
    mapping = SensitivityMapping(quasi=(QuasiGroup(frozenset({"GENDER", "ZIPCODE"}), 100),))
    chunks = [WorkChunk(0, 1, (0,), (100,), True, False), WorkChunk(1, 1, (1,), (100,), False, True)]
    zipcode = Finding(ParsedToken("98112", 1, 10, 5, 1), "ZIPCODE", QUASI, 5)
    email = Finding(ParsedToken("a@b.io", 0, 4, 6, 1), "EMAIL", DIRECT, 2)
    results = [
        ChunkResult(
            0, 1, "boolean", findings=[email], token_count=50, early_exit=True, unknown_from=3, trigger_entity="EMAIL"
        ),
        ChunkResult(1, 1, "concise", findings=[zipcode], token_count=20),
    ]
    merged = merge_chunk_results(chunks, results, mapping)
    assert merged.wipe_units == [0]
    assert merged.token_findings == [zipcode]
    assert zipcode.position == 55
    assert merged.sensitive[("PAGE:0", "EMAIL")] == 1

    lone = Finding(ParsedToken("98112", 1, 10, 5, 1), "ZIPCODE", QUASI, 5)
    results = [
        ChunkResult(0, 1, "concise", token_count=50),
        ChunkResult(1, 1, "concise", findings=[lone], token_count=20),
    ]
    merged = merge_chunk_results(chunks, results, mapping)
    assert merged.token_findings == []
    assert merged.non_sensitive[("98112", "ZIPCODE")] == 1


def _double(unit):
    return unit * 2


def _fail_on_seven(unit):
    if unit == 7:
        raise ValueError("boom")
    return unit


@pytest.mark.parametrize("workers", [1, 8])
def test_run_parallel_processes_every_unit_once(workers):
    seen = []
    results = run_parallel(
        list(range(1000)), workers, _double, executor="thread", on_result=lambda i, r: seen.append(i)
    )
    assert results == [2 * i for i in range(1000)]
    assert sorted(seen) == list(range(1000))


@pytest.mark.parametrize("workers", [1, 4])
def test_run_parallel_wraps_worker_failures(workers):
    with pytest.raises(ScrubError) as excinfo:
        run_parallel(list(range(20)), workers, _fail_on_seven, executor="thread")
    assert "unit 7" in str(excinfo.value)


def test_run_parallel_honours_cancellation():
    event = threading.Event()
    event.set()
    with pytest.raises(RunCancelled):
        run_parallel(list(range(10)), 2, _double, executor="thread", cancel_event=event)


def test_run_parallel_rejects_bad_settings():
    with pytest.raises(ConfigError):
        run_parallel([1], 0, _double)
    with pytest.raises(ConfigError):
        run_parallel([1], 2, _double, executor="fiber")


def test_mapped_input_is_closed_on_exit(workspace):
    path = str(workspace / "in.kdmp")
    write_dump(craft_dump(["mail alice@example.com"]), path)
    with mapped_input(path) as data:
        assert data[:4] == DUMP_MAGIC
    assert data.closed


def test_chunk_worker_maps_the_input_only_while_a_chunk_runs(workspace):
    path = str(workspace / "in.kdmp")
    write_dump(craft_dump(["mail alice@example.com now", "clean page"]), path)
    kb = KnowledgeBase(load_builtin_identifiers())
    mapping = SensitivityMapping(direct=frozenset({"EMAIL"}))
    worker = ChunkWorker(WorkerContext(path, "dump", "ascii", kb, mapping, tuple(run_identifiers(mapping, kb))))
    with open(path, "rb") as f:
        chunks = chunk_groups(scan_dump(f.read()), 1)
    results = [worker.run(chunk, "concise") for chunk in chunks]
    assert worker.data == b""
    assert [f.token.text for r in results for f in r.findings] == ["alice@example.com"]


def test_config_sections_and_defaults():
    config = EngineConfig.from_dict(
        {
            "threads": 3,
            "input": {"path": "in.kdmp", "type": "dump", "encoding": "ebcdic037"},
            "output": {"path": "out.kdmp"},
            "optimizations": {"mru": False},
            "vicinity": {"unit": "pages"},
            "redaction": {"method": "hash", "hash_algo": "md5"},
        }
    ).validate()
    assert (config.threads, config.input_path, config.encoding) == (3, "in.kdmp", "ebcdic037")
    assert (config.mru, config.quasi_skip, config.vicinity_unit) == (False, True, "pages")
    assert config.redaction.hash_algo == "md5"
    assert config.report_paths == ("out.kdmp.sensitive.csv", "out.kdmp.nonsensitive.csv")
    assert config.stats_path == "out.kdmp.stats.json"


@pytest.mark.parametrize(
    "data",
    [
        {"input": {"path": "a"}, "output": {"path": "b"}, "unknown_key": 1},
        {"input": {"path": "a", "format": "x"}, "output": {"path": "b"}},
        {"input": {"path": "a"}, "output": {"path": "b"}, "processing_mode": "dynamic"},
        {"input": {"path": "a"}, "output": {"path": "b"}, "processing_mode": "dynamic", "time_budget": -1},
        {"input": {"path": "a"}, "output": {"path": "a"}},
        {"input": {"path": "a"}, "output": {"path": "b"}, "threads": 0},
        {"input": {"path": "a"}, "output": {"path": "b"}, "executor": "fiber"},
        {"input": {"path": "a"}, "output": {"path": "b"}, "encrypt_reports": True},
        {"input": {"path": "a"}, "output": {"path": "b"}, "budget": {"alpha": 0.1}},
        {"input": {"path": "a"}},
    ],
)
def test_invalid_configs(data):
    with pytest.raises(ConfigError):
        EngineConfig.from_dict(data).validate()


def test_load_engine_config_applies_overrides(workspace):
    path = workspace / "run.json"
    path.write_text(json.dumps({"input": {"path": "in.kdmp"}, "output": {"path": "out.kdmp"}}))
    config = load_engine_config(str(path), {"threads": 4, "processing_mode": None, "time_budget": None})
    assert (config.threads, config.processing_mode) == (4, "concise")
    with pytest.raises(ConfigError):
        load_engine_config(str(workspace / "nope.json"))
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_engine_config(str(path))


def test_run_identifiers_full_set_keeps_mapped_first():
    kb = KnowledgeBase(load_builtin_identifiers())
    mapping = SensitivityMapping(direct=frozenset({"SSN"}))
    assert [i.name for i in run_identifiers(mapping, kb)] == ["SSN"]
    names = [i.name for i in run_identifiers(mapping, kb, minimal=False)]
    assert names[0] == "SSN"
    assert sorted(names) == sorted(i.name for i in load_builtin_identifiers())


def test_generate_writes_dump_and_manifest(workspace):
    config = EngineConfig(mode="generate", generate={"total_size": 8 * PAGE_SIZE, "output": "gen.kdmp"})
    result = run_generate(config)
    assert result["pages"] == 8
    assert os.path.getsize("gen.kdmp") == 8 * PAGE_SIZE
    assert len(read_manifest(result["manifest"])) == result["plants"]

    reseeded = run_generate(config.with_overrides(seed=99), output="gen99.kdmp")
    assert _read("gen99.kdmp") != _read("gen.kdmp")
    assert reseeded["output"] == "gen99.kdmp"


def test_register_in_mapping_creates_and_updates(workspace):
    path = str(workspace / "mapping.json")
    register_in_mapping(path, "PROJECT", "/data/project.txt")
    register_in_mapping(path, "PROJECT", "/data/project-v2.txt")
    register_in_mapping(path, "CODENAME", "/data/codename.txt", sensitivity="quasi")
    data = json.loads(_read(path))
    assert data["direct"] == ["PROJECT"]
    assert data["custom_identifiers"] == [
        {"entity_type": "PROJECT", "path": "/data/project-v2.txt"},
        {"entity_type": "CODENAME", "path": "/data/codename.txt"},
    ]
