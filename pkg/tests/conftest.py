"""Shared fixtures: temporary workspaces, small generated dumps and a fixed key."""

import json

import pytest

from config import PAGE_SIZE
from backend.services.dumpgen import DumpGenConfig, generate_dump, write_dump, write_manifest
from backend.services.engine import EngineConfig
from backend.services.knowledge_base import load_builtin_identifiers
from backend.services.redactor import RedactionPolicy

TEST_KEY = bytes.fromhex("2B7E151628AED2A6ABF7158809CF4F3C2B7E151628AED2A6ABF7158809CF4F3C")


@pytest.fixture
def workspace(tmp_path, monkeypatch):
    """Run inside an empty directory so relative database paths stay local."""
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.fixture
def test_key():
    return TEST_KEY


@pytest.fixture
def make_dump(workspace):
    """Factory: generate a dump (and manifest) into the workspace."""

    def _make(name="dump.kdmp", pages=64, **overrides):
        config = DumpGenConfig(total_size=pages * PAGE_SIZE, **{"seed": 3, **overrides})
        dump_bytes, manifest = generate_dump(config)
        path = str(workspace / name)
        write_dump(dump_bytes, path)
        write_manifest(manifest, f"{path}.manifest.csv")
        return path, dump_bytes, manifest

    return _make


@pytest.fixture
def make_mapping(workspace):
    """Factory: write a sensitivity mapping JSON and return its path."""

    def _make(name="mapping.json", direct=None, quasi=None, custom_identifiers=None):
        data = {
            "direct": sorted(direct) if direct is not None else sorted(i.name for i in load_builtin_identifiers()),
            "quasi": quasi or [],
            "custom_identifiers": custom_identifiers or [],
        }
        path = str(workspace / name)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f)
        return path

    return _make


@pytest.fixture
def make_config(workspace):
    """Factory: analyze config writing outputs next to the input, thread workers by default."""

    def _make(input_path, output_name="out.kdmp", **overrides):
        settings = {
            "mode": "analyze",
            "threads": 1,
            "executor": "thread",
            "input_path": input_path,
            "output_path": str(workspace / output_name),
            "knowledge_db": str(workspace / "knowledge.json"),
            "redaction": RedactionPolicy(),
        }
        settings.update(overrides)
        return EngineConfig.from_defaults(**settings).validate()

    return _make
