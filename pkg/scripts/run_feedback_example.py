"""
Script to walk through a feedback + augment round trip on a small crafted dump.

1. analyze: "feedback-keyword-1" and "ingested-keyword-1" are unknown and stay in clear text
2. feedback: the non-sensitive report row for "feedback-keyword-1" is marked N
3. augment: "ingested-keyword-1" becomes a dictionary identifier listed as direct
4. analyze again: both keywords are redacted
"""

import argparse
import json
import os
import sys

import pandas as pd

# Add parent directory to path to import backend modules
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from backend.api.scrub_api import ScrubApi
from backend.services.dumpgen import craft_dump, write_dump
from backend.services.knowledge_base import load_builtin_identifiers

PAGE_TEXTS = [
    "order 4411 shipped to warehouse contact alice@example.com status feedback-keyword-1 done",
    "batch import finished with ingested-keyword-1 and checksum verified for node 10.1.2.3",
]
KEYWORDS = ("feedback-keyword-1", "ingested-keyword-1")


def keywords_present(path: str) -> dict[str, bool]:
    with open(path, "rb") as f:
        data = f.read()
    return {k: k.encode("ascii") in data for k in KEYWORDS}


def main():
    parser = argparse.ArgumentParser(description="Feedback + augment round trip on a crafted dump")
    parser.add_argument("--workdir", default="example_run", help="directory for all artifacts")
    args = parser.parse_args()
    workdir = os.path.abspath(args.workdir)
    os.makedirs(workdir, exist_ok=True)

    dump_path = os.path.join(workdir, "crafted.kdmp")
    mapping_path = os.path.join(workdir, "mapping.json")
    write_dump(craft_dump(PAGE_TEXTS), dump_path)
    with open(mapping_path, "w", encoding="utf-8") as f:
        json.dump({"direct": sorted(i.name for i in load_builtin_identifiers())}, f, indent=2)

    config = {
        "threads": 1,
        "executor": "thread",
        "input": {"path": dump_path, "type": "dump", "encoding": "ascii"},
        "output": {"path": os.path.join(workdir, "crafted.redacted.kdmp")},
        "sensitivity_mapping": mapping_path,
        "knowledge_db": os.path.join(workdir, "knowledge.json"),
        "augment": {
            "source": os.path.join(workdir, "terms.txt"),
            "entity_type": "INGESTED_KEYWORD",
            "output": os.path.join(workdir, "ingested_keyword.txt"),
            "mapping": mapping_path,
        },
    }
    api = ScrubApi()

    api.run_analysis(config)
    status = api.wait()
    print(f"First analyze: {status['status']}")
    first = status["result"]
    print(f"  keywords still in output: {keywords_present(first['output'])}")

    report = pd.read_csv(first["nonsensitive_report"], dtype=str, keep_default_na=False)
    report.loc[report["token"] == "feedback-keyword-1", "Is_Analysis_Correct"] = "N"
    report.to_csv(first["nonsensitive_report"], index=False, lineterminator="\n")
    print(f"Feedback: {api.run_feedback(config)}")

    with open(config["augment"]["source"], "w", encoding="utf-8") as f:
        f.write("ingested-keyword-1\n")
    print(f"Augment: {api.run_augment(config)}")

    api.run_analysis(config)
    second = api.wait()["result"]
    print(f"  keywords still in output: {keywords_present(second['output'])}")


if __name__ == "__main__":
    main()
