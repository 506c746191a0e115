"""Benchmark harness: factor sweeps over generated dumps, timing CSV, fits and figures."""

import json
import os
import threading
import time
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import matplotlib

# Render to files only
matplotlib.use("Agg")

import matplotlib.pyplot as plt
import pandas as pd
from scipy import stats

from config import PAGE_SIZE
from backend.services.dumpgen import DumpGenConfig, generate_dump, write_dump
from backend.services.engine import EngineConfig, analyze
from backend.services.knowledge_base import load_builtin_identifiers
from backend.services.redactor import RedactionPolicy
from backend.utils.errors import ConfigError, RunCancelled
from backend.utils.helper import time_execution
from backend.utils.logger import get_logger
from backend.utils.utils import write_atomic

logger = get_logger(__name__)

MIB = 1024 * 1024
BENCH_FACTORS = (
    "size_mib",
    "threads",
    "pct_sensitive_pages",
    "identifier_count",
    "pct_control_data",
    "redaction_method",
)
BENCH_COLUMNS = ["factor", "value", "mode", "seconds"]
BENCH_MODES = ("concise", "boolean")
REDACTION_METHODS = {
    "overwrite": {"method": "overwrite"},
    "hash": {"method": "hash", "hash_algo": "sha256", "hash_length_policy": "fit"},
    "fpe": {"method": "encrypt", "encrypt_scheme": "fpe_ff1"},
}

DEFAULT_BASE = {
    "size_mib": 16,
    "threads": os.cpu_count() or 1,
    "pct_sensitive_pages": 0.1,
    "identifier_count": 6,
    "pct_control_data": 0.3,
    "redaction_method": "overwrite",
}


@dataclass
class BenchPlan:
    base: dict[str, Any] = field(default_factory=dict)
    sweeps: dict[str, list] = field(default_factory=dict)
    modes: list[str] = field(default_factory=lambda: list(BENCH_MODES))
    seed: int = 0
    workdir: str = "bench"
    plot_dir: str | None = None
    repeats: int = 1
    executor: str = "process"
    chunk_pages: int = 64

    @classmethod
    def from_dict(cls, data: dict) -> "BenchPlan":
        data = dict(data)
        known = {"base", "sweeps", "modes", "seed", "workdir", "plot_dir", "repeats", "executor", "chunk_pages"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}", field="bench")
        data["base"] = {**DEFAULT_BASE, **data.get("base", {})}
        plan = cls(**data)
        plan.validate()
        return plan

    def validate(self):
        for factor in [*self.base, *self.sweeps]:
            if factor not in BENCH_FACTORS:
                raise ConfigError(f"unknown factor '{factor}', expected one of {BENCH_FACTORS}", field="bench.sweeps")
        for factor, values in self.sweeps.items():
            if not isinstance(values, list) or not values:
                raise ConfigError("sweep values must be a non-empty list", field=f"bench.sweeps.{factor}")
        for mode in self.modes:
            if mode not in BENCH_MODES:
                raise ConfigError(f"unknown mode '{mode}'", field="bench.modes")
        if not isinstance(self.repeats, int) or self.repeats < 1:
            raise ConfigError("must be an integer >= 1", field="bench.repeats")
        builtin_count = len(load_builtin_identifiers())
        counts = [self.base["identifier_count"], *self.sweeps.get("identifier_count", [])]
        if any(not isinstance(n, int) or not 1 <= n <= builtin_count for n in counts):
            raise ConfigError(f"identifier counts must lie in [1, {builtin_count}]", field="bench.identifier_count")
        methods = [self.base["redaction_method"], *self.sweeps.get("redaction_method", [])]
        if any(m not in REDACTION_METHODS for m in methods):
            raise ConfigError(f"redaction methods must be among {sorted(REDACTION_METHODS)}", field="bench")

    def points(self) -> list[tuple[str, Any, dict[str, Any]]]:
        """(factor, value, settings) per sweep point; settings are the base with one factor changed."""
        return [
            (factor, value, {**self.base, factor: value}) for factor, values in self.sweeps.items() for value in values
        ]

    def row_count(self) -> int:
        return len(self.points()) * len(self.modes)


def identifier_mapping(count: int) -> dict[str, list]:
    """Mapping with the first `count` built-in entity types (alphabetical) as direct."""
    names = sorted(i.name for i in load_builtin_identifiers())
    return {"direct": names[:count], "quasi": [], "custom_identifiers": []}


class BenchRunner:
    """Generates (and caches) the dumps of a plan and times analyze on them."""

    def __init__(self, plan: BenchPlan, cancel_event: threading.Event | None = None):
        self.plan = plan
        self.cancel_event = cancel_event
        self.key = os.urandom(32)
        os.makedirs(plan.workdir, exist_ok=True)

    def dump_for(self, settings: dict[str, Any]) -> str:
        size = int(settings["size_mib"] * MIB) // PAGE_SIZE * PAGE_SIZE
        name = f"dump_{size}_{settings['pct_sensitive_pages']}_{settings['pct_control_data']}_{self.plan.seed}.kdmp"
        path = os.path.join(self.plan.workdir, name)
        if not os.path.exists(path):
            gen_config = DumpGenConfig(
                total_size=size,
                pct_sensitive_pages=settings["pct_sensitive_pages"],
                pct_control_data=settings["pct_control_data"],
                seed=self.plan.seed,
            )
            dump_bytes, _ = generate_dump(gen_config)
            write_dump(dump_bytes, path)
        return path

    def mapping_for(self, count: int) -> str:
        path = os.path.join(self.plan.workdir, f"mapping_{count}.json")
        if not os.path.exists(path):
            write_atomic(path, json.dumps(identifier_mapping(count), indent=2).encode("utf-8"))
        return path

    def time_point(self, settings: dict[str, Any], mode: str) -> float:
        config = EngineConfig.from_defaults(
            mode="analyze",
            threads=settings["threads"],
            processing_mode=mode,
            input_path=self.dump_for(settings),
            output_path=os.path.join(self.plan.workdir, "out.kdmp"),
            sensitivity_mapping=self.mapping_for(settings["identifier_count"]),
            redaction=RedactionPolicy.from_dict(REDACTION_METHODS[settings["redaction_method"]]),
            executor=self.plan.executor,
            chunk_pages=self.plan.chunk_pages,
            knowledge_db=os.path.join(self.plan.workdir, "knowledge.json"),
        )
        best = None
        for _ in range(self.plan.repeats):
            if self.cancel_event is not None and self.cancel_event.is_set():
                raise RunCancelled("bench cancelled")
            start_time = time.perf_counter()
            analyze(config, key=self.key)
            elapsed = time.perf_counter() - start_time
            best = elapsed if best is None else min(best, elapsed)
        return best


def fit_size_scaling(df: pd.DataFrame) -> dict[str, dict[str, float]]:
    """Least-squares fit of seconds against size per mode for the size sweep."""
    fits = {}
    sizes = df[df["factor"] == "size_mib"]
    for mode, rows in sizes.groupby("mode"):
        if rows["value"].nunique() < 2:
            continue
        fit = stats.linregress(rows["value"].astype(float), rows["seconds"].astype(float))
        fits[mode] = {"slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.rvalue**2}
    return fits


def thread_speedup(df: pd.DataFrame) -> dict[str, float]:
    speedups = {}
    threads = df[df["factor"] == "threads"]
    for mode, rows in threads.groupby("mode"):
        rows = rows.sort_values("value")
        if len(rows) >= 2 and rows["seconds"].iloc[-1] > 0:
            speedups[mode] = rows["seconds"].iloc[0] / rows["seconds"].iloc[-1]
    return speedups


def plot_factors(df: pd.DataFrame, plot_dir: str) -> list[str]:
    """One figure per swept factor, a line per mode."""
    os.makedirs(plot_dir, exist_ok=True)
    paths = []
    for factor, rows in df.groupby("factor"):
        fig, ax = plt.subplots()
        for mode, mode_rows in rows.groupby("mode"):
            ax.plot(mode_rows["value"].astype(str), mode_rows["seconds"], marker="o", label=mode)
        ax.set_xlabel(factor)
        ax.set_ylabel("seconds")
        ax.set_title(f"Runtime by {factor}")
        ax.legend()
        path = os.path.join(plot_dir, f"{factor}.png")
        plt.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        paths.append(path)
    return paths


@time_execution("bench")
def run_bench(
    config: EngineConfig,
    progress_callback: Callable[[int, str, str], None] | None = None,
    cancel_event: threading.Event | None = None,
) -> dict[str, Any]:
    """Run every (sweep point, mode) of the plan in `config.bench` and write CSV, summary and plots."""
    data = dict(config.bench)
    if config.seed is not None:
        data["seed"] = config.seed
    plan = BenchPlan.from_dict(data)
    runner = BenchRunner(plan, cancel_event)
    points = plan.points()
    rows = []
    for i, (factor, value, settings) in enumerate(points, start=1):
        if progress_callback:
            try:
                progress_callback(i, f"Bench {factor}", f"Point {i}/{len(points)}: {factor}={value}")
            except Exception as e:
                logger.warning(f"Progress callback error: {e}")
        for mode in plan.modes:
            seconds = runner.time_point(settings, mode)
            logger.info(f"Bench {factor}={value} {mode}: {seconds:.3f}s")
            rows.append({"factor": factor, "value": value, "mode": mode, "seconds": round(seconds, 6)})

    df = pd.DataFrame(rows, columns=BENCH_COLUMNS)
    csv_path = os.path.join(plan.workdir, "bench_results.csv")
    write_atomic(csv_path, df.to_csv(index=False, lineterminator="\n").encode("utf-8"))
    summary = {"rows": len(df), "size_fit": fit_size_scaling(df), "thread_speedup": thread_speedup(df)}
    for mode, fit in summary["size_fit"].items():
        logger.info(f"Size scaling ({mode}): R^2 = {fit['r_squared']:.4f}")
    summary_path = os.path.join(plan.workdir, "bench_summary.json")
    write_atomic(summary_path, json.dumps(summary, indent=2).encode("utf-8"))
    plots = plot_factors(df, plan.plot_dir) if plan.plot_dir and not df.empty else []
    return {"status": "completed", "csv": csv_path, "summary": summary_path, "plots": plots, "rows": len(df)}
