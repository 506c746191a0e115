"""Run orchestration: configuration, the parallel classify pipeline and the mode runners."""

import json
import math
import mmap
import os
import threading
import time
from collections import Counter, defaultdict
from collections.abc import Callable, Iterable
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, ThreadPoolExecutor, wait
from contextlib import contextmanager
from dataclasses import dataclass, field, fields, replace
from typing import Any

from config import (
    INPUT_TYPES,
    PROCESSING_MODES,
    RUN_MODES,
    SUPPORTED_ENCODINGS,
    default_budget,
    default_chunk_pages,
    default_min_token_len,
    default_vicinity_unit,
    knowledge_db_path,
)
from backend.models.dump import WorkChunk
from backend.models.findings import ChunkResult, Finding
from backend.models.knowledge import UNCLASSIFIED, UNIDENTIFIED, Identifier, SensitivityMapping
from backend.repositories.knowledge_repository import KnowledgeRepository
from backend.services.budget import BudgetSample, BudgetState, update_budget
from backend.services.classifier import Classifier, resolve_vicinity
from backend.services.dumpgen import DumpGenConfig, generate_dump, write_dump, write_manifest
from backend.services.input_parser import (
    chunk_groups,
    count_tokens,
    line_starts,
    log_paragraphs,
    page_payload,
    scan_dump,
    tokenize_page,
    tokenize_span,
)
from backend.services.knowledge_base import (
    KnowledgeBase,
    apply_feedback,
    ingest_augment,
    load_knowledge_base,
    load_sensitivity_mapping,
    minimal_identifier_set,
    validate_overwrite_strings,
)
from backend.services.redactor import RedactionPolicy, Redactor, apply_redactions
from backend.services.reporting import PAGE_ROW_PREFIXES, write_reports
from backend.utils.crypto import REPORT_MAGIC, load_key
from backend.utils.errors import ConfigError, RunCancelled, ScrubError
from backend.utils.helper import PhaseTimer
from backend.utils.logger import get_logger
from backend.utils.utils import get_database_path, write_atomic

logger = get_logger(__name__)

EXECUTORS = ("process", "thread")
VICINITY_UNITS = ("tokens", "pages")
ANALYZE_PHASES = ("parse", "plan", "classify", "resolve", "redact", "report")


@dataclass
class EngineConfig:
    """Run configuration; the JSON layout nests input/output/optimizations sections."""

    mode: str = "analyze"
    threads: int = 1
    processing_mode: str = "concise"
    time_budget: float | None = None
    input_path: str | None = None
    input_type: str = "dump"
    encoding: str = "ascii"
    output_path: str | None = None
    sensitive_report: str | None = None
    nonsensitive_report: str | None = None
    encrypt_reports: bool = False
    stats_path: str | None = None
    redaction: RedactionPolicy = field(default_factory=RedactionPolicy)
    sensitivity_mapping: str | None = None
    min_identifiers: bool = True
    quasi_skip: bool = True
    mru: bool = True
    vicinity_unit: str = default_vicinity_unit
    chunk_pages: int = default_chunk_pages
    min_token_len: int = default_min_token_len
    executor: str = "process"
    budget: dict[str, float] = field(default_factory=dict)
    knowledge_db: str = knowledge_db_path
    seed: int | None = None
    feedback: dict[str, Any] = field(default_factory=dict)
    augment: dict[str, Any] = field(default_factory=dict)
    generate: dict[str, Any] = field(default_factory=dict)
    bench: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_defaults(cls, **kwargs) -> "EngineConfig":
        config = cls(**kwargs)
        config.fill_default_paths()
        return config

    @classmethod
    def from_dict(cls, data: dict) -> "EngineConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)} | {"input", "output", "optimizations", "vicinity"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}", field="config")
        kwargs: dict[str, Any] = {}
        section_keys = {
            "input": {"path": "input_path", "type": "input_type", "encoding": "encoding"},
            "output": {
                "path": "output_path",
                "sensitive_report": "sensitive_report",
                "nonsensitive_report": "nonsensitive_report",
                "encrypt_reports": "encrypt_reports",
                "stats": "stats_path",
            },
            "optimizations": {"min_identifiers": "min_identifiers", "quasi_skip": "quasi_skip", "mru": "mru"},
            "vicinity": {"unit": "vicinity_unit"},
        }
        for section, mapping in section_keys.items():
            values = data.pop(section, None) or {}
            if not isinstance(values, dict):
                raise ConfigError("must be an object", field=section)
            extra = set(values) - set(mapping)
            if extra:
                raise ConfigError(f"unknown keys {sorted(extra)}", field=section)
            kwargs.update({mapping[k]: v for k, v in values.items()})
        if "redaction" in data:
            kwargs["redaction"] = RedactionPolicy.from_dict(data.pop("redaction"))
        kwargs.update(data)
        return cls.from_defaults(**kwargs)

    def fill_default_paths(self):
        if self.output_path:
            self.sensitive_report = self.sensitive_report or f"{self.output_path}.sensitive.csv"
            self.nonsensitive_report = self.nonsensitive_report or f"{self.output_path}.nonsensitive.csv"
            self.stats_path = self.stats_path or f"{self.output_path}.stats.json"

    def with_overrides(self, **overrides) -> "EngineConfig":
        """Copy with CLI overrides applied; None values are ignored."""
        updated = replace(self, **{k: v for k, v in overrides.items() if v is not None})
        updated.fill_default_paths()
        return updated

    @property
    def report_paths(self) -> tuple[str, str]:
        return self.sensitive_report, self.nonsensitive_report

    def validate(self) -> "EngineConfig":
        if self.mode not in RUN_MODES:
            raise ConfigError(f"unknown mode '{self.mode}', expected one of {RUN_MODES}", field="mode")
        if not isinstance(self.threads, int) or isinstance(self.threads, bool) or self.threads < 1:
            raise ConfigError(f"must be an integer >= 1, got {self.threads!r}", field="threads")
        if self.processing_mode not in PROCESSING_MODES:
            raise ConfigError(f"unknown processing mode '{self.processing_mode}'", field="processing_mode")
        if self.processing_mode == "dynamic":
            if self.time_budget is None:
                raise ConfigError("dynamic mode requires a time budget", field="time_budget")
            if not isinstance(self.time_budget, (int, float)) or self.time_budget <= 0:
                raise ConfigError(
                    f"must be a positive number of seconds, got {self.time_budget!r}", field="time_budget"
                )
        if self.input_type not in INPUT_TYPES:
            raise ConfigError(f"unknown input type '{self.input_type}'", field="input.type")
        if self.encoding not in SUPPORTED_ENCODINGS:
            raise ConfigError(f"unknown encoding '{self.encoding}'", field="input.encoding")
        if self.vicinity_unit not in VICINITY_UNITS:
            raise ConfigError(f"unknown unit '{self.vicinity_unit}'", field="vicinity.unit")
        if self.executor not in EXECUTORS:
            raise ConfigError(f"unknown executor '{self.executor}'", field="executor")
        if not isinstance(self.chunk_pages, int) or self.chunk_pages < 1:
            raise ConfigError("must be an integer >= 1", field="chunk_pages")
        if not isinstance(self.min_token_len, int) or self.min_token_len < 1:
            raise ConfigError("must be an integer >= 1", field="min_token_len")
        unknown_budget = set(self.budget) - set(default_budget)
        if unknown_budget:
            raise ConfigError(f"unknown keys {sorted(unknown_budget)}", field="budget")
        for name in ("min_identifiers", "quasi_skip", "mru", "encrypt_reports"):
            if not isinstance(getattr(self, name), bool):
                raise ConfigError("must be true or false", field=name)
        if self.mode == "analyze":
            self._validate_analyze()
        return self

    def _validate_analyze(self):
        if not self.input_path:
            raise ConfigError("analyze requires an input path", field="input.path")
        if not self.output_path:
            raise ConfigError("analyze requires an output path", field="output.path")
        paths = [self.input_path, self.output_path, self.sensitive_report, self.nonsensitive_report, self.stats_path]
        resolved = [os.path.abspath(p) for p in paths]
        if len(set(resolved)) != len(resolved):
            raise ConfigError("input, output, report and stats paths must be distinct", field="output")
        self.redaction.validate(self.input_type)
        if self.encrypt_reports and not self.redaction.key_file:
            raise ConfigError("encrypt_reports requires a key file", field="redaction.key_file")


def load_engine_config(path: str, overrides: dict[str, Any] | None = None) -> EngineConfig:
    """Read a run configuration JSON file, apply CLI overrides and validate."""
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}", field="config") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {path}: {e}", field="config") from e
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object", field="config")
    try:
        config = EngineConfig.from_dict(data)
    except TypeError as e:
        raise ConfigError(str(e), field="config") from e
    return config.with_overrides(**(overrides or {})).validate()


def run_identifiers(mapping: SensitivityMapping, kb: KnowledgeBase, minimal: bool = True) -> list[Identifier]:
    """Identifiers a run evaluates.

    Without the minimal-set optimization every loaded identifier runs; the mapped ones stay in
    front so a token matched by a mapped identifier is attributed the same way either way.
    """
    selected = minimal_identifier_set(mapping, kb)
    if minimal:
        return selected
    names = {i.name for i in selected}
    return selected + [i for i in kb.all_identifiers() if i.name not in names]


@dataclass(frozen=True)
class WorkerContext:
    """Everything a worker needs to rebuild its classifier; shipped once per worker."""

    input_path: str
    input_type: str
    encoding: str
    kb: KnowledgeBase
    mapping: SensitivityMapping
    identifiers: tuple[Identifier, ...]
    unit: str = default_vicinity_unit
    mru: bool = True
    quasi_skip: bool = True
    min_token_len: int = default_min_token_len


def _map_input(path: str):
    with open(path, "rb") as f:
        if os.fstat(f.fileno()).st_size == 0:
            return b""
        return mmap.mmap(f.fileno(), 0, access=mmap.ACCESS_READ)


@contextmanager
def mapped_input(path: str):
    """Read-only mapping of `path`, closed on exit."""
    data = _map_input(path)
    try:
        yield data
    finally:
        if isinstance(data, mmap.mmap):
            data.close()


class ChunkWorker:
    """Classifies work chunks against a read-only mapping of the input file.

    The file is mapped only while a chunk runs, so pool processes hold no mapping between chunks.
    """

    def __init__(self, ctx: WorkerContext):
        self.ctx = ctx
        self.classifier = Classifier(
            ctx.kb, ctx.mapping, list(ctx.identifiers), unit=ctx.unit, mru=ctx.mru, quasi_skip=ctx.quasi_skip
        )
        self.data = b""
        self.starts = None
        if ctx.input_type == "log":
            with mapped_input(ctx.input_path) as data:
                self.starts = line_starts(data, ctx.encoding)

    def _page_tokens(self, chunk: WorkChunk, page_index: int, data_len: int):
        payload = page_payload(self.data, page_index, data_len)
        return tokenize_page(payload, self.ctx.encoding, page_index, chunk.group_id, self.ctx.min_token_len)

    def _span_tokens(self, chunk: WorkChunk):
        return tokenize_span(
            self.data, self.ctx.encoding, chunk.group_id, chunk.span, self.starts, self.ctx.min_token_len
        )

    def chunk_tokens(self, chunk: WorkChunk) -> list:
        if chunk.span is not None:
            return self._span_tokens(chunk)
        tokens = []
        for page_index, data_len in zip(chunk.pages, chunk.data_lens):
            tokens.extend(self._page_tokens(chunk, page_index, data_len))
        return tokens

    def _count_pages(self, chunk: WorkChunk, start: int) -> int:
        if chunk.span is not None:
            return 0
        return sum(
            count_tokens(page_payload(self.data, p, n), self.ctx.encoding, self.ctx.min_token_len)
            for p, n in zip(chunk.pages[start:], chunk.data_lens[start:])
        )

    def run(self, chunk: WorkChunk, mode: str) -> ChunkResult:
        with mapped_input(self.ctx.input_path) as data:
            self.data = data
            try:
                return self._classify(chunk, mode)
            finally:
                self.data = b""

    def _classify(self, chunk: WorkChunk, mode: str) -> ChunkResult:
        start_time = time.perf_counter()
        result = ChunkResult(chunk.unit_id, chunk.group_id, mode)
        if mode == "concise":
            tokens = self.chunk_tokens(chunk)
            scan = self.classifier.scan(tokens, "concise", chunk.is_first, chunk.is_last)
            result.token_count = len(tokens)
            result.bytes_classified = chunk.payload_bytes
        elif mode == "boolean":
            entered: list[int] = []

            def stream():
                if chunk.span is not None:
                    tokens = self._span_tokens(chunk)
                    entered.append(len(tokens))
                    yield from tokens
                    return
                for page_index, data_len in zip(chunk.pages, chunk.data_lens):
                    tokens = self._page_tokens(chunk, page_index, data_len)
                    entered.append(len(tokens))
                    yield from tokens

            scan = self.classifier.scan(stream(), "boolean")
            if scan.early_exit:
                trigger = scan.trigger.token
                if chunk.span is not None:
                    result.bytes_classified = trigger.end - chunk.span[0]
                else:
                    result.bytes_classified = sum(chunk.data_lens[: len(entered) - 1]) + trigger.end
                result.unknown_from = scan.exit_position + 1
                result.trigger_entity = scan.trigger.entity_type
                if chunk.is_last:
                    result.token_count = scan.tokens_classified
                else:
                    result.token_count = sum(entered) + self._count_pages(chunk, len(entered))
            else:
                result.token_count = sum(entered)
                result.bytes_classified = chunk.payload_bytes
        elif mode == "skip":
            scan = self.classifier.scan((), "skip")
            result.unknown_from = 0
            if not chunk.is_last:
                result.token_count = self._count_pages(chunk, 0)
        else:
            raise ConfigError(f"unknown processing mode '{mode}'", field="processing_mode")

        result.findings = scan.findings
        result.unmatched = scan.unmatched
        result.tokens_classified = scan.tokens_classified
        result.evaluations = scan.evaluations
        result.early_exit = scan.early_exit
        result.elapsed = time.perf_counter() - start_time
        return result


_local = threading.local()


def _init_worker(ctx: WorkerContext):
    _local.worker = ChunkWorker(ctx)


def _run_chunk(chunk: WorkChunk, mode: str) -> ChunkResult:
    return _local.worker.run(chunk, mode)


def _release_worker():
    _local.worker = None


def run_parallel(
    units: list,
    workers: int,
    fn: Callable,
    executor: str = "process",
    initializer: Callable | None = None,
    initargs: tuple = (),
    submit_args: Callable[[Any], tuple] | None = None,
    on_result: Callable[[int, Any], None] | None = None,
    cancel_event: threading.Event | None = None,
) -> list:
    """Apply `fn(unit, *submit_args(unit))` to every unit and return results in unit order.

    A single worker runs inline. Otherwise at most 2 x workers units are in flight, so
    `submit_args` sees state updated by `on_result` for earlier completions.
    """
    if workers < 1:
        raise ConfigError(f"must be >= 1, got {workers}", field="threads")
    if executor not in EXECUTORS:
        raise ConfigError(f"unknown executor '{executor}'", field="executor")
    results: list = [None] * len(units)

    def cancelled() -> bool:
        return cancel_event is not None and cancel_event.is_set()

    if workers == 1:
        if initializer is not None:
            initializer(*initargs)
        try:
            for index, unit in enumerate(units):
                if cancelled():
                    raise RunCancelled("run cancelled", phase="classify")
                args = submit_args(unit) if submit_args else ()
                try:
                    results[index] = fn(unit, *args)
                except ScrubError:
                    raise
                except Exception as e:
                    raise ScrubError(f"worker failed on unit {index}: {e}") from e
                if on_result:
                    on_result(index, results[index])
        finally:
            if initializer is _init_worker:
                _release_worker()
        return results

    pool_cls = ProcessPoolExecutor if executor == "process" else ThreadPoolExecutor
    with pool_cls(max_workers=workers, initializer=initializer, initargs=initargs) as pool:
        pending: dict = {}
        next_index = 0
        try:
            while next_index < len(units) or pending:
                while next_index < len(units) and len(pending) < 2 * workers:
                    if cancelled():
                        raise RunCancelled("run cancelled", phase="classify")
                    unit = units[next_index]
                    args = submit_args(unit) if submit_args else ()
                    pending[pool.submit(fn, unit, *args)] = next_index
                    next_index += 1
                done, _ = wait(pending, return_when=FIRST_COMPLETED)
                for future in sorted(done, key=pending.get):
                    index = pending.pop(future)
                    try:
                        results[index] = future.result()
                    except ScrubError:
                        raise
                    except Exception as e:
                        raise ScrubError(f"worker failed on unit {index}: {e}") from e
                    if on_result:
                        on_result(index, results[index])
        except BaseException:
            for future in pending:
                future.cancel()
            raise
    logger.debug(f"run_parallel processed {len(units)} unit(s) with {workers} {executor} worker(s)")
    return results


@dataclass
class MergedFindings:
    """Coordinator view of a classified input, ready for redaction and reporting."""

    token_findings: list[Finding] = field(default_factory=list)
    wipe_units: list = field(default_factory=list)
    sensitive: Counter = field(default_factory=Counter)
    non_sensitive: Counter = field(default_factory=Counter)


def _unit_label(input_type: str, chunk: WorkChunk, page_index: int) -> str:
    return f"PARAGRAPH:{chunk.group_id}" if input_type == "log" else f"PAGE:{page_index}"


def merge_chunk_results(
    chunks: list[WorkChunk],
    results: list[ChunkResult],
    mapping: SensitivityMapping,
    unit: str = default_vicinity_unit,
    input_type: str = "dump",
) -> MergedFindings:
    """Resolve vicinity per group across its chunks and split findings into redaction work.

    Positions are rebased to the group. Tokens a chunk never classified count as possible
    quasi evidence, so an early exit can only widen what is redacted.
    """
    merged = MergedFindings()
    by_group: dict[int, list[tuple[WorkChunk, ChunkResult]]] = defaultdict(list)
    for chunk, result in zip(chunks, results):
        by_group[chunk.group_id].append((chunk, result))

    for items in by_group.values():
        base = 0
        group_findings: list[Finding] = []
        unknown: list[tuple[int, float]] = []
        for chunk, result in items:
            for finding in result.findings:
                finding.position += base
            group_findings.extend(result.findings)
            if result.unknown_from is not None:
                end = math.inf if chunk.is_last else base + result.token_count
                unknown.append((base + result.unknown_from, end))
            base += result.token_count
        sensitive_ids = {id(f) for f in resolve_vicinity(group_findings, mapping, unit=unit, unknown=unknown)}

        for chunk, result in items:
            chunk_sensitive = [f for f in result.findings if id(f) in sensitive_ids]
            for finding in result.findings:
                counter = merged.sensitive if id(finding) in sensitive_ids else merged.non_sensitive
                counter[(finding.token.text, finding.entity_type)] += 1
            for text, count in result.unmatched.items():
                merged.non_sensitive[(text, UNIDENTIFIED)] += count

            if result.early_exit:
                entity = result.trigger_entity or UNCLASSIFIED
                _wipe(merged, chunk, chunk.pages, entity, input_type)
            elif result.mode == "boolean" and chunk_sensitive:
                first_entity: dict[int, str] = {}
                for finding in chunk_sensitive:
                    first_entity.setdefault(finding.token.page_index, finding.entity_type)
                for page_index in sorted(first_entity):
                    _wipe(merged, chunk, (page_index,), first_entity[page_index], input_type)
            else:
                merged.token_findings.extend(chunk_sensitive)
    return merged


def _wipe(merged: MergedFindings, chunk: WorkChunk, pages: Iterable[int], entity: str, input_type: str):
    if input_type == "log":
        merged.wipe_units.append(chunk.span)
        merged.sensitive[(_unit_label(input_type, chunk, chunk.group_id), entity)] += 1
        return
    for page_index in pages:
        merged.wipe_units.append(page_index)
        merged.sensitive[(_unit_label(input_type, chunk, page_index), entity)] += 1


def _remove_outputs(paths: Iterable[str]):
    for path in paths:
        if path and os.path.exists(path):
            try:
                os.remove(path)
                logger.info(f"Removed output after failure: {path}")
            except OSError as e:
                logger.warning(f"Could not remove {path}: {e}")


def _entity_counts(counter: Counter) -> dict[str, int]:
    totals: Counter = Counter()
    for (_, entity), count in counter.items():
        totals[entity] += count
    return dict(sorted(totals.items()))


def analyze(
    config: EngineConfig,
    key: bytes | None = None,
    progress_callback: Callable[[int, str, str], None] | None = None,
    cancel_event: threading.Event | None = None,
) -> dict[str, Any]:
    """Redact one input file and write the output, both reports and the stats JSON."""
    config.validate()
    timer = PhaseTimer()
    written: list[str] = []
    run_start = time.perf_counter()

    def update_progress(phase: int, phase_name: str, message: str):
        if progress_callback:
            try:
                progress_callback(phase, phase_name, message)
            except Exception as e:
                logger.warning(f"Progress callback error: {e}")
        if cancel_event is not None and cancel_event.is_set():
            raise RunCancelled("run cancelled", phase=timer.current)

    logger.info(
        f"Starting analyze of {config.input_path} ({config.input_type}, {config.encoding}) "
        f"in {config.processing_mode} mode with {config.threads} worker(s)"
    )
    data = None
    try:
        with timer.phase("parse"):
            update_progress(1, "Parsing input...", f"Reading {config.input_path}")
            if not os.path.exists(config.input_path):
                raise ConfigError(f"input not found: {config.input_path}", field="input.path")
            data = _map_input(config.input_path)
            groups = scan_dump(data) if config.input_type == "dump" else log_paragraphs(data, config.encoding)
            chunks = chunk_groups(groups, config.chunk_pages)
            logger.info(f"Parsed {len(groups)} group(s) into {len(chunks)} work chunk(s)")

        with timer.phase("plan"):
            update_progress(2, "Planning identifiers...", "Loading knowledge base")
            mapping = load_sensitivity_mapping(config.sensitivity_mapping)
            with KnowledgeRepository(get_database_path(config.knowledge_db)) as repository:
                kb = load_knowledge_base(mapping, repository)
            identifiers = run_identifiers(mapping, kb, config.min_identifiers)
            validate_overwrite_strings(config.redaction.overwrite_strings(), kb.all_identifiers(), kb.feedback)
            if key is None and (config.redaction.needs_key or config.encrypt_reports):
                key = load_key(config.redaction.key_file)
            logger.info(f"Identifiers for this run: {[i.name for i in identifiers]}")

        with timer.phase("classify"):
            update_progress(3, "Classifying...", f"Classifying {len(chunks)} chunk(s)")
            ctx = WorkerContext(
                input_path=config.input_path,
                input_type=config.input_type,
                encoding=config.encoding,
                kb=kb,
                mapping=mapping,
                identifiers=tuple(identifiers),
                unit=config.vicinity_unit,
                mru=config.mru,
                quasi_skip=config.quasi_skip,
                min_token_len=config.min_token_len,
            )
            budget_state = None
            if config.processing_mode == "dynamic":
                budget_state = BudgetState.from_config(
                    config.time_budget, len(chunks), config.threads, config.budget, started_at=run_start
                )

                def submit_args(chunk):
                    return (budget_state.mode,)

                def on_result(index, result):
                    update_budget(budget_state, BudgetSample(result.mode, result.elapsed))

            else:

                def submit_args(chunk):
                    return (config.processing_mode,)

                on_result = None
            results = run_parallel(
                chunks,
                config.threads,
                _run_chunk,
                executor=config.executor,
                initializer=_init_worker,
                initargs=(ctx,),
                submit_args=submit_args,
                on_result=on_result,
                cancel_event=cancel_event,
            )

        with timer.phase("resolve"):
            update_progress(4, "Resolving vicinity...", "Merging chunk results")
            merged = merge_chunk_results(chunks, results, mapping, config.vicinity_unit, config.input_type)

        with timer.phase("redact"):
            update_progress(5, "Redacting...", f"Writing {config.output_path}")
            redactor = Redactor(config.redaction, config.encoding, config.input_type, key)
            output = apply_redactions(
                data,
                merged.token_findings,
                config.redaction,
                mode="concise",
                encoding=config.encoding,
                input_type=config.input_type,
                wipe_units=merged.wipe_units,
                key=key,
                redactor=redactor,
            )
            write_atomic(config.output_path, output)
            written.append(config.output_path)

        with timer.phase("report"):
            update_progress(6, "Writing reports...", "Writing reports and stats")
            write_reports(
                merged.sensitive,
                merged.non_sensitive,
                config.report_paths,
                config.encrypt_reports,
                key,
                on_written=written.append,
            )
            chunks_by_mode = Counter(r.mode for r in results)
            stats = {
                "input": config.input_path,
                "input_type": config.input_type,
                "encoding": config.encoding,
                "processing_mode": config.processing_mode,
                "threads": config.threads,
                "executor": config.executor,
                "optimizations": {
                    "min_identifiers": config.min_identifiers,
                    "quasi_skip": config.quasi_skip,
                    "mru": config.mru,
                },
                "identifiers": [i.name for i in identifiers],
                "groups": len(groups),
                "chunks": len(chunks),
                "chunks_by_mode": dict(sorted(chunks_by_mode.items())),
                "early_exits": sum(1 for r in results if r.early_exit),
                "findings_by_entity": _entity_counts(
                    Counter({k: v for k, v in merged.sensitive.items() if not k[0].startswith(PAGE_ROW_PREFIXES)})
                ),
                "tokens_total": sum(r.token_count for r in results),
                "tokens_classified": sum(r.tokens_classified for r in results),
                "identifier_evaluations": sum(r.evaluations for r in results),
                "payload_bytes_total": sum(c.payload_bytes for c in chunks),
                "payload_bytes_classified": sum(r.bytes_classified for r in results),
                "units_wiped": len(merged.wipe_units),
                "mode_transitions": budget_state.transitions if budget_state else [],
                "phase_seconds": timer.as_dict(),
            }
            stats["total_seconds"] = round(time.perf_counter() - run_start, 6)
            write_atomic(config.stats_path, json.dumps(stats, indent=2).encode("utf-8"))
            written.append(config.stats_path)
    except ScrubError as e:
        _remove_outputs(written)
        logger.error(f"Analyze failed: {e.with_phase(timer.current or 'parse')}")
        raise
    except Exception as e:
        _remove_outputs(written)
        logger.error(f"Analyze failed in phase {timer.current}: {e}", exc_info=True)
        raise ScrubError(str(e), phase=timer.current) from e
    finally:
        if isinstance(data, mmap.mmap):
            data.close()

    logger.info(
        f"Analyze finished in {stats['total_seconds']:.2f}s: {len(merged.token_findings)} extent(s) redacted, "
        f"{len(merged.wipe_units)} unit(s) wiped"
    )
    return {
        "output": config.output_path,
        "sensitive_report": config.sensitive_report,
        "nonsensitive_report": config.nonsensitive_report,
        "stats_path": config.stats_path,
        "stats": stats,
    }


def _reports_sealed(paths: Iterable[str]) -> bool:
    for path in paths:
        if path and os.path.exists(path):
            with open(path, "rb") as f:
                if f.read(len(REPORT_MAGIC)) == REPORT_MAGIC:
                    return True
    return False


def run_feedback(config: EngineConfig, key: bytes | None = None) -> dict[str, Any]:
    """Fold user-marked reports into the persisted feedback store."""
    section = config.feedback
    sensitive = section.get("sensitive_report") or config.sensitive_report
    nonsensitive = section.get("nonsensitive_report") or config.nonsensitive_report
    if not sensitive or not nonsensitive:
        raise ConfigError("both marked report paths are required", field="feedback")
    if key is None and _reports_sealed((sensitive, nonsensitive)):
        key = load_key(config.redaction.key_file)
    with KnowledgeRepository(get_database_path(config.knowledge_db)) as repository:
        store = apply_feedback(sensitive, nonsensitive, repository.load_feedback(), key)
        repository.save_feedback(store)
    return {"status": "completed", "suppressed": len(store.suppress), "forced": len(store.force_sensitive)}


def register_in_mapping(mapping_path: str, entity_type: str, artifact_path: str, sensitivity: str = "direct"):
    """Add an augmented entity to a sensitivity mapping file (created when missing)."""
    data: dict[str, Any] = {"direct": [], "quasi": [], "custom_identifiers": []}
    if os.path.exists(mapping_path):
        with open(mapping_path, encoding="utf-8") as f:
            data.update(json.load(f))
    customs = [c for c in data.get("custom_identifiers", []) if c.get("entity_type") != entity_type]
    customs.append({"entity_type": entity_type, "path": artifact_path})
    data["custom_identifiers"] = customs
    if sensitivity == "direct" and entity_type not in data["direct"]:
        data["direct"] = sorted([*data["direct"], entity_type])
    write_atomic(mapping_path, (json.dumps(data, indent=2) + "\n").encode("utf-8"))
    logger.info(f"Mapping {mapping_path} now lists {entity_type} ({sensitivity})")


def run_augment(config: EngineConfig) -> dict[str, Any]:
    section = config.augment
    missing = [k for k in ("source", "entity_type", "output") if not section.get(k)]
    if missing:
        raise ConfigError(f"missing keys {missing}", field="augment")
    with KnowledgeRepository(get_database_path(config.knowledge_db)) as repository:
        identifier = ingest_augment(section["source"], section["entity_type"], section["output"], repository)
    mapping_path = section.get("mapping")
    if mapping_path:
        register_in_mapping(mapping_path, identifier.name, section["output"], section.get("sensitivity", "direct"))
    return {"status": "completed", "entity_type": identifier.name, "terms": len(identifier.terms)}


def run_generate(config: EngineConfig, output: str | None = None, manifest: str | None = None) -> dict[str, Any]:
    section = dict(config.generate)
    output = output or section.pop("output", None)
    manifest = manifest or section.pop("manifest", None)
    section.pop("output", None)
    section.pop("manifest", None)
    if not output:
        raise ConfigError("generate requires an output path", field="generate.output")
    if config.seed is not None:
        section["seed"] = config.seed
    gen_config = DumpGenConfig.from_dict(section)
    dump_bytes, entries = generate_dump(gen_config)
    write_dump(dump_bytes, output)
    manifest = manifest or f"{output}.manifest.csv"
    write_manifest(entries, manifest)
    return {
        "status": "completed",
        "output": output,
        "manifest": manifest,
        "pages": gen_config.page_count,
        "plants": len(entries),
    }


def run(
    config: EngineConfig,
    key: bytes | None = None,
    progress_callback: Callable[[int, str, str], None] | None = None,
    cancel_event: threading.Event | None = None,
) -> dict[str, Any]:
    """Dispatch on `config.mode`."""
    config.validate()
    if config.mode == "analyze":
        return analyze(config, key, progress_callback, cancel_event)
    if config.mode == "feedback":
        return run_feedback(config, key)
    if config.mode == "augment":
        return run_augment(config)
    if config.mode == "generate":
        return run_generate(config)
    from backend.services.bench import run_bench

    return run_bench(config, progress_callback=progress_callback, cancel_event=cancel_event)
