"""Token classification with MRU-ordered identifiers, vicinity windows and early exit.

Quasi skipping keeps one evidence anchor per quasi group (a member that is also direct, else
the alphabetically first member). Anchors are always evaluated. The remaining quasi-only
members are deferred: once a token's window is closed they are evaluated only when the window
holds anchor evidence for one of their groups. A deferred member without anchor evidence can
never become sensitive, so skipping it never changes the redacted output.
"""

import bisect
from collections import Counter, defaultdict
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field

from config import default_vicinity_unit
from backend.models.dump import PageGroup, ParsedToken
from backend.models.findings import DIRECT, FEEDBACK, QUASI, Finding
from backend.models.knowledge import FEEDBACK_ENTITY, Identifier, QuasiGroup, SensitivityMapping
from backend.services.knowledge_base import KnowledgeBase, build_matcher, minimal_identifier_set
from backend.utils.logger import get_logger

logger = get_logger(__name__)

MODES = ("concise", "boolean", "skip")


@dataclass
class MruState:
    """Identifier evaluation order; a match moves the identifier to the head."""

    entries: list[tuple[Identifier, Callable[[str], bool]]]
    enabled: bool = True
    evaluations: int = 0

    @classmethod
    def from_identifiers(cls, identifiers: Iterable[Identifier], enabled: bool = True) -> "MruState":
        return cls([(i, build_matcher(i)) for i in identifiers], enabled)

    @property
    def order(self) -> list[Identifier]:
        return [identifier for identifier, _ in self.entries]

    def names(self) -> list[str]:
        return [identifier.name for identifier, _ in self.entries]

    def promote(self, index: int):
        if self.enabled and index:
            self.entries.insert(0, self.entries.pop(index))


@dataclass
class VicinityState:
    """Per-unit window bookkeeping for quasi sensitivity."""

    direct: frozenset[str]
    groups: tuple[QuasiGroup, ...]
    unit: str = default_vicinity_unit
    anchors: tuple[str, ...] = ()
    deferrable: frozenset[str] = frozenset()
    skip: set[str] = field(default_factory=set)
    # entity -> (position, page) of its latest evidence, used by boolean confirmation
    last_seen: dict[str, tuple[int, int]] = field(default_factory=dict)
    seen: Counter = field(default_factory=Counter)

    @classmethod
    def from_mapping(cls, mapping: SensitivityMapping, unit: str = default_vicinity_unit) -> "VicinityState":
        anchors = tuple(quasi_anchor(g, mapping.direct) for g in mapping.quasi)
        deferrable = mapping.quasi_entities - mapping.direct - set(anchors)
        return cls(mapping.direct, mapping.quasi, unit, anchors, frozenset(deferrable))

    @property
    def quasi_entities(self) -> frozenset[str]:
        return frozenset().union(*(g.entities for g in self.groups)) if self.groups else frozenset()

    def sensitivity_of(self, entity: str) -> str | None:
        if entity == FEEDBACK_ENTITY:
            return FEEDBACK
        if entity in self.direct:
            return DIRECT
        if any(entity in g.entities for g in self.groups):
            return QUASI
        return None

    def groups_of(self, entity: str) -> list[int]:
        return [i for i, g in enumerate(self.groups) if entity in g.entities]

    def record(self, finding: Finding):
        if finding.suppressed or finding.entity_type not in self.quasi_entities:
            return
        self.last_seen[finding.entity_type] = (finding.position, finding.token.page_index)
        self.seen[finding.entity_type] += 1

    def confirmed(self, finding: Finding) -> bool:
        """Whether every co-member of some group was seen within the window before `finding`."""
        position, page = finding.position, finding.token.page_index
        for g in self.groups_of(finding.entity_type):
            group = self.groups[g]
            ok = True
            for member in group.entities - {finding.entity_type}:
                seen = self.last_seen.get(member)
                if seen is None:
                    ok = False
                elif self.unit == "pages":
                    ok = seen[1] == page
                else:
                    ok = position - seen[0] <= group.vicinity
                if not ok:
                    break
            if ok:
                return True
        return False


NOTHING_SKIPPED: frozenset[str] = frozenset()


def evidence_horizon(group: QuasiGroup) -> int:
    """How far a member's match can matter: its own window, or two windows when a third member
    can bridge between the anchor and it."""
    return group.vicinity if len(group.entities) == 2 else 2 * group.vicinity


def quasi_anchor(group: QuasiGroup, direct: frozenset[str]) -> str:
    members = sorted(group.entities)
    for member in members:
        if member in direct:
            return member
    return members[0]


def classify_token(token: ParsedToken, mru: MruState, vic: VicinityState, kb: KnowledgeBase, position: int = 0):
    """First identifier in MRU order that matches wins; feedback forcing is checked first."""
    text = token.text
    if text in kb.feedback.force_sensitive:
        return Finding(token, FEEDBACK_ENTITY, FEEDBACK, position)
    length = len(text)
    skip = vic.skip
    for index, (identifier, matches) in enumerate(mru.entries):
        if identifier.kind == "exact" or identifier.name in skip or not identifier.length_ok(length):
            continue
        mru.evaluations += 1
        if matches(text):
            mru.promote(index)
            entity = identifier.name
            if kb.feedback.is_suppressed(text, entity):
                return Finding(token, entity, None, position, suppressed=True)
            return Finding(token, entity, vic.sensitivity_of(entity), position)
    return None


def quasi_skip_update(vic: VicinityState, window_contents: dict[int, Counter]) -> set[str]:
    """Deferrable entities whose every group lacks anchor evidence in its window.

    `window_contents` maps a quasi group index to the evidence counts inside that group's
    window around the current token.
    """
    skip = set()
    for entity in vic.deferrable:
        if all(window_contents.get(g, Counter())[vic.anchors[g]] == 0 for g in vic.groups_of(entity)):
            skip.add(entity)
    vic.skip = skip
    return skip


def _window_has_unknown(lo: int, hi: int, unknown: list[tuple[int, float]]) -> bool:
    return any(start <= hi and lo < end for start, end in unknown)


def resolve_vicinity(
    group_findings: list[Finding],
    mapping: SensitivityMapping,
    window: int | None = None,
    unit: str = default_vicinity_unit,
    unknown: Iterable[tuple[int, float]] = (),
) -> list[Finding]:
    """Sensitive findings of one PageGroup.

    Direct and feedback findings are always sensitive. A quasi finding is sensitive iff for some
    quasi group every co-member has evidence within the window; a window overlapping an
    `unknown` position range [start, end) counts as evidence.
    """
    unknown = [(start, end) for start, end in unknown if end > start]
    evidence_pos: dict[str, list[int]] = defaultdict(list)
    evidence_pages: dict[str, set[int]] = defaultdict(set)
    quasi_entities = mapping.quasi_entities
    for f in group_findings:
        if not f.suppressed and f.entity_type in quasi_entities:
            evidence_pos[f.entity_type].append(f.position)
            evidence_pages[f.entity_type].add(f.token.page_index)
    for positions in evidence_pos.values():
        positions.sort()

    def has_evidence(member: str, f: Finding, w: int) -> bool:
        if unit == "pages":
            return f.token.page_index in evidence_pages.get(member, ())
        positions = evidence_pos.get(member)
        if positions:
            i = bisect.bisect_left(positions, f.position - w)
            if i < len(positions) and positions[i] <= f.position + w:
                return True
        return _window_has_unknown(f.position - w, f.position + w, unknown)

    sensitive = []
    for f in group_findings:
        if f.suppressed:
            continue
        if f.sensitivity in (DIRECT, FEEDBACK):
            sensitive.append(f)
            continue
        if f.entity_type not in quasi_entities:
            continue
        for group in mapping.quasi:
            if f.entity_type not in group.entities:
                continue
            w = group.vicinity if window is None else window
            if all(has_evidence(m, f, w) for m in group.entities - {f.entity_type}):
                sensitive.append(f)
                break
    return sensitive


@dataclass
class ScanResult:
    findings: list[Finding] = field(default_factory=list)
    unmatched: Counter = field(default_factory=Counter)
    tokens_classified: int = 0
    evaluations: int = 0
    early_exit: bool = False
    exit_position: int | None = None
    trigger: Finding | None = None


class Classifier:
    """Per-worker classifier; holds compiled matchers, never shares MRU or vicinity state."""

    def __init__(
        self,
        kb: KnowledgeBase,
        mapping: SensitivityMapping,
        identifiers: list[Identifier] | None = None,
        unit: str = default_vicinity_unit,
        mru: bool = True,
        quasi_skip: bool = True,
    ):
        self.kb = kb
        self.mapping = mapping
        self.identifiers = identifiers if identifiers is not None else minimal_identifier_set(mapping, kb)
        self.unit = unit
        self.mru_enabled = mru
        self.quasi_skip = quasi_skip
        self._matchers = {i.name: build_matcher(i) for i in self.identifiers}
        probe = VicinityState.from_mapping(mapping, unit)
        loaded = {i.name for i in self.identifiers}
        # Deferral only applies to members whose identifiers are actually loaded
        self.deferrable = probe.deferrable & loaded if quasi_skip else frozenset()
        self.non_deferrable = frozenset(loaded - self.deferrable)
        self.max_deferred_window = max(
            (evidence_horizon(g) for g in mapping.quasi if g.entities & self.deferrable), default=0
        )

    def new_mru(self) -> MruState:
        return MruState([(i, self._matchers[i.name]) for i in self.identifiers], self.mru_enabled)

    def new_vicinity(self) -> VicinityState:
        vic = VicinityState.from_mapping(self.mapping, self.unit)
        vic.deferrable = self.deferrable
        return vic

    def _crosses_edge(self, position: int, count: int, is_first: bool, is_last: bool) -> bool:
        if self.unit == "pages":
            return False
        w = self.max_deferred_window
        return (not is_first and position - w < 0) or (not is_last and position + w > count - 1)

    def scan(self, tokens: Iterable[ParsedToken], mode: str, is_first: bool = True, is_last: bool = True) -> ScanResult:
        if mode == "concise":
            return self._scan_concise(list(tokens), is_first, is_last)
        if mode == "boolean":
            return self._scan_boolean(tokens)
        if mode == "skip":
            return ScanResult(early_exit=True)
        raise ValueError(f"unknown processing mode '{mode}'")

    def _scan_boolean(self, tokens: Iterable[ParsedToken]) -> ScanResult:
        result = ScanResult()
        mru = self.new_mru()
        vic = self.new_vicinity()
        for position, token in enumerate(tokens):
            finding = classify_token(token, mru, vic, self.kb, position)
            result.tokens_classified += 1
            if finding is None:
                result.unmatched[token.text] += 1
                continue
            result.findings.append(finding)
            if finding.suppressed:
                continue
            if finding.sensitivity in (DIRECT, FEEDBACK) or (
                finding.sensitivity == QUASI and vic.confirmed(finding)
            ):
                result.early_exit = True
                result.exit_position = position
                result.trigger = finding
                break
            vic.record(finding)
        result.evaluations = mru.evaluations
        return result

    def _scan_concise(self, tokens: list[ParsedToken], is_first: bool, is_last: bool) -> ScanResult:
        result = ScanResult(tokens_classified=len(tokens))
        mru = self.new_mru()
        vic = self.new_vicinity()
        count = len(tokens)
        findings: list[Finding | None] = [None] * count
        pending: list[int] = []
        deferred = set(self.deferrable)
        for position, token in enumerate(tokens):
            defer_here = bool(deferred) and not self._crosses_edge(position, count, is_first, is_last)
            vic.skip = deferred if defer_here else NOTHING_SKIPPED
            finding = classify_token(token, mru, vic, self.kb, position)
            findings[position] = finding
            if finding is None and defer_here:
                pending.append(position)

        if pending:
            self._resolve_deferred(tokens, findings, pending, mru, vic)

        for position, finding in enumerate(findings):
            if finding is None:
                result.unmatched[tokens[position].text] += 1
            else:
                result.findings.append(finding)
        result.evaluations = mru.evaluations
        return result

    def _resolve_deferred(self, tokens, findings, pending, mru: MruState, vic: VicinityState):
        """Second pass over closed windows: evaluate deferred members where anchors were seen."""
        anchors = set(vic.anchors)
        prefix: dict[str, list[int]] = {}
        per_page: dict[str, Counter] = {}
        for anchor in anchors:
            hits = [0]
            pages: Counter = Counter()
            for finding in findings:
                hit = finding is not None and not finding.suppressed and finding.entity_type == anchor
                hits.append(hits[-1] + hit)
                if hit:
                    pages[finding.token.page_index] += 1
            prefix[anchor] = hits
            per_page[anchor] = pages

        count = len(tokens)
        relevant = [g for g, group in enumerate(vic.groups) if group.entities & self.deferrable]
        for position in pending:
            contents: dict[int, Counter] = {}
            for g in relevant:
                anchor = vic.anchors[g]
                if self.unit == "pages":
                    hits = per_page[anchor][tokens[position].page_index]
                else:
                    w = evidence_horizon(vic.groups[g])
                    lo, hi = max(0, position - w), min(count - 1, position + w)
                    hits = prefix[anchor][hi + 1] - prefix[anchor][lo]
                contents[g] = Counter({anchor: hits})
            skipped = quasi_skip_update(vic, contents)
            if len(skipped) == len(self.deferrable):
                continue
            vic.skip = set(self.non_deferrable) | skipped
            findings[position] = classify_token(tokens[position], mru, vic, self.kb, position)


def classify_group(
    group: PageGroup,
    mode: str,
    kb: KnowledgeBase,
    mapping: SensitivityMapping,
    budget_state=None,
    unit: str = default_vicinity_unit,
    mru: bool = True,
    quasi_skip: bool = True,
) -> tuple[list[Finding], bool]:
    """Classify a whole group as one unit.

    In dynamic mode the current mode of `budget_state` decides; concise returns the sensitive
    findings after vicinity resolution, boolean stops at the first confirmed sensitive finding,
    skip classifies nothing.
    """
    if mode == "dynamic":
        mode = budget_state.mode if budget_state is not None else "concise"
    classifier = Classifier(kb, mapping, unit=unit, mru=mru, quasi_skip=quasi_skip)
    result = classifier.scan(group.tokens, mode)
    if mode == "concise":
        return resolve_vicinity(result.findings, mapping, unit=unit), False
    if mode == "boolean":
        return ([result.trigger] if result.trigger else []), result.early_exit
    return [], True
