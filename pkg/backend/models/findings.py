"""Classification results and report rows."""

from collections import Counter
from dataclasses import dataclass, field

from .dump import ParsedToken

DIRECT = "direct"
QUASI = "quasi"
FEEDBACK = "feedback"


@dataclass(slots=True)
class Finding:
    """A token matched by an identifier (or forced by feedback).

    `position` is the token ordinal within its PageGroup. `sensitivity` is None when the
    entity is outside the sensitivity mapping or the match was suppressed by feedback.
    """

    token: ParsedToken
    entity_type: str
    sensitivity: str | None
    position: int = 0
    suppressed: bool = False

    @property
    def evidence(self) -> bool:
        return not self.suppressed and self.sensitivity is not None


@dataclass(frozen=True)
class ReportRow:
    token: str
    entity_type: str
    count: int
    is_analysis_correct: str = "Y"


@dataclass
class ChunkResult:
    """Everything a worker reports back for one work unit."""

    unit_id: int
    group_id: int
    mode: str
    findings: list[Finding] = field(default_factory=list)
    unmatched: Counter = field(default_factory=Counter)
    token_count: int = 0
    tokens_classified: int = 0
    evaluations: int = 0
    bytes_classified: int = 0
    early_exit: bool = False
    # Local position of the first token not classified; None when the whole unit was scanned
    unknown_from: int | None = None
    trigger_entity: str | None = None
    elapsed: float = 0.0
