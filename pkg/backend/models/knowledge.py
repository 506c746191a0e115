"""Identifier, sensitivity mapping and feedback structures."""

from dataclasses import dataclass, field

FEEDBACK_ENTITY = "FEEDBACK"
UNIDENTIFIED = "UNIDENTIFIED"
UNCLASSIFIED = "UNCLASSIFIED"
RESERVED_ENTITIES = frozenset({FEEDBACK_ENTITY, UNIDENTIFIED, UNCLASSIFIED})


def normalize_term(term: str) -> str:
    return term.strip().casefold()


@dataclass(frozen=True)
class Identifier:
    """A dictionary or regex recognizer for one entity type.

    Identifiers are plain data so they can be shipped to worker processes; matchers are
    compiled on the worker side by `knowledge_base.build_matcher`.
    """

    name: str
    kind: str
    terms: frozenset[str] = frozenset()
    pattern: str | None = None
    validator: str | None = None
    min_len: int = 1
    max_len: int = 4032
    depends_on: tuple[str, ...] = ()
    source: str = "builtin"

    def length_ok(self, length: int) -> bool:
        return self.min_len <= length <= self.max_len


@dataclass(frozen=True)
class QuasiGroup:
    entities: frozenset[str]
    vicinity: int = 100


@dataclass(frozen=True)
class CustomIdentifierRef:
    entity_type: str
    path: str


@dataclass(frozen=True)
class SensitivityMapping:
    direct: frozenset[str] = frozenset()
    quasi: tuple[QuasiGroup, ...] = ()
    custom_identifiers: tuple[CustomIdentifierRef, ...] = ()

    @property
    def quasi_entities(self) -> frozenset[str]:
        return frozenset().union(*(g.entities for g in self.quasi)) if self.quasi else frozenset()

    @property
    def named_entities(self) -> frozenset[str]:
        return self.direct | self.quasi_entities | {c.entity_type for c in self.custom_identifiers}


@dataclass
class FeedbackStore:
    suppress: set[tuple[str, str]] = field(default_factory=set)
    force_sensitive: set[str] = field(default_factory=set)

    def is_suppressed(self, text: str, entity_type: str) -> bool:
        return (text, entity_type) in self.suppress
