"""Persistence for feedback state and augment-mode dictionaries."""

from datetime import datetime
from typing import Any

from config import knowledge_db_path
from backend.models.knowledge import FeedbackStore

from .base_repository import BaseRepository

SUPPRESS_TABLE = "feedback_suppress"
FORCE_TABLE = "feedback_force"
CUSTOM_TABLE = "custom_identifiers"


class KnowledgeRepository(BaseRepository):
    """Repository for the knowledge base state that survives between runs."""

    def __init__(self, db_path: str = knowledge_db_path):
        """Initialize the knowledge repository.

        Args:
            db_path: Path to the knowledge database file
        """
        super().__init__(db_path, table_name=CUSTOM_TABLE)

    def load_feedback(self) -> FeedbackStore:
        return FeedbackStore(
            suppress={(row["token"], row["entity_type"]) for row in self.get_all(SUPPRESS_TABLE)},
            force_sensitive={row["token"] for row in self.get_all(FORCE_TABLE)},
        )

    def save_feedback(self, store: FeedbackStore):
        """Replace the persisted feedback with `store`."""
        self.truncate(SUPPRESS_TABLE)
        self.truncate(FORCE_TABLE)
        now = datetime.now().isoformat()
        self.insert_many(
            [{"token": t, "entity_type": e, "updated_at": now} for t, e in sorted(store.suppress)], SUPPRESS_TABLE
        )
        self.insert_many([{"token": t, "updated_at": now} for t in sorted(store.force_sensitive)], FORCE_TABLE)

    def register_custom_identifier(self, entity_type: str, path: str, term_count: int) -> list[int]:
        return self.upsert(
            {
                "entity_type": entity_type,
                "path": path,
                "term_count": term_count,
                "created_at": datetime.now().isoformat(),
            },
            field="entity_type",
        )

    def get_custom_identifier(self, entity_type: str) -> dict[str, Any] | None:
        return self.get_by_field("entity_type", entity_type)

    def get_custom_identifiers(self) -> list[dict[str, Any]]:
        return sorted(self.get_all(), key=lambda row: row["entity_type"])

    def reset(self):
        """Drop all feedback and every registered custom identifier."""
        for table_name in (SUPPRESS_TABLE, FORCE_TABLE, CUSTOM_TABLE):
            self.truncate(table_name)
