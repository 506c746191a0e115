"""Base repository for TinyDB operations."""

import os
from typing import Any

from tinydb import Query, TinyDB
from tinydb.table import Table


class BaseRepository:
    """Base class for data repositories using TinyDB."""

    def __init__(self, db_path: str, table_name: str = "_default"):
        """Initialize the repository with TinyDB connection.

        Args:
            db_path: Path to the TinyDB JSON file
            table_name: Name of the primary table
        """
        # Ensure database directory exists
        os.makedirs(os.path.dirname(os.path.abspath(db_path)), exist_ok=True)

        self.db = TinyDB(db_path)
        self.table = self.db.table(table_name)
        self.db_path = db_path

    def table_for(self, table_name: str | None) -> Table:
        return self.table if table_name is None else self.db.table(table_name)

    def get_all(self, table_name: str | None = None) -> list[dict[str, Any]]:
        """Get all records from a table as plain dicts."""
        return [dict(doc) for doc in self.table_for(table_name).all()]

    def get_by_field(self, field: str, value: Any, table_name: str | None = None) -> dict[str, Any] | None:
        """Get a single record by field value.

        Args:
            field: Field name to query
            value: Value to match
            table_name: Table to search (default: primary table)

        Returns:
            First matching record or None
        """
        Q = Query()
        doc = self.table_for(table_name).get(Q[field] == value)
        return dict(doc) if doc is not None else None

    def insert_many(self, rows: list[dict[str, Any]], table_name: str | None = None) -> list[int]:
        return self.table_for(table_name).insert_multiple(rows)

    def upsert(self, data: dict[str, Any], field: str, table_name: str | None = None) -> list[int]:
        """Insert `data`, replacing any record with the same `field` value."""
        Q = Query()
        return self.table_for(table_name).upsert(data, Q[field] == data[field])

    def truncate(self, table_name: str | None = None):
        """Clear all records from a table."""
        self.table_for(table_name).truncate()

    def close(self):
        """Close the database connection."""
        self.db.close()

    def __enter__(self):
        """Context manager entry."""
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        """Context manager exit."""
        self.close()
