"""
Utility functions for path handling and atomic file output.
"""

import os
import tempfile


def get_base_path():
    """
    Get the base path of the application.

    Returns the directory containing main.py (project root).
    __file__ is backend/utils/utils.py, so go up 3 levels to reach project root.

    Returns:
        str: Base path of the application
    """
    return os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))


def get_resource_path(relative_path: str) -> str:
    """
    Get the absolute path to a bundled resource file (word lists, sample configs).

    Args:
        relative_path: Path relative to the application base directory

    Returns:
        str: Absolute path to the resource
    """
    return os.path.join(get_base_path(), relative_path)


def get_config_path() -> str:
    """
    Get the path to the .app_config file holding environment overrides.

    Returns:
        str: Path to the .app_config file
    """
    return os.getenv("DUMPSCRUB_APP_CONFIG", ".app_config")


def get_database_path(relative_db_path: str) -> str:
    """
    Get the absolute path to a database file, creating its directory.

    Relative paths are resolved against the current working directory so that
    each workspace keeps its own knowledge base.

    Args:
        relative_db_path: Path to the database file (e.g., "database/knowledge.json")

    Returns:
        str: Absolute path to the database file
    """
    db_path = os.path.abspath(relative_db_path)
    os.makedirs(os.path.dirname(db_path), exist_ok=True)
    return db_path


def write_atomic(path: str, data: bytes) -> None:
    """Write bytes to `path` through a temp file in the same directory and rename.

    A failed write never leaves a partial file at `path`.
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
