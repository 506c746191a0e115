"""
Script to initialise, inspect or reset the knowledge database (feedback store and augment registry)
"""

import argparse
import os
import sys

# Add parent directory to path to import backend modules
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config import knowledge_db_path
from backend.repositories.knowledge_repository import KnowledgeRepository
from backend.utils.utils import get_database_path


def describe(repository: KnowledgeRepository):
    store = repository.load_feedback()
    customs = repository.get_custom_identifiers()
    print(f"Suppressed (token, entity) pairs: {len(store.suppress)}")
    for token, entity in sorted(store.suppress):
        print(f"  - {entity}: {token}")
    print(f"Forced sensitive tokens: {len(store.force_sensitive)}")
    for token in sorted(store.force_sensitive):
        print(f"  - {token}")
    print(f"Custom identifiers: {len(customs)}")
    for row in customs:
        print(f"  - {row['entity_type']}: {row['term_count']} terms at {row['path']}")


def main():
    parser = argparse.ArgumentParser(description="Manage the dumpscrub knowledge database")
    parser.add_argument("--db", default=knowledge_db_path, help="knowledge database path")
    parser.add_argument("--reset", action="store_true", help="drop all feedback and custom identifiers")
    args = parser.parse_args()

    db_path = get_database_path(args.db)
    with KnowledgeRepository(db_path) as repository:
        if args.reset:
            repository.reset()
            print(f"Reset knowledge database at {db_path}")
        else:
            print(f"Knowledge database at {db_path}")
        describe(repository)


if __name__ == "__main__":
    main()
