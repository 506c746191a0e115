import os

from backend.utils.logger import get_logger

logger = get_logger(__name__)

# Dump geometry (bit-exact with the KDMP page header)
PAGE_SIZE = 4096
HEADER_SIZE = 64
PAYLOAD_CAPACITY = PAGE_SIZE - HEADER_SIZE
DUMP_MAGIC = b"KDMP"
DUMP_VERSION = 1

SUPPORTED_ENCODINGS = ("ascii", "ebcdic037")
INPUT_TYPES = ("dump", "log")
PROCESSING_MODES = ("concise", "boolean", "dynamic")
RUN_MODES = ("analyze", "feedback", "augment", "generate", "bench")

default_vicinity_window = 100
default_vicinity_unit = "tokens"
default_chunk_pages = 1024
default_min_token_len = 2

# Dynamic mode controller
default_budget = {
    "ema_alpha": 0.2,
    "window": 64,
    "recompute_every": 16,
    "hysteresis": 0.8,
    "boolean_ratio_prior": 0.5,
}

default_overwrite_string = "This data has been redacted "
default_knowledge_db = os.path.join("database", "knowledge.json")

# Get values from environment variables or use defaults
PASSPHRASE_ENV = os.getenv("DUMPSCRUB_PASSPHRASE_ENV", "DUMPSCRUB_PASSPHRASE")
KDF_ITERATIONS = int(os.getenv("DUMPSCRUB_KDF_ITERATIONS", "200000"))
knowledge_db_path = os.getenv("DUMPSCRUB_KNOWLEDGE_DB", default_knowledge_db)

DEBUG = os.getenv("DEBUG", "False").lower() in ("true", "1", "t", "yes")

# Exit codes for the CLI
EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_PARSE_ERROR = 2
EXIT_RUNTIME_FAILURE = 3

logger.debug(f"Knowledge database path: {knowledge_db_path}")
