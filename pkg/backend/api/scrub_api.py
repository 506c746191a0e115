"""Scrub API: entry points for every run mode, with background analyze and cancellation."""

from typing import Any

from backend.services.engine import ANALYZE_PHASES, EngineConfig, load_engine_config
from backend.utils.errors import ScrubError
from backend.utils.logger import get_logger

from .base_api import BaseApi

logger = get_logger(__name__)


class ScrubApi(BaseApi):
    """API class wrapping the engine for scripts and embedding applications."""

    def __init__(self):
        super().__init__(total_phases=len(ANALYZE_PHASES))
        logger.info("Scrub API initialized")

    def _load(self, config: str | dict | EngineConfig, mode: str, overrides: dict | None) -> EngineConfig:
        if isinstance(config, EngineConfig):
            loaded = config.with_overrides(**(overrides or {}))
        elif isinstance(config, dict):
            loaded = EngineConfig.from_dict(config).with_overrides(**(overrides or {}))
        else:
            loaded = load_engine_config(config, overrides)
        loaded.mode = mode
        return loaded.validate()

    def run_analysis(
        self, config: str | dict | EngineConfig, overrides: dict | None = None, key: bytes | None = None
    ) -> dict[str, Any]:
        """Start an analyze run in the background.

        Args:
            config: Path to a config JSON file, its parsed dict, or an EngineConfig
            overrides: threads / processing_mode / time_budget / seed overrides
            key: Key material; derived from the configured key file when omitted

        Returns:
            Dictionary with status information
        """
        try:
            engine_config = self._load(config, "analyze", overrides)
        except Exception as e:
            logger.error(f"Error starting analysis: {e}", exc_info=True)
            return {"status": "error", "message": f"Failed to start analysis: {str(e)}"}

        from backend.services.engine import analyze

        return self._start_job(
            "analysis",
            lambda: analyze(engine_config, key, self.progress_callback, self._cancellation_flag),
        )

    def get_analysis_status(self) -> dict[str, Any]:
        return self.get_status()

    def cancel_analysis(self) -> dict[str, Any]:
        return self.cancel()

    def _run_sync(self, name: str, config, mode: str, overrides: dict | None = None, **kwargs) -> dict[str, Any]:
        try:
            from backend.services import engine

            engine_config = self._load(config, mode, overrides)
            result = engine.run(engine_config, **kwargs)
            logger.info(f"{name} finished: {result.get('status', 'completed')}")
            return result
        except ScrubError as e:
            logger.error(f"Error in {name}: {e}", exc_info=True)
            return {"status": "error", "message": str(e), "exit_code": e.exit_code}
        except Exception as e:
            logger.error(f"Error in {name}: {e}", exc_info=True)
            return {"status": "error", "message": str(e)}

    def run_feedback(self, config, key: bytes | None = None) -> dict[str, Any]:
        """Ingest marked reports into the feedback store."""
        return self._run_sync("feedback", config, "feedback", key=key)

    def run_augment(self, config) -> dict[str, Any]:
        """Store a new dictionary identifier from a term list."""
        return self._run_sync("augment", config, "augment")

    def run_generate(self, config, seed: int | None = None) -> dict[str, Any]:
        """Generate a synthetic dump and its manifest."""
        return self._run_sync("generate", config, "generate", {"seed": seed})

    def run_bench(self, config, seed: int | None = None) -> dict[str, Any]:
        return self._run_sync(
            "bench",
            config,
            "bench",
            {"seed": seed},
            progress_callback=self.progress_callback,
            cancel_event=self._cancellation_flag,
        )
