"""Base API with thread-safe run status tracking."""

import threading
from collections.abc import Callable
from typing import Any

from backend.utils.errors import RunCancelled
from backend.utils.logger import get_logger

logger = get_logger(__name__)

IDLE_STATUS = {
    "status": "idle",  # idle, running, completed, error, cancelled
    "current_phase": 0,
    "total_phases": 0,
    "phase_name": "",
    "message": "",
    "progress_percent": 0,
    "error_message": None,
    "result": None,
}


class BaseApi:
    """Base class for API facades that run one background job at a time."""

    def __init__(self, total_phases: int = 1):
        self.total_phases = total_phases
        self._status_lock = threading.Lock()
        self._analysis_status: dict[str, Any] = {**IDLE_STATUS, "total_phases": total_phases}
        self._processing_thread: threading.Thread | None = None
        self._cancellation_flag = threading.Event()

    def _update_status(self, phase: int, phase_name: str, message: str):
        """Update processing status (thread-safe).

        Args:
            phase: Current phase number (1-based)
            phase_name: Name of the current phase
            message: Detailed message about current step
        """
        with self._status_lock:
            self._analysis_status["current_phase"] = phase
            self._analysis_status["phase_name"] = phase_name
            self._analysis_status["message"] = message
            self._analysis_status["progress_percent"] = int(min(phase, self.total_phases) / self.total_phases * 100)

    def progress_callback(self, phase: int, phase_name: str, message: str):
        """Progress hook handed to services; stops the job once cancellation was requested."""
        if self._cancellation_flag.is_set():
            raise RunCancelled("Processing cancelled by user")
        self._update_status(phase, phase_name, message)

    def _start_job(self, name: str, job: Callable[[], dict[str, Any]]) -> dict[str, Any]:
        """Run `job` on a daemon thread, tracking its status."""
        with self._status_lock:
            if self._analysis_status["status"] == "running":
                return {
                    "status": "error",
                    "message": "Another run is already in progress. Please wait or cancel it first.",
                }
            self._analysis_status = {
                **IDLE_STATUS,
                "status": "running",
                "total_phases": self.total_phases,
                "phase_name": "Initializing...",
                "message": f"Starting {name}...",
            }
            self._cancellation_flag.clear()

        def _run():
            try:
                result = job()
                with self._status_lock:
                    if self._cancellation_flag.is_set():
                        self._analysis_status["status"] = "cancelled"
                        self._analysis_status["message"] = "Processing was cancelled"
                        return
                    self._analysis_status["status"] = "completed"
                    self._analysis_status["current_phase"] = self.total_phases
                    self._analysis_status["progress_percent"] = 100
                    self._analysis_status["message"] = f"{name.capitalize()} completed successfully"
                    self._analysis_status["result"] = result
            except RunCancelled:
                with self._status_lock:
                    self._analysis_status["status"] = "cancelled"
                    self._analysis_status["message"] = "Processing was cancelled"
                logger.info(f"{name.capitalize()} was cancelled")
            except Exception as e:
                logger.error(f"Error in {name}: {e}", exc_info=True)
                with self._status_lock:
                    self._analysis_status["status"] = "error"
                    self._analysis_status["error_message"] = str(e)
                    self._analysis_status["message"] = f"Error: {str(e)}"

        self._processing_thread = threading.Thread(target=_run, daemon=True)
        self._processing_thread.start()
        return {"status": "started", "message": "Processing started"}

    def get_status(self) -> dict[str, Any]:
        with self._status_lock:
            return self._analysis_status.copy()

    def cancel(self) -> dict[str, Any]:
        """Request cancellation of the running job."""
        try:
            with self._status_lock:
                if self._analysis_status["status"] != "running":
                    return {"status": "error", "message": "No run is currently in progress"}
                self._cancellation_flag.set()
                self._analysis_status["message"] = "Cancellation requested..."
            return {
                "status": "cancelled",
                "message": "Cancellation requested. Processing will stop after the current chunk.",
            }
        except Exception as e:
            logger.error(f"Error cancelling run: {e}", exc_info=True)
            return {"status": "error", "message": f"Failed to cancel: {str(e)}"}

    def wait(self, timeout: float | None = None) -> dict[str, Any]:
        """Block until the background job finishes (or `timeout` elapses); returns the status."""
        thread = self._processing_thread
        if thread is not None:
            thread.join(timeout)
        return self.get_status()

    def close(self):
        """Clean up resources. Override in subclasses."""
        pass
