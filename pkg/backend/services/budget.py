"""Dynamic-mode controller: projects remaining work from recent chunk timings and picks the
cheapest processing mode that still fits the time budget."""

import time
from collections import deque
from collections.abc import Callable
from dataclasses import dataclass, field

from config import default_budget
from backend.utils.logger import get_logger

logger = get_logger(__name__)

MODE_LADDER = ("concise", "boolean", "skip")


@dataclass(frozen=True)
class BudgetSample:
    mode: str
    seconds: float


@dataclass
class BudgetState:
    budget_seconds: float
    groups_remaining: int
    workers: int = 1
    mode: str = "concise"
    ema_alpha: float = default_budget["ema_alpha"]
    window: int = default_budget["window"]
    recompute_every: int = default_budget["recompute_every"]
    hysteresis: float = default_budget["hysteresis"]
    boolean_ratio_prior: float = default_budget["boolean_ratio_prior"]
    clock: Callable[[], float] = time.perf_counter
    started_at: float = 0.0
    deadline: float = 0.0
    completed: int = 0
    ema: dict[str, float | None] = field(default_factory=lambda: {"concise": None, "boolean": None})
    samples: deque = field(default_factory=deque)
    transitions: list[dict] = field(default_factory=list)

    def __post_init__(self):
        self.samples = deque(self.samples, maxlen=self.window)
        if not self.started_at:
            self.started_at = self.clock()
        if not self.deadline:
            self.deadline = self.started_at + self.budget_seconds

    @classmethod
    def from_config(cls, budget_seconds: float, groups: int, workers: int, overrides: dict | None = None, **kwargs):
        settings = {**default_budget, **(overrides or {})}
        return cls(budget_seconds=budget_seconds, groups_remaining=groups, workers=workers, **settings, **kwargs)

    def boolean_ratio(self) -> float:
        """Boolean:concise cost ratio over the sample window, or the prior."""
        concise = [s.seconds for s in self.samples if s.mode == "concise"]
        boolean = [s.seconds for s in self.samples if s.mode == "boolean"]
        if concise and boolean and sum(concise) > 0:
            return (sum(boolean) / len(boolean)) / (sum(concise) / len(concise))
        return self.boolean_ratio_prior

    def cost(self, mode: str) -> float | None:
        """Estimated seconds per group in `mode`; skip costs no classification."""
        if mode == "skip":
            return 0.0
        concise, boolean = self.ema["concise"], self.ema["boolean"]
        if mode == "concise":
            if concise is not None:
                return concise
            return boolean / self.boolean_ratio() if boolean is not None and self.boolean_ratio() > 0 else None
        if boolean is not None and concise is None:
            return boolean
        return concise * self.boolean_ratio() if concise is not None else None

    def projected(self, mode: str) -> float | None:
        cost = self.cost(mode)
        if cost is None:
            return None
        return cost * self.groups_remaining / max(1, self.workers)

    def _step(self, target: str, reason: str):
        """Move one rung at a time towards `target`, recording every step."""
        while self.mode != target:
            current = MODE_LADDER.index(self.mode)
            step = MODE_LADDER[current + (1 if MODE_LADDER.index(target) > current else -1)]
            self.transitions.append(
                {"from": self.mode, "to": step, "after_groups": self.completed, "reason": reason}
            )
            logger.info(f"Budget controller: {self.mode} -> {step} after {self.completed} group(s) ({reason})")
            self.mode = step

    def record(self, sample: BudgetSample):
        self.completed += 1
        self.groups_remaining = max(0, self.groups_remaining - 1)
        self.samples.append(sample)
        if sample.mode in self.ema:
            previous = self.ema[sample.mode]
            if previous is None:
                self.ema[sample.mode] = sample.seconds
            else:
                self.ema[sample.mode] = self.ema_alpha * sample.seconds + (1 - self.ema_alpha) * previous

    def decide(self, now: float) -> str:
        remaining = self.deadline - now
        if remaining <= 0:
            self._step("skip", "deadline passed")
            return self.mode
        concise, boolean = self.projected("concise"), self.projected("boolean")
        if self.mode == "concise":
            if concise is not None and concise > remaining:
                if boolean is not None and boolean > remaining:
                    self._step("skip", f"boolean projection {boolean:.2f}s > {remaining:.2f}s left")
                else:
                    self._step("boolean", f"concise projection {concise:.2f}s > {remaining:.2f}s left")
        elif self.mode == "boolean":
            if boolean is not None and boolean > remaining:
                self._step("skip", f"boolean projection {boolean:.2f}s > {remaining:.2f}s left")
            elif concise is not None and concise < self.hysteresis * remaining:
                self._step("concise", f"concise projection {concise:.2f}s fits")
        elif boolean is not None and boolean < self.hysteresis * remaining:
            self._step("boolean", f"boolean projection {boolean:.2f}s fits")
        return self.mode


def update_budget(state: BudgetState, sample: BudgetSample, now: float | None = None) -> tuple[BudgetState, str]:
    """Fold one completed group into the estimate; re-decide every `recompute_every` groups
    and whenever the deadline has passed."""
    state.record(sample)
    now = state.clock() if now is None else now
    if now >= state.deadline or state.completed % state.recompute_every == 0:
        state.decide(now)
    return state, state.mode
