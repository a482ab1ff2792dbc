"""The 120-case parametric sweep over row-band actuation commands.

Cases are every contiguous band of streamwise rows (15 bands over 5 rows),
each lifted uniformly across the span at one of the four non-zero height
levels, in either passive-only or passive-plus-blowing mode:
15 x 4 x 2 = 120 commands.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .optimizer import EvaluationError
from .patterns import (
    N_ROWS,
    ActuationPattern,
    active_fraction,
    mean_height_ratio,
)

PASSIVE_ONLY = "passive_only"
PASSIVE_PLUS_ACTIVE = "passive_plus_active"


@dataclass(frozen=True)
class ParametricCase:
    """A contiguous row band at one uniform height level, jets on or off."""

    rows: tuple[int, ...]  # 0-based streamwise rows, contiguous
    level: int
    mode: str

    def __post_init__(self) -> None:
        rows = tuple(sorted(self.rows))
        object.__setattr__(self, "rows", rows)
        if not rows:
            raise ValueError("row band must be non-empty")
        if rows[0] < 0 or rows[-1] >= N_ROWS:
            raise ValueError(f"rows must lie in 0..{N_ROWS - 1}")
        if list(rows) != list(range(rows[0], rows[-1] + 1)):
            raise ValueError(f"row band {rows} is not contiguous")
        if self.level not in (1, 2, 3, 4):
            raise ValueError("level must be 1..4 (level 0 is the baseline)")
        if self.mode not in (PASSIVE_ONLY, PASSIVE_PLUS_ACTIVE):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def case_id(self) -> str:
        rows_1based = f"{self.rows[0] + 1}-{self.rows[-1] + 1}" if len(self.rows) > 1 else str(self.rows[0] + 1)
        suffix = "a" if self.mode == PASSIVE_PLUS_ACTIVE else "p"
        return f"r{rows_1based}_l{self.level}{suffix}"

    def to_pattern(self) -> ActuationPattern:
        return ActuationPattern.from_rows(self.rows, self.level,
                                          active=self.mode == PASSIVE_PLUS_ACTIVE)


def generate_cases() -> list[ParametricCase]:
    """All 120 cases in deterministic order (band start, band end, level, mode)."""
    cases = []
    for start in range(N_ROWS):
        for end in range(start, N_ROWS):
            rows = tuple(range(start, end + 1))
            for level in (1, 2, 3, 4):
                for mode in (PASSIVE_ONLY, PASSIVE_PLUS_ACTIVE):
                    cases.append(ParametricCase(rows=rows, level=level, mode=mode))
    return cases


@dataclass
class StudyResult:
    """Evaluated sweep: per-case cost triples plus the per-mode best cases."""

    cases: list[ParametricCase]
    patterns: list[ActuationPattern]
    ja_star: np.ndarray
    jb_star: np.ndarray
    jc_star: np.ndarray
    baseline_ja: float
    best_passive_index: int
    best_active_index: int

    @property
    def best_passive(self) -> ParametricCase:
        return self.cases[self.best_passive_index]

    @property
    def best_active(self) -> ParametricCase:
        return self.cases[self.best_active_index]

    def positive_fraction(self) -> float:
        return float(np.mean(self.ja_star > 0.0))


def run_study(plant, seed: int = 0) -> StudyResult:
    """Evaluate the baseline and all 120 cases on the given plant.

    Use a noiseless plant when exact per-case ranking matters; each case is
    measured once, like any other command.
    """
    cases = generate_cases()
    patterns = [c.to_pattern() for c in cases]
    ja_star = np.empty(len(cases))
    for i, (case, pattern) in enumerate(zip(cases, patterns)):
        try:
            ja_star[i] = plant.fitness(None, pattern, seed + i)
        except Exception as exc:
            raise EvaluationError(f"case {case.case_id}: {exc}") from exc
    jb_star = np.array([mean_height_ratio(p) for p in patterns])
    jc_star = np.array([active_fraction(p) for p in patterns])
    passive = np.array([c.mode == PASSIVE_ONLY for c in cases])
    masked = np.where(passive, ja_star, np.inf)
    best_passive = int(np.argmin(masked))
    masked = np.where(~passive, ja_star, np.inf)
    best_active = int(np.argmin(masked))
    baseline = plant.baseline_ja() if hasattr(plant, "baseline_ja") else float("nan")
    return StudyResult(
        cases=cases,
        patterns=patterns,
        ja_star=ja_star,
        jb_star=jb_star,
        jc_star=jc_star,
        baseline_ja=baseline,
        best_passive_index=best_passive,
        best_active_index=best_active,
    )
