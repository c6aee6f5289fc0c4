"""Budget/noise accuracy-sweep ingestion and degradation scores.

Accuracies are stored in percent points, so the scores carry percent-based
units (noise scores land around 1e2 for the bundled CIFAR-10 tables).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import DataError

SWEEP_KINDS = ("budget", "noise")

# Reference condition per sweep kind: full budget, zero noise.
_REFERENCE = {"budget": 1.0, "noise": 0.0}

BUNDLED_TABLES = {
    "budget": "accuracy_budget_cifar10.csv",
    "noise": "accuracy_noise_cifar10.csv",
}


@dataclass(frozen=True)
class AccuracyTable:
    """Rows of (model, condition, accuracy%) for one sweep kind."""

    sweep_kind: str
    rows: tuple[tuple[str, float, float], ...]

    def __post_init__(self):
        if self.sweep_kind not in SWEEP_KINDS:
            raise DataError(f"sweep_kind must be one of {SWEEP_KINDS}, got {self.sweep_kind!r}")
        seen: set[tuple[str, float]] = set()
        by_model: dict[str, set[float]] = {}
        for model, condition, accuracy in self.rows:
            if self.sweep_kind == "budget" and not (0.0 < condition <= 1.0):
                raise DataError(
                    f"budget condition must lie in (0, 1], got {condition} for model {model!r}"
                )
            if self.sweep_kind == "noise" and condition < 0.0:
                raise DataError(
                    f"noise condition must be >= 0, got {condition} for model {model!r}"
                )
            if not (0.0 <= accuracy <= 100.0):
                raise DataError(
                    f"accuracy must lie in [0, 100], got {accuracy} for model {model!r} "
                    f"at condition {condition}"
                )
            key = (model, condition)
            if key in seen:
                raise DataError(f"duplicate row for model {model!r} at condition {condition}")
            seen.add(key)
            by_model.setdefault(model, set()).add(condition)
        ref = _REFERENCE[self.sweep_kind]
        for model, conditions in sorted(by_model.items()):
            if ref not in conditions:
                raise DataError(
                    f"missing reference condition {ref} for model {model!r} "
                    f"({self.sweep_kind} sweep)"
                )
        object.__setattr__(self, "rows", tuple(self.rows))

    def models(self) -> list[str]:
        return sorted({model for model, _, _ in self.rows})

    def accuracy(self, model: str, condition: float) -> float:
        for m, c, a in self.rows:
            if m == model and c == condition:
                return a
        raise DataError(f"no row for model {model!r} at condition {condition}")

    def conditions(self, model: str) -> list[float]:
        found = sorted(c for m, c, _ in self.rows if m == model)
        if not found:
            raise DataError(f"unknown model {model!r}")
        return found


def load_accuracy_table(path: str | Path, sweep_kind: str) -> AccuracyTable:
    """Parse a CSV with header ``model,condition,accuracy`` into a validated table."""
    path = Path(path)
    rows: list[tuple[str, float, float]] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"model", "condition", "accuracy"}
        if reader.fieldnames is None or not expected.issubset(reader.fieldnames):
            raise DataError(
                f"{path}: expected CSV header with columns {sorted(expected)}, "
                f"got {reader.fieldnames}"
            )
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append((row["model"], float(row["condition"]), float(row["accuracy"])))
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}: bad row at line {lineno}: {exc}") from exc
    return AccuracyTable(sweep_kind, tuple(rows))


def bundled_table(sweep_kind: str) -> AccuracyTable:
    """The CIFAR-10 sweep tables shipped with the package."""
    if sweep_kind not in BUNDLED_TABLES:
        raise DataError(f"no bundled table for sweep kind {sweep_kind!r}")
    ref = resources.files("tectalab").joinpath("data", BUNDLED_TABLES[sweep_kind])
    with resources.as_file(ref) as path:
        return load_accuracy_table(path, sweep_kind)


def budget_degradation_score(table: AccuracyTable, model: str) -> float:
    """Mean accuracy drop per unit of removed inference budget:
    S = (1/n) * sum_{b < 1} (Acc(1.0) - Acc(b)) / (1.0 - b)."""
    if table.sweep_kind != "budget":
        raise DataError(f"budget score needs a budget sweep, got {table.sweep_kind!r}")
    reference = table.accuracy(model, 1.0)
    reduced = [c for c in table.conditions(model) if c < 1.0]
    if not reduced:
        raise DataError(f"model {model!r} has no reduced-budget rows")
    terms = [(reference - table.accuracy(model, b)) / (1.0 - b) for b in reduced]
    return sum(terms) / len(terms)


def noise_degradation_score(table: AccuracyTable, model: str) -> float:
    """Mean accuracy drop per unit of noise standard deviation:
    S = (1/m) * sum_{sigma > 0} (Acc(0.0) - Acc(sigma)) / sigma."""
    if table.sweep_kind != "noise":
        raise DataError(f"noise score needs a noise sweep, got {table.sweep_kind!r}")
    reference = table.accuracy(model, 0.0)
    noisy = [c for c in table.conditions(model) if c > 0.0]
    if not noisy:
        raise DataError(f"model {model!r} has no non-zero-noise rows")
    terms = [(reference - table.accuracy(model, s)) / s for s in noisy]
    return sum(terms) / len(terms)


def degradation_scores(table: AccuracyTable) -> dict[str, float]:
    """Score every model in the table with the kind-appropriate formula."""
    score = budget_degradation_score if table.sweep_kind == "budget" else noise_degradation_score
    return {model: score(table, model) for model in table.models()}
