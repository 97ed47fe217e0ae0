"""Training hyperparameters for the boosted-tree forecaster."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace


@dataclass(frozen=True)
class TrainParams:
    task: str = "regression"  # or "classification"
    num_classes: int = 1
    num_rounds: int = 300
    learning_rate: float = 0.1
    max_depth: int = 6
    min_child_weight: float = 1.0
    reg_lambda: float = 1.0
    min_split_gain: float = 0.0
    subsample: float = 0.8
    colsample: float = 0.8
    num_bins: int = 64
    seed: int = 0
    early_stopping_rounds: int | None = None

    def __post_init__(self) -> None:
        if self.task not in ("regression", "classification"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.task == "classification" and self.num_classes < 2:
            raise ValueError("classification needs num_classes >= 2")
        if self.task == "regression" and self.num_classes != 1:
            raise ValueError("regression uses num_classes = 1")
        if not (0.0 < self.learning_rate <= 1.0):
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.num_rounds < 0:
            raise ValueError("num_rounds must be >= 0")
        if self.reg_lambda < 0 or self.min_split_gain < 0 or self.min_child_weight < 0:
            raise ValueError("regularization parameters must be >= 0")
        for name in ("subsample", "colsample"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0):
                raise ValueError(f"{name} must lie in (0, 1]")
        if not (2 <= self.num_bins <= 256):
            raise ValueError("num_bins must lie in [2, 256]")
        if self.early_stopping_rounds is not None and self.early_stopping_rounds < 1:
            raise ValueError("early_stopping_rounds must be >= 1 when set")

    def updated(self, **kwargs) -> "TrainParams":
        return replace(self, **kwargs)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainParams":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown training parameter(s): {', '.join(sorted(unknown))}")
        return cls(**raw)
