"""Run configuration: TOML loading, section parsing, and config hashing."""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import IoFailure
from .features import FeatureConfig
from .gbtree import TrainParams
from .labeling import DEFAULT_HORIZONS, LabelConfig


def config_hash(payload) -> str:
    """Stable hash of any JSON-representable configuration payload."""
    canonical = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _build(cls, section: dict, context: str):
    try:
        return cls(**section)
    except (TypeError, ValueError) as exc:
        raise IoFailure(f"bad [{context}] section: {exc}") from exc


def feature_config_from(section: dict) -> FeatureConfig:
    section = dict(section)
    for key in ("lag_offsets", "rolling_windows", "ewma_spans", "cv_windows"):
        if key in section:
            section[key] = tuple(int(v) for v in section[key])
    return _build(FeatureConfig, section, "features")


def label_config_from(section: dict) -> LabelConfig:
    return _build(LabelConfig, dict(section), "labeling")


def train_params_from(section: dict) -> TrainParams:
    try:
        return TrainParams.from_dict(dict(section))
    except (TypeError, ValueError) as exc:
        raise IoFailure(f"bad [train] section: {exc}") from exc


@dataclass
class RunConfig:
    """Everything the end-to-end pipeline needs, loaded from one TOML file."""

    input_path: Path
    model_dir: Path
    report_dir: Path
    holidays_path: Path | None = None
    features: FeatureConfig = field(default_factory=FeatureConfig)
    labeling: LabelConfig = field(default_factory=LabelConfig)
    train: TrainParams = field(default_factory=TrainParams)
    horizons: tuple[int, ...] = DEFAULT_HORIZONS
    tasks: tuple[str, ...] = ("regression",)
    baselines: tuple[str, ...] = ("ha", "snaive", "ses", "croston")
    seed: int = 0
    jobs: int | None = None
    raw: dict = field(default_factory=dict)

    def hash(self) -> str:
        return config_hash(self.raw)

    def validate_paths(self) -> None:
        if not self.input_path.exists():
            raise IoFailure(f"input file not found: {self.input_path}")
        if self.holidays_path is not None and not self.holidays_path.exists():
            raise IoFailure(f"holidays file not found: {self.holidays_path}")


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise IoFailure(f"invalid TOML in {path}: {exc}") from exc

    paths = doc.get("paths", {})
    if "input" not in paths:
        raise IoFailure("config needs [paths] input = \"...\"")
    base = path.parent

    def _resolve(p: str) -> Path:
        p = Path(p)
        return p if p.is_absolute() else base / p

    tasks = doc.get("tasks", ["regression"])
    for task in tasks:
        if task not in ("regression", "classification"):
            raise IoFailure(f"unknown task {task!r}")
    train_section = dict(doc.get("train", {}))
    train_section.pop("task", None)
    train_section.pop("num_classes", None)

    return RunConfig(
        input_path=_resolve(paths["input"]),
        model_dir=_resolve(paths.get("model_dir", "models")),
        report_dir=_resolve(paths.get("report_dir", "reports")),
        holidays_path=_resolve(paths["holidays"]) if "holidays" in paths else None,
        features=feature_config_from(doc.get("features", {})),
        labeling=label_config_from(doc.get("labeling", {})),
        train=train_params_from(train_section),
        horizons=tuple(int(h) for h in doc.get("horizons", DEFAULT_HORIZONS)),
        tasks=tuple(tasks),
        baselines=tuple(doc.get("baselines", ("ha", "snaive", "ses", "croston"))),
        seed=int(doc.get("seed", 0)),
        jobs=int(doc["jobs"]) if "jobs" in doc else None,
        raw=doc,
    )
