"""Finite samples of observed node values."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import pandas as pd

from .exceptions import InputError

GROUP_COLUMN = "group"


@dataclass(frozen=True)
class Dataset:
    """Observed values, one column per node and one row per unit.

    ``counterfactuals`` holds potential-outcome columns drawn alongside the
    sample. They are never observable and exist for oracle checks only.
    """

    frame: pd.DataFrame
    supports: Mapping[str, tuple] = field(default_factory=dict)
    counterfactuals: pd.DataFrame | None = None

    def __post_init__(self):
        if len(self.frame) < 1:
            raise InputError("a dataset needs at least one unit")
        if GROUP_COLUMN in self.frame and self.frame[GROUP_COLUMN].isna().any():
            raise InputError("group identifiers must be given for every unit")
        for col, support in self.supports.items():
            if col in self.frame:
                bad = ~self.frame[col].isin(support)
                if bad.any():
                    raise InputError(f"column {col!r} has values outside its support {support}")

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def columns(self) -> list[str]:
        return [c for c in self.frame.columns if c != GROUP_COLUMN]

    @property
    def groups(self) -> np.ndarray | None:
        if GROUP_COLUMN in self.frame:
            return self.frame[GROUP_COLUMN].to_numpy()
        return None

    def support(self, col: str) -> tuple:
        if col in self.supports:
            return tuple(self.supports[col])
        return tuple(sorted(pd.unique(self.frame[col])))

    def replace(self, **columns) -> "Dataset":
        frame = self.frame.copy()
        for name, values in columns.items():
            frame[name] = values
        return Dataset(frame, dict(self.supports), self.counterfactuals)

    def to_csv(self, path: str | Path) -> None:
        self.frame.to_csv(path, index=False)

    @classmethod
    def read_csv(cls, path: str | Path, supports: Mapping[str, Iterable] | None = None) -> "Dataset":
        frame = pd.read_csv(path)
        return cls(frame, {k: tuple(v) for k, v in (supports or {}).items()})


def as_dataset(data) -> Dataset:
    if isinstance(data, Dataset):
        return data
    if isinstance(data, pd.DataFrame):
        return Dataset(data.reset_index(drop=True))
    raise InputError(f"expected a Dataset or DataFrame, got {type(data).__name__}")
