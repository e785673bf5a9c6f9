"""CSV ingestion and robust column standardization.

Non-binary columns are centered and scaled by median/MAD by default
(mean/SD is available for replicating classical preprocessing); binary
0/1 columns pass through untouched. Additive covariates are additionally
mapped onto [0,1] by their empirical range. All the affine pieces live in
a StandardizationMap so prediction applies exactly the transforms the fit
saw, never re-estimated ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .preliminary import PlamData
from .splines import DomainMap


@dataclass(frozen=True)
class ColumnTransform:
    column: str
    role: str            # response | linear | additive
    method: str          # median_mad | mean_sd | binary | none
    location: float = 0.0
    dispersion: float = 1.0
    unit_map: DomainMap | None = None  # additive columns only

    def standardize(self, x):
        x = np.asarray(x, dtype=float)
        return (x - self.location) / self.dispersion

    def to_model(self, x, clamp: bool = False):
        z = self.standardize(x)
        if self.unit_map is not None:
            z = self.unit_map.to_unit(z, clamp=clamp)
        return z

    def invert(self, z):
        z = np.asarray(z, dtype=float)
        if self.unit_map is not None:
            z = self.unit_map.from_unit(z)
        return z * self.dispersion + self.location


@dataclass
class StandardizationMap:
    transforms: dict = field(default_factory=dict)

    def __getitem__(self, column: str) -> ColumnTransform:
        return self.transforms[column]

    def add(self, tr: ColumnTransform):
        self.transforms[tr.column] = tr

    def columns(self, role: str) -> list[str]:
        return [c for c, tr in self.transforms.items() if tr.role == role]


@dataclass
class RunConfig:
    """Column roles and preprocessing choices for one data set."""

    response: str
    linear: list[str]
    additive: list[str]
    binary: list[str] = field(default_factory=list)
    standardize_method: str = "median_mad"  # or "mean_sd"

    def __post_init__(self):
        roles = [self.response] + list(self.linear) + list(self.additive)
        dupes = {c for c in roles if roles.count(c) > 1}
        if dupes:
            raise ValueError(f"columns assigned to multiple roles: {sorted(dupes)}")
        bad = set(self.binary) & set(self.additive)
        if bad:
            raise ValueError(f"additive covariates cannot be binary: {sorted(bad)}")
        if self.standardize_method not in ("median_mad", "mean_sd"):
            raise ValueError("standardize_method must be 'median_mad' or 'mean_sd'")


def _is_binary(values: np.ndarray) -> bool:
    return bool(np.isin(np.unique(values), (0.0, 1.0)).all())


def _location_dispersion(values: np.ndarray, method: str, column: str):
    if method == "median_mad":
        loc = float(np.median(values))
        disp = float(np.median(np.abs(values - loc)) / 0.6745)
        if disp == 0.0:
            raise ValueError(
                f"column {column!r} has zero MAD; it cannot be standardized "
                "(declare it binary or drop it)"
            )
    else:
        loc = float(np.mean(values))
        disp = float(np.std(values, ddof=1))
        if disp == 0.0:
            raise ValueError(f"column {column!r} is constant; cannot standardize")
    return loc, disp


@dataclass
class LoadReport:
    n_rows: int
    n_dropped: int


def build_map(frame: pd.DataFrame, config: RunConfig) -> StandardizationMap:
    """Fit per-column transforms on a complete-case frame."""
    smap = StandardizationMap()
    for col in [config.response] + list(config.linear) + list(config.additive):
        role = ("response" if col == config.response
                else "linear" if col in config.linear else "additive")
        values = frame[col].to_numpy(dtype=float)
        declared_binary = col in config.binary
        if role == "response":
            # kept in original units so reported errors are interpretable
            smap.add(ColumnTransform(col, role, "none"))
            continue
        if role == "linear" and (declared_binary or _is_binary(values)):
            smap.add(ColumnTransform(col, role, "binary"))
            continue
        loc, disp = _location_dispersion(values, config.standardize_method, col)
        unit_map = None
        if role == "additive":
            std = (values - loc) / disp
            unit_map = DomainMap.from_data(std)
        smap.add(ColumnTransform(col, role, config.standardize_method,
                                 loc, disp, unit_map))
    return smap


def apply_map(frame: pd.DataFrame, config: RunConfig, smap: StandardizationMap,
              clamp: bool = False, require_response: bool = True) -> PlamData:
    """Transform a complete-case frame into model coordinates."""
    if require_response:
        Y = frame[config.response].to_numpy(dtype=float)
    else:
        Y = np.zeros(len(frame))
    Z = np.column_stack([
        smap[c].to_model(frame[c].to_numpy(dtype=float)) for c in config.linear
    ]) if config.linear else np.empty((len(frame), 0))
    X = np.column_stack([
        smap[c].to_model(frame[c].to_numpy(dtype=float), clamp=clamp)
        for c in config.additive
    ]) if config.additive else np.empty((len(frame), 0))
    return PlamData(Y, Z, X)


def read_frame(path, config: RunConfig, delimiter: str = ","):
    """Read the CSV, coerce model columns to numeric, drop incomplete rows."""
    frame = pd.read_csv(path, sep=delimiter)
    needed = [config.response] + list(config.linear) + list(config.additive)
    missing = [c for c in needed if c not in frame.columns]
    if missing:
        raise ValueError(f"columns not found in {path}: {missing}")
    sub = frame[needed].apply(pd.to_numeric, errors="coerce")
    complete = sub.dropna()
    report = LoadReport(n_rows=len(complete), n_dropped=len(sub) - len(complete))
    if len(complete) == 0:
        raise ValueError("no complete rows after dropping missing values")
    return complete.reset_index(drop=True), report


def load_csv(path, config: RunConfig, delimiter: str = ","):
    """Full ingestion: read, drop incomplete rows, standardize, map to [0,1].

    Returns (PlamData, StandardizationMap, LoadReport).
    """
    frame, report = read_frame(path, config, delimiter)
    smap = build_map(frame, config)
    data = apply_map(frame, config, smap)
    return data, smap, report
