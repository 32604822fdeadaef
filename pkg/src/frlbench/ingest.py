"""Raw-table ingestion for the two reference benchmarks.

The census builder filters a raw ACS PUMS person-level CSV down to working
adults, derives five binary earnings/employment labels from the raw income,
earnings, commute, and weeks-worked columns, uses sex as the sensitive
attribute, and one-hot expands the categorical feature codes.

The health builder expects a pre-aggregated per-patient table (one row per
patient with claim counts, specialty/place/procedure indicator columns and
condition flags), binarizes the comorbidity-index label, and thresholds age
at 60 for the sensitive attribute. Aggregating raw claims into that table is
out of scope here; the expected schema is validated at load.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .dataset import Dataset, one_hot
from .errors import DataError, EmptyCsvError, MissingColumnError

# ---------------------------------------------------------------------------
# ACS census
# ---------------------------------------------------------------------------

ACS_FEATURES = (
    "AGEP", "ANC", "CIT", "COW", "DEAR", "DEYE", "DIS", "DREM", "ESP",
    "JWTR", "MAR", "NATIVITY", "RAC1P", "RELP", "SCHL", "SEX", "WKHP",
    "PUMA", "POWPUMA",
)
ACS_NUMERIC = ("AGEP", "WKHP")
ACS_CATEGORICAL = tuple(c for c in ACS_FEATURES if c not in ACS_NUMERIC)
# raw columns consumed by label derivation and filtering
ACS_LABEL_SOURCES = ("PINCP", "PERNP", "JWMNP", "WKW")
ACS_WEIGHT = "PWGTP"

ACS_TASKS = ("PINCP 50K", "PERNP", "PINCP 30K", "JWMNP", "WKW")


@dataclass(frozen=True)
class AcsFilterSpec:
    """Row filter for the raw census table (predicates are conjunctive).

    Bounds follow the benchmark's definition: age strictly over ``age_over``
    and strictly under ``age_under``, income strictly over ``income_over``
    dollars, weekly hours and survey weight at least the given minimums.
    """

    age_over: float = 16.0
    age_under: float = 90.0
    income_over: float = 100.0
    min_hours: float = 1.0
    min_weight: float = 1.0

    def mask(self, frame: pd.DataFrame) -> np.ndarray:
        return (
            (frame["AGEP"] > self.age_over)
            & (frame["AGEP"] < self.age_under)
            & (frame["PINCP"] > self.income_over)
            & (frame["WKHP"] >= self.min_hours)
            & (frame[ACS_WEIGHT] >= self.min_weight)
        ).to_numpy()


def _read_raw(path, required: tuple[str, ...]) -> pd.DataFrame:
    path = Path(path)
    try:
        frame = pd.read_csv(path, low_memory=False)
    except pd.errors.EmptyDataError:
        raise EmptyCsvError(f"{path}: file is empty") from None
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise MissingColumnError(f"{path}: missing column {missing[0]!r}")
    return frame


def ingest_acs(path, spec: AcsFilterSpec | None = None,
               expand: bool = True) -> Dataset:
    """Build the census benchmark dataset from a raw PUMS person CSV.

    Blank categorical codes and blank commute/weeks cells are treated as the
    not-applicable code 0 (the PUMS convention for structural blanks); blank
    cells in the filter columns simply fail the filter.
    """
    spec = spec or AcsFilterSpec()
    required = ACS_FEATURES + ACS_LABEL_SOURCES + (ACS_WEIGHT,)
    frame = _read_raw(path, required)
    frame = frame.loc[spec.mask(frame)].reset_index(drop=True)
    if len(frame) == 0:
        raise DataError(f"{path}: no rows survive the filter")

    for col in ACS_CATEGORICAL + ("JWMNP", "WKW", "PERNP"):
        frame[col] = frame[col].fillna(0)

    sex = frame["SEX"].to_numpy()
    if not np.isin(sex, (1, 2)).all():
        raise DataError("SEX column must be coded 1/2")
    tasks = {
        "PINCP 50K": (frame["PINCP"] > 50_000).to_numpy().astype(np.int64),
        "PERNP": (frame["PERNP"] > 70_000).to_numpy().astype(np.int64),
        "PINCP 30K": (frame["PINCP"] > 30_000).to_numpy().astype(np.int64),
        "JWMNP": (frame["JWMNP"] > 20).to_numpy().astype(np.int64),
        "WKW": (frame["WKW"] == 1).to_numpy().astype(np.int64),
    }
    features = frame[list(ACS_FEATURES)].to_numpy(dtype=np.float64)
    if not np.isfinite(features).all():
        bad = np.flatnonzero(~np.isfinite(features).all(axis=0))[0]
        raise DataError(f"column {ACS_FEATURES[bad]!r} has missing values")
    d = Dataset(
        features=features,
        sensitive=(sex - 1).astype(np.int64),
        tasks=tasks,
        feature_names=ACS_FEATURES,
    )
    return one_hot(d, ACS_CATEGORICAL) if expand else d


# ---------------------------------------------------------------------------
# Heritage health
# ---------------------------------------------------------------------------

HEALTH_COUNT_FEATURES = (
    "LabCount_total", "LabCount_months", "DrugCount_total", "DrugCount_months",
    "no_Claims", "no_Providers", "no_Vendors", "no_PCPs",
    "PayDelay_total", "PayDelay_max", "PayDelay_min",
)
HEALTH_SPECIALTIES = (
    "Anesthesiology", "Diagnostic Imaging", "Emergency", "General Practice",
    "Internal", "Laboratory", "Obstetrics and Gynecology", "Other",
    "Pathology", "Pediatrics", "Rehabilitation", "Specialty_?", "Surgery",
)
HEALTH_PROCEDURE_GROUPS = (
    "ANES", "EM", "MED", "PL", "ProcedureGroup_?", "RAD", "SAS", "SCS",
    "SDS", "SEOA", "SGS", "SIS", "SMCD", "SMS", "SNS", "SO", "SRS", "SUS",
)
HEALTH_PLACES = (
    "Ambulance", "Home", "Independent Lab", "Inpatient Hospital", "Office",
    "Other", "Outpatient Hospital", "PlaceSvc_?", "Urgent Care",
)
HEALTH_FEATURES = (
    HEALTH_COUNT_FEATURES
    + tuple(f"Specialty={s}" for s in HEALTH_SPECIALTIES)
    + tuple(f"ProcedureGroup={g}" for g in HEALTH_PROCEDURE_GROUPS)
    + tuple(f"PlaceSvc={p}" for p in HEALTH_PLACES)
    + ("Sex",)
)
HEALTH_CONDITIONS = ("MSC2a3", "METAB3", "ARTHSPIN", "NEUMENT")
HEALTH_PROXY_SOURCE = "max_CharlsonIndex"

HEALTH_TASKS = (HEALTH_PROXY_SOURCE,) + HEALTH_CONDITIONS


def ingest_health(path, age_column: str = "age",
                  age_threshold: float = 60.0) -> Dataset:
    """Build the health benchmark dataset from a per-patient aggregate CSV.

    The comorbidity-index label is 1 when the index is non-zero; condition
    columns pass through and must already be binary. The sensitive group is
    1 for patients at or above ``age_threshold``.
    """
    required = HEALTH_FEATURES + HEALTH_TASKS + (age_column,)
    frame = _read_raw(path, required)
    if len(frame) == 0:
        raise EmptyCsvError(f"{path}: no data rows")
    used = frame[list(required)]
    na_counts = used.isna().sum()
    if na_counts.any():
        col = na_counts[na_counts > 0].index[0]
        raise DataError(f"column {col!r} has missing values")
    tasks = {
        HEALTH_PROXY_SOURCE: (frame[HEALTH_PROXY_SOURCE] > 0)
        .to_numpy().astype(np.int64)
    }
    for cond in HEALTH_CONDITIONS:
        vec = frame[cond].to_numpy()
        if not np.isin(vec, (0, 1)).all():
            raise DataError(f"condition column {cond!r} is not binary")
        tasks[cond] = vec.astype(np.int64)
    age = frame[age_column].to_numpy(dtype=np.float64)
    return Dataset(
        features=frame[list(HEALTH_FEATURES)].to_numpy(dtype=np.float64),
        sensitive=(age >= age_threshold).astype(np.int64),
        tasks=tasks,
        feature_names=HEALTH_FEATURES,
    )
