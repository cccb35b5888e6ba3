"""
Reading and writing experiment artifacts.

Every write goes to a temporary sibling file which is renamed over the target
while holding a FileLock on ``<target>.lock``, so readers never see a partial
file. CSVs are UTF-8 with LF line endings and reals at 17 significant digits.
"""

import json
import os
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from filelock import FileLock

from ..core.attacks import AttackOutcome
from ..core.certify import CertResult
from ..core.oracle import SyntheticPopulation
from ..core.semgeo import SemanticBasis
from ..exceptions import ConfigurationError
from ..exceptions import OutputError
from .logging import get_logger

logger = get_logger(__name__)

FLOAT_FORMAT = "%.17g"

ATTACK_COLUMNS = [
    "identity_id",
    "method",
    "success",
    "clean_correct",
    "energy",
    "predicted_class",
    "restart_index",
]
CERT_COLUMNS = [
    "identity_id",
    "mode",
    "sigma",
    "c_A",
    "correct",
    "p_a_lower",
    "mahalanobis_radius",
    "radius",
    "abstain",
]


def atomic_write_text(path, text: str) -> Path:
    """Write text to `path` atomically under a file lock."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with FileLock(f"{path}.lock"):
            fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
            try:
                with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
                    handle.write(text)
                os.replace(tmp_name, path)
            except BaseException:
                if os.path.exists(tmp_name):
                    os.unlink(tmp_name)
                raise
    except OSError as e:
        raise OutputError(f"Could not write {path}", path=path, os_error=e)
    logger.debug(f"Wrote {path}")
    return path


def write_frame(frame: pd.DataFrame, path) -> Path:
    text = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return atomic_write_text(path, text)


def write_json(document, path) -> Path:
    return atomic_write_text(path, json.dumps(document, indent=2) + "\n")


def read_json(path):
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except OSError as e:
        raise OutputError(f"Could not read {path}", path=path, os_error=e)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path} is not valid JSON: {e}", "path", str(path))


def read_frame(path, required_columns=()) -> pd.DataFrame:
    path = Path(path)
    try:
        frame = pd.read_csv(path)
    except OSError as e:
        raise OutputError(f"Could not read {path}", path=path, os_error=e)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ConfigurationError(f"{path} is not a readable CSV: {e}", "path", str(path))
    missing = [c for c in required_columns if c not in frame.columns]
    if missing:
        raise ConfigurationError(f"{path} lacks columns {missing}", "path", str(path))
    return frame


# Population and basis files


def save_population(pop: SyntheticPopulation, path) -> Path:
    return write_json(pop.to_dict(), path)


def load_population(path) -> SyntheticPopulation:
    return SyntheticPopulation.from_dict(read_json(path))


def load_basis(path) -> SemanticBasis:
    """Load directions from ``.npy`` (rows) or JSON {"attribute_names", "directions"}."""
    path = Path(path)
    if path.suffix == ".npy":
        try:
            directions = np.load(path)
        except (OSError, ValueError) as e:
            raise OutputError(f"Could not read basis {path}", path=path, os_error=e)
        return SemanticBasis.from_matrix(directions)
    document = read_json(path)
    if "directions" not in document:
        raise ConfigurationError(f"Basis file {path} lacks 'directions'", "basis_file", str(path))
    return SemanticBasis.from_matrix(document["directions"], document.get("attribute_names"))


# Attack results


def outcomes_to_frame(outcomes, num_attributes: int) -> pd.DataFrame:
    records = []
    for o in outcomes:
        record = {
            "identity_id": int(o.identity_id),
            "method": o.method,
            "success": bool(o.success),
            "clean_correct": bool(o.clean_correct),
            "energy": float(o.energy),
            "predicted_class": int(o.predicted_class),
            "restart_index": int(o.restart_index),
        }
        for i in range(num_attributes):
            record[f"delta_{i}"] = float(o.delta[i])
        records.append(record)
    columns = ATTACK_COLUMNS + [f"delta_{i}" for i in range(num_attributes)]
    return pd.DataFrame.from_records(records, columns=columns)


def frame_to_outcomes(frame: pd.DataFrame) -> list[AttackOutcome]:
    delta_columns = sorted(
        (c for c in frame.columns if c.startswith("delta_")), key=lambda c: int(c.split("_")[1])
    )
    if not delta_columns:
        raise ConfigurationError("Attack results have no delta_* columns", "results")
    deltas = frame[delta_columns].to_numpy(dtype=np.float64)
    return [
        AttackOutcome(
            identity_id=int(row.identity_id),
            method=str(row.method),
            success=bool(row.success),
            delta=deltas[i],
            energy=float(row.energy),
            predicted_class=int(row.predicted_class),
            restart_index=int(row.restart_index),
            clean_correct=bool(row.clean_correct),
        )
        for i, row in enumerate(frame.itertuples(index=False))
    ]


def write_outcomes(outcomes, num_attributes: int, path) -> Path:
    return write_frame(outcomes_to_frame(outcomes, num_attributes), path)


def read_outcomes(path) -> list[AttackOutcome]:
    return frame_to_outcomes(read_frame(path, ATTACK_COLUMNS))


# Certification results


def cert_results_to_frame(results) -> pd.DataFrame:
    records = [
        {
            "identity_id": int(r.identity_id),
            "mode": r.mode,
            "sigma": float(r.sigma),
            "c_A": int(r.predicted_class),
            "correct": bool(r.correct),
            "p_a_lower": float(r.p_a_lower),
            "mahalanobis_radius": float(r.mahalanobis_radius),
            "radius": float(r.radius),
            "abstain": bool(r.abstain),
        }
        for r in results
    ]
    return pd.DataFrame.from_records(records, columns=CERT_COLUMNS)


def read_cert_results(path) -> list[CertResult]:
    frame = read_frame(path, CERT_COLUMNS)
    return [
        CertResult(
            identity_id=int(row.identity_id),
            mode=str(row.mode),
            sigma=float(row.sigma),
            predicted_class=int(row.c_A),
            correct=bool(row.correct),
            p_a_lower=float(row.p_a_lower),
            mahalanobis_radius=float(row.mahalanobis_radius),
            radius=float(row.radius),
            abstain=bool(row.abstain),
        )
        for row in frame.itertuples(index=False)
    ]


def write_cert_results(results, path) -> Path:
    return write_frame(cert_results_to_frame(results), path)


def write_curve(curve, path, x_name="radius", y_name="certified_accuracy") -> Path:
    frame = pd.DataFrame([(float(x), float(y)) for x, y in curve], columns=[x_name, y_name])
    return write_frame(frame, path)
