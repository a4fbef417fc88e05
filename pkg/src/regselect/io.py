"""CSV and JSON ingestion for datasets, design matrices and simulation configs.

Parse failures carry the file, row and column, so a command-line caller can
report exactly where an input went wrong.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .discrepancy import TrueModel
from .regression import Dataset, LinearModel
from .simulate import SimConfig


class InputError(ValueError):
    """Malformed or inconsistent user input (maps to CLI exit code 2)."""


def _parse_cell(text: str, path, row: int, column: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise InputError(
            f"{path}: row {row}, column {column!r}: cannot parse {text.strip()!r} as a number"
        ) from None


def read_dataset_csv(path) -> Dataset:
    """Dataset CSV: header row with a required ``y`` column and an optional
    ``sigma`` column of per-point error bars."""
    path = Path(path)
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: file is empty") from None
        names = [h.strip() for h in header]
        if "y" not in names:
            raise InputError(f"{path}: header must contain a 'y' column, got {names}")
        y_idx = names.index("y")
        s_idx = names.index("sigma") if "sigma" in names else None
        ys, sigmas = [], []
        for i, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(names):
                raise InputError(f"{path}: row {i}: expected {len(names)} fields, got {len(row)}")
            ys.append(_parse_cell(row[y_idx], path, i, "y"))
            if s_idx is not None:
                sigmas.append(_parse_cell(row[s_idx], path, i, "sigma"))
    if not ys:
        raise InputError(f"{path}: no data rows")
    try:
        return Dataset(
            y=np.array(ys), error_bars=np.array(sigmas) if s_idx is not None else None
        )
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def read_design_csv(path) -> tuple[np.ndarray, list[str]]:
    """Design matrix CSV: numeric columns, one row per observation, column
    order defining the coefficient indexing.  A first row that fails numeric
    parsing is treated as a header of column names."""
    path = Path(path)
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    with handle:
        rows = [r for r in csv.reader(handle) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: file is empty")
    first = rows[0]
    try:
        [float(c) for c in first]
        names = [f"x{j + 1}" for j in range(len(first))]
        start = 1
        data_rows = rows
    except ValueError:
        names = [c.strip() for c in first]
        start = 2
        data_rows = rows[1:]
        if not data_rows:
            raise InputError(f"{path}: header only, no data rows") from None
    width = len(names)
    matrix = np.empty((len(data_rows), width))
    for i, row in enumerate(data_rows):
        if len(row) != width:
            raise InputError(
                f"{path}: row {i + start}: expected {width} fields, got {len(row)}"
            )
        for j, cell in enumerate(row):
            matrix[i, j] = _parse_cell(cell, path, i + start, names[j])
    return matrix, names


def _matrix_from_spec(entry: dict, base_dir: Path, what: str) -> np.ndarray:
    inline = entry.get(what)
    csv_path = entry.get(f"{what}_csv")
    if (inline is None) == (csv_path is None):
        raise InputError(f"candidate/true model must set exactly one of {what!r} / {what}_csv")
    if inline is not None:
        return np.asarray(inline, dtype=np.float64)
    matrix, _ = read_design_csv(base_dir / csv_path)
    return matrix


def load_sim_config(path) -> SimConfig:
    """Simulation config JSON; matrices may be inline or CSV paths relative
    to the config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise InputError(f"{path}: top-level JSON value must be an object")
    return sim_config_from_dict(doc, base_dir=path.parent)


def sim_config_from_dict(doc: dict, base_dir: Path | None = None) -> SimConfig:
    base_dir = Path(".") if base_dir is None else base_dir
    for key in ("experiment", "replications", "seed"):
        if key not in doc:
            raise InputError(f"simulation config is missing the {key!r} field")
    true_model = None
    if doc.get("true_model") is not None:
        tm = doc["true_model"]
        if "sigma0_2" not in tm:
            raise InputError("true_model needs a 'sigma0_2' field")
        y0 = _matrix_from_spec(tm, base_dir, "y0")
        if y0.ndim == 2:
            if y0.shape[1] != 1:
                raise InputError("y0 loaded from CSV must have exactly one column")
            y0 = y0[:, 0]
        try:
            true_model = TrueModel(y0=y0, sigma0_2=float(tm["sigma0_2"]))
        except ValueError as exc:
            raise InputError(f"true_model: {exc}") from None
    candidates = []
    for i, cand in enumerate(doc.get("candidates", [])):
        design = _matrix_from_spec(cand, base_dir, "design")
        sigma2 = cand.get("sigma2")
        try:
            candidates.append(LinearModel(design, sigma2=None if sigma2 is None else float(sigma2)))
        except ValueError as exc:
            raise InputError(f"candidate {i + 1}: {exc}") from None
    try:
        return SimConfig(
            experiment=str(doc["experiment"]),
            replications=int(doc["replications"]),
            seed=int(doc["seed"]),
            true_model=true_model,
            candidates=tuple(candidates),
            params=dict(doc.get("params", {})),
        )
    except (TypeError, ValueError) as exc:
        raise InputError(f"simulation config: {exc}") from None
