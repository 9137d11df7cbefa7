"""On-disk artifacts: grid.csv, the JSON reports and the flat analysis tables."""
from __future__ import annotations
import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import jsonschema
import numpy as np

from shared.schema_validation import load_schema, validate_payload

from ..errors import SchemaError
from ..schemas import SolverConfig
from ..types import STATUS_CODE, STATUSES, ArcSample, CharGrid

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
GRID_COLUMNS = ("i", "j", "r", "theta", "p", "dp_plus", "dp_minus", "status")


def fmt(x: float) -> str:
    """17 significant digits, enough for an exact double round trip."""
    return format(float(x), ".17g")


def _cell(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def write_grid(grid: CharGrid, path: Path) -> Path:
    """One row per node, i-major, NaN state kept for stopped and unreached nodes."""
    n_i, n_j = grid.shape
    rows = (
        (
            i, j,
            grid.r[i, j], grid.theta[i, j], grid.p[i, j],
            grid.dp_plus[i, j], grid.dp_minus[i, j],
            STATUSES[int(grid.status[i, j])],
        )
        for i in range(n_i)
        for j in range(n_j)
    )
    out = write_csv(path, GRID_COLUMNS, rows)
    logger.info("wrote %s (%d nodes)", out, n_i * n_j)
    return out


def _arc_seeds(r, theta, p, tangential, which) -> tuple[ArcSample, ...]:
    return tuple(
        ArcSample(which=which, theta=float(t), r=float(a), p=float(b), tangential_dp=float(d))
        for a, t, b, d in zip(r, theta, p, tangential)
    )


def read_grid(path: Path, config: Optional[SolverConfig] = None, scale: float = 1.0) -> CharGrid:
    """Parse grid.csv back into a CharGrid; the header must match the contract."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path} is empty") from None
        try:
            validate_payload(header, load_schema("grid_columns"))
        except jsonschema.ValidationError as exc:
            raise SchemaError(f"{path}: unexpected columns {header}") from exc
        records = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(GRID_COLUMNS):
                raise SchemaError(f"{path}:{lineno}: expected {len(GRID_COLUMNS)} fields")
            try:
                i, j = int(row[0]), int(row[1])
                values = [float(v) for v in row[2:7]]
                code = STATUS_CODE[row[7]]
            except (ValueError, KeyError) as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from exc
            records.append((i, j, values, code))
    if not records:
        raise SchemaError(f"{path} has no nodes")
    n_i = max(rec[0] for rec in records) + 1
    n_j = max(rec[1] for rec in records) + 1
    if len(records) != n_i * n_j:
        raise SchemaError(f"{path}: {len(records)} rows do not fill a {n_i} x {n_j} grid")

    fields = np.full((5, n_i, n_j), np.nan)
    status = np.full((n_i, n_j), -1, dtype=np.int8)
    for i, j, values, code in records:
        if status[i, j] != -1:
            raise SchemaError(f"{path}: node ({i}, {j}) appears twice")
        fields[:, i, j] = values
        status[i, j] = code
    r, theta, p, dp_plus, dp_minus = fields
    return CharGrid(
        r=r,
        theta=theta,
        p=p,
        dp_plus=dp_plus,
        dp_minus=dp_minus,
        status=status,
        iterations=np.zeros((n_i, n_j), dtype=np.int32),
        mismatch=np.full((n_i, n_j), np.nan),
        seeds_lower=_arc_seeds(r[:, 0], theta[:, 0], p[:, 0], dp_plus[:, 0], "lower"),
        seeds_upper=_arc_seeds(r[0], theta[0], p[0], dp_minus[0], "upper"),
        config=config if config is not None else SolverConfig(n_seeds=max(n_i, 2)),
        scale=scale,
    )


def _jsonable(obj: Any) -> Any:
    """NaN and inf become null; numpy scalars and tuples become plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(payload: dict, path: Path, contract: str) -> Path:
    """Validate against contracts/<contract>.json, then write with sorted keys."""
    doc = _jsonable(payload)
    try:
        validate_payload(doc, load_schema(contract))
    except jsonschema.ValidationError as exc:
        raise SchemaError(f"{contract} payload breaks its contract: {exc.message}") from exc
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("wrote %s", path)
    return path


def read_json(path: Path, contract: Optional[str] = None) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if contract is not None:
        try:
            validate_payload(doc, load_schema(contract))
        except jsonschema.ValidationError as exc:
            raise SchemaError(f"{path} breaks the {contract} contract: {exc.message}") from exc
    return doc
