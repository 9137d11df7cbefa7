from __future__ import annotations
import json
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict

import jsonschema

CONTRACTS_DIR = Path(__file__).resolve().parents[2] / "contracts"


@lru_cache(maxsize=None)
def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def load_schema(schema: str) -> Dict[str, Any]:
    """Load a contract by file path or by bare name under contracts/."""
    p = Path(schema)
    if not p.suffix:
        p = CONTRACTS_DIR / f"{schema}.json"
    return json.loads(_read(str(p)))


def validate_payload(payload: Any, schema: Dict[str, Any]) -> None:
    """Raise jsonschema.ValidationError if payload breaks the contract."""
    cls = jsonschema.validators.validator_for(schema)
    cls.check_schema(schema)
    cls(schema).validate(payload)
