import json
import math
from datetime import datetime
from typing import Any, Dict, List

import pytz

from models import ValidationError


def load_json_config(json_file: str, allowed_keys) -> Dict[str, Any]:
    """
    Load a run configuration from a JSON file.
    The file must hold one object; keys use snake_case flag names
    (e.g. "tau", "p_max", "srmse_normalize"). Unknown keys are rejected.
    """
    with open(json_file, "r", encoding="utf-8") as f:
        data = json.load(f)

    if not isinstance(data, dict):
        raise ValidationError(f"config {json_file} must hold a JSON object, got {type(data).__name__}")

    # Allow dashed spellings copied from the command line
    normalized = {key.replace("-", "_"): value for key, value in data.items()}
    unknown = sorted(set(normalized) - set(allowed_keys) - {"subcommand"})
    if unknown:
        raise ValidationError(f"unknown config key(s) in {json_file}: {', '.join(unknown)}")
    return normalized


def load_json(json_file: str) -> Any:
    with open(json_file, "r", encoding="utf-8") as f:
        return json.load(f)


def get_utc_timestamp() -> str:
    """Get current timestamp in UTC."""
    return datetime.now(pytz.utc).strftime("%Y-%m-%d %H:%M:%S UTC")


def format_float(value: float, digits: int = 17) -> str:
    """Locale-independent repr with `digits` significant digits; '' for None/NaN."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return format(float(value), f".{digits}g")


def parse_float_list(text: str) -> List[float]:
    """'0,0.5,1' -> [0.0, 0.5, 1.0]; 'a:b:step' expands to an inclusive range."""
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ValidationError(f"range must be start:stop:step with step > 0, got {text!r}")
        start, stop, step = parts
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    return [float(p) for p in text.split(",") if p.strip()]
