"""
Experiment report container shared by every sweep.
"""
from dataclasses import dataclass, field

import numpy as np


def _plain(value):
    """Converts numpy scalars, arrays and complex numbers to JSON-ready values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(value.real), "im": float(value.imag)}
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


@dataclass
class ExperimentReport:
    """
    A parameter grid mapped to measured quantities.

    Attributes:
        name (str): Experiment name
        params (dict): Inputs, including seeds and sample counts
        rows (list): One dict per grid point
        summary (dict): Aggregates, fitted exponents, predictions and verdicts
    """
    name: str
    params: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def passed(self):
        return bool(self.summary.get("passed", True))

    def to_dict(self):
        return {
            "name": self.name,
            "params": _plain(self.params),
            "rows": _plain(self.rows),
            "summary": _plain(self.summary),
        }

    def flat_rows(self):
        """
        Rows with nested values flattened into scalar columns, for CSV export.

        Returns:
            list: List of flat dicts
        """
        flat = []
        for row in _plain(self.rows):
            out = {}
            for key, value in row.items():
                if isinstance(value, dict) and set(value) == {"re", "im"}:
                    out[f"{key}_re"] = value["re"]
                    out[f"{key}_im"] = value["im"]
                elif isinstance(value, list):
                    for i, item in enumerate(value):
                        out[f"{key}_{i}"] = item
                else:
                    out[key] = value
            flat.append(out)
        return flat
