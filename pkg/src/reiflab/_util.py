"""Small helpers shared by the report types."""
import dataclasses
import math

import numpy as np


def jsonable(obj):
    """Convert dataclasses / numpy values into plain JSON-compatible data."""
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj) if not f.name.startswith("_")}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


class CheckResult:
    """Outcome of an inequality check.

    status is one of "pass", "fail", "inapplicable", "vacuous", "clipped".
    """

    STATUSES = ("pass", "fail", "inapplicable", "vacuous", "clipped")

    def __init__(self, name, status, lhs=None, rhs=None, margin=0.0, **details):
        if status not in self.STATUSES:
            raise ValueError(f"bad status {status!r}")
        self.name = name
        self.status = status
        self.lhs = lhs
        self.rhs = rhs
        self.margin = margin
        self.details = details

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def __repr__(self):
        return f"CheckResult({self.name!r}, {self.status!r}, lhs={self.lhs!r}, rhs={self.rhs!r})"

    def to_dict(self):
        return jsonable(
            {"check": self.name, "status": self.status, "lhs": self.lhs, "rhs": self.rhs, "margin": self.margin, **self.details}
        )
