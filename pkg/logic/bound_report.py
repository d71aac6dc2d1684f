from dataclasses import dataclass, field
from typing import Any, Dict

BOUND_SLACK = 1e-9


@dataclass
class BoundReport:
    """
    One analytic bound next to the value it constrains.

    `margin` is signed so that margin >= 0 means the bound holds.
    """

    name: str
    analytic_value: float
    empirical_value: float
    satisfied: bool
    margin: float
    applicable: bool = True
    details: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def upper(cls, name: str, bound: float, value: float, **details) -> "BoundReport":
        """value <= bound."""
        margin = bound - value
        return cls(name, float(bound), float(value), margin >= -BOUND_SLACK * max(1.0, abs(bound)), float(margin),
                   details=details)

    @classmethod
    def lower(cls, name: str, bound: float, value: float, **details) -> "BoundReport":
        """value >= bound."""
        margin = value - bound
        return cls(name, float(bound), float(value), margin >= -BOUND_SLACK * max(1.0, abs(bound)), float(margin),
                   details=details)

    @classmethod
    def not_applicable(cls, name: str, reason: str, **details) -> "BoundReport":
        details["reason"] = reason
        return cls(name, float("nan"), float("nan"), True, 0.0, applicable=False, details=details)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "analytic_value": None if self.analytic_value != self.analytic_value else self.analytic_value,
            "empirical_value": None if self.empirical_value != self.empirical_value else self.empirical_value,
            "satisfied": self.satisfied,
            "margin": self.margin,
            "applicable": self.applicable,
            "details": self.details,
        }
