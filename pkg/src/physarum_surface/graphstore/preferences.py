from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import ConfigurationError


@dataclass(frozen=True)
class PreferenceTable:
    """Colour label -> chemotactic weight.

    Weights above 1 attract more strongly than plain food, exactly 1 is
    neutral, negative weights repel.  Weights in ``[0, 1)`` are rejected so
    that each label falls in one of the three classes.
    """

    weights: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for label, w in self.weights.items():
            if not math.isfinite(w):
                raise ConfigurationError(f"colour {label!r}: weight must be finite")
            if 0 <= w < 1:
                raise ConfigurationError(
                    f"colour {label!r}: weight {w} is neither attract (>1), neutral (=1) nor repel (<0)"
                )

    def ranking(self) -> list[str]:
        """Labels from most to least preferred (ties broken by label)."""
        return sorted(self.weights, key=lambda c: (-self.weights[c], c))

    def classify(self, label: str) -> str:
        w = color_weight(self, label)
        if w > 1:
            return "attract"
        if w == 1:
            return "neutral"
        return "repel"

    @classmethod
    def default(cls) -> PreferenceTable:
        return cls({"oat": 1.0})


def color_weight(table: PreferenceTable, color: str) -> float:
    try:
        return table.weights[color]
    except KeyError:
        raise ConfigurationError(
            f"unknown colour {color!r}; table has {sorted(table.weights) or 'no entries'}"
        ) from None
