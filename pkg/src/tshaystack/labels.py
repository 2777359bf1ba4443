"""Activity classes and the sedentary/active regime partition."""

from __future__ import annotations

CLASSES: tuple[str, ...] = (
    "sleep",
    "sitting",
    "standing",
    "vehicle",
    "walking",
    "mixed-activity",
    "bicycling",
    "manual-work",
    "sports",
    "household-chores",
)

SEDENTARY: frozenset[str] = frozenset({"sleep", "sitting", "standing", "vehicle"})
ACTIVE: frozenset[str] = frozenset(CLASSES) - SEDENTARY

# Pseudo-class for samples not covered by any annotation. Never wins a majority vote.
UNANNOTATED = "unannotated"

CLASS_INDEX = {name: i for i, name in enumerate(CLASSES)}


def regime_of(activity: str) -> str:
    if activity in SEDENTARY:
        return "sedentary"
    if activity in ACTIVE:
        return "active"
    raise KeyError(f"unknown activity class {activity!r}")


def regime_members(regime: str) -> frozenset[str]:
    if regime == "sedentary":
        return SEDENTARY
    if regime == "active":
        return ACTIVE
    raise KeyError(f"unknown regime {regime!r}")


def other_regime(regime: str) -> str:
    return "active" if regime == "sedentary" else "sedentary"
