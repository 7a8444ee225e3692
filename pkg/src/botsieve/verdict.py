from __future__ import annotations

from enum import Enum


class Verdict(str, Enum):
    """Routing outcome of a phase. ``rank`` orders Benign < Pass < Infected."""

    BENIGN = "benign"
    PASS = "pass"
    INFECTED = "infected"

    @property
    def rank(self) -> int:
        return _RANK[self]


_RANK = {Verdict.BENIGN: 0, Verdict.PASS: 1, Verdict.INFECTED: 2}
