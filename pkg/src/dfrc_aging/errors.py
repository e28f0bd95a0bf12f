from __future__ import annotations

from dataclasses import dataclass


class DfrcError(ValueError):
    """Base class for all errors raised by this package."""


class ConfigError(DfrcError):
    pass


class GeometryError(DfrcError):
    """Degenerate target geometry (nonpositive distance, tangential motion, ...)."""


class RankDeficientError(DfrcError):
    pass


class InvalidRegimeError(DfrcError):
    """A closed form is evaluated outside the range where it is defined."""


@dataclass(frozen=True)
class Infeasibility:
    """Structured reason why an allocation candidate was rejected.

    ``constraint`` is one of the labels ``C1``..``C10`` (see README), ``"B0"`` for a
    failed integer conversion or ``"resources"`` when the training budget
    cannot cover the radar demand.  ``index`` is the target (1-based) or
    user (1-based) responsible, ``block`` the block index when relevant.
    """

    constraint: str
    index: int | None = None
    block: int | None = None
    detail: str = ""

    def __str__(self):
        parts = [self.constraint]
        if self.index is not None:
            parts.append(f"index={self.index}")
        if self.block is not None:
            parts.append(f"block={self.block}")
        if self.detail:
            parts.append(self.detail)
        return " ".join(parts)


class InfeasibleError(DfrcError):
    def __init__(self, reason: Infeasibility):
        super().__init__(str(reason))
        self.reason = reason
