"""Core domain types: historical plays and the in-drive game situation."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import ValidationError


class PlayKind(str, Enum):
    PASS = "pass"
    RUN = "run"
    PUNT = "punt"
    FIELD_GOAL = "field_goal"


ALL_KINDS = frozenset(PlayKind)
SCRIMMAGE_KINDS = frozenset({PlayKind.PASS, PlayKind.RUN})
KICK_KINDS = frozenset({PlayKind.PUNT, PlayKind.FIELD_GOAL})


@dataclass(frozen=True, slots=True)
class Play:
    """One historical play, reduced to the fields the simulation consumes.

    ``yards_from_own_goal`` is the offense's field position, 1-99 (100 would
    be the opponent's goal line). ``net_kick_yards`` is kick distance minus
    return yards and is meaningful only for punts; ``field_goal_made`` only
    for field-goal attempts. The passing-stat fields are populated for pass
    plays parsed from real data so team-season passer ratings can be
    aggregated straight off a pool; synthetic plays may leave them defaulted.
    """

    kind: PlayKind
    down: int
    yards_to_go: int
    yards_from_own_goal: int
    yards_gained: int
    is_touchdown: bool = False
    is_turnover: bool = False
    field_goal_made: bool | None = None
    net_kick_yards: int | None = None
    team: str = ""
    season: int = 0
    pass_attempt: bool = False
    complete_pass: bool = False
    passing_yards: int = 0
    pass_touchdown: bool = False
    is_interception: bool = False

    def check(self) -> None:
        """Raise ValidationError if any Play invariant is violated."""
        if not 1 <= self.yards_from_own_goal <= 99:
            raise ValidationError(
                f"yards_from_own_goal {self.yards_from_own_goal} outside [1, 99]"
            )
        if not 1 <= self.down <= 4:
            raise ValidationError(f"down {self.down} outside [1, 4]")
        if self.yards_to_go < 1:
            raise ValidationError(f"yards_to_go {self.yards_to_go} < 1")
        if self.yards_to_go > 100 - self.yards_from_own_goal:
            raise ValidationError(
                f"yards_to_go {self.yards_to_go} exceeds distance to goal "
                f"({100 - self.yards_from_own_goal})"
            )
        if (self.field_goal_made is not None) != (self.kind is PlayKind.FIELD_GOAL):
            raise ValidationError("field_goal_made must be set iff kind is field_goal")
        if (self.net_kick_yards is not None) != (self.kind is PlayKind.PUNT):
            raise ValidationError("net_kick_yards must be set iff kind is punt")


@dataclass(frozen=True, slots=True)
class GameState:
    """Current drive situation: down, distance, field position, play count."""

    down: int
    yards_to_go: int
    yards_from_own_goal: int
    plays_run: int = 0

    def check(self) -> None:
        """Raise ValidationError if the situation is not a legal one."""
        if not 1 <= self.down <= 4:
            raise ValidationError(f"down {self.down} outside [1, 4]")
        if not 1 <= self.yards_from_own_goal <= 99:
            raise ValidationError(
                f"yards_from_own_goal {self.yards_from_own_goal} outside [1, 99]"
            )
        if self.yards_to_go < 1:
            raise ValidationError(f"yards_to_go {self.yards_to_go} < 1")
        if self.yards_to_go > 100 - self.yards_from_own_goal:
            raise ValidationError(
                f"yards_to_go {self.yards_to_go} exceeds distance to goal "
                f"({100 - self.yards_from_own_goal})"
            )


def initial_drive_state(from_yard_line: int) -> GameState:
    """First-and-ten (capped at goal-to-go distance) at the given yardline."""
    if not 1 <= from_yard_line <= 99:
        raise ValidationError(f"from_yard_line {from_yard_line} outside [1, 99]")
    return GameState(
        down=1,
        yards_to_go=min(10, 100 - from_yard_line),
        yards_from_own_goal=from_yard_line,
        plays_run=0,
    )
