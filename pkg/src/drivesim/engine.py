"""Drive state machine: chains sampled plays into drive outcomes.

Single drives advance down/distance until a terminal event; batches run many
drives (or alternating-possession episodes) with per-drive seeds derived from
the master seed, so results are identical no matter how many workers run them.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import multiprocessing
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import NoEligiblePlaysError, ValidationError
from .plays import GameState, Play, PlayKind, initial_drive_state
from .sampling import PlayPool, SamplerConfig, StrategyLike, sample_play
from .strategies import MISSED_FG_SETBACK, Strategy, StrategySpec, TOUCHBACK_YFOG

log = logging.getLogger(__name__)

MAX_PLAYS_PER_DRIVE = 40
MAX_POSSESSIONS_PER_EPISODE = 25


class DriveOutcome(str, Enum):
    TOUCHDOWN = "touchdown"
    FIELD_GOAL = "field_goal"
    PUNT = "punt"
    TURNOVER = "turnover"
    TURNOVER_ON_DOWNS = "turnover_on_downs"
    MISSED_FG = "missed_fg"
    SAFETY = "safety"


SCORING_OUTCOMES = frozenset({DriveOutcome.TOUCHDOWN, DriveOutcome.FIELD_GOAL})

OUTCOME_POINTS = {
    DriveOutcome.TOUCHDOWN: 7,
    DriveOutcome.FIELD_GOAL: 3,
}


@dataclass(frozen=True, slots=True)
class DriveRecord:
    """Terminal outcome of one simulated drive.

    ``turnover_yardline`` is the offense's field position when it lost the
    ball (absent for scores); ``opponent_start`` is where the other team
    would take over, already in their own coordinates. ``scored_by`` is set
    only for until-score episodes.
    """

    outcome: DriveOutcome
    points: int
    n_plays: int
    end_yards_from_own_goal: int
    turnover_yardline: int | None
    opponent_start: int | None = None
    scored_by: str | None = None


@dataclass(frozen=True, slots=True)
class SimConfig:
    """Batch parameters: how many drives, from where, and with which seed."""

    n_sims: int
    from_yard_line: int = 25
    single_drive: bool = True
    master_seed: int = 0
    opponent_strategy: StrategySpec | None = None  # None means empirical

    def __post_init__(self) -> None:
        if self.n_sims < 1:
            raise ValidationError("n_sims must be >= 1")
        if not 1 <= self.from_yard_line <= 99:
            raise ValidationError("from_yard_line must be in [1, 99]")


@dataclass(frozen=True, slots=True)
class TerminalFragment:
    outcome: DriveOutcome
    points: int
    end_yards_from_own_goal: int
    turnover_yardline: int | None
    opponent_start: int | None


@dataclass(frozen=True, slots=True)
class StepResult:
    """Either the next situation or the terminal outcome fragment."""

    next_state: GameState | None = None
    terminal: TerminalFragment | None = None

    @property
    def is_terminal(self) -> bool:
        return self.terminal is not None


def derive_seed(master_seed: int, *parts: object) -> int:
    """Stable 64-bit stream seed from a master seed plus labels/ordinals."""
    h = hashlib.sha256(str(int(master_seed)).encode())
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode())
    return int.from_bytes(h.digest()[:8], "little")


def punt_receiving_position(from_yardline: int, net_yards: float) -> int:
    """Receiving team's yards-from-own-goal; kicks into the end zone come out
    at the touchback spot."""
    landing = from_yardline + net_yards
    if landing >= 100:
        return TOUCHBACK_YFOG
    return int(max(1, min(99, round(100 - landing))))


def down_distance_updater(
    state: GameState,
    play: Play,
    punt_net_fallback: Callable[[int], float] | None = None,
) -> StepResult:
    """Apply one sampled play to the situation.

    Every input maps to a defined transition: scores and turnovers terminate,
    kicks terminate with the appropriate possession hand-off, and ordinary
    gains advance the down/distance bookkeeping.
    """
    advanced = state.yards_from_own_goal + play.yards_gained
    plays_run = state.plays_run + 1

    if play.is_touchdown or advanced >= 100:
        return _terminal(
            DriveOutcome.TOUCHDOWN, end=min(100, max(1, advanced)), spot=None, opp=None
        )
    if play.is_turnover:
        spot = max(1, min(99, advanced))
        return _terminal(DriveOutcome.TURNOVER, end=spot, spot=spot, opp=100 - spot)
    if play.kind is PlayKind.FIELD_GOAL:
        if play.field_goal_made:
            return _terminal(
                DriveOutcome.FIELD_GOAL,
                end=state.yards_from_own_goal,
                spot=None,
                opp=None,
            )
        takeover = max(1, state.yards_from_own_goal - MISSED_FG_SETBACK)
        return _terminal(
            DriveOutcome.MISSED_FG,
            end=state.yards_from_own_goal,
            spot=state.yards_from_own_goal,
            opp=100 - takeover,
        )
    if play.kind is PlayKind.PUNT:
        net = play.net_kick_yards
        if net is None:
            net = (
                punt_net_fallback(state.yards_from_own_goal)
                if punt_net_fallback is not None
                else 40.0
            )
        return _terminal(
            DriveOutcome.PUNT,
            end=state.yards_from_own_goal,
            spot=state.yards_from_own_goal,
            opp=punt_receiving_position(state.yards_from_own_goal, net),
        )
    if advanced < 1:
        # Driven back across the own goal line.
        return _terminal(DriveOutcome.SAFETY, end=1, spot=1, opp=None)

    new_yardline = min(99, advanced)
    if play.yards_gained >= state.yards_to_go:
        return StepResult(
            next_state=GameState(
                down=1,
                yards_to_go=min(10, 100 - new_yardline),
                yards_from_own_goal=new_yardline,
                plays_run=plays_run,
            )
        )
    if state.down >= 4:
        return _terminal(
            DriveOutcome.TURNOVER_ON_DOWNS,
            end=new_yardline,
            spot=new_yardline,
            opp=100 - new_yardline,
        )
    return StepResult(
        next_state=GameState(
            down=state.down + 1,
            yards_to_go=state.yards_to_go - play.yards_gained,
            yards_from_own_goal=new_yardline,
            plays_run=plays_run,
        )
    )


def _terminal(
    outcome: DriveOutcome, *, end: int, spot: int | None, opp: int | None
) -> StepResult:
    return StepResult(
        terminal=TerminalFragment(
            outcome=outcome,
            points=OUTCOME_POINTS.get(outcome, 0),
            end_yards_from_own_goal=end,
            turnover_yardline=spot,
            opponent_start=opp,
        )
    )


def simulate_drive(
    pool: PlayPool,
    strategy: StrategyLike,
    start_yardline: int,
    sampler_cfg: SamplerConfig | None = None,
    rng: random.Random | None = None,
    *,
    max_plays: int = MAX_PLAYS_PER_DRIVE,
) -> DriveRecord:
    """Run one drive from the yardline to a terminal outcome."""
    rng = rng if rng is not None else random.Random()
    state = initial_drive_state(start_yardline)
    for _ in range(max_plays):
        try:
            play = sample_play(pool, strategy, state, sampler_cfg, rng)
        except NoEligiblePlaysError as err:
            raise NoEligiblePlaysError(
                f"{err} (drive from yardline {start_yardline}, "
                f"play {state.plays_run + 1})",
                state=err.state,
                kinds=err.kinds,
                down_pool=err.down_pool,
            ) from err
        step = down_distance_updater(state, play, pool.mean_punt_net)
        if step.terminal is not None:
            t = step.terminal
            return DriveRecord(
                outcome=t.outcome,
                points=t.points,
                n_plays=state.plays_run + 1,
                end_yards_from_own_goal=t.end_yards_from_own_goal,
                turnover_yardline=t.turnover_yardline,
                opponent_start=t.opponent_start,
            )
        state = step.next_state
    log.warning(
        "drive from yardline %d aborted after %d plays; recording turnover on downs",
        start_yardline,
        max_plays,
    )
    return DriveRecord(
        outcome=DriveOutcome.TURNOVER_ON_DOWNS,
        points=0,
        n_plays=max_plays,
        end_yards_from_own_goal=state.yards_from_own_goal,
        turnover_yardline=state.yards_from_own_goal,
        opponent_start=100 - state.yards_from_own_goal,
    )


def _episode(
    pool: PlayPool,
    strategy: StrategyLike,
    opponent: StrategyLike,
    from_yard_line: int,
    sampler_cfg: SamplerConfig | None,
    rng: random.Random,
) -> DriveRecord:
    """Alternate possessions until either team scores.

    The strategy team receives first. Field position carries over from each
    terminal; a safety counts as a score by the defending side.
    """
    strategy_has_ball = True
    start = from_yard_line
    record: DriveRecord | None = None
    for _ in range(MAX_POSSESSIONS_PER_EPISODE):
        offense = strategy if strategy_has_ball else opponent
        record = simulate_drive(pool, offense, start, sampler_cfg, rng)
        if record.outcome in SCORING_OUTCOMES:
            side = "strategy" if strategy_has_ball else "opponent"
            return replace(record, scored_by=side)
        if record.outcome is DriveOutcome.SAFETY:
            side = "opponent" if strategy_has_ball else "strategy"
            return replace(record, scored_by=side)
        start = record.opponent_start if record.opponent_start is not None else 25
        strategy_has_ball = not strategy_has_ball
    log.warning(
        "episode hit the %d-possession cap without a score",
        MAX_POSSESSIONS_PER_EPISODE,
    )
    assert record is not None
    return record


def _wrap_opponent(cfg: SimConfig) -> Strategy:
    spec = cfg.opponent_strategy or StrategySpec.empirical()
    return Strategy(spec=spec)


def _run_one(
    pool: PlayPool,
    strategy: StrategyLike,
    cfg: SimConfig,
    sampler_cfg: SamplerConfig | None,
    ordinal: int,
) -> DriveRecord:
    rng = random.Random(derive_seed(cfg.master_seed, "drive", ordinal))
    if cfg.single_drive:
        return simulate_drive(pool, strategy, cfg.from_yard_line, sampler_cfg, rng)
    return _episode(
        pool, strategy, _wrap_opponent(cfg), cfg.from_yard_line, sampler_cfg, rng
    )


def _run_chunk(
    pool: PlayPool,
    strategy: StrategyLike,
    cfg: SimConfig,
    sampler_cfg: SamplerConfig | None,
    ordinals: Sequence[int],
) -> list[DriveRecord]:
    return [_run_one(pool, strategy, cfg, sampler_cfg, i) for i in ordinals]


def sample_drives(
    pool: PlayPool,
    strategy: StrategyLike,
    cfg: SimConfig,
    sampler_cfg: SamplerConfig | None = None,
    *,
    n_jobs: int = 1,
) -> list[DriveRecord]:
    """Simulate ``cfg.n_sims`` drives (or until-score episodes).

    Each drive's stream is seeded from (master seed, ordinal), so the result
    list is byte-for-byte identical for any ``n_jobs``, and workers never
    share mutable state.
    """
    if n_jobs <= 1 or cfg.n_sims == 1:
        return _run_chunk(pool, strategy, cfg, sampler_cfg, range(cfg.n_sims))
    chunks: list[range] = []
    per, extra = divmod(cfg.n_sims, n_jobs)
    lo = 0
    for w in range(n_jobs):
        hi = lo + per + (1 if w < extra else 0)
        if hi > lo:
            chunks.append(range(lo, hi))
        lo = hi
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=len(chunks), mp_context=ctx) as pool_exec:
        futures = [
            pool_exec.submit(_run_chunk, pool, strategy, cfg, sampler_cfg, chunk)
            for chunk in chunks
        ]
        out: list[DriveRecord] = []
        for fut in futures:
            out.extend(fut.result())
    return out


RECORD_FIELDS = (
    "outcome",
    "points",
    "n_plays",
    "end_yards_from_own_goal",
    "turnover_yardline",
    "opponent_start",
    "scored_by",
)


def _record_row(record: DriveRecord) -> dict[str, object]:
    return {
        "outcome": record.outcome.value,
        "points": record.points,
        "n_plays": record.n_plays,
        "end_yards_from_own_goal": record.end_yards_from_own_goal,
        "turnover_yardline": record.turnover_yardline,
        "opponent_start": record.opponent_start,
        "scored_by": record.scored_by,
    }


def records_to_csv(records: Iterable[DriveRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RECORD_FIELDS)
        writer.writeheader()
        for record in records:
            row = _record_row(record)
            writer.writerow({k: ("" if v is None else v) for k, v in row.items()})


def records_to_jsonl(records: Iterable[DriveRecord], path: str | Path) -> None:
    with open(path, "w") as fh:
        for record in records:
            fh.write(json.dumps(_record_row(record)) + "\n")
