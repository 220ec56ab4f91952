"""Shared builders: synthetic pools and play-by-play CSVs."""

from __future__ import annotations

import random

import pandas as pd
import pytest

from drivesim.plays import Play, PlayKind
from drivesim.sampling import PlayPool, build_index


def template_pool(
    kind: PlayKind,
    yards_gained: int,
    *,
    copies: int = 1,
    is_touchdown: bool = False,
    is_turnover: bool = False,
    field_goal_made: bool | None = None,
    net_kick_yards: int | None = None,
) -> PlayPool:
    """Pool where every play has the same effect, cloned across all
    (down, distance) keys so any drive state can sample it."""
    if kind is PlayKind.FIELD_GOAL and field_goal_made is None:
        field_goal_made = True
    if kind is PlayKind.PUNT and net_kick_yards is None:
        net_kick_yards = 40
    plays = [
        Play(
            kind=kind,
            down=down,
            yards_to_go=ytg,
            yards_from_own_goal=50,
            yards_gained=yards_gained,
            is_touchdown=is_touchdown,
            is_turnover=is_turnover,
            field_goal_made=field_goal_made,
            net_kick_yards=net_kick_yards,
        )
        for down in (1, 2, 3, 4)
        for ytg in range(1, 22)
        for _ in range(copies)
    ]
    return build_index(plays)


def random_play(rng: random.Random, **overrides) -> Play:
    kind = overrides.pop("kind", rng.choice(list(PlayKind)))
    yfog = overrides.pop("yards_from_own_goal", rng.randint(1, 99))
    ytg = overrides.pop("yards_to_go", rng.randint(1, min(25, 100 - yfog)))
    fields = dict(
        kind=kind,
        down=rng.randint(1, 4),
        yards_to_go=ytg,
        yards_from_own_goal=yfog,
        yards_gained=rng.randint(-10, 30),
        field_goal_made=(rng.random() < 0.8) if kind is PlayKind.FIELD_GOAL else None,
        net_kick_yards=rng.randint(20, 55) if kind is PlayKind.PUNT else None,
    )
    fields.update(overrides)
    return Play(**fields)


# Distance keys dense enough that the ladder's relax-by-3 always lands on a
# populated bucket for any reachable state.
SCRIMMAGE_YTG = tuple(range(1, 16)) + (18, 21)
KICK_YTG = (1, 4, 7, 10, 13, 16, 19, 21)


def build_realistic_plays(
    rng: random.Random, teams: tuple[str, ...] = ("AAA", "BBB", "CCC"), season: int = 2018
) -> list[Play]:
    """A league-shaped pool: scrimmage plays everywhere, punts and field goals
    on fourth down, occasional scores and turnovers."""
    plays: list[Play] = []
    for team in teams:
        for down in (1, 2, 3, 4):
            for yfog in range(5, 100, 5):
                for ytg in SCRIMMAGE_YTG:
                    if ytg > 100 - yfog:
                        continue
                    for _ in range(2):
                        is_pass = rng.random() < 0.58
                        gained = (
                            int(rng.gauss(7.0, 9.0)) if is_pass else int(rng.gauss(4.2, 3.5))
                        )
                        gained = max(-10, min(gained, 100 - yfog))
                        turnover = rng.random() < (0.03 if is_pass else 0.012)
                        td = not turnover and gained >= 100 - yfog
                        plays.append(
                            Play(
                                kind=PlayKind.PASS if is_pass else PlayKind.RUN,
                                down=down,
                                yards_to_go=ytg,
                                yards_from_own_goal=yfog,
                                yards_gained=gained if not turnover else min(gained, 0),
                                is_touchdown=td,
                                is_turnover=turnover,
                                team=team,
                                season=season,
                                pass_attempt=is_pass,
                                complete_pass=is_pass and rng.random() < 0.65,
                                passing_yards=gained if is_pass else 0,
                                pass_touchdown=td and is_pass,
                                is_interception=turnover and is_pass,
                            )
                        )
            # fourth-down kicks at every spot and distance
            for yfog in range(5, 100, 5):
                for ytg in KICK_YTG:
                    if ytg > 100 - yfog:
                        continue
                    plays.append(
                        Play(
                            kind=PlayKind.PUNT,
                            down=4,
                            yards_to_go=ytg,
                            yards_from_own_goal=yfog,
                            yards_gained=0,
                            net_kick_yards=int(rng.gauss(40, 6)),
                            team=team,
                            season=season,
                        )
                    )
                    if yfog >= 55:
                        make_prob = min(0.98, 0.15 + (yfog - 55) * 0.02)
                        plays.append(
                            Play(
                                kind=PlayKind.FIELD_GOAL,
                                down=4,
                                yards_to_go=ytg,
                                yards_from_own_goal=yfog,
                                yards_gained=0,
                                field_goal_made=rng.random() < make_prob,
                                team=team,
                                season=season,
                            )
                        )
    return plays


@pytest.fixture(scope="session")
def realistic_pool() -> PlayPool:
    return build_index(build_realistic_plays(random.Random(20180909)))


NFLFASTR_COLUMNS = [
    "season",
    "game_id",
    "posteam",
    "play_type",
    "down",
    "ydstogo",
    "yardline_100",
    "yards_gained",
    "touchdown",
    "interception",
    "fumble_lost",
    "field_goal_result",
    "kick_distance",
    "return_yards",
    "half_seconds_remaining",
    "score_differential",
    "pass_attempt",
    "complete_pass",
    "passing_yards",
    "pass_touchdown",
]


def pbp_row(**overrides) -> dict:
    row = {
        "season": 2018,
        "game_id": "2018_01_AAA_BBB",
        "posteam": "AAA",
        "play_type": "run",
        "down": 1,
        "ydstogo": 10,
        "yardline_100": 75,
        "yards_gained": 4,
        "touchdown": 0,
        "interception": 0,
        "fumble_lost": 0,
        "field_goal_result": None,
        "kick_distance": None,
        "return_yards": 0,
        "half_seconds_remaining": 900,
        "score_differential": 0,
        "pass_attempt": 0,
        "complete_pass": 0,
        "passing_yards": None,
        "pass_touchdown": 0,
    }
    row.update(overrides)
    return row


def write_pbp_csv(path, rows: list[dict]) -> None:
    pd.DataFrame(rows, columns=NFLFASTR_COLUMNS).to_csv(path, index=False)


def synthetic_season_rows(
    rng: random.Random,
    season: int = 2018,
    teams: tuple[str, ...] = ("AAA", "BBB", "CCC", "DDD"),
    drives_per_team: int = 40,
) -> list[dict]:
    """Game-shaped raw rows (ordered drives, occasional scores) so next-score
    EP samples and tercile ratings can be derived from them."""
    rows: list[dict] = []
    # Guarantee each team covers every (down, distance, kind) key: the final
    # ladder rung drops yardline but keeps the original distance, so every
    # bucket a drive can reach needs at least one play somewhere.
    for team in teams:
        for ytg in range(1, 22):
            for yl100, kick in ((60, "punt"), (30, "field_goal")):
                if ytg > yl100:
                    continue
                rows.append(
                    pbp_row(
                        season=season,
                        game_id=f"{season}_90_{team}_KIK",
                        posteam=team,
                        play_type=kick,
                        down=4,
                        ydstogo=ytg,
                        yardline_100=yl100,
                        yards_gained=0,
                        kick_distance=45 if kick == "punt" else None,
                        field_goal_result=(
                            None if kick == "punt" else rng.choice(["made", "missed"])
                        ),
                        half_seconds_remaining=1000 - ytg,
                    )
                )
            for down in (1, 2, 3, 4):
                for play_type in ("run", "pass"):
                    is_pass = play_type == "pass"
                    gained = rng.randint(0, 9) if is_pass else rng.randint(-1, 7)
                    rows.append(
                        pbp_row(
                            season=season,
                            game_id=f"{season}_90_{team}_KIK",
                            posteam=team,
                            play_type=play_type,
                            down=down,
                            ydstogo=ytg,
                            yardline_100=55,
                            yards_gained=gained,
                            pass_attempt=int(is_pass),
                            complete_pass=int(is_pass and gained > 0),
                            passing_yards=gained if is_pass and gained > 0 else None,
                            half_seconds_remaining=900 - ytg,
                        )
                    )
    for g, team in enumerate(teams):
        opponent = teams[(g + 1) % len(teams)]
        game_id = f"{season}_{g:02d}_{team}_{opponent}"
        clock = 1800.0
        for drive in range(drives_per_team):
            posteam = team if drive % 2 == 0 else opponent
            yardline_100 = rng.randint(30, 90)
            down, ytg = 1, 10
            for _ in range(rng.randint(2, 6)):
                clock = clock - rng.randint(15, 35)
                if clock <= 0:
                    clock = 1800.0  # next half
                is_pass = rng.random() < 0.6
                gained = int(rng.gauss(8, 8)) if is_pass else int(rng.gauss(4, 3))
                gained = max(-8, min(gained, yardline_100))
                td = gained >= yardline_100
                complete = is_pass and rng.random() < 0.64
                rows.append(
                    pbp_row(
                        season=season,
                        game_id=game_id,
                        posteam=posteam,
                        play_type="pass" if is_pass else "run",
                        down=down,
                        ydstogo=min(ytg, yardline_100),
                        yardline_100=yardline_100,
                        yards_gained=gained,
                        touchdown=int(td),
                        half_seconds_remaining=clock,
                        score_differential=rng.randint(-21, 21),
                        pass_attempt=int(is_pass),
                        complete_pass=int(complete),
                        passing_yards=gained if complete else None,
                        pass_touchdown=int(td and is_pass),
                    )
                )
                if td:
                    break
                yardline_100 = max(1, yardline_100 - gained)
                if gained >= ytg:
                    down, ytg = 1, 10
                elif down == 4:
                    break
                else:
                    down, ytg = down + 1, ytg - gained
            else:
                down = 4
            if down == 4 and not td:
                clock -= 15
                if yardline_100 <= 45:
                    made = rng.random() < 0.8
                    rows.append(
                        pbp_row(
                            season=season,
                            game_id=game_id,
                            posteam=posteam,
                            play_type="field_goal",
                            down=4,
                            ydstogo=min(10, yardline_100),
                            yardline_100=yardline_100,
                            yards_gained=0,
                            field_goal_result="made" if made else "missed",
                            half_seconds_remaining=clock,
                        )
                    )
                else:
                    rows.append(
                        pbp_row(
                            season=season,
                            game_id=game_id,
                            posteam=posteam,
                            play_type="punt",
                            down=4,
                            ydstogo=min(10, yardline_100),
                            yardline_100=yardline_100,
                            yards_gained=0,
                            kick_distance=rng.randint(35, 55),
                            return_yards=rng.randint(0, 10),
                            half_seconds_remaining=clock,
                        )
                    )
    return rows
