"""Play-by-play ingestion: download, parse, filter, and subset into pools.

Consumes per-season CSVs in the nflfastR column layout (an alias pass
normalizes nflscrapR-style files), applies the analysis filters, and builds
indexed play pools plus the team-quality subsets the pass/run study uses.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import pandas as pd
import requests

from .errors import (
    DataReadError,
    DownloadError,
    PoolEmptyError,
    SchemaError,
    ValidationError,
)
from .plays import ALL_KINDS, Play, PlayKind
from .sampling import PlayPool, build_index

log = logging.getLogger(__name__)

PLAY_TYPE_TOKENS = {
    "pass": PlayKind.PASS,
    "run": PlayKind.RUN,
    "punt": PlayKind.PUNT,
    "field_goal": PlayKind.FIELD_GOAL,
}

REQUIRED_COLUMNS = (
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
    "pass_touchdown",
)

# Columns we can reconstruct when a source omits them: season from the
# game_id prefix, passing yards from completed-pass yardage.
DERIVED_COLUMNS = ("season", "passing_yards")

# nflscrapR-era names normalized to the nflfastR layout before validation.
COLUMN_ALIASES = {
    "GameID": "game_id",
    "Passer_ID": None,  # ignored
}


@dataclass(frozen=True, slots=True)
class RawPlayRow:
    """One parsed play-by-play row, pre-filtering."""

    season: int
    game_id: str
    posteam: str
    play_type: str
    down: int | None
    ydstogo: int
    yardline_100: int
    yards_gained: int
    touchdown: bool
    interception: bool
    fumble_lost: bool
    field_goal_result: str | None
    kick_distance: int | None
    return_yards: int
    half_seconds_remaining: float
    score_differential: int
    pass_attempt: bool
    complete_pass: bool
    passing_yards: int
    pass_touchdown: bool


@dataclass(frozen=True, slots=True)
class ParseReport:
    rows_read: int
    rows_kept: int
    dropped: dict[str, int]


@dataclass(frozen=True)
class FilterConfig:
    """Pool-construction filters.

    Defaults mirror the analysis setup: garbage time excluded by keeping only
    plays before the final two minutes of a half and with the score within 28
    points. An empty ``seasons`` set keeps every season present.
    """

    exclude_final_two_minutes: bool = True
    max_abs_score_differential: int = 28
    seasons: frozenset[int] = frozenset()
    play_kinds: frozenset[PlayKind] = ALL_KINDS

    def __post_init__(self) -> None:
        if self.max_abs_score_differential < 0:
            raise ValidationError("max_abs_score_differential must be >= 0")
        if not self.play_kinds:
            raise ValidationError("play_kinds must be non-empty")


FINAL_TWO_MINUTES_SECONDS = 120


# --- download ----------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class DataSource:
    base_url: str
    filename: str
    seasons: range


SOURCES = {
    "nflfastr": DataSource(
        base_url="https://github.com/nflverse/nflverse-data/releases/download/pbp",
        filename="play_by_play_{season}.csv.gz",
        seasons=range(1999, 2026),
    ),
    "nflscrapr": DataSource(
        base_url=(
            "https://raw.githubusercontent.com/ryurko/nflscrapR-data/master/"
            "play_by_play_data/regular_season"
        ),
        filename="reg_pbp_{season}.csv",
        seasons=range(2009, 2020),
    ),
}

DOWNLOAD_CHUNK_BYTES = 1 << 20


def download_pbp(
    seasons,
    source: str = "nflfastr",
    destination: str | Path = ".",
    *,
    force: bool = False,
    base_url: str | None = None,
    session=None,
    timeout: float = 60.0,
) -> list[Path]:
    """Fetch per-season play-by-play CSVs, skipping files already cached.

    Partial downloads are written to a .part file and discarded on failure,
    so a cached file is always complete.
    """
    if source not in SOURCES:
        raise ValidationError(f"unknown source {source!r}; expected one of {sorted(SOURCES)}")
    spec = SOURCES[source]
    seasons = sorted(set(int(s) for s in seasons))
    if not seasons:
        raise ValidationError("no seasons requested")
    bad = [s for s in seasons if s not in spec.seasons]
    if bad:
        raise ValidationError(
            f"season(s) {bad} outside {source}'s supported range "
            f"{spec.seasons.start}-{spec.seasons.stop - 1}"
        )
    destination = Path(destination)
    destination.mkdir(parents=True, exist_ok=True)
    http = session if session is not None else requests
    base = (base_url or spec.base_url).rstrip("/")

    paths: list[Path] = []
    for season in seasons:
        name = spec.filename.format(season=season)
        path = destination / name
        if path.exists() and not force:
            log.info("cached: %s", path)
            paths.append(path)
            continue
        url = f"{base}/{name}"
        part = path.with_name(name + ".part")
        try:
            response = http.get(url, stream=True, timeout=timeout)
        except requests.RequestException as err:
            raise DownloadError(
                f"download failed for {url}: {err}", url=url, retryable=True
            ) from err
        try:
            status = response.status_code
            if status >= 400:
                raise DownloadError(
                    f"HTTP {status} fetching {url}",
                    url=url,
                    retryable=status >= 500,
                )
            with open(part, "wb") as fh:
                for chunk in response.iter_content(chunk_size=DOWNLOAD_CHUNK_BYTES):
                    fh.write(chunk)
            part.replace(path)
        except DownloadError:
            part.unlink(missing_ok=True)
            raise
        except Exception as err:
            part.unlink(missing_ok=True)
            raise DownloadError(
                f"download interrupted for {url}: {err}", url=url, retryable=True
            ) from err
        finally:
            response.close()
        log.info("downloaded: %s", path)
        paths.append(path)
    return paths


# --- parse -------------------------------------------------------------------


def _season_from_game_id(game_id: str) -> int | None:
    head = str(game_id)[:4]
    return int(head) if head.isdigit() else None


def _is_na(value) -> bool:
    return value is None or (isinstance(value, float) and math.isnan(value))


def _flag(value) -> bool:
    return not _is_na(value) and float(value) != 0.0


def parse_pbp(
    file: str | Path, season_hint: int | None = None
) -> tuple[list[RawPlayRow], ParseReport]:
    """Parse one play-by-play CSV into raw rows plus a kept/dropped report.

    Only scrimmage-down play types (pass, run, punt, field goal) are kept;
    rows missing fields their play type requires are dropped and counted by
    reason. ``season_hint`` covers files without a season column whose game
    ids do not start with the year.
    """
    file = Path(file)
    try:
        header = pd.read_csv(file, nrows=0)
    except OSError as err:
        raise DataReadError(f"cannot read {file}: {err}") from err
    rename = {
        src: dst for src, dst in COLUMN_ALIASES.items() if dst and src in header.columns
    }
    have = {rename.get(c, c) for c in header.columns}
    missing = [c for c in REQUIRED_COLUMNS if c not in have]
    if missing:
        raise SchemaError(f"{file} is missing required column(s): {', '.join(missing)}")
    usecols = [
        c
        for c in header.columns
        if rename.get(c, c) in REQUIRED_COLUMNS or rename.get(c, c) in DERIVED_COLUMNS
    ]
    df = pd.read_csv(file, usecols=usecols, low_memory=False)
    if rename:
        df = df.rename(columns=rename)
    has_season = "season" in df.columns
    has_passing_yards = "passing_yards" in df.columns

    rows: list[RawPlayRow] = []
    dropped: Counter[str] = Counter()
    for t in df.itertuples(index=False):
        play_type = getattr(t, "play_type")
        if not isinstance(play_type, str) or play_type not in PLAY_TYPE_TOKENS:
            dropped["unsupported_play_type"] += 1
            continue
        posteam = getattr(t, "posteam")
        if not isinstance(posteam, str) or not posteam:
            dropped["missing_team"] += 1
            continue
        values = {}
        ok = True
        for col in (
            "ydstogo",
            "yardline_100",
            "yards_gained",
            "half_seconds_remaining",
            "score_differential",
        ):
            v = getattr(t, col)
            if _is_na(v):
                dropped[f"missing_{col}"] += 1
                ok = False
                break
            values[col] = v
        if not ok:
            continue
        yardline_100 = int(values["yardline_100"])
        if not 1 <= yardline_100 <= 99:
            dropped["yardline_out_of_range"] += 1
            continue
        down_raw = getattr(t, "down")
        if _is_na(down_raw):
            down = None
        else:
            down = int(down_raw)
            if not 1 <= down <= 4:
                dropped["down_out_of_range"] += 1
                continue
        fg_result = getattr(t, "field_goal_result")
        if play_type == "field_goal":
            if not isinstance(fg_result, str) or not fg_result:
                dropped["missing_field_goal_result"] += 1
                continue
        else:
            fg_result = None
        kick_distance = getattr(t, "kick_distance")
        if play_type == "punt":
            if _is_na(kick_distance):
                dropped["missing_kick_distance"] += 1
                continue
            kick_distance = int(kick_distance)
        else:
            kick_distance = None
        if has_season and not _is_na(getattr(t, "season")):
            season = int(getattr(t, "season"))
        else:
            season = season_hint or _season_from_game_id(getattr(t, "game_id"))
            if season is None:
                dropped["missing_season"] += 1
                continue
        return_yards = getattr(t, "return_yards")
        return_yards = 0 if _is_na(return_yards) else int(return_yards)
        complete = _flag(getattr(t, "complete_pass"))
        if has_passing_yards and not _is_na(getattr(t, "passing_yards")):
            passing_yards = int(getattr(t, "passing_yards"))
        else:
            passing_yards = int(values["yards_gained"]) if complete else 0

        rows.append(
            RawPlayRow(
                season=season,
                game_id=str(getattr(t, "game_id")),
                posteam=posteam,
                play_type=play_type,
                down=down,
                ydstogo=int(values["ydstogo"]),
                yardline_100=yardline_100,
                yards_gained=int(values["yards_gained"]),
                touchdown=_flag(getattr(t, "touchdown")),
                interception=_flag(getattr(t, "interception")),
                fumble_lost=_flag(getattr(t, "fumble_lost")),
                field_goal_result=fg_result,
                kick_distance=kick_distance,
                return_yards=return_yards,
                half_seconds_remaining=float(values["half_seconds_remaining"]),
                score_differential=int(values["score_differential"]),
                pass_attempt=_flag(getattr(t, "pass_attempt")),
                complete_pass=complete,
                passing_yards=passing_yards,
                pass_touchdown=_flag(getattr(t, "pass_touchdown")),
            )
        )
    report = ParseReport(
        rows_read=len(df), rows_kept=len(rows), dropped=dict(dropped)
    )
    log.info(
        "%s: read %d rows, kept %d (%s)",
        file.name,
        report.rows_read,
        report.rows_kept,
        dict(dropped) or "nothing dropped",
    )
    return rows, report


# --- prep --------------------------------------------------------------------


def row_passes_filters(row: RawPlayRow, filters: FilterConfig) -> bool:
    """Whether a parsed row survives the pool filters (down present, situation
    valid, clock and score-margin cuts)."""
    kind = PLAY_TYPE_TOKENS.get(row.play_type)
    if kind is None or kind not in filters.play_kinds:
        return False
    if row.down is None:
        return False
    if filters.seasons and row.season not in filters.seasons:
        return False
    if (
        filters.exclude_final_two_minutes
        and row.half_seconds_remaining <= FINAL_TWO_MINUTES_SECONDS
    ):
        return False
    if abs(row.score_differential) > filters.max_abs_score_differential:
        return False
    if not 1 <= row.yardline_100 <= 99:
        return False
    # yards to go can never exceed the distance to the goal line
    if row.ydstogo < 1 or row.ydstogo > row.yardline_100:
        return False
    return True


def _row_to_play(row: RawPlayRow) -> Play:
    kind = PLAY_TYPE_TOKENS[row.play_type]
    turnover = row.interception or row.fumble_lost
    # Touchdowns by the defense (pick-sixes, return scores) must not count
    # for the offense; the raw flag covers any touchdown on the play.
    offensive_td = (
        row.touchdown and not turnover and kind in (PlayKind.PASS, PlayKind.RUN)
    )
    return Play(
        kind=kind,
        down=row.down,
        yards_to_go=row.ydstogo,
        yards_from_own_goal=100 - row.yardline_100,
        yards_gained=row.yards_gained,
        is_touchdown=offensive_td,
        is_turnover=turnover,
        field_goal_made=(
            (row.field_goal_result == "made")
            if kind is PlayKind.FIELD_GOAL
            else None
        ),
        net_kick_yards=(
            row.kick_distance - row.return_yards if kind is PlayKind.PUNT else None
        ),
        team=row.posteam,
        season=row.season,
        pass_attempt=row.pass_attempt,
        complete_pass=row.complete_pass,
        passing_yards=row.passing_yards,
        pass_touchdown=row.pass_touchdown,
        is_interception=row.interception,
    )


def prep_plays(rows, filters: FilterConfig | None = None) -> PlayPool:
    """Filter parsed rows down to simulation-ready plays and index them."""
    filters = filters or FilterConfig()
    plays = [_row_to_play(r) for r in rows if row_passes_filters(r, filters)]
    if not plays:
        raise PoolEmptyError("no plays survive the configured filters")
    log.info("prepped %d plays from %d rows", len(plays), len(rows))
    return build_index(plays)


# --- subsets -----------------------------------------------------------------


def subset_by_teams(pool: PlayPool, teams) -> PlayPool:
    """Pool restricted to the given team codes; the input is untouched."""
    teams = set(teams)
    if not teams:
        raise ValidationError("teams must be non-empty")
    plays = [p for p in pool.plays if p.team in teams]
    if not plays:
        raise PoolEmptyError(f"no plays for team(s) {sorted(teams)}")
    return build_index(plays)


def _subset_by_team_seasons(pool: PlayPool, units) -> PlayPool:
    units = set(units)
    plays = [p for p in pool.plays if (p.team, p.season) in units]
    if not plays:
        raise PoolEmptyError("no plays for the requested team-seasons")
    return build_index(plays)


def split_by_playoff(
    pool: PlayPool, playoff_teams: dict[int, frozenset[str]]
) -> dict[str, PlayPool]:
    """Split a pool into playoff and non-playoff team-season pools."""
    units = pool.team_seasons()
    playoff_units = {
        (team, season)
        for team, season in units
        if team in playoff_teams.get(season, frozenset())
    }
    if not playoff_units:
        raise ValidationError("no pool team-season matches the playoff list")
    other = units - playoff_units
    if not other:
        raise ValidationError("every pool team-season is a playoff team")
    return {
        "playoff": _subset_by_team_seasons(pool, playoff_units),
        "non_playoff": _subset_by_team_seasons(pool, other),
    }


# --- passer-rating terciles ---------------------------------------------------


RATING_COMPONENT_CAP = 2.375


def passer_rating(
    attempts: int, completions: int, yards: int, touchdowns: int, interceptions: int
) -> float:
    """Standard NFL passer rating from team-season passing aggregates."""
    if attempts <= 0:
        raise ValidationError("passer rating needs at least one attempt")

    def clamp(x: float) -> float:
        return max(0.0, min(RATING_COMPONENT_CAP, x))

    a = clamp((completions / attempts - 0.3) * 5.0)
    b = clamp((yards / attempts - 3.0) * 0.25)
    c = clamp(touchdowns / attempts * 20.0)
    d = clamp(RATING_COMPONENT_CAP - interceptions / attempts * 25.0)
    return (a + b + c + d) / 6.0 * 100.0


def team_season_passer_ratings(pool: PlayPool) -> dict[tuple[str, int], float]:
    """Aggregate passer rating per (team, season) over the pool's pass plays."""
    stats: dict[tuple[str, int], list[int]] = {}
    for p in pool.plays:
        agg = stats.setdefault((p.team, p.season), [0, 0, 0, 0, 0])
        if p.kind is PlayKind.PASS:
            agg[0] += int(p.pass_attempt)
            agg[1] += int(p.complete_pass)
            agg[2] += p.passing_yards if p.complete_pass else 0
            agg[3] += int(p.pass_touchdown)
            agg[4] += int(p.is_interception)
    ratings = {}
    for unit, (att, comp, yards, tds, ints) in stats.items():
        if att == 0:
            raise ValidationError(
                f"team-season {unit} has no pass attempts; cannot rate it"
            )
        ratings[unit] = passer_rating(att, comp, yards, tds, ints)
    return ratings


@dataclass(frozen=True, slots=True)
class TercilePools:
    high: PlayPool
    medium: PlayPool
    low: PlayPool


def passer_rating_terciles(pool: PlayPool) -> TercilePools:
    """Split the pool into high/medium/low team passer-rating terciles.

    Team-seasons are ranked by rating (ties broken by team code, then season,
    for determinism) and split so any remainder shorts the low tercile; each
    output pool carries all plays of its teams, not just the passes.
    """
    ratings = team_season_passer_ratings(pool)
    if len(ratings) < 3:
        raise ValidationError(
            f"tercile split needs at least 3 team-seasons, got {len(ratings)}"
        )
    ranked = sorted(ratings, key=lambda u: (-ratings[u], u[0], u[1]))
    n = len(ranked)
    n_high = math.ceil(n / 3)
    n_mid = math.ceil((n - n_high) / 2)
    high = ranked[:n_high]
    medium = ranked[n_high : n_high + n_mid]
    low = ranked[n_high + n_mid :]
    return TercilePools(
        high=_subset_by_team_seasons(pool, high),
        medium=_subset_by_team_seasons(pool, medium),
        low=_subset_by_team_seasons(pool, low),
    )


# --- next-score samples for the EP fallback -----------------------------------


def build_ep_samples(rows) -> list[tuple[int, float]]:
    """(yardline, signed next-score points) samples for the EP estimator.

    For every scrimmage situation, the value is the points of the next score
    in the same half (touchdown 7, field goal 3), positive when the team
    possessing at that situation is the one that scores, negative otherwise,
    zero when the half ends scoreless. Halves are cut where the play clock
    resets upward; safeties are not derivable from the parsed columns and are
    ignored.
    """
    games: dict[str, list[RawPlayRow]] = {}
    for row in rows:
        games.setdefault(row.game_id, []).append(row)

    samples: list[tuple[int, float]] = []
    for game_rows in games.values():
        half: list[RawPlayRow] = []
        prev_clock: float | None = None
        for row in game_rows:
            if prev_clock is not None and row.half_seconds_remaining > prev_clock:
                samples.extend(_half_samples(half))
                half = []
            half.append(row)
            prev_clock = row.half_seconds_remaining
        samples.extend(_half_samples(half))
    return samples


def _half_samples(half: list[RawPlayRow]) -> list[tuple[int, float]]:
    # next_event[i] = (scoring row's posteam, offensive?, points) at or after i
    next_event: list[tuple[str, bool, float] | None] = [None] * len(half)
    current: tuple[str, bool, float] | None = None
    for i in range(len(half) - 1, -1, -1):
        row = half[i]
        if row.touchdown:
            offensive = (
                not (row.interception or row.fumble_lost)
                and row.play_type in ("pass", "run")
            )
            current = (row.posteam, offensive, 7.0)
        elif row.play_type == "field_goal" and row.field_goal_result == "made":
            current = (row.posteam, True, 3.0)
        next_event[i] = current

    out = []
    for i, row in enumerate(half):
        if row.down is None or not 1 <= row.yardline_100 <= 99:
            continue
        event = next_event[i]
        if event is None:
            out.append((100 - row.yardline_100, 0.0))
            continue
        event_posteam, offensive, points = event
        scorer_is_me = (row.posteam == event_posteam) == offensive
        out.append((100 - row.yardline_100, points if scorer_is_me else -points))
    return out
