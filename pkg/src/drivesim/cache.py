"""Compact columnar cache for prepped play pools.

Binary layout (all integers little-endian):

    magic    8 bytes  b"PBPCPOOL"
    version  u32
    n_plays  u32
    n_teams  u16
    teams    n_teams x (u8 length + utf-8 bytes)
    columns  kind u8 | down u8 | ytg u8 | yfog u8 | yards_gained i16 |
             flags u16 | net_kick_yards i16 | passing_yards i16 |
             season u16 | team u16   (each a contiguous n_plays array)

Prep once per season, then reload pools in milliseconds.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import CacheFormatError
from .plays import Play, PlayKind
from .sampling import PlayPool, build_index

MAGIC = b"PBPCPOOL"
VERSION = 1

_KINDS = (PlayKind.PASS, PlayKind.RUN, PlayKind.PUNT, PlayKind.FIELD_GOAL)
_KIND_CODE = {k: i for i, k in enumerate(_KINDS)}

F_TOUCHDOWN = 1 << 0
F_TURNOVER = 1 << 1
F_FG_PRESENT = 1 << 2
F_FG_MADE = 1 << 3
F_NET_PRESENT = 1 << 4
F_PASS_ATTEMPT = 1 << 5
F_COMPLETE = 1 << 6
F_PASS_TD = 1 << 7
F_INTERCEPTION = 1 << 8

_COLUMN_DTYPES = (
    ("kind", "<u1"),
    ("down", "<u1"),
    ("ytg", "<u1"),
    ("yfog", "<u1"),
    ("yards_gained", "<i2"),
    ("flags", "<u2"),
    ("net_kick_yards", "<i2"),
    ("passing_yards", "<i2"),
    ("season", "<u2"),
    ("team", "<u2"),
)


def _play_flags(p: Play) -> int:
    flags = 0
    if p.is_touchdown:
        flags |= F_TOUCHDOWN
    if p.is_turnover:
        flags |= F_TURNOVER
    if p.field_goal_made is not None:
        flags |= F_FG_PRESENT
        if p.field_goal_made:
            flags |= F_FG_MADE
    if p.net_kick_yards is not None:
        flags |= F_NET_PRESENT
    if p.pass_attempt:
        flags |= F_PASS_ATTEMPT
    if p.complete_pass:
        flags |= F_COMPLETE
    if p.pass_touchdown:
        flags |= F_PASS_TD
    if p.is_interception:
        flags |= F_INTERCEPTION
    return flags


def save_pool(pool: PlayPool, path: str | Path) -> None:
    """Serialize a pool's plays; the index is rebuilt on load."""
    plays = pool.plays
    teams = sorted({p.team for p in plays})
    team_code = {t: i for i, t in enumerate(teams)}
    if len(teams) > 0xFFFF:
        raise CacheFormatError("too many distinct teams for the cache format")

    columns = {
        "kind": [_KIND_CODE[p.kind] for p in plays],
        "down": [p.down for p in plays],
        "ytg": [p.yards_to_go for p in plays],
        "yfog": [p.yards_from_own_goal for p in plays],
        "yards_gained": [p.yards_gained for p in plays],
        "flags": [_play_flags(p) for p in plays],
        "net_kick_yards": [
            0 if p.net_kick_yards is None else p.net_kick_yards for p in plays
        ],
        "passing_yards": [p.passing_yards for p in plays],
        "season": [p.season for p in plays],
        "team": [team_code[p.team] for p in plays],
    }
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIH", VERSION, len(plays), len(teams)))
        for team in teams:
            raw = team.encode("utf-8")
            if len(raw) > 0xFF:
                raise CacheFormatError(f"team code too long: {team!r}")
            fh.write(bytes([len(raw)]))
            fh.write(raw)
        for name, dtype in _COLUMN_DTYPES:
            fh.write(np.asarray(columns[name], dtype=dtype).tobytes())


def load_pool(path: str | Path) -> PlayPool:
    """Read a cache file back into an indexed pool."""
    blob = Path(path).read_bytes()
    if len(blob) < len(MAGIC) + 10 or blob[: len(MAGIC)] != MAGIC:
        raise CacheFormatError(f"{path} is not a play-pool cache (bad magic)")
    offset = len(MAGIC)

    def take(n: int) -> bytes:
        nonlocal offset
        if offset + n > len(blob):
            raise CacheFormatError(f"{path} is truncated")
        out = blob[offset : offset + n]
        offset += n
        return out

    version = int(np.frombuffer(take(4), dtype="<u4")[0])
    if version != VERSION:
        raise CacheFormatError(
            f"{path} is cache version {version}; this build reads version {VERSION}"
        )
    n_plays = int(np.frombuffer(take(4), dtype="<u4")[0])
    n_teams = int(np.frombuffer(take(2), dtype="<u2")[0])
    teams = []
    for _ in range(n_teams):
        length = take(1)[0]
        teams.append(take(length).decode("utf-8"))

    cols = {}
    for name, dtype in _COLUMN_DTYPES:
        width = np.dtype(dtype).itemsize
        cols[name] = np.frombuffer(take(width * n_plays), dtype=dtype)
    if offset != len(blob):
        raise CacheFormatError(f"{path} has {len(blob) - offset} trailing bytes")

    plays = []
    for i in range(n_plays):
        flags = int(cols["flags"][i])
        team_idx = int(cols["team"][i])
        if team_idx >= len(teams):
            raise CacheFormatError(f"{path} references an unknown team index")
        plays.append(
            Play(
                kind=_KINDS[int(cols["kind"][i])],
                down=int(cols["down"][i]),
                yards_to_go=int(cols["ytg"][i]),
                yards_from_own_goal=int(cols["yfog"][i]),
                yards_gained=int(cols["yards_gained"][i]),
                is_touchdown=bool(flags & F_TOUCHDOWN),
                is_turnover=bool(flags & F_TURNOVER),
                field_goal_made=(
                    bool(flags & F_FG_MADE) if flags & F_FG_PRESENT else None
                ),
                net_kick_yards=(
                    int(cols["net_kick_yards"][i]) if flags & F_NET_PRESENT else None
                ),
                team=teams[team_idx],
                season=int(cols["season"][i]),
                pass_attempt=bool(flags & F_PASS_ATTEMPT),
                complete_pass=bool(flags & F_COMPLETE),
                passing_yards=int(cols["passing_yards"][i]),
                pass_touchdown=bool(flags & F_PASS_TD),
                is_interception=bool(flags & F_INTERCEPTION),
            )
        )
    return build_index(plays)
