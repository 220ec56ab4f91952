"""INI-style run configuration: filter defaults and team groupings.

Example::

    [filters]
    exclude_final_two_minutes = true
    max_abs_score_differential = 28
    play_kinds = pass, run, punt, field_goal

    [playoff_teams]
    2018 = KC, NE, HOU, BAL, LAC, IND, NO, LA, CHI, DAL, SEA, PHI
    2019 = BAL, KC, NE, HOU, BUF, TEN, SF, GB, NO, PHI, SEA, MIN

Every value can be overridden by the matching CLI flag.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .ingest import FilterConfig
from .plays import PlayKind


@dataclass(frozen=True)
class AppConfig:
    filters: FilterConfig = field(default_factory=FilterConfig)
    playoff_teams: dict[int, frozenset[str]] = field(default_factory=dict)


def _split_list(raw: str) -> list[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


def load_config(path: str | Path) -> AppConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")

    filters = FilterConfig()
    if parser.has_section("filters"):
        section = parser["filters"]
        kwargs = {}
        if "exclude_final_two_minutes" in section:
            kwargs["exclude_final_two_minutes"] = section.getboolean(
                "exclude_final_two_minutes"
            )
        if "max_abs_score_differential" in section:
            kwargs["max_abs_score_differential"] = section.getint(
                "max_abs_score_differential"
            )
        if "seasons" in section:
            kwargs["seasons"] = frozenset(
                int(s) for s in _split_list(section["seasons"])
            )
        if "play_kinds" in section:
            try:
                kwargs["play_kinds"] = frozenset(
                    PlayKind(k) for k in _split_list(section["play_kinds"])
                )
            except ValueError as err:
                raise ConfigError(f"bad play kind in {path}: {err}") from err
        filters = FilterConfig(**kwargs)

    playoff: dict[int, frozenset[str]] = {}
    if parser.has_section("playoff_teams"):
        for key, raw in parser["playoff_teams"].items():
            try:
                season = int(key)
            except ValueError as err:
                raise ConfigError(
                    f"playoff_teams keys must be seasons, got {key!r}"
                ) from err
            playoff[season] = frozenset(_split_list(raw))
    return AppConfig(filters=filters, playoff_teams=playoff)
