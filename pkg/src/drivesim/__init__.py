"""Evaluate NFL in-game strategies by resampling historical play-by-play data.

Plays matching a (down, distance, yardline) situation are drawn uniformly
under a chosen strategy, chained through a drive state machine, and the
resulting drive outcomes aggregated into scoring statistics.
"""

from .engine import (
    DriveOutcome,
    DriveRecord,
    SimConfig,
    down_distance_updater,
    sample_drives,
    simulate_drive,
)
from .errors import DriveSimError
from .ingest import (
    FilterConfig,
    ParseReport,
    RawPlayRow,
    download_pbp,
    parse_pbp,
    passer_rating_terciles,
    prep_plays,
    subset_by_teams,
)
from .plays import GameState, Play, PlayKind
from .report import StrategySummary, summarize, sweep_pass_probability, sweep_yardage
from .sampling import (
    PlayPool,
    SamplerConfig,
    SamplingDirective,
    build_index,
    eligible_set,
    sample_play,
)
from .strategies import (
    EPModel,
    FourthDownVariant,
    Strategy,
    StrategySpec,
    decide,
    ev_fourth_down,
    fit_ep_model,
)

__version__ = "0.1.0"

__all__ = [
    "DriveOutcome",
    "DriveRecord",
    "DriveSimError",
    "EPModel",
    "FilterConfig",
    "FourthDownVariant",
    "GameState",
    "ParseReport",
    "Play",
    "PlayKind",
    "PlayPool",
    "RawPlayRow",
    "SamplerConfig",
    "SamplingDirective",
    "SimConfig",
    "Strategy",
    "StrategySpec",
    "StrategySummary",
    "build_index",
    "decide",
    "down_distance_updater",
    "download_pbp",
    "eligible_set",
    "ev_fourth_down",
    "fit_ep_model",
    "parse_pbp",
    "passer_rating_terciles",
    "prep_plays",
    "sample_drives",
    "sample_play",
    "simulate_drive",
    "subset_by_teams",
    "summarize",
    "sweep_pass_probability",
    "sweep_yardage",
    "__version__",
]
