"""Situation-conditioned uniform sampling over an indexed play pool.

The pool indexes plays by (down, distance bucket, yardline). Queries walk a
fallback ladder that widens the yardline window, then relaxes the distance,
then drops yardline conditioning entirely, returning the first non-empty
candidate set so sparse situations still sample something sensible.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Protocol, Sequence

from .errors import NoEligiblePlaysError, PoolEmptyError, ValidationError
from .plays import ALL_KINDS, GameState, Play, PlayKind

# Distances of 21+ yards are rare; they share one index key.
LONG_YTG_BUCKET = 21

# Last-resort net when a hand-built punt play carries no kick yardage and the
# pool has no punts to average.
DEFAULT_PUNT_NET = 40.0

WINDOW_STEP = 5


def ytg_bucket(yards_to_go: int) -> int:
    return min(yards_to_go, LONG_YTG_BUCKET)


@dataclass(frozen=True, slots=True)
class SamplerConfig:
    """Widening parameters for the eligibility ladder.

    ``window_yards_from_own_goal`` is the base +/- yardline window; rung 1
    grows it in 5-yard steps up to ``max_window``; rung 2 relaxes the
    distance to go one yard at a time up to ``max_ytg_relaxation``.
    """

    window_yards_from_own_goal: int = 5
    max_window: int = 15
    max_ytg_relaxation: int = 3

    def __post_init__(self) -> None:
        if self.window_yards_from_own_goal < 0:
            raise ValidationError("window_yards_from_own_goal must be >= 0")
        if self.max_window < self.window_yards_from_own_goal:
            raise ValidationError("max_window must be >= window_yards_from_own_goal")
        if self.max_ytg_relaxation < 0:
            raise ValidationError("max_ytg_relaxation must be >= 0")


@dataclass(frozen=True, slots=True)
class SamplingDirective:
    """What the sampler may draw: allowed play kinds and the downs to pool."""

    kinds: frozenset[PlayKind]
    down_pool: frozenset[int]


class StrategyLike(Protocol):
    """Anything that can turn a game situation into a sampling directive."""

    def decide(self, state: GameState, rng: random.Random) -> SamplingDirective: ...


IndexKey = tuple[int, int, int]  # (down, ytg bucket, yards_from_own_goal)
KindIndexKey = tuple[PlayKind, int, int, int]


@dataclass(frozen=True)
class PlayPool:
    """Immutable, indexed collection of plays. Build via :func:`build_index`."""

    plays: tuple[Play, ...]
    index: dict[IndexKey, tuple[int, ...]] = field(compare=False, repr=False)
    kind_index: dict[KindIndexKey, tuple[int, ...]] = field(compare=False, repr=False)
    _eligible_cache: dict = field(
        default_factory=dict, compare=False, repr=False, init=False
    )

    def __len__(self) -> int:
        return len(self.plays)

    def team_seasons(self) -> set[tuple[str, int]]:
        return {(p.team, p.season) for p in self.plays}

    def teams(self) -> set[str]:
        return {p.team for p in self.plays}

    @cached_property
    def _punt_net_by_decade(self) -> dict[int, float]:
        sums: dict[int, list[float]] = {}
        for p in self.plays:
            if p.kind is PlayKind.PUNT and p.net_kick_yards is not None:
                sums.setdefault(p.yards_from_own_goal // 10, []).append(
                    p.net_kick_yards
                )
        return {b: sum(v) / len(v) for b, v in sums.items()}

    def mean_punt_net(self, yards_from_own_goal: int) -> float:
        """Average net punt yards near a yardline (10-yard buckets).

        Falls back to the nearest populated bucket, then to a league-typical
        constant when the pool holds no punts at all.
        """
        by_bucket = self._punt_net_by_decade
        if not by_bucket:
            return DEFAULT_PUNT_NET
        bucket = yards_from_own_goal // 10
        if bucket in by_bucket:
            return by_bucket[bucket]
        nearest = min(by_bucket, key=lambda b: (abs(b - bucket), b))
        return by_bucket[nearest]


def build_index(plays: Sequence[Play]) -> PlayPool:
    """Index plays by situation for O(1) lookups. Multiset semantics: duplicate
    plays occupy distinct slots and are each samplable."""
    if not plays:
        raise PoolEmptyError("cannot build a pool from zero plays")
    index: dict[IndexKey, list[int]] = {}
    kind_index: dict[KindIndexKey, list[int]] = {}
    for i, play in enumerate(plays):
        key = (play.down, ytg_bucket(play.yards_to_go), play.yards_from_own_goal)
        index.setdefault(key, []).append(i)
        kind_index.setdefault((play.kind,) + key, []).append(i)
    return PlayPool(
        plays=tuple(plays),
        index={k: tuple(v) for k, v in index.items()},
        kind_index={k: tuple(v) for k, v in kind_index.items()},
    )


def _gather(
    pool: PlayPool,
    downs: tuple[int, ...],
    bucket: int,
    yl_lo: int,
    yl_hi: int,
    kinds: frozenset[PlayKind],
) -> list[int]:
    out: list[int] = []
    use_full_index = kinds >= ALL_KINDS
    kind_order = sorted(kinds, key=lambda k: k.value)
    for down in downs:
        for yl in range(max(1, yl_lo), min(99, yl_hi) + 1):
            if use_full_index:
                out.extend(pool.index.get((down, bucket, yl), ()))
            else:
                for kind in kind_order:
                    out.extend(pool.kind_index.get((kind, down, bucket, yl), ()))
    return out


def eligible_set(
    pool: PlayPool,
    state: GameState,
    kinds: frozenset[PlayKind] = ALL_KINDS,
    cfg: SamplerConfig | None = None,
    down_pool: Iterable[int] | None = None,
) -> tuple[int, ...]:
    """Play indices matching the situation, from the first non-empty ladder rung.

    Ladder: exact distance with the base yardline window; widen the window in
    5-yard steps to ``max_window``; relax distance one yard at a time (re-running
    the window sweep at each relaxation); finally drop yardline conditioning.
    Raises NoEligiblePlaysError when even that is empty.
    """
    cfg = cfg or SamplerConfig()
    downs = tuple(sorted(down_pool)) if down_pool is not None else (state.down,)
    kinds = frozenset(kinds)
    key = (
        downs,
        state.yards_to_go,
        state.yards_from_own_goal,
        tuple(sorted(k.value for k in kinds)),
        cfg.window_yards_from_own_goal,
        cfg.max_window,
        cfg.max_ytg_relaxation,
    )
    cached = pool._eligible_cache.get(key)
    if cached is not None:
        return cached

    windows = range(
        cfg.window_yards_from_own_goal, cfg.max_window + 1, WINDOW_STEP
    )
    yl = state.yards_from_own_goal
    found: list[int] = []
    for relax in range(cfg.max_ytg_relaxation + 1):
        ytg = state.yards_to_go - relax
        if ytg < 1:
            break
        bucket = ytg_bucket(ytg)
        for window in windows:
            found = _gather(pool, downs, bucket, yl - window, yl + window, kinds)
            if found:
                break
        if found:
            break
    if not found:
        # Rung 3: any yardline, original distance.
        found = _gather(pool, downs, ytg_bucket(state.yards_to_go), 1, 99, kinds)
    if not found:
        raise NoEligiblePlaysError(
            f"no plays for downs {list(downs)}, {state.yards_to_go} to go, "
            f"yardline {yl}, kinds {sorted(k.value for k in kinds)}",
            state=state,
            kinds=kinds,
            down_pool=frozenset(downs),
        )
    result = tuple(sorted(found))
    pool._eligible_cache[key] = result
    return result


def sample_play(
    pool: PlayPool,
    strategy: StrategyLike,
    state: GameState,
    cfg: SamplerConfig | None = None,
    rng: random.Random | None = None,
) -> Play:
    """Draw one play uniformly from the eligible set under the strategy.

    Sampling is with replacement across calls; a fixed seed reproduces the
    exact draw sequence.
    """
    rng = rng if rng is not None else random.Random()
    directive = strategy.decide(state, rng)
    eligible = eligible_set(pool, state, directive.kinds, cfg, directive.down_pool)
    return pool.plays[eligible[rng.randrange(len(eligible))]]
