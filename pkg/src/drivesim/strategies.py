"""Offensive strategies: turn a game situation into sampling constraints.

A strategy decides, per play, which play kinds may be drawn and which downs
to pool the sample over. Five fourth-down variants and a pass-proportion
strategy are provided, plus the expected-points machinery the analytic
fourth-down variant needs.
"""

from __future__ import annotations

import csv
import logging
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import ConfigError, FitError, ValidationError
from .plays import ALL_KINDS, GameState, PlayKind
from .sampling import LONG_YTG_BUCKET, PlayPool, SamplingDirective, ytg_bucket

log = logging.getLogger(__name__)

GO_KINDS = frozenset({PlayKind.PASS, PlayKind.RUN})
KICK_KINDS = frozenset({PlayKind.PUNT, PlayKind.FIELD_GOAL})

FG_POINTS = 3.0
TOUCHDOWN_EP = 7.0
TOUCHBACK_YFOG = 25  # receiving team's field position after a punt touchback
MISSED_FG_SETBACK = 8  # opponent takes over about this far behind the scrimmage


class StrategyFamily(str, Enum):
    EMPIRICAL = "empirical"
    FOURTH_DOWN = "fourth_down"
    PASS_RUSH = "pass_rush"


class FourthDownVariant(str, Enum):
    EMPIRICAL = "empirical"
    ALWAYS_GO = "always_go"
    NEVER_GO = "never_go"
    YDS_LESS_THAN = "yds_less_than"
    EXPECTED_POINTS = "expected_points"


@dataclass(frozen=True, slots=True)
class StrategySpec:
    """Declarative description of an offensive strategy and its parameters."""

    family: StrategyFamily
    fourth_down_variant: FourthDownVariant | None = None
    yardage_threshold: int | None = None
    pass_probability: float | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.family, StrategyFamily):
            raise ValidationError(f"family must be a StrategyFamily, got {self.family!r}")
        if (self.fourth_down_variant is not None) != (
            self.family is StrategyFamily.FOURTH_DOWN
        ):
            raise ValidationError(
                "fourth_down_variant must be set iff family is fourth_down"
            )
        needs_y = self.fourth_down_variant is FourthDownVariant.YDS_LESS_THAN
        if (self.yardage_threshold is not None) != needs_y:
            raise ValidationError(
                "yardage_threshold must be set iff variant is yds_less_than"
            )
        if self.yardage_threshold is not None and self.yardage_threshold < 0:
            raise ValidationError("yardage_threshold must be >= 0")
        needs_p = self.family is StrategyFamily.PASS_RUSH
        if (self.pass_probability is not None) != needs_p:
            raise ValidationError(
                "pass_probability must be set iff family is pass_rush"
            )
        if self.pass_probability is not None and not 0.0 <= self.pass_probability <= 1.0:
            raise ValidationError("pass_probability must be in [0, 1]")

    @classmethod
    def empirical(cls) -> StrategySpec:
        return cls(family=StrategyFamily.EMPIRICAL)

    @classmethod
    def fourth_down(
        cls, variant: FourthDownVariant | str, yardage_threshold: int | None = None
    ) -> StrategySpec:
        return cls(
            family=StrategyFamily.FOURTH_DOWN,
            fourth_down_variant=FourthDownVariant(variant),
            yardage_threshold=yardage_threshold,
        )

    @classmethod
    def pass_rush(cls, pass_probability: float) -> StrategySpec:
        return cls(family=StrategyFamily.PASS_RUSH, pass_probability=pass_probability)

    def decide(self, state: GameState, rng: random.Random) -> SamplingDirective:
        return decide(self, state, None, rng)


@dataclass(frozen=True)
class EPModel:
    """Empirical value model for fourth-down decisions.

    All four tables are dense per-unit lookups: expected points and kick
    probabilities per yardline (index 1-99), conversion probability per
    distance to go (index 1-21, 21 standing in for 21+), and mean net punt
    yards per yardline.
    """

    ep_by_yardline: tuple[float, ...]
    conversion_prob_by_ytg: tuple[float, ...]
    fg_make_prob_by_yardline: tuple[float, ...]
    punt_net_by_yardline: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.ep_by_yardline) != 100:
            raise ValidationError("ep_by_yardline must have 100 slots (index 1-99)")
        if len(self.conversion_prob_by_ytg) != LONG_YTG_BUCKET + 1:
            raise ValidationError("conversion_prob_by_ytg must have 22 slots")
        if len(self.fg_make_prob_by_yardline) != 100:
            raise ValidationError("fg_make_prob_by_yardline must have 100 slots")
        if len(self.punt_net_by_yardline) != 100:
            raise ValidationError("punt_net_by_yardline must have 100 slots")
        for p in self.conversion_prob_by_ytg[1:]:
            if not 0.0 <= p <= 1.0:
                raise ValidationError("conversion probabilities must be in [0, 1]")
        probs = self.fg_make_prob_by_yardline[1:]
        for p in probs:
            if not 0.0 <= p <= 1.0:
                raise ValidationError("field-goal probabilities must be in [0, 1]")
        for lo, hi in zip(probs, probs[1:]):
            if lo > hi + 1e-9:
                raise ValidationError(
                    "fg_make_prob must be non-decreasing toward the opponent goal"
                )

    def expected_points(self, yards_from_own_goal: float) -> float:
        """EP of possession at a yardline; at or past the goal it is a touchdown."""
        if yards_from_own_goal >= 100:
            return TOUCHDOWN_EP
        yl = max(1, min(99, int(round(yards_from_own_goal))))
        return self.ep_by_yardline[yl]

    def conversion_prob(self, yards_to_go: int) -> float:
        return self.conversion_prob_by_ytg[ytg_bucket(max(1, yards_to_go))]

    def fg_make_prob(self, yards_from_own_goal: int) -> float:
        return self.fg_make_prob_by_yardline[max(1, min(99, yards_from_own_goal))]

    def punt_net(self, yards_from_own_goal: int) -> float:
        return self.punt_net_by_yardline[max(1, min(99, yards_from_own_goal))]


@dataclass(frozen=True, slots=True)
class FourthDownValues:
    """Expected points of the three fourth-down choices."""

    ev_go: float
    ev_punt: float
    ev_fg: float

    def best(self) -> str:
        # Ties prefer the aggressive choice: go, then field goal, then punt.
        best = max(self.ev_go, self.ev_fg, self.ev_punt)
        if self.ev_go == best:
            return "go"
        if self.ev_fg == best:
            return "fg"
        return "punt"


def ev_fourth_down(
    state: GameState, ep: EPModel, fg_points: float = FG_POINTS
) -> FourthDownValues:
    """Expected points of going for it, punting, and kicking from this spot.

    A failed conversion or missed kick hands the opponent possession, valued
    as minus their EP at the takeover yardline.
    """
    if state.down != 4:
        raise ValidationError("ev_fourth_down requires a fourth-down state")
    yl = state.yards_from_own_goal
    ytg = state.yards_to_go

    p_conv = ep.conversion_prob(ytg)
    ev_go = p_conv * ep.expected_points(yl + ytg) + (1.0 - p_conv) * (
        -ep.expected_points(100 - yl)
    )

    p_fg = ep.fg_make_prob(yl)
    miss_spot = max(1, yl - MISSED_FG_SETBACK)
    ev_fg = p_fg * fg_points + (1.0 - p_fg) * (-ep.expected_points(100 - miss_spot))

    landing = yl + ep.punt_net(yl)
    if landing >= 100:
        opponent_start = TOUCHBACK_YFOG
    else:
        opponent_start = 100 - max(1.0, min(99.0, landing))
    ev_punt = -ep.expected_points(opponent_start)

    return FourthDownValues(ev_go=ev_go, ev_punt=ev_punt, ev_fg=ev_fg)


def decide(
    spec: StrategySpec,
    state: GameState,
    ep: EPModel | None = None,
    rng: random.Random | None = None,
) -> SamplingDirective:
    """Constraint set the sampler must honor for this play under the strategy."""
    own = frozenset({state.down})
    pooled = (
        frozenset({state.down - 1, state.down}) if state.down >= 2 else own
    )

    if spec.family is StrategyFamily.EMPIRICAL:
        return SamplingDirective(kinds=ALL_KINDS, down_pool=own)

    if spec.family is StrategyFamily.PASS_RUSH:
        if state.down == 4:
            return SamplingDirective(kinds=ALL_KINDS, down_pool=own)
        if rng is None:
            raise ConfigError("pass_rush strategy needs an rng stream")
        kind = PlayKind.PASS if rng.random() < spec.pass_probability else PlayKind.RUN
        return SamplingDirective(kinds=frozenset({kind}), down_pool=own)

    variant = spec.fourth_down_variant
    if variant is FourthDownVariant.EXPECTED_POINTS and ep is None:
        raise ConfigError("expected_points strategy needs an EPModel")

    if variant is FourthDownVariant.EMPIRICAL:
        return SamplingDirective(kinds=ALL_KINDS, down_pool=own)

    if variant is FourthDownVariant.ALWAYS_GO:
        return SamplingDirective(kinds=GO_KINDS, down_pool=pooled)

    if state.down != 4:
        # Remaining variants only override the fourth-down call; earlier downs
        # run ordinary scrimmage plays.
        return SamplingDirective(kinds=GO_KINDS, down_pool=own)

    if variant is FourthDownVariant.NEVER_GO:
        return SamplingDirective(kinds=KICK_KINDS, down_pool=own)

    if variant is FourthDownVariant.YDS_LESS_THAN:
        if state.yards_to_go <= spec.yardage_threshold:
            return SamplingDirective(kinds=GO_KINDS, down_pool=pooled)
        return SamplingDirective(kinds=KICK_KINDS, down_pool=own)

    assert variant is FourthDownVariant.EXPECTED_POINTS
    choice = ev_fourth_down(state, ep).best()
    if choice == "go":
        return SamplingDirective(kinds=GO_KINDS, down_pool=pooled)
    if choice == "fg":
        return SamplingDirective(kinds=frozenset({PlayKind.FIELD_GOAL}), down_pool=own)
    return SamplingDirective(kinds=frozenset({PlayKind.PUNT}), down_pool=own)


@dataclass(frozen=True)
class Strategy:
    """A strategy spec bound to whatever model data it needs at decide time."""

    spec: StrategySpec
    ep: EPModel | None = None

    def __post_init__(self) -> None:
        if (
            self.spec.fourth_down_variant is FourthDownVariant.EXPECTED_POINTS
            and self.ep is None
        ):
            raise ConfigError("expected_points strategy needs an EPModel")

    def decide(self, state: GameState, rng: random.Random) -> SamplingDirective:
        return decide(self.spec, state, self.ep, rng)


# --- model fitting -----------------------------------------------------------


def _isotonic_non_decreasing(values: list[float], weights: list[float]) -> list[float]:
    """Weighted pool-adjacent-violators: least-squares non-decreasing fit."""
    blocks: list[list[float]] = []  # [value, weight, inputs absorbed]
    for v, w in zip(values, weights):
        blocks.append([v, w, 1])
        while len(blocks) > 1 and blocks[-2][0] > blocks[-1][0]:
            v2, w2, c2 = blocks.pop()
            v1, w1, c1 = blocks.pop()
            blocks.append([(v1 * w1 + v2 * w2) / (w1 + w2), w1 + w2, c1 + c2])
    out: list[float] = []
    for value, _weight, count in blocks:
        out.extend([value] * int(count))
    return out


def _merge_sparse_buckets(
    buckets: list[tuple[int, int, float, int]], min_obs: int
) -> list[tuple[int, int, float, int]]:
    """Merge adjacent (lo, hi, mean, n) buckets until each has >= min_obs.

    Walks low to high accumulating; a trailing underweight remainder is folded
    into the previous merged bucket.
    """
    merged: list[tuple[int, int, float, int]] = []
    lo = None
    total = 0.0
    count = 0
    for b_lo, b_hi, mean, n in buckets:
        if lo is None:
            lo = b_lo
        total += mean * n
        count += n
        hi = b_hi
        if count >= min_obs:
            merged.append((lo, hi, total / count, count))
            lo, total, count = None, 0.0, 0
    if count > 0:
        if merged:
            p_lo, _, p_mean, p_n = merged.pop()
            new_n = p_n + count
            merged.append((p_lo, hi, (p_mean * p_n + total) / new_n, new_n))
        else:
            merged.append((lo, hi, total / count, count))
    return merged


def fit_ep_model(
    pool: PlayPool,
    *,
    ep_table: dict[int, float] | None = None,
    ep_samples: list[tuple[int, float]] | None = None,
    min_bucket_obs: int = 30,
) -> EPModel:
    """Estimate the value model from a pool.

    Expected points per yardline come from an external table when supplied,
    otherwise from next-score samples (yardline, signed points of the next
    score in the half) built during ingestion. Conversion probability pools
    third- and fourth-down scrimmage plays per distance; field-goal make rate
    and net punt yardage are bucketed empirical rates, the former isotonically
    smoothed so it never improves as the kick gets longer.
    """
    if ep_table is None and ep_samples is None:
        raise ConfigError("fit_ep_model needs an ep_table or ep_samples")

    ep_by_yardline = _fit_ep_curve(ep_table, ep_samples, min_bucket_obs)
    conversion = _fit_conversion(pool, min_bucket_obs)
    fg_curve = _fit_fg_curve(pool, min_bucket_obs)
    punt_net = _fit_punt_net(pool, min_bucket_obs)
    return EPModel(
        ep_by_yardline=ep_by_yardline,
        conversion_prob_by_ytg=conversion,
        fg_make_prob_by_yardline=fg_curve,
        punt_net_by_yardline=punt_net,
    )


def _fit_ep_curve(
    ep_table: dict[int, float] | None,
    ep_samples: list[tuple[int, float]] | None,
    min_obs: int,
) -> tuple[float, ...]:
    if ep_table is not None:
        known = sorted((yl, v) for yl, v in ep_table.items() if 1 <= yl <= 99)
        if not known:
            raise FitError("EP table holds no yardlines in [1, 99]")
        curve = [0.0] * 100
        for yl in range(1, 100):
            curve[yl] = _interp(known, yl)
        return tuple(curve)

    assert ep_samples is not None
    if not ep_samples:
        raise FitError("no next-score samples to estimate EP from")
    by_yl: dict[int, list[float]] = {}
    for yl, value in ep_samples:
        if 1 <= yl <= 99:
            by_yl.setdefault(yl, []).append(value)
    curve = [0.0] * 100
    for yl in range(1, 100):
        values: list[float] = []
        width = 0
        while width <= 99:
            values = [
                v
                for y in range(max(1, yl - width), min(99, yl + width) + 1)
                for v in by_yl.get(y, ())
            ]
            if len(values) >= min_obs:
                break
            width += 1
        if not values:
            raise FitError("no next-score samples anywhere near yardline %d" % yl)
        curve[yl] = sum(values) / len(values)
    return tuple(curve)


def _interp(known: list[tuple[int, float]], x: int) -> float:
    if x <= known[0][0]:
        return known[0][1]
    if x >= known[-1][0]:
        return known[-1][1]
    for (x0, y0), (x1, y1) in zip(known, known[1:]):
        if x0 <= x <= x1:
            if x1 == x0:
                return y0
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    return known[-1][1]


def _fit_conversion(pool: PlayPool, min_obs: int) -> tuple[float, ...]:
    # Third and fourth downs pooled; a play converts when it gains its own
    # distance to go.
    tries: dict[int, list[bool]] = {b: [] for b in range(1, LONG_YTG_BUCKET + 1)}
    for p in pool.plays:
        if p.kind in GO_KINDS and p.down >= 3:
            tries[ytg_bucket(p.yards_to_go)].append(p.yards_gained >= p.yards_to_go)
    if not any(tries.values()):
        raise FitError("no third/fourth-down scrimmage plays to fit conversion from")
    probs = [0.0] * (LONG_YTG_BUCKET + 1)
    for b in range(1, LONG_YTG_BUCKET + 1):
        outcomes: list[bool] = []
        width = 0
        while width <= LONG_YTG_BUCKET:
            lo, hi = max(1, b - width), min(LONG_YTG_BUCKET, b + width)
            outcomes = [o for bb in range(lo, hi + 1) for o in tries[bb]]
            if len(outcomes) >= min_obs:
                break
            width += 1
        if width > 0 and outcomes:
            log.warning(
                "conversion bucket %d widened by %d to reach %d observations",
                b,
                width,
                len(outcomes),
            )
        probs[b] = sum(outcomes) / len(outcomes)
    return tuple(probs)


def _fit_fg_curve(pool: PlayPool, min_obs: int) -> tuple[float, ...]:
    by_bucket: dict[int, list[bool]] = {}
    for p in pool.plays:
        if p.kind is PlayKind.FIELD_GOAL and p.field_goal_made is not None:
            by_bucket.setdefault(p.yards_from_own_goal // 5, []).append(
                p.field_goal_made
            )
    if not by_bucket:
        raise FitError("no field-goal attempts to fit make probability from")
    raw = [
        (b * 5, b * 5 + 4, sum(v) / len(v), len(v))
        for b, v in sorted(by_bucket.items())
    ]
    if any(n < min_obs for *_rest, n in raw):
        log.warning("sparse field-goal buckets merged to reach %d attempts", min_obs)
    merged = _merge_sparse_buckets(raw, min_obs)
    smoothed = _isotonic_non_decreasing(
        [m for _, _, m, _ in merged], [float(n) for *_r, n in merged]
    )
    assigned = [False] * 100
    curve = [0.0] * 100
    for (lo, hi, _, _), rate in zip(merged, smoothed):
        for yl in range(max(1, lo), min(99, hi) + 1):
            curve[yl] = min(1.0, max(0.0, rate))
            assigned[yl] = True
    # Below the attempted range a kick is hopeless (never tried from there);
    # gaps and everything above carry the last observed rate forward, which
    # keeps the curve monotone.
    last = 0.0
    for yl in range(1, 100):
        if assigned[yl]:
            last = curve[yl]
        else:
            curve[yl] = last
    return tuple(curve)


def _fit_punt_net(pool: PlayPool, min_obs: int) -> tuple[float, ...]:
    by_bucket: dict[int, list[float]] = {}
    for p in pool.plays:
        if p.kind is PlayKind.PUNT and p.net_kick_yards is not None:
            by_bucket.setdefault(p.yards_from_own_goal // 10, []).append(
                float(p.net_kick_yards)
            )
    if not by_bucket:
        raise FitError("no punts to fit net yardage from")
    raw = [
        (b * 10, b * 10 + 9, sum(v) / len(v), len(v))
        for b, v in sorted(by_bucket.items())
    ]
    if any(n < min_obs for *_rest, n in raw):
        log.warning("sparse punt buckets merged to reach %d punts", min_obs)
    merged = _merge_sparse_buckets(raw, min_obs)
    curve = [0.0] * 100
    for yl in range(1, 100):
        inside = [m for m in merged if m[0] <= yl <= m[1]]
        if inside:
            curve[yl] = inside[0][2]
        else:
            nearest = min(
                merged, key=lambda m: min(abs(yl - m[0]), abs(yl - m[1]))
            )
            curve[yl] = nearest[2]
    return tuple(curve)


def load_ep_table(path: str | Path) -> dict[int, float]:
    """Read an expected-points table CSV with columns ``yardline`` and ``ep``."""
    table: dict[int, float] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"yardline", "ep"} <= set(
            reader.fieldnames
        ):
            raise ValidationError("EP table needs 'yardline' and 'ep' columns")
        for row in reader:
            table[int(row["yardline"])] = float(row["ep"])
    if not table:
        raise ValidationError(f"EP table {path} is empty")
    return table
