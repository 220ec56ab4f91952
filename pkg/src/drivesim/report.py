"""Aggregation of drive records into summary statistics and parameter sweeps."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .engine import (
    DriveOutcome,
    DriveRecord,
    SimConfig,
    derive_seed,
    sample_drives,
)
from .errors import ValidationError
from .plays import PlayKind
from .sampling import PlayPool, SamplerConfig
from .strategies import Strategy, StrategySpec

Z_95 = 1.96


@dataclass(frozen=True, slots=True)
class StrategySummary:
    """Scoring statistics for one batch of simulated drives."""

    label: str
    n: int
    pct_no_score: float
    pct_fg: float
    pct_td: float
    mean_score: float
    ci95_low: float
    ci95_high: float
    mean_turnover_yardline: float | None
    turnover_ci95: tuple[float, float] | None

    @property
    def pct_score(self) -> float:
        return self.pct_fg + self.pct_td


def _mean_ci(values: Sequence[float]) -> tuple[float, float, float]:
    n = len(values)
    mean = sum(values) / n
    if n >= 2:
        var = sum((v - mean) ** 2 for v in values) / (n - 1)
        half = Z_95 * math.sqrt(var) / math.sqrt(n)
    else:
        half = 0.0
    return mean, mean - half, mean + half


def summarize(records: Sequence[DriveRecord], label: str = "") -> StrategySummary:
    """Outcome shares, mean points with a normal-approximation 95% CI, and the
    average yardline at which non-scoring drives gave the ball up."""
    if not records:
        raise ValidationError("cannot summarize zero drive records")
    n = len(records)
    n_fg = sum(1 for r in records if r.outcome is DriveOutcome.FIELD_GOAL)
    n_td = sum(1 for r in records if r.outcome is DriveOutcome.TOUCHDOWN)
    mean, lo, hi = _mean_ci([float(r.points) for r in records])

    spots = [
        float(r.turnover_yardline)
        for r in records
        if r.turnover_yardline is not None
    ]
    if spots:
        t_mean, t_lo, t_hi = _mean_ci(spots)
        turnover_ci: tuple[float, float] | None = (t_lo, t_hi)
    else:
        t_mean, turnover_ci = None, None

    return StrategySummary(
        label=label,
        n=n,
        pct_no_score=(n - n_fg - n_td) / n,
        pct_fg=n_fg / n,
        pct_td=n_td / n,
        mean_score=mean,
        ci95_low=lo,
        ci95_high=hi,
        mean_turnover_yardline=t_mean,
        turnover_ci95=turnover_ci,
    )


def baseline_pass_share(pool: PlayPool) -> float:
    """Fraction of scrimmage plays on downs 1-3 that are passes."""
    passes = runs = 0
    for p in pool.plays:
        if p.down <= 3:
            if p.kind is PlayKind.PASS:
                passes += 1
            elif p.kind is PlayKind.RUN:
                runs += 1
    if passes + runs == 0:
        raise ValidationError("pool has no early-down scrimmage plays")
    return passes / (passes + runs)


@dataclass(frozen=True, slots=True)
class YardageSweepRow:
    y: int
    summary: StrategySummary


def sweep_yardage(
    pool: PlayPool,
    y_values: Sequence[int],
    cfg: SimConfig,
    sampler_cfg: SamplerConfig | None = None,
    *,
    n_jobs: int = 1,
    common_random_numbers: bool = False,
) -> list[YardageSweepRow]:
    """One batch of drives per go-for-it threshold Y.

    Batches are independent by default (fresh parameter-derived seeds). With
    ``common_random_numbers`` every Y reuses the same per-drive streams, which
    cancels sampling noise out of cross-Y comparisons.
    """
    if not y_values:
        raise ValidationError("y_values must be non-empty")
    rows = []
    for y in y_values:
        strategy = Strategy(StrategySpec.fourth_down("yds_less_than", y))
        if common_random_numbers:
            run_cfg = cfg
        else:
            run_cfg = replace(
                cfg, master_seed=derive_seed(cfg.master_seed, "sweep_y", y)
            )
        records = sample_drives(pool, strategy, run_cfg, sampler_cfg, n_jobs=n_jobs)
        rows.append(YardageSweepRow(y=y, summary=summarize(records, label=f"y={y}")))
    return rows


@dataclass(frozen=True, slots=True)
class PassSweepRow:
    group: str
    p: float
    summary: StrategySummary


@dataclass(frozen=True, slots=True)
class PassSweepResult:
    rows: list[PassSweepRow]
    baselines: dict[str, float]  # per-group empirical pass share, downs 1-3


def sweep_pass_probability(
    pool: PlayPool,
    p_values: Sequence[float],
    cfg: SimConfig,
    sampler_cfg: SamplerConfig | None = None,
    groups: Mapping[str, PlayPool] | None = None,
    *,
    n_jobs: int = 1,
    common_random_numbers: bool = False,
) -> PassSweepResult:
    """Batches of drives per pass probability, optionally per named sub-pool."""
    if not p_values:
        raise ValidationError("p_values must be non-empty")
    for p in p_values:
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"pass probability {p} outside [0, 1]")
    named = dict(groups) if groups else {"all": pool}
    rows = []
    baselines = {}
    for group, group_pool in named.items():
        baselines[group] = baseline_pass_share(group_pool)
        for p in p_values:
            strategy = Strategy(StrategySpec.pass_rush(p))
            if common_random_numbers:
                run_cfg = replace(
                    cfg, master_seed=derive_seed(cfg.master_seed, "sweep_p", group)
                )
            else:
                run_cfg = replace(
                    cfg,
                    master_seed=derive_seed(
                        cfg.master_seed, "sweep_p", group, repr(float(p))
                    ),
                )
            records = sample_drives(
                group_pool, strategy, run_cfg, sampler_cfg, n_jobs=n_jobs
            )
            rows.append(
                PassSweepRow(
                    group=group,
                    p=p,
                    summary=summarize(records, label=f"{group}:p={p}"),
                )
            )
    return PassSweepResult(rows=rows, baselines=baselines)


# --- tidy exports ------------------------------------------------------------

_SUMMARY_METRICS = (
    "n",
    "pct_no_score",
    "pct_fg",
    "pct_td",
    "mean_score",
    "ci95_low",
    "ci95_high",
    "mean_turnover_yardline",
    "turnover_ci95_low",
    "turnover_ci95_high",
)


def summary_metric_values(summary: StrategySummary) -> dict[str, float | None]:
    t_lo, t_hi = summary.turnover_ci95 or (None, None)
    return {
        "n": summary.n,
        "pct_no_score": summary.pct_no_score,
        "pct_fg": summary.pct_fg,
        "pct_td": summary.pct_td,
        "mean_score": summary.mean_score,
        "ci95_low": summary.ci95_low,
        "ci95_high": summary.ci95_high,
        "mean_turnover_yardline": summary.mean_turnover_yardline,
        "turnover_ci95_low": t_lo,
        "turnover_ci95_high": t_hi,
    }


def summary_long_rows(
    summary: StrategySummary, parameter: object = "", group: str = ""
) -> list[dict[str, object]]:
    """Tidy (strategy, parameter, metric, value) rows for one summary."""
    values = summary_metric_values(summary)
    return [
        {
            "strategy": summary.label,
            "group": group,
            "parameter": parameter,
            "metric": metric,
            "value": "" if values[metric] is None else values[metric],
        }
        for metric in _SUMMARY_METRICS
    ]


def write_long_csv(rows: Iterable[dict[str, object]], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=("strategy", "group", "parameter", "metric", "value")
        )
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def summaries_to_json(
    summaries: Sequence[StrategySummary], path: str | Path, **extra: object
) -> None:
    payload = {
        "summaries": [
            {"label": s.label, **summary_metric_values(s)} for s in summaries
        ],
        **extra,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_yardage_sweep_plot_csv(
    rows: Sequence[YardageSweepRow], path: str | Path
) -> None:
    """Plot-ready table: score shares, mean score, and turnover yardline per Y."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "y",
                "pct_fg",
                "pct_td",
                "pct_score",
                "mean_score",
                "ci95_low",
                "ci95_high",
                "mean_turnover_yardline",
                "turnover_ci95_low",
                "turnover_ci95_high",
            ]
        )
        for row in rows:
            s = row.summary
            t_lo, t_hi = s.turnover_ci95 or ("", "")
            writer.writerow(
                [
                    row.y,
                    s.pct_fg,
                    s.pct_td,
                    s.pct_score,
                    s.mean_score,
                    s.ci95_low,
                    s.ci95_high,
                    "" if s.mean_turnover_yardline is None else s.mean_turnover_yardline,
                    t_lo,
                    t_hi,
                ]
            )


def write_pass_sweep_plot_csv(result: PassSweepResult, path: str | Path) -> None:
    """Plot-ready table: score shares per (group, p) plus the group baseline."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["group", "p", "pct_fg", "pct_td", "pct_score", "mean_score", "baseline_pass_share"]
        )
        for row in result.rows:
            s = row.summary
            writer.writerow(
                [
                    row.group,
                    row.p,
                    s.pct_fg,
                    s.pct_td,
                    s.pct_score,
                    s.mean_score,
                    result.baselines[row.group],
                ]
            )
