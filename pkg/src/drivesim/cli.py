"""Command-line front end: fetch data, prep pools, simulate, sweep.

Every run directory gets a manifest (command line, config snapshot, seed,
input digests, tool version) sufficient to reproduce the results bit for bit.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__
from .cache import load_pool, save_pool
from .config import AppConfig, load_config
from .engine import (
    SimConfig,
    derive_seed,
    records_to_csv,
    records_to_jsonl,
    sample_drives,
)
from .errors import ConfigError, DriveSimError, ValidationError
from .ingest import (
    FilterConfig,
    build_ep_samples,
    download_pbp,
    parse_pbp,
    passer_rating_terciles,
    prep_plays,
    split_by_playoff,
    subset_by_teams,
)
from .plays import PlayKind
from .report import (
    summaries_to_json,
    summarize,
    summary_long_rows,
    sweep_pass_probability,
    sweep_yardage,
    write_long_csv,
    write_pass_sweep_plot_csv,
    write_yardage_sweep_plot_csv,
)
from .sampling import SamplerConfig, build_index
from .strategies import (
    FourthDownVariant,
    Strategy,
    StrategySpec,
    fit_ep_model,
    load_ep_table,
)

log = logging.getLogger(__name__)

CACHE_DIR_ENV = "DRIVESIM_CACHE_DIR"

STRATEGY_CHOICES = (
    "empirical",
    "fourth:empirical",
    "fourth:always_go",
    "fourth:never_go",
    "fourth:yds_less_than",
    "fourth:expected_points",
    "pass_rush",
)


class UsageError(DriveSimError):
    """Bad flag combination; maps to exit status 2."""


def _parse_seasons(raw: str) -> list[int]:
    seasons: set[int] = set()
    try:
        for token in raw.split(","):
            token = token.strip()
            if not token:
                continue
            if "-" in token:
                lo, hi = token.split("-", 1)
                seasons.update(range(int(lo), int(hi) + 1))
            else:
                seasons.add(int(token))
    except ValueError as err:
        raise UsageError(f"bad season list {raw!r}: {err}") from err
    if not seasons:
        raise UsageError(f"no seasons in {raw!r}")
    return sorted(seasons)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_manifest(out_dir: Path, args: argparse.Namespace, inputs: list[Path]) -> None:
    snapshot = {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in sorted(vars(args).items())
        if k != "func" and not callable(v)
    }
    snapshot = {
        k: ([str(x) for x in v] if isinstance(v, list) else v)
        for k, v in snapshot.items()
    }
    manifest = {
        "command": " ".join(sys.argv),
        "tool_version": __version__,
        "master_seed": getattr(args, "seed", None),
        "config_snapshot": snapshot,
        "input_digests": {str(p): _sha256(Path(p)) for p in inputs},
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(args: argparse.Namespace) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        out = Path("results") / time.strftime("run-%Y%m%d-%H%M%S", time.gmtime())
    out.mkdir(parents=True, exist_ok=True)
    return out


def _add_filter_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="INI config for filters/teams")
    parser.add_argument(
        "--seasons", help="keep only these seasons, e.g. 2018,2019 or 2015-2019"
    )
    parser.add_argument(
        "--max-score-diff", type=int, help="drop plays with |score diff| above this"
    )
    parser.add_argument(
        "--keep-final-two-minutes",
        action="store_true",
        help="keep plays inside the final two minutes of a half",
    )
    parser.add_argument(
        "--kinds", help="comma list of play kinds to keep (default: all four)"
    )


def _add_data_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--data", nargs="+", type=Path, help="raw play-by-play CSV file(s)"
    )
    parser.add_argument(
        "--cache", nargs="+", type=Path, help="prepped pool cache file(s)"
    )


def _add_sim_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n-sims", type=int, default=10000)
    parser.add_argument("--from-yard-line", type=int, default=25)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument(
        "--threads",
        type=int,
        default=os.cpu_count() or 1,
        help="worker count; results are identical for any value",
    )
    parser.add_argument("--window", type=int, default=5, help="base yardline window")
    parser.add_argument("--max-window", type=int, default=15)
    parser.add_argument("--max-ytg-relaxation", type=int, default=3)
    parser.add_argument("--out", type=Path, help="results directory")


def _app_config(args: argparse.Namespace) -> AppConfig:
    base = load_config(args.config) if getattr(args, "config", None) else AppConfig()
    kwargs: dict = {}
    if getattr(args, "seasons", None):
        kwargs["seasons"] = frozenset(_parse_seasons(args.seasons))
    if getattr(args, "max_score_diff", None) is not None:
        kwargs["max_abs_score_differential"] = args.max_score_diff
    if getattr(args, "keep_final_two_minutes", False):
        kwargs["exclude_final_two_minutes"] = False
    if getattr(args, "kinds", None):
        try:
            kwargs["play_kinds"] = frozenset(
                PlayKind(k.strip()) for k in args.kinds.split(",") if k.strip()
            )
        except ValueError as err:
            raise UsageError(f"bad --kinds value: {err}") from err
    if kwargs:
        current = base.filters
        filters = FilterConfig(
            exclude_final_two_minutes=kwargs.get(
                "exclude_final_two_minutes", current.exclude_final_two_minutes
            ),
            max_abs_score_differential=kwargs.get(
                "max_abs_score_differential", current.max_abs_score_differential
            ),
            seasons=kwargs.get("seasons", current.seasons),
            play_kinds=kwargs.get("play_kinds", current.play_kinds),
        )
        base = AppConfig(filters=filters, playoff_teams=base.playoff_teams)
    return base


def _load_pool(args: argparse.Namespace, app: AppConfig):
    """Build the pool from --cache or --data; returns (pool, raw_rows, inputs)."""
    if bool(args.data) == bool(args.cache):
        raise UsageError("exactly one of --data or --cache is required")
    inputs: list[Path] = []
    if args.cache:
        plays = []
        for path in args.cache:
            pool = load_pool(path)
            plays.extend(pool.plays)
            inputs.append(path)
        return build_index(plays), None, inputs
    rows = []
    for path in args.data:
        file_rows, report = parse_pbp(path)
        print(
            f"{path}: {report.rows_kept}/{report.rows_read} rows kept",
            file=sys.stderr,
        )
        rows.extend(file_rows)
        inputs.append(path)
    return prep_plays(rows, app.filters), rows, inputs


def _build_strategy(args: argparse.Namespace, pool, raw_rows) -> Strategy:
    name = args.strategy
    if name == "empirical":
        spec = StrategySpec.empirical()
    elif name == "pass_rush":
        if args.p is None:
            raise UsageError("--p is required with --strategy pass_rush")
        spec = StrategySpec.pass_rush(args.p)
    elif name.startswith("fourth:"):
        variant = FourthDownVariant(name.split(":", 1)[1])
        if variant is FourthDownVariant.YDS_LESS_THAN:
            if args.y is None:
                raise UsageError("--y is required with fourth:yds_less_than")
            spec = StrategySpec.fourth_down(variant, args.y)
        else:
            spec = StrategySpec.fourth_down(variant)
    else:  # pragma: no cover - argparse choices guard this
        raise UsageError(f"unknown strategy {name!r}")

    if args.y is not None and spec.yardage_threshold is None:
        raise UsageError("--y only applies to fourth:yds_less_than")
    if args.p is not None and spec.pass_probability is None:
        raise UsageError("--p only applies to pass_rush")

    ep = None
    if spec.fourth_down_variant is FourthDownVariant.EXPECTED_POINTS:
        if args.ep_table:
            ep = fit_ep_model(pool, ep_table=load_ep_table(args.ep_table))
        elif raw_rows is not None:
            ep = fit_ep_model(pool, ep_samples=build_ep_samples(raw_rows))
        else:
            raise UsageError(
                "fourth:expected_points needs --ep-table when loading from --cache"
            )
    return Strategy(spec=spec, ep=ep)


def _grouped_pools(args: argparse.Namespace, pool, app: AppConfig):
    group_by = getattr(args, "group_by", "none")
    if group_by == "none":
        return {"all": pool}
    if group_by == "playoff":
        teams_file = getattr(args, "teams_file", None) or getattr(args, "config", None)
        playoff = app.playoff_teams
        if teams_file and not playoff:
            playoff = load_config(teams_file).playoff_teams
        if not playoff:
            raise UsageError(
                "--group-by playoff needs a --teams-file (or --config) with a "
                "[playoff_teams] section"
            )
        return split_by_playoff(pool, playoff)
    if group_by == "rtg":
        terciles = passer_rating_terciles(pool)
        return {
            "rtg_high": terciles.high,
            "rtg_medium": terciles.medium,
            "rtg_low": terciles.low,
        }
    raise UsageError(f"unknown --group-by {group_by!r}")


def _sampler_cfg(args: argparse.Namespace) -> SamplerConfig:
    return SamplerConfig(
        window_yards_from_own_goal=args.window,
        max_window=args.max_window,
        max_ytg_relaxation=args.max_ytg_relaxation,
    )


# --- commands ------------------------------------------------------------


def cmd_fetch(args: argparse.Namespace) -> int:
    dest = Path(args.dest or os.environ.get(CACHE_DIR_ENV) or "data")
    seasons = _parse_seasons(args.seasons)
    already = {dest / name for name in os.listdir(dest)} if dest.is_dir() else set()
    paths = download_pbp(
        seasons,
        source=args.source,
        destination=dest,
        force=args.force,
        base_url=args.base_url,
    )
    for path in paths:
        status = "cached" if path in already and not args.force else "fetched"
        print(f"{status}: {path}")
    return 0


def cmd_prep(args: argparse.Namespace) -> int:
    app = _app_config(args)
    rows = []
    for path in args.data:
        file_rows, report = parse_pbp(path)
        print(f"{path}: {report.rows_kept}/{report.rows_read} rows kept")
        rows.extend(file_rows)
    pool = prep_plays(rows, app.filters)
    save_pool(pool, args.cache_out)
    print(f"wrote {len(pool)} plays to {args.cache_out}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    app = _app_config(args)
    pool, raw_rows, inputs = _load_pool(args, app)
    if args.teams:
        pool = subset_by_teams(pool, [t.strip() for t in args.teams.split(",")])
    strategy = _build_strategy(args, pool, raw_rows)
    groups = _grouped_pools(args, pool, app)
    sim_cfg = SimConfig(
        n_sims=args.n_sims,
        from_yard_line=args.from_yard_line,
        single_drive=not args.until_score,
        master_seed=args.seed,
    )
    out = _out_dir(args)
    summaries = []
    for name, group_pool in sorted(groups.items()):
        records = sample_drives(
            group_pool, strategy, sim_cfg, _sampler_cfg(args), n_jobs=args.threads
        )
        label = args.strategy if name == "all" else f"{args.strategy}[{name}]"
        summaries.append(summarize(records, label=label))
        stem = "records" if name == "all" else f"records_{name}"
        records_to_csv(records, out / f"{stem}.csv")
        if args.jsonl:
            records_to_jsonl(records, out / f"{stem}.jsonl")
    summaries_to_json(summaries, out / "summary.json", seed=args.seed)
    _write_manifest(out, args, inputs)
    for summary in summaries:
        print(
            f"{summary.label}: mean {summary.mean_score:.3f} "
            f"({summary.ci95_low:.3f}, {summary.ci95_high:.3f}) "
            f"td {summary.pct_td:.1%} fg {summary.pct_fg:.1%} over {summary.n} drives"
        )
    print(f"results in {out}")
    return 0


def _sweep_values(args: argparse.Namespace, *, is_float: bool) -> list:
    if args.values:
        cast = float if is_float else int
        try:
            values = [cast(v) for v in args.values.split(",") if v.strip()]
        except ValueError as err:
            raise UsageError(f"bad --values list: {err}") from err
    elif args.range_from is not None and args.range_to is not None:
        if is_float:
            step = args.step if args.step is not None else 0.1
            n = int(round((args.range_to - args.range_from) / step)) + 1
            values = [round(args.range_from + i * step, 10) for i in range(n)]
        else:
            step = int(args.step) if args.step is not None else 1
            values = list(range(int(args.range_from), int(args.range_to) + 1, step))
    else:
        raise UsageError("provide --values or both --from and --to")
    if not values:
        raise UsageError("sweep range is empty")
    return values


def _sweep_fourth(args, pool, raw_rows, sim_cfg, sampler, out) -> list[dict]:
    """Run every fourth-down sub-strategy once; the outcome-share comparison."""
    variants: list[tuple[str, Strategy]] = [
        ("empirical", Strategy(StrategySpec.fourth_down("empirical"))),
        ("always_go", Strategy(StrategySpec.fourth_down("always_go"))),
        ("never_go", Strategy(StrategySpec.fourth_down("never_go"))),
        (
            f"yds_less_than_{args.y or 5}",
            Strategy(StrategySpec.fourth_down("yds_less_than", args.y or 5)),
        ),
    ]
    ep = None
    if args.ep_table:
        ep = fit_ep_model(pool, ep_table=load_ep_table(args.ep_table))
    elif raw_rows is not None:
        ep = fit_ep_model(pool, ep_samples=build_ep_samples(raw_rows))
    if ep is not None:
        variants.append(
            (
                "expected_points",
                Strategy(StrategySpec.fourth_down("expected_points"), ep=ep),
            )
        )
    else:
        print(
            "note: skipping expected_points (no --ep-table and no raw --data)",
            file=sys.stderr,
        )
    summaries = []
    long_rows: list[dict] = []
    for name, strategy in variants:
        run_cfg = SimConfig(
            n_sims=sim_cfg.n_sims,
            from_yard_line=sim_cfg.from_yard_line,
            single_drive=True,
            master_seed=derive_seed(sim_cfg.master_seed, "sweep_fourth", name),
        )
        records = sample_drives(pool, strategy, run_cfg, sampler, n_jobs=args.threads)
        summary = summarize(records, label=name)
        summaries.append(summary)
        long_rows.extend(summary_long_rows(summary, parameter=name))
    if args.plot_data:
        with open(out / "fig_fourth_down_outcomes.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["strategy", "pct_no_score", "pct_fg", "pct_td", "mean_score",
                 "ci95_low", "ci95_high"]
            )
            for s in summaries:
                writer.writerow(
                    [s.label, s.pct_no_score, s.pct_fg, s.pct_td, s.mean_score,
                     s.ci95_low, s.ci95_high]
                )
    summaries_to_json(summaries, out / "summary.json", seed=args.seed)
    return long_rows


def cmd_sweep(args: argparse.Namespace) -> int:
    app = _app_config(args)
    pool, raw_rows, inputs = _load_pool(args, app)
    sim_cfg = SimConfig(
        n_sims=args.n_sims,
        from_yard_line=args.from_yard_line,
        single_drive=True,
        master_seed=args.seed,
    )
    sampler = _sampler_cfg(args)
    out = _out_dir(args)
    long_rows = []
    if args.kind == "fourth":
        if args.group_by != "none":
            raise UsageError("--group-by applies only to 'sweep p'")
        long_rows = _sweep_fourth(args, pool, raw_rows, sim_cfg, sampler, out)
    elif args.kind == "y":
        if args.group_by != "none":
            raise UsageError("--group-by applies only to 'sweep p'")
        values = _sweep_values(args, is_float=False)
        rows = sweep_yardage(
            pool, values, sim_cfg, sampler, n_jobs=args.threads,
            common_random_numbers=args.common_random_numbers,
        )
        for row in rows:
            long_rows.extend(summary_long_rows(row.summary, parameter=row.y))
        if args.plot_data:
            write_yardage_sweep_plot_csv(rows, out / "fig_yardage_sweep.csv")
        summaries_to_json([r.summary for r in rows], out / "summary.json", seed=args.seed)
    else:
        values = _sweep_values(args, is_float=True)
        groups = _grouped_pools(args, pool, app)
        named = None if set(groups) == {"all"} else groups
        result = sweep_pass_probability(
            pool, values, sim_cfg, sampler, groups=named, n_jobs=args.threads,
            common_random_numbers=args.common_random_numbers,
        )
        for row in result.rows:
            long_rows.extend(
                summary_long_rows(row.summary, parameter=row.p, group=row.group)
            )
        if args.plot_data:
            write_pass_sweep_plot_csv(result, out / "fig_pass_sweep.csv")
        summaries_to_json(
            [r.summary for r in result.rows],
            out / "summary.json",
            seed=args.seed,
            baselines=result.baselines,
        )
    write_long_csv(long_rows, out / "sweep.csv")
    _write_manifest(out, args, inputs)
    print(f"{len(long_rows)} metric rows; results in {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drivesim",
        description="Evaluate NFL strategies by resampling play-by-play data",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    fetch = sub.add_parser("fetch", help="download per-season play-by-play CSVs")
    fetch.add_argument("--seasons", required=True, help="e.g. 2018,2019 or 2015-2019")
    fetch.add_argument("--source", choices=("nflfastr", "nflscrapr"), default="nflfastr")
    fetch.add_argument(
        "--dest",
        type=Path,
        help=f"cache directory (default ${CACHE_DIR_ENV} or ./data)",
    )
    fetch.add_argument("--force", action="store_true", help="re-download cached files")
    fetch.add_argument("--base-url", help="override the download mirror")
    fetch.set_defaults(func=cmd_fetch)

    prep = sub.add_parser("prep", help="parse + filter CSVs into a pool cache")
    prep.add_argument("--data", nargs="+", type=Path, required=True)
    prep.add_argument("--cache-out", type=Path, required=True)
    _add_filter_flags(prep)
    prep.set_defaults(func=cmd_prep)

    sim = sub.add_parser("simulate", help="simulate drives under a strategy")
    _add_data_flags(sim)
    _add_filter_flags(sim)
    _add_sim_flags(sim)
    sim.add_argument("--strategy", choices=STRATEGY_CHOICES, required=True)
    sim.add_argument("--y", type=int, help="go-for-it threshold for yds_less_than")
    sim.add_argument("--p", type=float, help="pass probability for pass_rush")
    sim.add_argument(
        "--single-drive",
        dest="until_score",
        action="store_false",
        help="simulate isolated drives (default)",
    )
    sim.add_argument(
        "--until-score",
        dest="until_score",
        action="store_true",
        help="alternate possessions until either team scores",
    )
    sim.set_defaults(until_score=False)
    sim.add_argument(
        "--jsonl", action="store_true", help="also write records as JSON lines"
    )
    sim.add_argument("--teams", help="comma list of team codes to subset the pool")
    sim.add_argument("--teams-file", type=Path, help="INI file with [playoff_teams]")
    sim.add_argument(
        "--group-by", choices=("none", "playoff", "rtg"), default="none"
    )
    sim.add_argument("--ep-table", type=Path, help="expected-points CSV (yardline, ep)")
    sim.set_defaults(func=cmd_simulate)

    sweep = sub.add_parser("sweep", help="parameter sweeps over Y or p")
    sweep.add_argument("kind", choices=("y", "p", "fourth"))
    _add_data_flags(sweep)
    _add_filter_flags(sweep)
    _add_sim_flags(sweep)
    sweep.add_argument("--from", dest="range_from", type=float)
    sweep.add_argument("--to", dest="range_to", type=float)
    sweep.add_argument("--step", type=float)
    sweep.add_argument("--values", help="explicit comma list of sweep values")
    sweep.add_argument("--y", type=int, help="threshold used by sweep fourth")
    sweep.add_argument("--ep-table", type=Path, help="EP table for sweep fourth")
    sweep.add_argument("--teams-file", type=Path)
    sweep.add_argument("--group-by", choices=("none", "playoff", "rtg"), default="none")
    sweep.add_argument("--plot-data", action="store_true", help="emit per-figure CSVs")
    sweep.add_argument(
        "--common-random-numbers",
        action="store_true",
        help="reuse the same drive seeds across parameter values (variance reduction)",
    )
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (UsageError, ValidationError, ConfigError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except DriveSimError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
