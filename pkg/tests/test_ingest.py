"""Parsing, filtering, team subsets, terciles, EP samples, and downloads."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import requests

from drivesim.errors import (
    DataReadError,
    DownloadError,
    PoolEmptyError,
    SchemaError,
    ValidationError,
)
from drivesim.ingest import (
    FilterConfig,
    RawPlayRow,
    build_ep_samples,
    download_pbp,
    parse_pbp,
    passer_rating,
    passer_rating_terciles,
    prep_plays,
    row_passes_filters,
    split_by_playoff,
    subset_by_teams,
    team_season_passer_ratings,
)
from drivesim.plays import Play, PlayKind
from drivesim.sampling import build_index

from conftest import pbp_row, write_pbp_csv


def raw(**overrides) -> RawPlayRow:
    fields = dict(
        season=2018,
        game_id="2018_01_AAA_BBB",
        posteam="AAA",
        play_type="run",
        down=1,
        ydstogo=10,
        yardline_100=75,
        yards_gained=4,
        touchdown=False,
        interception=False,
        fumble_lost=False,
        field_goal_result=None,
        kick_distance=None,
        return_yards=0,
        half_seconds_remaining=900.0,
        score_differential=0,
        pass_attempt=False,
        complete_pass=False,
        passing_yards=0,
        pass_touchdown=False,
    )
    fields.update(overrides)
    return RawPlayRow(**fields)


class TestParse:
    def test_unsupported_kinds_are_dropped_and_counted(self, tmp_path):
        path = tmp_path / "pbp.csv"
        write_pbp_csv(
            path,
            [
                pbp_row(play_type="kickoff"),
                pbp_row(play_type="pass", pass_attempt=1),
                pbp_row(play_type="run"),
            ],
        )
        rows, report = parse_pbp(path)
        assert report.rows_read == 3
        assert report.rows_kept == 2
        assert report.dropped == {"unsupported_play_type": 1}

    def test_header_only_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        write_pbp_csv(path, [])
        rows, report = parse_pbp(path)
        assert rows == []
        assert report.rows_read == 0

    def test_missing_required_column_is_a_schema_error(self, tmp_path):
        import pandas as pd

        path = tmp_path / "bad.csv"
        df = pd.DataFrame([pbp_row()]).drop(columns=["yardline_100"])
        df.to_csv(path, index=False)
        with pytest.raises(SchemaError, match="yardline_100"):
            parse_pbp(path)

    def test_rows_missing_kind_specific_fields_are_dropped(self, tmp_path):
        path = tmp_path / "pbp.csv"
        write_pbp_csv(
            path,
            [
                pbp_row(play_type="field_goal", field_goal_result=None),
                pbp_row(play_type="punt", kick_distance=None),
                pbp_row(play_type="pass", yardline_100=None),
                pbp_row(play_type="run", yardline_100=0),
                pbp_row(play_type="run"),
            ],
        )
        rows, report = parse_pbp(path)
        assert report.rows_kept == 1
        assert report.dropped == {
            "missing_field_goal_result": 1,
            "missing_kick_distance": 1,
            "missing_yardline_100": 1,
            "yardline_out_of_range": 1,
        }

    def test_down_may_be_absent_at_parse_time(self, tmp_path):
        path = tmp_path / "pbp.csv"
        write_pbp_csv(path, [pbp_row(down=None)])
        rows, _ = parse_pbp(path)
        assert rows[0].down is None

    def test_gzip_transparent(self, tmp_path):
        import pandas as pd

        path = tmp_path / "pbp.csv.gz"
        pd.DataFrame([pbp_row(), pbp_row(play_type="pass")]).to_csv(
            path, index=False, compression="gzip"
        )
        rows, report = parse_pbp(path)
        assert report.rows_kept == 2

    def test_season_and_passing_yards_can_be_derived(self, tmp_path):
        import pandas as pd

        path = tmp_path / "scrapr.csv"
        frame = pd.DataFrame(
            [
                pbp_row(
                    game_id="2019090500",
                    play_type="pass",
                    pass_attempt=1,
                    complete_pass=1,
                    yards_gained=17,
                ),
            ]
        ).drop(columns=["season", "passing_yards"])
        frame.to_csv(path, index=False)
        rows, _ = parse_pbp(path)
        assert rows[0].season == 2019
        assert rows[0].passing_yards == 17

        rows_hinted, _ = parse_pbp(path, season_hint=2009)
        assert rows_hinted[0].season == 2009

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(DataReadError):
            parse_pbp(tmp_path / "missing.csv")


class TestPrep:
    def test_final_two_minutes_boundary(self):
        keep = raw(half_seconds_remaining=121.0)
        boundary = raw(half_seconds_remaining=120.0)
        inside = raw(half_seconds_remaining=119.0)
        filters = FilterConfig()
        assert row_passes_filters(keep, filters)
        assert not row_passes_filters(boundary, filters)
        assert not row_passes_filters(inside, filters)
        relaxed = FilterConfig(exclude_final_two_minutes=False)
        assert row_passes_filters(inside, relaxed)

    def test_score_differential_boundary_is_inclusive(self):
        filters = FilterConfig()
        assert row_passes_filters(raw(score_differential=28), filters)
        assert row_passes_filters(raw(score_differential=-28), filters)
        assert not row_passes_filters(raw(score_differential=-35), filters)
        assert not row_passes_filters(raw(score_differential=29), filters)

    def test_downless_rows_and_bad_distances_are_dropped(self):
        filters = FilterConfig()
        assert not row_passes_filters(raw(down=None), filters)
        assert not row_passes_filters(raw(ydstogo=0), filters)
        # needing more yards than remain to the goal is impossible
        assert not row_passes_filters(raw(ydstogo=30, yardline_100=20), filters)

    def test_season_and_kind_filters(self):
        filters = FilterConfig(
            seasons=frozenset({2018}), play_kinds=frozenset({PlayKind.RUN})
        )
        assert row_passes_filters(raw(), filters)
        assert not row_passes_filters(raw(season=2019), filters)
        assert not row_passes_filters(raw(play_type="pass"), filters)

    def test_prep_builds_plays_with_derived_fields(self):
        rows = [
            raw(play_type="punt", down=4, kick_distance=50, return_yards=8),
            raw(play_type="field_goal", down=4, field_goal_result="made"),
            raw(play_type="pass", touchdown=True, yards_gained=75, pass_attempt=True),
            raw(play_type="pass", touchdown=True, interception=True, yards_gained=0),
        ]
        pool = prep_plays(rows)
        punt, fg, td_pass, pick_six = pool.plays
        assert punt.net_kick_yards == 42
        assert punt.yards_from_own_goal == 25
        assert fg.field_goal_made is True
        assert td_pass.is_touchdown
        # a pick-six is a turnover against the offense, never its touchdown
        assert pick_six.is_turnover and not pick_six.is_touchdown

    def test_all_filtered_raises_empty_pool(self):
        with pytest.raises(PoolEmptyError):
            prep_plays([raw(down=None)])

    def test_filtering_is_idempotent(self):
        rng = random.Random(3)
        rows = [
            raw(
                play_type=rng.choice(["run", "pass", "punt", "field_goal", "kickoff"]),
                down=rng.choice([None, 1, 2, 3, 4]),
                ydstogo=rng.randint(0, 40),
                yardline_100=rng.randint(1, 99),
                half_seconds_remaining=float(rng.randint(0, 1800)),
                score_differential=rng.randint(-40, 40),
                kick_distance=rng.choice([None, 45]),
                field_goal_result=rng.choice([None, "made", "missed"]),
            )
            for _ in range(500)
        ]
        filters = FilterConfig()
        kept = [r for r in rows if row_passes_filters(r, filters)]
        assert [r for r in kept if row_passes_filters(r, filters)] == kept

    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(
            st.builds(
                raw,
                play_type=st.sampled_from(["run", "pass", "punt", "field_goal"]),
                down=st.one_of(st.none(), st.integers(1, 4)),
                ydstogo=st.integers(0, 40),
                yardline_100=st.integers(1, 99),
                yards_gained=st.integers(-20, 99),
                half_seconds_remaining=st.floats(0, 1800),
                score_differential=st.integers(-40, 40),
                kick_distance=st.one_of(st.none(), st.integers(10, 70)),
                return_yards=st.integers(0, 30),
                field_goal_result=st.sampled_from(["made", "missed", "blocked"]),
                touchdown=st.booleans(),
                interception=st.booleans(),
                fumble_lost=st.booleans(),
            ),
            min_size=1,
            max_size=30,
        )
    )
    def test_every_prepped_play_satisfies_invariants(self, rows):
        # field_goal_result only makes sense on FG rows; punt rows need a kick
        rows = [
            r for r in rows
            if (r.play_type != "punt" or r.kick_distance is not None)
        ]
        try:
            pool = prep_plays(rows)
        except PoolEmptyError:
            return
        for play in pool.plays:
            play.check()


class TestSubsets:
    def _pool(self):
        plays = []
        for team, count in (("KC", 4), ("NE", 3), ("SF", 3)):
            for i in range(count):
                plays.append(
                    Play(PlayKind.RUN, 1, 10, 30 + i, 3, team=team, season=2018)
                )
        return build_index(plays)

    def test_direct_filter(self):
        subset = subset_by_teams(self._pool(), {"KC"})
        assert len(subset) == 4
        assert subset.teams() == {"KC"}

    def test_identity_subset(self):
        pool = self._pool()
        subset = subset_by_teams(pool, {"KC", "NE", "SF"})
        assert sorted(subset.plays, key=id) != []  # new pool object
        assert sorted(p.team for p in subset.plays) == sorted(
            p.team for p in pool.plays
        )

    def test_unknown_team_is_empty_pool_error(self):
        with pytest.raises(PoolEmptyError):
            subset_by_teams(self._pool(), {"XXX"})

    def test_empty_team_set_rejected(self):
        with pytest.raises(ValidationError):
            subset_by_teams(self._pool(), set())

    def test_subset_partitions_the_pool(self):
        pool = self._pool()
        inside = subset_by_teams(pool, {"KC"})
        outside = subset_by_teams(pool, {"NE", "SF"})
        combined = sorted(
            [p for p in inside.plays] + [p for p in outside.plays],
            key=lambda p: (p.team, p.yards_from_own_goal),
        )
        original = sorted(
            pool.plays, key=lambda p: (p.team, p.yards_from_own_goal)
        )
        assert combined == original

    def test_split_by_playoff(self):
        groups = split_by_playoff(
            self._pool(), {2018: frozenset({"KC", "NE"})}
        )
        assert groups["playoff"].teams() == {"KC", "NE"}
        assert groups["non_playoff"].teams() == {"SF"}
        with pytest.raises(ValidationError):
            split_by_playoff(self._pool(), {2018: frozenset({"XXX"})})


def passing_team_plays(team, season, completions, incompletions, interceptions,
                       yards_each, tds, long_yards=0):
    plays = []
    for i in range(completions):
        yards = long_yards if (long_yards and i == 0) else yards_each
        plays.append(
            Play(
                PlayKind.PASS, 1, 10, 50, yards, team=team, season=season,
                pass_attempt=True, complete_pass=True, passing_yards=yards,
                pass_touchdown=i < tds,
            )
        )
    for i in range(incompletions):
        plays.append(
            Play(
                PlayKind.PASS, 2, 8, 40, 0, team=team, season=season,
                pass_attempt=True, is_interception=i < interceptions,
                is_turnover=i < interceptions,
            )
        )
    return plays


class TestPasserRating:
    def test_formula_matches_hand_computation(self):
        # 580 att, 383 comp, 5097 yds, 50 td, 12 int works out to 113.843
        assert passer_rating(580, 383, 5097, 50, 12) == pytest.approx(
            113.84339080459771, abs=1e-9
        )

    def test_components_are_clamped(self):
        # a perfect short game maxes every component at 2.375 -> rating 158.3
        assert passer_rating(10, 10, 200, 10, 0) == pytest.approx(158.3, abs=0.05)
        # an all-interception game bottoms out at zero
        assert passer_rating(10, 0, 0, 0, 10) == 0.0

    def test_pool_aggregation_matches_the_formula_oracle(self):
        # 382 completions of 13 plus one of 131 = 5097 yards on 580 attempts
        plays = passing_team_plays(
            "KC", 2018, completions=383, incompletions=197, interceptions=12,
            yards_each=13, tds=50, long_yards=131,
        )
        ratings = team_season_passer_ratings(build_index(plays))
        assert ratings[("KC", 2018)] == pytest.approx(113.84339080459771, abs=0.1)

    def test_team_without_attempts_is_rejected(self):
        plays = [Play(PlayKind.RUN, 1, 10, 50, 3, team="RUNS", season=2018)]
        plays += passing_team_plays("OK", 2018, 5, 5, 0, 10, 1)
        with pytest.raises(ValidationError):
            team_season_passer_ratings(build_index(plays))


class TestTerciles:
    def _pool_with_teams(self, n_teams):
        plays = []
        for i in range(n_teams):
            team = f"T{i:02d}"
            # spread completion rates so ratings are strictly decreasing
            plays += passing_team_plays(
                team, 2018,
                completions=20 - (i % 15), incompletions=10 + (i % 15),
                interceptions=i % 4, yards_each=8 + (n_teams - i) // 2, tds=max(0, 5 - i // 4),
            )
        return build_index(plays)

    def test_thirty_two_teams_split_eleven_eleven_ten(self):
        pools = passer_rating_terciles(self._pool_with_teams(32))
        sizes = (
            len(pools.high.team_seasons()),
            len(pools.medium.team_seasons()),
            len(pools.low.team_seasons()),
        )
        assert sizes == (11, 11, 10)

    def test_three_teams_one_each(self):
        pools = passer_rating_terciles(self._pool_with_teams(3))
        assert len(pools.high.team_seasons()) == 1
        assert len(pools.medium.team_seasons()) == 1
        assert len(pools.low.team_seasons()) == 1

    def test_terciles_are_disjoint_and_cover(self):
        pool = self._pool_with_teams(10)
        pools = passer_rating_terciles(pool)
        high = pools.high.team_seasons()
        medium = pools.medium.team_seasons()
        low = pools.low.team_seasons()
        assert not (high & medium or high & low or medium & low)
        assert high | medium | low == pool.team_seasons()
        assert len(pools.high) + len(pools.medium) + len(pools.low) == len(pool)

    def test_high_pool_has_the_best_ratings(self):
        pool = self._pool_with_teams(9)
        ratings = team_season_passer_ratings(pool)
        pools = passer_rating_terciles(pool)
        worst_high = min(ratings[u] for u in pools.high.team_seasons())
        best_low = max(ratings[u] for u in pools.low.team_seasons())
        assert worst_high >= best_low

    def test_fewer_than_three_teams_rejected(self):
        with pytest.raises(ValidationError):
            passer_rating_terciles(self._pool_with_teams(2))

    def test_boundary_ties_break_by_team_code(self):
        plays = []
        for team in ("AAA", "BBB", "CCC", "DDD"):
            plays += passing_team_plays(team, 2018, 10, 10, 1, 10, 2)
        pools = passer_rating_terciles(build_index(plays))
        # all ratings equal: first by team code goes high (ceil(4/3) = 2)
        assert {t for t, _ in pools.high.team_seasons()} == {"AAA", "BBB"}
        assert {t for t, _ in pools.medium.team_seasons()} == {"CCC"}
        assert {t for t, _ in pools.low.team_seasons()} == {"DDD"}


class TestEPSamples:
    def test_next_score_signs_and_half_boundaries(self):
        rows = [
            raw(posteam="A", yardline_100=60, half_seconds_remaining=1700),
            raw(posteam="B", yardline_100=50, half_seconds_remaining=1600),
            raw(
                posteam="B", play_type="field_goal", down=4, yardline_100=20,
                field_goal_result="made", half_seconds_remaining=1500,
            ),
            raw(
                posteam="A", play_type="pass", yardline_100=70, touchdown=True,
                interception=True, half_seconds_remaining=1400,
            ),
            raw(posteam="A", yardline_100=40, half_seconds_remaining=1300),
            # clock jumps back up: second half
            raw(posteam="B", yardline_100=30, half_seconds_remaining=1800),
            raw(
                posteam="A", play_type="run", yardline_100=10, touchdown=True,
                half_seconds_remaining=1700,
            ),
        ]
        samples = build_ep_samples(rows)
        assert samples == [
            (40, -3.0),  # A's situation, B kicks the next FG
            (50, 3.0),   # B's own FG
            (80, 3.0),
            (30, -7.0),  # pick-six against A
            (60, 0.0),   # half ends scoreless
            (70, -7.0),  # B's situation, A scores next
            (90, 7.0),
        ]

    def test_rows_without_down_do_not_sample(self):
        rows = [raw(down=None), raw(posteam="A", yardline_100=50)]
        assert build_ep_samples(rows) == [(50, 0.0)]


class FakeResponse:
    def __init__(self, status=200, chunks=(b"csv,data\n",), fail_midway=False):
        self.status_code = status
        self._chunks = chunks
        self._fail = fail_midway
        self.closed = False

    def iter_content(self, chunk_size):
        yield from self._chunks
        if self._fail:
            raise requests.ConnectionError("connection dropped")

    def close(self):
        self.closed = True


class FakeSession:
    def __init__(self, response=None, exc=None):
        self.response = response
        self.exc = exc
        self.calls: list[str] = []

    def get(self, url, stream=True, timeout=None):
        self.calls.append(url)
        if self.exc:
            raise self.exc
        return self.response


class TestDownload:
    def test_successful_fetch_writes_files(self, tmp_path):
        session = FakeSession(FakeResponse(chunks=(b"a,b\n", b"1,2\n")))
        paths = download_pbp([2018], destination=tmp_path, session=session)
        assert paths == [tmp_path / "play_by_play_2018.csv.gz"]
        assert paths[0].read_bytes() == b"a,b\n1,2\n"
        assert session.calls == [
            "https://github.com/nflverse/nflverse-data/releases/download/pbp/"
            "play_by_play_2018.csv.gz"
        ]

    def test_cached_files_skip_the_network(self, tmp_path):
        target = tmp_path / "play_by_play_2018.csv.gz"
        target.write_bytes(b"cached")
        session = FakeSession(FakeResponse())
        paths = download_pbp([2018], destination=tmp_path, session=session)
        assert paths == [target]
        assert session.calls == []
        assert target.read_bytes() == b"cached"

    def test_force_redownloads(self, tmp_path):
        target = tmp_path / "play_by_play_2018.csv.gz"
        target.write_bytes(b"stale")
        session = FakeSession(FakeResponse(chunks=(b"fresh",)))
        download_pbp([2018], destination=tmp_path, session=session, force=True)
        assert target.read_bytes() == b"fresh"

    def test_out_of_range_season_rejected(self, tmp_path):
        with pytest.raises(ValidationError, match="1950"):
            download_pbp([1950], destination=tmp_path, session=FakeSession())
        with pytest.raises(ValidationError):
            download_pbp([2021], source="nflscrapr", destination=tmp_path,
                         session=FakeSession())
        with pytest.raises(ValidationError):
            download_pbp([2018], source="espn", destination=tmp_path)

    def test_http_error_names_the_url(self, tmp_path):
        session = FakeSession(FakeResponse(status=404))
        with pytest.raises(DownloadError) as exc:
            download_pbp([2018], destination=tmp_path, session=session)
        assert "play_by_play_2018" in str(exc.value)
        assert not exc.value.retryable
        session5xx = FakeSession(FakeResponse(status=503))
        with pytest.raises(DownloadError) as exc5:
            download_pbp([2018], destination=tmp_path, session=session5xx)
        assert exc5.value.retryable

    def test_partial_download_leaves_no_file(self, tmp_path):
        session = FakeSession(FakeResponse(chunks=(b"partial",), fail_midway=True))
        with pytest.raises(DownloadError) as exc:
            download_pbp([2018], destination=tmp_path, session=session)
        assert exc.value.retryable
        assert list(tmp_path.iterdir()) == []

    def test_connection_error_is_retryable(self, tmp_path):
        session = FakeSession(exc=requests.ConnectionError("refused"))
        with pytest.raises(DownloadError) as exc:
            download_pbp([2018], destination=tmp_path, session=session)
        assert exc.value.retryable
        assert exc.value.url is not None

    def test_custom_base_url(self, tmp_path):
        session = FakeSession(FakeResponse())
        download_pbp(
            [2018], destination=tmp_path, session=session,
            base_url="https://mirror.example/pbp/",
        )
        assert session.calls == ["https://mirror.example/pbp/play_by_play_2018.csv.gz"]
