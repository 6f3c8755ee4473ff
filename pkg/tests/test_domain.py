import numpy as np
import pytest

from scrumrank.domain import (
    DEFAULT_POINTS,
    RESULT_ORDER,
    TRY_ORDER,
    MatchRecord,
    OutcomeCounts,
    PointsSystem,
    ResultOutcome,
    TryOutcome,
    Venue,
    classify_match,
    classify_result,
    classify_try,
    league_points,
    match_league_points,
    outcome_counts,
    result_points_arrays,
    sufficient_stats,
    try_points_arrays,
)


def test_result_classification_margin_boundaries():
    # the losing-bonus margin itself still counts as narrow
    assert classify_result(20, 13) is ResultOutcome.HOME_NARROW
    assert classify_result(20, 12) is ResultOutcome.HOME_WIDE
    assert classify_result(13, 20) is ResultOutcome.AWAY_NARROW
    assert classify_result(12, 20) is ResultOutcome.AWAY_WIDE
    assert classify_result(17, 17) is ResultOutcome.DRAW
    assert classify_result(1, 0) is ResultOutcome.HOME_NARROW


def test_result_classification_respects_custom_margin():
    points = PointsSystem(losing_bonus_margin=5)
    assert classify_result(20, 14, points) is ResultOutcome.HOME_WIDE
    assert classify_result(20, 15, points) is ResultOutcome.HOME_NARROW


def test_try_classification_threshold():
    assert classify_try(4, 4) is TryOutcome.BOTH_BONUS
    assert classify_try(4, 3) is TryOutcome.HOME_BONUS
    assert classify_try(0, 4) is TryOutcome.AWAY_BONUS
    assert classify_try(3, 3) is TryOutcome.ZERO_BONUS
    points = PointsSystem(try_bonus_threshold=3)
    assert classify_try(3, 0, points) is TryOutcome.HOME_BONUS


def test_league_points_all_cells():
    expected = {
        (ResultOutcome.HOME_WIDE, TryOutcome.ZERO_BONUS): (4, 0),
        (ResultOutcome.HOME_WIDE, TryOutcome.HOME_BONUS): (5, 0),
        (ResultOutcome.HOME_NARROW, TryOutcome.ZERO_BONUS): (4, 1),
        (ResultOutcome.HOME_NARROW, TryOutcome.BOTH_BONUS): (5, 2),
        (ResultOutcome.DRAW, TryOutcome.ZERO_BONUS): (2, 2),
        (ResultOutcome.DRAW, TryOutcome.AWAY_BONUS): (2, 3),
        (ResultOutcome.AWAY_NARROW, TryOutcome.ZERO_BONUS): (1, 4),
        (ResultOutcome.AWAY_WIDE, TryOutcome.BOTH_BONUS): (1, 5),
    }
    for (result, tries), want in expected.items():
        assert league_points(result, tries) == want


def test_points_arrays_agree_with_league_points():
    res_home, res_away = result_points_arrays()
    try_home, try_away = try_points_arrays()
    for r, result in enumerate(RESULT_ORDER):
        for t, tries in enumerate(TRY_ORDER):
            home, away = league_points(result, tries)
            assert res_home[r] + try_home[t] == home
            assert res_away[r] + try_away[t] == away


def test_league_points_custom_system():
    points = PointsSystem(win_points=3, draw_points=1, loss_points=0)
    assert league_points(ResultOutcome.HOME_WIDE, TryOutcome.ZERO_BONUS,
                         points) == (3, 0)
    assert league_points(ResultOutcome.DRAW, TryOutcome.ZERO_BONUS,
                         points) == (1, 1)
    assert league_points(ResultOutcome.AWAY_NARROW, TryOutcome.ZERO_BONUS,
                         points) == (1, 3)


def test_points_system_validation():
    with pytest.raises(ValueError):
        PointsSystem(win_points=2, draw_points=2)
    with pytest.raises(ValueError):
        PointsSystem(losing_bonus_margin=-1)
    with pytest.raises(ValueError):
        PointsSystem(try_bonus_threshold=0)


def test_match_record_validation():
    with pytest.raises(ValueError):
        MatchRecord("A", "A", 10, 5, 1, 1)
    with pytest.raises(ValueError):
        MatchRecord("", "B", 10, 5, 1, 1)
    with pytest.raises(ValueError):
        MatchRecord("A", "B", -1, 5, 0, 1)
    # a side's score must support its try count
    with pytest.raises(ValueError):
        MatchRecord("A", "B", 19, 5, 4, 1)
    with pytest.raises(ValueError):
        MatchRecord("A", "B", 20, 4, 4, 1)
    MatchRecord("A", "B", 20, 5, 4, 1)


def test_override_must_be_narrow():
    with pytest.raises(ValueError):
        MatchRecord("A", "B", 0, 0, 0, 0,
                    result_override=ResultOutcome.HOME_WIDE)
    record = MatchRecord("A", "B", 0, 0, 0, 0,
                         result_override=ResultOutcome.AWAY_NARROW)
    assert classify_match(record) == (ResultOutcome.AWAY_NARROW,
                                      TryOutcome.ZERO_BONUS)


def test_match_league_points_examples():
    record = MatchRecord("A", "B", 31, 5, 4, 1)
    assert match_league_points(record) == (5, 0)
    narrow = MatchRecord("A", "B", 18, 22, 2, 4)
    assert match_league_points(narrow) == (1, 5)


def test_outcome_counts_add_and_validate():
    counts = OutcomeCounts()
    counts.add("A", "B", Venue.HOME_GROUND, ResultOutcome.HOME_WIDE,
               TryOutcome.HOME_BONUS)
    counts.add("A", "B", Venue.HOME_GROUND, ResultOutcome.DRAW,
               TryOutcome.ZERO_BONUS)
    counts.add("B", "C", Venue.NEUTRAL, ResultOutcome.AWAY_NARROW, None)
    assert counts.teams() == ["A", "B", "C"]
    assert counts.total_matches() == 3
    counts.validate()
    pair = counts.pairs[("A", "B", Venue.HOME_GROUND)]
    assert pair.result.sum() == 2 and pair.tries.sum() == 2
    # the override match was kept out of the try counts
    neutral = counts.pairs[("B", "C", Venue.NEUTRAL)]
    assert neutral.result.sum() == 1 and neutral.tries.sum() == 0
    with pytest.raises(ValueError):
        counts.add("A", "A", Venue.HOME_GROUND, ResultOutcome.DRAW,
                   TryOutcome.ZERO_BONUS)


def test_outcome_counts_rejects_excess_try_outcomes():
    counts = OutcomeCounts()
    counts.add("A", "B", Venue.HOME_GROUND, ResultOutcome.DRAW,
               TryOutcome.ZERO_BONUS)
    counts.pairs[("A", "B", Venue.HOME_GROUND)].tries[0] += 1
    with pytest.raises(ValueError):
        counts.validate()


def _hand_season() -> list[MatchRecord]:
    return [
        # home wide win with home try bonus: 5 - 0
        MatchRecord("A", "B", 33, 10, 4, 2),
        # away narrow win, both bonus: 2 - 5
        MatchRecord("A", "C", 25, 30, 4, 4),
        # draw, zero bonus, at a neutral ground: 2 - 2
        MatchRecord("B", "C", 16, 16, 2, 2, venue=Venue.NEUTRAL),
        # declared result only: narrow home win, no try information: 4 - 1
        MatchRecord("C", "A", 0, 0, 0, 0,
                    result_override=ResultOutcome.HOME_NARROW),
    ]


def test_sufficient_stats_hand_computed():
    stats = sufficient_stats(_hand_season())
    # per-team points tallied by hand from the four matches above
    assert stats.points == {"A": 5 + 2 + 1, "B": 0 + 2, "C": 5 + 2 + 4}
    assert stats.narrow == 2  # the away narrow win and the override
    assert stats.draws == 1
    assert stats.both_bonus == 1
    assert stats.zero_bonus == 1  # the draw; the override has no try outcome
    # home points minus away points, neutral match excluded:
    # (5-0) + (2-5) + (4-1) = 5
    assert stats.home_edge == 5


def test_sufficient_stats_zero_bonus_counts_exclude_overrides():
    counts = outcome_counts(_hand_season())
    # the override match contributes no try outcome at all
    total_tries = sum(int(pc.tries.sum()) for pc in counts.pairs.values())
    assert total_tries == 3
    stats = sufficient_stats(_hand_season())
    assert stats.zero_bonus == 1


def test_outcome_counts_groups_by_venue():
    records = [
        MatchRecord("A", "B", 10, 5, 1, 1),
        MatchRecord("A", "B", 10, 5, 1, 1, venue=Venue.NEUTRAL),
    ]
    counts = outcome_counts(records)
    assert len(counts.pairs) == 2


def test_enum_orders_are_stable():
    assert [o.value for o in RESULT_ORDER] == [
        "home_wide", "home_narrow", "draw", "away_narrow", "away_wide"]
    assert [o.value for o in TRY_ORDER] == [
        "both_bonus", "home_bonus", "away_bonus", "zero_bonus"]
    assert DEFAULT_POINTS.win_points == 4
