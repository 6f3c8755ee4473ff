import dataclasses
import json
import math
import pathlib

import numpy as np
import pytest

from scrumrank.domain import (
    RESULT_ORDER,
    TRY_ORDER,
    OutcomeCounts,
    Venue,
    outcome_counts,
)
from scrumrank.estimate import (
    FitConfig,
    FittedModel,
    NonConvergenceError,
    PriorConfig,
    fit,
    freeze_and_refit,
    log_likelihood,
    score,
)
from scrumrank.ingest import load_matches
from scrumrank.model import (
    DEFAULT_VARIANT,
    HomeModel,
    ParameterError,
    Parameters,
    TryModel,
    VariantConfig,
    VariantParameters,
    generalized_mean,
    outcome_distribution,
)

DATA = pathlib.Path(__file__).parent / "data"

ALL_VARIANTS = (
    DEFAULT_VARIANT,
    VariantConfig(try_model=TryModel.OPPOSITION_INDEPENDENT),
    VariantConfig(try_model=TryModel.OFFENSIVE_DEFENSIVE),
    VariantConfig(home_model=HomeModel.TEAM_SPECIFIC),
)


def _random_params(rng, teams, variant):
    def draw():
        return float(np.exp(rng.normal(0, 0.6)))

    extras = None
    if variant.try_model is TryModel.OPPOSITION_INDEPENDENT:
        extras = VariantParameters(tau=draw())
    elif variant.try_model is TryModel.OFFENSIVE_DEFENSIVE:
        extras = VariantParameters(delta={t: draw() for t in teams})
    if variant.home_model is HomeModel.TEAM_SPECIFIC:
        extras = VariantParameters(home_strengths={t: draw() for t in teams},
                                   away_strengths={t: draw() for t in teams})
    return Parameters(
        strengths={t: draw() for t in teams},
        rho_n=draw(), rho_d=draw(), tau_b=draw(), tau_z=draw(),
        kappa=draw(), extras=extras,
    )


def _random_counts(rng, teams) -> OutcomeCounts:
    counts = OutcomeCounts()
    n_matches = int(rng.integers(6, 14))
    for _ in range(n_matches):
        i, j = rng.choice(len(teams), size=2, replace=False)
        venue = Venue.HOME_GROUND if rng.random() < 0.8 else Venue.NEUTRAL
        result = RESULT_ORDER[int(rng.integers(0, 5))]
        tries = TRY_ORDER[int(rng.integers(0, 4))]
        counts.add(teams[i], teams[j], venue, result, tries)
    return counts


def _bump(params: Parameters, variant: VariantConfig, group: str,
          key: str | None, h: float) -> Parameters:
    """Multiply one parameter by exp(h), returning a new Parameters."""
    factor = math.exp(h)
    if group in ("strengths",):
        strengths = dict(params.strengths)
        strengths[key] *= factor
        return dataclasses.replace(params, strengths=strengths)
    if group in ("rho_n", "rho_d", "tau_b", "tau_z", "kappa"):
        return dataclasses.replace(params,
                                   **{group: getattr(params, group) * factor})
    extras = params.extras
    if group == "tau":
        return dataclasses.replace(
            params, extras=dataclasses.replace(extras, tau=extras.tau * factor))
    if group == "delta":
        delta = dict(extras.delta)
        delta[key] *= factor
        return dataclasses.replace(
            params, extras=dataclasses.replace(extras, delta=delta))
    if group == "home_strengths":
        values = dict(extras.home_strengths)
        values[key] *= factor
        return dataclasses.replace(
            params,
            extras=dataclasses.replace(extras, home_strengths=values))
    if group == "away_strengths":
        values = dict(extras.away_strengths)
        values[key] *= factor
        return dataclasses.replace(
            params,
            extras=dataclasses.replace(extras, away_strengths=values))
    raise AssertionError(group)


def _gradient_entries(params: Parameters, variant: VariantConfig, teams):
    entries = [(name, None) for name in
               ("rho_n", "rho_d", "tau_b", "tau_z", "kappa")]
    if variant.home_model is HomeModel.TEAM_SPECIFIC:
        entries += [("home_strengths", t) for t in teams]
        entries += [("away_strengths", t) for t in teams]
    else:
        entries += [("strengths", t) for t in teams]
    if variant.try_model is TryModel.OPPOSITION_INDEPENDENT:
        entries.append(("tau", None))
    if variant.try_model is TryModel.OFFENSIVE_DEFENSIVE:
        entries += [("delta", t) for t in teams]
    return entries


def _score_entry(s, group, key):
    value = getattr(s, group)
    if key is not None:
        value = value[key]
    return value


def check_gradient(params, counts, variant, weight, h=1e-5,
                   rtol=1e-6, atol=1e-9):
    prior = PriorConfig(weight=weight)
    teams = counts.teams()
    s = score(params, counts, prior=prior, variant=variant)
    for group, key in _gradient_entries(params, variant, teams):
        analytic = _score_entry(s, group, key)
        if analytic is None:
            continue  # not part of this variant
        up = log_likelihood(_bump(params, variant, group, key, h),
                            counts, prior=prior, variant=variant)
        down = log_likelihood(_bump(params, variant, group, key, -h),
                              counts, prior=prior, variant=variant)
        numeric = (up - down) / (2 * h)
        assert abs(analytic - numeric) <= atol + rtol * abs(numeric), \
            f"{group}[{key}]: analytic {analytic} vs numeric {numeric}"


def test_score_matches_finite_differences_each_variant():
    rng = np.random.default_rng(2024)
    teams = ("A", "B", "C", "D")
    for trial, variant in enumerate(ALL_VARIANTS * 3):
        params = _random_params(rng, teams, variant)
        counts = _random_counts(rng, teams)
        weight = (0.0, 0.7, 1.9)[trial % 3]
        check_gradient(params, counts, variant, weight)


def test_score_vanishes_at_the_fitted_maximum():
    counts = outcome_counts(load_matches(DATA / "golden_season.csv").records)
    model = fit(counts, FitConfig(prior=PriorConfig(weight=0.0)))
    s = score(model.raw_parameters, counts)
    assert s.max_norm() <= 1e-6


def test_fit_reproduces_every_teams_points_total():
    counts = outcome_counts(load_matches(DATA / "golden_season.csv").records)
    model = fit(counts, FitConfig(prior=PriorConfig(weight=0.0)))
    report = model.report
    for team, observed in report.observed_points.items():
        expected = report.expected_points[team]
        assert abs(observed - expected) / max(1.0, observed) <= 1e-6


def test_points_totals_include_the_prior_matches():
    counts = outcome_counts(load_matches(DATA / "golden_season.csv").records)
    weight = 2.0
    model = fit(counts, FitConfig(prior=PriorConfig(weight=weight)))
    raw_totals = outcome_counts(
        load_matches(DATA / "golden_season.csv").records)
    # observed totals carry the notional prior point per side
    from scrumrank.domain import sufficient_stats_from_counts
    stats = sufficient_stats_from_counts(raw_totals)
    for team, observed in model.report.observed_points.items():
        assert abs(observed - (stats.points[team] + weight)) < 1e-9
        assert abs(observed - model.report.expected_points[team]) <= 1e-6


def test_fitted_strengths_have_unit_generalized_mean():
    counts = outcome_counts(load_matches(DATA / "golden_season.csv").records)
    for weight in (0.0, 1.0, 4.0):
        model = fit(counts, FitConfig(prior=PriorConfig(weight=weight)))
        assert abs(generalized_mean(model.parameters.strengths) - 1.0) < 1e-10


def test_raw_and_normalized_parameters_agree_on_probabilities():
    counts = outcome_counts(load_matches(DATA / "golden_season.csv").records)
    model = fit(counts, FitConfig(prior=PriorConfig(weight=1.0)))
    teams = counts.teams()
    for home, away in ((teams[0], teams[1]), (teams[2], teams[5])):
        raw = outcome_distribution(model.raw_parameters, home, away)
        normalized = outcome_distribution(model.parameters, home, away)
        assert np.allclose(raw.joint(), normalized.joint(), atol=1e-12)


def test_zero_prior_pins_then_normalizes():
    counts = outcome_counts(load_matches(DATA / "golden_season.csv").records)
    model = fit(counts, FitConfig(prior=PriorConfig(weight=0.0)))
    first_team = counts.teams()[0]
    assert model.raw_parameters.strengths[first_team] == 1.0
    assert abs(generalized_mean(model.parameters.strengths) - 1.0) < 1e-10


def test_fit_is_deterministic():
    counts = outcome_counts(load_matches(DATA / "golden_season.csv").records)
    config = FitConfig(prior=PriorConfig(weight=1.0))
    assert fit(counts, config).to_json() == fit(counts, config).to_json()


def test_single_decisive_match_diverges_without_prior():
    # with the structural block frozen, a lone maximum-points win pushes
    # the winner's strength to infinity unless the prior anchors it
    counts = OutcomeCounts()
    counts.add("Winner", "Loser", Venue.HOME_GROUND,
               RESULT_ORDER[0], TRY_ORDER[1])
    fixed = {"rho_n": 0.448, "rho_d": 0.212, "tau_b": 0.042,
             "tau_z": 2.801, "kappa": 1.113}
    with pytest.raises(NonConvergenceError) as err:
        fit(counts, FitConfig(prior=PriorConfig(weight=0.0), freeze=fixed))
    assert "Winner" in err.value.diagnosis
    assert "prior" in err.value.diagnosis
    assert err.value.best_parameters is not None
    assert err.value.gradient_norm >= 0.0
    # the same data fits fine once the prior anchors the scale
    model = fit(counts, FitConfig(prior=PriorConfig(weight=1.0),
                                  freeze=fixed))
    assert model.parameters.strengths["Winner"] \
        > model.parameters.strengths["Loser"]


def test_iteration_budget_failure_reports_diagnostics():
    counts = outcome_counts(load_matches(DATA / "golden_season.csv").records)
    with pytest.raises(NonConvergenceError) as err:
        fit(counts, FitConfig(prior=PriorConfig(weight=1.0),
                              max_iterations=1))
    assert err.value.iterations <= 1


def test_freeze_and_refit_holds_structural_values():
    counts = outcome_counts(load_matches(DATA / "golden_season.csv").records)
    fixed = {"rho_n": 0.448, "rho_d": 0.212, "tau_b": 0.042,
             "tau_z": 2.801, "kappa": 1.113}
    model = freeze_and_refit(counts, fixed,
                             FitConfig(prior=PriorConfig(weight=1.0)))
    raw = model.raw_parameters
    for name, value in fixed.items():
        assert getattr(raw, name) == value
    # strengths still reach their own optimum given the frozen block
    s = score(raw, counts, prior=PriorConfig(weight=1.0))
    assert max(abs(v) for v in s.strengths.values()) <= 1e-6


def test_freeze_rejects_unknown_or_invalid_names():
    counts = outcome_counts(load_matches(DATA / "golden_season.csv").records)
    with pytest.raises(ParameterError):
        fit(counts, FitConfig(freeze={"gamma": 1.0}))
    with pytest.raises(ParameterError):
        fit(counts, FitConfig(freeze={"rho_n": -1.0}))


def test_fit_requires_two_teams():
    with pytest.raises(ParameterError):
        fit(OutcomeCounts())


def test_prior_config_validation():
    with pytest.raises(ParameterError):
        PriorConfig(weight=-0.5)
    with pytest.raises(ParameterError):
        PriorConfig(weight=1.0, dummy_strength=2.0)


def test_fitted_model_json_round_trip():
    counts = outcome_counts(load_matches(DATA / "golden_season.csv").records)
    model = fit(counts, FitConfig(prior=PriorConfig(weight=1.0)))
    text = model.to_json()
    again = FittedModel.from_json(text)
    assert again.to_json() == text
    assert again.parameters.strengths == model.parameters.strengths
    assert again.variant == model.variant
    doc = json.loads(text)
    assert set(doc) == {"variant", "prior", "points_system", "parameters",
                        "raw_parameters", "convergence"}


def test_log_likelihood_is_maximal_at_the_fit():
    counts = outcome_counts(load_matches(DATA / "golden_season.csv").records)
    config = FitConfig(prior=PriorConfig(weight=1.0))
    model = fit(counts, config)
    best = log_likelihood(model.raw_parameters, counts, prior=config.prior)
    rng = np.random.default_rng(5)
    teams = counts.teams()
    for _ in range(5):
        team = teams[int(rng.integers(len(teams)))]
        worse = _bump(model.raw_parameters, DEFAULT_VARIANT, "strengths",
                      team, float(rng.normal(0, 0.3)))
        assert log_likelihood(worse, counts, prior=config.prior) < best


def test_variant_fits_converge_on_the_golden_season():
    counts = outcome_counts(load_matches(DATA / "golden_season.csv").records)
    for variant in ALL_VARIANTS:
        model = fit(counts, FitConfig(variant=variant,
                                      prior=PriorConfig(weight=1.0)))
        assert model.report.final_gradient_norm <= 1e-8
        s = score(model.raw_parameters, counts,
                  prior=PriorConfig(weight=1.0), variant=variant)
        assert s.max_norm() <= 1e-6
