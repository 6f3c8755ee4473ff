"""Outcome probabilities for a fixture between two rated teams.

The model is log-linear: every outcome cell awarding (a, b) league points to
the home and away side has weight

    kappa^(a - b) * pi_i^a * pi_j^b * (per-cell propensity multipliers)

normalized independently within the result block (five cells) and the try
block (four cells). Strong teams are therefore pushed towards high-points
cells exactly in proportion to the points on offer, which is what makes the
fitted model reproduce every team's actual points total over its actual
schedule. The home-advantage factor ``kappa`` applies only at a team's own
ground; neutral fixtures drop it.

Multipliers for the default variant:

    result   narrow cells carry rho_n, the draw cell carries rho_d
    try      the both-bonus cell carries tau_b, the zero-bonus cell tau_z

Variants swap the try block (a single shared ``tau``, or per-team defensive
strengths) or the home-advantage treatment (per-team home and away strengths
instead of pi and kappa, or no home advantage at all).

All probability evaluation happens in the log domain with a max-shifted
normalization, so enormous strength ratios cannot overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .domain import (
    DEFAULT_POINTS,
    RESULT_ORDER,
    TRY_ORDER,
    PointsSystem,
    ResultOutcome,
    TryOutcome,
    Venue,
    league_points,
    result_points_arrays,
    try_points_arrays,
)


class ParameterError(ValueError):
    """A parameter value outside its legal domain."""


class WeightOverflowError(OverflowError):
    """Level-form weights overflowed; evaluate probabilities instead.

    The probability functions normalize in the log domain and never
    overflow, so this only arises when raw weights are requested for
    extreme parameter values.
    """


class TryModel(Enum):
    OPPOSITION_DEPENDENT = "opposition-dependent"
    OPPOSITION_INDEPENDENT = "opposition-independent"
    OFFENSIVE_DEFENSIVE = "offensive-defensive"


class HomeModel(Enum):
    SINGLE_KAPPA = "single-kappa"
    TEAM_SPECIFIC = "team-specific"
    NONE = "none"


@dataclass(frozen=True)
class VariantConfig:
    """Which try-block and home-advantage treatment the model uses."""

    try_model: TryModel = TryModel.OPPOSITION_DEPENDENT
    home_model: HomeModel = HomeModel.SINGLE_KAPPA

    def __post_init__(self):
        if (self.home_model is HomeModel.TEAM_SPECIFIC
                and self.try_model is not TryModel.OPPOSITION_DEPENDENT):
            raise ParameterError(
                "team-specific home advantage is only defined with the "
                "opposition-dependent try block"
            )


DEFAULT_VARIANT = VariantConfig()


@dataclass(frozen=True)
class VariantParameters:
    """Extra parameters used by the non-default variants.

    tau             shared bonus propensity (opposition-independent tries)
    delta           per-team defensive strength; offence is pi / delta
    home_strengths  per-team strength when playing at home
    away_strengths  per-team strength when playing away
    """

    tau: float | None = None
    delta: Mapping[str, float] | None = None
    home_strengths: Mapping[str, float] | None = None
    away_strengths: Mapping[str, float] | None = None


@dataclass(frozen=True)
class Parameters:
    """Full parameter set: per-team strengths plus structural propensities."""

    strengths: Mapping[str, float]
    rho_n: float = 1.0
    rho_d: float = 1.0
    tau_b: float = 1.0
    tau_z: float = 1.0
    kappa: float = 1.0
    extras: VariantParameters | None = None

    def validate(self, variant: VariantConfig = DEFAULT_VARIANT):
        def _positive(name, value):
            if not (isinstance(value, (int, float)) and math.isfinite(value)
                    and value > 0):
                raise ParameterError(f"{name} must be positive and finite, "
                                     f"got {value!r}")

        for name in ("rho_n", "rho_d", "tau_b", "tau_z", "kappa"):
            _positive(name, getattr(self, name))
        if variant.home_model is HomeModel.TEAM_SPECIFIC:
            extras = self.extras
            if extras is None or extras.home_strengths is None \
                    or extras.away_strengths is None:
                raise ParameterError("team-specific variant needs home and "
                                     "away strengths")
            if set(extras.home_strengths) != set(extras.away_strengths):
                raise ParameterError("home and away strengths must cover the "
                                     "same teams")
            for team, value in extras.home_strengths.items():
                _positive(f"home strength of {team}", value)
            for team, value in extras.away_strengths.items():
                _positive(f"away strength of {team}", value)
        else:
            for team, value in self.strengths.items():
                _positive(f"strength of {team}", value)
        if variant.try_model is TryModel.OPPOSITION_INDEPENDENT:
            if self.extras is None or self.extras.tau is None:
                raise ParameterError("opposition-independent variant needs tau")
            _positive("tau", self.extras.tau)
        if variant.try_model is TryModel.OFFENSIVE_DEFENSIVE:
            if self.extras is None or self.extras.delta is None:
                raise ParameterError("offensive-defensive variant needs delta")
            if set(self.extras.delta) != set(self.strengths):
                raise ParameterError("delta must cover the same teams as "
                                     "strengths")
            for team, value in self.extras.delta.items():
                _positive(f"delta of {team}", value)


@dataclass(frozen=True)
class OutcomeBlock:
    """One independently normalized outcome family (result or try block).

    home_points / away_points double as the strength exponents: the
    log-weight of a cell is linear in the log parameters with these
    coefficients. ``defence_exp`` is the exponent applied to both sides'
    log defensive strengths (offensive-defensive try block only).
    """

    outcomes: tuple
    home_points: np.ndarray
    away_points: np.ndarray
    structural: Mapping[str, np.ndarray]
    kappa_exp: np.ndarray
    defence_exp: np.ndarray | None = None

    @property
    def n_cells(self) -> int:
        return len(self.outcomes)


def result_block(points: PointsSystem = DEFAULT_POINTS) -> OutcomeBlock:
    """Five-cell result block with narrow and draw propensities."""
    home, away = result_points_arrays(points)
    structural = {
        "rho_n": np.array([0.0, 1.0, 0.0, 1.0, 0.0]),
        "rho_d": np.array([0.0, 0.0, 1.0, 0.0, 0.0]),
    }
    return OutcomeBlock(RESULT_ORDER, home, away, structural, home - away)


def try_block(variant: VariantConfig = DEFAULT_VARIANT) -> OutcomeBlock:
    """Four-cell try block for the configured variant."""
    home, away = try_points_arrays()
    kappa_exp = home - away
    if variant.try_model is TryModel.OPPOSITION_DEPENDENT:
        structural = {
            "tau_b": np.array([1.0, 0.0, 0.0, 0.0]),
            "tau_z": np.array([0.0, 0.0, 0.0, 1.0]),
        }
        return OutcomeBlock(TRY_ORDER, home, away, structural, kappa_exp)
    if variant.try_model is TryModel.OPPOSITION_INDEPENDENT:
        # Independent per-side coin flips: bonus weight tau * pi (times
        # kappa or 1/kappa), no-bonus weight 1. The four-cell form below is
        # the product of the two per-side normalizations.
        structural = {"tau": home + away}
        return OutcomeBlock(TRY_ORDER, home, away, structural, kappa_exp)
    # Offensive-defensive: both-bonus weight pi_i pi_j / (delta_i delta_j),
    # single-bonus weights pi, zero-bonus weight delta_i delta_j.
    return OutcomeBlock(TRY_ORDER, home, away, {}, kappa_exp,
                        defence_exp=1.0 - home - away)


def block_log_weights(block: OutcomeBlock,
                      log_pi_home: float, log_pi_away: float,
                      log_structural: Mapping[str, float],
                      log_kappa: float, at_home: bool,
                      log_def_home: float = 0.0,
                      log_def_away: float = 0.0) -> np.ndarray:
    """Log cell weights for one fixture."""
    lw = block.home_points * log_pi_home + block.away_points * log_pi_away
    for name, exps in block.structural.items():
        lw = lw + exps * log_structural[name]
    if at_home and log_kappa != 0.0:
        lw = lw + block.kappa_exp * log_kappa
    if block.defence_exp is not None:
        lw = lw + block.defence_exp * (log_def_home + log_def_away)
    return lw


def _normalize_log_weights(lw: np.ndarray) -> np.ndarray:
    shifted = lw - lw.max()
    weights = np.exp(shifted)
    return weights / weights.sum()


def _level_weights(lw: np.ndarray, context: str) -> np.ndarray:
    with np.errstate(over="ignore"):
        weights = np.exp(lw)
    if not np.all(np.isfinite(weights)):
        raise WeightOverflowError(
            f"{context} weights overflow at these parameter values; use the "
            "probability functions, which normalize in the log domain"
        )
    return weights


def _structural_logs(params: Parameters) -> dict[str, float]:
    logs = {
        "rho_n": math.log(params.rho_n),
        "rho_d": math.log(params.rho_d),
        "tau_b": math.log(params.tau_b),
        "tau_z": math.log(params.tau_z),
    }
    if params.extras is not None and params.extras.tau is not None:
        logs["tau"] = math.log(params.extras.tau)
    return logs


def result_weights(pi_home: float, pi_away: float, params: Parameters,
                   at_home: bool = True,
                   points: PointsSystem = DEFAULT_POINTS) -> np.ndarray:
    """Unnormalized result-cell weights in RESULT_ORDER."""
    lw = block_log_weights(result_block(points), math.log(pi_home),
                           math.log(pi_away), _structural_logs(params),
                           math.log(params.kappa), at_home)
    return _level_weights(lw, "result")


def result_probs(pi_home: float, pi_away: float, params: Parameters,
                 at_home: bool = True,
                 points: PointsSystem = DEFAULT_POINTS) -> np.ndarray:
    """Result-cell probabilities in RESULT_ORDER."""
    lw = block_log_weights(result_block(points), math.log(pi_home),
                           math.log(pi_away), _structural_logs(params),
                           math.log(params.kappa), at_home)
    return _normalize_log_weights(lw)


def try_probs(pi_home: float, pi_away: float, params: Parameters,
              at_home: bool = True,
              variant: VariantConfig = DEFAULT_VARIANT,
              defence_home: float | None = None,
              defence_away: float | None = None) -> np.ndarray:
    """Try-cell probabilities in TRY_ORDER."""
    log_def_home = log_def_away = 0.0
    if variant.try_model is TryModel.OFFENSIVE_DEFENSIVE:
        if defence_home is None or defence_away is None:
            raise ParameterError("offensive-defensive try probabilities need "
                                 "both defensive strengths")
        log_def_home = math.log(defence_home)
        log_def_away = math.log(defence_away)
    log_kappa = 0.0
    if variant.home_model is HomeModel.SINGLE_KAPPA:
        log_kappa = math.log(params.kappa)
    lw = block_log_weights(try_block(variant), math.log(pi_home),
                           math.log(pi_away), _structural_logs(params),
                           log_kappa, at_home, log_def_home, log_def_away)
    return _normalize_log_weights(lw)


@dataclass(frozen=True)
class OutcomeDistribution:
    """Result and try probabilities for one fixture."""

    result: np.ndarray
    tries: np.ndarray

    def joint(self) -> np.ndarray:
        """5 x 4 joint probabilities; the two blocks are independent."""
        return np.outer(self.result, self.tries)

    def validate(self, tol: float = 1e-12):
        for name, probs in (("result", self.result), ("try", self.tries)):
            if abs(probs.sum() - 1.0) > tol or (probs < 0).any():
                raise ValueError(f"{name} probabilities are not a distribution")


def _side_strengths(params: Parameters, home: str, away: str,
                    variant: VariantConfig) -> tuple[float, float]:
    if variant.home_model is HomeModel.TEAM_SPECIFIC:
        return (params.extras.home_strengths[home],
                params.extras.away_strengths[away])
    return params.strengths[home], params.strengths[away]


def outcome_distribution(params: Parameters, home: str, away: str,
                         variant: VariantConfig = DEFAULT_VARIANT,
                         venue: Venue = Venue.HOME_GROUND,
                         points: PointsSystem = DEFAULT_POINTS
                         ) -> OutcomeDistribution:
    """Outcome distribution for a named fixture."""
    pi_home, pi_away = _side_strengths(params, home, away, variant)
    at_home = venue is Venue.HOME_GROUND
    effective = params
    if variant.home_model is not HomeModel.SINGLE_KAPPA:
        effective = replace(params, kappa=1.0)
    defence_home = defence_away = None
    if variant.try_model is TryModel.OFFENSIVE_DEFENSIVE:
        defence_home = params.extras.delta[home]
        defence_away = params.extras.delta[away]
    return OutcomeDistribution(
        result=result_probs(pi_home, pi_away, effective, at_home, points),
        tries=try_probs(pi_home, pi_away, effective, at_home, variant,
                        defence_home, defence_away),
    )


def expected_points(params: Parameters, home: str, away: str,
                    variant: VariantConfig = DEFAULT_VARIANT,
                    venue: Venue = Venue.HOME_GROUND,
                    points: PointsSystem = DEFAULT_POINTS
                    ) -> tuple[float, float]:
    """Expected league points (home, away) for a named fixture."""
    dist = outcome_distribution(params, home, away, variant, venue, points)
    res_home, res_away = result_points_arrays(points)
    try_home, try_away = try_points_arrays()
    home_exp = dist.result @ res_home + dist.tries @ try_home
    away_exp = dist.result @ res_away + dist.tries @ try_away
    return float(home_exp), float(away_exp)


@dataclass(frozen=True)
class OutcomeRates:
    """Headline probabilities for a fixture between two mean-strength teams."""

    wide_result: float
    narrow_result: float
    draw: float
    home_away_win_ratio: float
    both_try_bonus: float
    zero_try_bonus: float


@dataclass(frozen=True)
class StructuralInterpretation:
    """Mean-strength fixture rates with and without home advantage."""

    with_home_advantage: OutcomeRates
    neutral: OutcomeRates


def _rates(params: Parameters, at_home: bool,
           points: PointsSystem) -> OutcomeRates:
    rp = result_probs(1.0, 1.0, params, at_home, points)
    tp = try_probs(1.0, 1.0, params, at_home)
    home_win = rp[0] + rp[1]
    away_win = rp[3] + rp[4]
    return OutcomeRates(
        wide_result=float(rp[0] + rp[4]),
        narrow_result=float(rp[1] + rp[3]),
        draw=float(rp[2]),
        home_away_win_ratio=float(home_win / away_win),
        both_try_bonus=float(tp[0]),
        zero_try_bonus=float(tp[3]),
    )


def interpret_structural(params: Parameters,
                         points: PointsSystem = DEFAULT_POINTS
                         ) -> StructuralInterpretation:
    """What the propensity parameters say about a mean-strength fixture.

    Reported twice: once with the home-advantage factor applied and once
    for a neutral fixture, because the narrow/draw/bonus shares shift
    slightly once kappa is in play.
    """
    return StructuralInterpretation(
        with_home_advantage=_rates(params, True, points),
        neutral=_rates(params, False, points),
    )


def gauge_transform(params: Parameters, c: float) -> Parameters:
    """Rescale all strengths by ``c`` without changing any probability.

    The propensity parameters absorb the rescaling: rho_n, tau_b (and the
    shared tau) divide by c, tau_z multiplies by c, defensive strengths
    scale by sqrt(c), and rho_d and kappa are untouched.
    """
    if not (math.isfinite(c) and c > 0):
        raise ParameterError(f"scale must be positive and finite, got {c!r}")
    extras = params.extras
    if extras is not None:
        new_extras = VariantParameters(
            tau=None if extras.tau is None else extras.tau / c,
            delta=None if extras.delta is None else
            {team: math.sqrt(c) * value for team, value in extras.delta.items()},
            home_strengths=None if extras.home_strengths is None else
            {team: c * value for team, value in extras.home_strengths.items()},
            away_strengths=None if extras.away_strengths is None else
            {team: c * value for team, value in extras.away_strengths.items()},
        )
    else:
        new_extras = None
    return Parameters(
        strengths={team: c * value for team, value in params.strengths.items()},
        rho_n=params.rho_n / c,
        rho_d=params.rho_d,
        tau_b=params.tau_b / c,
        tau_z=params.tau_z * c,
        kappa=params.kappa,
        extras=new_extras,
    )


def _strength_values(values) -> list[float]:
    if isinstance(values, Mapping):
        values = values.values()
    out = [float(v) for v in values]
    if not out:
        raise ValueError("no strengths supplied")
    for v in out:
        if v < 0 or math.isnan(v):
            raise ValueError(f"strengths must be non-negative, got {v!r}")
    return out


def generalized_mean(strengths) -> float:
    """Mean of 2 pi / (1 + pi) over the field.

    Unlike the arithmetic mean this stays finite for arbitrarily strong
    teams: each term lies in [0, 2), with an unbounded strength contributing
    exactly 2.
    """
    values = _strength_values(strengths)
    total = sum(2.0 if math.isinf(v) else 2.0 * v / (1.0 + v) for v in values)
    return total / len(values)


def solve_scale(strengths, rel_tol: float = 1e-12) -> float:
    """Positive c such that the generalized mean of c * strengths is 1.

    The mean is strictly increasing in c, from 0 towards 2 (or from the
    share of unbounded strengths), so bisection on an expanding bracket
    finds the unique root when one exists.
    """
    values = _strength_values(strengths)

    def mean_at(c: float) -> float:
        total = sum(2.0 if math.isinf(v) else 2.0 * c * v / (1.0 + c * v)
                    for v in values)
        return total / len(values)

    lo = hi = 1.0
    for _ in range(2200):
        if mean_at(lo) < 1.0:
            break
        lo /= 2.0
    else:
        raise ValueError("no positive scale achieves a generalized mean of 1; "
                         "too many unbounded strengths")
    for _ in range(2200):
        if mean_at(hi) > 1.0:
            break
        hi *= 2.0
    else:
        raise ValueError("no positive scale achieves a generalized mean of 1; "
                         "strengths are all zero or vanishing")
    while hi - lo > rel_tol * lo:
        mid = 0.5 * (lo + hi)
        if mean_at(mid) < 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def arithmetic_normalize(strengths: Mapping[str, float]) -> dict[str, float]:
    """Rescale strengths to arithmetic mean 1; fails on unbounded values."""
    values = list(strengths.values())
    if not values:
        raise ValueError("no strengths supplied")
    if any(math.isinf(v) for v in values):
        raise ValueError("an arithmetic mean of 1 is unreachable with an "
                         "unbounded strength; use the generalized mean")
    mean = sum(values) / len(values)
    if mean <= 0:
        raise ValueError("mean strength must be positive")
    return {team: value / mean for team, value in strengths.items()}


def normalize_parameters(params: Parameters,
                         variant: VariantConfig = DEFAULT_VARIANT) -> Parameters:
    """Gauge-rescale so the generalized mean of the strengths is 1."""
    if variant.home_model is HomeModel.TEAM_SPECIFIC:
        pool = list(params.extras.home_strengths.values())
        pool += list(params.extras.away_strengths.values())
        c = solve_scale(pool)
    else:
        c = solve_scale(params.strengths)
    return gauge_transform(params, c)


def joint_outcome_points(points: PointsSystem = DEFAULT_POINTS):
    """League points for every (result, try) pair, for enumeration."""
    table = {}
    for result in RESULT_ORDER:
        for tries in TRY_ORDER:
            table[(result, tries)] = league_points(result, tries, points)
    return table
