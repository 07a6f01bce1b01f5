"""Pure Nash equilibrium search, best-response dynamics, and closed-form checks.

The improvement threshold ``IMPROVEMENT_EPS`` absorbs float noise: a deviation
only counts as profitable when it beats the current utility by more than the
threshold, and best-response tie-breaking keeps the current model whenever it
is within the threshold of the best alternative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BudgetExceededError, InvalidInstanceError, InvalidParameterError
from . import game
from .game import GameSpec, StrategyProfile, as_profile

__all__ = [
    "IMPROVEMENT_EPS",
    "Deviation",
    "PneCheck",
    "EquilibriumClassification",
    "DynamicsStep",
    "DynamicsOutcome",
    "ConditionRow",
    "ConditionReport",
    "TwoPlayerConditions",
    "CentralizationParams",
    "CentralizationResult",
    "verify_pne",
    "enumerate_pne",
    "best_response",
    "run_dynamics",
    "check_differentiated_condition",
    "check_homogeneous_condition",
    "two_player_conditions",
    "centralization_check",
    "softmax_pne_scan",
    "pair_delta",
    "classify_profile",
]

IMPROVEMENT_EPS = 1e-12
DEFAULT_PROFILE_BUDGET = 10_000_000
_CHUNK = 1 << 15


# ---------------------------------------------------------------------------
# result records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Deviation:
    """A profitable unilateral deviation witnessing that a profile is not a PNE."""

    platform: int
    model: int
    gain: float


@dataclass(frozen=True)
class PneCheck:
    is_pne: bool
    witness: Deviation | None = None

    def __bool__(self) -> bool:
        return self.is_pne


@dataclass(frozen=True)
class EquilibriumClassification:
    distinct_count: int
    label: str  # fully_differentiated | homogeneous | partial


@dataclass(frozen=True)
class DynamicsStep:
    """One mover turn: the state acted on, the action, and the resulting state."""

    index: int
    mover: int
    profile_before: tuple[int, ...]
    chosen: int
    changed: bool
    profile_after: tuple[int, ...]
    utilities: tuple[float, ...]  # utilities of profile_after


@dataclass(frozen=True)
class DynamicsOutcome:
    """Result of sequential best-response dynamics.

    ``kind`` is ``equilibrium``, ``cycle``, or ``timeout``.  For cycles,
    ``cycle_profiles`` holds the repeating segment: L profiles, each followed
    by exactly one strategy change, with the (L+1)-th state equal to the first
    (same profile and same next mover).
    """

    kind: str
    trajectory: tuple[DynamicsStep, ...]
    start: tuple[int, ...]
    cycle_profiles: tuple[tuple[int, ...], ...] = ()
    equilibrium_profile: tuple[int, ...] | None = None


@dataclass(frozen=True)
class ConditionRow:
    platform: int
    current_model: int
    alt_model: int
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs


@dataclass(frozen=True)
class ConditionReport:
    holds: bool
    rows: tuple[ConditionRow, ...]


@dataclass(frozen=True)
class TwoPlayerConditions:
    differentiated: bool
    homogeneous_i: bool
    homogeneous_j: bool


@dataclass(frozen=True)
class CentralizationParams:
    """Inputs for the dominant-type homogeneity threshold check."""

    dominant_type: int
    dominant_model: int
    rho: float
    gamma_cap: float
    pi_star: float

    def __post_init__(self):
        if not self.rho > 0:
            raise InvalidParameterError("rho must be > 0")
        if self.gamma_cap < 0:
            raise InvalidParameterError("gamma_cap must be >= 0")
        if not 0.0 <= self.pi_star <= 1.0:
            raise InvalidParameterError("pi_star must lie in [0, 1]")


@dataclass(frozen=True)
class CentralizationResult:
    threshold: float
    satisfied: bool
    pne_confirmed: bool


# ---------------------------------------------------------------------------
# equilibrium verification and enumeration
# ---------------------------------------------------------------------------

def verify_pne(spec: GameSpec, profile) -> PneCheck:
    """Check that no platform can gain more than the threshold by switching model.

    On failure the returned witness names one profitable deviation.
    """
    prof = as_profile(spec, profile)
    base = game.platform_utilities(spec, prof)
    for i in range(spec.n_platforms):
        for g in range(spec.n_models):
            if g == prof[i]:
                continue
            dev = prof[:i] + (g,) + prof[i + 1:]
            gain = float(game.platform_utilities(spec, dev)[i] - base[i])
            if gain > IMPROVEMENT_EPS:
                return PneCheck(False, Deviation(i, g, gain))
    return PneCheck(True)


def classify_profile(spec: GameSpec, profile) -> EquilibriumClassification:
    prof = as_profile(spec, profile)
    distinct = len(set(prof))
    if distinct == 1:
        label = "homogeneous"
    elif distinct == spec.n_platforms:
        label = "fully_differentiated"
    else:
        label = "partial"
    return EquilibriumClassification(distinct, label)


def _decode_profiles(m: int, n: int, start: int, stop: int) -> np.ndarray:
    """Lexicographic profile block: index -> digit vector, leftmost most significant."""
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.empty((idx.shape[0], n), dtype=np.int64)
    for pos in range(n - 1, -1, -1):
        out[:, pos] = idx % m
        idx = idx // m
    return out


def _batch_utilities(spec: GameSpec, profs: np.ndarray) -> np.ndarray:
    """Utilities for a (B, N) block of profiles, returned as (B, N)."""
    s = spec.scores.scores
    w = spec.population.weights
    chosen = s[profs]  # (B, N, K)
    if spec.choice.kind == "hardmax":
        top = chosen.max(axis=1, keepdims=True)
        winners = chosen == top
        p = winners / winners.sum(axis=1, keepdims=True)
    else:
        z = chosen / spec.choice.tau
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        p = e / e.sum(axis=1, keepdims=True)
    return (p * chosen) @ w


def enumerate_pne(
    spec: GameSpec, budget: int = DEFAULT_PROFILE_BUDGET
) -> list[tuple[StrategyProfile, EquilibriumClassification]]:
    """All pure Nash equilibria of the instance, in lexicographic profile order."""
    m, n = spec.n_models, spec.n_platforms
    total = m ** n
    if total > budget:
        raise BudgetExceededError(
            f"enumeration needs {total} profiles but the budget is {budget}",
            required=total,
            budget=budget,
        )
    found: list[tuple[StrategyProfile, EquilibriumClassification]] = []
    for start in range(0, total, _CHUNK):
        profs = _decode_profiles(m, n, start, min(start + _CHUNK, total))
        base = _batch_utilities(spec, profs)
        stable = np.ones(profs.shape[0], dtype=bool)
        for i in range(n):
            for g in range(m):
                dev = profs.copy()
                dev[:, i] = g
                gain = _batch_utilities(spec, dev)[:, i] - base[:, i]
                np.logical_and(stable, gain <= IMPROVEMENT_EPS, out=stable)
            if not stable.any():
                break
        for row in profs[stable]:
            prof = StrategyProfile(row)
            found.append((prof, classify_profile(spec, prof)))
    return found


# ---------------------------------------------------------------------------
# best-response dynamics
# ---------------------------------------------------------------------------

def best_response(spec: GameSpec, profile, platform: int) -> int:
    """The platform's utility-maximizing model against the others' fixed choices.

    Keeps the current model when it is within the improvement threshold of the
    best alternative; otherwise returns the lowest-index maximizer.
    """
    prof = as_profile(spec, profile)
    values = np.empty(spec.n_models)
    for g in range(spec.n_models):
        dev = prof[:platform] + (g,) + prof[platform + 1:]
        values[g] = game.platform_utilities(spec, dev)[platform]
    best = float(values.max())
    if values[prof[platform]] >= best - IMPROVEMENT_EPS:
        return prof[platform]
    return int(np.argmax(values >= best - IMPROVEMENT_EPS))


def run_dynamics(
    spec: GameSpec,
    start,
    order: str | Sequence[int] = "round_robin",
    max_steps: int = 1000,
) -> DynamicsOutcome:
    """Sequential best-response dynamics with cycle detection.

    Movers act in the given order (default round-robin from platform 0).  A
    turn with no strict improvement advances the mover without changing the
    profile.  The run ends as ``equilibrium`` once a full pass changes
    nothing, as ``cycle`` when a (profile, next-mover) state repeats, and as
    ``timeout`` when ``max_steps`` turns elapse first.
    """
    if max_steps < 1:
        raise InvalidParameterError("max_steps must be at least 1")
    start_prof = as_profile(spec, start)
    if order == "round_robin":
        mover_order: tuple[int, ...] = tuple(range(spec.n_platforms))
    else:
        mover_order = tuple(int(i) for i in order)
        for i in mover_order:
            if not 0 <= i < spec.n_platforms:
                raise InvalidParameterError(f"mover index {i} out of range")
        if set(mover_order) != set(range(spec.n_platforms)):
            # a silent full pass certifies an equilibrium only if every
            # platform got a turn
            raise InvalidParameterError("mover order must cover every platform")

    profile = start_prof
    pos = 0
    trajectory: list[DynamicsStep] = []
    seen: dict[tuple[tuple[int, ...], int], int] = {}
    silent = 0

    for step in range(max_steps):
        state = (profile, pos)
        if state in seen:
            segment = trajectory[seen[state]:]
            return DynamicsOutcome(
                kind="cycle",
                trajectory=tuple(trajectory),
                start=start_prof,
                cycle_profiles=_cycle_profiles(segment),
            )
        seen[state] = len(trajectory)
        mover = mover_order[pos]
        chosen = best_response(spec, profile, mover)
        changed = chosen != profile[mover]
        after = profile[:mover] + (chosen,) + profile[mover + 1:]
        trajectory.append(
            DynamicsStep(
                index=step,
                mover=mover,
                profile_before=profile,
                chosen=chosen,
                changed=changed,
                profile_after=after,
                utilities=tuple(float(u) for u in game.platform_utilities(spec, after)),
            )
        )
        profile = after
        silent = 0 if changed else silent + 1
        if silent >= len(mover_order):
            return DynamicsOutcome(
                kind="equilibrium",
                trajectory=tuple(trajectory),
                start=start_prof,
                equilibrium_profile=profile,
            )
        pos = (pos + 1) % len(mover_order)

    return DynamicsOutcome(kind="timeout", trajectory=tuple(trajectory), start=start_prof)


def _cycle_profiles(segment: list[DynamicsStep]) -> tuple[tuple[int, ...], ...]:
    """The L profiles of the repeating segment, one strategy change apiece.

    Silent turns inside the segment are collapsed: the listed profiles are the
    distinct consecutive states, and the state following the last one is the
    first again.
    """
    profiles = [segment[0].profile_before]
    for step in segment:
        if step.changed:
            profiles.append(step.profile_after)
    # the final change closes the loop back to the first profile
    if len(profiles) > 1 and profiles[-1] == profiles[0]:
        profiles.pop()
    return tuple(profiles)


# ---------------------------------------------------------------------------
# closed-form equilibrium conditions
# ---------------------------------------------------------------------------

def _hardmax_only(spec: GameSpec, what: str) -> None:
    if spec.choice.kind != "hardmax":
        raise InvalidInstanceError(f"{what} is defined for hardmax instances")


def check_differentiated_condition(spec: GameSpec, profile) -> ConditionReport:
    """Margin test for a fully differentiated profile being a PNE.

    For every platform i and alternative model g, the profile's average-score
    edge must cover the deviation-advantage swing:
    T_{f_i} - T_g >= delta_g(f with i->g) - delta_{f_i}(f).
    """
    _hardmax_only(spec, "the differentiated-equilibrium condition")
    prof = as_profile(spec, profile)
    if spec.n_platforms < 2:
        raise InvalidInstanceError("the differentiated condition needs at least two platforms")
    if len(set(prof)) != spec.n_platforms:
        raise InvalidInstanceError("profile must use distinct models on every platform")
    if spec.n_models < spec.n_platforms:
        raise InvalidInstanceError("needs at least as many models as platforms")
    t = game.average_scores(spec)
    rows = []
    holds = True
    for i in range(spec.n_platforms):
        d_cur = game.deviation_advantage(spec, prof, i)
        for g in range(spec.n_models):
            if g == prof[i]:
                continue
            dev = prof[:i] + (g,) + prof[i + 1:]
            d_alt = game.deviation_advantage(spec, dev, i)
            lhs = float(t[prof[i]] - t[g])
            rhs = float(d_alt - d_cur)
            rows.append(ConditionRow(i, prof[i], g, lhs, rhs))
            if lhs < rhs - IMPROVEMENT_EPS:
                holds = False
    return ConditionReport(holds, tuple(rows))


def check_homogeneous_condition(spec: GameSpec, model: int) -> ConditionReport:
    """Margin test for the all-platforms-on-one-model profile being a PNE."""
    _hardmax_only(spec, "the homogeneous-equilibrium condition")
    if not 0 <= model < spec.n_models:
        raise InvalidInstanceError(f"model index {model} out of range")
    prof = tuple([model] * spec.n_platforms)
    t = game.average_scores(spec)
    rows = []
    holds = True
    for g in range(spec.n_models):
        if g == model:
            continue
        dev = (g,) + prof[1:]
        d_alt = game.deviation_advantage(spec, dev, 0)
        lhs = float(t[model] - t[g])
        rhs = float(d_alt)  # the homogeneous profile's own deviation advantage is 0
        rows.append(ConditionRow(0, model, g, lhs, rhs))
        if lhs < rhs - IMPROVEMENT_EPS:
            holds = False
    return ConditionReport(holds, tuple(rows))


def pair_delta(spec: GameSpec, i: int, j: int) -> float:
    """Two-platform deviation advantage of model i against model j."""
    s = spec.scores.scores
    z = np.where(s[i] > s[j], s[i], np.where(s[i] < s[j], -s[i], 0.0))
    return float(z @ spec.population.weights)


def two_player_conditions(spec: GameSpec, i: int, j: int) -> TwoPlayerConditions:
    """Closed-form equilibrium tests for the two-platform game on models i, j."""
    _hardmax_only(spec, "the two-player condition")
    if spec.n_platforms != 2:
        raise InvalidInstanceError("two_player_conditions requires exactly 2 platforms")
    if i == j:
        raise InvalidInstanceError("models i and j must differ")
    for k in (i, j):
        if not 0 <= k < spec.n_models:
            raise InvalidInstanceError(f"model index {k} out of range")
    t = game.average_scores(spec)
    d_ij = pair_delta(spec, i, j)
    d_ji = pair_delta(spec, j, i)
    eps = IMPROVEMENT_EPS
    if spec.n_models == 2:
        differentiated = (-d_ij - eps <= t[i] - t[j] <= d_ji + eps)
        homogeneous_i = t[i] - t[j] > d_ji - eps
        homogeneous_j = t[j] - t[i] > d_ij - eps
    else:
        others_j = max(t[k] + pair_delta(spec, k, j) for k in range(spec.n_models) if k != j)
        others_i = max(t[k] + pair_delta(spec, k, i) for k in range(spec.n_models) if k != i)
        differentiated = (
            t[i] + d_ij >= max(t[j], others_j) - eps
            and t[j] + d_ji >= max(t[i], others_i) - eps
        )
        homogeneous_i = all(
            t[i] - t[k] >= pair_delta(spec, k, i) - eps
            for k in range(spec.n_models)
            if k != i
        )
        homogeneous_j = all(
            t[j] - t[k] >= pair_delta(spec, k, j) - eps
            for k in range(spec.n_models)
            if k != j
        )
    return TwoPlayerConditions(bool(differentiated), bool(homogeneous_i), bool(homogeneous_j))


def centralization_check(spec: GameSpec, params: CentralizationParams) -> CentralizationResult:
    """Dominant-type threshold test for homogeneity on the dominant model.

    Validates the premises first: the dominant model must beat every rival by
    at least rho on the dominant type, and rival scores must stay within
    gamma_cap of the dominant model's on every other type.  The threshold
    1 - rho / (rho + 2 * gamma_cap) is compared against pi_star, and the
    homogeneous profile is independently verified as a PNE.
    """
    _hardmax_only(spec, "the centralization check")
    s = spec.scores.scores
    k_star = params.dominant_type
    m = params.dominant_model
    if not 0 <= k_star < spec.scores.n_types:
        raise InvalidInstanceError(f"dominant type index {k_star} out of range")
    if not 0 <= m < spec.n_models:
        raise InvalidInstanceError(f"dominant model index {m} out of range")
    w_star = float(spec.population.weights[k_star])
    if abs(w_star - params.pi_star) > 1e-9:
        raise InvalidInstanceError(
            f"pi_star {params.pi_star} does not match the dominant type's weight {w_star}"
        )
    for j in range(spec.n_models):
        if j == m:
            continue
        margin = float(s[m, k_star] - s[j, k_star])
        if margin < params.rho - 1e-12:
            raise InvalidInstanceError(
                f"dominant-type margin violated: model {j} is within "
                f"{margin:.6g} < rho={params.rho:.6g} of the dominant model"
            )
        for k in range(spec.scores.n_types):
            if k == k_star:
                continue
            gap = abs(float(s[j, k] - s[m, k]))
            if gap > params.gamma_cap + 1e-12:
                raise InvalidInstanceError(
                    f"off-dominant variation violated: |S_{j},{k} - S_{m},{k}| "
                    f"= {gap:.6g} > gamma_cap={params.gamma_cap:.6g}"
                )
    threshold = 1.0 - params.rho / (params.rho + 2.0 * params.gamma_cap) if params.gamma_cap > 0 else 0.0
    satisfied = params.pi_star >= threshold
    confirmed = verify_pne(spec, [m] * spec.n_platforms).is_pne
    return CentralizationResult(threshold, bool(satisfied), confirmed)


def softmax_pne_scan(
    spec: GameSpec, tau_grid: Sequence[float], budget: int = DEFAULT_PROFILE_BUDGET
) -> list[tuple[float, int]]:
    """Count pure equilibria of the softmax game at each temperature."""
    results = []
    for tau in tau_grid:
        soft = spec.with_choice(game.ChoiceRule.softmax(float(tau)))
        results.append((float(tau), len(enumerate_pne(soft, budget=budget))))
    return results
