"""Shared test utilities: random instances, brute-force oracles, the entry toy."""

from __future__ import annotations

from dataclasses import dataclass
import itertools

import numpy as np

from modelmarket.entry import EntryDataset, OpponentPool, RewardTable
from modelmarket.game import ChoiceRule, GameSpec, ScoreMatrix, UserPopulation


def random_spec(rng: np.random.Generator, max_models: int = 6, max_platforms: int = 4,
                max_types: int = 6, min_platforms: int = 1,
                choice: ChoiceRule | None = None) -> GameSpec:
    """A random instance with scores in [0, 1] and Dirichlet type weights."""
    m = int(rng.integers(1, max_models + 1))
    n = int(rng.integers(min_platforms, max_platforms + 1))
    k = int(rng.integers(1, max_types + 1))
    scores = rng.uniform(0.0, 1.0, size=(m, k))
    weights = rng.dirichlet(np.ones(k))
    population = UserPopulation([f"t{i}" for i in range(k)], weights)
    return GameSpec(ScoreMatrix(scores), population, n, choice or ChoiceRule.hardmax())


def brute_force_utilities(spec: GameSpec, profile) -> np.ndarray:
    """Per-platform utility via an explicit per-type loop (hardmax only)."""
    s = spec.scores.scores
    w = spec.population.weights
    out = np.zeros(spec.n_platforms)
    for k in range(spec.population.n_types):
        col = [s[g, k] for g in profile]
        top = max(col)
        winners = [i for i, v in enumerate(col) if v == top]
        for i in winners:
            out[i] += w[k] * col[i] / len(winners)
    return out


def brute_force_coverage(spec: GameSpec, profile) -> float:
    s = spec.scores.scores
    w = spec.population.weights
    return float(sum(w[k] * max(s[g, k] for g in profile)
                     for k in range(spec.population.n_types)))


def brute_force_social_optimum(spec: GameSpec) -> float:
    """Max coverage over all ordered profiles (independent of the multiset trick)."""
    best = -np.inf
    for prof in itertools.product(range(spec.n_models), repeat=spec.n_platforms):
        best = max(best, brute_force_coverage(spec, prof))
    return float(best)


@dataclass(frozen=True)
class EntryToy:
    """A small market where the heaviest user type is under-served by incumbents."""

    outcome_labels: tuple[str, ...]
    rewards: RewardTable
    population: UserPopulation
    incumbents: ScoreMatrix
    pool: OpponentPool
    dataset: EntryDataset
    target_type: int  # the under-served heavy type


def entry_toy() -> EntryToy:
    labels = ("x1", "x2", "x3", "x4", "x5")
    rewards = RewardTable([
        [0.90, 0.70, 0.00, 0.00, 0.20],
        [0.00, 0.00, 0.90, 0.80, 0.10],
        [0.10, 0.00, 0.10, 0.20, 0.90],
    ])
    population = UserPopulation(["a", "b", "c"], [0.2, 0.5, 0.3])
    incumbents = ScoreMatrix([[0.80, 0.30, 0.50], [0.60, 0.35, 0.75]], ["inc1", "inc2"])
    dataset = EntryDataset(
        labels,
        [3000, 2500, 2000, 1500, 1000],
        attributes=["art", "art", "math", "math", "misc"],
        attribute_labels=["art", "math", "misc"],
        type_attribute_prefs=[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    )
    return EntryToy(labels, rewards, population, incumbents,
                    OpponentPool.from_matrix(incumbents), dataset, target_type=1)
