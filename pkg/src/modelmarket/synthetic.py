"""Synthetic game instances: RBF-mixture score functions over discretized
Gaussian-mixture user populations.

Score functions collapse model quality and user reward into a single bumpy
surface over the type space: bias plus a sum of Gaussian kernels, truncated
to [0, 1].  User populations come from sampling a GMM, clustering the draws
into K anchors with a seeded k-means, and weighting each anchor by its share
of the draws.

Population shifts are applied after discretization: shifting every component
mean by a constant vector shifts the sampled cloud, the anchors, and nothing
else, so common-random-number comparisons across shift values are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInstanceError, InvalidParameterError
from .game import ScoreMatrix, UserPopulation, _frozen_array

__all__ = [
    "RbfKernel",
    "RbfModelSpec",
    "GmmComponent",
    "GmmPopulationSpec",
    "rbf_scores",
    "gmm_population",
    "seeded_kmeans",
]

DEFAULT_SAMPLE_SIZE = 10_000
KMEANS_ITERATIONS = 20


@dataclass(frozen=True)
class RbfKernel:
    center: tuple[float, ...]
    amplitude: float
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise InvalidParameterError("kernel width must be > 0")


@dataclass(frozen=True)
class RbfModelSpec:
    """Bias plus Gaussian kernels; evaluations are truncated to [0, 1]."""

    bias: float
    kernels: tuple[RbfKernel, ...]

    def __init__(self, bias: float, kernels: Iterable[RbfKernel]):
        ks = tuple(kernels)
        if not ks:
            raise InvalidInstanceError("an RBF model needs at least one kernel")
        dims = {len(k.center) for k in ks}
        if len(dims) != 1:
            raise InvalidInstanceError("all kernel centers must share one dimension")
        object.__setattr__(self, "bias", float(bias))
        object.__setattr__(self, "kernels", ks)

    @property
    def dim(self) -> int:
        return len(self.kernels[0].center)


@dataclass(frozen=True)
class GmmComponent:
    weight: float
    mean: tuple[float, ...]
    covariance: np.ndarray

    def __init__(self, weight: float, mean: Sequence[float], covariance):
        cov = np.asarray(covariance, dtype=float)
        mean_t = tuple(float(x) for x in mean)
        if weight < 0:
            raise InvalidParameterError("component weight must be >= 0")
        if cov.shape != (len(mean_t), len(mean_t)):
            raise InvalidInstanceError("covariance shape must match the mean dimension")
        if not np.allclose(cov, cov.T):
            raise InvalidInstanceError("covariance must be symmetric")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise InvalidInstanceError("covariance must be positive-definite") from exc
        object.__setattr__(self, "weight", float(weight))
        object.__setattr__(self, "mean", mean_t)
        object.__setattr__(self, "covariance", _frozen_array(cov))


@dataclass(frozen=True)
class GmmPopulationSpec:
    """A GMM to sample, the number K of discrete types, an x-shift, and a seed."""

    components: tuple[GmmComponent, ...]
    k_types: int
    dx: float = 0.0
    seed: int = 0
    sample_size: int = DEFAULT_SAMPLE_SIZE

    def __init__(self, components: Iterable[GmmComponent], k_types: int, dx: float = 0.0,
                 seed: int = 0, sample_size: int = DEFAULT_SAMPLE_SIZE):
        comps = tuple(components)
        if not comps:
            raise InvalidInstanceError("a GMM needs at least one component")
        total = sum(c.weight for c in comps)
        if abs(total - 1.0) > 1e-9:
            raise InvalidInstanceError(f"component weights must sum to 1 (got {total!r})")
        dims = {len(c.mean) for c in comps}
        if len(dims) != 1:
            raise InvalidInstanceError("all component means must share one dimension")
        if k_types < 1:
            raise InvalidParameterError("k_types must be at least 1")
        if sample_size < k_types:
            raise InvalidParameterError("sample_size must be at least k_types")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "k_types", int(k_types))
        object.__setattr__(self, "dx", float(dx))
        object.__setattr__(self, "seed", int(seed))
        object.__setattr__(self, "sample_size", int(sample_size))

    @property
    def dim(self) -> int:
        return len(self.components[0].mean)


def rbf_scores(models: Sequence[RbfModelSpec], types: Sequence[Sequence[float]],
               model_labels: Iterable[str] | None = None) -> ScoreMatrix:
    """Evaluate every RBF model at every type point, clamping to [0, 1].

    The clamp applies once, after the bias and all kernels are summed.
    """
    pts = np.asarray(types, dtype=float)
    if pts.ndim != 2:
        raise InvalidInstanceError("types must be a K x d array of coordinates")
    rows = []
    for spec in models:
        if spec.dim != pts.shape[1]:
            raise InvalidInstanceError("model and type dimensions differ")
        value = np.full(pts.shape[0], spec.bias)
        for k in spec.kernels:
            d2 = ((pts - np.asarray(k.center)) ** 2).sum(axis=1)
            value = value + k.amplitude * np.exp(-d2 / (2.0 * k.width ** 2))
        rows.append(np.clip(value, 0.0, 1.0))
    return ScoreMatrix(np.vstack(rows), model_labels=model_labels)


def seeded_kmeans(points: np.ndarray, k: int, rng: np.random.Generator,
                  iterations: int = KMEANS_ITERATIONS) -> tuple[np.ndarray, np.ndarray]:
    """Plain Lloyd iterations with distance-weighted seeding, fixed iteration count.

    Returns (centers, assignments).  Deterministic given the generator state.
    """
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[int(rng.integers(n))]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0:
            centers[j] = points[int(rng.integers(n))]
        else:
            centers[j] = points[int(rng.choice(n, p=d2 / total))]
        d2 = np.minimum(d2, ((points - centers[j]) ** 2).sum(axis=1))
    assignments = np.zeros(n, dtype=np.int64)
    for _ in range(iterations):
        dists = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assignments = dists.argmin(axis=1)
        for j in range(k):
            mask = assignments == j
            if mask.any():
                centers[j] = points[mask].mean(axis=0)
            else:
                # re-seed an empty cluster at the point farthest from its center
                farthest = int(dists[np.arange(n), assignments].argmax())
                centers[j] = points[farthest]
    return centers, assignments


def gmm_population(spec: GmmPopulationSpec) -> tuple[UserPopulation, np.ndarray]:
    """Discretize a GMM into K weighted types; returns (population, anchors).

    Anchors are k-means centers of a seeded sample, sorted lexicographically
    by coordinates so labels are stable; weights are the fraction of draws
    assigned to each anchor.  The configured shift is added to the anchor
    coordinates after clustering (see the module docstring).
    """
    rng = np.random.default_rng(spec.seed)
    weights = np.array([c.weight for c in spec.components])
    choices = rng.choice(len(spec.components), size=spec.sample_size, p=weights)
    noise = rng.standard_normal((spec.sample_size, spec.dim))
    points = np.empty((spec.sample_size, spec.dim))
    for q, comp in enumerate(spec.components):
        mask = choices == q
        chol = np.linalg.cholesky(comp.covariance)
        points[mask] = np.asarray(comp.mean) + noise[mask] @ chol.T

    centers, assignments = seeded_kmeans(points, spec.k_types, rng)
    order = np.lexsort(centers.T[::-1])  # sort by first coordinate, then the rest
    centers = centers[order]
    relabel = np.empty(spec.k_types, dtype=np.int64)
    relabel[order] = np.arange(spec.k_types)
    assignments = relabel[assignments]

    counts = np.bincount(assignments, minlength=spec.k_types).astype(float)
    population = UserPopulation(
        [f"t{i + 1}" for i in range(spec.k_types)], counts / counts.sum()
    )
    shift = np.zeros(spec.dim)
    shift[0] = spec.dx
    return population, centers + shift
