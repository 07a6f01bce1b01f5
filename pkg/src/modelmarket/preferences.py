"""Score matrices derived from per-criterion model performance and type preferences."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import InvalidInstanceError
from .game import ScoreMatrix, _frozen_array

__all__ = ["PreferenceTable", "scores_from_preferences"]


@dataclass(frozen=True)
class PreferenceTable:
    """Per-type non-negative weights over a shared list of criteria.

    ``normalized`` records the table's normalization policy: weight vectors
    are used exactly as stored, and this flag documents whether they were
    normalized to sum to 1 when the table was built.
    """

    criteria: tuple[str, ...]
    type_labels: tuple[str, ...]
    weights: np.ndarray  # K x C
    normalized: bool = False

    def __init__(self, criteria: Iterable[str], type_labels: Iterable[str], weights, normalized: bool = False):
        crit = tuple(str(c) for c in criteria)
        labels = tuple(str(t) for t in type_labels)
        w = _frozen_array(weights)
        if w.ndim != 2 or w.shape != (len(labels), len(crit)):
            raise InvalidInstanceError("weights must be a K x C matrix matching labels and criteria")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidInstanceError("preference weights must be finite and non-negative")
        object.__setattr__(self, "criteria", crit)
        object.__setattr__(self, "type_labels", labels)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "normalized", bool(normalized))


def scores_from_preferences(
    performance,
    prefs: PreferenceTable,
    normalize: bool = False,
    model_labels: Iterable[str] | None = None,
) -> ScoreMatrix:
    """S_j(theta) = sum_c theta_c * performance[j, c].

    ``performance`` is a model x criterion matrix of non-negative entries.
    With ``normalize`` the preference vectors are rescaled to sum to 1 first;
    all-zero vectors are only valid unnormalized.
    """
    perf = np.asarray(performance, dtype=float)
    if perf.ndim != 2 or perf.shape[1] != len(prefs.criteria):
        raise InvalidInstanceError(
            f"performance must be M x {len(prefs.criteria)} to match the preference criteria"
        )
    if np.any(perf < 0) or not np.all(np.isfinite(perf)):
        raise InvalidInstanceError("performance entries must be finite and non-negative")
    theta = prefs.weights
    if normalize:
        totals = theta.sum(axis=1, keepdims=True)
        if np.any(totals <= 0):
            raise InvalidInstanceError("cannot normalize an all-zero preference vector")
        theta = theta / totals
    return ScoreMatrix(perf @ theta.T, model_labels=model_labels)
