"""GOSPA metric (alpha=2, p=2, Euclidean base) with error decomposition.

For two finite sets of target states X and Y the squared metric is the
minimum over assignment sets gamma of

    sum_{(i,j) in gamma} d^2(x_i, y_j) + (c^2 / 2) (|X| + |Y| - 2 |gamma|)

which splits exactly into localisation, missed-target and false-target
parts. States may be 2-D positions or 4-D [px, vx, py, vy] vectors; for
4-D states the distance is computed on the positional components.
"""

from dataclasses import dataclass
from itertools import combinations, permutations
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

# default positional components of a [px, vx, py, vy] state
POSITION_INDICES = (0, 2)

# switch from exhaustive enumeration to the rectangular assignment solver
_ENUMERATION_LIMIT = 5


@dataclass(frozen=True)
class GospaResult:
    """Squared GOSPA value and its decomposition."""

    total_sq: float
    loc_sq: float
    missed_sq: float
    false_sq: float
    num_assigned: int

    @property
    def total(self) -> float:
        return float(np.sqrt(self.total_sq))


def _positions(elements: Sequence[np.ndarray], pos_indices) -> np.ndarray:
    if len(elements) == 0:
        return np.zeros((0, 2))
    arr = np.atleast_2d(np.asarray(elements, dtype=float))
    if arr.shape[1] == len(pos_indices):
        return arr
    return arr[:, list(pos_indices)]


def gospa(X, Y, c: float, p: int = 2,
          pos_indices: Sequence[int] = POSITION_INDICES) -> GospaResult:
    """GOSPA distance between target sets X and Y with decomposition.

    Only p=2 is supported; the parameter exists to reserve the signature.
    """
    if c <= 0:
        raise ValueError(f"cutoff c must be positive, got {c}")
    if p != 2:
        raise ValueError(f"only p=2 is supported, got p={p}")
    xs = _positions(X, pos_indices)
    ys = _positions(Y, pos_indices)
    if len(xs) and len(ys) and xs.shape[1] != ys.shape[1]:
        raise ValueError("dimension mismatch between the two sets")

    n, m = len(xs), len(ys)
    half_c2 = 0.5 * c * c
    if n == 0 or m == 0:
        miss = n * half_c2
        false = m * half_c2
        return GospaResult(miss + false, 0.0, miss, false, 0)

    d2 = np.sum((xs[:, None, :] - ys[None, :, :]) ** 2, axis=2)
    if min(n, m) <= _ENUMERATION_LIMIT:
        pairs = _best_assignment_enumerated(d2, c)
    else:
        pairs = _best_assignment_lsa(d2, c)

    loc = float(sum(d2[i, j] for i, j in pairs))
    k = len(pairs)
    missed = (n - k) * half_c2
    false = (m - k) * half_c2
    return GospaResult(loc + missed + false, loc, missed, false, k)


def _best_assignment_enumerated(d2: np.ndarray, c: float):
    """Exhaustive search over all partial assignments.

    Returns the optimal pair list with pairs at distance >= c dropped
    (assigning them never lowers the total).
    """
    n, m = d2.shape
    c2 = c * c
    best_cost = (n + m) * 0.5 * c2
    best_pairs: list = []
    rows = range(n)
    cols = list(range(m))
    for k in range(1, min(n, m) + 1):
        for rsub in combinations(rows, k):
            for csub in permutations(cols, k):
                loc = sum(d2[i, j] for i, j in zip(rsub, csub))
                cost = loc + (n + m - 2 * k) * 0.5 * c2
                if cost < best_cost - 1e-15:
                    best_cost = cost
                    best_pairs = [(i, j) for i, j in zip(rsub, csub)]
    return [(i, j) for i, j in best_pairs if d2[i, j] < c2]


def _best_assignment_lsa(d2: np.ndarray, c: float):
    """Optimal rectangular assignment with the cutoff folded into the cost."""
    c2 = c * c
    cost = np.minimum(d2, c2)
    rows, cols = linear_sum_assignment(cost)
    return [(i, j) for i, j in zip(rows, cols) if d2[i, j] < c2]


@dataclass(frozen=True)
class RmsGospaSeries:
    """RMS-GOSPA aggregated over a (runs x steps) grid of results."""

    overall: float
    per_step: np.ndarray
    loc_per_step: np.ndarray
    missed_per_step: np.ndarray
    false_per_step: np.ndarray

    @property
    def num_steps(self) -> int:
        return len(self.per_step)


def rms_gospa(per_run_results: Sequence[Sequence[GospaResult]]) -> RmsGospaSeries:
    """Root mean square GOSPA over Monte Carlo runs.

    ``per_run_results`` is rectangular: one row per run, one column per
    time-step, all computed with identical c and p.
    """
    if len(per_run_results) == 0 or len(per_run_results[0]) == 0:
        raise ValueError("empty result grid")
    steps = len(per_run_results[0])
    if any(len(row) != steps for row in per_run_results):
        raise ValueError("result grid is not rectangular")

    total = np.array([[g.total_sq for g in row] for row in per_run_results])
    loc = np.array([[g.loc_sq for g in row] for row in per_run_results])
    missed = np.array([[g.missed_sq for g in row] for row in per_run_results])
    false = np.array([[g.false_sq for g in row] for row in per_run_results])
    return RmsGospaSeries(
        overall=float(np.sqrt(total.mean())),
        per_step=np.sqrt(total.mean(axis=0)),
        loc_per_step=np.sqrt(loc.mean(axis=0)),
        missed_per_step=np.sqrt(missed.mean(axis=0)),
        false_per_step=np.sqrt(false.mean(axis=0)),
    )
