"""Slow, independent reference computations used by the tests."""
from itertools import combinations, product
from typing import Callable, Optional

import numpy as np


def recursive_constant_costs(curve):
    """Q[k, l] for the constant model via the running mean update.

    mu(k, l) = ((l - k) mu(k, l - 1) + s_l) / (l - k + 1)
    Q(k, l) = Q(k, l - 1) + (l - k) / (l - k + 1) * (s_l - mu(k, l - 1))^2
    """
    s = [float(v) for v in curve]
    m = len(s)
    q = np.zeros((m, m))
    for k in range(m):
        mu = s[k]
        for l in range(k + 1, m):
            n = l - k
            q[k, l] = q[k, l - 1] + n / (n + 1) * (s[l] - mu) ** 2
            mu = (n * mu + s[l]) / (n + 1)
    return q


def downdated_constant_costs(curve):
    """Q[k, l] for the constant model in O(M^2): prefix updates, then downdates.

    Works 1-based as written, returns a 0-based table:
      mu(1..l) = ((l - 1) mu(1..l-1) + s_l) / l
      Q(1..l)  = Q(1..l-1) + l / (l - 1) * (s_l - mu(1..l))^2
      mu(k..l) = ((l - k + 2) mu(k-1..l) - s_{k-1}) / (l - k + 1)
      Q(k..l)  = Q(k-1..l) - (l - k + 1) / (l - k + 2) * (s_{k-1} - mu(k..l))^2
    """
    s = [None] + [float(v) for v in curve]
    m = len(s) - 1
    mu = np.zeros((m + 1, m + 1))
    q = np.zeros((m + 1, m + 1))
    for k in range(1, m + 1):
        mu[k, k] = s[k]
        q[k, k] = 0.0
    for l in range(2, m + 1):
        mu[1, l] = ((l - 1) * mu[1, l - 1] + s[l]) / l
        q[1, l] = q[1, l - 1] + l / (l - 1) * (s[l] - mu[1, l]) ** 2
    for k in range(2, m):
        for l in range(k + 1, m + 1):
            mu[k, l] = ((l - k + 2) * mu[k - 1, l] - s[k - 1]) / (l - k + 1)
            q[k, l] = q[k - 1, l] - (l - k + 1) / (l - k + 2) * (s[k - 1] - mu[k, l]) ** 2
    return q[1:, 1:]


def direct_cost(curve, times, k, l, model):
    """Two-pass cost of one curve on k..l (inclusive)."""
    y = np.asarray(curve, dtype=float)[k:l + 1]
    t = np.asarray(times, dtype=float)[k:l + 1]
    if model == "const-l2":
        return float(np.sum((y - y.mean()) ** 2))
    if model == "const-l1":
        return float(np.sum(np.abs(y - np.median(y))))
    if model == "line-l2":
        if y.size <= 2:
            return 0.0
        design = np.column_stack([t, np.ones_like(t)])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        return float(np.sum((y - design @ coef) ** 2))
    if model == "interp-l2":
        chord = y[0] + (y[-1] - y[0]) * (t - t[0]) / (t[-1] - t[0])
        return float(np.sum((y - chord) ** 2))
    raise ValueError(model)


def direct_set_cost(values, times, k, l, model, aggregation="sum", last_index=None):
    """Cost of a set of curves sharing one model on k..l.

    Chords go through the mean curve's values at k and l and count the
    columns k..l-1 (plus l when it is the last grid point).
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    block = values[:, k:l + 1]
    t = np.asarray(times, dtype=float)[k:l + 1]
    if aggregation == "max":
        return max_constant_cost(block)
    if model == "const-l2":
        return float(np.sum((block - block.mean()) ** 2))
    if model == "const-l1":
        return float(np.sum(np.abs(block - np.median(block))))
    if model == "line-l2":
        design = np.tile(np.column_stack([t, np.ones_like(t)]), (values.shape[0], 1))
        target = block.ravel()
        coef, *_ = np.linalg.lstsq(design, target, rcond=None)
        return float(np.sum((target - design @ coef) ** 2))
    if model == "interp-l2":
        mean = block.mean(axis=0)
        chord = mean[0] + (mean[-1] - mean[0]) * (t - t[0]) / (t[-1] - t[0])
        last_index = values.shape[1] - 1 if last_index is None else last_index
        stop = block.shape[1] if l == last_index else block.shape[1] - 1
        return float(np.sum((block[:, :stop] - chord[:stop]) ** 2))
    raise ValueError(model)


def max_constant_cost(block):
    """min_a max_i sum_j (block[i, j] - a)^2 by checking every candidate optimum.

    The optimum is the minimiser of one member's parabola or the crossing
    of two of them.
    """
    block = np.atleast_2d(block)
    n = block.shape[1]
    means = block.mean(axis=1)
    sse = np.sum((block - means[:, None]) ** 2, axis=1)

    def f(a):
        return float(np.max(n * (a - means) ** 2 + sse))

    candidates = list(means)
    for i, j in combinations(range(means.size), 2):
        if means[i] != means[j]:
            candidates.append(
                ((sse[j] - sse[i]) / n + means[j] ** 2 - means[i] ** 2) / (2 * (means[j] - means[i]))
            )
    return min(f(a) for a in candidates)


def partitions(n_points, n_segments):
    """Every ordered partition of 0..M-1 into P segments, as break tuples."""
    return combinations(range(1, n_points), n_segments - 1)


def knot_sets(n_points, n_segments):
    for inner in combinations(range(1, n_points - 1), n_segments - 1):
        yield (0, *inner, n_points - 1)


def _fold(costs, aggregator):
    total = costs[-1]
    for c in reversed(costs[:-1]):
        total = c + total if aggregator == "sum" else max(c, total)
    return total


def best_partition(cost: Callable[[int, int], float], n_points, n_segments, aggregator="sum"):
    """Exhaustive optimum; returns (cost, breaks, runner-up cost).

    Totals are folded from the right like the dynamic program and ties go
    to the lexicographically smallest breaks.
    """
    scored = []
    for breaks in partitions(n_points, n_segments):
        bounds = (0, *breaks, n_points)
        costs = [cost(a, b - 1) for a, b in zip(bounds[:-1], bounds[1:])]
        scored.append((_fold(costs, aggregator), breaks))
    scored.sort()
    runner_up = scored[1][0] if len(scored) > 1 else np.inf
    return scored[0][0], scored[0][1], runner_up


def best_knots(cost: Callable[[int, int], float], n_points, n_segments, aggregator="sum"):
    scored = []
    for knots in knot_sets(n_points, n_segments):
        costs = [cost(a, b) for a, b in zip(knots[:-1], knots[1:])]
        scored.append((_fold(costs, aggregator), knots))
    scored.sort()
    runner_up = scored[1][0] if len(scored) > 1 else np.inf
    return scored[0][0], scored[0][1], runner_up


def best_allocation(R, n_segments, cap: Optional[int] = None):
    """Exhaustive search over compositions of P into K positive parts."""
    R = np.asarray(R, dtype=float)
    n_clusters, n_columns = R.shape
    limit = n_columns if cap is None else min(cap, n_columns)
    best = (np.inf, None)
    for counts in product(range(1, limit + 1), repeat=n_clusters):
        if sum(counts) != n_segments:
            continue
        total = sum(R[k, p - 1] for k, p in enumerate(counts))
        if total < best[0]:
            best = (total, counts)
    return best
