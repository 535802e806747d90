"""Reference results on the public datasets, with synthetic stand-ins when the files are absent.

Fetch the files with ``python -m scripts.fetch_datasets <name>``.
"""
import numpy as np
import pytest

from conftest import dataset_path, mixed_curves
from models.state import ClusteringConfig, ClusteringMode, InitMethod
from repositories.curve_repository import read_curves
from services.clustering import cluster, kmeans, multi_restart, relative_error, summarize_partition, two_phase
from services.initializers import batch_som, partition_from_som

SEEDS = range(50)


def _best_errors(curves, n_clusters, n_segments, seeds=SEEDS):
    best = {}
    for mode in (ClusteringMode.UNIFORM, ClusteringMode.OPTIMAL):
        restarts = multi_restart(curves, ClusteringConfig(n_clusters, n_segments, mode=mode), seeds)
        best[mode] = restarts.best.error
    return best


def _tecator():
    return read_curves(dataset_path("tecator"), header_row=True, id_column=True)


@pytest.mark.dataset
def test_tecator_file_shape():
    curves = _tecator()
    assert (curves.n_curves, curves.n_points) == (240, 100)


@pytest.mark.dataset
@pytest.mark.slow
def test_tecator_best_of_fifty_restarts():
    best = _best_errors(_tecator(), 6, 30)
    assert best[ClusteringMode.UNIFORM] == pytest.approx(472, abs=0.5)
    assert best[ClusteringMode.OPTIMAL] == pytest.approx(467, abs=0.5)


@pytest.mark.dataset
@pytest.mark.slow
def test_tecator_two_phase_tends_to_win():
    curves = _tecator()
    iterations, wins = [], 0
    for seed in SEEDS:
        config = ClusteringConfig(6, 30, seed=seed)
        result = two_phase(curves, config)
        iterations.append(result.kmeans.iterations)
        wins += result.state.error <= cluster(curves, config).error
    assert 5 <= np.median(iterations) <= 30
    assert wins > len(SEEDS) // 2


@pytest.mark.slow
def test_allocation_dominates_the_uniform_split_from_the_same_partition(rng):
    curves = mixed_curves(rng, n_curves=240, n_points=100, n_groups=6, noise=0.5)
    uniform_best, optimal_best = np.inf, np.inf
    for seed in SEEDS:
        uniform = cluster(curves, ClusteringConfig(6, 30, mode=ClusteringMode.UNIFORM, seed=seed))
        optimal = cluster(
            curves,
            ClusteringConfig(6, 30, mode=ClusteringMode.OPTIMAL, seed=seed, init=InitMethod.GIVEN),
            uniform.assignment,
        )
        assert optimal.error <= uniform.error * (1 + 1e-12)
        uniform_best, optimal_best = min(uniform_best, uniform.error), min(optimal_best, optimal.error)
    assert optimal_best <= uniform_best * (1 + 1e-12)


def _som_partition(curves, rows, cols, seed=0):
    return partition_from_som(batch_som(curves, rows, cols, seed=seed))[0]


def _relative_errors(curves, assignment, budgets):
    n_clusters = int(assignment.max()) + 1
    errors = []
    for budget in budgets:
        mode = ClusteringMode.UNIFORM if budget == n_clusters * curves.n_points else ClusteringMode.OPTIMAL
        state = summarize_partition(curves, assignment, ClusteringConfig(n_clusters, budget, mode=mode))
        errors.append(relative_error(curves, state))
    return errors


def test_more_segments_on_a_som_partition_lower_the_relative_error(rng):
    curves = mixed_curves(rng, n_curves=120, n_points=24, n_groups=5)
    assignment = _som_partition(curves, 2, 3)
    n_clusters = int(assignment.max()) + 1
    rel = _relative_errors(curves, assignment, [2 * n_clusters, 4 * n_clusters, n_clusters * curves.n_points])
    assert rel[0] >= rel[1] >= rel[2] > 0


def test_saturated_budget_matches_kmeans_error(rng):
    curves = mixed_curves(rng, n_curves=50, n_points=16)
    result = kmeans(curves, 4, seed=2)
    config = ClusteringConfig(4, 4 * curves.n_points, mode=ClusteringMode.UNIFORM)
    assert summarize_partition(curves, result.assignment, config).error == result.inertia


@pytest.mark.dataset
@pytest.mark.slow
def test_load_curve_relative_errors():
    curves = read_curves(dataset_path("loadcurves"), header_row=True, id_column=True)
    assignment = _som_partition(curves, 4, 5)
    n_clusters = int(assignment.max()) + 1
    initial = {}
    for budget in (80, 160):
        config = ClusteringConfig(n_clusters, budget, init=InitMethod.GIVEN)
        initial[budget] = relative_error(curves, cluster(curves, config, assignment))
    saturated = _relative_errors(curves, assignment, [n_clusters * curves.n_points])[0]
    assert initial[80] == pytest.approx(0.740, abs=0.02)
    assert initial[160] == pytest.approx(0.696, abs=0.02)
    assert saturated == pytest.approx(0.676, abs=0.02)
