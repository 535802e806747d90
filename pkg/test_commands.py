"""End-to-end runs of the command-line tool on small files."""
import csv
import re

import numpy as np
import pytest

from conftest import two_groups
from main import main
from models.records import ClusterReport, SegmentationReport
from repositories.curve_repository import write_curves
from repositories.result_repository import load_manifest

READ = ["--header-row", "--id-column"]


@pytest.fixture
def separable_csv(tmp_path):
    return str(write_curves(tmp_path / "separable.csv", two_groups()))


def _run(out, *argv):
    return main(["--output-dir", str(out), "--log-level", "WARNING", *argv])


def _rows(path):
    with open(path, newline="", encoding="utf-8") as handle:
        return list(csv.reader(handle))


def _gids(svg_path, pattern):
    return re.findall(pattern, svg_path.read_text(encoding="utf-8"))


def test_segment_writes_the_error_profile_and_figures(tmp_path, separable_csv):
    out = tmp_path / "segment"
    assert _run(out, "segment", "--input", separable_csv, *READ, "--P", "4", "--curve", "7", "--plot-p", "1,2") == 0
    report = SegmentationReport.model_validate_json((out / "segment.json").read_text())
    assert report.members == ["7"]
    assert len(report.errors) == 4 and report.errors[0] > 0 and report.errors[1] == 0.0
    assert report.summaries[1].breaks == [6]
    assert _rows(out / "segment_errors.csv")[0] == ["p", "error"]
    assert (out / "segment_p1.svg").exists() and (out / "segment_p2.svg").exists()
    assert (out / "segment_errors.svg").exists()


def test_summarize_set_uses_every_curve(tmp_path, separable_csv):
    out = tmp_path / "summary"
    assert _run(out, "summarize-set", "--input", separable_csv, *READ, "--P", "3", "--model", "line-l2") == 0
    report = SegmentationReport.model_validate_json((out / "summary.json").read_text())
    assert len(report.members) == 10
    assert np.all(np.diff(report.errors) <= 1e-9)


def test_cluster_recovers_separable_groups(tmp_path, separable_csv):
    out = tmp_path / "cluster"
    code = _run(out, "cluster", "--input", separable_csv, *READ, "--K", "2", "--P", "4", "--seeds", "3")
    assert code == 0
    manifest = load_manifest(out / "manifest.json")
    assert manifest.final_error == 0.0
    assert manifest.seeds == [0, 1, 2]
    assert sum(manifest.allocation) == 4
    assert manifest.dataset.n_curves == 10

    rows = _rows(out / "assignment.csv")
    assert rows[0] == ["id", "cluster"] and len(rows) == 11
    labels = [int(r[1]) for r in rows[1:]]
    assert len(set(labels[:5])) == 1 and len(set(labels[5:])) == 1 and labels[0] != labels[5]

    clusters = ClusterReport.model_validate_json((out / "clusters.json").read_text()).clusters
    assert sorted(c.size for c in clusters) == [5, 5]
    svg = out / "clusters.svg"
    assert len(_gids(svg, r'id="cell\d+-member\d+"')) == 10
    assert len(_gids(svg, r'id="cell\d+-prototype"')) == 2


def test_cluster_outputs_are_reproducible(tmp_path, rng):
    path = tmp_path / "mixed.csv"
    values = rng.normal(size=(30, 12)) + np.repeat(rng.normal(0, 3, size=(3, 12)), 10, axis=0)
    np.savetxt(path, values, delimiter=",")
    argv = ["cluster", "--input", str(path), "--K", "3", "--P", "9", "--seeds", "2", "--seed", "4"]
    assert _run(tmp_path / "a", *argv) == 0
    assert _run(tmp_path / "b", *argv) == 0
    assert (tmp_path / "a" / "assignment.csv").read_bytes() == (tmp_path / "b" / "assignment.csv").read_bytes()
    assert (tmp_path / "a" / "clusters.json").read_bytes() == (tmp_path / "b" / "clusters.json").read_bytes()


@pytest.mark.parametrize("init", ["ward", "kmeans"])
def test_cluster_initializations(tmp_path, separable_csv, init):
    out = tmp_path / init
    assert _run(out, "cluster", "--input", separable_csv, *READ, "--K", "2", "--P", "4", "--init", init) == 0
    manifest = load_manifest(out / "manifest.json")
    assert manifest.final_error == 0.0
    if init == "kmeans":
        assert manifest.kmeans_error == 0.0
        assert manifest.summarized_error == 0.0


def test_cluster_from_a_som(tmp_path, rng):
    path = tmp_path / "curves.csv"
    np.savetxt(path, rng.normal(size=(20, 8)).cumsum(axis=1), delimiter=",")
    argv = ["cluster", "--input", str(path), "--P", "8", "--init", "som", "--som-grid", "2x2", "--som-epochs", "5"]
    assert _run(tmp_path / "som", *argv) == 0
    manifest = load_manifest(tmp_path / "som" / "manifest.json")
    clusters = ClusterReport.model_validate_json((tmp_path / "som" / "clusters.json").read_text()).clusters
    assert manifest.n_clusters == len(clusters)
    assert all(c.unit is not None for c in clusters)


def test_kmeans_command(tmp_path, separable_csv):
    out = tmp_path / "kmeans"
    assert _run(out, "kmeans", "--input", separable_csv, *READ, "--K", "2", "--seeds", "4") == 0
    manifest = load_manifest(out / "manifest.json")
    assert manifest.mode == "kmeans"
    assert manifest.final_error == 0.0
    assert len(manifest.seed_errors) == 4
    clusters = ClusterReport.model_validate_json((out / "clusters.json").read_text()).clusters
    assert all(len(c.centroid) == 12 for c in clusters)


def test_ward_command(tmp_path, separable_csv):
    out = tmp_path / "ward"
    assert _run(out, "ward", "--input", separable_csv, *READ, "--K", "2") == 0
    merges = _rows(out / "ward_merges.csv")
    assert len(merges) == 10
    assert float(merges[-1][3]) > 0 and float(merges[1][3]) == 0.0
    labels = [int(r[1]) for r in _rows(out / "assignment.csv")[1:]]
    assert labels == [0] * 5 + [1] * 5
    assert (out / "ward.svg").exists()


def test_som_command_with_a_radius_sweep(tmp_path, rng):
    path = tmp_path / "curves.csv"
    np.savetxt(path, rng.normal(size=(25, 10)).cumsum(axis=1), delimiter=",")
    out = tmp_path / "som"
    argv = ["som", "--input", str(path), "--som-grid", "2x3", "--som-radius", "0.5,1,2", "--som-epochs", "6"]
    assert _run(out, *argv) == 0
    assert len(_rows(out / "som_sweep.csv")) == 4
    assert len(_rows(out / "som_assignment.csv")) == 26
    assert _rows(out / "som_topology.csv")[0] == ["observed", "permuted_mean", "p_value"]
    assert len(_gids(out / "som.svg", r'id="cell\d+-prototype"')) == 6


def test_report_compares_manifests(tmp_path, separable_csv, capsys):
    for mode in ("uniform", "optimal"):
        argv = ["cluster", "--input", separable_csv, *READ, "--K", "2", "--P", "4", "--mode", mode]
        assert _run(tmp_path / mode, *argv) == 0
    manifests = [str(tmp_path / mode / "manifest.json") for mode in ("uniform", "optimal")]
    assert _run(tmp_path / "report", "report", *manifests) == 0
    rows = _rows(tmp_path / "report" / "report.csv")
    assert [r[1] for r in rows[1:]] == ["uniform", "optimal"]
    assert "optimal" in capsys.readouterr().out


def test_unreadable_input_exits_with_2(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2,3\n4,five,6\n")
    assert _run(tmp_path / "out", "segment", "--input", str(bad), "--P", "2") == 2
    assert _run(tmp_path / "out", "report", str(tmp_path / "missing.json")) == 2


def test_inconsistent_configuration_exits_with_3(tmp_path, separable_csv):
    out = tmp_path / "out"
    argv = ["cluster", "--input", separable_csv, *READ, "--K", "3", "--P", "4", "--mode", "uniform"]
    assert _run(out, *argv) == 3
    assert _run(out, "cluster", "--input", separable_csv, *READ, "--P", "4") == 3
    assert _run(out, "segment", "--input", separable_csv, *READ, "--P", "13") == 3
    assert not (out / "manifest.json").exists()


def test_unknown_options_are_rejected_by_the_parser(tmp_path, separable_csv):
    with pytest.raises(SystemExit) as exc:
        _run(tmp_path, "cluster", "--input", separable_csv, "--mode", "fastest")
    assert exc.value.code == 2
