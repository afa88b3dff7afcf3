"""
Pipeline file format and run manifest tests
"""
import numpy as np
import pytest
import yaml

from stopprofiler.analyzers.clusterer import kmedoids
from stopprofiler.analyzers.distance_metrics import (DistanceMatrix,
                                                     MetricKind,
                                                     band_distance_matrix,
                                                     canonical_location_values)
from stopprofiler.analyzers.metric_comparator import correlation_matrix
from stopprofiler.analyzers.profile_builder import (Measure,
                                                    stop_diurnal_profiles,
                                                    to_proportions)
from stopprofiler.core.errors import DataError
from stopprofiler.publishers.csv_exporter import (meta_path_for,
                                                  read_matrix,
                                                  read_partition,
                                                  read_profiles, read_yaml,
                                                  write_clusters,
                                                  write_correlation,
                                                  write_matrix,
                                                  write_profiles)
from stopprofiler.publishers.run_manifest import (RunManifest,
                                                  manifest_path_for)


class TestProfilesFile:
    """write_profiles / read_profiles"""

    def test_counts_round_trip(self, tmp_path, small_cohort):
        """Curves, totals and locations come back in row order"""
        profiles = stop_diurnal_profiles(small_cohort, Measure.BOARDINGS)
        infos = canonical_location_values(small_cohort)
        path = write_profiles(profiles, infos, ["C", "A", "B"], tmp_path / "p.csv")
        table = read_profiles(path)
        assert table.stop_ids == ["C", "A", "B"]
        assert table.curves["A"][7] == 5 and table.curves["A"][17] == 2
        assert table.totals["B"] == 7
        assert table.infos["B"].canonical_global_seq == 2
        assert table.infos["C"].canonical_lat == 43.12

    def test_proportions_keep_source_total(self, tmp_path, small_cohort):
        """Proportion files carry the count total alongside the curve"""
        profiles = stop_diurnal_profiles(small_cohort, Measure.BOARDINGS)
        proportions = {s: to_proportions(profiles[s]) for s in ("A", "B")}
        infos = canonical_location_values(small_cohort)
        table = read_profiles(write_profiles(proportions, infos, ["A", "B"], tmp_path / "p.csv"))
        assert table.totals["A"] == 7
        assert table.curves["A"].sum() == pytest.approx(1.0, abs=1e-9)

    def test_missing_file(self, tmp_path):
        """Absent inputs are data errors"""
        with pytest.raises(DataError):
            read_profiles(tmp_path / "none.csv")

    def test_missing_columns(self, tmp_path):
        """Headers must name every profile column"""
        path = tmp_path / "bad.csv"
        path.write_text("stop_id,total\nA,3\n", encoding="utf-8")
        with pytest.raises(DataError):
            read_profiles(path)


class TestMatrixFile:
    """write_matrix / read_matrix"""

    def test_round_trip(self, tmp_path, rng):
        """Labels, metric and 12 significant digits survive"""
        matrix = band_distance_matrix(rng.random((5, 24)), list("VWXYZ"))
        path = write_matrix(matrix, tmp_path / "band.csv")
        assert path.read_text(encoding="utf-8").startswith("band,V,W,X,Y,Z\n")
        loaded = read_matrix(path)
        assert loaded.metric is MetricKind.CURVE_BAND
        assert loaded.labels == matrix.labels
        np.testing.assert_allclose(loaded.values, matrix.values, rtol=1e-11)

    def test_byte_stable(self, tmp_path):
        """Same matrix, same bytes"""
        matrix = DistanceMatrix.from_condensed("AB", [0.1], MetricKind.GEOGRAPHIC)
        a = write_matrix(matrix, tmp_path / "a.csv").read_bytes()
        b = write_matrix(matrix, tmp_path / "b.csv").read_bytes()
        assert a == b

    def test_label_mismatch(self, tmp_path):
        """Rows and columns must name the same stops"""
        path = tmp_path / "m.csv"
        path.write_text("gseq,A,B\nA,0,1\nC,1,0\n", encoding="utf-8")
        with pytest.raises(DataError):
            read_matrix(path)

    def test_unknown_metric(self, tmp_path):
        """The corner cell names a known metric"""
        path = tmp_path / "m.csv"
        path.write_text("cosine,A,B\nA,0,1\nB,1,0\n", encoding="utf-8")
        with pytest.raises(DataError):
            read_matrix(path)


class TestClustersFile:
    """write_clusters / read_partition"""

    def test_clusters_and_sidecar(self, tmp_path):
        """stop_id,cluster rows and a one-line metadata file"""
        matrix = DistanceMatrix.from_condensed("ABC", [1, 1, 4], MetricKind.SEQ_NUMBER)
        result = kmedoids(matrix, 1, seed=3)
        path = write_clusters(result, tmp_path / "c.csv")
        assert path.read_text(encoding="utf-8") == "stop_id,cluster\nA,0\nB,0\nC,0\n"
        sidecar = meta_path_for(path)
        assert sidecar.name == "c.meta.yaml"
        assert len(sidecar.read_text(encoding="utf-8").strip().splitlines()) == 1
        meta = yaml.safe_load(sidecar.read_text(encoding="utf-8"))
        assert meta["k"] == 1 and meta["seed"] == 3
        assert meta["objective"] == 2.0 and meta["iterations"] == 0
        assert meta["medoids"] == ["A"]
        assert read_partition(path) == {"A": "0", "B": "0", "C": "0"}

    def test_partition_needs_labels(self, tmp_path):
        """A one-column file is not a partition"""
        path = tmp_path / "p.csv"
        path.write_text("stop_id\nA\n", encoding="utf-8")
        with pytest.raises(DataError):
            read_partition(path)


class TestCorrelationFile:
    """write_correlation"""

    def test_layout(self, tmp_path, rng):
        """Metric names label rows and columns"""
        matrix = DistanceMatrix.from_condensed("ABCD", rng.random(6), MetricKind.GEOGRAPHIC)
        path = write_correlation(correlation_matrix([matrix, matrix]), tmp_path / "rho.csv")
        assert path.read_text(encoding="utf-8").splitlines()[0] == "metric,geo,geo"


class TestRunManifest:
    """RunManifest"""

    def test_write_and_load(self, tmp_path):
        """Every field survives the YAML file"""
        manifest = RunManifest(command="cluster", argv=["cluster", "--k", "4"],
                               inputs={"profiles": "p.csv"}, outputs={"clusters": "c.csv"},
                               parameters={"k": 4, "seed": 0})
        path = manifest.write(tmp_path / "c.csv.manifest.yaml")
        loaded = RunManifest.load(path)
        assert loaded.to_dict() == manifest.to_dict()

    def test_not_a_manifest(self, tmp_path):
        """Other YAML files are rejected"""
        path = tmp_path / "x.yaml"
        path.write_text("a: 1\n", encoding="utf-8")
        with pytest.raises(DataError):
            RunManifest.load(path)

    def test_invalid_yaml(self, tmp_path):
        """Unparseable files are data errors"""
        path = tmp_path / "x.yaml"
        path.write_text("a: [1\n", encoding="utf-8")
        with pytest.raises(DataError):
            read_yaml(path)

    def test_paths(self, tmp_path):
        """Files get a sibling manifest, directories an inner one"""
        assert manifest_path_for(tmp_path / "d.csv").name == "d.csv.manifest.yaml"
        assert manifest_path_for(tmp_path) == tmp_path / "manifest.yaml"
