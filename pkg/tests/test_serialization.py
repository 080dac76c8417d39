"""Tests for graph, filter, checkpoint and table files."""

import json

import numpy as np
import pytest

from gtcnn.errors import CheckpointError, ParameterError
from gtcnn.graphs import line_graph
from gtcnn.models import GraphKind, JointFilterCoeffs, PerturbationReport, ProductSpec
from gtcnn.nn import Dataset, EpochRecord, GTCNNConfig, History, ProductMode, forward, init_model
from gtcnn.serialization import (
    graph_from_dict,
    graph_to_dict,
    load_checkpoint,
    load_dataset,
    load_filter,
    load_graph,
    load_signal_csv,
    read_reports_csv,
    save_checkpoint,
    save_dataset,
    save_filter,
    save_graph,
    save_signal_csv,
    write_csv,
    write_history_csv,
    write_json,
    write_reports_csv,
)


def _report(**overrides):
    values = dict(
        epsilon=0.01,
        snr_db=10.0,
        delta=0.5,
        C_est=1.0,
        L=2,
        F=2,
        N=4,
        T=3,
        bound=1.2,
        empirical_distance=0.3,
        input_norm=1.0,
    )
    values.update(overrides)
    return PerturbationReport(**values)


class TestGraphFiles:
    def test_dict_form(self, edge_graph):
        data = graph_to_dict(edge_graph)
        assert data["n"] == 2 and data["symmetric"] is True
        assert sorted(map(tuple, data["edges"])) == [(0, 1, 1.0), (1, 0, 1.0)]

    def test_file(self, tmp_path, small_sbm):
        path = tmp_path / "graphs" / "spatial.json"
        save_graph(path, small_sbm)
        loaded = load_graph(path)
        np.testing.assert_array_equal(loaded.dense(), small_sbm.dense())
        assert loaded.symmetric and loaded.kind is GraphKind.SPATIAL

    def test_directed(self):
        g = graph_from_dict({"n": 3, "edges": [[1, 0, 1.0], [2, 1, 1.0]]}, GraphKind.TEMPORAL)
        np.testing.assert_array_equal(g.dense(), line_graph(3).dense())
        assert not g.symmetric and g.kind is GraphKind.TEMPORAL

    @pytest.mark.parametrize("data", [{"edges": []}, {"n": 2, "edges": [[0, 1]]}, {"n": 2, "edges": "none"}])
    def test_malformed(self, data):
        with pytest.raises(ParameterError):
            graph_from_dict(data)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_graph(tmp_path / "nope.json")


class TestSignalAndFilterFiles:
    def test_signal_csv(self, tmp_path):
        x = np.array([[0.1, 2.0, -3.5], [1e-20, 0.0, 7.0]])
        path = tmp_path / "x.csv"
        save_signal_csv(path, x)
        assert path.read_text().splitlines()[0] == "0.10000000000000001,2,-3.5"
        np.testing.assert_array_equal(load_signal_csv(path), x)

    def test_single_row_stays_two_dimensional(self, tmp_path):
        path = tmp_path / "x.csv"
        save_signal_csv(path, [1.0, 2.0])
        assert load_signal_csv(path).shape == (1, 2)

    def test_filter_file(self, tmp_path):
        h = JointFilterCoeffs(np.array([[1.0, 0.5, 0.0], [0.25, 0.0, -1.0]]))
        path = tmp_path / "h.json"
        save_filter(path, h)
        assert json.loads(path.read_text())["k_tilde"] == 2
        np.testing.assert_array_equal(load_filter(path).h, h.h)

    def test_filter_file_with_wrong_shape(self, tmp_path):
        path = tmp_path / "h.json"
        path.write_text(json.dumps({"k_bar": 2, "k_tilde": 0, "h": [[1.0]]}))
        with pytest.raises(ParameterError):
            load_filter(path)

    def test_filter_file_missing_key(self, tmp_path):
        path = tmp_path / "h.json"
        path.write_text(json.dumps({"h": [[1.0]]}))
        with pytest.raises(ParameterError):
            load_filter(path)


class TestCheckpoint:
    @pytest.mark.parametrize(
        "config",
        [
            GTCNNConfig(features=(1, 3, 2), orders=((2, 1), (1, 1)), outputs=3),
            GTCNNConfig(
                features=(1, 2),
                orders=((2, 0),),
                outputs=2,
                product_mode=ProductMode.PRODUCT,
                product=ProductSpec.cartesian().as_parametric(),
            ),
        ],
    )
    def test_restores_predictions(self, tmp_path, small_sbm, config, rng):
        temporal = line_graph(3)
        model = init_model(config, seed=4)
        path = tmp_path / "ckpt" / "model.json"
        save_checkpoint(path, model, small_sbm, temporal, meta={"variant": "test", "data_seed": 7})
        restored = load_checkpoint(path)
        assert restored.meta == {"variant": "test", "data_seed": 7}
        assert restored.model.config.to_dict() == config.to_dict()
        assert set(restored.model.params) == set(model.params)
        x = rng.standard_normal((2, small_sbm.n * temporal.n, 1))
        expected, _ = forward(model, small_sbm, temporal, x)
        got, _ = forward(restored.model, restored.spatial, restored.temporal, x)
        np.testing.assert_array_equal(got, expected)
        assert restored.temporal.kind is GraphKind.TEMPORAL

    def test_parameters_must_match_config(self, tmp_path, small_sbm):
        config = GTCNNConfig(features=(1, 2), orders=((1, 1),), outputs=2)
        path = tmp_path / "model.json"
        save_checkpoint(path, init_model(config, seed=0), small_sbm, line_graph(2))
        data = json.loads(path.read_text())
        del data["params"]["readout.bias"]
        path.write_text(json.dumps(data))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_unreadable(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text("{")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "missing.json")


class TestTables:
    def test_write_csv_is_deterministic(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(path, ("a", "b", "c", "d"), [(1, 0.5, True, "x"), (np.int64(2), np.float64(0.1), False, "y")])
        assert path.read_text() == "a,b,c,d\n1,0.5,true,x\n2,0.10000000000000001,false,y\n"

    def test_history(self, tmp_path):
        history = History([EpochRecord(1, 0.5, 0.75, 0.25), EpochRecord(2, 0.25, 0.5, 0.5)])
        path = tmp_path / "h.csv"
        write_history_csv(path, history)
        assert path.read_text().splitlines() == [
            "epoch,train_loss,val_loss,val_metric",
            "1,0.5,0.75,0.25",
            "2,0.25,0.5,0.5",
        ]

    def test_reports(self, tmp_path):
        reports = [_report(), _report(snr_db=20.0, empirical_distance=0.125)]
        path = tmp_path / "r.csv"
        write_reports_csv(path, reports)
        assert path.read_text().splitlines()[0] == ",".join(PerturbationReport.field_names())
        loaded = read_reports_csv(path)
        assert [r.to_row() for r in loaded] == [r.to_row() for r in reports]
        assert isinstance(loaded[0].L, int)

    def test_reports_with_wrong_columns(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("epsilon,bound\n0.1,1\n")
        with pytest.raises(CheckpointError):
            read_reports_csv(path)

    def test_write_json(self, tmp_path):
        path = tmp_path / "deep" / "out.json"
        write_json(path, {"b": 1, "a": [1, 2]})
        assert path.read_text() == '{\n  "a": [\n    1,\n    2\n  ],\n  "b": 1\n}\n'


class TestDatasetFile:
    def test_npz(self, tmp_path, rng):
        data = Dataset(rng.standard_normal((5, 6, 1)), np.array([0, 1, 1, 0, 1]))
        path = tmp_path / "data" / "train.npz"
        save_dataset(path, data, sources=np.arange(5))
        loaded, extra = load_dataset(path)
        np.testing.assert_array_equal(loaded.inputs, data.inputs)
        np.testing.assert_array_equal(loaded.targets, data.targets)
        np.testing.assert_array_equal(extra["sources"], np.arange(5))

    def test_missing(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_dataset(tmp_path / "none.npz")
