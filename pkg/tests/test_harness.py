import json

import numpy as np
import pytest

from spnn.cli import main as cli_main, parse_bandwidth
from spnn.errors import DegenerateProperty, EmptyDataset, InvalidSpec, ParseError
from spnn.harness import (
    AttackSetup,
    binarize_property,
    equal_halves,
    financial_preset,
    fit_logreg,
    fraud_preset,
    gen_synth,
    load_csv,
    logreg_scores,
    make_vertical_data,
    report_hash,
    run_experiment,
    train_test_indices,
)
from spnn.neural import auc


def write_csv(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_csv_numeric_exact(tmp_path):
    path = write_csv(tmp_path, "label,x,y\n0,1.0,4.0\n1,2.0,5.0\n0,3.0,6.0\n")
    ds = load_csv(path, "label")
    assert ds.features.shape == (3, 2)
    assert np.array_equal(ds.labels, [0, 1, 0])
    # standardization is invertible back to the raw values
    raw = ds.features * ds.std + ds.mean
    assert np.allclose(raw, [[1, 4], [2, 5], [3, 6]])


def test_load_csv_one_hot_categories(tmp_path):
    path = write_csv(tmp_path, "label,color,v\n0,red,1\n1,blue,2\n0,green,3\n1,red,4\n")
    ds = load_csv(path, "label")
    assert ds.columns == ["color=blue", "color=green", "color=red", "v"]
    raw = ds.features * ds.std + ds.mean
    assert np.array_equal(raw[:, :3], [[0, 0, 1], [1, 0, 0], [0, 1, 0], [0, 0, 1]])


def test_load_csv_standardizes(tmp_path):
    rng = np.random.default_rng(0)
    rows = "\n".join(f"{i % 2},{rng.normal(5, 3):.6f},{rng.normal(-2, 0.5):.6f}"
                     for i in range(200))
    ds = load_csv(write_csv(tmp_path, "label,a,b\n" + rows + "\n"), "label")
    assert np.max(np.abs(ds.features.mean(axis=0))) <= 1e-10
    assert np.max(np.abs(ds.features.std(axis=0) - 1)) <= 1e-10


def test_load_csv_drops_missing_rows(tmp_path):
    path = write_csv(tmp_path, "label,x\n0,1\n1,\n0,3\n1,NA\n0,5\n")
    ds = load_csv(path, "label")
    assert ds.n == 3
    assert ds.dropped_rows == 2


def test_load_csv_error_cases(tmp_path):
    with pytest.raises(ParseError):
        load_csv(write_csv(tmp_path, "label,x\n0,1,9\n"), "label")
    with pytest.raises(ParseError):
        load_csv(write_csv(tmp_path, "label,x\n0,1\n"), "missing")
    with pytest.raises(ParseError):
        load_csv(write_csv(tmp_path, "label,x\n2,1\n"), "label")
    with pytest.raises(EmptyDataset):
        load_csv(write_csv(tmp_path, "label,x\n,1\n"), "label")


def test_load_csv_deterministic(tmp_path):
    path = write_csv(tmp_path, "label,x,c\n0,1.5,a\n1,2.5,b\n0,3.5,a\n")
    a, b = load_csv(path, "label"), load_csv(path, "label")
    assert np.array_equal(a.features, b.features)
    assert a.columns == b.columns


def test_train_test_split_floor_convention():
    tr, te = train_test_indices(284_807, 0.8, seed=1)
    assert (len(tr), len(te)) == (227_845, 56_962)
    combined = np.sort(np.concatenate([tr, te]))
    assert np.array_equal(combined, np.arange(284_807))


def test_equal_halves():
    assert equal_halves(28) == (14, 14)
    assert equal_halves(83) == (42, 41)


def test_train_fraction_validation():
    with pytest.raises(InvalidSpec):
        train_test_indices(100, 0.0, 1)
    with pytest.raises(InvalidSpec):
        train_test_indices(100, 1.0, 1)


def test_gen_synth_shape_and_standardisation():
    ds = gen_synth(2000, 5, 6, seed=3)
    assert ds.features.shape == (2000, 11)
    assert "amount" in ds.columns
    assert np.max(np.abs(ds.features.mean(axis=0))) <= 1e-9
    assert np.max(np.abs(ds.features.std(axis=0) - 1)) <= 1e-9
    assert 0.4 <= ds.labels.mean() <= 0.6


def test_gen_synth_property_is_planted():
    ds = gen_synth(2000, 5, 6, seed=3)
    prop = binarize_property(ds, "amount")
    assert abs(prop.mean() - 0.5) <= 0.01  # median split balances
    # correlated support columns carry the property
    support = ds.features[:, ds.columns.index("b3")]
    assert abs(np.corrcoef(support, prop)[0, 1]) >= 0.3


def test_binarize_property_rejects_constant_column():
    ds = gen_synth(100, 4, 4, seed=1)
    ds.features[:, 0] = 0.0
    ds.columns[0] = "flat"
    with pytest.raises(DegenerateProperty):
        binarize_property(ds, "flat")
    with pytest.raises(DegenerateProperty):
        binarize_property(ds, "no_such_column")


def test_attack_setup_fraction_validation():
    with pytest.raises(InvalidSpec):
        AttackSetup(shadow_fraction=0.5, train_fraction=0.5, test_fraction=0.25)


def test_logreg_learns_separable_data():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((400, 3))
    y = (x[:, 0] + 0.5 * x[:, 1] > 0).astype(int)
    model = fit_logreg(x, y)
    assert auc(logreg_scores(model, x), y) >= 0.95


def test_logreg_attack_on_shuffled_labels_is_chance():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((600, 8))
    y = (x[:, 0] > 0).astype(int)
    shuffled = rng.permutation(y)
    model = fit_logreg(x[:400], shuffled[:400])
    assert 0.45 <= auc(logreg_scores(model, x[400:]), shuffled[400:]) <= 0.55


def test_attack_on_pure_noise_features_is_chance():
    rng = np.random.default_rng(6)
    prop = rng.integers(0, 2, size=800)
    noise_train = rng.standard_normal((800, 8))
    noise_eval = rng.standard_normal((800, 8))
    model = fit_logreg(noise_train, prop)
    assert abs(auc(logreg_scores(model, noise_eval), prop) - 0.5) <= 0.05


def small_experiment_config(tmp_path=None):
    return {
        "dataset": {"kind": "synthetic", "rows": 600, "d_a": 4, "d_b": 4, "seed": 2},
        "train_fraction": 0.8,
        "repetitions": 2,
        "train": {"d_a": 4, "d_b": 4, "layer_dims": [8, 6, 1], "activations": ["sigmoid"],
                  "learning_rate": 0.1, "batch_size": 64, "epochs": 2, "seed": 3},
    }


def test_run_experiment_report_is_reproducible():
    config = small_experiment_config()
    r1 = run_experiment(config)
    r2 = run_experiment(config)
    assert report_hash(r1) == report_hash(r2)
    assert r1["runs"][0]["timing"]["wall_seconds"] != r2["runs"][0]["timing"]["wall_seconds"] \
        or True  # timing may coincide; the hash ignores it either way
    assert r1["auc_gap"] is not None
    assert len(r1["runs"]) == 2
    assert r1["runs"][0]["seed"] != r1["runs"][1]["seed"]


def test_report_hash_ignores_timing_fields():
    config = small_experiment_config()
    report = run_experiment(config)
    mutated = json.loads(json.dumps(report, default=float))
    mutated["runs"][0]["timing"]["wall_seconds"] = 1e9
    assert report_hash(mutated) == report_hash(json.loads(json.dumps(report, default=float)))


def test_presets_carry_reference_hyperparameters():
    fraud = fraud_preset()
    assert fraud["train"]["layer_dims"] == [28, 8, 8, 1]          # hidden dims (8, 8)
    assert fraud["train"]["activations"] == ["sigmoid", "sigmoid"]
    assert fraud["train"]["learning_rate"] == 0.001
    assert fraud["train_fraction"] == 0.8
    assert fraud["repetitions"] == 5
    financial = financial_preset()
    assert financial["train"]["layer_dims"] == [556, 400, 16, 8, 1]  # hidden (400, 16, 8)
    assert financial["train"]["activations"][-1] == "relu"           # relu on last hidden
    assert set(financial["train"]["activations"][:-1]) == {"sigmoid"}
    assert financial["train"]["learning_rate"] == 0.006
    assert financial["train_fraction"] == 0.7


def test_make_vertical_data_partitions_columns():
    ds = gen_synth(500, 4, 4, seed=9)
    data = make_vertical_data(ds, 0.8, seed=1)
    assert data.x_a_train.shape[1] == 4
    assert data.x_b_train.shape[1] == 4
    assert len(data.y_train) == 400
    assert len(data.y_test) == 100


# -- command-line interface -------------------------------------------------------------


def test_parse_bandwidth():
    assert parse_bandwidth("100K") == 100e3
    assert parse_bandwidth("1M") == 1e6
    assert parse_bandwidth("2.5g") == 2.5e9
    assert parse_bandwidth("9600") == 9600.0


def test_cli_gen_synth_and_train(tmp_path, capsys):
    out_dir = tmp_path / "synth"
    rc = cli_main(["gen-synth", "--rows", "300", "--features-a", "4",
                   "--features-b", "4", "--out", str(out_dir), "--seed", "2"])
    assert rc == 0
    capsys.readouterr()
    assert (out_dir / "full.csv").exists()
    assert (out_dir / "part_a.csv").exists()
    assert (out_dir / "part_b.csv").exists()
    meta = json.loads((out_dir / "meta.json").read_text())
    assert meta["rows"] == 300

    config = {
        "dataset": {"kind": "csv", "path": str(out_dir / "full.csv"),
                    "label_column": "label"},
        "train_fraction": 0.8,
        "train": {"d_a": 4, "d_b": 4, "layer_dims": [8, 6, 1],
                  "activations": ["sigmoid"], "learning_rate": 0.1,
                  "batch_size": 64, "epochs": 1, "seed": 3},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    report_path = tmp_path / "report.json"
    rc = cli_main(["train", "--config", str(cfg_path), "--out", str(report_path)])
    assert rc == 0
    report = json.loads(report_path.read_text())
    assert report["spnn_auc_mean"] is not None


def test_cli_attack_subcommand(tmp_path, capsys):
    config = {
        "dataset": {"kind": "synthetic", "rows": 800, "d_a": 4, "d_b": 4, "seed": 2},
        "train": {"d_a": 4, "d_b": 4, "layer_dims": [8, 6, 1], "activations": ["sigmoid"],
                  "learning_rate": 0.05, "batch_size": 100, "epochs": 2, "seed": 3,
                  "eval_each_epoch": False},
        "attack": {"property_column": "amount", "seed": 4},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    rc = cli_main(["attack", "--config", str(cfg_path), "--optimizer", "sgd"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert 0.0 <= out["attack_auc"] <= 1.0
    assert out["optimizer"] == "sgd"


def test_cli_sweep_scale(tmp_path, capsys):
    config = {
        "dataset": {"kind": "synthetic", "rows": 600, "d_a": 4, "d_b": 4, "seed": 2},
        "train_fraction": 0.8,
        "train": {"d_a": 4, "d_b": 4, "layer_dims": [8, 6, 1], "activations": ["sigmoid"],
                  "learning_rate": 0.1, "batch_size": 64, "epochs": 1, "seed": 3},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    rc = cli_main(["sweep-scale", "--config", str(cfg_path), "--fractions", "0.5,1.0"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert len(out["points"]) == 2


def test_cli_error_object_and_exit_code(tmp_path, capsys):
    rc = cli_main(["train", "--config", str(tmp_path / "missing.json")])
    assert rc == 1
    err = json.loads(capsys.readouterr().out)
    assert err["error"]["type"] == "FileNotFoundError"


def test_epoch_time_model_scales_inversely_with_bandwidth():
    from spnn.harness import epoch_time_model

    compute, nbytes, frames, latency = 2.0, 10_000_000, 40, 0.001
    base = epoch_time_model(compute, nbytes, frames, 1e6, latency)
    double = epoch_time_model(compute, nbytes, frames, 2e6, latency)
    comm = base - compute - frames * latency
    assert comm == pytest.approx(nbytes * 8 / 1e6)
    assert (double - compute - frames * latency) == pytest.approx(comm / 2)


def test_split_vertical_by_column_list():
    from spnn.harness import split_vertical

    ds = gen_synth(100, 3, 3, seed=1)
    idx_a, idx_b = split_vertical(ds, columns_a=["b0", "a1"])
    assert [ds.columns[i] for i in idx_a] == ["b0", "a1"]
    assert sorted(set(idx_a) | set(idx_b)) == list(range(ds.d))
    data = make_vertical_data(ds, 0.8, seed=2, columns_a=["b0", "a1"])
    assert data.x_a_train.shape[1] == 2
    assert data.x_b_train.shape[1] == 4
    with pytest.raises(InvalidSpec):
        split_vertical(ds, columns_a=["nope"])
    with pytest.raises(InvalidSpec):
        split_vertical(ds, columns_a=list(ds.columns))
