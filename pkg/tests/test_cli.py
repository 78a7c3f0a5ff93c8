import numpy as np
import pytest

from deepdict.cli import main
from deepdict.dataio import write_amat
from deepdict.persist import load_features, load_model, save_features

from conftest import clustered_dataset, write_idx_images, write_idx_labels


@pytest.fixture
def amat_pair(tmp_path):
    X, y = clustered_dataset(7, dim=16, per_class=40)
    train, test = tmp_path / "toy_train.amat", tmp_path / "toy_test.amat"
    write_amat(X[:, :90], y[:90], train)
    write_amat(X[:, 90:], y[90:], test)
    return train, test


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_train_writes_model(tmp_path, amat_pair, capsys):
    train, _ = amat_pair
    out = tmp_path / "m.ddl"
    code, stdout, _ = run(["train", "--data", train, "--layers", "8,4", "--out", out], capsys)
    assert code == 0
    assert load_model(out).layer_sizes == [8, 4]
    assert "layer 0\tdense\t8" in stdout
    assert "training time" in stdout


def test_missing_layers_is_usage_error(tmp_path, amat_pair, capsys):
    train, _ = amat_pair
    with pytest.raises(SystemExit) as exc:
        main(["train", "--data", str(train), "--out", str(tmp_path / "m")])
    assert exc.value.code == 2
    assert "--layers" in capsys.readouterr().err


def test_bad_layers_is_usage_error(amat_pair):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--data", str(amat_pair[0]), "--layers", "8,x", "--out", "m"])
    assert exc.value.code == 2


def test_widening_chain_explained(tmp_path, amat_pair, capsys):
    train, _ = amat_pair
    code, _, err = run(["train", "--data", train, "--layers", "12,3,6", "--out", tmp_path / "m"], capsys)
    assert code == 1
    assert "layer 2" in err and "300-150-50" in err


def test_encode_and_eval(tmp_path, amat_pair, capsys):
    train, test = amat_pair
    model = tmp_path / "m.ddl"
    run(["train", "--data", train, "--layers", "8,4", "--out", model], capsys)
    ftr, fte = tmp_path / "tr.ddf", tmp_path / "te.ddf"
    assert run(["encode", "--model", model, "--data", train, "--out", ftr], capsys)[0] == 0
    assert run(["encode", "--model", model, "--data", test, "--out", fte], capsys)[0] == 0
    assert load_features(ftr)[0].shape[0] == load_features(fte)[0].shape[0] == 4

    again = tmp_path / "again.ddf"
    run(["encode", "--model", model, "--data", train, "--out", again], capsys)
    assert again.read_bytes() == ftr.read_bytes()

    code, stdout, _ = run(["eval-knn", "--train", ftr, "--test", ftr], capsys)
    assert code == 0
    assert stdout.startswith("accuracy\t100.00")
    code, stdout, _ = run(["eval-knn", "--train", ftr, "--test", fte], capsys)
    assert code == 0 and stdout.startswith("accuracy\t")


def test_encode_wrong_dimension(tmp_path, amat_pair, capsys):
    train, _ = amat_pair
    model = tmp_path / "m.ddl"
    run(["train", "--data", train, "--layers", "8,4", "--out", model], capsys)
    other = tmp_path / "other.amat"
    write_amat(np.random.default_rng(0).random((5, 10)), np.zeros(10, int), other)
    code, _, err = run(["encode", "--model", model, "--data", other, "--out", tmp_path / "f"], capsys)
    assert code == 1
    assert "5" in err and "16" in err


def test_eval_knn_toy_oracle(tmp_path, capsys):
    toy = np.array([[0.0, 0.3, 3.0, 3.2, 0.0, 0.4], [0.0, 0.1, 3.0, 2.7, 4.0, 4.3]])
    labels = np.array([0, 0, 1, 1, 2, 2])
    save_features(toy[:, ::2], tmp_path / "tr.ddf", labels=labels[::2])
    save_features(toy[:, 1::2], tmp_path / "te.ddf", labels=labels[1::2])
    code, stdout, _ = run(["eval-knn", "--train", tmp_path / "tr.ddf", "--test", tmp_path / "te.ddf"], capsys)
    assert code == 0
    assert stdout.startswith("accuracy\t100.00")


def test_eval_knn_dimension_mismatch(tmp_path, capsys):
    save_features(np.zeros((3, 2)), tmp_path / "a.ddf", labels=[0, 1])
    save_features(np.zeros((4, 2)), tmp_path / "b.ddf", labels=[0, 1])
    code, _, _ = run(["eval-knn", "--train", tmp_path / "a.ddf", "--test", tmp_path / "b.ddf"], capsys)
    assert code == 1


def test_compare_table(tmp_path, amat_pair, capsys):
    train, test = amat_pair
    argv = ["compare", "--data", train, "--test-data", test, "--layers", "10,6,3", "--shallow", "3"]
    code, stdout, _ = run(argv, capsys)
    assert code == 0
    lines = stdout.splitlines()
    assert lines[0] == "dataset\tdeep (10-6-3)\tshallow (3)"
    name, deep_acc, shallow_acc = lines[1].split("\t")
    assert name == "toy_train"
    assert len(deep_acc.split(".")[1]) == 2 and 0 <= float(shallow_acc) <= 100
    code2, stdout2, _ = run(argv, capsys)
    assert stdout2.splitlines()[:2] == lines[:2]


def test_compare_shallow_too_wide(tmp_path, amat_pair, capsys):
    train, test = amat_pair
    code, _, err = run(["compare", "--data", train, "--test-data", test,
                        "--layers", "8,4", "--shallow", "40"], capsys)
    assert code == 1 and "40" in err


def test_compare_idx(tmp_path, capsys):
    X, y = clustered_dataset(3, dim=16, per_class=30)
    imgs = np.rint(X.T.reshape(-1, 4, 4) * 255).astype(np.uint8)
    paths = {k: tmp_path / k for k in ("tri", "trl", "tei", "tel")}
    write_idx_images(paths["tri"], imgs[:60])
    write_idx_labels(paths["trl"], y[:60])
    write_idx_images(paths["tei"], imgs[60:])
    write_idx_labels(paths["tel"], y[60:])
    code, stdout, _ = run(["compare", "--format", "idx", "--data", paths["tri"], "--labels", paths["trl"],
                           "--test-data", paths["tei"], "--test-labels", paths["tel"],
                           "--layers", "8,3", "--shallow", "3", "--name", "idx-toy"], capsys)
    assert code == 0
    assert stdout.splitlines()[1].startswith("idx-toy\t")


def test_config_file(tmp_path, amat_pair, capsys):
    train, _ = amat_pair
    cfg = tmp_path / "run.cfg"
    out = tmp_path / "m.ddl"
    cfg.write_text(f"# experiment\ndata = {train}\nlayers = 8,4\nlambda = 0.25\nout = {out}\n")
    code, _, _ = run(["train", "--config", cfg], capsys)
    assert code == 0
    assert load_model(out).lam == 0.25
    # flags override the file
    code, _, _ = run(["train", "--config", cfg, "--lambda", "0.5"], capsys)
    assert load_model(out).lam == 0.5


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("colour = blue\n")
    with pytest.raises(SystemExit) as exc:
        main(["train", "--config", str(cfg)])
    assert exc.value.code == 2


def test_info(tmp_path, amat_pair, capsys):
    train, _ = amat_pair
    model = tmp_path / "m.ddl"
    run(["train", "--data", train, "--layers", "8,4", "--out", model], capsys)
    code, stdout, _ = run(["info", model], capsys)
    assert code == 0
    assert "chain\t16-8-4" in stdout and "kinds\tdense,sparse" in stdout

    feats = tmp_path / "f.ddf"
    save_features(np.zeros((4, 3)), feats)
    code, stdout, _ = run(["info", feats], capsys)
    assert code == 0 and "type\tfeatures" in stdout

    bad = tmp_path / "bad.ddl"
    bad.write_bytes(model.read_bytes()[:20])
    assert run(["info", bad], capsys)[0] == 1


def test_no_command():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
