import json
import subprocess
import sys

import pytest

from qsmooth import __version__
from qsmooth.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, main, resolved_argv, build_parser


@pytest.fixture(scope="module")
def iris_params(tmp_path_factory):
    out = tmp_path_factory.mktemp("train") / "iris.csv"
    assert main(["train", "--dataset", "iris", "--epochs", "60", "--out", str(out)]) == EXIT_OK
    return out


def read_manifest(path):
    return json.loads(path.read_text())


# -- train -------------------------------------------------------------------------------

def test_train_writes_params_header_and_manifest(iris_params, capsys):
    assert iris_params.exists()
    assert iris_params.with_name("iris.header.json").exists()
    manifest = read_manifest(iris_params.with_suffix(".manifest.json"))
    assert manifest["tool"] == "qsmooth" and manifest["version"] == __version__
    assert manifest["command"] == "train"
    assert manifest["args"]["layers"] == 2 and manifest["args"]["qubits"] == 3
    assert manifest["metrics"]["test_accuracy"] == 1.0
    assert len(manifest["inputs"]) == 1 and all(len(h) == 64 for h in manifest["inputs"].values())
    assert "--seed" in manifest["argv"] and "--epochs" in manifest["argv"]


def test_train_rejects_wrong_width(tmp_path, capsys):
    code = main(["train", "--dataset", "iris", "--qubits", "4", "--out", str(tmp_path / "p.csv")])
    assert code == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


# -- certify -------------------------------------------------------------------------------

@pytest.mark.parametrize("extra", [["--path", "rs", "--shots", "64"],
                                   ["--path", "quadro", "--m", "3", "--reps", "3", "--dist", "uniform"]])
def test_certify_outputs(iris_params, tmp_path, extra):
    out = tmp_path / "run"
    code = main(["certify", "--dataset", "iris", "--params", str(iris_params), "--limit", "4",
                 "--workers", "1", "--out-dir", str(out)] + extra)
    assert code == EXIT_OK
    records = (out / "records.csv").read_text().splitlines()
    assert len(records) == 5
    curve = (out / "curve.csv").read_text().splitlines()
    assert curve[0] == "radius,certified_accuracy,path,shots" and len(curve) == 5
    manifest = read_manifest(out / "manifest.json")
    assert str(iris_params) in manifest["inputs"]


def test_certify_rejects_exact_on_rs(iris_params, tmp_path):
    code = main(["certify", "--dataset", "iris", "--params", str(iris_params), "--path", "rs",
                 "--dist", "exact", "--out-dir", str(tmp_path)])
    assert code == EXIT_CONFIG


@pytest.mark.parametrize("flags", [["--reps", "2"], ["--k", "7"], ["--sigma", "-1"], ["--m", "0"]])
def test_certify_bad_configuration(iris_params, tmp_path, flags):
    code = main(["certify", "--dataset", "iris", "--params", str(iris_params), "--path", "quadro",
                 "--limit", "1", "--out-dir", str(tmp_path)] + flags)
    assert code == EXIT_CONFIG


def test_certify_missing_params_is_data_error(tmp_path):
    code = main(["certify", "--dataset", "iris", "--params", str(tmp_path / "nope.csv"), "--path", "rs",
                 "--out-dir", str(tmp_path)])
    assert code == EXIT_DATA


# -- distribution and bow ----------------------------------------------------------------

def test_distribution_worked_example(tmp_path, capsys):
    out = tmp_path / "law.csv"
    assert main(["distribution", "--method", "target", "--x", "011", "--sigma", "1", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "distance 0: per string 0.643914" in text
    assert "distance 3: per string 0.032059" in text
    rows = out.read_text().splitlines()
    assert len(rows) == 9
    assert read_manifest(out.with_suffix(".manifest.json"))["args"]["k"] == 3


@pytest.mark.parametrize("method", ["hamming-circuit", "uniform-circuit", "mottonen"])
def test_distribution_methods(tmp_path, method):
    out = tmp_path / f"{method}.csv"
    assert main(["distribution", "--method", method, "--x", "10", "--sigma", "0.5", "--out", str(out)]) == 0
    total = sum(float(line.split(",")[1]) for line in out.read_text().splitlines()[1:])
    assert total == pytest.approx(1.0)


def test_distribution_bad_bits(tmp_path):
    assert main(["distribution", "--method", "target", "--x", "01a", "--sigma", "1",
                 "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG


def test_bow_command(tmp_path, capsys):
    src = tmp_path / "toy.tsv"
    src.write_text("1\t" + "\t".join(str(float(i)) for i in range(30)) + "\n"
                   "2\t" + "\t".join(str(float(-i)) for i in range(30)) + "\n")
    out = tmp_path / "bits.csv"
    assert main(["bow", "--in", str(src), "--full-series", "--out", str(out)]) == EXIT_OK
    assert out.read_text().splitlines() == ["bits,label", "0101,0", "1010,1"]


def test_bow_malformed_input_is_data_error(tmp_path, capsys):
    src = tmp_path / "bad.tsv"
    src.write_text("1\tabc\n")
    assert main(["bow", "--in", str(src), "--out", str(tmp_path / "o.csv")]) == EXIT_DATA
    assert ":1:" in capsys.readouterr().err


def test_bow_bad_bins(tmp_path):
    src = tmp_path / "toy.tsv"
    src.write_text("1\t" + "\t".join("1" for _ in range(40)) + "\n")
    assert main(["bow", "--in", str(src), "--bins", "3", "--out", str(tmp_path / "o.csv")]) == EXIT_CONFIG


# -- parsing and replay ----------------------------------------------------------------------

def test_usage_errors_exit_config(capsys):
    assert main([]) == EXIT_CONFIG
    assert main(["train", "--dataset", "mnist", "--out", "x"]) == EXIT_CONFIG
    assert main(["--version"]) == EXIT_OK


def test_resolved_argv_round_trips():
    parser = build_parser()
    args = parser.parse_args(["certify", "--dataset", "iris", "--params", "p.csv", "--path", "quadro",
                              "--out-dir", "o", "--m", "5"])
    again = parser.parse_args(resolved_argv(args))
    assert vars(again) == vars(args)


def test_replay_is_bitwise_identical(iris_params, tmp_path):
    first = tmp_path / "a"
    assert main(["certify", "--dataset", "iris", "--params", str(iris_params), "--path", "rs",
                 "--shots", "50", "--limit", "3", "--seed", "7", "--workers", "2",
                 "--out-dir", str(first)]) == EXIT_OK
    second = tmp_path / "b"
    assert main(["replay", str(first / "manifest.json"), "--out-dir", str(second)]) == EXIT_OK
    for name in ("records.csv", "curve.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_replay_detects_changed_input(iris_params, tmp_path):
    params = tmp_path / "p.csv"
    params.write_bytes(iris_params.read_bytes())
    (tmp_path / "p.header.json").write_bytes(iris_params.with_name("iris.header.json").read_bytes())
    run = tmp_path / "run"
    assert main(["certify", "--dataset", "iris", "--params", str(params), "--path", "rs", "--shots", "10",
                 "--limit", "1", "--out-dir", str(run)]) == EXIT_OK
    params.write_text(params.read_text() + "\n")  # same angles, different bytes
    assert main(["replay", str(run / "manifest.json")]) == EXIT_DATA


def test_replay_rejects_foreign_json(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"tool": "other"}))
    assert main(["replay", str(path)]) == EXIT_DATA
    path.write_text("not json")
    assert main(["replay", str(path)]) == EXIT_DATA


def test_module_entry_point(tmp_path):
    out = tmp_path / "d.csv"
    proc = subprocess.run([sys.executable, "-m", "qsmooth.cli", "distribution", "--method", "target",
                           "--x", "01", "--sigma", "0.5", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and out.exists()
