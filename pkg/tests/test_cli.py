import json
import subprocess
import sys

import pytest

from corrrnn.cli import main
from corrrnn.dataio import read_dataset
from corrrnn.evalkit import parse_summary

SMALL = ["--classes", "4", "--per-class", "12", "--frames", "6", "--dim-x", "5", "--dim-y", "4",
         "--noise", "0.1", "--seed", "1"]


def run(*argv):
    return main([str(a) for a in argv])


def test_synth_spec_example(tmp_path):
    out = tmp_path / "d.crns"
    assert run("synth", "--classes", 4, "--per-class", 50, "--frames", 8, "--dim-x", 20,
               "--dim-y", 12, "--noise", 0.1, "--seed", 1, "--out", out) == 0
    ds = read_dataset(out)
    assert len(ds) == 200 and ds.dims == (20, 12) and ds.window == 8
    manifest = json.loads((tmp_path / "d.crns.manifest.json").read_text())
    assert manifest["command"] == "synth" and manifest["seed"] == 1
    assert manifest["versions"]["crns"] == 1


def test_synth_byte_identical(tmp_path):
    a, b = tmp_path / "a.crns", tmp_path / "b.crns"
    assert run("synth", *SMALL, "--out", a) == 0
    assert run("synth", *SMALL, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    ma = json.loads((tmp_path / "a.crns.manifest.json").read_text())
    mb = json.loads((tmp_path / "b.crns.manifest.json").read_text())
    for m in (ma, mb):
        m.pop("timestamp")
        m["flags"].pop("out")
        m.pop("outputs")
    assert ma == mb


def test_synth_missing_out():
    assert run("synth", "--classes", 4) == 2


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("synth", *SMALL, "--out", d / "train.crns") == 0
    assert run("synth", *SMALL[:-1], "2", "--per-class", "6", "--out", d / "test.crns") == 0
    return d


def test_train_zero_epochs(data):
    out = data / "init.crnm"
    assert run("train", "--data", data / "train.crns", "--config", "corr-dw", "--hidden", 6,
               "--epochs", 0, "--out", out) == 0
    assert out.exists() and (data / "init.crnm.loss.tsv").read_text().count("\n") == 1


def test_train_eval_round(data, capsys):
    out = data / "m.crnm"
    args = ["train", "--data", data / "train.crns", "--config", "corr-dw", "--hidden", 6,
            "--epochs", 2, "--batch", 16, "--seed", 3]
    assert run(*args, "--out", out) == 0
    assert run(*args, "--out", data / "m2.crnm") == 0
    assert out.read_bytes() == (data / "m2.crnm").read_bytes()
    assert (data / "m.crnm.loss.tsv").read_text().count("\n") == 3
    capsys.readouterr()
    summary = data / "s.txt"
    assert run("eval", "--model", out, "--train", data / "train.crns", "--test",
               data / "test.crns", "--setting", "fusion", "--out", summary) == 0
    assert "accuracy=" in capsys.readouterr().out
    fields = parse_summary(summary.read_text())
    assert 0.0 <= float(fields["accuracy"]) <= 1.0 and fields["config"] == "corr-dw"
    first = summary.read_bytes()
    assert run("eval", "--model", out, "--train", data / "train.crns", "--test",
               data / "test.crns", "--setting", "fusion", "--out", summary) == 0
    assert summary.read_bytes() == first
    assert run("eval", "--model", out, "--train", data / "train.crns", "--test",
               data / "test.crns", "--setting", "shared-xy", "--slices", 3,
               "--noise-snr", 0) == 0


def test_eval_unknown_setting(data):
    assert run("eval", "--model", data / "m.crnm", "--train", data / "train.crns", "--test",
               data / "test.crns", "--setting", "late-fusion") == 2


def test_eval_dim_mismatch(data, tmp_path):
    other = tmp_path / "o.crns"
    assert run("synth", "--per-class", 3, "--dim-x", 7, "--out", other) == 0
    assert run("eval", "--model", data / "m.crnm", "--train", other, "--test", other) == 3


def test_train_corr_needs_batches(data):
    assert run("train", "--data", data / "train.crns", "--config", "corr", "--batch", 1,
               "--epochs", 1, "--out", data / "x.crnm") == 2


def test_missing_input_file(tmp_path):
    assert run("train", "--data", tmp_path / "nope.crns", "--out", tmp_path / "m.crnm") == 3


def test_baseline_train_and_eval(data):
    out = data / "b.crnm"
    assert run("train", "--data", data / "train.crns", "--config", "baseline", "--hidden", 6,
               "--epochs", 1, "--out", out) == 0
    assert run("eval", "--model", out, "--train", data / "train.crns", "--test",
               data / "test.crns") == 0
    assert run("eval", "--model", out, "--train", data / "train.crns", "--test",
               data / "test.crns", "--setting", "shared-xy") == 2


def test_gradcheck_exit_codes(capsys):
    assert run("gradcheck", "--config", "corr-dw", "--seed", 7) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 34 and lines[-1].startswith("gradcheck PASS")
    assert run("gradcheck", "--config", "fused", "--corrupt-block", "dec.x.V") == 1
    assert "dec.x.V" in [l.split()[0] for l in capsys.readouterr().out.splitlines()
                         if l.endswith("FAIL")]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "corrrnn", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "gradcheck" in res.stdout
