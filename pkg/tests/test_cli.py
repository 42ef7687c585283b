"""End-to-end coverage of the command-line front end."""

import subprocess
import sys

import numpy as np
import pytest

from lidym import robotio
from lidym.cli import _slug, main

TINY_INI = """\
[experiment]
seed = 3
n_scaffolds = 3
t_rand_lo = 40
t_rand_hi = 60
seq_t = 8

[training]
epochs = 2
batch = 32
runs = 1
max_windows_per_epoch = 200
max_val_windows = 100
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """One shared pipeline run: identify, limopa-gen, simulate, train."""
    root = tmp_path_factory.mktemp("cli")
    ini = root / "tiny.ini"
    ini.write_text(TINY_INI)
    out = root / "work"
    base = ["--config", str(ini), "--out", str(out)]
    assert main(base + ["identify"]) == 0
    assert main(base + ["limopa-gen"]) == 0
    assert main(base + ["simulate", "--path", str(out / "path.csv")]) == 0
    assert main(base + ["train", "--dataset", str(out / "dataset.csv"),
                        "--model", str(out / "model.npz"),
                        "--variant", "LSTM-FCL"]) == 0
    return ini, out


class TestPipelineCommands:
    def test_identify_outputs(self, workdir):
        _, out = workdir
        assert (out / "robot.txt").exists()
        assert (out / "params_true.txt").exists()
        model = robotio.read_identified_model(out / "model.npz",
                                              robotio.read_robot(
                                                  out / "robot.txt"))
        assert model.diagnostics["rank"] == 57

    def test_path_and_dataset_outputs(self, workdir):
        _, out = workdir
        path = robotio.read_path(out / "path.csv")
        assert (path.phase == "scaf").sum() == 3
        ds = robotio.read_dataset(out / "dataset.csv")
        assert ds.t.size > 500
        assert ds.rate == 100.0

    def test_train_writes_checkpoint(self, workdir):
        _, out = workdir
        ckpt = out / "lstm-fcl-with-tau-rbd-with-r.npz"
        assert ckpt.exists()
        tm = robotio.read_checkpoint(ckpt)
        assert tm.spec.variant == "LSTM-FCL"
        assert tm.spec.T == 8

    def test_eval_prints_per_joint_table(self, workdir, capsys):
        ini, out = workdir
        rc = main(["--config", str(ini), "--out", str(out), "eval",
                   "--dataset", str(out / "dataset.csv"),
                   "--model", str(out / "model.npz"),
                   "--checkpoint",
                   str(out / "lstm-fcl-with-tau-rbd-with-r.npz")])
        assert rc == 0
        text = capsys.readouterr().out
        assert "joint 7" in text and "average" in text

    def test_eval_traces_export(self, workdir, tmp_path):
        ini, out = workdir
        rc = main(["--config", str(ini), "--out", str(tmp_path), "eval",
                   "--dataset", str(out / "dataset.csv"),
                   "--model", str(out / "model.npz"),
                   "--checkpoint",
                   str(out / "lstm-fcl-with-tau-rbd-with-r.npz"),
                   "--traces"])
        assert rc == 0
        lines = (tmp_path / "traces.csv").read_text().splitlines()
        header = [ln for ln in lines if not ln.startswith("#")][0]
        assert header == "t,joint,model,tau_meas,tau_pred"

    def test_seed_flag_overrides_config(self, workdir, tmp_path):
        ini, _ = workdir
        a, b = tmp_path / "a", tmp_path / "b"
        for dest, seed in ((a, "3"), (b, "4")):
            assert main(["--config", str(ini), "--seed", seed,
                         "--out", str(dest), "limopa-gen"]) == 0
        pa = robotio.read_path(a / "path.csv")
        pb = robotio.read_path(b / "path.csv")
        # the stored seed is the assembly stage's draw, master seed + 1
        assert pa.seed == 4 and pb.seed == 5
        assert not np.array_equal(pa.waypoints, pb.waypoints)


@pytest.fixture(scope="module")
def ablated(tmp_path_factory):
    root = tmp_path_factory.mktemp("ablate")
    ini = root / "tiny.ini"
    ini.write_text(TINY_INI)
    out = root / "run1"
    assert main(["--config", str(ini), "--out", str(out), "ablate"]) == 0
    return ini, out


class TestAblateCommand:
    def test_report_files_and_grid_size(self, ablated):
        _, out = ablated
        report = robotio.read_report_csv(out / "report.csv")
        assert len(report.rows) == 13
        assert report.labels()[0] == "RBD"
        assert (out / "report.md").exists()

    def test_checkpoint_per_trained_variant(self, ablated):
        _, out = ablated
        report = robotio.read_report_csv(out / "report.csv")
        for r in report.rows[1:]:
            assert (out / f"{_slug(r.label)}.npz").exists(), r.label

    def test_rerun_is_bit_identical(self, ablated):
        ini, out = ablated
        out2 = out.parent / "run2"
        assert main(["--config", str(ini), "--out", str(out2),
                     "ablate"]) == 0
        assert (out / "report.csv").read_bytes() \
            == (out2 / "report.csv").read_bytes()

    def test_report_command_rerenders(self, ablated, tmp_path, capsys):
        _, out = ablated
        rc = main(["--out", str(tmp_path), "report",
                   "--table", str(out / "report.csv")])
        assert rc == 0
        assert "RBD" in capsys.readouterr().out
        assert (tmp_path / "report.md").read_text() \
            == (out / "report.md").read_text()


class TestExitCodes:
    def test_missing_input_file(self, tmp_path, capsys):
        rc = main(["--out", str(tmp_path), "identify",
                   "--robot", str(tmp_path / "nope.txt")])
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_malformed_config(self, tmp_path, capsys):
        ini = tmp_path / "bad.ini"
        ini.write_text("[training]\nepocks = 2\n")
        rc = main(["--config", str(ini), "--out", str(tmp_path),
                   "limopa-gen"])
        assert rc == 2

    def test_contract_error(self, workdir, tmp_path, capsys):
        ini, out = workdir
        rc = main(["--config", str(ini), "--out", str(tmp_path), "train",
                   "--dataset", str(out / "dataset.csv"),
                   "--model", str(out / "model.npz"),
                   "--variant", "LSTM-2", "--seq-t", "0"])
        assert rc == 1

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "lidym.cli", "--help"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "ablate" in proc.stdout


class TestSlug:
    def test_examples(self):
        assert _slug("RBD") == "rbd"
        assert _slug("LSTM-2 (with tau_rbd, with r)") \
            == "lstm-2-with-tau-rbd-with-r"
