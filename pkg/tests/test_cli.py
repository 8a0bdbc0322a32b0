import numpy as np
import pytest

from qtnn import data
from qtnn.cli import main


def run_cli(*argv):
    return main(list(argv))


class TestExitCodes:
    def test_config_error_is_2(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("model=qt-bnn\nbarier.height=1\n")
        assert run_cli("train", "--config", str(cfg),
                       "--out-dir", str(tmp_path / "out")) == 2
        assert "barier.height" in capsys.readouterr().err

    def test_data_format_error_is_3(self, tmp_path):
        bad = tmp_path / "bad.bin"
        bad.write_bytes(bytes(100))  # not a multiple of 3073
        assert run_cli("train", "--model", "qt-bnn", "--epochs", "1",
                       "--data-path", str(bad),
                       "--out-dir", str(tmp_path / "out")) == 3

    def test_io_error_is_4(self, tmp_path):
        assert run_cli("train", "--model", "qt-bnn",
                       "--data-path", str(tmp_path / "missing.bin"),
                       "--out-dir", str(tmp_path / "out")) == 4

    def test_success_is_0(self, tmp_path):
        assert run_cli("bound-states", "--barrier-height", "4",
                       "--barrier-width", "1") == 0


class TestGenData:
    def test_images_file(self, tmp_path):
        out = tmp_path / "imgs.bin"
        assert run_cli("gen-data", "--kind", "images", "--count", "10",
                       "--seed", "3", "--out", str(out)) == 0
        ds = data.load_cifar_binary(out.read_bytes())
        assert len(ds) == 10
        # matches the dataset a seed-3 training run would synthesise
        from qtnn.rng import SeedStream
        twin = data.synth_vehicle_images(10, SeedStream(3, 0).spawn(4))
        assert np.array_equal(ds.images, twin.images)

    def test_phrases_file(self, tmp_path):
        out = tmp_path / "corpus.tsv"
        assert run_cli("gen-data", "--kind", "phrases", "--seed", "1",
                       "--out", str(out)) == 0
        corpus = data.load_phrase_corpus(out)
        assert len(corpus) == 360


class TestTrainEval:
    def test_train_then_eval_rnn(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("model=qt-rnn\nseed=4\nepochs=2\nhidden=8\n")
        out_dir = tmp_path / "out"
        assert run_cli("train", "--config", str(cfg),
                       "--out-dir", str(out_dir)) == 0
        assert (out_dir / "metrics.csv").exists()
        assert (out_dir / "metrics.png").exists()
        capsys.readouterr()
        assert run_cli("eval", "--config", str(cfg), "--checkpoint",
                       str(out_dir / "checkpoint.qtnn"),
                       "--out", str(tmp_path / "eval.csv")) == 0
        printed = capsys.readouterr().out
        assert printed.startswith("split,loss,accuracy")
        assert (tmp_path / "eval.csv").read_text().startswith("split,loss,accuracy")

    def test_flag_overrides_config(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("model=qt-rnn\nseed=4\nepochs=50\nhidden=8\n")
        out_dir = tmp_path / "out"
        assert run_cli("train", "--config", str(cfg), "--epochs", "1",
                       "--out-dir", str(out_dir)) == 0
        lines = (out_dir / "metrics.csv").read_text().strip().split("\n")
        assert len(lines) == 3  # header + one epoch

    def test_train_without_config_file(self, tmp_path):
        out_dir = tmp_path / "out"
        assert run_cli("train", "--model", "qt-rnn", "--epochs", "1",
                       "--hidden", "8", "--seed", "2",
                       "--out-dir", str(out_dir)) == 0
        assert (out_dir / "checkpoint.qtnn").exists()


class TestActivationTableCommand:
    def test_writes_csv_and_figure(self, tmp_path):
        out = tmp_path / "table.csv"
        assert run_cli("activation-table", "--e-min", "0.1", "--e-max", "5",
                       "--steps", "20", "--out", str(out)) == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "E,T,dTdE"
        assert len(lines) == 21
        assert (tmp_path / "table.png").exists()

    def test_rejects_single_step(self, tmp_path):
        assert run_cli("activation-table", "--e-min", "0.5", "--e-max", "0.5",
                       "--steps", "1", "--out", str(tmp_path / "t.csv")) == 2

    def test_barrier_from_config_with_flag_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("model=qt-bnn\nbarrier.height=2\nbarrier.width=1\n")
        out = tmp_path / "t.csv"
        assert run_cli("activation-table", "--config", str(cfg),
                       "--barrier-height", "4",
                       "--e-min", "0.1", "--e-max", "1", "--steps", "5",
                       "--out", str(out)) == 0
        # flag wins: T(E) evaluated against height 4, width 1
        from qtnn import Barrier, transmission
        first = float(out.read_text().strip().split("\n")[1].split(",")[1])
        assert first == pytest.approx(transmission(0.1, Barrier(4, 1)), abs=1e-15)


class TestBoundStatesCommand:
    def test_line_count(self, capsys):
        assert run_cli("bound-states", "--barrier-height", "100",
                       "--barrier-width", "1") == 0
        out = capsys.readouterr().out.strip().split("\n")
        assert len(out) == 4

    def test_bad_barrier_is_config_error(self):
        assert run_cli("bound-states", "--barrier-height", "-1") == 2


class TestDumpMisclassifiedCommand:
    def test_end_to_end(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("model=qt-bnn\nseed=11\nepochs=0\nhidden=4\n"
                       "mc_samples=2\ndata.synthetic.count=50\n")
        out_dir = tmp_path / "out"
        assert run_cli("train", "--config", str(cfg),
                       "--out-dir", str(out_dir)) == 0
        mis_dir = tmp_path / "mis"
        assert run_cli("dump-misclassified", "--config", str(cfg),
                       "--checkpoint", str(out_dir / "checkpoint.qtnn"),
                       "--out-dir", str(mis_dir)) == 0
        assert (mis_dir / "index.csv").exists()

    def test_kind_mismatch_is_config_error(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("model=qt-rnn\nseed=4\nepochs=0\nhidden=8\n")
        out_dir = tmp_path / "out"
        assert run_cli("train", "--config", str(cfg),
                       "--out-dir", str(out_dir)) == 0
        assert run_cli("dump-misclassified", "--config", str(cfg),
                       "--checkpoint", str(out_dir / "checkpoint.qtnn"),
                       "--out-dir", str(tmp_path / "mis")) == 2
