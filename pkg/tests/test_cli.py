import json
import hashlib

import numpy as np
import pytest

from strokeauth import SynthConfig, generate_synthetic, export_dataset
from strokeauth.cli import main
from strokeauth.rnn.model import SiameseModel


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def small_dataset(tmp_path):
    cfg = SynthConfig(n_users=4, characters=("0", "1"), sessions=2,
                      samples_per_cell=3, inter_user_spread=0.2,
                      intra_user_noise=0.02, points=32, seed=6)
    ds, _ = generate_synthetic(cfg)
    path = tmp_path / "data.jsonl"
    export_dataset(ds, path)
    return path


class TestSynthCommand:
    def test_writes_dataset_and_manifest(self, tmp_path, capsys):
        out = tmp_path / "synth.jsonl"
        code, stdout, _ = run(
            ["synth", "--n-users", "2", "--characters", "0", "1",
             "--sessions", "1", "--samples-per-cell", "2", "--points", "32",
             "--seed", "3", "--out", str(out)],
            capsys,
        )
        assert code == 0
        assert "synthetic samples" in stdout
        assert out.exists()
        manifest = json.loads((tmp_path / "synth.jsonl.manifest.json").read_text())
        assert manifest["command"] == "synth"
        assert manifest["seed"] == 3
        assert manifest["config"]["n_users"] == 2
        assert manifest["config_digest"]
        assert manifest["outputs"] == [str(out)]

    def test_same_seed_same_bytes(self, tmp_path, capsys):
        args = ["synth", "--n-users", "2", "--sessions", "1",
                "--samples-per-cell", "2", "--points", "32", "--seed", "5"]
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        run(args + ["--out", str(a)], capsys)
        run(args + ["--out", str(b)], capsys)
        assert sha(a) == sha(b)

    def test_preset_with_override(self, tmp_path, capsys):
        out = tmp_path / "m.jsonl"
        code, _, _ = run(
            ["synth", "--preset", "moderate", "--n-users", "3", "--out", str(out)],
            capsys,
        )
        assert code == 0
        manifest = json.loads((tmp_path / "m.jsonl.manifest.json").read_text())
        assert manifest["config"]["n_users"] == 3
        # untouched knobs come from the preset
        from strokeauth.synth import MODERATE_CONFIG
        assert manifest["config"]["inter_user_spread"] == MODERATE_CONFIG.inter_user_spread

    def test_zero_users_warns_and_writes_empty(self, tmp_path, capsys):
        out = tmp_path / "empty.jsonl"
        code, _, stderr = run(["synth", "--n-users", "0", "--out", str(out)], capsys)
        assert code == 0
        assert "empty dataset" in stderr
        header = json.loads(out.read_text().splitlines()[0])
        assert header["count"] == 0
        code2, stdout, _ = run(
            ["import", "--input", str(out), "--out", str(tmp_path / "re.jsonl")], capsys
        )
        assert code2 == 0
        assert "imported 0 samples" in stdout

    def test_json_output(self, tmp_path, capsys):
        out = tmp_path / "j.jsonl"
        code, stdout, _ = run(
            ["synth", "--n-users", "1", "--sessions", "1", "--samples-per-cell", "1",
             "--points", "32", "--seed", "0", "--out", str(out), "--json"],
            capsys,
        )
        payload = json.loads(stdout)
        assert payload["samples"] == 4  # default 4-character alphabet
        assert payload["out"] == str(out)


class TestImportCommand:
    def test_round_trip_via_cli(self, small_dataset, tmp_path, capsys):
        out = tmp_path / "copy.jsonl"
        code, stdout, stderr = run(
            ["import", "--input", str(small_dataset), "--out", str(out)], capsys
        )
        assert code == 0
        assert "quarantined" not in stderr
        # identical sample lines; provenance records the source path
        orig_lines = small_dataset.read_text().splitlines()[1:]
        new_lines = out.read_text().splitlines()[1:]
        assert orig_lines == new_lines
        manifest = json.loads((tmp_path / "copy.jsonl.manifest.json").read_text())
        assert manifest["inputs"] == {str(small_dataset): sha(small_dataset)}

    def test_quarantine_echoed_to_stderr(self, small_dataset, tmp_path, capsys):
        lines = small_dataset.read_text().splitlines()
        rec = json.loads(lines[1])
        rec["strokes"][0][2][2] = -100.0  # out-of-order timestamp
        rec["repetition"] = 99
        broken = tmp_path / "broken.jsonl"
        broken.write_text("\n".join(lines + [json.dumps(rec)]) + "\n")
        out = tmp_path / "clean.jsonl"
        code, stdout, stderr = run(
            ["import", "--input", str(broken), "--out", str(out)], capsys
        )
        assert code == 0
        assert "timestamp disorder" in stderr
        assert "1 quarantined" in stdout

    def test_missing_input_fails_with_usage(self, tmp_path, capsys):
        code, _, stderr = run(
            ["import", "--input", str(tmp_path / "nope.jsonl"),
             "--out", str(tmp_path / "o.jsonl")],
            capsys,
        )
        assert code == 1
        assert "error:" in stderr
        assert "usage:" in stderr

    def test_format_neither_preset_nor_file(self, small_dataset, tmp_path, capsys):
        code, _, stderr = run(
            ["import", "--input", str(small_dataset), "--format", "mystery",
             "--out", str(tmp_path / "o.jsonl")],
            capsys,
        )
        assert code == 1
        assert "neither a preset nor a mapping file" in stderr

    def test_mapping_file_format(self, tmp_path, capsys):
        table_dir = tmp_path / "raw"
        table_dir.mkdir()
        t = np.arange(10) * 10.0
        np.savetxt(
            table_dir / "w4_2_B_0.csv",
            np.column_stack([np.linspace(0, 30, 10), np.linspace(0, 40, 10), t]),
            delimiter=",",
        )
        mapping = tmp_path / "mapping.json"
        mapping.write_text(json.dumps({
            "kind": "table",
            "columns": {"x": 0, "y": 1, "t": 2},
            "filename_pattern": r"w(?P<user>\d+)_(?P<session>\d+)_(?P<label>[A-Z])_(?P<repetition>\d+)\.csv$",
            "delimiter": ",",
            "stroke_gap_ms": 60.0,
        }))
        out = tmp_path / "out.jsonl"
        code, stdout, _ = run(
            ["import", "--input", str(table_dir), "--format", str(mapping),
             "--out", str(out)],
            capsys,
        )
        assert code == 0
        assert "imported 1 samples" in stdout


class TestEvalCommand:
    def eval_args(self, dataset, out, extra=()):
        return ["eval", "--dataset", str(dataset), "--scorer", "dtw",
                "--enroll-count", "3", "--report-out", str(out), *extra]

    def test_report_and_manifest(self, small_dataset, tmp_path, capsys):
        out = tmp_path / "report.json"
        code, stdout, _ = run(self.eval_args(small_dataset, out), capsys)
        assert code == 0
        assert "per-character EER" in stdout
        report = json.loads(out.read_text())
        assert sorted(report["per_character"]) == ["0", "1"]
        assert report["config"]["scorer"] == "dtw"
        manifest = json.loads((tmp_path / "report.json.manifest.json").read_text())
        assert manifest["command"] == "eval"
        assert str(small_dataset) in manifest["inputs"]

    def test_rerun_byte_identical(self, small_dataset, tmp_path, capsys):
        a, b = tmp_path / "r1.json", tmp_path / "r2.json"
        run(self.eval_args(small_dataset, a), capsys)
        run(self.eval_args(small_dataset, b), capsys)
        assert sha(a) == sha(b)

    def test_csv_side_output(self, small_dataset, tmp_path, capsys):
        out = tmp_path / "report.json"
        csv_out = tmp_path / "scores.csv"
        code, _, _ = run(
            self.eval_args(small_dataset, out, ["--csv-out", str(csv_out)]), capsys
        )
        assert code == 0
        lines = csv_out.read_text().splitlines()
        assert lines[0] == "character,kind,index,score"
        assert len(lines) > 10

    def test_password_length_truncates(self, small_dataset, tmp_path, capsys):
        out = tmp_path / "short.json"
        code, _, _ = run(
            self.eval_args(small_dataset, out, ["--password-length", "1"]), capsys
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert list(report["per_character"]) == ["0"]

    def test_learned_scorer_requires_checkpoint(self, small_dataset, tmp_path, capsys):
        code, _, stderr = run(
            ["eval", "--dataset", str(small_dataset), "--scorer", "ta_rnn",
             "--report-out", str(tmp_path / "r.json")],
            capsys,
        )
        assert code == 1
        assert "requires --checkpoint" in stderr

    def test_split_eval_subset(self, tmp_path, capsys):
        cfg = SynthConfig(n_users=6, characters=("0",), sessions=2,
                          samples_per_cell=3, inter_user_spread=0.2, points=32, seed=2)
        ds, _ = generate_synthetic(cfg)
        path = tmp_path / "six.jsonl"
        export_dataset(ds, path)
        out = tmp_path / "r.json"
        code, _, _ = run(
            ["eval", "--dataset", str(path), "--enroll-count", "3",
             "--dev-count", "4", "--report-out", str(out)],
            capsys,
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert report["metadata"]["users"] == 2  # only the evaluation block
        assert report["config"]["split"] == "dev_count=4"


class TestTrainCommand:
    def train_args(self, dataset, ckpt, extra=()):
        return ["train", "--dataset", str(dataset), "--scorer", "rnn",
                "--checkpoint-out", str(ckpt),
                "--branch-blocks", "2", "--merge-blocks", "3", "--top-blocks", "4",
                "--epochs", "2", "--patience", "5", "--batch-size", "8",
                "--max-genuine-per-cell", "2", "--dev-count", "3", *extra]

    def test_trains_and_writes_artifacts(self, small_dataset, tmp_path, capsys):
        ckpt = tmp_path / "model.npz"
        code, stdout, _ = run(self.train_args(small_dataset, ckpt), capsys)
        assert code == 0
        assert "epoch 0:" in stdout and "epoch 1:" in stdout
        assert ckpt.exists()
        state = json.loads((tmp_path / "model.npz.train.json").read_text())
        assert state["epochs_completed"] == 2
        manifest = json.loads((tmp_path / "model.npz.manifest.json").read_text())
        assert manifest["config"]["train"]["epochs"] == 2
        assert manifest["config"]["model"]["branch_blocks"] == 2

    def test_zero_lr_leaves_parameters_unchanged(self, small_dataset, tmp_path, capsys):
        frozen = tmp_path / "frozen.npz"
        code, _, _ = run(
            self.train_args(small_dataset, frozen, ["--lr", "0", "--seed", "4"]),
            capsys,
        )
        assert code == 0
        from strokeauth.rnn.model import ModelConfig

        reference = SiameseModel(
            ModelConfig(branch_blocks=2, merge_blocks=3, top_blocks=4, seed=4)
        )
        trained = SiameseModel.load(frozen)
        for (name_a, a), (name_b, b) in zip(
            reference.parameters(), trained.parameters()
        ):
            assert name_a == name_b
            np.testing.assert_array_equal(a, b)

    def test_resume_continues_epoch_numbering(self, small_dataset, tmp_path, capsys):
        first = tmp_path / "stage1.npz"
        code, _, _ = run(self.train_args(small_dataset, first), capsys)
        assert code == 0
        second = tmp_path / "stage2.npz"
        code, stdout, _ = run(
            self.train_args(small_dataset, second, ["--resume", str(first)]), capsys
        )
        assert code == 0
        assert "epoch 2:" in stdout and "epoch 3:" in stdout
        state = json.loads((tmp_path / "stage2.npz.train.json").read_text())
        assert state["epochs_completed"] == 4


class TestDataDirEnv:
    def test_relative_paths_resolve_against_env(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("STROKEAUTH_DATA_DIR", str(tmp_path))
        code, _, _ = run(
            ["synth", "--n-users", "1", "--sessions", "1", "--samples-per-cell", "1",
             "--points", "32", "--seed", "0", "--out", "rel.jsonl"],
            capsys,
        )
        assert code == 0
        assert (tmp_path / "rel.jsonl").exists()
        assert (tmp_path / "rel.jsonl.manifest.json").exists()


class TestVersionFlag:
    def test_version_prints(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        from strokeauth import __version__

        assert __version__ in capsys.readouterr().out
