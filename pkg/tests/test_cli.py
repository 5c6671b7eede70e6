import json

import pytest

from fewshot.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def fixtures(tmp_path, capsys):
    train = tmp_path / "train.jsonl"
    test = tmp_path / "test.jsonl"
    code, _, _ = _run(
        capsys, "synth", "--classes", "3", "--per-class", "6", "--dimension", "8",
        "--separation", "8", "--seed", "1", "--out", str(train),
    )
    assert code == 0
    code, _, _ = _run(
        capsys, "synth", "--classes", "3", "--per-class", "8", "--dimension", "8",
        "--separation", "8", "--seed", "2", "--out", str(test),
    )
    assert code == 0
    return train, test


def _report_payload(path, drop_timestamp=True):
    payload = json.loads(path.read_text())
    if drop_timestamp:
        payload.pop("created_at")
    return payload


class TestSynth:
    def test_writes_loadable_dataset(self, fixtures):
        train, _ = fixtures
        assert len(train.read_text().splitlines()) == 18

    def test_bad_parameters_exit_2(self, tmp_path, capsys):
        code, _, err = _run(
            capsys, "synth", "--classes", "9", "--per-class", "2", "--dimension", "4",
            "--separation", "1", "--out", str(tmp_path / "x.jsonl"),
        )
        assert code == 2
        assert "dimension" in err


class TestEvaluate:
    def test_end_to_end_report(self, fixtures, tmp_path, capsys):
        train, test = fixtures
        out = tmp_path / "report.json"
        code, stdout, _ = _run(
            capsys, "evaluate", "--train", str(train), "--test", str(test),
            "--method", "ptsnn", "--k", "2", "--m-runs", "3", "--out", str(out),
        )
        assert code == 0
        assert "fscore" in stdout
        payload = _report_payload(out, drop_timestamp=False)
        assert payload["schema"] == "fewshot-report/1"
        assert "created_at" in payload
        assert len(payload["per_run"]) == 3
        assert payload["config"]["seeds"] == [0, 1, 2]

    def test_identical_runs_byte_identical_minus_timestamp(self, fixtures, tmp_path, capsys):
        train, test = fixtures
        out_a, out_b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (out_a, out_b):
            code, _, _ = _run(
                capsys, "evaluate", "--train", str(train), "--test", str(test),
                "--method", "ptsnn", "--k", "2", "--m-runs", "2", "--out", str(out),
            )
            assert code == 0
        a = json.loads(out_a.read_text())
        b = json.loads(out_b.read_text())
        a.pop("created_at")
        b.pop("created_at")
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    def test_k_too_large_exit_3_names_class(self, fixtures, tmp_path, capsys):
        train, test = fixtures
        out = tmp_path / "report.json"
        code, _, err = _run(
            capsys, "evaluate", "--train", str(train), "--test", str(test),
            "--method", "ptsnn", "--k", "7", "--m-runs", "1", "--out", str(out),
        )
        assert code == 3
        assert "C0" in err
        assert not out.exists()  # no partial output

    def test_malformed_dataset_exit_3(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("not json\n")
        code, _, err = _run(
            capsys, "evaluate", "--train", str(bad), "--test", str(bad),
            "--method", "ptsnn", "--k", "1", "--m-runs", "1",
            "--out", str(tmp_path / "r.json"),
        )
        assert code == 3
        assert ":1" in err

    def test_missing_required_setting_exit_2(self, fixtures, capsys):
        train, test = fixtures
        code, _, err = _run(
            capsys, "evaluate", "--train", str(train), "--test", str(test),
            "--method", "ptsnn",
        )
        assert code == 2
        assert "out" in err

    def test_config_file_with_flag_override(self, fixtures, tmp_path, capsys):
        train, test = fixtures
        config = tmp_path / "run.conf"
        config.write_text(
            f"train = {train}\n"
            f"test = {test}\n"
            "method = ptsnn\n"
            "k = 2\n"
            "m-runs = 1   # overridden by the flag below\n"
            f"out = {tmp_path / 'from_config.json'}\n"
        )
        code, _, _ = _run(capsys, "evaluate", "--config", str(config), "--m-runs", "3")
        assert code == 0
        payload = _report_payload(tmp_path / "from_config.json")
        assert payload["config"]["m_runs"] == 3

    def test_unknown_config_key_exit_2(self, tmp_path, capsys):
        config = tmp_path / "run.conf"
        config.write_text("bogus = 1\n")
        code, _, err = _run(capsys, "evaluate", "--config", str(config))
        assert code == 2
        assert "bogus" in err

    def test_soesnn_and_probe_methods_run(self, fixtures, tmp_path, capsys):
        train, test = fixtures
        for method, extra in (("soesnn", ["--epochs", "10", "--hidden-size", "4"]),
                              ("probe", ["--epochs", "10"])):
            out = tmp_path / f"{method}.json"
            code, _, _ = _run(
                capsys, "evaluate", "--train", str(train), "--test", str(test),
                "--method", method, "--k", "2", "--m-runs", "1", "--out", str(out), *extra,
            )
            assert code == 0
            assert out.exists()


class TestTTest:
    def _write_report(self, path, triple):
        payload = {
            "averaged": {"precision": triple[0], "recall": triple[1], "fscore": triple[2]},
        }
        path.write_text(json.dumps(payload))

    def test_published_sixteen_shot_comparison(self, tmp_path, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        self._write_report(a, (0.71, 0.55, 0.60))
        self._write_report(b, (0.39, 0.37, 0.27))
        code, out, _ = _run(capsys, "ttest", str(a), str(b))
        assert code == 0
        assert "p = 0.0293" in out

    def test_swapped_arguments_negate_t(self, tmp_path, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        self._write_report(a, (0.71, 0.55, 0.60))
        self._write_report(b, (0.39, 0.37, 0.27))
        _, out_ab, _ = _run(capsys, "ttest", str(a), str(b))
        _, out_ba, _ = _run(capsys, "ttest", str(b), str(a))
        t_ab = float(out_ab.splitlines()[1].split("=")[1])
        t_ba = float(out_ba.splitlines()[1].split("=")[1])
        assert t_ab == pytest.approx(-t_ba)
        assert out_ab.splitlines()[2] == out_ba.splitlines()[2]  # same p line

    def test_report_against_itself_exit_5(self, tmp_path, capsys):
        a = tmp_path / "a.json"
        self._write_report(a, (0.5, 0.4, 0.3))
        code, _, err = _run(capsys, "ttest", str(a), str(a))
        assert code == 5
        assert "variance" in err

    def test_malformed_report_exit_3(self, tmp_path, capsys):
        a = tmp_path / "a.json"
        a.write_text("{}")
        b = tmp_path / "b.json"
        self._write_report(b, (0.5, 0.4, 0.3))
        code, _, _ = _run(capsys, "ttest", str(a), str(b))
        assert code == 3


class TestOtherCommands:
    def test_pairs(self, fixtures, tmp_path, capsys):
        train, _ = fixtures
        out = tmp_path / "pairs.jsonl"
        code, stdout, _ = _run(capsys, "pairs", "--train", str(train), "--out", str(out))
        assert code == 0
        assert "153 pairs" in stdout  # C(18, 2)
        assert len(out.read_text().splitlines()) == 153

    def test_train_soe_writes_model(self, fixtures, tmp_path, capsys):
        train, _ = fixtures
        out = tmp_path / "model.json"
        code, stdout, _ = _run(
            capsys, "train-soe", "--train", str(train), "--epochs", "5",
            "--hidden-size", "4", "--out", str(out),
        )
        assert code == 0
        assert "loss" in stdout
        payload = json.loads(out.read_text())
        assert payload["kind"] == "soe-pair-model"

    def test_report_pretty_print(self, fixtures, tmp_path, capsys):
        train, test = fixtures
        out = tmp_path / "report.json"
        _run(
            capsys, "evaluate", "--train", str(train), "--test", str(test),
            "--method", "ptsnn", "--k", "2", "--m-runs", "2", "--out", str(out),
        )
        code, stdout, _ = _run(capsys, "report", str(out))
        assert code == 0
        assert "avg" in stdout
        code, verbose, _ = _run(capsys, "report", str(out), "--verbose")
        assert code == 0
        assert "per-class" in verbose

    def test_bad_flag_exits_2(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["evaluate", "--method", "bogus"])
        assert excinfo.value.code == 2
