import json

import pytest

from orderpipe.cli import RunConfig, main, resolve_config

from conftest import WORKED_EXAMPLE_OUTPUT
from fake_llm import FakeLLM


def read(path):
    return json.loads(path.read_text(encoding="utf-8"))


@pytest.fixture
def example_file(data_dir):
    return str(data_dir / "worked_example.json")


def test_extract_scripted(tmp_path, example_file, capsys):
    script = tmp_path / "script.json"
    script.write_text(json.dumps([WORKED_EXAMPLE_OUTPUT]))
    out = tmp_path / "pred.json"
    code = main(["extract", "--input", example_file, "--output", str(out), "--backend", "scripted",
                 "--script", str(script)])
    assert code == 0
    preds = read(out)
    assert len(preds) == 1 and preds[0]["encounter_id"] == "worked-example" and preds[0]["strategy"] == "oneshot"
    assert [o["description"] for o in preds[0]["orders"]] == ["lasix 40 milligrams a day", "hemoglobin a1c"]
    assert preds[0]["diagnostics"]["calls"] == 1
    assert "2 orders" in capsys.readouterr().out


def test_extract_empty_dataset(tmp_path):
    (tmp_path / "data").mkdir()
    out = tmp_path / "pred.json"
    assert main(["extract", "--input", str(tmp_path / "data"), "--output", str(out), "--backend", "scripted",
                 "--script", str(tmp_path / "s.json")]) == 1  # script missing: config error
    (tmp_path / "s.json").write_text("[]")
    assert main(["extract", "--input", str(tmp_path / "data"), "--output", str(out), "--backend", "scripted",
                 "--script", str(tmp_path / "s.json")]) == 0
    assert read(out) == []


def test_extract_unreachable_http(tmp_path, example_file, capsys):
    out = tmp_path / "pred.json"
    code = main(["extract", "--input", example_file, "--output", str(out), "--backend", "http",
                 "--base-url", "http://127.0.0.1:9/v1", "--max-attempts", "2", "--backoff", "0"])
    assert code == 1
    assert "TransportError" in capsys.readouterr().err
    assert read(out) == [] and "worked-example" in read(tmp_path / "pred.json.failed.json")


def test_partial_failure(tmp_path, data_dir):
    script = tmp_path / "script.json"
    script.write_text(json.dumps({"enc-a": ["[]"], "enc-b": ["[]"]}))  # enc-c has no script
    out = tmp_path / "pred.json"
    code = main(["extract", "--input", str(data_dir / "corpus3.json"), "--output", str(out),
                 "--backend", "scripted", "--script", str(script)])
    assert code == 2
    assert [p["encounter_id"] for p in read(out)] == ["enc-a", "enc-b"]
    assert list(read(tmp_path / "pred.json.failed.json")) == ["enc-c"]
    strict = main(["extract", "--input", str(data_dir / "corpus3.json"), "--output", str(out),
                   "--backend", "scripted", "--script", str(script), "--strict", "--concurrency", "1"])
    assert strict == 1


def test_record_and_replay(tmp_path, data_dir):
    fixtures = tmp_path / "fx"
    rec_out, rep_out = tmp_path / "rec.json", tmp_path / "rep.json"
    with FakeLLM() as llm:
        assert main(["record", "--input", str(data_dir / "corpus3.json"), "--output", str(rec_out),
                     "--base-url", llm.base_url, "--fixtures", str(fixtures)]) == 0
        assert len(llm.requests) == 3
    assert len(list(fixtures.glob("*.json"))) == 3
    assert main(["extract", "--input", str(data_dir / "corpus3.json"), "--output", str(rep_out),
                 "--backend", "replay", "--fixtures", str(fixtures)]) == 0
    assert rec_out.read_bytes() == rep_out.read_bytes()
    preds = {p["encounter_id"]: p["orders"] for p in read(rep_out)}
    assert [o["provenance"] for o in preds["enc-a"]] == [[0], [2]]


def test_record_unwritable(tmp_path, example_file):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code = main(["record", "--input", example_file, "--output", str(tmp_path / "p.json"),
                 "--fixtures", str(blocker / "fx")])
    assert code == 1


def test_replay_miss_is_failure(tmp_path, example_file):
    (tmp_path / "fx").mkdir()
    code = main(["extract", "--input", example_file, "--output", str(tmp_path / "p.json"),
                 "--backend", "replay", "--fixtures", str(tmp_path / "fx")])
    assert code == 1
    assert "ReplayMiss" in read(tmp_path / "p.json.failed.json")["worked-example"]


def test_evaluate_gold_vs_gold(tmp_path, data_dir, capsys):
    gold = str(data_dir / "corpus3.json")
    report = tmp_path / "r.json"
    assert main(["evaluate", "--input", gold, "--gold", gold, "--output", str(report)]) == 0
    doc = read(report)
    for key in ("description_rouge1", "reason_rouge1", "ordertype_strict_f1", "provenance_multilabel_f1", "average_score"):
        assert doc[key] == 1.0
    assert doc["columns"]["Avg. Score"] == 1.0
    assert "1.000 | 1.000 | 1.000 | 1.000 | 1.000" in capsys.readouterr().out


def test_evaluate_empty_predictions(tmp_path, example_file):
    pred = tmp_path / "p.json"
    pred.write_text(json.dumps([{"encounter_id": "worked-example", "orders": []}]))
    report = tmp_path / "r.json"
    assert main(["evaluate", "--input", str(pred), "--gold", example_file, "--output", str(report)]) == 0
    doc = read(report)
    assert doc["description_rouge1"] == doc["reason_rouge1"] == doc["provenance_multilabel_f1"] == 0.0
    assert doc["ordertype_strict_f1"] == 0.0


def test_evaluate_missing_provenance(tmp_path, example_record, example_file):
    orders = example_record["expected_orders"]
    orders[0]["provenance"] = [126]
    pred = tmp_path / "p.json"
    pred.write_text(json.dumps([{"encounter_id": "worked-example", "orders": orders}]))
    report = tmp_path / "r.json"
    assert main(["evaluate", "--input", str(pred), "--gold", example_file, "--output", str(report)]) == 0
    enc = read(report)["per_encounter"][0]
    # ({126} vs {126, 127}) = 2/3 on one order, 1 on the other, averaged over 2 slots
    assert enc["provenance_f1"] == pytest.approx((2 / 3 + 1) / 2)
    assert enc["description_rouge1"] == 1.0


def test_evaluate_unknown_ids(tmp_path, example_file, capsys):
    pred = tmp_path / "p.json"
    pred.write_text(json.dumps([{"encounter_id": "ghost", "orders": []}]))
    assert main(["evaluate", "--input", str(pred), "--gold", example_file, "--output", str(tmp_path / "r.json")]) == 1
    assert "IdMismatch" in capsys.readouterr().err


def test_report_command(tmp_path, data_dir, capsys):
    gold = str(data_dir / "corpus3.json")
    report = tmp_path / "oneshot.json"
    main(["evaluate", "--input", gold, "--gold", gold, "--output", str(report)])
    capsys.readouterr()
    assert main(["report", str(report)]) == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert "Description (Rouge1_F1)" in lines[0] and lines[1].startswith("corpus3 | 1.000")


def test_config_precedence(tmp_path):
    cfg_file = tmp_path / "run.json"
    cfg_file.write_text(json.dumps({"model": "from-file", "concurrency": 2, "strategy": "react"}))
    env = {"ORDERPIPE_MODEL": "from-env", "ORDERPIPE_STRICT": "true"}
    cfg = resolve_config({"config": str(cfg_file), "strategy": "agentic"}, env)
    assert (cfg.model, cfg.concurrency, cfg.strategy, cfg.strict) == ("from-env", 2, "agentic", True)
    assert resolve_config({}, {}) == RunConfig()


def test_config_errors(tmp_path, example_file):
    bad = tmp_path / "run.json"
    bad.write_text(json.dumps({"nonsense": 1}))
    assert main(["extract", "--config", str(bad), "--input", example_file, "--output", "x"]) == 1
    assert main(["extract", "--input", example_file, "--output", str(tmp_path / "p"), "--concurrency", "0"]) == 1
