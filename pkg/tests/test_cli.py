import csv
import hashlib
import json
import subprocess
import sys

import pytest

from colliderlab.cli import main


@pytest.fixture
def humans(fixtures_dir):
    return str(fixtures_dir / "human_synthetic.csv")


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_tasks_list(capsys):
    assert main(["tasks", "list"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 12
    assert lines[1].split()[0] == "I" and lines[-1].split()[0] == "XI"
    assert "p(C1=1 | C2=0, E=0)" in lines[-1]


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "colliderlab", "tasks", "list"], capture_output=True, text=True)
    assert out.returncode == 0 and "VIII" in out.stdout


def test_prompts_generate_and_manifest(tmp_path):
    assert main(["prompts", "generate", "--domains", "sociology", "--codes", "1", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "prompts.jsonl").read_text().splitlines()
    assert len(lines) == 11
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seed"] == 0 and manifest["config"]["codes"] == "1"
    digest = hashlib.sha256((tmp_path / "prompts.jsonl").read_bytes()).hexdigest()
    assert manifest["outputs"] == {"prompts.jsonl": digest}
    assert "timestamp" not in json.dumps(manifest)


def test_prompts_from_vocabulary_file(tmp_path, fixtures_dir):
    from colliderlab.prompts import load_vocabulary
    vocab = tmp_path / "v.json"
    vocab.write_text(json.dumps(load_vocabulary("weather").to_dict()))
    assert main(["prompts", "generate", "--vocab", str(vocab), "--out", str(tmp_path / "o")]) == 0
    assert len((tmp_path / "o" / "prompts.jsonl").read_text().splitlines()) == 44


def test_query_mock_writes_store(tmp_path):
    main(["prompts", "generate", "--domains", "economy", "--tasks", "I,II", "--codes", "1", "--out",
          str(tmp_path / "p")])
    args = ["query", "run", "--prompts", str(tmp_path / "p" / "prompts.jsonl"), "--model", "m",
            "--store", str(tmp_path / "store"), "--out", str(tmp_path / "q")]
    assert main(args + ["--transport", "mock", "--mock-constant", "61"]) == 0
    rows = read_csv(tmp_path / "q" / "judgments.csv")
    assert [float(r["response"]) for r in rows] == [61.0, 61.0]
    assert len(list((tmp_path / "store").glob("*.json"))) == 2
    assert main(args + ["--transport", "replay"]) == 0
    assert read_csv(tmp_path / "q" / "judgments.csv") == rows


def test_query_reports_parse_errors(tmp_path, capsys):
    main(["prompts", "generate", "--domains", "economy", "--tasks", "I", "--codes", "1", "--out",
          str(tmp_path / "p")])
    assert main(["query", "run", "--prompts", str(tmp_path / "p" / "prompts.jsonl"), "--model", "m",
                 "--transport", "mock", "--mock-constant", "maybe 30", "--out", str(tmp_path / "q")]) == 0
    report = json.loads((tmp_path / "q" / "run_report.json").read_text())
    assert report["n_errors"] == 1 and report["n_records"] == 0
    assert "0 judgments, 1 errors" in capsys.readouterr().out


def test_replay_without_store_is_input_error(tmp_path):
    main(["prompts", "generate", "--domains", "economy", "--tasks", "I", "--codes", "1", "--out",
          str(tmp_path / "p")])
    code = main(["query", "run", "--prompts", str(tmp_path / "p" / "prompts.jsonl"), "--model", "m",
                 "--transport", "replay", "--store", str(tmp_path / "missing"), "--out", str(tmp_path / "q")])
    assert code == 1 and not (tmp_path / "q").exists()


def test_fit_summary_layout(tmp_path, humans):
    assert main(["fit", "cbn", "--judgments", humans, "--tying", "3p,4p", "--unit", "agent",
                 "--out", str(tmp_path)]) == 0
    summary = read_csv(tmp_path / "summary.csv")
    assert list(summary[0]) == ["Agent", "NP", "w_C", "w_{C,E}", "w_{C1,E}", "w_{C2,E}", "w_E", "R", "AIC",
                                "Loss", "n_fits", "winner"]
    assert [r["NP"] for r in summary] == ["3", "4"]
    assert summary[0]["winner"] == "*" and summary[0]["w_C"] == "0.528"
    assert len(read_csv(tmp_path / "fits.csv")) == 24


def test_fit_condition_units(tmp_path, humans):
    assert main(["fit", "cbn", "--judgments", humans, "--unit", "condition", "--out", str(tmp_path)]) == 0
    units = {r["unit"] for r in read_csv(tmp_path / "fits.csv")}
    assert len(units) == 12 and "economy/1" in units


def test_bad_input_exit_codes(tmp_path, humans, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("agent_id,agent_type,model_name,domain,counterbalance,task_id,response,temperature\n"
                   "h1,human,,sociology,1,XII,50,\n")
    assert main(["fit", "cbn", "--judgments", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "line 2" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()
    assert main(["fit", "cbn", "--judgments", humans, "--tying", "7p", "--out", str(tmp_path / "o")]) == 1
    assert main(["analyze", "correlate", "--judgments", humans, "--reference", "Nobody",
                 "--out", str(tmp_path / "o")]) == 1
    assert main(["prompts", "generate", "--domains", "astrology", "--out", str(tmp_path / "o")]) == 1
    with pytest.raises(SystemExit):
        main(["fit", "cbn", "--generating", "probit", "--judgments", humans, "--out", str(tmp_path)])


def test_failed_run_leaves_previous_outputs(tmp_path, humans, monkeypatch):
    out = tmp_path / "o"
    assert main(["report", "figure-data", "--judgments", humans, "--bootstrap", "200", "--out", str(out)]) == 0
    before = {p.name: p.read_bytes() for p in out.iterdir()}

    import colliderlab.cli as cli

    def explode(*a, **k):
        raise OSError("disk full")

    monkeypatch.setattr(cli, "aggregate", explode)
    assert main(["report", "figure-data", "--judgments", humans, "--out", str(out)]) == 2
    assert {p.name: p.read_bytes() for p in out.iterdir()} == before
    assert not list(tmp_path.glob(".colliderlab-*"))


def test_figure_data_groups(tmp_path, humans):
    assert main(["report", "figure-data", "--judgments", humans, "--bootstrap", "200", "--seed", "3",
                 "--out", str(tmp_path)]) == 0
    sizes = {p.name: len(read_csv(p)) for p in tmp_path.glob("*.csv")}
    assert sizes == {"predictive.csv": 3, "independence.csv": 2, "diagnostic_effect_present.csv": 3,
                     "diagnostic_effect_absent.csv": 3}
    row = read_csv(tmp_path / "predictive.csv")[0]
    assert row["task_id"] == "I" and row["Human n"] == "12"
    assert float(row["Human ci_low"]) <= float(row["Human mean"]) <= float(row["Human ci_high"])
    assert json.loads((tmp_path / "manifest.json").read_text())["seed"] == 3
