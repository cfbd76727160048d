import json

import pytest

from conftest import data_path
from overlapix.cli import main
from overlapix.io import dumps
from overlapix.oracle import GenerationConfig, generate

TOY = str(data_path("toy4.json"))


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_report_on_toy(capsys, tmp_path):
    code, out, err = run(capsys, "report", TOY, "--out", str(tmp_path))
    assert code == 0
    bundle = json.loads(out)
    assert bundle["selection"]["studies"] == ["S1", "S4"]
    assert bundle["bound"]["lower_bound_proxy_decimal"] == "5.45"
    assert bundle["naive_pooled_size"] == 14
    assert "below the best overlap-free pooled size" in err
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "bundle.json", "grid.svg", "grid.txt", "heatmap.csv", "heatmap.svg"
    ]
    assert (tmp_path / "bundle.json").read_text() == out


def test_report_is_reproducible_from_bundle(capsys, tmp_path):
    code, first, _ = run(capsys, "report", TOY, "--top-k", "3", "--criterion", "study-count,pooled-size")
    assert code == 0
    path = tmp_path / "bundle.json"
    path.write_text(first)
    code, again, _ = run(capsys, "report", str(path))
    assert code == 0 and again == first
    code, csv_run, _ = run(capsys, "report", str(data_path("toy4.csv")), "--top-k", "3",
                           "--criterion", "study-count,pooled-size")
    assert json.loads(csv_run)["encoding"] == json.loads(first)["encoding"]


def test_thread_invariance(capsys):
    outs = {run(capsys, "report", TOY, "--threads", t)[1] for t in ("1", "4", "8")}
    assert len(outs) == 1


def test_subcommands(capsys, tmp_path):
    code, out, _ = run(capsys, "validate", TOY)
    assert code == 0 and out.startswith("ok: 4 studies")
    code, out, _ = run(capsys, "encode", TOY)
    assert json.loads(out)["encoding"]["coverage"]["S4"] == {"location": "0011", "time": "001"}
    code, out, _ = run(capsys, "pairs", TOY, "--out", str(tmp_path))
    assert json.loads(out)["matrix"][1][2] == "2/3"
    assert (tmp_path / "heatmap.svg").exists() and (tmp_path / "pairs.json").exists()
    code, out, _ = run(capsys, "potentials", TOY, "--min-potential", "1/4", "--max-size", "2")
    assert [i["studies"] for i in json.loads(out)["items"]] == [["S2", "S3"], ["S1", "S2"], ["S1", "S3"], ["S3", "S4"]]
    code, out, _ = run(capsys, "overlap-free", TOY, "--criterion", "max-study-count", "--min-studies", "2")
    assert json.loads(out)["selection"]["studies"] == ["S1", "S4"]
    code, out, _ = run(capsys, "bound", TOY)
    assert json.loads(out)["lower_bound_proxy"] == "109/20"
    code, out, _ = run(capsys, "encode", TOY, "--partition", "width=2")
    assert json.loads(out)["partition"]["time"]["bins"] == [["2021", "2022"], ["2023"]]


def test_potentials_top_k_on_39_studies(capsys, tmp_path):
    synth = generate(GenerationConfig(n_studies=39, collective_size=400, study_size=(5, 40), seed=7))
    from overlapix.io import envelope_file_dict

    path = tmp_path / "s39.json"
    path.write_text(dumps(envelope_file_dict(synth.envelopes, synth.characteristics)))
    code, out, _ = run(capsys, "potentials", str(path), "--top-k", "50", "--out", str(tmp_path))
    data = json.loads(out)
    assert code == 0 and len(data["items"]) == 50 and data["truncated"]
    svg = (tmp_path / "grid.svg").read_text()
    assert svg.count('fill="#3b6fb6"') == 50


def test_exit_codes(capsys, tmp_path, monkeypatch):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema_version": 1,\n "studies": [\n  {"study_id": "A", "sample_size": "x", "ranges": {"k": "a"}}\n]}')
    code, _, err = run(capsys, "validate", str(bad))
    assert code == 1 and "line 3" in err
    code, _, err = run(capsys, "validate", TOY, "--no-such-flag")
    assert code == 1 and "usage:" in err
    code, _, err = run(capsys, "frobnicate")
    assert code == 1
    code, _, err = run(capsys, "overlap-free", TOY, "--criterion", "inverse-variance")
    assert code == 1 and "S1" in err
    empty = tmp_path / "empty.json"
    empty.write_text('{"schema_version": 1, "studies": []}')
    code, _, err = run(capsys, "pairs", str(empty))
    assert code == 1 and "need >= 2 studies" in err
    code, _, _ = run(capsys, "--version")
    assert code == 0


def test_time_budget_exit_code(capsys, tmp_path, monkeypatch):
    # 45 studies in 15 mutually exclusive triples: 3**15 maximal combinations
    # on the quotient graph would be cheap, so give each study its own envelope
    studies = [
        {"study_id": f"S{i}", "sample_size": 1, "ranges": {"g": [f"g{i // 3}", f"s{i}"], "h": [f"h{i // 3}"]}}
        for i in range(45)
    ]
    path = tmp_path / "hard.json"
    path.write_text(json.dumps({"schema_version": 1, "studies": studies}))
    monkeypatch.setenv("OVERLAPIX_TIME_BUDGET_SECS", "0.2")
    code, _, err = run(capsys, "overlap-free", str(path))
    assert code == 3 and "time budget" in err


def test_oracle_commands(capsys, tmp_path):
    code, out, _ = run(capsys, "oracle", "generate", "--n-studies", "5", "--seed", "3", "--out", str(tmp_path))
    assert code == 0 and json.loads(out)["seed"] == 3
    code, out, _ = run(capsys, "oracle", "check", str(tmp_path / "synthesis.json"))
    check = json.loads(out)
    assert code == 0 and check["soundness"]["violations"] == 0
    assert check["inclusion_exclusion"]["identity_holds"]
    code, _, _ = run(capsys, "validate", str(tmp_path / "envelopes.json"))
    assert code == 0
    code, out, _ = run(capsys, "oracle", "sweep", "--count", "20", "--n-studies", "5")
    assert json.loads(out)["instances"] == 20


def test_sweep_violation_is_written(capsys, tmp_path):
    code, _, err = run(capsys, "oracle", "sweep", "--count", "60", "--n-studies", "6",
                       "--collective-size", "40", "--overlap", "0.9", "--distortion", "0.5",
                       "--out", str(tmp_path))
    assert code == 1 and "soundness violation" in err
    replay = json.loads((tmp_path / "violation.json").read_text())
    assert replay["format"] == "overlapix-synthesis"


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "overlapix", "validate", TOY], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("ok:")
