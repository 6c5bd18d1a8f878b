import json

import pytest

from mmsarc.annotate import Task, fleiss_kappa, matching_percent, read_judgments
from mmsarc.cli import dispatch
from mmsarc.evaluation import Report

from pipeline import ORDER, output_digests, run_pipeline


@pytest.fixture(scope="module")
def twice(tmp_path_factory):
    a = tmp_path_factory.mktemp("run_a")
    b = tmp_path_factory.mktemp("run_b")
    return (a, run_pipeline(a)), (b, run_pipeline(b))


def test_every_verb_succeeds(twice):
    (_, codes), _ = twice
    assert codes == {v: 0 for v in ORDER}


@pytest.mark.parametrize("verb", ORDER)
def test_outputs_bit_identical_across_runs(twice, verb):
    (a, _), (b, _) = twice
    da, db = output_digests(a / "out" / verb), output_digests(b / "out" / verb)
    assert "manifest.json" in da
    assert da == db


def test_manifest_contents(twice):
    (a, _), _ = twice
    m = json.loads((a / "out" / "train-svm" / "manifest.json").read_text())
    assert m["verb"] == "train-svm" and m["tool"] == "mmsarc"
    assert {"model.svm", "vocab.txt"} <= set(m["outputs"])
    assert set(m["inputs"]) >= {"corpus", "concepts"}
    timings = json.loads((a / "out" / "train-svm" / "timings.json").read_text())
    assert timings["kernel_backend"] in ("cython", "python")


def test_ingest_matches_fixture(twice):
    (a, _), _ = twice
    got = (a / "out" / "ingest" / "verdicts.tsv").read_text()
    assert got == (a / "fixtures" / "filter_expected.tsv").read_text()


def test_net_topology_reported(twice):
    (a, _), _ = twice
    meta = json.loads((a / "out" / "train-net" / "model.json").read_text())
    topo = meta["topology"]
    assert topo["concatenation"] == topo["text_hidden"] + topo["image_input"]


def test_seed_changes_output(tmp_path, twice):
    (a, _), _ = twice
    cfg = a / "fixtures" / "configs" / "synth.json"
    assert dispatch(["synth", "--config", str(cfg), "--seed", "12", "--out", str(tmp_path / "s")]) == 0
    assert output_digests(tmp_path / "s")["corpus.jsonl"] != output_digests(a / "out" / "synth")["corpus.jsonl"]


def test_usage_error_exit_2(capsys):
    assert dispatch(["no-such-verb"]) == 2
    assert dispatch(["stats", "--set", "novalue"]) == 2


def test_runtime_error_exit_1(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"corpus": "missing.jsonl"}))
    assert dispatch(["stats", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert capsys.readouterr().err.startswith("error: FileNotFoundError")


def test_override_applies(tmp_path, twice):
    (a, _), _ = twice
    cfg = a / "fixtures" / "configs" / "ingest.json"
    out = tmp_path / "o"
    assert dispatch(["ingest", "--config", str(cfg), "--set", "filter.min_regular_words=0", "--out", str(out)]) == 0
    assert "reject:too_few_words" not in (out / "verdicts.tsv").read_text()


def test_fusion_cell_beats_text_cell(twice):
    (a, _), _ = twice
    rep = Report.from_kv((a / "out" / "evaluate" / "report.kv").read_text())
    assert rep.cells["ngrams+vsf", "IG"] > rep.cells["ngrams", "IG"]
    assert rep.cells["combination+vsf", "IG"] > rep.cells["combination", "IG"]


def test_agreement_values_match_library(twice):
    (a, _), _ = twice
    got = json.loads((a / "out" / "agreement" / "agreement.json").read_text())
    sets = read_judgments(a / "fixtures" / "judgments_ig.jsonl")
    t1 = [j for j in sets if j.task is Task.TEXT_ONLY]
    assert got["text_only"]["IG"]["fleiss_kappa"] == fleiss_kappa(t1)
    assert got["text_only"]["IG"]["matching_percent"] == matching_percent(t1)
    assert "kappa" in (a / "out" / "agreement" / "agreement.txt").read_text()
