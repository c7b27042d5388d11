import hashlib
import json
from pathlib import Path

import pytest

from graphsense import cli, pipeline
from graphsense import config as cfgmod
from graphsense.errors import InvalidConfig
from graphsense.workspace import STAGES, Workspace

CORPUS = Path(__file__).parent / "fixtures" / "corpus"
MOCK = ["--llm-provider", "mock", "--tokenizer-codec", "whitespace"]


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def indexed(tmp_path_factory):
    ws = tmp_path_factory.mktemp("idx") / "ws"
    assert cli.main(["index", str(CORPUS), "-w", str(ws), *MOCK]) == 0
    return ws


def stage_bytes(ws: Path) -> dict[str, bytes]:
    return {s: (ws / "stages" / f"{s}.jsonl").read_bytes() for s in STAGES}


# -- config -----------------------------------------------------------------


def test_merge_order(tmp_path):
    (tmp_path / cfgmod.CONFIG_FILE).write_text("seed = 1\n[chunking]\nsize = 300\noverlap = 50\n")
    env = {"GRAPHSENSE_CHUNKING_SIZE": "400", "GRAPHSENSE_SEED": "2"}
    c = cfgmod.resolve(tmp_path, overrides={"seed": 3}, environ=env)
    assert (c["chunking.size"], c["chunking.overlap"], c["seed"]) == (400, 50, 3)
    assert cfgmod.resolve(tmp_path, environ={})["chunking.size"] == 300
    assert cfgmod.resolve(None, environ={}) == cfgmod.defaults()


def test_unknown_and_bad_values_rejected(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[chunking]\nsise = 3\n")
    with pytest.raises(InvalidConfig, match="chunking.sise"):
        cfgmod.resolve(config_file=bad, environ={})
    with pytest.raises(InvalidConfig):
        cfgmod.resolve(overrides={"leiden.n_starts": "many"}, environ={})
    with pytest.raises(InvalidConfig):
        cfgmod.resolve(environ={"GRAPHSENSE_LLM_PROVIDER": "carrier-pigeon"})
    with pytest.raises(InvalidConfig):
        cfgmod.resolve(config_file=tmp_path / "missing.toml", environ={})
    assert cfgmod.resolve(environ={"GRAPHSENSE_EXTRACTION_CLAIMS": "yes"})["extraction.claims"] is True


def test_stage_seed():
    digest = hashlib.sha256(b"extraction").digest()
    assert cfgmod.stage_seed(5, "extraction") == (5 + int.from_bytes(digest[:4], "big")) % 2**32
    assert cfgmod.stage_seed(0, "a") != cfgmod.stage_seed(0, "b")
    assert 0 <= cfgmod.stage_seed(2**32 - 1, "hierarchy") < 2**32


def test_every_setting_has_a_flag():
    args = cli.build_parser().parse_args(["inspect", "--leiden-n-starts", "3", "--no-eval-alternate"])
    assert args.leiden__n_starts == 3 and args.eval__alternate is False


# -- index ------------------------------------------------------------------


def test_index_writes_every_stage(indexed):
    ws = Workspace(indexed)
    assert ws.completed() == list(STAGES)
    report = json.loads((indexed / "reports" / "index.json").read_text())
    assert report["counts"]["documents"] == 20 and report["counts"]["nodes"] > 0


def test_empty_corpus_names_chunks_stage(tmp_path, capsys):
    (tmp_path / "corpus").mkdir()
    code, out, err = run(capsys, "index", tmp_path / "corpus", "-w", tmp_path / "ws", *MOCK, "--json")
    assert code != 0 and "chunks" in err
    assert json.loads(out)["stage"] == "chunks"


def test_rerun_is_fully_cached(indexed, capsys):
    before = stage_bytes(indexed)
    code, out, _ = run(capsys, "index", CORPUS, "-w", indexed, *MOCK, "--json")
    assert code == 0
    assert {s["status"] for s in json.loads(out)["stages"]} == {"cached"}
    assert stage_bytes(indexed) == before


def test_config_change_reruns_only_downstream(indexed, tmp_path, capsys):
    ws = tmp_path / "ws"
    for src in (indexed / "stages").iterdir():
        (ws / "stages").mkdir(parents=True, exist_ok=True)
        (ws / "stages" / src.name).write_bytes(src.read_bytes())
    (ws / "manifest.json").write_bytes((indexed / "manifest.json").read_bytes())
    code, out, _ = run(capsys, "index", CORPUS, "-w", ws, *MOCK, "--json", "--communities-summary-tokens", "50")
    assert code == 0
    status = {s["name"]: s["status"] for s in json.loads(out)["stages"]}
    assert status["hierarchy"] == "cached" and status["community_summaries"] == "ran"


def test_crash_then_resume_matches_clean_run(indexed, tmp_path, monkeypatch):
    ws = tmp_path / "ws"
    config = cfgmod.resolve(ws, overrides={"llm.provider": "mock", "tokenizer.codec": "whitespace"}, environ={})

    def boom(self, hierarchy, graph):
        raise KeyboardInterrupt

    with monkeypatch.context() as m:
        m.setattr(pipeline.CommunitySummarizer, "summarize_all", boom)
        with pytest.raises(KeyboardInterrupt):
            pipeline.index_corpus(CORPUS, ws, config)
    assert Workspace(ws).completed() == ["chunks", "extraction", "element_summaries", "graph", "hierarchy"]
    report = pipeline.index_corpus(CORPUS, ws, config)
    assert [s.status for s in report.stages][:5] == ["cached"] * 5
    assert stage_bytes(ws) == stage_bytes(indexed)


# -- query / inspect --------------------------------------------------------


def test_query_default_condition(indexed, capsys):
    code, out, _ = run(capsys, "query", "-w", indexed, *MOCK, "-q", "What are the main themes?")
    assert code == 0 and out.strip()


@pytest.mark.parametrize("cond", ["c1", "ts", "ss"])
def test_query_json_ledger(indexed, capsys, cond):
    code, out, _ = run(capsys, "query", "-w", indexed, *MOCK, "-q", "Which organizations recur?", "--condition", cond, "--json")
    data = json.loads(out)
    assert code == 0 and data["ok"] and data["condition"] == cond
    assert data["ledger"]["context_tokens_consumed"] > 0


def test_query_unknown_condition_is_usage_error(indexed, capsys):
    code, _, err = run(capsys, "query", "-w", indexed, *MOCK, "-q", "x?", "--condition", "c9")
    assert code == 1 and "c9" in err


def test_query_without_index(tmp_path, capsys):
    code, _, _ = run(capsys, "query", "-w", tmp_path / "nothing", *MOCK, "-q", "x?")
    assert code == 1


def test_inspect(indexed, capsys):
    code, out, _ = run(capsys, "inspect", "-w", indexed, *MOCK, "--json")
    data = json.loads(out)
    assert code == 0 and all(data["stages"].values())
    assert [r["condition"] for r in data["levels"]] == ["c0", "c1", "c2", "c3", "ts"]
    code, out, _ = run(capsys, "inspect", "-w", indexed, *MOCK, "--level", "1")
    assert code == 0 and len(out.strip().splitlines()) >= 1
    code, out, _ = run(capsys, "inspect", "-w", indexed, *MOCK)
    assert "Tokens" in out


# -- questions / eval -------------------------------------------------------


def test_questions_then_eval(indexed, tmp_path, capsys):
    qfile = tmp_path / "q.jsonl"
    code, out, _ = run(capsys, "questions", "-w", indexed, *MOCK, "--description", "Local news", "-n", "1", "--out", qfile, "--json")
    assert code == 0 and json.loads(out)["count"] == 1
    assert len(pipeline.load_questions(qfile)) == 1
    code, out, _ = run(capsys, "eval", "-w", indexed, *MOCK, "--questions", qfile, "--conditions", "c0,ts",
                       "--metrics", "directness", "--trials", "3", "--json")
    m = json.loads(out)["matrices"]["directness"]["win_rates"]
    assert code == 0 and m["c0"]["c0"] == 0.5
    assert m["c0"]["ts"] + m["ts"]["c0"] == pytest.approx(1.0)
    assert (indexed / "reports" / "winrates.txt").exists()


def test_eval_rejects_unknown_condition(indexed, tmp_path, capsys):
    qfile = tmp_path / "q.jsonl"
    qfile.write_text('"What?"\n')
    code, _, _ = run(capsys, "eval", "-w", indexed, *MOCK, "--questions", qfile, "--conditions", "c0,zz")
    assert code == 1
