import json
from pathlib import Path

import pytest

from scpos.cli import main
from scpos.client import InferenceClient, profile
from scpos.codec import Mode
from scpos.corpus import SchemaId, read_corpus
from scpos.prompting import build_prompt, default_template
from stubserver import StubEndpoint, gold_answer_fn

FIXTURES = Path(__file__).parent / "fixtures" / "replay"


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def noun_tsv(tmp_path):
    return write_lines(
        tmp_path / "nouns.tsv",
        [
            "景色\tnoun\tpositive",
            "天気\tnoun\tneutral",
            "渋滞\tnoun\tnegative",
            "部屋\tnoun\tpositive",
            "騒音\tnoun\tnegative",
        ],
    )


@pytest.fixture
def va_tsv(tmp_path):
    return write_lines(
        tmp_path / "va.tsv",
        [
            "良い\tadjective\tpositive",
            "退屈\tadjective\tnegative",
            "壊れる\tverb\tnegative",
            "楽しい\tadjective\tpositive",
            "渋滞\tverb\tnegative",  # collides with the noun file
        ],
    )


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["--version"])
    assert excinfo.value.code == 0
    assert "scpos" in capsys.readouterr().out


def test_lexicon_validate_ok(noun_tsv, capsys):
    assert main(["lexicon", "validate", "--path", str(noun_tsv)]) == 0
    assert "5 entries, 0 rejected" in capsys.readouterr().out


def test_lexicon_validate_strict_fails_on_rejection(tmp_path, capsys):
    path = write_lines(tmp_path / "l.tsv", ["良い\tadjective\tpositive", "broken line"])
    assert main(["lexicon", "validate", "--path", str(path)]) == 0
    assert main(["lexicon", "validate", "--path", str(path), "--strict"]) == 1


def test_lexicon_validate_missing_file_is_io_error(tmp_path, capsys):
    missing = tmp_path / "nothing.tsv"
    assert main(["lexicon", "validate", "--path", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_merge_reports_collision_count(noun_tsv, va_tsv, tmp_path, capsys):
    out = tmp_path / "merged.tsv"
    code = main(
        ["lexicon", "merge", "--path", str(noun_tsv), "--path", str(va_tsv),
         "--out", str(out), "--policy", "prefer_va"]
    )
    assert code == 0
    stdout = capsys.readouterr().out
    assert "merged lexicon: 9 entries" in stdout
    assert "渋滞" in stdout
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 9
    assert "渋滞\tverb\tnegative" in lines


def test_merge_policy_error_exits_nonzero(noun_tsv, va_tsv, tmp_path, capsys):
    code = main(
        ["lexicon", "merge", "--path", str(noun_tsv), "--path", str(va_tsv),
         "--out", str(tmp_path / "m.tsv"), "--policy", "error"]
    )
    assert code == 1
    assert "渋滞" in capsys.readouterr().err


SOURCE_DOCS = [
    ("景色が最高でした", "positive"),
    ("天気は普通", "positive"),
    ("渋滞がひどい", "negative"),
    ("部屋から見える景色", "positive"),
    ("騒音と渋滞", "negative"),
    ("まったく関係ない話", "negative"),
    ("景色景色", "positive"),
    ("天気と天気", "negative"),
    ("静かな部屋", "positive"),
    ("騒音", "negative"),
]
# Hand-annotated noun hits: 1+1+1+2+2+0+2+2+1+1 = 13 pairs,
# positive 6 (景色 x4, 部屋 x2), neutral 3 (天気 x3), negative 4 (渋滞 x2, 騒音 x2).


@pytest.fixture
def source_jsonl(tmp_path):
    path = tmp_path / "source.jsonl"
    with open(path, "w", encoding="utf-8") as handle:
        for text, label in SOURCE_DOCS:
            handle.write(json.dumps({"text": text, "label": label}, ensure_ascii=False) + "\n")
    return path


def test_build_n_schema_histogram(noun_tsv, source_jsonl, tmp_path, capsys):
    out = tmp_path / "n.jsonl"
    code = main(
        ["build", "--schema", "N", "--source", str(source_jsonl),
         "--lexicon", str(noun_tsv), "--out", str(out), "--seed", "1"]
    )
    assert code == 0
    stdout = capsys.readouterr().out
    assert "wrote 10 N records (13 pairs)" in stdout
    assert "word labels: negative=4 neutral=3 positive=6" in stdout

    records = read_corpus(out)
    assert len(records) == 10
    assert sum(len(r.pairs) for r in records) == 13


def test_build_va_histogram_has_no_neutral(va_tsv, source_jsonl, tmp_path, capsys):
    out = tmp_path / "va.jsonl"
    code = main(
        ["build", "--schema", "VA", "--source", str(source_jsonl),
         "--lexicon", str(va_tsv), "--out", str(out), "--seed", "1"]
    )
    assert code == 0
    assert "neutral" not in capsys.readouterr().out
    assert all(
        pair.polarity in ("positive", "negative")
        for record in read_corpus(out)
        for pair in record.pairs
    )


def test_build_reruns_byte_identical(noun_tsv, source_jsonl, tmp_path):
    first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for out in (first, second):
        assert main(
            ["build", "--schema", "N", "--source", str(source_jsonl),
             "--lexicon", str(noun_tsv), "--out", str(out), "--seed", "7", "--limit", "6"]
        ) == 0
    assert first.read_bytes() == second.read_bytes()


def test_build_merges_lexicons_for_nva(noun_tsv, va_tsv, source_jsonl, tmp_path):
    out = tmp_path / "nva.jsonl"
    code = main(
        ["build", "--schema", "NVA", "--source", str(source_jsonl),
         "--lexicon", str(noun_tsv), "--lexicon", str(va_tsv),
         "--out", str(out), "--seed", "1"]
    )
    assert code == 0
    assert all(record.schema is SchemaId.NVA for record in read_corpus(out))


def test_eval_missing_gold_exits_2(tmp_path, capsys):
    missing = tmp_path / "gone.jsonl"
    code = main(["eval", "--gold", str(missing), "--endpoint", "http://localhost:1/x"])
    assert code == 2
    assert str(missing) in capsys.readouterr().err


def test_eval_with_stub_and_three_runs(tmp_path, capsys):
    gold = read_corpus(FIXTURES / "gold.jsonl")[:6]
    gold_path = tmp_path / "gold.jsonl"
    with open(gold_path, "w", encoding="utf-8") as handle:
        for record in gold:
            handle.write(json.dumps(record.to_json_dict(), ensure_ascii=False) + "\n")
    outdir = tmp_path / "report"
    with StubEndpoint(answer_fn=gold_answer_fn(gold, Mode.SCPOS)) as stub:
        code = main(
            ["eval", "--gold", str(gold_path), "--mode", "scpos", "--runs", "3",
             "--endpoint", stub.url, "--out", str(outdir), "--no-figure", "--seed", "0"]
        )
    assert code == 0
    payload = json.loads((outdir / "report.json").read_text(encoding="utf-8"))
    assert payload["acc_sc"] == 1.0
    assert payload["acc_pos"] == 1.0
    assert payload["acc_scpos"] == 1.0
    rows = [r for r in payload["per_run"]]
    assert rows[0] == rows[1] == rows[2]
    assert payload["config"]["runs"] == 3
    assert payload["config"]["version"]
    table = (outdir / "report.txt").read_text(encoding="utf-8")
    assert "run 3" in table and "mean" in table


def test_eval_replay_reproduces_fixture_sheet(tmp_path):
    expected = json.loads((FIXTURES / "expected.json").read_text(encoding="utf-8"))
    gold = read_corpus(FIXTURES / "gold.jsonl")
    completions = {}
    with open(FIXTURES / "completions.jsonl", encoding="utf-8") as handle:
        for line in handle:
            obj = json.loads(line)
            completions[obj["id"]] = obj["completion"]

    cache_dir = tmp_path / "cache"
    seeder = InferenceClient(None, cache_dir=cache_dir, replay_only=True)
    template = default_template(SchemaId.NVA, "ja")
    params = profile("usa7b")
    for record in gold:
        prompt = build_prompt(template, record, Mode.SCPOS)
        seeder.seed_cache(prompt, params, completions[record.id], salt="run1")

    outdir = tmp_path / "report"
    code = main(
        ["eval", "--gold", str(FIXTURES / "gold.jsonl"), "--mode", "scpos",
         "--runs", "1", "--replay", "--cache-dir", str(cache_dir),
         "--out", str(outdir), "--no-figure"]
    )
    assert code == 0
    payload = json.loads((outdir / "report.json").read_text(encoding="utf-8"))
    assert abs(payload["acc_sc"] - expected["acc_sc"]) < 1e-9
    assert abs(payload["acc_pos"] - expected["acc_pos_micro"]) < 1e-9
    assert abs(payload["acc_scpos"] - expected["acc_scpos"]) < 1e-9

    macro_out = tmp_path / "macro"
    code = main(
        ["eval", "--gold", str(FIXTURES / "gold.jsonl"), "--mode", "scpos",
         "--runs", "1", "--replay", "--cache-dir", str(cache_dir),
         "--aggregate", "macro", "--out", str(macro_out), "--no-figure"]
    )
    assert code == 0
    macro_payload = json.loads((macro_out / "report.json").read_text(encoding="utf-8"))
    assert abs(macro_payload["acc_pos"] - expected["acc_pos_macro"]) < 1e-9


def test_eval_dead_endpoint_exits_3(tmp_path, capsys):
    gold_path = tmp_path / "gold.jsonl"
    record = {"text": "本文", "label": "positive", "pairs": [], "schema": "N"}
    gold_path.write_text(json.dumps(record, ensure_ascii=False) + "\n", encoding="utf-8")
    code = main(
        ["eval", "--gold", str(gold_path), "--endpoint", "http://127.0.0.1:1/v1",
         "--runs", "1", "--max-retries", "1", "--timeout", "0.2",
         "--out", str(tmp_path / "r"), "--no-figure"]
    )
    assert code == 3


def test_eval_config_file_with_flag_override(tmp_path):
    gold = read_corpus(FIXTURES / "gold.jsonl")[:2]
    gold_path = tmp_path / "gold.jsonl"
    with open(gold_path, "w", encoding="utf-8") as handle:
        for record in gold:
            handle.write(json.dumps(record.to_json_dict(), ensure_ascii=False) + "\n")
    config_path = tmp_path / "config.json"
    config_path.write_text(
        json.dumps({"gold": str(gold_path), "runs": 2, "no_figure": True,
                    "out": str(tmp_path / "from-config")}),
        encoding="utf-8",
    )
    with StubEndpoint(answer_fn=gold_answer_fn(gold, Mode.SCPOS)) as stub:
        code = main(
            ["eval", "--config", str(config_path), "--endpoint", stub.url,
             "--runs", "1"]  # flag beats the config file
        )
    assert code == 0
    payload = json.loads(
        (tmp_path / "from-config" / "report.json").read_text(encoding="utf-8")
    )
    assert payload["runs"] == 1
    assert payload["config"]["runs"] == 1


def test_eval_sampling_requires_seed(tmp_path, capsys):
    code = main(
        ["eval", "--gold", str(FIXTURES / "gold.jsonl"), "--sample-size", "5",
         "--endpoint", "http://127.0.0.1:1/x", "--no-figure", "--out", str(tmp_path / "r")]
    )
    assert code == 1
    assert "--seed" in capsys.readouterr().err


def test_eval_icl_pool_excludes_eval_ids(tmp_path):
    gold = read_corpus(FIXTURES / "gold.jsonl")
    eval_set, pool = gold[:4], gold  # pool overlaps the eval set on purpose
    gold_path = tmp_path / "gold.jsonl"
    with open(gold_path, "w", encoding="utf-8") as handle:
        for record in eval_set:
            handle.write(json.dumps(record.to_json_dict(), ensure_ascii=False) + "\n")
    pool_path = tmp_path / "pool.jsonl"
    with open(pool_path, "w", encoding="utf-8") as handle:
        for record in pool:
            handle.write(json.dumps(record.to_json_dict(), ensure_ascii=False) + "\n")

    seen_prompts = []

    def capture(prompt):
        seen_prompts.append(prompt)
        return "<positive>POS"

    outdir = tmp_path / "report"
    with StubEndpoint(answer_fn=capture) as stub:
        code = main(
            ["eval", "--gold", str(gold_path), "--runs", "1", "--endpoint", stub.url,
             "--icl-pool", str(pool_path), "--icl-seed", "3",
             "--out", str(outdir), "--no-figure"]
        )
    assert code == 0
    payload = json.loads((outdir / "report.json").read_text(encoding="utf-8"))
    eval_ids = {record.id for record in eval_set}
    demo_texts = [record.text for record in pool if record.id not in eval_ids]
    # Every prompt starts with a demonstration drawn from outside the eval set.
    assert seen_prompts
    for prompt in seen_prompts:
        assert any(prompt.startswith(text) for text in demo_texts)
        assert not any(prompt.startswith(record.text) for record in eval_set)
    assert payload["config"]["icl_seed"] == 3


def test_eval_endpoint_from_environment(tmp_path, monkeypatch):
    gold = read_corpus(FIXTURES / "gold.jsonl")[:2]
    gold_path = tmp_path / "gold.jsonl"
    with open(gold_path, "w", encoding="utf-8") as handle:
        for record in gold:
            handle.write(json.dumps(record.to_json_dict(), ensure_ascii=False) + "\n")
    with StubEndpoint(answer_fn=gold_answer_fn(gold, Mode.SCPOS)) as stub:
        monkeypatch.setenv("SCPOS_ENDPOINT", stub.url)
        monkeypatch.setenv("SCPOS_CACHE_DIR", str(tmp_path / "cache"))
        code = main(
            ["eval", "--gold", str(gold_path), "--runs", "1",
             "--out", str(tmp_path / "r"), "--no-figure"]
        )
    assert code == 0
    assert (tmp_path / "cache").is_dir()  # completions were cached


def test_eval_with_parallel_workers(tmp_path):
    gold = read_corpus(FIXTURES / "gold.jsonl")[:8]
    gold_path = tmp_path / "gold.jsonl"
    with open(gold_path, "w", encoding="utf-8") as handle:
        for record in gold:
            handle.write(json.dumps(record.to_json_dict(), ensure_ascii=False) + "\n")
    outdir = tmp_path / "report"
    with StubEndpoint(answer_fn=gold_answer_fn(gold, Mode.SCPOS), delay=0.01) as stub:
        code = main(
            ["eval", "--gold", str(gold_path), "--runs", "2", "--workers", "4",
             "--endpoint", stub.url, "--out", str(outdir), "--no-figure"]
        )
    assert code == 0
    payload = json.loads((outdir / "report.json").read_text(encoding="utf-8"))
    assert payload["acc_sc"] == 1.0 and payload["acc_scpos"] == 1.0
