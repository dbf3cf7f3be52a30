import json

import pytest

import dialsum

RESERVED = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]


def make_vocab(words=("hi", "yo", "ok", "cookies", "baked", "for")):
    return dialsum.Vocab.from_tokens(RESERVED + list(words))


def test_parse_and_format_round_trip():
    d = dialsum.parse_dialogue("Amanda: I baked cookies\nJerry: ok", "d1")
    assert [u.speaker for u in d.turns] == ["Amanda", "Jerry"]
    assert d.interlocutors() == ["Amanda", "Jerry"]
    again = dialsum.parse_dialogue(dialsum.format_dialogue(d), "d1")
    assert again == d


def test_parse_error_is_a_python_exception():
    with pytest.raises(dialsum.DialsumError):
        dialsum.parse_dialogue("no colon here", "bad")


def test_vocab_and_tokenize():
    v = make_vocab()
    assert len(v) == len(RESERVED) + 6 + 64
    assert "[PERSON_0]" in v
    ids, pieces = dialsum.tokenize("hi [SEP] unknownword", v)
    assert pieces == ["hi", "[SEP]", "[UNK]"]
    assert ids[1] == v.sep_id


def test_corpus_stats_and_emoji_vocab():
    corpus = dialsum.read_corpus_jsonl(
        '{"id": "1", "dialogue": "A: hi \\ud83d\\ude02\\nB: yo", "summary": "x"}\n'
    )
    assert len(corpus) == 1
    v = make_vocab()
    base = dialsum.corpus_stats(corpus, v)
    assert (base.n_dialogues, base.n_utterances, base.n_oov_utterances) == (1, 2, 1)
    emoji = dialsum.build_emoji_vocab(corpus, 10)
    assert emoji == ["\U0001F602"]
    assert dialsum.corpus_stats(corpus, v.extended(emoji)).n_oov_utterances == 0


def test_generate_dataset_records():
    corpus = dialsum.read_corpus_jsonl(
        "\n".join(
            json.dumps({"id": str(i), "dialogue": "Amanda: hi\nJerry: yo\nAmanda: ok", "summary": "Amanda baked"})
            for i in range(5)
        )
    )
    cfg = dialsum.PretextConfig()
    cfg.task = dialsum.Task.switch_utterance
    cfg.p_u = 1.0
    cfg.seed = 3
    vocab = make_vocab()
    examples, skipped = dialsum.generate_dataset(corpus, cfg, vocab)
    assert len(examples) == 5 and skipped == {}
    for ex in examples:
        assert len(ex["sep_labels"]) == len(ex["sep_positions"]) == 3
        assert all(ex["token_ids"][p] == vocab.sep_id for p in ex["sep_positions"])
    again, _ = dialsum.generate_dataset(corpus, cfg, vocab, threads=4)
    assert again == examples


def test_rouge():
    r1 = dialsum.rouge_n("the cat sat", "the cat ran", 1)
    assert r1.f1 == pytest.approx(2 / 3)
    assert dialsum.rouge_n("the cat sat", "the cat ran", 2).f1 == pytest.approx(0.5)
    assert dialsum.rouge_l("the cat sat", "the cat ran").f1 == pytest.approx(2 / 3)
    report = dialsum.rouge_report([("a b c", "a b c"), ("x", "y")])
    assert report.n_pairs == 2
    assert report.r1 == pytest.approx(0.5)
    assert "50.00" in report.table()
    assert dialsum.cosine([1.0, 0.0], [2.0, 0.0]) == pytest.approx(1.0)


def test_shared_parameter_count():
    cfg = dialsum.ModelConfig()
    cfg.d_model = 16
    cfg.d_ff = 32
    cfg.vocab_size = 50
    cfg.max_len = 32
    shared = dialsum.parameter_count(cfg)
    cfg.share_weights = False
    assert shared < dialsum.parameter_count(cfg)


def test_run_cli(tmp_path):
    code, out, err = dialsum.run_cli("eval-rouge")
    assert code == 1
    pred = tmp_path / "p.jsonl"
    pred.write_text('{"id": "1", "summary": "hello there"}\n')
    code, out, err = dialsum.run_cli("eval-rouge", "--pred", pred, "--ref", pred)
    assert code == 0, err
    assert "100.00" in out
