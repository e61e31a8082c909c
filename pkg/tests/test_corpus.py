from __future__ import annotations

import json

import pytest

from abuse_forecast.corpus import (
    AccountProfile,
    Conversation,
    Corpus,
    Label,
    ParentTweet,
    Provenance,
    Reply,
    abuse_volume,
    load_corpus,
    read_corpus,
    relabel,
    save_corpus,
)
from abuse_forecast.errors import ParseError, SchemaError


def make_conversation(cid="c1", labels=(Label.ABUSIVE, Label.NEUTRAL)) -> Conversation:
    replies = tuple(
        Reply(id=f"{cid}-r{i}", text=f"reply {i}", label=lab)
        for i, lab in enumerate(labels)
    )
    return Conversation(
        id=cid,
        parent=ParentTweet(id=f"{cid}-p", text="parent text #x", hashtag_count=1),
        account=AccountProfile(followers_count=10),
        replies=replies,
    )


def test_abuse_volume_counts_abusive_only():
    conv = make_conversation(labels=(Label.ABUSIVE, Label.ABUSIVE, Label.NEUTRAL,
                                     Label.FLAG_MANUAL, Label.UNLABELED))
    assert conv.y == 2
    assert abuse_volume(conv) == 2


def test_conversation_requires_replies():
    with pytest.raises(SchemaError):
        Conversation(id="c", parent=ParentTweet(id="p", text="t"),
                     account=AccountProfile(), replies=())


def test_duplicate_reply_ids_rejected():
    replies = (Reply(id="r", text="a"), Reply(id="r", text="b"))
    with pytest.raises(SchemaError):
        Conversation(id="c", parent=ParentTweet(id="p", text="t"),
                     account=AccountProfile(), replies=replies)


def test_duplicate_conversation_ids_rejected():
    with pytest.raises(SchemaError):
        Corpus(conversations=(make_conversation("c1"), make_conversation("c1")))


def test_negative_counts_rejected():
    with pytest.raises(SchemaError):
        ParentTweet(id="p", text="t", hashtag_count=-1)
    with pytest.raises(SchemaError):
        AccountProfile(followers_count=-5)


def test_roundtrip(tmp_path):
    corpus = Corpus(
        conversations=(make_conversation("c1"), make_conversation("c2", labels=(Label.UNLABELED,))),
        provenance=Provenance.SYNTHETIC,
        seed=7,
    )
    path = tmp_path / "corpus.jsonl"
    save_corpus(corpus, path)
    loaded = load_corpus(path)
    assert loaded == corpus  # equality ignores provenance/seed
    assert loaded.conversations == corpus.conversations
    assert loaded.provenance is Provenance.INGESTED


def test_save_is_deterministic(tmp_path):
    corpus = Corpus(conversations=(make_conversation(),))
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_corpus(corpus, a)
    save_corpus(corpus, b)
    assert a.read_bytes() == b.read_bytes()


def test_ingest_reports_defaults_and_deep_replies(tmp_path):
    obj = {
        "id": "c1",
        "parent": {"id": "p1", "text": "hello"},
        "account": {"followers_count": 3},
        "replies": [
            {"id": "r1", "text": "hi", "replies": [{"id": "n1", "text": "nested"}]},
            {"id": "r2", "text": "yo", "label": "abusive"},
        ],
    }
    path = tmp_path / "c.jsonl"
    path.write_text(json.dumps(obj) + "\n")
    corpus, report = read_corpus(path)
    assert report.n_conversations == 1
    assert report.n_replies == 2
    assert report.dropped_deep_replies == 1
    assert report.defaulted_fields == 16  # all account fields but one
    assert corpus.conversations[0].replies[1].label is Label.ABUSIVE
    assert corpus.conversations[0].replies[0].label is Label.UNLABELED


def test_ingest_rejects_bad_json(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text("{not json\n")
    with pytest.raises(ParseError):
        load_corpus(path)


def test_ingest_rejects_missing_fields(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps({"id": "c", "parent": {"id": "p", "text": "t"}}) + "\n")
    with pytest.raises(SchemaError):
        load_corpus(path)


def test_ingest_rejects_unknown_label(tmp_path):
    obj = {
        "id": "c", "parent": {"id": "p", "text": "t"}, "account": {},
        "replies": [{"id": "r", "text": "x", "label": "spammy"}],
    }
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(obj) + "\n")
    with pytest.raises(SchemaError):
        load_corpus(path)


def test_relabel_positional():
    conv = make_conversation(labels=(Label.UNLABELED, Label.UNLABELED))
    out = relabel(conv, [Label.ABUSIVE, Label.NEUTRAL])
    assert out.y == 1
    assert [r.label for r in out.replies] == [Label.ABUSIVE, Label.NEUTRAL]
    with pytest.raises(SchemaError):
        relabel(conv, [Label.ABUSIVE])


CSV_HEADER = (
    "id,parent_id,parent_text,hashtag_count,is_quote_status,followers_count,"
    "verified,time_zone,reply_id,reply_text,reply_label\n"
)


def test_csv_ingest_merges_consecutive_rows(tmp_path):
    path = tmp_path / "in.csv"
    path.write_text(
        CSV_HEADER
        + "c1,c1-p,Hello #world,1,false,120,true,UTC,c1-r0,nice one,neutral\n"
        + "c1,,,,,,,,c1-r1,awful take,abusive\n"
        + "c2,c2-p,Quiet post,0,false,5,false,,c2-r0,thanks,\n"
    )
    corpus, report = read_corpus(path, format="csv")
    assert report.n_conversations == 2
    assert report.n_replies == 3
    c1, c2 = corpus.conversations
    assert [r.label for r in c1.replies] == [Label.NEUTRAL, Label.ABUSIVE]
    assert c1.parent.hashtag_count == 1
    assert c1.account.followers_count == 120
    assert c1.account.verified is True
    assert c1.account.time_zone == "UTC"
    assert c2.replies[0].label is Label.UNLABELED
    assert c2.account.time_zone is None


def test_csv_rejects_bad_cells(tmp_path):
    bad_int = tmp_path / "a.csv"
    bad_int.write_text(CSV_HEADER + "c1,p,t,seven,false,1,true,,r,x,\n")
    with pytest.raises(SchemaError, match="hashtag_count"):
        load_corpus(bad_int, format="csv")

    bad_bool = tmp_path / "b.csv"
    bad_bool.write_text(CSV_HEADER + "c1,p,t,1,maybe,1,true,,r,x,\n")
    with pytest.raises(SchemaError, match="is_quote_status"):
        load_corpus(bad_bool, format="csv")

    no_id = tmp_path / "c.csv"
    no_id.write_text("parent_id,reply_id\np,r\n")
    with pytest.raises(SchemaError, match="id"):
        load_corpus(no_id, format="csv")


def test_unknown_format_rejected(tmp_path):
    path = tmp_path / "x.jsonl"
    path.write_text("")
    with pytest.raises(SchemaError):
        read_corpus(path, format="xml")
