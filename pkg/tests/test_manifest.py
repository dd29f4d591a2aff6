import json

import pytest
from hypothesis import given, settings, strategies as st

from hsad.errors import DataError
from hsad.fixtures import clean_corpus_records, write_raw_corpus
from hsad.manifest import (SENTENCE_TYPES, SENTENCES_PER_SPEAKER, UtteranceRecord, decode_record, dumps,
                           encode_record, ingest_directory, loads, read_manifest, validate, write_manifest)
from hsad.audio import AudioClip, save_wav

import numpy as np


def rules(result):
    return sorted({v.rule for v in result.violations})


def test_sentence_plan_sums_to_104():
    assert SENTENCES_PER_SPEAKER == 104 == sum(SENTENCE_TYPES.values())


def test_clean_corpus_counts():
    records = clean_corpus_records(12)
    result = validate(records, clean_complete=True)
    assert result.ok, result.violations
    assert result.summary.total == 1248 == 12 * 104
    assert result.summary.per_class == {0: 312, 1: 312, 2: 312, 3: 312}
    assert set(result.summary.per_speaker.values()) == {104}


def test_class_label_follows_group():
    assert [UtteranceRecord(utterance_id="x", group=g).class_label for g in ("G1", "G2", "G3", "G4", "G5", "G6")] \
        == [0, 1, 2, 3, 3, 0]
    assert UtteranceRecord(utterance_id="x", group="G6").binary_label == 0
    assert UtteranceRecord(utterance_id="x", group="G5").binary_label == 1


def test_record_roundtrip_and_stable_encoding():
    r = UtteranceRecord(utterance_id="aé", speaker_id="s1", age=30, gender="female",
                        sentence_type="numeric", group="G4",
                        segment_boundaries=[["Human", 0, 100], ["Generated", 90, 200]],
                        composition={"pattern": "HtoS", "fade_ms": 10.0}, similarity_score=0.5,
                        flags=["clipped"])
    line = encode_record(r)
    assert "\n" not in line and decode_record(line) == r
    assert encode_record(decode_record(line)) == line


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.integers(0, 120), st.text(min_size=1, max_size=8))
def test_roundtrip_property(sim, age, uid):
    r = UtteranceRecord(utterance_id=uid, age=age, group="G2", similarity_score=round(sim, 4))
    assert decode_record(encode_record(r)) == r


def test_header_roundtrip(tmp_path):
    records = clean_corpus_records(1)[:3]
    write_manifest(tmp_path / "m.jsonl", records, {"seed": 4, "clean_complete": False})
    header, back = read_manifest(tmp_path / "m.jsonl")
    assert header == {"seed": 4, "clean_complete": False} and back == records
    assert loads(dumps(records)) == ({}, records)


def test_unknown_field_rejected():
    with pytest.raises(DataError, match="line 1"):
        loads(json.dumps({"utterance_id": "x", "colour": "red"}) + "\n")


def test_nonfinite_float_rejected():
    with pytest.raises(ValueError):
        encode_record(UtteranceRecord(utterance_id="x", similarity_score=float("nan")))


@pytest.mark.parametrize("record,rule", [
    (UtteranceRecord(utterance_id="x", group="G9"), "unknown-group"),
    (UtteranceRecord(utterance_id="x", group="G1", class_label=2), "group-class-mismatch"),
    (UtteranceRecord(utterance_id="x", group="G1", sentence_type="poem"), "unknown-sentence-type"),
    (UtteranceRecord(utterance_id="x", group="G2", cloning_condition="C1", similarity_score=1.5), "similarity-range"),
    (UtteranceRecord(utterance_id="x", group="G2", cloning_condition="C7", similarity_score=0.9),
     "unknown-cloning-condition"),
    (UtteranceRecord(utterance_id="x", group="G4"), "missing-segment-boundaries"),
    (UtteranceRecord(utterance_id="x", group="G4", segment_boundaries=[["Human", 50, 10]]), "segment-order"),
])
def test_validation_rules(record, rule):
    assert rule in rules(validate([record]))


def test_duplicates_and_warnings():
    a = UtteranceRecord(utterance_id="x", group="G2", cloning_condition="C1", similarity_score=0.5)
    result = validate([a, UtteranceRecord(utterance_id="x", group="G1", flags=["incomplete"])])
    assert rules(result) == ["duplicate-id"]
    assert {w.rule for w in result.warnings} == {"low-similarity", "incomplete-metadata"}


def test_clean_complete_detects_imbalance():
    records = clean_corpus_records(2)[:-1]
    assert {"class-imbalance", "sentence-type-counts"} <= set(rules(validate(records, clean_complete=True)))
    assert validate(records).ok


def test_validate_does_not_mutate():
    records = clean_corpus_records(1)
    before = [encode_record(r) for r in records]
    validate(records, clean_complete=True)
    assert [encode_record(r) for r in records] == before


def test_ingest_empty_directory(tmp_path):
    assert ingest_directory(tmp_path) == []


def test_ingest_with_sidecars(tmp_path):
    write_raw_corpus(tmp_path, n_speakers=1, seconds=0.1)
    records = ingest_directory(tmp_path)
    assert len(records) == 4
    assert [r.group for r in records] == ["G1", "G1", "G2", "G3"]
    assert all(not r.flags for r in records)
    assert records[2].similarity_score == 0.82
    assert records[0].audio_path == "spk00/spk00-0.wav"


def test_ingest_missing_sidecar_flags_incomplete(tmp_path):
    save_wav(tmp_path / "lonely.wav", AudioClip(np.zeros(160), 16000))
    (tmp_path / "half.json").write_text(json.dumps({"speaker_id": "s"}))
    save_wav(tmp_path / "half.wav", AudioClip(np.zeros(160), 16000))
    records = ingest_directory(tmp_path)
    assert [(r.utterance_id, r.flags) for r in records] == [("half", ["incomplete"]), ("lonely", ["incomplete"])]
    assert {w.rule for w in validate(records).warnings} == {"incomplete-metadata"}


def test_ingest_duplicate_ids_name_both_files(tmp_path):
    for sub in ("a", "b"):
        save_wav(tmp_path / sub / "clip.wav", AudioClip(np.zeros(160), 16000))
    with pytest.raises(DataError) as err:
        ingest_directory(tmp_path)
    assert "a/clip.wav" in str(err.value) and "b/clip.wav" in str(err.value)
