import json

import pytest

from waterway_qa.dataset import (
    DatasetManifest,
    QACategory,
    QASample,
    Split,
    StatsSummary,
    Waterway,
    classify_answer_type,
    compute_stats,
    load_dataset,
    parse_dataset,
    save_dataset,
)
from waterway_qa.errors import DatasetValidationError, InvalidArgument


def valid_raw():
    return {
        "clips": [
            {"clip_id": "c1", "frames": ["c1/f0.jpg", "c1/f1.jpg"], "duration_s": 4.0},
            {"clip_id": "c2", "frames": ["c2/f0.jpg"], "duration_s": 8.0},
        ],
        "samples": [
            {
                "sample_id": "s1",
                "clip_id": "c1",
                "question": "Is there a boat ahead?",
                "reference_answer": "Yes, one boat.",
                "category": "Perception",
                "waterway": "River",
                "split": "test",
            },
            {
                "sample_id": "s2",
                "clip_id": "c2",
                "question": "What does a green buoy signify here today?",
                "reference_answer": "A starboard hand mark.",
                "category": "KnowledgeDriven",
                "waterway": "Sea",
                "split": "test",
            },
        ],
    }


def test_valid_fixture_loads(tmp_path):
    path = tmp_path / "ds.json"
    path.write_text(json.dumps(valid_raw()))
    manifest = load_dataset(path)
    assert len(manifest.samples) == 2
    assert set(manifest.clips) == {"c1", "c2"}


def test_unknown_clip_reference_names_sample():
    raw = valid_raw()
    raw["samples"][0]["clip_id"] = "ghost"
    with pytest.raises(DatasetValidationError) as excinfo:
        parse_dataset(raw)
    assert "s1" in str(excinfo.value)
    assert "ghost" in str(excinfo.value)


def test_unknown_category_lists_allowed_values():
    raw = valid_raw()
    raw["samples"][1]["category"] = "Q"
    with pytest.raises(DatasetValidationError) as excinfo:
        parse_dataset(raw)
    message = str(excinfo.value)
    for allowed in ("Perception", "SceneUnderstanding", "CausalPredictive",
                    "ActionInteraction", "KnowledgeDriven"):
        assert allowed in message


def test_duplicate_sample_id_rejected():
    raw = valid_raw()
    raw["samples"][1]["sample_id"] = "s1"
    with pytest.raises(DatasetValidationError) as excinfo:
        parse_dataset(raw)
    assert "duplicate sample_id" in str(excinfo.value)


def test_duplicate_clip_id_rejected():
    raw = valid_raw()
    raw["clips"].append({"clip_id": "c1", "frames": ["x.jpg"]})
    with pytest.raises(DatasetValidationError) as excinfo:
        parse_dataset(raw)
    assert "duplicate clip_id" in str(excinfo.value)


def test_empty_question_rejected():
    raw = valid_raw()
    raw["samples"][0]["question"] = ""
    with pytest.raises(DatasetValidationError) as excinfo:
        parse_dataset(raw)
    assert "question" in str(excinfo.value)


def test_duplicate_frames_in_clip_rejected():
    raw = valid_raw()
    raw["clips"][0]["frames"] = ["same.jpg", "same.jpg"]
    with pytest.raises(DatasetValidationError) as excinfo:
        parse_dataset(raw)
    assert "unique" in str(excinfo.value)


def test_all_violations_collected_at_once():
    raw = valid_raw()
    raw["samples"][0]["category"] = "Nope"
    raw["samples"][1]["waterway"] = "Pond"
    raw["samples"].append({"sample_id": "s3", "clip_id": "ghost", "question": "q?",
                           "reference_answer": "a", "category": "Perception",
                           "waterway": "Sea", "split": "test"})
    with pytest.raises(DatasetValidationError) as excinfo:
        parse_dataset(raw)
    assert len(excinfo.value.violations) == 3


def test_missing_file_is_invalid_argument(tmp_path):
    with pytest.raises(InvalidArgument):
        load_dataset(tmp_path / "missing.json")


def test_save_load_round_trip(tmp_path):
    manifest = parse_dataset(valid_raw())
    path = tmp_path / "ds.json"
    save_dataset(manifest, path)
    again = load_dataset(path)
    assert again.samples == manifest.samples
    assert again.clips == manifest.clips


def test_split_filter():
    raw = valid_raw()
    raw["samples"][0]["split"] = "train"
    manifest = parse_dataset(raw)
    assert [s.sample_id for s in manifest.split_samples(Split.TEST)] == ["s2"]


# --- stats ------------------------------------------------------------------------


def test_mean_word_lengths():
    raw = valid_raw()
    raw["samples"][0]["question"] = "one two three"
    raw["samples"][1]["question"] = "one two three four five"
    stats = compute_stats(parse_dataset(raw))
    assert stats.mean_question_words == 4.0


def test_category_and_waterway_counts():
    stats = compute_stats(parse_dataset(valid_raw()))
    assert stats.per_category == {"Perception": 1, "KnowledgeDriven": 1}
    assert stats.per_waterway == {"River": 1, "Sea": 1}
    assert stats.sample_count == 2
    assert stats.clip_count == 2


def test_duration_stats():
    stats = compute_stats(parse_dataset(valid_raw()))
    assert stats.duration_min_s == 4.0
    assert stats.duration_max_s == 8.0
    assert stats.duration_mean_s == 6.0


@pytest.mark.parametrize(
    "answer,kind",
    [
        ("Yes, a boat is ahead.", "yes_no"),
        ("No.", "yes_no"),
        ("There are 3 buoys.", "count"),
        ("Two vessels are crossing.", "count"),
        ("The ferry slows near the lock.", "descriptive"),
    ],
)
def test_answer_type_heuristic(answer, kind):
    assert classify_answer_type(answer) == kind


def test_stats_render_text_mentions_counts():
    text = compute_stats(parse_dataset(valid_raw())).render_text()
    assert "samples: 2" in text
    assert "Perception=1" in text
