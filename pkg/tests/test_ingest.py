"""Channel CSV and manifest parsing, segment extraction."""

import numpy as np
import pytest

from tdec_coordination.errors import FormatError
from tdec_coordination.ingest import (ChannelSet, Modality, SegmentManifest, channel_csv_text, extract_segments,
                                      manifest_json_text, parse_channel_csv, parse_segment_manifest, whole_signal)


def _signal(n, channels=2, rate=100.0, seed=0):
    rng = np.random.default_rng(seed)
    return ChannelSet(rate, [f"c{k}" for k in range(channels)], rng.standard_normal((n, channels)))


def test_parse_two_channels():
    cs = parse_channel_csv("LA,LP\n1,2\n3,4\n5,6\n", 100.0, Modality.TV)
    assert cs.channel_names == ("LA", "LP")
    assert cs.num_channels == 2
    assert cs.num_samples == 3
    assert cs.modality_tag is Modality.TV
    np.testing.assert_array_equal(cs.samples[:, 1], [2, 4, 6])


def test_parse_fau_file():
    names = [f"AU{k:02d}" for k in range(1, 18)]
    rows = [",".join(str(0.1 * (r + c)) for c in range(17)) for r in range(4)]
    cs = parse_channel_csv(",".join(names) + "\n" + "\n".join(rows) + "\n", 28.0, "fau")
    assert cs.num_channels == 17
    assert cs.modality_tag is Modality.FAU


def test_non_numeric_cell_reports_row_and_column():
    with pytest.raises(FormatError) as err:
        parse_channel_csv("A,B\n1.0,abc\n", 100.0)
    assert err.value.row == 1
    assert err.value.column == 2


def test_ragged_row_and_empty_file():
    with pytest.raises(FormatError) as err:
        parse_channel_csv("A,B\n1,2\n3\n", 100.0)
    assert err.value.row == 2
    with pytest.raises(FormatError):
        parse_channel_csv("A,B\n", 100.0)
    with pytest.raises(FormatError):
        parse_channel_csv("", 100.0)


def test_missing_values_rejected():
    with pytest.raises(ValueError):
        parse_channel_csv("A\n1\nnan\n", 100.0)
    with pytest.raises(ValueError):
        parse_channel_csv("A\n1\ninf\n", 100.0)


def test_unknown_modality():
    with pytest.raises(FormatError):
        parse_channel_csv("A\n1\n", 100.0, "EEG")


def test_modality_parse_accepts_members_and_text():
    assert Modality.parse(Modality.TV) is Modality.TV
    assert Modality.parse(Modality.FAU) is Modality.FAU
    assert Modality.parse("tv") is Modality.TV
    cs = ChannelSet(28.0, ["AU01"], np.zeros((3, 1)), Modality.FAU)
    assert cs.modality_tag is Modality.FAU
    with pytest.raises(FormatError):
        Modality.parse("EEG")


def test_csv_round_trip_is_lossless():
    cs = _signal(50, channels=3)
    again = parse_channel_csv(channel_csv_text(cs), cs.sample_rate_hz)
    np.testing.assert_array_equal(again.samples, cs.samples)
    assert again.channel_names == cs.channel_names


def test_manifest_single_entry():
    m = parse_segment_manifest('[{"speaker": "subj1", "start_s": 0.0, "end_s": 6.0}]')
    assert len(m.entries) == 1
    assert m.speakers == ["subj1"]


def test_manifest_overlap_and_reversed():
    with pytest.raises(ValueError):
        SegmentManifest.from_entries([("subj1", 0.0, 6.0), ("subj1", 5.0, 8.0)])
    with pytest.raises(ValueError):
        SegmentManifest.from_entries([("subj1", 2.0, 1.0)])
    with pytest.raises(ValueError):
        SegmentManifest.from_entries([("subj1", -1.0, 1.0)])


def test_cross_speaker_overlap_allowed():
    m = SegmentManifest.from_entries([("subj1", 0.0, 6.0), ("interviewer", 5.0, 8.0)])
    assert len(m.entries) == 2


def test_manifest_format_errors():
    with pytest.raises(FormatError):
        parse_segment_manifest("{not json")
    with pytest.raises(FormatError):
        parse_segment_manifest('{"speaker": "a"}')
    with pytest.raises(FormatError):
        parse_segment_manifest('[{"speaker": "a", "start_s": 0}]')
    with pytest.raises(FormatError):
        parse_segment_manifest('[{"speaker": "a", "start_s": "0", "end_s": 1}]')


def test_manifest_json_round_trip():
    m = SegmentManifest.from_entries([("b", 3.0, 4.5), ("a", 0.0, 2.0)])
    assert parse_segment_manifest(manifest_json_text(m)) == m


def test_extract_keeps_segments_longer_than_threshold():
    cs = _signal(1500)
    m = SegmentManifest.from_entries([("subj1", 0.0, 6.0), ("subj1", 10.0, 14.0)])
    segments = extract_segments(cs, m, "subj1", 5.0)
    assert len(segments) == 1
    assert (segments[0].start_index, segments[0].end_index) == (0, 600)
    np.testing.assert_array_equal(segments[0].samples, cs.samples[0:600])


def test_extract_threshold_is_strict():
    cs = _signal(1000)
    m = SegmentManifest.from_entries([("s", 0.0, 5.0)])
    assert extract_segments(cs, m, "s", 5.0) == []


def test_extract_zero_threshold():
    cs = _signal(300)
    segments = extract_segments(cs, SegmentManifest.from_entries([("s", 0.0, 1.0)]), "s", 0.0)
    assert len(segments) == 1
    assert segments[0].length == 100


def test_extract_clamps_to_signal_end():
    cs = _signal(800)
    m = SegmentManifest.from_entries([("s", 1.0, 20.0)])
    segments = extract_segments(cs, m, "s", 5.0)
    assert segments[0].end_index == 800
    assert segments[0].duration_s == pytest.approx(7.0)
    assert extract_segments(cs, m, "s", 7.0) == []


def test_segment_ids_follow_speaker_entry_order():
    cs = _signal(3000)
    m = SegmentManifest.from_entries([("s", 0.0, 2.0), ("i", 2.0, 4.0), ("s", 4.0, 11.0), ("s", 12.0, 20.0)])
    ids = [seg.segment_id for seg in extract_segments(cs, m, "s", 5.0)]
    assert ids == ["seg001", "seg002"]


def test_other_speakers_ignored():
    cs = _signal(1000)
    m = SegmentManifest.from_entries([("interviewer", 0.0, 9.0)])
    assert extract_segments(cs, m, "subj1") == []


def test_whole_signal():
    cs = _signal(10)
    seg = whole_signal(cs)
    assert seg.length == 10
    assert seg.duration_s == pytest.approx(0.1)
