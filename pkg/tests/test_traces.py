import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linksight.traces import (
    AnomalyKind,
    LabeledDataset,
    RssiRangeError,
    Trace,
    TraceParseError,
    filter_complete,
    format_trace,
    generate_synthetic_normal,
    load_dataset,
    parse_trace_file,
    save_dataset,
)


def records(pairs):
    return "".join(f"{s},{r}\n" for s, r in pairs)


def test_complete_constant_trace():
    t = parse_trace_file(records((k, 40) for k in range(300)))
    assert len(t) == 300
    assert np.all(t.values == 40)
    assert not t.lossy


def test_gap_marks_lossy():
    t = parse_trace_file(records([(0, 40), (1, 41), (3, 42)]))
    assert t.lossy
    assert len(t) == 4


def test_gap_detected_against_declared_length():
    t = parse_trace_file(records((k, 40) for k in range(299)), length=300)
    assert t.lossy


def test_round_robin_values_match_line_reader():
    text = "# id=rr\n" + records((k, k % 128) for k in range(300))
    t = parse_trace_file(text)
    # independent reader: split lines by hand
    expected = [int(line.split(",")[1]) for line in text.splitlines() if not line.startswith("#")]
    assert t.values.tolist() == expected
    assert t.id == "rr"


def test_malformed_record_reports_line():
    with pytest.raises(TraceParseError) as exc:
        parse_trace_file("# id=x\n0,40\n1;41\n")
    assert exc.value.lineno == 3


def test_non_increasing_sequence_rejected():
    with pytest.raises(TraceParseError) as exc:
        parse_trace_file("0,40\n2,40\n2,41\n")
    assert exc.value.lineno == 3


@pytest.mark.parametrize("rssi", [-1, 128, 300])
def test_rssi_out_of_range(rssi):
    with pytest.raises(RssiRangeError):
        parse_trace_file(f"0,40\n1,{rssi}\n")


def test_filter_complete():
    good = Trace("a", [1, 2, 3])
    bad = Trace("b", [1, 2, 3], lossy=True)
    assert filter_complete([good, bad, good]) == [good, good]
    assert filter_complete([bad, bad]) == []
    assert filter_complete([good, bad], keep_lossy=True) == [bad]


def test_filter_idempotent():
    ts = [Trace(str(i), [1, 2], lossy=bool(i % 3)) for i in range(10)]
    once = filter_complete(ts)
    assert filter_complete(once) == once


def test_filter_synthetic_count():
    ts = [Trace(str(i), [40] * 8, lossy=i >= 2123) for i in range(3000)]
    assert len(filter_complete(ts)) == 2123


@settings(max_examples=50, deadline=None)
@given(
    vals=st.lists(st.integers(0, 127), min_size=1, max_size=64),
    src=st.integers(0, 40),
    dst=st.integers(0, 40),
    noise=st.integers(0, 5),
    label=st.sampled_from(list(AnomalyKind)),
)
def test_round_trip(vals, src, dst, noise, label):
    t = Trace("n1-n2", vals, src_node=src, dst_node=dst, noise_level=noise, label=label)
    assert parse_trace_file(format_trace(t)) == t


def test_round_trip_real_values():
    t = Trace("slow", [40.0, 39.25, 0.1 + 0.2, 0.0])
    assert parse_trace_file(format_trace(t)) == t


def test_format_is_ascii_lf_integers():
    text = format_trace(Trace("x", [40, 41], src_node=1, dst_node=2, noise_level=3))
    assert text == "# id=x\n# src=1\n# dst=2\n# noise=3\n# label=None\n0,40\n1,41\n"


def test_synthetic_zero_variance():
    ds = generate_synthetic_normal(1, 300, 40, 0, seed=3)
    assert len(ds) == 1
    assert np.all(ds.traces[0].values == 40)
    assert ds.traces[0].label is AnomalyKind.NONE


def test_synthetic_deterministic():
    a = generate_synthetic_normal(5, 300, 40, 3, seed=11)
    b = generate_synthetic_normal(5, 300, 40, 3, seed=11)
    assert all(x == y for x, y in zip(a.traces, b.traces))
    c = generate_synthetic_normal(5, 300, 40, 3, seed=12)
    assert not all(x == y for x, y in zip(a.traces, c.traces))


def test_synthetic_mean():
    ds = generate_synthetic_normal(1000, 300, 40, 3, seed=5)
    assert abs(ds.values().mean() - 40) < 0.5
    assert ds.values().min() >= 0 and ds.values().max() <= 127


def test_synthetic_rejects_bad_parameters():
    with pytest.raises(ValueError):
        generate_synthetic_normal(1, 300, 40, -1, seed=0)
    with pytest.raises(ValueError):
        generate_synthetic_normal(0, 300, 40, 1, seed=0)
    with pytest.raises(ValueError):
        generate_synthetic_normal(1, 4, 40, 1, seed=0)


def test_dataset_length_invariant():
    with pytest.raises(ValueError):
        LabeledDataset([Trace("a", [1, 2, 3])], trace_length=4)


def test_dataset_directory_round_trip(tmp_path):
    ds = generate_synthetic_normal(4, 16, 40, 2, seed=9)
    save_dataset(ds, tmp_path)
    back = load_dataset(tmp_path)
    assert back.trace_length == 16 and back.seed == 9
    assert all(x == y for x, y in zip(ds.traces, back.traces))
    manifest = (tmp_path / "manifest.csv").read_text().splitlines()
    assert manifest[0] == "# trace_length=16"
    assert "id,label,seed_offset" in manifest
    assert manifest[-1] == "syn00003,None,3"
