import json

import pytest
from hypothesis import given, strategies as st

from geoleak.core import GeoPoint, GeotagKind, PostRecord, SourceApp
from geoleak.ingest import (FormatError, LoadStats, UserTimeline, geotagged_subset, load_dataset, serialize_record,
                            write_dataset)


def _line(pid, source="ios", user="u1", ts=1_400_000_000, **extra):
    obj = {"post_id": pid, "user_id": user, "ts": ts, "text": "hi", "source": source, "geotag": "none", **extra}
    return json.dumps(obj)


def _write(tmp_path, lines):
    path = tmp_path / "d.jsonl"
    path.write_text("\n".join(lines) + "\n")
    return path


def test_source_filter_drops_web(tmp_path):
    path = _write(tmp_path, [_line("1", "android"), _line("2", "web"), _line("3", "foursquare")])
    out = load_dataset(path)
    assert [p.post_id for p in out["u1"].posts] == ["1", "3"]


def test_empty_file_is_format_error(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    with pytest.raises(FormatError):
        load_dataset(path)


def test_duplicate_post_id_kept_once(tmp_path):
    path = _write(tmp_path, [_line("1", ts=1_400_000_000), _line("1", ts=1_400_000_500)])
    out = load_dataset(path)
    assert len(out["u1"]) == 1
    assert out["u1"].posts[0].timestamp_utc == 1_400_000_000


def test_malformed_lines_counted_not_fatal(tmp_path):
    path = _write(tmp_path, [_line("1"), "{not json", json.dumps({"post_id": "x"}), _line("2", lat=1.0)])
    stats = LoadStats()
    out = load_dataset(path, stats=stats)
    assert stats.malformed == 3
    assert len(out["u1"]) == 1


def test_strict_mode_aborts(tmp_path):
    path = _write(tmp_path, [_line("1"), "{not json"])
    with pytest.raises(FormatError):
        load_dataset(path, strict=True)


def test_missing_file_raises_os_error(tmp_path):
    with pytest.raises(OSError):
        load_dataset(tmp_path / "nope.jsonl")


def test_timelines_sorted_per_user(tmp_path):
    path = _write(tmp_path, [_line("b", ts=30), _line("a", ts=10), _line("c", user="u2", ts=20)])
    out = load_dataset(path)
    assert list(out) == ["u1", "u2"]
    assert [p.timestamp_utc for p in out["u1"].posts] == [10, 30]




def test_geotagged_subset_examples():
    t = UserTimeline("u", tuple(PostRecord(str(i), "u", 10 + i) for i in range(5)))
    assert len(geotagged_subset(t)) == 0
    mixed = UserTimeline("u", tuple(
        PostRecord(str(i), "u", 10 + i, GeoPoint(0, 0) if i in (1, 4, 6, 9) else None,
                   geotag_kind=GeotagKind.GPS if i in (1, 4, 6, 9) else GeotagKind.NONE) for i in range(10)))
    assert [p.post_id for p in geotagged_subset(mixed).posts] == ["1", "4", "6", "9"]
    full = geotagged_subset(mixed)
    assert geotagged_subset(full) == full


record_st = st.builds(
    lambda pid, ts, has, lat, lon, text, src, place: PostRecord(
        pid, "user", ts, GeoPoint(lat, lon) if has else None, text, src,
        GeotagKind.GPS if has else GeotagKind.NONE, place),
    st.text("abcdef0123", min_size=1, max_size=8), st.integers(1, 2**40), st.booleans(),
    st.floats(-90, 90), st.floats(-180, 180), st.text(max_size=30),
    st.sampled_from([SourceApp.ANDROID, SourceApp.IOS, SourceApp.FOURSQUARE]),
    st.none() | st.text(max_size=10))


@given(st.lists(record_st, max_size=20, unique_by=lambda p: p.post_id))
def test_round_trip(tmp_path_factory, posts):
    if not posts:
        return
    path = tmp_path_factory.mktemp("rt") / "d.jsonl"
    write_dataset(path, posts)
    out = load_dataset(path)
    got = sorted(out["user"].posts, key=lambda p: p.post_id)
    assert got == sorted(posts, key=lambda p: p.post_id)
    ts = [p.timestamp_utc for p in out["user"].posts]
    assert ts == sorted(ts)
    assert len(geotagged_subset(out["user"])) <= len(out["user"])


def test_serialize_omits_absent_coords():
    obj = json.loads(serialize_record(PostRecord("1", "u", 5)))
    assert "lat" not in obj and "lon" not in obj
