"""Max-magnitude fusion and the score file format."""

import io

import pytest

from slskit.ensemble import (
    ScoreEntry,
    fuse_entries,
    fuse_files,
    fuse_max_abs,
    read_scores,
    write_scores,
)
from slskit.errors import ScoreFileError, UsageError
from slskit.rng import SplitMix64


def test_fuse_picks_larger_magnitude():
    assert fuse_max_abs(2.0, -1.0) == 2.0
    assert fuse_max_abs(0.5, -3.0) == -3.0
    assert fuse_max_abs(-4.0, 1.0) == -4.0


def test_fuse_tie_takes_first_argument():
    assert fuse_max_abs(1.0, -1.0) == 1.0
    assert fuse_max_abs(-1.0, 1.0) == -1.0
    assert fuse_max_abs(0.0, 0.0) == 0.0
    assert fuse_max_abs(0.0, -0.0) == 0.0


def test_fuse_rejects_nonfinite():
    with pytest.raises(UsageError):
        fuse_max_abs(float("inf"), 0.0)
    with pytest.raises(UsageError):
        fuse_max_abs(0.0, float("nan"))


def test_fuse_invariants_bulk():
    rng = SplitMix64(31)
    for _ in range(2000):
        a = rng.uniform() * 20.0 - 10.0
        b = rng.uniform() * 20.0 - 10.0
        fused = fuse_max_abs(a, b)
        assert fused in (a, b)
        assert abs(fused) == max(abs(a), abs(b))
        assert fuse_max_abs(-a, -b) == -fused


def test_score_file_roundtrip():
    entries = [ScoreEntry("u1", 0.1), ScoreEntry("u2", -2.5), ScoreEntry("u3", 1e-17)]
    buf = io.StringIO()
    write_scores(buf, entries)
    back = read_scores(io.StringIO(buf.getvalue()))
    assert back == entries  # %.17g preserves every bit


def test_score_file_format_details():
    buf = io.StringIO()
    write_scores(buf, [ScoreEntry("u1", 0.5)])
    assert buf.getvalue() == "u1\t0.5\n"
    parsed = read_scores(io.StringIO("# header comment\nu1\t0.5\n\nu2\t-1\n"))
    assert [e.utterance_id for e in parsed] == ["u1", "u2"]


def test_score_file_rejects_malformed_rows():
    with pytest.raises(ScoreFileError, match="line 1"):
        read_scores(io.StringIO("u1 0.5\n"))  # space, not tab
    with pytest.raises(ScoreFileError, match="line 1.*bad score"):
        read_scores(io.StringIO("u1\tabc\n"))
    with pytest.raises(ScoreFileError, match="line 2.*duplicate"):
        read_scores(io.StringIO("u1\t0.5\nu1\t0.25\n"))
    with pytest.raises(ScoreFileError, match="finite"):
        read_scores(io.StringIO("u1\tinf\n"))


def test_fuse_entries_requires_matching_ids():
    x = [ScoreEntry("u1", 1.0), ScoreEntry("u2", 2.0)]
    w = [ScoreEntry("u1", -3.0)]
    with pytest.raises(ScoreFileError, match="u2"):
        fuse_entries(x, w)
    with pytest.raises(ScoreFileError, match="second file"):
        fuse_entries(w, x)


def test_fuse_entries_order_follows_first_file():
    x = [ScoreEntry("b", 1.0), ScoreEntry("a", -0.5)]
    w = [ScoreEntry("a", 2.0), ScoreEntry("b", -0.25)]
    fused = fuse_entries(x, w)
    assert [e.utterance_id for e in fused] == ["b", "a"]
    assert fused[0].score == 1.0
    assert fused[1].score == 2.0


def test_fuse_error_lists_at_most_ten_ids():
    x = [ScoreEntry(f"x{i:02d}", 1.0) for i in range(15)]
    with pytest.raises(ScoreFileError) as err:
        fuse_entries(x, [ScoreEntry("w", 1.0)])
    message = str(err.value)
    assert "15 only in the first file" in message
    assert "(5 more)" in message


def test_fuse_files_end_to_end(tmp_path):
    path_x = tmp_path / "x.tsv"
    path_w = tmp_path / "w.tsv"
    out = tmp_path / "fused.tsv"
    write_scores(path_x, [ScoreEntry("u1", 0.5), ScoreEntry("u2", -2.0)])
    write_scores(path_w, [ScoreEntry("u1", -1.0), ScoreEntry("u2", 1.5)])
    fuse_files(path_x, path_w, out)
    fused = read_scores(out)
    assert fused == [ScoreEntry("u1", -1.0), ScoreEntry("u2", -2.0)]
