import pytest

from masched_report.frame import ReportError, load_frame, overlap_report

from report_fixtures import row, write_csv


def test_load_and_types(tmp_path, fixture_rows):
    path = tmp_path / "r.csv"
    write_csv(path, fixture_rows)
    frame = load_frame(str(path))
    assert len(frame.rows) == len(fixture_rows)
    assert frame.modes == ["fo", "po"]
    assert frame.instances("fo") == ["5", "9", "35"]  # numeric order
    assert frame.policies("fo") == ["lss-small"]
    first = frame.rows[0]
    assert first.mean == 35.5 and first.table_rows is None
    lss = frame.group("5", "fo", "lss-small")
    assert set(lss) == {"max", "min"}
    assert lss["max"].tree_nodes == 3
    assert frame.uniform("5", "fo").mean == 35.5
    assert frame.uniform("5", "xx") is None


def test_schema_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("model,whatever\nmine,1\n")
    with pytest.raises(ReportError, match="schema mismatch"):
        load_frame(str(path))


def test_empty_inputs_rejected(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(ReportError, match="no data"):
        load_frame(str(path))
    write_csv(path, [])  # header only
    with pytest.raises(ReportError, match="no data"):
        load_frame(str(path))


def test_bad_cell_rejected(tmp_path, fixture_rows):
    rows = list(fixture_rows)
    rows[0] = dict(rows[0], mean="not-a-number")
    path = tmp_path / "r.csv"
    write_csv(path, rows)
    with pytest.raises(ReportError, match="bad row"):
        load_frame(str(path))


def test_interval_relations(tmp_path, fixture_rows):
    path = tmp_path / "r.csv"
    write_csv(path, fixture_rows)
    frame = load_frame(str(path))
    top = frame.group("5", "fo", "lss-small")["max"]
    uniform = frame.uniform("5", "fo")
    assert top.disjoint_above(uniform)
    assert not uniform.disjoint_above(top)
    assert frame.group("5", "fo", "lss-small")["min"].disjoint_below(uniform)


def test_overlap_report_order_and_flags(tmp_path, fixture_rows):
    path = tmp_path / "r.csv"
    write_csv(path, fixture_rows)
    entries = overlap_report(load_frame(str(path)))
    keys = [(e.instance, e.mode, e.policy) for e in entries]
    assert keys == [
        ("5", "fo", "lss-small"), ("9", "fo", "lss-small"),
        ("35", "fo", "lss-small"),
        ("5", "po", "qlearn-small"), ("9", "po", "qlearn-small"),
        ("35", "po", "qlearn-small"),
    ]
    inverted = [e for e in entries if e.inverted]
    assert [(e.instance, e.mode) for e in inverted] == [("35", "po")]


def test_missing_direction_tolerated(tmp_path):
    path = tmp_path / "r.csv"
    write_csv(path, [
        row(5, "uniform", "none", "fo", 35.5, 0.3),
        row(5, "lss-small", "max", "fo", 43.4, 0.3),
    ])
    entries = overlap_report(load_frame(str(path)))
    assert len(entries) == 1
    assert entries[0].max_above_uniform is True
    assert entries[0].min_below_uniform is None
    assert not entries[0].inverted
