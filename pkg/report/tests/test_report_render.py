import os

from masched_report.cli import main
from masched_report.frame import load_frame
from masched_report.render import render

from report_fixtures import row, write_csv


def test_render_emits_expected_files(tmp_path, fixture_rows):
    csv_path = tmp_path / "r.csv"
    write_csv(csv_path, fixture_rows)
    out = tmp_path / "figs"
    result = render(load_frame(str(csv_path)), str(out))
    assert result.files == [
        "loads_fo.svg", "loads_po.svg", "strategy_vs_tree.svg", "summary.md"
    ]
    for name in result.files:
        assert (out / name).stat().st_size > 0


def test_every_row_in_exactly_one_chart(tmp_path, fixture_rows):
    csv_path = tmp_path / "r.csv"
    write_csv(csv_path, fixture_rows)
    frame = load_frame(str(csv_path))
    result = render(frame, str(tmp_path / "figs"))
    assert len(result.chart_of_row) == len(frame.rows)
    for r in frame.rows:
        assert result.chart_of_row[id(r)] == f"loads_{r.mode}.svg"


def test_single_row_csv_renders_one_rectangle(tmp_path):
    csv_path = tmp_path / "one.csv"
    write_csv(csv_path, [row(5, "lss-small", "max", "fo", 43.4, 0.3)])
    out = tmp_path / "figs"
    result = render(load_frame(str(csv_path)), str(out))
    assert "loads_fo.svg" in result.files
    assert "loads_po.svg" not in result.files
    assert result.dashed_groups == []


def test_inverted_pair_rendered_dashed_empty(tmp_path, fixture_rows):
    csv_path = tmp_path / "r.csv"
    write_csv(csv_path, fixture_rows)
    out = tmp_path / "figs"
    result = render(load_frame(str(csv_path)), str(out))
    assert result.dashed_groups == [("35", "po", "qlearn-small")]
    po_svg = (out / "loads_po.svg").read_text()
    fo_svg = (out / "loads_fo.svg").read_text()
    assert "stroke-dasharray" in po_svg
    assert "stroke-dasharray" not in fo_svg


def test_render_deterministic(tmp_path, fixture_rows):
    csv_path = tmp_path / "r.csv"
    write_csv(csv_path, fixture_rows)
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    render(load_frame(str(csv_path)), str(out1))
    render(load_frame(str(csv_path)), str(out2))
    for name in os.listdir(out1):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_cli_happy_path(tmp_path, fixture_rows, capsys):
    csv_path = tmp_path / "r.csv"
    write_csv(csv_path, fixture_rows)
    assert main(["render", "--csv", str(csv_path),
                 "--out", str(tmp_path / "figs")]) == 0
    out = capsys.readouterr().out
    assert "summary.md" in out


def test_cli_error_paths(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["render", "--csv", str(empty),
                 "--out", str(tmp_path / "f")]) == 2
    assert "no data" in capsys.readouterr().err
    bad = tmp_path / "bad.csv"
    bad.write_text("model,x\nmine,1\n")
    assert main(["render", "--csv", str(bad), "--out", str(tmp_path / "f")]) == 2
    assert main(["render", "--csv", str(tmp_path / "missing.csv"),
                 "--out", str(tmp_path / "f")]) == 2
    assert main([]) == 1
    assert main(["bogus"]) == 1
