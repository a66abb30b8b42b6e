from wef.channels import channel_name_for
from wef.generator import GenConfig, generate_lists
from wef.pipeline import Pipeline
from wef.plotting import figure_size, plot_report
from wef.stats import ConvergenceTracker, Counters, snapshot


def _run():
    chans = [channel_name_for(c) for c in ("en", "de", "ja")]
    tracker = ConvergenceTracker(sample_interval=1.0, window=5, epsilon=0.05)
    lines, _ = generate_lists(GenConfig.uniform(2, chans, 2000, interval_ms=50))
    snap = Pipeline(chans, tracker=tracker).run_sync(lines)
    return snap, tracker.log


def test_png_written_and_stable(tmp_path):
    snap, samples = _run()
    a = plot_report(snap, samples, tmp_path / "a.png")
    b = plot_report(snap, samples, tmp_path / "b.png")
    assert a.read_bytes()[:4] == b"\x89PNG"
    assert a.read_bytes() == b.read_bytes()


def test_svg_by_suffix(tmp_path):
    snap, samples = _run()
    out = plot_report(snap, samples, tmp_path / "r.svg")
    assert b"<svg" in out.read_bytes()[:500]


def test_empty_report_still_renders(tmp_path):
    out = plot_report(snapshot(Counters(), 288, 0), [], tmp_path / "e.png")
    assert out.stat().st_size > 0


def test_figure_size_is_golden():
    w, h = figure_size(10.0)
    assert abs(w / h - 1.6180339887) < 1e-9
