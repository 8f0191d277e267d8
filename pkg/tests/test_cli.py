import pytest

from sspd.cli import main
from sspd.evaluation import read_trace, truth_path


SMALL_FLAGS = ["--k", "4096", "--lr", "2", "--lc", "64", "--design-n", "4000"]


def run(argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def trace_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("traces") / "demo.bin"
    run(["generate", "--out", path, "--n-super", 5, "--super-card", 2048, 2048,
         "--n-background", 500, "--background-card", 1, 8,
         "--n-pairs", 20000, "--slices", 1, "--gen-seed", 3])
    return path


def test_generate_writes_trace_and_truth(trace_file):
    assert trace_file.exists()
    assert truth_path(trace_file).exists()
    assert len(read_trace(trace_file)) == 20000


def test_generate_deterministic(tmp_path, trace_file):
    again = tmp_path / "again.bin"
    run(["generate", "--out", again, "--n-super", 5, "--super-card", 2048, 2048,
         "--n-background", 500, "--background-card", 1, 8,
         "--n-pairs", 20000, "--slices", 1, "--gen-seed", 3])
    assert again.read_bytes() == trace_file.read_bytes()


def test_detect_reports_planted_hosts(tmp_path, trace_file):
    out = tmp_path / "reports.csv"
    assert run(["detect", "--trace", trace_file, "--out", out] + SMALL_FLAGS) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# sspd report kind=discrete"
    assert any(l.startswith("# seed=0x5EED") for l in lines)
    assert any(l.startswith("# seav_bytes=32768") for l in lines)
    header_idx = lines.index("window_id,ip,estimated_cardinality,saturated")
    rows = lines[header_idx + 1:]
    assert len(rows) == 5  # the five planted supers
    for row in rows:
        wid, ip, est, sat = row.split(",")
        assert wid == "0" and sat == "0"
        assert float(est) > 1024 * 0.8
        assert ip.count(".") == 3


def test_detect_byte_identical_across_runs(tmp_path, trace_file):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(["detect", "--trace", trace_file, "--out", a] + SMALL_FLAGS)
    run(["detect", "--trace", trace_file, "--out", b] + SMALL_FLAGS)
    assert a.read_bytes() == b.read_bytes()


def test_detect_empty_trace(tmp_path):
    empty = tmp_path / "empty.bin"
    empty.write_bytes(b"")
    out = tmp_path / "empty.csv"
    assert run(["detect", "--trace", empty, "--out", out] + SMALL_FLAGS) == 0
    lines = out.read_text().splitlines()
    assert lines[-1] == "window_id,ip,estimated_cardinality,saturated"


def test_distsim_matches_detect_byte_for_byte(tmp_path, trace_file):
    single = tmp_path / "single.csv"
    sharded = tmp_path / "sharded.csv"
    frames = tmp_path / "frames"
    log = tmp_path / "merge_log.txt"
    run(["detect", "--trace", trace_file, "--out", single] + SMALL_FLAGS)
    assert run(["distsim", "--trace", trace_file, "--out", sharded,
                "--n-wp", 4, "--route", "round-robin",
                "--frames-dir", frames, "--merge-log", log] + SMALL_FLAGS) == 0
    assert single.read_bytes() == sharded.read_bytes()
    assert len(list(frames.iterdir())) == 8  # 4 points x 2 sketch kinds
    text = log.read_text()
    assert "seav_identical=True ldca_identical=True reports_identical=True" in text
    assert "# n_wp=4" in text


def test_distsim_writes_frames_by_default(tmp_path, trace_file):
    out = tmp_path / "d.csv"
    run(["distsim", "--trace", trace_file, "--out", out, "--n-wp", 2,
         "--merge-log", tmp_path / "log.txt"] + SMALL_FLAGS)
    frames = tmp_path / "d_frames"
    assert frames.is_dir() and len(list(frames.iterdir())) == 4


def test_distsim_eval_equals_detect_eval(tmp_path, trace_file):
    files = {}
    for name in ("detect", "distsim"):
        reports = tmp_path / f"{name}.csv"
        extra = ["--n-wp", 4, "--merge-log", tmp_path / "log.txt",
                 "--frames-dir", tmp_path / "frames"] if name == "distsim" else []
        run([name, "--trace", trace_file, "--out", reports] + extra + SMALL_FLAGS)
        scored = tmp_path / f"{name}_metrics.csv"
        run(["eval", "--reports", reports, "--truth", truth_path(trace_file),
             "--theta", 1024, "--out", scored])
        files[name] = [l for l in scored.read_text().splitlines()
                       if not l.startswith("#")]
    assert files["detect"] == files["distsim"]  # identical metric rows


def test_eval_scores_reports(tmp_path, trace_file):
    reports = tmp_path / "reports.csv"
    metrics_out = tmp_path / "metrics.csv"
    run(["detect", "--trace", trace_file, "--out", reports] + SMALL_FLAGS)
    assert run(["eval", "--reports", reports, "--truth", truth_path(trace_file),
                "--theta", 1024, "--out", metrics_out]) == 0
    lines = metrics_out.read_text().splitlines()
    assert "window_id,FPR,FNR,FTR,detected,truth" in lines
    row = lines[-1].split(",")
    assert row[0] == "0"
    assert float(row[1]) == 0.0 and float(row[2]) == 0.0 and float(row[3]) == 0.0
    assert row[4] == "5" and row[5] == "5"


def test_slide_command(tmp_path):
    trace = tmp_path / "slide.bin"
    run(["generate", "--out", trace, "--n-super", 1, "--super-card", 4096, 4096,
         "--n-background", 50, "--background-card", 1, 4,
         "--n-pairs", 5000, "--slices", 6, "--gen-seed", 5])
    out = tmp_path / "slide.csv"
    assert run(["slide", "--trace", trace, "--out", out, "--window-slices", 6,
                "--detect-every", 2] + SMALL_FLAGS) == 0
    lines = out.read_text().splitlines()
    rows = [l for l in lines if l and not l.startswith("#") and not l.startswith("window_id")]
    assert rows, "the planted heavy host never surfaced"
    assert {int(r.split(",")[0]) for r in rows} <= {0, 2, 4}


def test_plan_command(capsys):
    assert run(["plan", "--v", 8192, "--n", 1e6, "--k", 8192]) == 0
    out = capsys.readouterr().out
    assert "LR=8" in out and "LC=1024" in out
    assert "psu_k=" in out


def test_plan_unclamped(capsys):
    run(["plan", "--v", 8192, "--n", 1e6, "--k", 8192, "--max-rows", 100])
    assert "LR=47" in capsys.readouterr().out


def test_memory_budget_maps_to_v(tmp_path, trace_file):
    out = tmp_path / "budget.csv"
    run(["detect", "--trace", trace_file, "--out", out,
         "--memory-budget", 1048576, "--k", 4096, "--design-n", 4000])
    text = out.read_text()
    assert "# ldca_bytes=1048576" in text


def test_config_error_exit_code(tmp_path, trace_file, capsys):
    out = tmp_path / "x.csv"
    code = run(["detect", "--trace", trace_file, "--out", out, "--sr", 1] + SMALL_FLAGS)
    assert code == 2
    assert "error: config" in capsys.readouterr().err


def test_data_error_exit_code(tmp_path, capsys):
    out = tmp_path / "x.csv"
    code = run(["detect", "--trace", tmp_path / "missing.bin", "--out", out] + SMALL_FLAGS)
    assert code == 3
    assert "error: data" in capsys.readouterr().err


def test_truncated_trace_is_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"\x01" * 17)
    code = run(["detect", "--trace", bad, "--out", tmp_path / "x.csv"] + SMALL_FLAGS)
    assert code == 3


def test_internal_assertion_exit_code(monkeypatch, capsys):
    import sspd.cli as cli

    def exploding(args):
        raise AssertionError("wired through")

    monkeypatch.setattr(cli, "cmd_plan", exploding)
    code = run(["plan", "--v", 8192, "--n", 1e6, "--k", 8192])
    assert code == 4
    assert "error: internal" in capsys.readouterr().err
