import io

import pytest

from adpnav.cli import main

SMALL = "worlds: {width: 20, height: 20}\nenv: {laser_pool: 10, reward: {max_episode_steps: 20}}\n"


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "cfg.yaml"
    p.write_text(SMALL)
    return str(p)


def run(capsys, *argv, stdin=None, monkeypatch=None):
    if stdin is not None:
        monkeypatch.setattr("sys.stdin", io.StringIO(stdin))
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_score(capsys, monkeypatch):
    code, out, _ = run(capsys, "score", stdin="success,AT,OT\n1,10,5\n0,3,5\n1,40,5\n", monkeypatch=monkeypatch)
    assert code == 0
    assert out.split() == ["0.5", "0.0", "0.125"]


def test_score_bad_row(capsys, monkeypatch):
    code, _, err = run(capsys, "score", stdin="1,2\n", monkeypatch=monkeypatch)
    assert code == 2 and "expected" in err
    code, _, _ = run(capsys, "score", stdin="1,-2,3\n", monkeypatch=monkeypatch)
    assert code == 2


def test_gen_worlds_reproducible(tmp_path, capsys, cfg):
    for d in ("a", "b"):
        assert run(capsys, "gen-worlds", "--config", cfg, "--seed", "4", "--count", "3", "--out", str(tmp_path / d))[0] == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files == ["world_000.world", "world_001.world", "world_002.world"]
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_eval_and_bench(tmp_path, capsys, cfg):
    wdir = tmp_path / "w"
    run(capsys, "gen-worlds", "--config", cfg, "--count", "2", "--out", str(wdir))
    code, out, _ = run(capsys, "eval", "--config", cfg, "--worlds", str(wdir))
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("world_seed,success") and len(lines) == 3
    report = tmp_path / "r.csv"
    code, _, _ = run(capsys, "bench", "--config", cfg, "--worlds", str(wdir), "--runs", "3", "--trim", "1",
                     "--out", str(report))
    assert code == 0
    rows = report.read_text().splitlines()
    assert len(rows) == 4 and rows[-1].startswith("ALL,ddp-dwa")


def test_render(tmp_path, capsys, cfg):
    wdir = tmp_path / "w"
    run(capsys, "gen-worlds", "--config", cfg, "--count", "1", "--out", str(wdir))
    code, out, _ = run(capsys, "render", "--world", str(wdir / "world_000.world"))
    assert code == 0 and out.startswith("<svg")


def test_exit_codes(tmp_path, capsys):
    assert run(capsys)[0] == 2
    assert run(capsys, "bench", "--method", "adp")[0] == 2
    assert run(capsys, "eval", "--worlds", str(tmp_path / "missing.world"))[0] == 1
    assert run(capsys, "eval", "--worlds", str(tmp_path))[0] == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("nope: 1\n")
    assert run(capsys, "gen-worlds", "--config", str(bad))[0] == 1
