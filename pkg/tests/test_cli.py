import subprocess
import sys

import numpy as np
import pytest

from stta import io, rel_error, to_dense
from stta.bench import read_csv
from stta.cli import main


def run(*args):
    return main([str(a) for a in args])


def test_gen_and_approx(tmp_path, capsys):
    src, out = tmp_path / "h.bin", tmp_path / "a.tt"
    assert run("gen", "hilbert", "-o", src, "--param", "d=4", "--param", "n=5") == 0
    assert run("approx", src, "-o", out, "--rank", "3", "--seed", "0x1F") == 0
    text = capsys.readouterr().out
    assert "relative error" in text
    approx = io.load(out)
    assert approx.ranks == (3, 3, 3)
    from stta import tt_svd

    assert rel_error(io.load(src), approx) < 10 * rel_error(io.load(src), tt_svd(io.load(src), 3))


def test_sketch_then_assemble_equals_approx(tmp_path):
    src = tmp_path / "t.bin"
    run("gen", "decaying-tt", "-o", src, "--param", "d=4", "--param", "n=6", "--param", "r=4", "--seed", "3")
    common = ["--rank", "2", "--drm-kind", "tt", "--seed", "9"]
    assert run("sketch", src, "-o", tmp_path / "s.sk", *common) == 0
    assert run("assemble", tmp_path / "s.sk", "-o", tmp_path / "a.tt") == 0
    assert run("approx", src, "-o", tmp_path / "b.tt", "--no-error", *common) == 0
    for x, y in zip(io.load(tmp_path / "a.tt").cores, io.load(tmp_path / "b.tt").cores):
        np.testing.assert_array_equal(x, y)


def test_streaming_accumulation(tmp_path):
    base = tmp_path / "sum"
    run("gen", "sum-of-tt", "-o", base, "--param", "count=3", "--param", "d=4", "--param", "n=5")
    parts = [f"{base}.{k}" for k in range(3)]
    opts = ["--left-ranks", "6,6,6", "--right-ranks", "3,3,3", "--seed", "4"]
    run("sketch", parts[0], "-o", tmp_path / "acc.sk", *opts)
    for p in parts[1:]:
        assert run("sketch", p, "-o", tmp_path / "acc.sk", "--add", tmp_path / "acc.sk", *opts) == 0
    run("sketch", *parts, "-o", tmp_path / "all.sk", *opts)
    a, b = io.load(tmp_path / "acc.sk"), io.load(tmp_path / "all.sk")
    for x, y in zip(a.psi + a.omega, b.psi + b.omega):
        np.testing.assert_allclose(x, y, rtol=1e-13, atol=1e-15 * np.abs(y).max())


def test_config_file_and_override(tmp_path):
    src = tmp_path / "d.bin"
    run("gen", "sqrt-sum", "-o", src, "--param", "d=3", "--param", "n=6")
    cfg = tmp_path / "c.cfg"
    cfg.write_text("rank = 2\nseed = 5\noversampling = r+3\n")
    assert run("sketch", src, "-o", tmp_path / "s.sk", "--config", cfg) == 0
    assert io.load(tmp_path / "s.sk").left_ranks == (5, 5)
    assert run("sketch", src, "-o", tmp_path / "s2.sk", "--config", cfg, "--rank", "3") == 0
    assert io.load(tmp_path / "s2.sk").left_ranks == (6, 6)


def test_sparse_input(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("3 3 3 3\n1 1 1 1.0\n3 2 1 -2.0\n")
    assert run("approx", p, "-o", tmp_path / "a.tt", "--rank", "2") == 0
    assert rel_error(io.load(p), io.load(tmp_path / "a.tt")) < 1e-10


def test_bench_spec_and_plotdata(tmp_path, capsys):
    spec = tmp_path / "e.spec"
    spec.write_text("recipe = hilbert\nd = 4\nn = 4\nmethods = tt-svd, stta\nranks = 2..3\ntrials = 2\n")
    csv_path = tmp_path / "r.csv"
    assert run("bench", spec, "-o", csv_path, "--plot-data", tmp_path / "p.dat") == 0
    assert "median" in capsys.readouterr().out
    assert len(read_csv(csv_path)) == 2 + 4
    assert run("plotdata", csv_path, "-o", tmp_path / "q.dat") == 0
    assert (tmp_path / "q.dat").read_text() == (tmp_path / "p.dat").read_text()


def test_bench_preset_override(tmp_path):
    assert run("bench", "--preset", "hilbert", "--trials", "1", "-o", tmp_path / "h.csv") == 0
    recs = read_csv(tmp_path / "h.csv")
    assert {r.trial for r in recs} == {0}


@pytest.mark.parametrize("argv", [
    ["assemble", "missing.sk", "-o", "x"],
    ["approx", "missing.bin", "-o", "x", "--rank", "2"],
    ["bench", "-o", "x.csv"],
])
def test_errors_exit_nonzero(tmp_path, argv, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 1
    assert "error" in capsys.readouterr().err


def test_missing_ranks(tmp_path, capsys):
    src = tmp_path / "d.bin"
    run("gen", "hilbert", "-o", src, "--param", "d=3", "--param", "n=3")
    assert run("sketch", src, "-o", tmp_path / "s.sk") == 1
    assert "rank" in capsys.readouterr().err


def test_assemble_rejects_tensor(tmp_path):
    src = tmp_path / "d.bin"
    run("gen", "hilbert", "-o", src, "--param", "d=3", "--param", "n=3")
    assert run("assemble", src, "-o", tmp_path / "x") == 1


def test_gen_cp_written_dense(tmp_path):
    out = tmp_path / "cp.bin"
    assert run("gen", "random-cp", "-o", out, "--param", "N=5", "--param", "d=3", "--param", "n=4") == 0
    assert io.load(out).shape == (4, 4, 4)


def test_entry_point():
    res = subprocess.run([sys.executable, "-m", "stta.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "sketch" in res.stdout
