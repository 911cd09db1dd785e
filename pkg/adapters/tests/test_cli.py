import numpy as np

from posebench.ingest import read_matches, read_pfm

from posebench_adapters.cli import main
from posebench_adapters.stubs import checkerboard


def test_export_matches_cli(tmp_path, capsys):
    img = checkerboard(256, 192, 32)
    a = tmp_path / "left.npy"
    b = tmp_path / "right.npy"
    np.save(a, img)
    np.save(b, img)
    rc = main([
        "export-matches", str(a), str(b),
        "--matcher", "stub-checkerboard", "--output", str(tmp_path / "m"),
        "--long-side", "128",
    ])
    assert rc == 0
    out = capsys.readouterr().out.strip()
    mf = read_matches(out)
    assert len(mf) > 0
    assert (mf.name1, mf.name2) == ("left", "right")


def test_export_depth_cli(tmp_path, capsys):
    img = np.zeros((60, 80), dtype=np.float32)
    p = tmp_path / "img.npy"
    np.save(p, img)
    rc = main(["export-depth", str(p), "--mde", "stub-constant", "--output", str(tmp_path / "d")])
    assert rc == 0
    out = capsys.readouterr().out.strip()
    dm = read_pfm(out)
    assert (dm.width, dm.height) == (80, 60)


def test_failing_tools_exit_nonzero(tmp_path):
    img = np.zeros((8, 8), dtype=np.float32)
    p = tmp_path / "i.npy"
    np.save(p, img)
    rc = main(["export-matches", str(p), str(p), "--matcher", "stub-failing",
               "--output", str(tmp_path / "m")])
    assert rc == 1
    rc = main(["export-depth", str(p), "--mde", "stub-failing-mde",
               "--output", str(tmp_path / "d")])
    assert rc == 1
