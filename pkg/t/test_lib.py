import os
from concurrent.futures import ThreadPoolExecutor

import pytest

from liblayoutforge import lib


def test_write_file_text_and_bytes(tmp_path):
    target = tmp_path / "sub" / "page.txt"
    lib.write_file(str(target), "কলম বই\n")
    assert target.read_text(encoding="utf-8") == "কলম বই\n"
    lib.write_file(str(target), b"\x00\x01")
    assert target.read_bytes() == b"\x00\x01"
    assert os.listdir(tmp_path / "sub") == ["page.txt"]


def test_concurrent_writers_do_not_collide(tmp_path):
    target = str(tmp_path / "layout.json")
    bodies = [(b"%d" % idx) * 20000 for idx in range(16)]
    with ThreadPoolExecutor(max_workers=8) as pool:
        list(pool.map(lambda body: lib.write_file(target, body), bodies))
    assert (tmp_path / "layout.json").read_bytes() in bodies
    assert os.listdir(tmp_path) == ["layout.json"]


def test_failed_write_leaves_no_partial(tmp_path):
    target = tmp_path / "taken"
    target.mkdir()
    (target / "inner").write_text("x", encoding="utf-8")
    with pytest.raises(RuntimeError):
        lib.write_file(str(target), b"data")
    assert sorted(os.listdir(tmp_path)) == ["taken"]
