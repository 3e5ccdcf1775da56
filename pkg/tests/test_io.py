import json

import numpy as np
import pytest

from mmspace import SpaceError, build_space, grid, heisenberg
from mmspace.io import (MAGIC, format_float, load_field, load_space, save_field, save_space,
                        write_csv)


@pytest.mark.parametrize("name", ["s.json", "s.mms"])
def test_space_round_trip(tmp_path, name):
    sp = heisenberg(3)
    back = load_space(save_space(sp, tmp_path / name))
    np.testing.assert_array_equal(back.dist, sp.dist)
    np.testing.assert_array_equal(back.weight, sp.weight)
    assert back.label == sp.label and back.a0 == sp.a0


def test_json_keeps_coordinates(tmp_path):
    sp = grid(2, 3)
    back = load_space(save_space(sp, tmp_path / "g.json"))
    np.testing.assert_array_equal(back.coords, sp.coords)
    data = json.loads((tmp_path / "g.json").read_text())
    assert {"label", "a0", "weights", "dist"} <= set(data)
    assert len(data["dist"]) == 81


def test_binary_layout(tmp_path):
    sp = build_space([[0, 2], [2, 0]], [0.25, 0.75], label="ab")
    raw = save_space(sp, tmp_path / "x.mms").read_bytes()
    assert raw[:4] == MAGIC
    n, a0, nlab = np.frombuffer(raw[4:12], "<u8")[0], np.frombuffer(raw[12:20], "<f8")[0], \
        np.frombuffer(raw[20:28], "<u8")[0]
    assert (n, a0, nlab) == (2, 1.0, 2)
    assert raw[28:30] == b"ab"
    np.testing.assert_array_equal(np.frombuffer(raw[30:46], "<f8"), [0.25, 0.75])
    np.testing.assert_array_equal(np.frombuffer(raw[46:], "<f8"), [0, 2, 2, 0])


def test_truncated_binary_rejected(tmp_path):
    p = save_space(grid(1, 4), tmp_path / "x.mms")
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(SpaceError, match="expected"):
        load_space(p)


def test_missing_files_name_the_path(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.json"):
        load_space(tmp_path / "nope.json")
    with pytest.raises(FileNotFoundError, match="f.json"):
        load_field(tmp_path / "f.json")


def test_field_round_trip(tmp_path):
    v = np.random.default_rng(0).standard_normal(7)
    np.testing.assert_array_equal(load_field(save_field(v, tmp_path / "f.json")), v)
    (tmp_path / "bare.json").write_text("[1, 2.5]")
    np.testing.assert_array_equal(load_field(tmp_path / "bare.json"), [1.0, 2.5])


def test_csv_floats_round_trip(tmp_path):
    vals = np.random.default_rng(1).standard_normal(50) * 1e-7
    path = write_csv(tmp_path / "v.csv", ["i", "v"], zip(range(50), vals))
    lines = path.read_text().splitlines()
    assert lines[0] == "i,v"
    back = np.array([float(l.split(",")[1]) for l in lines[1:]])
    np.testing.assert_array_equal(back, vals)
    assert format_float(0.1) == "0.10000000000000001"
