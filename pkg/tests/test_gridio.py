import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ptlab.gridio import GridFormatError, dumps, loads, read_lgrid, to_pgm, write_lgrid
from ptlab.lattice import LatticeSet, ball_set


@pytest.mark.parametrize("d", [1, 2, 3])
def test_roundtrip_byte_identical(tmp_path, d):
    S = ball_set(np.zeros(d), 0.3, 0.1, d)
    path = tmp_path / "s.lgrid"
    write_lgrid(S, path)
    back = read_lgrid(path)
    assert back == S
    assert dumps(back) == path.read_text()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(-9, 9), st.integers(-9, 9)), min_size=1, max_size=30, unique=True),
       st.sampled_from([1.0, 0.5, 1 / 3, 0.025]))
def test_roundtrip_property(cells, h):
    S = LatticeSet.from_cells(cells, h, 2)
    text = dumps(S)
    assert dumps(loads(text)) == text
    assert loads(text).spacing == h


@pytest.mark.parametrize("text", [
    "",
    "not json\n01\n",
    '{"dim": 2, "shape": [1, 2], "spacing": 1.0}\n01\n',
    '{"dim": 2, "shape": [2, 2], "spacing": 1.0, "origin": [0, 0]}\n01\n',
    '{"dim": 2, "shape": [1, 2], "spacing": 1.0, "origin": [0, 0]}\n0x\n',
    '{"format": "LGRID v9", "dim": 1, "shape": [1], "spacing": 1.0, "origin": [0]}\n1\n',
])
def test_malformed_rejected(text):
    with pytest.raises(GridFormatError):
        loads(text)


def test_pgm_header_and_pixels():
    S = LatticeSet(np.array([[True, False]]), 1.0)
    assert to_pgm(S) == "P2\n2 1\n255\n0 255\n"
