import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from whdloc.io import (
    PGM_MAXVAL,
    ParseError,
    RunConfig,
    format_pgm,
    format_points,
    parse_pgm,
    parse_points,
    parse_sweep,
    read_points,
    write_points,
)
from whdloc.postprocess import ThresholdMethod
from whdloc.whd import ScaleTransform

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(st.lists(st.tuples(finite, finite), max_size=20))
def test_points_roundtrip_exact(pts):
    back = parse_points(format_points(pts))
    assert back.shape == (len(pts), 2)
    assert [tuple(r) for r in back] == [tuple(map(float, p)) for p in pts]


def test_points_format():
    text = format_points([(1.5, 2.0), (3.0, 4.25)])
    assert text == "row,col\n1.5,2.0\n3.0,4.25\n"
    assert parse_points("row,col\n").shape == (0, 2)


def test_points_file(tmp_path):
    path = tmp_path / "p.csv"
    write_points(path, [(0.1, 0.2)])
    assert path.read_bytes() == b"row,col\n0.1,0.2\n"
    assert read_points(path).tolist() == [[0.1, 0.2]]


@pytest.mark.parametrize(
    "text", ["x,y\n1,2\n", "row,col\n1\n", "row,col\n1,abc\n", "row,col\n1,nan\n", ""]
)
def test_points_parse_errors(text):
    with pytest.raises(ParseError):
        parse_points(text)


@given(arrays(np.float64, st.tuples(st.integers(1, 9), st.integers(1, 40)), elements=st.floats(0, 1)))
def test_pgm_roundtrip(p):
    back = parse_pgm(format_pgm(p))
    assert back.shape == p.shape
    assert np.max(np.abs(back - p)) <= 1 / (2 * PGM_MAXVAL) + 1e-15


def test_pgm_layout():
    text = format_pgm(np.array([[0.0, 1.0, 0.5]]))
    assert text == "P2\n3 1\n65535\n0 65535 32768\n"
    assert all(len(line) <= 70 for line in format_pgm(np.ones((2, 40))).splitlines())


def test_pgm_comments_and_errors():
    assert parse_pgm("P2 # comment\n2 1\n# another\n255\n0 255\n").tolist() == [[0.0, 1.0]]
    for bad in ("P5\n1 1\n255\n0\n", "P2\n2 2\n255\n0 1 2\n", "P2\n1 1\n255\n300\n", "P2\n1 1\n"):
        with pytest.raises(ParseError):
            parse_pgm(bad)


def test_sweep_parse():
    assert parse_sweep("0:15:1") == [float(i) for i in range(16)]
    assert parse_sweep("1:2:0.5") == [1.0, 1.5, 2.0]
    with pytest.raises(ParseError):
        parse_sweep("0:1")


def test_config_defaults_and_overrides():
    cfg = RunConfig()
    assert cfg.alpha == -1 and cfg.epsilon == 1e-6 and cfg.radius == 5
    cfg = RunConfig.from_text("# comment\nalpha = -2\nepsilon=0\nmethod = fixed:0.4\nscale = 2,2\nuse_adam_moments = no\n")
    assert cfg.alpha == -2 and cfg.epsilon == 0
    assert cfg.method == ThresholdMethod.fixed(0.4)
    assert cfg.scale == ScaleTransform(2, 2)
    assert cfg.use_adam_moments is False
    cfg2 = cfg.override(alpha="min", epsilon=None, radius=3)
    assert cfg2.alpha == -math.inf and cfg2.epsilon == 0 and cfg2.radius == 3


def test_config_roundtrip():
    cfg = RunConfig(alpha=-math.inf, scale=ScaleTransform(2, 0.5), seed=9, method=ThresholdMethod("otsu"))
    assert RunConfig.from_text(cfg.to_text()) == cfg


@pytest.mark.parametrize("text", ["bogus = 1\n", "alpha\n", "alpha = 0.5\n", "epsilon = x\n", "method = median\n"])
def test_config_rejects(text):
    with pytest.raises(ParseError):
        RunConfig.from_text(text)
