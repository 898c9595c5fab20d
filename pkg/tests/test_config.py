import pytest
from hypothesis import given, strategies as st

from culvert_select.config import build_config, parse_config, parse_text
from culvert_select.errors import ParseError
from culvert_select.selection import SelectionConfig


def write(tmp_path, text):
    p = tmp_path / "cfg.txt"
    p.write_text(text)
    return p


def test_empty_file_gives_defaults(tmp_path):
    c = parse_config(write(tmp_path, ""))
    assert (c.t_flow, c.t_baseline, c.alpha, c.t_angle) == (5.0, 10.0, 5.0, 15.0)
    assert c == SelectionConfig()


def test_flag_overrides_file(tmp_path):
    p = write(tmp_path, "t_angle = 12\n")
    assert parse_config(p).t_angle == 12.0
    assert parse_config(p, {"t_angle": 20.0}).t_angle == 20.0
    assert parse_config(p, {"t_angle": None}).t_angle == 12.0


def test_syntax(tmp_path):
    text = """
    # thresholds
    [gates]
    t_flow = 3.5   # px
    strategy = "first-last"
    beta_normalized = yes
    seed = 7
    stride = 2
    """
    c = parse_config(write(tmp_path, text))
    assert c.t_flow == 3.5 and c.strategy == "first_last" and c.beta_normalized
    assert c.rng_seed == 7 and c.frame_stride == 2


@pytest.mark.parametrize("text, line, field", [
    ("t_baseline = -1\n", 1, "t_baseline"),
    ("\nfoo = 1\n", 2, "foo"),
    ("t_flow = abc\n", 1, "t_flow"),
    ("t_flow =\n", 1, "t_flow"),
    ("alpha = \"5\"\n", 1, "alpha"),
])
def test_parse_errors(tmp_path, text, line, field):
    with pytest.raises(ParseError) as info:
        parse_config(write(tmp_path, text))
    assert info.value.line == line and info.value.field == field


def test_garbage_line_and_missing_file(tmp_path):
    with pytest.raises(ParseError) as info:
        parse_text("just words\n")
    assert info.value.line == 1
    with pytest.raises(ParseError):
        parse_config(tmp_path / "nope.txt")


def test_invalid_override_is_parse_error():
    with pytest.raises(ParseError):
        build_config({}, {"alpha": 0.1})


@given(st.floats(0.1, 100), st.floats(0.1, 100), st.floats(1, 10), st.floats(0.1, 90), st.integers(0, 2**31))
def test_roundtrip_through_text(t_flow, t_baseline, alpha, t_angle, seed):
    c = SelectionConfig(t_flow=t_flow, t_baseline=t_baseline, alpha=alpha, t_angle=t_angle, rng_seed=seed)
    text = "\n".join(f"{k} = {v!r}" if isinstance(v, str) else f"{k} = {v}" for k, v in c.to_json().items())
    assert build_config(parse_text(text)) == c
