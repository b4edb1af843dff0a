import json
import math

import pytest
from hypothesis import given, strategies as st

from mdinew.cli import main
from mdinew.config import Grid, expand, parse_call, parse_config
from mdinew.emit import emit, read_csv, to_json
from mdinew.errors import ConfigError
from mdinew.scenarios import run_scenario


def test_parse_defaults():
    cfg = parse_config("scenario = reduction-check\n")
    assert cfg.scenario == "reduction-check" and cfg.d_a == 2 and cfg.trials == 10
    assert cfg.eta_grid == [(1.0, 1.0)]


def test_parse_grid():
    cfg = parse_config("scenario = loophole-sweep\neta_minus = 0.5:1.0:6  # six points\n")
    assert cfg.eta_minus == pytest.approx((0.5, 0.6, 0.7, 0.8, 0.9, 1.0))
    assert len(cfg.eta_grid) == 6


@pytest.mark.parametrize(
    "text, needle",
    [
        ("scenario = bogus", "scenario"),
        ("scenario = reduction-check\ncolour = red", "colour"),
        ("scenario = reduction-check\ntrials = 3\ntrials = 4", "duplicate"),
        ("scenario = loophole-sweep\neta_minus = 0.5:1.0:1", "steps"),
        ("scenario = loophole-sweep\neta_minus = 0.5:1.0", "eta_minus"),
        ("scenario = loophole-sweep\neta_plus = 1.5", "eta_plus"),
        ("scenario = noise-sweep", "noise"),
        ("trials = 3", "scenario"),
        ("scenario = reduction-check\ntrials = 0", "trials"),
        ("scenario = reduction-check\nstate = werner(0.3)\nd_a = 3", "dims"),
        ("scenario = noise-sweep\nnoise = depolarizing(2, 0.1)", "dimension"),
        ("scenario = reduction-check\neffects = nowhere.txt", "effects"),
        ("scenario = reduction-check\njust words", "key = value"),
    ],
)
def test_parse_errors(text, needle):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert needle in str(err.value)


def test_spec_language():
    assert parse_call("werner(0.3)") == ("werner", [0.3])
    spec = parse_call("local_pair(depolarizing(2, 0.3), amplitude_damping(0.1))")
    assert spec[0] == "local_pair" and spec[1][0] == ("depolarizing", [2, 0.3])
    g = parse_call("0:1:3")
    assert isinstance(g, Grid) and g.values() == [0.0, 0.5, 1.0]
    assert [s[1][0] for s in expand(parse_call("werner(0.2:0.4:3)"))] == pytest.approx([0.2, 0.3, 0.4])


values = st.one_of(
    st.integers(-10**6, 10**6),
    st.floats(allow_nan=False, allow_infinity=False),
    st.booleans(),
    st.text(alphabet="abc xyz,\"(0.1)", max_size=12).filter(lambda s: s not in ("true", "false", "nan", "inf", "-inf") and not s.strip("-+0123456789.e ") == ""),
)


@given(st.lists(st.tuples(values, values), max_size=6))
def test_csv_roundtrip(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("emit") / "r.csv"
    records = [{"a": a, "b": b} for a, b in rows]
    emit(records, ["a", "b"], "csv", path)
    cols, back = read_csv(path)
    assert cols == ["a", "b"]
    assert back == records


def test_emit_formats():
    assert emit([], ["seed", "trial"]) == "seed,trial\n"
    text = emit([{"x": 0.1, "ok": True, "v": float("nan")}], ["x", "ok", "v"], "json")
    assert text.count("0.10000000000000001") == 1
    assert json.loads(text)[0]["ok"] is True and math.isnan(json.loads(text)[0]["v"])
    with pytest.raises(ValueError):
        emit([{"x": 1}], ["x", "y"])
    assert to_json([], ["x"]) == "[\n]\n"


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_cli_exit_codes(tmp_path, capsys):
    good = write(tmp_path, "good.cfg", "scenario = reduction-check\ntrials = 2\n")
    assert main(["validate", "--config", good]) == 0
    assert main(["validate", "--config", write(tmp_path, "bad.cfg", "scenario = bogus\n")]) == 1
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert main(["run", "--config", good, "--out", str(tmp_path / "no" / "dir" / "x.csv")]) == 2
    assert main(["list-scenarios"]) == 0
    assert "new-vs-ew" in capsys.readouterr().out


def test_cli_stdout_and_seed_override(tmp_path, capsys):
    cfg = write(tmp_path, "r.cfg", "scenario = separable-positivity\ntrials = 3\nseed = 5\n")
    assert main(["run", "--config", cfg, "--seed", "9"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("trial,seed,")
    assert len(out) == 4 and all(line.split(",")[1] == "9" for line in out[1:])


@pytest.mark.parametrize(
    "body",
    [
        "scenario = reduction-check\nstate = random\ntrials = 5\n",
        "scenario = loophole-sweep\nstate = random\neffects = random\neta_minus = 0.8:1:3\neta_plus = 0.7:1:2\ntrials = 2\n",
        "scenario = mc-events\nstate = werner(0.9)\neta_minus = 0.99\nnbar = 20000\ntrials = 2\n",
        "scenario = noise-sweep\nstate = random_separable\neffects = random\nnoise = xy_rotation(0:1:3)\ntrials = 3\n",
        "scenario = new-vs-ew\nstate = random\neffects = random\ntrials = 5\n",
    ],
)
def test_byte_identical_reruns(tmp_path, body):
    cfg = write(tmp_path, "c.cfg", body)
    for fmt in ("csv", "json"):
        a, b = tmp_path / f"a.{fmt}", tmp_path / f"b.{fmt}"
        assert main(["run", "--config", cfg, "--out", str(a), "--format", fmt]) == 0
        assert main(["run", "--config", cfg, "--out", str(b), "--format", fmt]) == 0
        assert a.read_bytes() == b.read_bytes()


def test_record_count_and_columns(tmp_path):
    cfg = parse_config("scenario = loophole-sweep\nstate = singlet\neta_minus = 0.5:1:6\neta_plus = 0.5:1:2\ntrials = 2\n")
    res = run_scenario(cfg)
    assert res.columns == ["eta_plus", "eta_minus", "C", "n_ideal", "n_measured", "bound_rhs", "margin", "certified", "seed", "trial"]
    assert len(res.records) == 2 * 12
    assert all(set(r) == set(res.columns) for r in res.records)


def test_scenario_state_defaults():
    assert parse_config("scenario = reduction-check").state == "random"
    assert parse_config("scenario = separable-positivity").state == "random_separable"
    assert parse_config("scenario = loophole-sweep").state == "singlet"
    with pytest.raises(ConfigError):
        parse_config("scenario = separable-positivity\nstate = singlet")
