import math

import numpy as np
import pytest

from mdinew.config import parse_config
from mdinew.protocol import build_table, i_alpha, n_phi
from mdinew.quantum import make_rng, write_state
from mdinew.scenarios import effects_for_trial, run_scenario, witness_bundle
from mdinew.witness import InputBasis


def run(text, base_dir="."):
    return run_scenario(parse_config(text, base_dir))


def test_reduction_check_errors_small():
    res = run("scenario = reduction-check\nstate = random\ntrials = 50\n")
    assert len(res.records) == 50
    assert max(r["err_i"] for r in res.records) <= 1e-9
    assert max(r["err_n"] for r in res.records) <= 1e-9
    assert all(r["p11_mm"] == pytest.approx(1 / 16) for r in res.records)


def test_reduction_check_singlet_anchor():
    r = run("scenario = reduction-check\nstate = singlet\ntrials = 1\n").records[0]
    assert r["i_alpha"] == pytest.approx(-1 / 8) and r["n_phi"] == pytest.approx(-1 / 4)


def test_separable_positivity_rows():
    res = run("scenario = separable-positivity\nstate = random_separable\neffects = random\ntrials = 200\n")
    assert all(r["n_nonnegative"] for r in res.records)
    assert min(r["f_direct"] for r in res.records) >= -1e-9


def test_loophole_sweep_singlet_grid():
    res = run("scenario = loophole-sweep\neta_minus = 0.5:1.0:6\neta_plus = 0.5:1.0:6\ntrials = 1\n")
    assert len(res.records) == 36
    assert res.summary["max_identity_residual"] <= 1e-10
    for r in res.records:
        c = r["C"]
        in_domain = c / 16 + (1 - c) / 4 > 1e-12 / 2
        if in_domain:
            assert r["certified"] and r["margin"] > 0
        else:
            # outside the bound's domain the row is an error row, never a verdict
            assert not r["certified"] and math.isnan(r["margin"])
    assert res.summary["errors"] == sum(math.isnan(r["margin"]) for r in res.records)


def test_mc_events_consistent():
    res = run("scenario = mc-events\nstate = random\neffects = random\neta_plus = 0.9\neta_minus = 1.0\nnbar = 1000000\ntrials = 5\n")
    assert res.summary["errors"] == 0
    assert res.summary["fraction_within_5sigma"] == 1.0


def test_noise_sweep_default_channel_is_identity():
    res = run("scenario = noise-sweep\nnoise = none\nstate = random_separable\neffects = random\ntrials = 20\n")
    assert {r["channel"] for r in res.records} == {"identity(4)"}
    assert res.summary["i_negative"] == 0 and res.summary["n_le_i_violations"] == 0


def test_noise_sweep_entangling_channel_misdetects():
    res = run("scenario = noise-sweep\nnoise = xy_rotation(0:1.5707963267948966:7)\nstate = random_separable\n"
              "effects = random\ntrials = 200\n")
    assert res.summary["i_negative"] > 0
    assert res.summary["implication_violations"] == 0 and res.summary["n_le_i_violations"] == 0


def test_new_vs_ew_werner_summary():
    res = run("scenario = new-vs-ew\nstate = werner(0.2:0.4:11)\neffects = max_entangled\ntrials = 20\n")
    summary = res.records[-1]
    assert summary["kind"] == "summary" and summary["state"] == "none found"
    assert len(res.records) == 11 * 20 + 1


def test_new_vs_ew_random_gap_is_real():
    cfg = parse_config("scenario = new-vs-ew\nstate = random_pure\neffects = max_entangled\ntrials = 300\n")
    res = run_scenario(cfg)
    hits = [r for r in res.records if r["kind"] == "trial" and r["gap"]]
    assert res.records[-1]["state"] == (f"{len(hits)} found" if hits else "none found")
    assert hits
    for r in hits:
        assert r["i_alpha"] >= 0 > r["n_phi"]


def test_state_and_effect_files(tmp_path):
    from mdinew.quantum import named_state

    write_state(tmp_path / "rho.state", named_state("werner", 0.8))
    e = np.eye(4)[[0, 3]].T @ np.eye(4)[[0, 3]] / 1.0
    lines = ["effects 2 2"] + [f"{float(z.real)!r} {float(z.imag)!r}" for z in np.ravel(e)] * 2
    (tmp_path / "eff.txt").write_text("\n".join(lines) + "\n")
    res = run("scenario = reduction-check\nstate = rho.state\neffects = eff.txt\ntrials = 1\n", tmp_path)
    assert not res.records[0]["error"]


def test_trial_streams_independent_of_trial_count():
    a = run("scenario = separable-positivity\nstate = random_separable\neffects = random\ntrials = 3\n")
    b = run("scenario = separable-positivity\nstate = random_separable\neffects = random\ntrials = 6\n")
    assert a.records == b.records[:3]
