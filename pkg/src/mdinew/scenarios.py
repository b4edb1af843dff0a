"""Seeded experiment scenarios.

Every trial draws its randomness from ``make_rng(seed, trial, grid_index)``,
so results do not depend on evaluation order.  A module error inside a trial
turns that trial's row into an error row instead of aborting the run.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RANDOM_STATES, ScenarioConfig, build_channel, build_state, expand, format_spec, parse_call
from .errors import DegenerateDenominatorError, InfeasibleCorruptionError, NotNPTError
from .loophole import (
    EfficiencyModel,
    binomial_sigma,
    certify,
    corrupt_table,
    simulate_table,
)
from .noise import compare_ew_new, read_channel
from .protocol import build_table, i_alpha, max_entangled_effect, n_phi
from .quantum import (
    DensityMatrix,
    PovmEffect,
    PureState,
    make_rng,
    min_pt_eigenvalue,
    parse_complex_lines,
    partial_transpose,
    random_density,
    random_dichotomic_effect,
    random_pure,
    random_separable,
    read_state,
)
from .witness import (
    InputBasis,
    WitnessBundle,
    bundle_from_parts,
    linear_value,
    make_bundle,
    nonlinear_value,
    resolve_psi,
    witness_from_npt,
)

log = logging.getLogger(__name__)

TRIAL_ERRORS = (NotNPTError, DegenerateDenominatorError, InfeasibleCorruptionError, ValueError, AssertionError)


@dataclass
class RunResult:
    columns: list[str]
    records: list[dict]
    summary: dict = field(default_factory=dict)


# -- shared helpers -----------------------------------------------------------


def _state_spec(cfg: ScenarioConfig):
    if ("/" in cfg.state or cfg.state.endswith((".txt", ".dat", ".state"))) and cfg.resolve(cfg.state).is_file():
        return ("file", [str(cfg.resolve(cfg.state))])
    return parse_call(cfg.state)


def _fixed_states(cfg: ScenarioConfig) -> list[tuple[str, DensityMatrix]] | None:
    """Concrete states named by the config, or None when the state is drawn per trial."""
    spec = _state_spec(cfg)
    if spec[0] == "file":
        return [(Path(spec[1][0]).name, read_state(spec[1][0]))]
    if spec[0] in RANDOM_STATES:
        return None
    return [(format_spec(s), build_state(s)) for s in expand(spec)]


def _draw_state(cfg: ScenarioConfig, rng: np.random.Generator) -> DensityMatrix:
    name, args = _state_spec(cfg)
    dims = (cfg.d_a, cfg.d_b)
    if name == "random":
        return random_density(cfg.d_a * cfg.d_b, rng, dims)
    if name == "random_pure":
        return random_pure(cfg.d_a * cfg.d_b, rng, dims).density()
    terms = int(args[0]) if args else int(rng.integers(1, 5))
    return random_separable(dims, terms, rng).assemble()


def max_entangled_state(d_a: int, d_b: int) -> DensityMatrix:
    m = min(d_a, d_b)
    v = np.zeros((d_a, d_b), dtype=complex)
    v[np.arange(m), np.arange(m)] = 1 / np.sqrt(m)
    v = v.reshape(-1)
    return DensityMatrix(np.outer(v, v.conj()), (d_a, d_b))


def random_npt_state(d_a: int, d_b: int, rng: np.random.Generator, tries: int = 1000) -> DensityMatrix:
    """Rejection-sample a Hilbert-Schmidt random state with a negative partial transpose.

    Half the draws are random pure states, which are almost surely NPT.
    """
    for _ in range(tries):
        if rng.uniform() < 0.5:
            rho = random_pure(d_a * d_b, rng, (d_a, d_b)).density()
        else:
            rho = random_density(d_a * d_b, rng, (d_a, d_b))
        if min_pt_eigenvalue(rho.mat, rho.dims) < -1e-6:
            return rho
    raise RuntimeError("no NPT state found")


def _read_psi(path: Path, dims) -> PureState:
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    head = lines[0].split()
    da, db = int(head[1]), int(head[2])
    return PureState(parse_complex_lines(lines[1:], da * db), (da, db))


def _psi_choice(cfg: ScenarioConfig):
    if cfg.psi_choice in ("default", "product"):
        return cfg.psi_choice
    return _read_psi(cfg.resolve(cfg.psi_choice), (cfg.d_a, cfg.d_b))


def witness_bundle(cfg: ScenarioConfig, basis: InputBasis) -> WitnessBundle:
    """Bundle from the configured state when it is a single NPT state, else from
    the maximally entangled state of the configured dimensions."""
    states = _fixed_states(cfg)
    source = max_entangled_state(cfg.d_a, cfg.d_b)
    if states is not None and len(states) == 1:
        try:
            witness_from_npt(states[0][1])
            source = states[0][1]
        except NotNPTError:
            pass
    return make_bundle(source, _psi_choice(cfg), basis)


def _read_effects(path: Path) -> tuple[PovmEffect, PovmEffect]:
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    head = lines[0].split()
    if head[0] != "effects":
        raise ValueError("effects file must start with 'effects d_A d_B'")
    da, db = int(head[1]), int(head[2])
    na, nb = (da * da) ** 2, (db * db) ** 2
    a = parse_complex_lines(lines[1:], na).reshape(da * da, da * da)
    b = parse_complex_lines(lines[1 + na :], nb).reshape(db * db, db * db)
    return PovmEffect(a, (da, da)), PovmEffect(b, (db, db))


def effects_for_trial(cfg: ScenarioConfig, rng: np.random.Generator, kind: str | None = None) -> tuple[PovmEffect, PovmEffect]:
    kind = cfg.effects if kind is None else kind
    da, db = cfg.d_a, cfg.d_b
    if kind == "max_entangled":
        return max_entangled_effect(da), max_entangled_effect(db)
    if kind == "random":
        return random_dichotomic_effect(da * da, rng, (da, da)), random_dichotomic_effect(db * db, rng, (db, db))
    return _read_effects(cfg.resolve(kind))


def _nan_row(columns, **known) -> dict:
    row = {c: float("nan") for c in columns}
    row.update(known)
    return row


# -- scenarios ----------------------------------------------------------------


REDUCTION_COLUMNS = ["trial", "seed", "i_alpha", "lin_over_d", "n_phi", "f_over_d", "err_i", "err_n", "p11_mm", "error"]


def run_reduction_check(cfg: ScenarioConfig) -> RunResult:
    """Maximally entangled effects: I and N must match the device-dependent
    witnesses divided by d_A d_B, on random or configured states."""
    basis = InputBasis.standard(cfg.d_a, cfg.d_b)
    bundle = witness_bundle(cfg, basis)
    a1, b1 = effects_for_trial(cfg, None, "max_entangled")
    dd = cfg.d_a * cfg.d_b
    fixed = _fixed_states(cfg)
    targets = fixed if fixed is not None else [(None, None)]
    rows = []
    for g, (_, state) in enumerate(targets):
        for trial in range(cfg.trials):
            rng = make_rng(cfg.seed, trial, g)
            try:
                rho = state if state is not None else _draw_state(cfg, rng)
                table = build_table(rho, basis, a1, b1)
                ia, nv = i_alpha(table, bundle.alpha), n_phi(table, bundle)
                lin, f = linear_value(bundle.W, rho) / dd, nonlinear_value(bundle, rho) / dd
                rows.append(dict(trial=trial, seed=cfg.seed, i_alpha=ia, lin_over_d=lin, n_phi=nv, f_over_d=f,
                                 err_i=abs(ia - lin), err_n=abs(nv - f), p11_mm=table.p11_mm, error=""))
            except TRIAL_ERRORS as exc:
                rows.append(_nan_row(REDUCTION_COLUMNS, trial=trial, seed=cfg.seed, error=str(exc)))
    ok = [r for r in rows if not r["error"]]
    summary = {
        "max_err_i": max((r["err_i"] for r in ok), default=float("nan")),
        "max_err_n": max((r["err_n"] for r in ok), default=float("nan")),
        "errors": len(rows) - len(ok),
    }
    return RunResult(REDUCTION_COLUMNS, rows, summary)


SEPARABLE_COLUMNS = ["trial", "seed", "terms", "i_alpha", "n_phi", "f_direct", "n_nonnegative", "error"]


def run_separable_positivity(cfg: ScenarioConfig) -> RunResult:
    """Random separable states (``random_separable`` or ``random_separable(k)``
    for a fixed number of product terms) against N and F."""
    basis = InputBasis.standard(cfg.d_a, cfg.d_b)
    bundle = witness_bundle(cfg, basis)
    _, args = _state_spec(cfg)
    rows = []
    for trial in range(cfg.trials):
        rng = make_rng(cfg.seed, trial, 0)
        try:
            terms = int(args[0]) if args else int(rng.integers(1, 5))
            sigma = random_separable((cfg.d_a, cfg.d_b), terms, rng).assemble()
            a1, b1 = effects_for_trial(cfg, rng)
            table = build_table(sigma, basis, a1, b1)
            nv = n_phi(table, bundle)
            rows.append(dict(trial=trial, seed=cfg.seed, terms=terms, i_alpha=i_alpha(table, bundle.alpha), n_phi=nv,
                             f_direct=nonlinear_value(bundle, sigma), n_nonnegative=bool(nv >= -1e-9), error=""))
        except TRIAL_ERRORS as exc:
            rows.append(_nan_row(SEPARABLE_COLUMNS, trial=trial, seed=cfg.seed, n_nonnegative=False, error=str(exc)))
    ok = [r for r in rows if not r["error"]]
    summary = {
        "min_n_phi": min((r["n_phi"] for r in ok), default=float("nan")),
        "min_f": min((r["f_direct"] for r in ok), default=float("nan")),
        "violations": sum(not r["n_nonnegative"] for r in ok),
        "errors": len(rows) - len(ok),
    }
    return RunResult(SEPARABLE_COLUMNS, rows, summary)


SWEEP_COLUMNS = ["eta_plus", "eta_minus", "C", "n_ideal", "n_measured", "bound_rhs", "margin", "certified", "seed", "trial"]


def run_loophole_sweep(cfg: ScenarioConfig) -> RunResult:
    """Exact-count corruption over the efficiency grid; checks N_m - RHS = C N_i."""
    basis = InputBasis.standard(cfg.d_a, cfg.d_b)
    bundle = witness_bundle(cfg, basis)
    fixed = _fixed_states(cfg)
    rows, max_resid, errors = [], 0.0, 0
    for trial in range(cfg.trials):
        trial_rng = make_rng(cfg.seed, trial, 0)
        rho = fixed[0][1] if fixed else _draw_state(cfg, trial_rng)
        a1, b1 = effects_for_trial(cfg, trial_rng)
        ideal = build_table(rho, basis, a1, b1)
        for g, (ep, em) in enumerate(cfg.eta_grid):
            model = EfficiencyModel.for_point(ep, em, cfg.nbar)
            try:
                n_i = n_phi(ideal, bundle)
                v = certify(corrupt_table(ideal, model), bundle, model)
                max_resid = max(max_resid, abs((v.n_measured - v.bound_rhs) - model.C * n_i))
                rows.append(dict(eta_plus=ep, eta_minus=em, C=model.C, n_ideal=n_i, n_measured=v.n_measured,
                                 bound_rhs=v.bound_rhs, margin=v.margin, certified=v.certified, seed=cfg.seed, trial=trial))
            except TRIAL_ERRORS as exc:
                errors += 1
                log.warning("trial %d, eta=(%g, %g): %s", trial, ep, em, exc)
                rows.append(_nan_row(SWEEP_COLUMNS, eta_plus=ep, eta_minus=em, C=model.C, certified=False,
                                     seed=cfg.seed, trial=trial))
    summary = {
        "max_identity_residual": max_resid,
        "certified": sum(r["certified"] for r in rows),
        "points": len(rows),
        "errors": errors,
    }
    return RunResult(SWEEP_COLUMNS, rows, summary)


MC_COLUMNS = ["trial", "seed", "eta_plus", "eta_minus", "nbar", "max_z", "within_5sigma", "n_analytic", "n_simulated", "error"]


def run_mc_events(cfg: ScenarioConfig) -> RunResult:
    """Simulated event counts against the analytic corruption, entry by entry."""
    basis = InputBasis.standard(cfg.d_a, cfg.d_b)
    bundle = witness_bundle(cfg, basis)
    fixed = _fixed_states(cfg)
    rows = []
    for trial in range(cfg.trials):
        trial_rng = make_rng(cfg.seed, trial, 0)
        rho = fixed[0][1] if fixed else _draw_state(cfg, trial_rng)
        a1, b1 = effects_for_trial(cfg, trial_rng)
        ideal = build_table(rho, basis, a1, b1)
        for g, (ep, em) in enumerate(cfg.eta_grid):
            model = EfficiencyModel.for_point(ep, em, cfg.nbar)
            try:
                measured = simulate_table(ideal, model, make_rng(cfg.seed, trial, g + 1))
                analytic = corrupt_table(ideal, model)
                z = mc_z_scores(ideal, analytic, measured, model)
                rows.append(dict(trial=trial, seed=cfg.seed, eta_plus=ep, eta_minus=em, nbar=cfg.nbar, max_z=float(z.max()),
                                 within_5sigma=bool(z.max() <= 5), n_analytic=n_phi(analytic, bundle),
                                 n_simulated=n_phi(measured, bundle), error=""))
            except TRIAL_ERRORS as exc:
                rows.append(_nan_row(MC_COLUMNS, trial=trial, seed=cfg.seed, eta_plus=ep, eta_minus=em, nbar=cfg.nbar,
                                     within_5sigma=False, error=str(exc)))
    ok = [r for r in rows if not r["error"]]
    summary = {
        "fraction_within_5sigma": (sum(r["within_5sigma"] for r in ok) / len(ok)) if ok else float("nan"),
        "errors": len(rows) - len(ok),
    }
    return RunResult(MC_COLUMNS, rows, summary)


def mc_z_scores(ideal, analytic, measured, model: EfficiencyModel) -> np.ndarray:
    """|measured - analytic| in units of the sampling sigma, floored at one event."""
    p_i = np.concatenate([ideal.full.reshape(-1), ideal.full_mm.reshape(-1)])
    p_a = np.concatenate([analytic.full.reshape(-1), analytic.full_mm.reshape(-1)])
    p_m = np.concatenate([measured.full.reshape(-1), measured.full_mm.reshape(-1)])
    sigma = np.maximum(binomial_sigma(p_i, model), model.C / model.nbar)
    return np.abs(p_m - p_a) / sigma


NOISE_COLUMNS = ["trial", "seed", "channel", "i_value", "n_value", "i_misdetects", "n_misdetects", "n_le_i", "error"]


def _channels(cfg: ScenarioConfig):
    if cfg.noise == "none":
        return [build_channel(("identity", [cfg.d_a * cfg.d_b]))]
    path = cfg.resolve(cfg.noise)
    if "/" in cfg.noise or path.suffix in (".txt", ".chan"):
        if path.is_file():
            return [read_channel(path)]
    return [build_channel(s) for s in expand(parse_call(cfg.noise))]


def run_noise_sweep(cfg: ScenarioConfig) -> RunResult:
    """I and N on noisy-input tables, one row per (trial, channel)."""
    basis = InputBasis.standard(cfg.d_a, cfg.d_b)
    bundle = witness_bundle(cfg, basis)
    fixed = _fixed_states(cfg)
    channels = _channels(cfg)
    rows = []
    for trial in range(cfg.trials):
        rng = make_rng(cfg.seed, trial, 0)
        rho = fixed[0][1] if fixed else _draw_state(cfg, rng)
        a1, b1 = effects_for_trial(cfg, rng)
        try:
            recs = compare_ew_new(rho, basis, a1, b1, channels, bundle)
        except TRIAL_ERRORS as exc:
            for ch in channels:
                rows.append(_nan_row(NOISE_COLUMNS, trial=trial, seed=cfg.seed, channel=ch.label, i_misdetects=False,
                                     n_misdetects=False, n_le_i=False, error=str(exc)))
            continue
        for r in recs:
            rows.append(dict(trial=trial, seed=cfg.seed, channel=r.label, i_value=r.i_value, n_value=r.n_value,
                             i_misdetects=r.i_misdetects, n_misdetects=r.n_misdetects,
                             n_le_i=bool(r.n_value <= r.i_value + 1e-12), error=r.error))
    ok = [r for r in rows if not r["error"]]
    summary = {
        "min_n": min((r["n_value"] for r in ok), default=float("nan")),
        "i_negative": sum(r["i_misdetects"] for r in ok),
        "n_negative": sum(r["n_misdetects"] for r in ok),
        "n_le_i_violations": sum(not r["n_le_i"] for r in ok),
        "implication_violations": sum(r["i_misdetects"] and not r["n_misdetects"] for r in ok),
        "errors": len(rows) - len(ok),
    }
    return RunResult(NOISE_COLUMNS, rows, summary)


def _gap_trial(cfg, basis, base, state, trial, rng):
    if base is None:
        _, phi = witness_from_npt(random_npt_state(cfg.d_a, cfg.d_b, rng))
        rho = _draw_state(cfg, rng)
    else:
        phi, rho = base.phi, state
        if trial == 0:
            return base, rho
    if trial > 0:
        psi, label = random_pure(cfg.d_a * cfg.d_b, rng, (cfg.d_a, cfg.d_b)), "random"
    else:
        psi, label = resolve_psi(phi, _psi_choice(cfg))
    w = partial_transpose(phi.projector(), phi.dims, 1)
    return bundle_from_parts(w, phi, psi, basis, label), rho


GAP_COLUMNS = ["kind", "state", "trial", "seed", "s_x", "i_alpha", "n_phi", "gap", "error"]


def run_new_vs_ew(cfg: ScenarioConfig) -> RunResult:
    """Look for states the nonlinear witness flags while the linear one does not.

    Trial 0 uses the configured psi; later trials draw psi at random.  For
    named states the witness comes from ``witness_bundle``; for ``random``
    each trial also draws its own NPT witness source.
    """
    basis = InputBasis.standard(cfg.d_a, cfg.d_b)
    fixed = _fixed_states(cfg)
    base = None if fixed is None else witness_bundle(cfg, basis)
    targets = fixed if fixed is not None else [("random", None)]
    rows = []
    for g, (label, state) in enumerate(targets):
        for trial in range(cfg.trials):
            rng = make_rng(cfg.seed, trial, g)
            try:
                bundle, rho = _gap_trial(cfg, basis, base, state, trial, rng)
                a1, b1 = effects_for_trial(cfg, rng)
                table = build_table(rho, basis, a1, b1)
                ia, nv = i_alpha(table, bundle.alpha), n_phi(table, bundle)
                rows.append(dict(kind="trial", state=label, trial=trial, seed=cfg.seed, s_x=bundle.sX, i_alpha=ia,
                                 n_phi=nv, gap=bool(ia >= 0 and nv < 0), error=""))
            except TRIAL_ERRORS as exc:
                rows.append(_nan_row(GAP_COLUMNS, kind="trial", state=label, trial=trial, seed=cfg.seed, gap=False,
                                     error=str(exc)))
    hits = sum(r["gap"] for r in rows)
    rows.append(_nan_row(GAP_COLUMNS, kind="summary", state=f"{hits} found" if hits else "none found", trial=-1,
                         seed=cfg.seed, gap=bool(hits), error=""))
    summary = {"gap_rows": hits, "searched": len(rows) - 1}
    return RunResult(GAP_COLUMNS, rows, summary)


RUNNERS = {
    "reduction-check": run_reduction_check,
    "separable-positivity": run_separable_positivity,
    "loophole-sweep": run_loophole_sweep,
    "mc-events": run_mc_events,
    "noise-sweep": run_noise_sweep,
    "new-vs-ew": run_new_vs_ew,
}


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    return RUNNERS[cfg.scenario](cfg)
