"""Four-party measurement statistics and the MDI witness functionals.

Alice measures a dichotomic POVM on (A_in, A), Bob on (B, B_in); the global
operator order is (A_in, A, B, B_in) so tau (x) rho (x) omega pairs directly
with A_1 (x) B_1.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DegenerateDenominatorError, DimensionError
from .quantum import (
    DensityMatrix,
    PovmEffect,
    SeparableEnsemble,
    kron,
    max_entangled_vector,
    partial_trace,
)
from .witness import InputBasis, WitnessBundle, nonlinear_value

PROB_TOL = 1e-10
MM_TOL = 1e-12


def _mat(x) -> np.ndarray:
    return np.asarray(x, dtype=complex)


def _local_dims(rho) -> tuple[int, int]:
    if isinstance(rho, DensityMatrix):
        if len(rho.dims) != 2:
            raise DimensionError("shared state must be bipartite")
        return rho.dims.dims
    n = int(round(np.sqrt(np.asarray(rho).shape[0])))
    return n, n


def max_entangled_effect(d: int) -> PovmEffect:
    """Projector onto (1/sqrt(d)) sum_i |ii>."""
    if d < 2:
        raise DimensionError("max_entangled_effect needs d >= 2")
    v = max_entangled_vector(d)
    return PovmEffect(np.outer(v, v.conj()), (d, d))


def joint_distribution(rho, tau, omega, a1, b1) -> np.ndarray:
    """P[a, b] = tr[(tau (x) rho (x) omega)(A_a (x) B_b)] by an explicit four-party trace."""
    da, db = _local_dims(rho)
    a1, b1 = _mat(a1), _mat(b1)
    tau, omega = _mat(tau), _mat(omega)
    if a1.shape != (da * da, da * da) or b1.shape != (db * db, db * db):
        raise DimensionError("effects must act on (A_in, A) and (B, B_in)")
    if tau.shape != (da, da) or omega.shape != (db, db):
        raise DimensionError("input states must match the local dimensions")
    state = kron(tau, _mat(rho), omega)
    a_eff = [np.eye(da * da) - a1, a1]
    b_eff = [np.eye(db * db) - b1, b1]
    p = np.array([[np.trace(state @ kron(a_eff[a], b_eff[b])).real for b in range(2)] for a in range(2)])
    _check_distribution(p)
    return p


def _check_distribution(p: np.ndarray):
    if np.any(p < -PROB_TOL) or np.any(p > 1 + PROB_TOL):
        raise ValueError(f"probabilities outside [0, 1]: {p.ravel()} (invalid effect?)")
    if np.any(np.abs(p.sum(axis=(-2, -1)) - 1) > PROB_TOL):
        raise ValueError("outcome probabilities do not sum to one")


@dataclass(frozen=True)
class ProbabilityTable:
    """Four-outcome distributions for every input pair plus the maximally mixed pair.

    ``full[s, t, a, b]`` is the probability of outcomes (a, b) for inputs
    (tau_s, omega_t); ``full_mm[a, b]`` the same for (m_A, m_B).
    """

    full: np.ndarray
    full_mm: np.ndarray
    dims: tuple[int, int]
    provenance: str = "ideal"

    @property
    def p11(self) -> np.ndarray:
        return self.full[..., 1, 1]

    @property
    def p11_mm(self) -> float:
        return float(self.full_mm[1, 1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.full.shape[:2]


def _input_side_operators(effect: np.ndarray, inputs: np.ndarray, side: str, d: int) -> np.ndarray:
    """Local operators on the shared-state factor obtained by contracting the
    effect with each input state: tr_in[E (tau (x) I)] on Alice's side,
    tr_in[E (I (x) omega)] on Bob's side."""
    e = effect.reshape(d, d, d, d)
    if side == "A":
        # e[p, i, q, j]: (A_in, A) rows and columns
        return np.einsum("piqj,sqp->sij", e, inputs)
    return np.einsum("ipjq,sqp->sij", e, inputs)


def _table_from_local(rho: np.ndarray, a_ops: np.ndarray, b_ops: np.ndarray, da: int, db: int) -> np.ndarray:
    """full[s, t, a, b] from local operators; outcome 0 operators are I - outcome 1."""
    r = rho.reshape(da, db, da, db)
    eye_a = np.eye(da)[None]
    eye_b = np.eye(db)[None]
    a_both = np.stack([eye_a - a_ops, a_ops], axis=1)  # (s, a, i, j)
    b_both = np.stack([eye_b - b_ops, b_ops], axis=1)
    # tr[rho (Atil (x) Btil)] = sum rho[i,k,j,l] Atil[j,i] Btil[l,k]
    return np.einsum("ikjl,saji,tblk->stab", r, a_both, b_both).real


def build_table(rho, basis: InputBasis, a1, b1) -> ProbabilityTable:
    da, db = _local_dims(rho)
    if basis.dims != (da, db):
        raise DimensionError(f"basis dims {basis.dims} differ from state dims {(da, db)}")
    a1, b1 = _mat(a1), _mat(b1)
    if a1.shape != (da * da, da * da) or b1.shape != (db * db, db * db):
        raise DimensionError("effects must act on (A_in, A) and (B, B_in)")
    rho = _mat(rho)
    taus = np.array([s.mat for s in basis.side_a] + [np.eye(da) / da])
    omegas = np.array([s.mat for s in basis.side_b] + [np.eye(db) / db])
    a_ops = _input_side_operators(a1, taus, "A", da)
    b_ops = _input_side_operators(b1, omegas, "B", db)
    full = _table_from_local(rho, a_ops, b_ops, da, db)
    _check_distribution(full)
    na, nb = basis.shape
    return ProbabilityTable(full[:na, :nb].copy(), full[na, nb].copy(), (da, db), "ideal")


def i_value(table: ProbabilityTable, grid) -> float:
    grid = np.asarray(grid, dtype=float)
    if grid.shape != table.shape:
        raise DimensionError(f"coefficient grid {grid.shape} does not match table {table.shape}")
    return float(np.sum(grid * table.p11))


def i_alpha(table: ProbabilityTable, alpha) -> float:
    return i_value(table, alpha)


def nonlinear_correction(table: ProbabilityTable, bundle: WitnessBundle) -> float:
    if table.p11_mm <= MM_TOL:
        raise DegenerateDenominatorError("P11 for maximally mixed inputs", table.p11_mm)
    ib = i_value(table, bundle.beta)
    ig = i_value(table, bundle.gamma)
    return (ib**2 + ig**2) / (bundle.K * table.p11_mm)


def n_phi(table: ProbabilityTable, bundle: WitnessBundle) -> float:
    """Nonlinear MDI witness: I_alpha minus the squared beta/gamma sums over K P11_mm."""
    return i_alpha(table, bundle.alpha) - nonlinear_correction(table, bundle)


def effective_effect(effect, sigma, side: str) -> np.ndarray:
    """Alice: (tr_A[E (I (x) sigma)])^T on A_in.  Bob: (tr_B[E (sigma (x) I)])^T on B_in."""
    e = _mat(effect)
    s = _mat(sigma)
    d = s.shape[0]
    if e.shape != (d * d, d * d):
        raise DimensionError("effect and local state dimensions disagree")
    eye = np.eye(d)
    if side == "A":
        return partial_trace(e @ np.kron(eye, s), (d, d), [0]).T
    if side == "B":
        return partial_trace(e @ np.kron(s, eye), (d, d), [1]).T
    raise ValueError(f"side must be 'A' or 'B', got {side!r}")


@dataclass(frozen=True)
class ReductionResult:
    T_Q: float
    F_of_Q: float | None
    N_direct: float
    degenerate: bool = False

    @property
    def residual(self) -> float:
        if self.degenerate:
            return float("nan")
        return abs(self.N_direct - self.T_Q * self.F_of_Q)


def effective_operator(ensemble: SeparableEnsemble, a1, b1) -> np.ndarray:
    """G'_1 = sum_i p_i A_1^i (x) B_1^i."""
    return sum(
        p * np.kron(effective_effect(a1, sa.mat, "A"), effective_effect(b1, sb.mat, "B"))
        for p, (sa, sb) in zip(ensemble.weights, ensemble.factors)
    )


def reduction_check(ensemble: SeparableEnsemble, a1, b1, bundle: WitnessBundle, tol: float = 1e-8) -> ReductionResult:
    """Compare n_phi on the assembled state with T_Q F(Q) from the effective operators."""
    g = effective_operator(ensemble, a1, b1)
    t_q = float(np.trace(g).real)
    n_direct = n_phi(build_table(ensemble.assemble(), bundle.basis, a1, b1), bundle)
    if t_q <= MM_TOL:
        return ReductionResult(t_q, None, n_direct, degenerate=True)
    f_q = float(nonlinear_value(bundle, g / t_q))
    res = ReductionResult(t_q, f_q, n_direct)
    if res.residual > tol:
        raise AssertionError(f"N = T_Q F(Q) fails by {res.residual:.3g}")
    return res


# -- table files --------------------------------------------------------------


def export_table_csv(table: ProbabilityTable, path) -> None:
    lines = ["s,t,p00,p01,p10,p11"]
    na, nb = table.shape
    for s in range(na):
        for t in range(nb):
            lines.append(f"{s},{t}," + ",".join(repr(float(v)) for v in table.full[s, t].reshape(-1)))
    lines.append("mm,mm," + ",".join(repr(float(v)) for v in table.full_mm.reshape(-1)))
    Path(path).write_text("\n".join(lines) + "\n")


def import_table_csv(path, dims: tuple[int, int], provenance: str = "measured") -> ProbabilityTable:
    rows = [ln.split(",") for ln in Path(path).read_text().splitlines()[1:] if ln.strip()]
    body = [r for r in rows if r[0] != "mm"]
    mm = [r for r in rows if r[0] == "mm"]
    if len(mm) != 1:
        raise ValueError("table CSV needs exactly one 'mm' row")
    na = max(int(r[0]) for r in body) + 1
    nb = max(int(r[1]) for r in body) + 1
    full = np.zeros((na, nb, 2, 2))
    for r in body:
        full[int(r[0]), int(r[1])] = np.array([float(x) for x in r[2:6]]).reshape(2, 2)
    full_mm = np.array([float(x) for x in mm[0][2:6]]).reshape(2, 2)
    return ProbabilityTable(full, full_mm, tuple(dims), provenance)


def with_provenance(table: ProbabilityTable, provenance: str) -> ProbabilityTable:
    return replace(table, provenance=provenance)
