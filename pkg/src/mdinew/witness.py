"""Linear and nonlinear witnesses built from NPT states, and their real
decompositions over products of local input states."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionError, IllConditionedError, NotHermitianError, NotNPTError, ResidualTooLargeError
from .quantum import (
    HERM_TOL,
    DensityMatrix,
    DimSpec,
    PureState,
    as_dims,
    format_complex_lines,
    herm_eig,
    hermiticity_error,
    parse_complex_lines,
    partial_transpose,
    schmidt_coefficients,
)

NPT_TOL = 1e-9
MAX_GRAM_CONDITION = 1e6
RESIDUAL_TOL = 1e-8


def hermitian_to_real(h: np.ndarray) -> np.ndarray:
    """Coordinates of a Hermitian matrix in an orthonormal Hermitian operator basis.

    The basis is {E_jj} together with (E_jk + E_kj)/sqrt(2) and
    -i(E_jk - E_kj)/sqrt(2) for j < k, so the Hilbert-Schmidt inner product of
    two Hermitian matrices equals the dot product of their coordinates.
    """
    h = np.asarray(h)
    iu = np.triu_indices(h.shape[0], 1)
    upper = h[iu]
    return np.concatenate([np.diag(h).real, np.sqrt(2) * upper.real, np.sqrt(2) * upper.imag])


def real_to_hermitian(v: np.ndarray, d: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    iu = np.triu_indices(d, 1)
    m = len(iu[0])
    h = np.zeros((d, d), dtype=complex)
    h[np.diag_indices(d)] = v[:d]
    h[iu] = (v[d : d + m] + 1j * v[d + m :]) / np.sqrt(2)
    return h + np.triu(h, 1).conj().T


def _side_condition(states: Sequence[np.ndarray]) -> float:
    vecs = np.array([hermitian_to_real(s) for s in states])
    gram = vecs @ vecs.T
    d2 = vecs.shape[1]
    if np.linalg.matrix_rank(vecs) < d2:
        return np.inf
    ev = np.linalg.eigvalsh(gram)
    # an overcomplete set has a zero block in its Gram spectrum; use the nonzero part
    ev = ev[-d2:]
    return float(ev[-1] / ev[0])


@dataclass(frozen=True)
class InputBasis:
    """Local input states {tau_s} for Alice and {omega_t} for Bob."""

    side_a: tuple[DensityMatrix, ...]
    side_b: tuple[DensityMatrix, ...]
    gram_condition: float

    @classmethod
    def from_states(cls, side_a, side_b) -> "InputBasis":
        side_a = tuple(s if isinstance(s, DensityMatrix) else DensityMatrix(s, (len(s),)) for s in side_a)
        side_b = tuple(s if isinstance(s, DensityMatrix) else DensityMatrix(s, (len(s),)) for s in side_b)
        cond = max(_side_condition([s.mat for s in side_a]), _side_condition([s.mat for s in side_b]))
        return cls(side_a, side_b, cond)

    @classmethod
    def standard(cls, d_a: int, d_b: int | None = None) -> "InputBasis":
        d_b = d_a if d_b is None else d_b
        return cls.from_states(standard_basis(d_a), standard_basis(d_b))

    @property
    def dims(self) -> tuple[int, int]:
        return self.side_a[0].dims.total, self.side_b[0].dims.total

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.side_a), len(self.side_b)


def standard_basis(d: int) -> list[DensityMatrix]:
    """d^2 pure states whose projectors span the Hermitian operators on C^d.

    Order: |j><j| for all j, then (|j>+|k>)/sqrt(2), then (|j>+i|k>)/sqrt(2)
    for j < k.  For qubits this is {|0>, |1>, |+>, |y+>}.
    """
    if d < 2:
        raise DimensionError("standard_basis needs d >= 2")
    eye = np.eye(d, dtype=complex)
    vecs = [eye[j] for j in range(d)]
    pairs = [(j, k) for j in range(d) for k in range(j + 1, d)]
    vecs += [(eye[j] + eye[k]) / np.sqrt(2) for j, k in pairs]
    vecs += [(eye[j] + 1j * eye[k]) / np.sqrt(2) for j, k in pairs]
    return [DensityMatrix(np.outer(v, v.conj()), (d,)) for v in vecs]


def product_operators(basis: InputBasis) -> np.ndarray:
    """tau_s^T (x) omega_t^T for all (s, t), shape (n_a, n_b, D, D)."""
    ta = np.array([s.mat.T for s in basis.side_a])
    tb = np.array([s.mat.T for s in basis.side_b])
    na, da = ta.shape[:2]
    nb, db = tb.shape[:2]
    ops = np.einsum("sij,tkl->stikjl", ta, tb)
    return ops.reshape(na, nb, da * db, da * db)


def decompose(h, basis: InputBasis) -> np.ndarray:
    """Real grid c with sum_st c_st tau_s^T (x) omega_t^T == h."""
    h = np.asarray(h, dtype=complex)
    da, db = basis.dims
    if h.shape != (da * db, da * db):
        raise DimensionError(f"operator shape {h.shape} does not match input dims {(da, db)}")
    if hermiticity_error(h) > HERM_TOL:
        raise NotHermitianError("only Hermitian operators have real decompositions")
    if basis.gram_condition > MAX_GRAM_CONDITION:
        raise IllConditionedError(f"input basis Gram condition {basis.gram_condition:.3g} exceeds {MAX_GRAM_CONDITION:g}")
    ops = product_operators(basis)
    na, nb = basis.shape
    design = np.array([hermitian_to_real(op) for op in ops.reshape(na * nb, *h.shape)]).T
    coeffs, *_ = np.linalg.lstsq(design, hermitian_to_real(h), rcond=None)
    grid = coeffs.reshape(na, nb)
    residual = float(np.max(np.abs(reconstruct(grid, basis) - h)))
    if residual > RESIDUAL_TOL:
        raise ResidualTooLargeError(f"decomposition residual {residual:.3g} exceeds {RESIDUAL_TOL:g}")
    return grid


def reconstruct(grid, basis: InputBasis) -> np.ndarray:
    return np.einsum("st,stij->ij", np.asarray(grid, dtype=float), product_operators(basis))


def witness_from_npt(rho_tilde) -> tuple[np.ndarray, PureState]:
    """W = (|phi><phi|)^{T_B} with phi the eigenvector of the most negative
    eigenvalue of rho_tilde^{T_B}."""
    dims = rho_tilde.dims if isinstance(rho_tilde, DensityMatrix) else DimSpec((2, 2))
    if len(dims) != 2:
        raise DimensionError("witness_from_npt needs a bipartite state")
    evals, evecs = herm_eig(partial_transpose(np.asarray(rho_tilde), dims, 1))
    if evals[0] >= -NPT_TOL:
        raise NotNPTError(f"minimum partial-transpose eigenvalue {evals[0]:.3g} is not negative")
    # eigh sorts ascending, so column 0 is the most negative; ties resolve to the lowest index
    phi = evecs[:, 0]
    # fix the global phase so the largest-magnitude component is real positive
    k = int(np.argmax(np.abs(phi) > np.abs(phi).max() - 1e-12))
    phi = phi * np.exp(-1j * np.angle(phi[k]))
    phi = PureState(phi, dims)
    w = partial_transpose(phi.projector(), dims, 1)
    return w, phi


def default_psi(phi: PureState) -> PureState:
    """Maximally entangled state in the Schmidt basis of ``phi``; s(X) = 1/min(d_A, d_B)."""
    da, db = phi.dims.dims
    u, _, vh = np.linalg.svd(np.asarray(phi.vec).reshape(da, db))
    m = min(da, db)
    amp = u[:, :m] @ vh[:m, :] / np.sqrt(m)
    return PureState(amp.reshape(-1), phi.dims)


def product_psi(dims) -> PureState:
    dims = as_dims(dims)
    v = np.zeros(dims.total, dtype=complex)
    v[0] = 1
    return PureState(v, dims)


@dataclass(frozen=True)
class NonlinearParts:
    X: np.ndarray
    H1: np.ndarray
    H2: np.ndarray
    sX: float


def build_nonlinear(phi: PureState, psi: PureState) -> NonlinearParts:
    dims = phi.dims
    if psi.dims != dims:
        raise DimensionError("phi and psi live on different spaces")
    x = np.outer(phi.vec, psi.vec.conj())
    xt = partial_transpose(x, dims, 1)
    h1 = (xt + xt.conj().T) / 2
    h2 = (xt - xt.conj().T) / 2j
    sx = float(schmidt_coefficients(psi.vec, dims)[0] ** 2)
    return NonlinearParts(x, h1, h2, sx)


def _expect(op, rho) -> complex:
    return np.trace(np.asarray(op) @ np.asarray(rho))


def linear_value(w, rho) -> float:
    w, rho = np.asarray(w), np.asarray(rho)
    if w.shape != rho.shape:
        raise DimensionError(f"witness {w.shape} and state {rho.shape} differ in size")
    val = _expect(w, rho)
    if abs(val.imag) > 1e-10:
        raise NotHermitianError(f"tr(W rho) has imaginary part {val.imag:.3g}")
    return float(val.real)


@dataclass(frozen=True)
class WitnessBundle:
    """Everything needed to evaluate the linear and nonlinear MDI witnesses."""

    W: np.ndarray
    phi: PureState
    psi: PureState
    X: np.ndarray
    H1: np.ndarray
    H2: np.ndarray
    sX: float
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    basis: InputBasis
    psi_choice: str = "default"

    @property
    def dims(self) -> tuple[int, int]:
        return self.phi.dims.dims

    @property
    def K(self) -> float:
        da, db = self.dims
        return self.sX * da * db

    @property
    def coeff_sums(self) -> tuple[float, float, float]:
        return float(self.alpha.sum()), float(self.beta.sum()), float(self.gamma.sum())

    @property
    def XTB(self) -> np.ndarray:
        return self.H1 + 1j * self.H2


def nonlinear_value(bundle: WitnessBundle, rho) -> float:
    """F(rho) = tr(W rho) - |tr(X^{T_B} rho)|^2 / s(X)."""
    lin = linear_value(bundle.W, rho)
    corr = abs(_expect(bundle.XTB, rho)) ** 2 / bundle.sX
    return lin - corr


def resolve_psi(phi: PureState, psi_choice) -> tuple[PureState, str]:
    if psi_choice is None or (isinstance(psi_choice, str) and psi_choice == "default"):
        return default_psi(phi), "default"
    if isinstance(psi_choice, str) and psi_choice == "product":
        return product_psi(phi.dims), "product"
    if isinstance(psi_choice, PureState):
        return psi_choice, "explicit"
    return PureState(np.asarray(psi_choice), phi.dims), "explicit"


def make_bundle(rho_tilde, psi_choice="default", basis: InputBasis | None = None) -> WitnessBundle:
    w, phi = witness_from_npt(rho_tilde)
    psi, label = resolve_psi(phi, psi_choice)
    return bundle_from_parts(w, phi, psi, basis, label)


def bundle_from_parts(w, phi: PureState, psi: PureState, basis: InputBasis | None = None, label: str = "explicit") -> WitnessBundle:
    da, db = phi.dims.dims
    basis = InputBasis.standard(da, db) if basis is None else basis
    parts = build_nonlinear(phi, psi)
    alpha = decompose(w, basis)
    beta = decompose(parts.H1, basis)
    gamma = decompose(parts.H2, basis)
    return WitnessBundle(w, phi, psi, parts.X, parts.H1, parts.H2, parts.sX, alpha, beta, gamma, basis, label)


# -- bundle files -------------------------------------------------------------


def _grid_lines(name: str, grid: np.ndarray) -> list[str]:
    na, nb = grid.shape
    lines = [f"{name} {na} {nb}"]
    lines += [f"{s} {t} {float(grid[s, t])!r}" for s in range(na) for t in range(nb)]
    return lines


def export_bundle(bundle: WitnessBundle, path) -> None:
    """Write dims, phi, psi, s(X) and the three coefficient grids as plain text."""
    da, db = bundle.dims
    lines = [f"dims {da} {db}", f"psi_choice {bundle.psi_choice}", f"sX {float(bundle.sX)!r}", "phi"]
    lines += format_complex_lines(bundle.phi.vec)
    lines.append("psi")
    lines += format_complex_lines(bundle.psi.vec)
    for name in ("alpha", "beta", "gamma"):
        lines += _grid_lines(name, getattr(bundle, name))
    Path(path).write_text("\n".join(lines) + "\n")


def import_bundle(path, basis: InputBasis | None = None) -> dict:
    """Read an exported bundle back as a dict of arrays.

    The witness operators themselves are re-derived by callers (via
    ``rebuild_bundle``) since they follow from phi, psi and the basis.
    """
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    head = lines[0].split()
    da, db = int(head[1]), int(head[2])
    n = da * db
    out: dict = {"dims": (da, db), "psi_choice": lines[1].split()[1], "sX": float(lines[2].split()[1])}
    pos = 3
    for name in ("phi", "psi"):
        if lines[pos].strip() != name:
            raise ValueError(f"expected section {name!r}, found {lines[pos]!r}")
        out[name] = parse_complex_lines(lines[pos + 1 :], n)
        pos += 1 + n
    for name in ("alpha", "beta", "gamma"):
        tag, na, nb = lines[pos].split()
        if tag != name:
            raise ValueError(f"expected section {name!r}, found {lines[pos]!r}")
        na, nb = int(na), int(nb)
        grid = np.zeros((na, nb))
        for line in lines[pos + 1 : pos + 1 + na * nb]:
            s, t, v = line.split()
            grid[int(s), int(t)] = float(v)
        out[name] = grid
        pos += 1 + na * nb
    return out


def rebuild_bundle(data: dict, basis: InputBasis | None = None) -> WitnessBundle:
    phi = PureState(data["phi"], data["dims"])
    psi = PureState(data["psi"], data["dims"])
    w = partial_transpose(phi.projector(), phi.dims, 1)
    return bundle_from_parts(w, phi, psi, basis, data.get("psi_choice", "explicit"))
