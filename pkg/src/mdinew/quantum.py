"""Dense linear algebra, states and effects shared by the rest of the package.

Subsystem ordering for four-party operators is fixed as (A_in, A, B, B_in):
the input state of Alice, her half of the shared state, Bob's half, and
Bob's input state.  Leftmost subsystem is the most significant index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionError, NotHermitianError

HERM_TOL = 1e-10
PSD_TOL = 1e-9
TRACE_TOL = 1e-10


@dataclass(frozen=True)
class DimSpec:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise DimensionError(f"invalid subsystem dimensions {self.dims!r}")
        object.__setattr__(self, "dims", dims)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims))

    def __len__(self):
        return len(self.dims)

    def __iter__(self):
        return iter(self.dims)

    def __getitem__(self, k):
        return self.dims[k]


def as_dims(dims) -> DimSpec:
    return dims if isinstance(dims, DimSpec) else DimSpec(tuple(dims))


def _check_square(mat: np.ndarray, dims: DimSpec):
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {mat.shape}")
    if mat.shape[0] != dims.total:
        raise DimensionError(f"matrix size {mat.shape[0]} does not match dims {dims.dims}")


def hermiticity_error(mat: np.ndarray) -> float:
    return float(np.max(np.abs(mat - mat.conj().T))) if mat.size else 0.0


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace matrix with subsystem dims."""

    mat: np.ndarray
    dims: DimSpec

    def __post_init__(self):
        dims = as_dims(self.dims)
        mat = np.array(self.mat, dtype=complex)
        _check_square(mat, dims)
        if hermiticity_error(mat) > HERM_TOL:
            raise NotHermitianError("density matrix is not Hermitian")
        mat = (mat + mat.conj().T) / 2
        if abs(np.trace(mat).real - 1) > TRACE_TOL:
            raise ValueError(f"density matrix trace {np.trace(mat).real!r} != 1")
        if np.linalg.eigvalsh(mat)[0] < -PSD_TOL:
            raise ValueError("density matrix has a negative eigenvalue")
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)
        object.__setattr__(self, "dims", dims)

    def __array__(self, dtype=None, copy=None):
        return self.mat if dtype is None else self.mat.astype(dtype)


@dataclass(frozen=True)
class PureState:
    vec: np.ndarray
    dims: DimSpec

    def __post_init__(self):
        dims = as_dims(self.dims)
        vec = np.array(self.vec, dtype=complex).reshape(-1)
        if vec.size != dims.total:
            raise DimensionError(f"vector length {vec.size} does not match dims {dims.dims}")
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise ValueError("zero vector is not a state")
        if abs(norm - 1) > 1e-9:
            raise ValueError(f"state vector has norm {norm:.12g}, expected 1")
        vec = vec / norm
        vec.setflags(write=False)
        object.__setattr__(self, "vec", vec)
        object.__setattr__(self, "dims", dims)

    def projector(self) -> np.ndarray:
        return np.outer(self.vec, self.vec.conj())

    def density(self) -> DensityMatrix:
        return DensityMatrix(self.projector(), self.dims)

    def __array__(self, dtype=None, copy=None):
        return self.vec if dtype is None else self.vec.astype(dtype)


@dataclass(frozen=True)
class PovmEffect:
    """Outcome-1 effect of a dichotomic measurement; outcome 0 is I - E."""

    mat: np.ndarray
    dims: DimSpec

    def __post_init__(self):
        dims = as_dims(self.dims)
        mat = np.array(self.mat, dtype=complex)
        _check_square(mat, dims)
        if hermiticity_error(mat) > HERM_TOL:
            raise NotHermitianError("POVM effect is not Hermitian")
        mat = (mat + mat.conj().T) / 2
        ev = np.linalg.eigvalsh(mat)
        if ev[0] < -PSD_TOL or ev[-1] > 1 + PSD_TOL:
            raise ValueError(f"effect eigenvalues outside [0, 1]: [{ev[0]}, {ev[-1]}]")
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)
        object.__setattr__(self, "dims", dims)

    def complement(self) -> "PovmEffect":
        return PovmEffect(np.eye(self.dims.total) - self.mat, self.dims)

    def __array__(self, dtype=None, copy=None):
        return self.mat if dtype is None else self.mat.astype(dtype)


@dataclass(frozen=True)
class SeparableEnsemble:
    weights: np.ndarray
    factors: tuple[tuple[DensityMatrix, DensityMatrix], ...] = field(default=())

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or len(w) != len(self.factors) or len(w) == 0:
            raise ValueError("weights and factors must be nonempty and of equal length")
        if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "factors", tuple(tuple(f) for f in self.factors))

    @property
    def dims(self) -> DimSpec:
        a, b = self.factors[0]
        return DimSpec((a.dims.total, b.dims.total))

    def assemble(self) -> DensityMatrix:
        mat = sum(p * np.kron(a.mat, b.mat) for p, (a, b) in zip(self.weights, self.factors))
        return DensityMatrix(mat, self.dims)


# -- basic operations ---------------------------------------------------------


def kron(*ops) -> np.ndarray:
    """Kronecker product of any number of operators, left factor most significant."""
    return reduce(np.kron, [np.asarray(op) for op in ops])


def partial_transpose(mat, dims, target: int | Sequence[int]) -> np.ndarray:
    dims = as_dims(dims)
    mat = np.asarray(mat)
    _check_square(mat, dims)
    n = len(dims)
    targets = [target] if np.isscalar(target) else list(target)
    axes = list(range(2 * n))
    for t in targets:
        if not 0 <= t < n:
            raise DimensionError(f"subsystem index {t} out of range for {n} subsystems")
        axes[t], axes[t + n] = axes[t + n], axes[t]
    return mat.reshape(dims.dims * 2).transpose(axes).reshape(mat.shape)


def partial_trace(mat, dims, keep: Sequence[int]) -> np.ndarray:
    dims = as_dims(dims)
    mat = np.asarray(mat)
    _check_square(mat, dims)
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    if not keep or keep[0] < 0 or keep[-1] >= n:
        raise DimensionError(f"invalid subsystem set {keep} for {n} subsystems")
    t = mat.reshape(dims.dims * 2)
    # trace out from the highest index down so remaining axis numbers stay valid
    for k in reversed(range(n)):
        if k not in keep:
            m = t.ndim // 2
            t = np.trace(t, axis1=k, axis2=k + m)
    dk = int(np.prod([dims[k] for k in keep]))
    return t.reshape(dk, dk)


def permute_subsystems(mat, dims, perm: Sequence[int]) -> np.ndarray:
    """Reorder subsystems so that new subsystem k is old subsystem ``perm[k]``."""
    dims = as_dims(dims)
    mat = np.asarray(mat)
    _check_square(mat, dims)
    n = len(dims)
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(n)):
        raise DimensionError(f"{perm} is not a permutation of {n} subsystems")
    axes = perm + [p + n for p in perm]
    return mat.reshape(dims.dims * 2).transpose(axes).reshape(mat.shape)


def herm_eig(mat) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors (columns)."""
    mat = np.asarray(mat, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {mat.shape}")
    if hermiticity_error(mat) > HERM_TOL:
        raise NotHermitianError(f"matrix deviates from Hermitian by {hermiticity_error(mat):.3g}")
    return np.linalg.eigh((mat + mat.conj().T) / 2)


def schmidt_coefficients(psi, dims) -> np.ndarray:
    dims = as_dims(dims)
    vec = np.asarray(psi, dtype=complex).reshape(-1)
    if len(dims) != 2:
        raise DimensionError("Schmidt decomposition needs exactly two subsystems")
    if vec.size != dims.total:
        raise DimensionError(f"vector length {vec.size} does not match dims {dims.dims}")
    return np.linalg.svd(vec.reshape(dims.dims), compute_uv=False)


def is_ppt(mat, dims, tol: float = PSD_TOL) -> bool:
    return min_pt_eigenvalue(mat, dims) >= -tol


def min_pt_eigenvalue(mat, dims) -> float:
    return float(herm_eig(partial_transpose(mat, dims, 1))[0][0])


# -- random objects -----------------------------------------------------------


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Deterministic substream for ``(seed, *keys)``; distinct keys never collide."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys)))


def _ginibre(d: int, rng: np.random.Generator, cols: int | None = None) -> np.ndarray:
    cols = d if cols is None else cols
    return (rng.standard_normal((d, cols)) + 1j * rng.standard_normal((d, cols))) / np.sqrt(2)


def random_density(d: int, rng: np.random.Generator, dims=None) -> DensityMatrix:
    """Hilbert-Schmidt random state G G^dag / tr(G G^dag)."""
    if d < 2:
        raise DimensionError("random_density needs d >= 2")
    g = _ginibre(d, rng)
    rho = g @ g.conj().T
    return DensityMatrix(rho / np.trace(rho).real, (d,) if dims is None else dims)


def random_pure(d: int, rng: np.random.Generator, dims=None) -> PureState:
    v = _ginibre(d, rng, 1)[:, 0]
    return PureState(v / np.linalg.norm(v), (d,) if dims is None else dims)


def random_separable(dims, k: int, rng: np.random.Generator) -> SeparableEnsemble:
    """Mixture of ``k`` Haar-random pure product states with uniform-then-normalised weights."""
    dims = as_dims(dims)
    if k < 1:
        raise ValueError("need at least one product term")
    da, db = dims.dims
    weights = rng.uniform(size=k)
    weights = weights / weights.sum()
    factors = [(random_pure(da, rng).density(), random_pure(db, rng).density()) for _ in range(k)]
    return SeparableEnsemble(weights, tuple(factors))


def random_dichotomic_effect(d: int, rng: np.random.Generator, dims=None) -> PovmEffect:
    """E = R / (lambda_max(R) (1 + u)) with R a random Gram matrix and u ~ U[0, 1]."""
    if d < 2:
        raise DimensionError("random_dichotomic_effect needs d >= 2")
    g = _ginibre(d, rng)
    r = g @ g.conj().T
    u = rng.uniform()
    lam = np.linalg.eigvalsh(r)[-1]
    return PovmEffect(r / (lam * (1 + u)), (d,) if dims is None else dims)


# -- named states -------------------------------------------------------------


def max_entangled_vector(d: int) -> np.ndarray:
    return np.eye(d).reshape(-1).astype(complex) / np.sqrt(d)


def singlet_vector() -> np.ndarray:
    return np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)


def _check_prob(name, p):
    if not 0 <= p <= 1:
        raise ValueError(f"{name}: parameter p={p} outside [0, 1]")


def named_state(name: str, p: float | None = None, d: int | None = None) -> DensityMatrix:
    """Standard states: singlet, bell_phi_plus, werner(p), maximally_mixed(d), isotropic(p, d).

    ``maximally_mixed(d)`` is a single system of dimension d; the two-party
    states act on 2x2 except isotropic, which acts on d x d.
    """
    if name == "singlet":
        v = singlet_vector()
        return DensityMatrix(np.outer(v, v.conj()), (2, 2))
    if name == "bell_phi_plus":
        v = max_entangled_vector(2)
        return DensityMatrix(np.outer(v, v.conj()), (2, 2))
    if name == "werner":
        if p is None:
            raise ValueError("werner needs p")
        _check_prob(name, p)
        v = singlet_vector()
        return DensityMatrix(p * np.outer(v, v.conj()) + (1 - p) * np.eye(4) / 4, (2, 2))
    if name == "maximally_mixed":
        d = 2 if d is None else int(d)
        if d < 1:
            raise ValueError("maximally_mixed needs d >= 1")
        return DensityMatrix(np.eye(d) / d, (d,))
    if name == "isotropic":
        if p is None:
            raise ValueError("isotropic needs p")
        _check_prob(name, p)
        d = 2 if d is None else int(d)
        v = max_entangled_vector(d)
        return DensityMatrix(p * np.outer(v, v.conj()) + (1 - p) * np.eye(d * d) / d**2, (d, d))
    raise ValueError(f"unknown state name {name!r}")


# -- state files --------------------------------------------------------------


def format_complex_lines(mat: np.ndarray) -> list[str]:
    return [f"{float(z.real)!r} {float(z.imag)!r}" for z in np.asarray(mat, dtype=complex).reshape(-1)]


def parse_complex_lines(lines: Sequence[str], n: int) -> np.ndarray:
    if len(lines) < n:
        raise ValueError(f"expected {n} numeric lines, found {len(lines)}")
    vals = np.empty(n, dtype=complex)
    for k, line in enumerate(lines[:n]):
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"malformed numeric line {line!r}")
        vals[k] = complex(float(parts[0]), float(parts[1]))
    return vals


def write_state(path, rho) -> None:
    rho = rho if isinstance(rho, DensityMatrix) else DensityMatrix(rho, (2, 2))
    if len(rho.dims) != 2:
        raise DimensionError("state files hold bipartite states")
    da, db = rho.dims.dims
    text = "\n".join([f"dims {da} {db}", *format_complex_lines(rho.mat)]) + "\n"
    Path(path).write_text(text)


def read_state(path) -> DensityMatrix:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    head = lines[0].split()
    if len(head) != 3 or head[0] != "dims":
        raise ValueError(f"state file must start with 'dims d_A d_B', got {lines[0]!r}")
    da, db = int(head[1]), int(head[2])
    n = da * db
    vals = parse_complex_lines(lines[1:], n * n)
    return DensityMatrix(vals.reshape(n, n), (da, db))
