"""Uniform noise on the quantum inputs: Kraus channels, their adjoints,
separability-preservation probes and linear-vs-nonlinear robustness."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateDenominatorError, DimensionError
from .protocol import ProbabilityTable, _check_distribution, _local_dims, i_alpha, n_phi
from .quantum import (
    DimSpec,
    as_dims,
    format_complex_lines,
    kron,
    min_pt_eigenvalue,
    parse_complex_lines,
    permute_subsystems,
    random_separable,
)
from .witness import InputBasis, WitnessBundle

COMPLETENESS_TOL = 1e-10


@dataclass(frozen=True)
class KrausChannel:
    """rho -> sum_k K_k rho K_k^dag.

    Adjoint maps (``is_adjoint``) are stored the same way but are unital
    rather than trace preserving, so completeness is not checked for them.
    """

    kraus: tuple[np.ndarray, ...]
    dim: int
    label: str = "channel"
    is_adjoint: bool = False

    def __post_init__(self):
        ops = tuple(np.array(k, dtype=complex) for k in self.kraus)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        if any(k.shape != (self.dim, self.dim) for k in ops):
            raise DimensionError(f"Kraus operators must all be {self.dim}x{self.dim}")
        for k in ops:
            k.setflags(write=False)
        object.__setattr__(self, "kraus", ops)
        if not self.is_adjoint:
            err = completeness_error(ops)
            if err > COMPLETENESS_TOL:
                raise ValueError(f"Kraus operators of {self.label!r} are not trace preserving (error {err:.3g})")

    def __call__(self, m) -> np.ndarray:
        return apply_channel(m, self)


def completeness_error(kraus: Sequence[np.ndarray]) -> float:
    d = kraus[0].shape[0]
    s = sum(k.conj().T @ k for k in kraus)
    return float(np.max(np.abs(s - np.eye(d))))


def apply_channel(m, ch: KrausChannel) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.shape != (ch.dim, ch.dim):
        raise DimensionError(f"operator shape {m.shape} does not match channel dimension {ch.dim}")
    return sum(k @ m @ k.conj().T for k in ch.kraus)


def adjoint_channel(ch: KrausChannel) -> KrausChannel:
    """Heisenberg-picture dual: M -> sum_k K_k^dag M K_k."""
    label = ch.label[:-2] if ch.label.endswith("^+") else ch.label + "^+"
    return KrausChannel(tuple(k.conj().T for k in ch.kraus), ch.dim, label, not ch.is_adjoint)


# -- standard channels --------------------------------------------------------


def _weyl_operators(d: int) -> list[np.ndarray]:
    omega = np.exp(2j * np.pi / d)
    shift = np.roll(np.eye(d), 1, axis=0)
    clock = np.diag(omega ** np.arange(d))
    return [np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b) for a in range(d) for b in range(d)]


def identity_channel(d: int) -> KrausChannel:
    return KrausChannel((np.eye(d),), d, f"identity({d})")


def depolarizing(d: int, p: float) -> KrausChannel:
    """rho -> (1 - p) rho + p tr(rho) I/d via the d^2 Weyl operators."""
    if not 0 <= p <= 1:
        raise ValueError(f"depolarizing probability {p} outside [0, 1]")
    ops = _weyl_operators(d)
    kraus = [np.sqrt(1 - p + p / d**2) * ops[0]] + [np.sqrt(p / d**2) * w for w in ops[1:]]
    return KrausChannel(tuple(kraus), d, f"depolarizing({d},{float(p)!r})")


def amplitude_damping(gamma: float) -> KrausChannel:
    if not 0 <= gamma <= 1:
        raise ValueError(f"damping {gamma} outside [0, 1]")
    k0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]])
    k1 = np.array([[0, np.sqrt(gamma)], [0, 0]])
    return KrausChannel((k0, k1), 2, f"amplitude_damping({float(gamma)!r})")


def local_pair(ch_a: KrausChannel, ch_b: KrausChannel) -> KrausChannel:
    kraus = tuple(np.kron(ka, kb) for ka in ch_a.kraus for kb in ch_b.kraus)
    return KrausChannel(kraus, ch_a.dim * ch_b.dim, f"local_pair({ch_a.label},{ch_b.label})")


def global_from_kraus(kraus: Sequence[np.ndarray], label: str = "global") -> KrausChannel:
    kraus = [np.asarray(k, dtype=complex) for k in kraus]
    return KrausChannel(tuple(kraus), kraus[0].shape[0], label)


def swap_rotation(theta: float, weight: float = 1.0) -> KrausChannel:
    """Two-qubit channel applying exp(-i theta SWAP) with probability ``weight``.

    Kraus pair sqrt(w) U and sqrt(1 - w) I; entangling for theta not a
    multiple of pi/2.
    """
    swap = np.eye(4)[[0, 2, 1, 3]]
    u = np.cos(theta) * np.eye(4) - 1j * np.sin(theta) * swap
    kraus = [np.sqrt(weight) * u]
    if weight < 1:
        kraus.append(np.sqrt(1 - weight) * np.eye(4))
    return global_from_kraus(kraus, f"swap_rotation({float(theta)!r},{float(weight)!r})")


def xy_rotation(theta: float, weight: float = 1.0) -> KrausChannel:
    """Two-qubit channel applying exp(-i theta X (x) Y) with probability ``weight``.

    At theta = pi/4 this sends |01> to the singlet, so its adjoint can turn
    product effects into operators a SWAP-type witness flags.
    """
    sx = np.array([[0, 1], [1, 0]])
    sy = np.array([[0, -1j], [1j, 0]])
    u = np.cos(theta) * np.eye(4) - 1j * np.sin(theta) * np.kron(sx, sy)
    kraus = [np.sqrt(weight) * u]
    if weight < 1:
        kraus.append(np.sqrt(1 - weight) * np.eye(4))
    return global_from_kraus(kraus, f"xy_rotation({float(theta)!r},{float(weight)!r})")


def random_local_kraus(d: int, n_kraus: int, rng: np.random.Generator) -> KrausChannel:
    """Random CPTP map from a Haar-ish isometry: stack of Ginibre blocks orthonormalised."""
    g = (rng.standard_normal((n_kraus * d, d)) + 1j * rng.standard_normal((n_kraus * d, d))) / np.sqrt(2)
    q, _ = np.linalg.qr(g)
    return KrausChannel(tuple(q.reshape(n_kraus, d, d)), d, f"random_kraus({d},{n_kraus})")


def standard_channels(name: str, *params) -> KrausChannel:
    """Build a channel by name.

    identity(d), depolarizing(d, p), amplitude_damping(gamma),
    local_pair(ch_a, ch_b), global_from_kraus(list_of_matrices),
    swap_rotation(theta[, weight]), xy_rotation(theta[, weight]).
    """
    if name == "identity":
        return identity_channel(int(params[0]) if params else 2)
    if name == "depolarizing":
        return depolarizing(int(params[0]), float(params[1]))
    if name == "amplitude_damping":
        return amplitude_damping(float(params[0]))
    if name == "local_pair":
        return local_pair(params[0], params[1])
    if name == "global_from_kraus":
        return global_from_kraus(params[0])
    if name == "swap_rotation":
        return swap_rotation(*(float(p) for p in params))
    if name == "xy_rotation":
        return xy_rotation(*(float(p) for p in params))
    raise ValueError(f"unknown channel {name!r}")


# -- four-party application ---------------------------------------------------


def apply_on_subsystems(m, dims, targets: Sequence[int], ch: KrausChannel) -> np.ndarray:
    """Apply ``ch`` to the listed subsystems (in the listed order), identity elsewhere."""
    dims = as_dims(dims)
    targets = [int(t) for t in targets]
    n = len(dims)
    if len(set(targets)) != len(targets) or any(not 0 <= t < n for t in targets):
        raise DimensionError(f"invalid target subsystems {targets}")
    tdim = int(np.prod([dims[t] for t in targets]))
    if tdim != ch.dim:
        raise DimensionError(f"targets span dimension {tdim}, channel acts on {ch.dim}")
    rest = [k for k in range(n) if k not in targets]
    perm = targets + rest
    moved = permute_subsystems(m, dims, perm)
    rdim = dims.total // tdim
    out = sum(np.kron(k, np.eye(rdim)) @ moved @ np.kron(k, np.eye(rdim)).conj().T for k in ch.kraus)
    inverse = list(np.argsort(perm))
    return permute_subsystems(out, DimSpec([dims[p] for p in perm]), inverse)


def noisy_distribution_direct(rho, tau, omega, a1, b1, ch: KrausChannel) -> np.ndarray:
    """Four-outcome distribution for one noisy input pair via the full four-party operator."""
    da, db = tau.shape[0], omega.shape[0]
    state = kron(tau, rho, omega)
    noisy = apply_on_subsystems(state, (da, da, db, db), [0, 3], ch)
    a_eff = [np.eye(da * da) - a1, a1]
    b_eff = [np.eye(db * db) - b1, b1]
    return np.array([[np.trace(noisy @ np.kron(a_eff[a], b_eff[b])).real for b in range(2)] for a in range(2)])


def noisy_inputs(basis: InputBasis, ch: KrausChannel) -> tuple[np.ndarray, np.ndarray]:
    """Lambda(tau_s (x) omega_t) for every pair, shape (n_a, n_b, D, D), and Lambda(m_A (x) m_B)."""
    da, db = basis.dims
    taus = np.array([s.mat for s in basis.side_a])
    omegas = np.array([s.mat for s in basis.side_b])
    pairs = np.einsum("sij,tkl->stikjl", taus, omegas).reshape(len(taus), len(omegas), da * db, da * db)
    kraus = np.array(ch.kraus)
    out = np.einsum("kab,stbc,kdc->stad", kraus, pairs, kraus.conj())
    mm = np.eye(da * db) / (da * db)
    return out, sum(k @ mm @ k.conj().T for k in ch.kraus)


def noisy_table(rho, basis: InputBasis, a1, b1, input_noise: KrausChannel) -> ProbabilityTable:
    """Statistics when every input pair (tau_s, omega_t) and (m_A, m_B) passes through the noise first."""
    da, db = _local_dims(rho)
    if input_noise.dim != da * db:
        raise DimensionError(f"input noise acts on dimension {input_noise.dim}, inputs span {da * db}")
    if basis.dims != (da, db):
        raise DimensionError(f"basis dims {basis.dims} differ from state dims {(da, db)}")
    r = np.asarray(rho, dtype=complex).reshape(da, db, da, db)
    a1 = np.asarray(a1, dtype=complex)
    b1 = np.asarray(b1, dtype=complex)
    a_both = np.stack([np.eye(da * da) - a1, a1]).reshape(2, da, da, da, da)
    b_both = np.stack([np.eye(db * db) - b1, b1]).reshape(2, db, db, db, db)
    y, y_mm = noisy_inputs(basis, input_noise)
    na, nb = basis.shape
    y = y.reshape(na, nb, da, db, da, db)
    # Y[p,q;P,Q] on (A_in, B_in), rho[i,k;j,l] on (A, B), A[P,j;p,i] on (A_in, A), B[l,Q;k,q] on (B, B_in)
    spec = "stpqPQ,ikjl,aPjpi,blQkq->stab"
    full = np.einsum(spec, y, r, a_both, b_both, optimize=True).real
    mm = np.einsum(spec, y_mm.reshape(1, 1, da, db, da, db), r, a_both, b_both, optimize=True).real[0, 0]
    _check_distribution(full)
    _check_distribution(mm)
    return ProbabilityTable(full, mm, (da, db), "measured")


# -- preservation probe -------------------------------------------------------


@dataclass(frozen=True)
class PreservationReport:
    status: str
    samples_tested: int
    counterexample: tuple[np.ndarray, np.ndarray] | None = None


def preservation_probe(ch: KrausChannel, dims, n_samples: int, rng: np.random.Generator, max_terms: int = 4) -> PreservationReport:
    """Sample separable PSD operators, push them through the adjoint of ``ch``,
    and look for an output with a negative partial transpose."""
    dims = as_dims(dims)
    if dims.total != ch.dim or len(dims) != 2:
        raise DimensionError("probe dims must be bipartite and match the channel")
    decisive = sorted(dims.dims) in ([2, 2], [2, 3])
    adj = adjoint_channel(ch)
    for k in range(n_samples):
        terms = int(rng.integers(1, max_terms + 1))
        op = random_separable(dims, terms, rng).assemble().mat * rng.uniform(0.1, 10.0)
        out = apply_channel(op, adj)
        if min_pt_eigenvalue(out, dims) < -1e-9 * max(1.0, np.trace(out).real):
            return PreservationReport("violated", k + 1, (op, out))
    return PreservationReport("preserves" if decisive else "inconclusive", n_samples)


# -- linear vs nonlinear ------------------------------------------------------


@dataclass(frozen=True)
class RobustnessRecord:
    label: str
    i_value: float
    n_value: float
    i_misdetects: bool
    n_misdetects: bool
    error: str = ""


def compare_ew_new(rho, basis: InputBasis, a1, b1, channels: Sequence[KrausChannel], bundle: WitnessBundle) -> list[RobustnessRecord]:
    records = []
    for ch in channels:
        table = noisy_table(rho, basis, a1, b1, ch)
        i_val = i_alpha(table, bundle.alpha)
        try:
            n_val = n_phi(table, bundle)
        except DegenerateDenominatorError as exc:
            records.append(RobustnessRecord(ch.label, i_val, float("nan"), i_val < 0, False, str(exc)))
            continue
        if n_val > i_val + 1e-12:
            raise AssertionError(f"N exceeds I for {ch.label}: {n_val!r} > {i_val!r}")
        records.append(RobustnessRecord(ch.label, i_val, n_val, i_val < 0, n_val < 0))
    return records


# -- channel files ------------------------------------------------------------


def write_channel(path, ch: KrausChannel) -> None:
    lines = [f"kraus {len(ch.kraus)} {ch.dim}"]
    for k in ch.kraus:
        lines += format_complex_lines(k)
    Path(path).write_text("\n".join(lines) + "\n")


def parse_channel_text(text: str) -> KrausChannel:
    """Either ``kraus n d`` followed by n matrices in the state-file number
    format, or a channel name line followed by one parameter per line (nested
    channels for ``local_pair`` are written inline, e.g. ``depolarizing(2, 0.3)``)."""
    from .config import parse_call, build_channel

    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.strip().startswith("#")]
    head = lines[0].split()
    if head[0] == "kraus":
        n, d = int(head[1]), int(head[2])
        vals = parse_complex_lines(lines[1:], n * d * d)
        return global_from_kraus(list(vals.reshape(n, d, d)), "file")
    args = [parse_call(ln) for ln in lines[1:]]
    return build_channel((head[0], args))


def read_channel(path) -> KrausChannel:
    return parse_channel_text(Path(path).read_text())
