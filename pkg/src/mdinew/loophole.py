"""Lost and additional detection events: corrupted statistics, corrected
certification bounds, verdicts and event-level simulation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DegenerateDenominatorError, InfeasibleCorruptionError
from .quantum import make_rng
from .protocol import ProbabilityTable, build_table, i_value, n_phi
from .witness import WitnessBundle

DENOM_TOL = 1e-12

Case = Literal["lost_only", "additional_only", "general"]


@dataclass(frozen=True)
class EfficiencyModel:
    """Detection efficiencies eta_+ = N/(N + E_+) and eta_- = (N - E_-)/N."""

    eta_plus: float = 1.0
    eta_minus: float = 1.0
    nbar: int = 10_000
    case: Case = "general"

    def __post_init__(self):
        if not (0 < self.eta_plus <= 1 and 0 < self.eta_minus <= 1):
            raise ValueError(f"efficiencies must lie in (0, 1], got {self.eta_plus}, {self.eta_minus}")
        if self.nbar < 1:
            raise ValueError("nbar must be positive")
        if self.case == "lost_only" and self.eta_plus != 1:
            raise ValueError("lost_only model requires eta_plus = 1")
        if self.case == "additional_only" and self.eta_minus != 1:
            raise ValueError("additional_only model requires eta_minus = 1")
        if self.case not in ("lost_only", "additional_only", "general"):
            raise ValueError(f"unknown case {self.case!r}")

    @classmethod
    def lost_only(cls, eta_minus: float, nbar: int = 10_000) -> "EfficiencyModel":
        return cls(1.0, eta_minus, nbar, "lost_only")

    @classmethod
    def additional_only(cls, eta_plus: float, nbar: int = 10_000) -> "EfficiencyModel":
        return cls(eta_plus, 1.0, nbar, "additional_only")

    @classmethod
    def for_point(cls, eta_plus: float, eta_minus: float, nbar: int = 10_000) -> "EfficiencyModel":
        """Pick the narrowest case that describes the efficiency pair."""
        if eta_plus == 1:
            return cls.lost_only(eta_minus, nbar)
        if eta_minus == 1:
            return cls.additional_only(eta_plus, nbar)
        return cls(eta_plus, eta_minus, nbar, "general")

    @property
    def _denom(self) -> float:
        # eta_+ (eta_- + 1/eta_+ - 1), arranged to be exact at either corner
        return self.eta_plus * self.eta_minus + (1.0 - self.eta_plus)

    @property
    def C(self) -> float:
        """1 / (eta_- + 1/eta_+ - 1)."""
        return self.eta_plus / self._denom

    @property
    def shift(self) -> float:
        """(1 - C)/4, the constant every corrupted probability picks up."""
        return (self.eta_plus * (self.eta_minus - 1.0) + (1.0 - self.eta_plus)) / (4.0 * self._denom)

    @property
    def lost_events(self) -> int:
        return int(round((1 - self.eta_minus) * self.nbar))

    @property
    def additional_events(self) -> int:
        return int(round(self.nbar * (1 - self.eta_plus) / self.eta_plus))


def corrupt_probability(p_ideal, model: EfficiencyModel):
    """Measured probability C [P_i + (eta_- + 1/eta_+ - 2)/4] = C P_i + (1 - C)/4.

    Works elementwise on arrays.  Lost-only and additional-only models are
    the eta_+ = 1 and eta_- = 1 specialisations of this one formula; the
    arrangement below reduces to their closed forms without extra rounding.
    """
    return model.eta_plus * np.asarray(p_ideal) / model._denom + model.shift


def corrupt_lost_only(p_ideal, eta_minus: float):
    """P_i / eta_- - (1 - eta_-)/(4 eta_-), via the general transform."""
    out = corrupt_probability(p_ideal, EfficiencyModel.lost_only(eta_minus))
    direct = np.asarray(p_ideal) / eta_minus - (1 - eta_minus) / (4 * eta_minus)
    assert np.all(np.abs(out - direct) <= 1e-15), "lost-only specialisation drifted"
    return out


def corrupt_additional_only(p_ideal, eta_plus: float):
    """eta_+ [P_i + (1 - eta_+)/(4 eta_+)], via the general transform."""
    out = corrupt_probability(p_ideal, EfficiencyModel.additional_only(eta_plus))
    direct = eta_plus * (np.asarray(p_ideal) + (1 - eta_plus) / (4 * eta_plus))
    assert np.all(np.abs(out - direct) <= 1e-15), "additional-only specialisation drifted"
    return out


def corrupt_table(table: ProbabilityTable, model: EfficiencyModel) -> ProbabilityTable:
    if table.provenance != "ideal":
        raise ValueError(f"can only corrupt ideal tables, got provenance {table.provenance!r}")
    return ProbabilityTable(
        corrupt_probability(table.full, model),
        corrupt_probability(table.full_mm, model),
        table.dims,
        "corrupted",
    )


def corruption_feasible(table: ProbabilityTable, model: EfficiencyModel) -> bool:
    """True when every outcome has enough ideal weight to absorb its share of lost events."""
    floor = (1 - model.eta_minus) / 4
    return bool(np.all(table.full >= floor - 1e-15) and np.all(table.full_mm >= floor - 1e-15))


@dataclass(frozen=True)
class CorruptionOffsets:
    offset_alpha: float
    offset_beta: float
    offset_gamma: float
    C: float


def offsets(coeff_sums, model: EfficiencyModel) -> CorruptionOffsets:
    """Constant shifts (1 - C)/4 * sum(c) picked up by each I_c under corruption."""
    f = model.shift
    sa, sb, sg = coeff_sums
    return CorruptionOffsets(f * sa, f * sb, f * sg, model.C)


def case_offsets(coeff_sums, model: EfficiencyModel) -> CorruptionOffsets:
    """Offsets written in each case's own closed form (used to cross-check ``offsets``)."""
    sa, sb, sg = coeff_sums
    if model.case == "lost_only":
        f = (model.eta_minus - 1) / (4 * model.eta_minus)
    elif model.case == "additional_only":
        f = (1 - model.eta_plus) / 4
    else:
        f = (1 - model.C) / 4
    return CorruptionOffsets(f * sa, f * sb, f * sg, model.C)


def _guard(name: str, value: float):
    if value <= DENOM_TOL:
        raise DegenerateDenominatorError(name, value)


def certification_bound(table: ProbabilityTable, bundle: WitnessBundle, model: EfficiencyModel) -> float:
    """Right-hand side a measured nonlinear witness must stay below to certify entanglement."""
    off = offsets(bundle.coeff_sums, model)
    k = bundle.K
    p_mm = table.p11_mm
    ib = i_value(table, bundle.beta)
    ig = i_value(table, bundle.gamma)
    d1 = k * (p_mm - model.shift)
    d2 = k * p_mm
    _guard("K [P11_mm - (1 - C)/4]", d1)
    _guard("K P11_mm", d2)
    rhs = ((ib - off.offset_beta) ** 2 + (ig - off.offset_gamma) ** 2) / d1 - (ib**2 + ig**2) / d2 + off.offset_alpha
    if model.case == "lost_only":
        alt = lost_only_bound(table, bundle, model.eta_minus)
        if abs(alt - rhs) > 1e-12 * max(1.0, abs(rhs)):
            raise AssertionError(f"lost-only bound disagrees with general form: {alt!r} vs {rhs!r}")
    return float(rhs)


def lost_only_bound(table: ProbabilityTable, bundle: WitnessBundle, eta_minus: float) -> float:
    """The lost-event bound in its original form, with eta_- pulled out of the first denominator."""
    k = bundle.K
    p_mm = table.p11_mm
    ib = i_value(table, bundle.beta)
    ig = i_value(table, bundle.gamma)
    sa, sb, sg = bundle.coeff_sums
    f = (eta_minus - 1) / (4 * eta_minus)
    d1 = k * (eta_minus * p_mm + (1 - eta_minus) / 4)
    _guard("K (eta_- P11_mm + (1 - eta_-)/4)", d1)
    _guard("K P11_mm", k * p_mm)
    return float(
        eta_minus / d1 * ((ib - f * sb) ** 2 + (ig - f * sg) ** 2) - (ib**2 + ig**2) / (k * p_mm) + f * sa
    )


@dataclass(frozen=True)
class Verdict:
    n_measured: float
    bound_rhs: float
    certified: bool
    margin: float


def certify(table: ProbabilityTable, bundle: WitnessBundle, model: EfficiencyModel) -> Verdict:
    n_m = n_phi(table, bundle)
    rhs = certification_bound(table, bundle, model)
    return Verdict(n_m, rhs, bool(n_m < rhs), rhs - n_m)


# -- event-level simulation ---------------------------------------------------


@dataclass(frozen=True)
class EventCounts:
    """Per-outcome counts in the order (00, 01, 10, 11)."""

    counts: np.ndarray
    ideal: np.ndarray
    eps_plus: np.ndarray
    eps_minus: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _spread(total: int, rng: np.random.Generator, capacity: np.ndarray | None = None) -> np.ndarray:
    """Split ``total`` events over four outcomes: total // 4 each, remainder on random distinct outcomes."""
    base = np.full(4, total // 4, dtype=np.int64)
    rem = total - 4 * (total // 4)
    if capacity is not None and np.any(base > capacity):
        raise InfeasibleCorruptionError(f"cannot remove {total // 4} events from an outcome holding {capacity.min()}")
    for _ in range(100):
        extra = np.zeros(4, dtype=np.int64)
        extra[rng.choice(4, size=rem, replace=False)] = 1
        if capacity is None or np.all(base + extra <= capacity):
            return base + extra
    raise InfeasibleCorruptionError("no feasible assignment of the removal remainder after 100 draws")


def simulate_events(dist, model: EfficiencyModel, rng: np.random.Generator) -> tuple[EventCounts, np.ndarray]:
    """Draw ideal counts, then remove E_- and add E_+ events spread uniformly over outcomes."""
    p = np.clip(np.asarray(dist, dtype=float).reshape(4), 0, None)
    if abs(p.sum() - 1) > 1e-9:
        raise ValueError("ideal distribution must be normalised")
    ideal = rng.multinomial(model.nbar, p / p.sum())
    eps_minus = _spread(model.lost_events, rng, capacity=ideal)
    eps_plus = _spread(model.additional_events, rng)
    counts = ideal + eps_plus - eps_minus
    measured = (counts / counts.sum()).reshape(2, 2)
    return EventCounts(counts, ideal, eps_plus, eps_minus), measured


def simulate_table(table: ProbabilityTable, model: EfficiencyModel, rng: np.random.Generator) -> ProbabilityTable:
    """Event-level measurement of every input pair (s-major order, then the mixed pair)."""
    na, nb = table.shape
    full = np.empty_like(table.full)
    for s in range(na):
        for t in range(nb):
            full[s, t] = simulate_events(table.full[s, t], model, rng)[1]
    mm = simulate_events(table.full_mm, model, rng)[1]
    return ProbabilityTable(full, mm, table.dims, "measured")


def binomial_sigma(p_ideal, model: EfficiencyModel) -> np.ndarray:
    """Standard deviation of a measured probability driven by multinomial sampling of the ideal counts."""
    p = np.asarray(p_ideal, dtype=float)
    return model.C * np.sqrt(np.clip(p * (1 - p), 0, None) / model.nbar)


# -- critical efficiency ------------------------------------------------------


@dataclass(frozen=True)
class CriticalEfficiency:
    value: float
    monotone: bool
    flag: str
    grid: np.ndarray
    certified: np.ndarray


def critical_efficiency(
    rho,
    a1,
    b1,
    bundle: WitnessBundle,
    vary: Literal["plus", "minus"],
    fixed: float = 1.0,
    *,
    mode: Literal["exact", "mc"] = "exact",
    nbar: int = 10_000,
    seed: int = 0,
    floor: float = 1e-4,
    tol: float = 1e-4,
    grid_points: int = 32,
) -> CriticalEfficiency:
    """Smallest varied efficiency at which ``certify`` still succeeds.

    In ``mc`` mode every evaluation reuses the same seed, so all efficiencies
    share one set of ideal counts.  An infeasible removal or a nonpositive
    bound denominator counts as not certified; when every failure below the
    threshold is of that kind the result is flagged ``domain_limited``.
    """
    if vary not in ("plus", "minus"):
        raise ValueError("vary must be 'plus' or 'minus'")
    ideal = build_table(rho, bundle.basis, a1, b1)
    domain_failures = []

    def ok(eta: float) -> bool:
        ep, em = (eta, fixed) if vary == "plus" else (fixed, eta)
        model = EfficiencyModel.for_point(ep, em, nbar)
        try:
            if mode == "exact":
                table = corrupt_table(ideal, model)
            else:
                table = simulate_table(ideal, model, make_rng(seed))
            cert = certify(table, bundle, model).certified
        except (InfeasibleCorruptionError, DegenerateDenominatorError):
            domain_failures.append(eta)
            return False
        return cert

    if not ok(1.0):
        raise ValueError("state is not certified even at unit efficiency")
    grid = np.linspace(floor, 1.0, grid_points)
    cert = np.array([ok(float(e)) for e in grid])
    if cert.all():
        return CriticalEfficiency(floor, True, "always_certified", grid, cert)
    first = int(np.argmax(cert))
    monotone = bool(cert[first:].all() and not cert[:first].any())
    if not monotone:
        last_fail = int(np.nonzero(~cert)[0][-1])
        return CriticalEfficiency(float(grid[last_fail + 1]), False, "non_monotone", grid, cert)
    lo, hi = float(grid[first - 1]), float(grid[first])
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    failed = set(np.round(grid[~cert], 15)) | {round(lo, 15)}
    flag = "domain_limited" if failed <= set(np.round(domain_failures, 15)) else "bisection"
    return CriticalEfficiency(hi, True, flag, grid, cert)
