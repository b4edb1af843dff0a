"""Flat ``key = value`` scenario configs and the small expression language
used for state and channel specs, e.g. ``werner(0.2:0.4:11)`` or
``local_pair(depolarizing(2, 0.3), amplitude_damping(0.1))``."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from .errors import ConfigError

SCENARIOS = {
    "reduction-check": "maximally-entangled-POVM identities I = tr(W rho)/(dA dB), N = F/(dA dB)",
    "separable-positivity": "random separable states and effects; N and F must stay nonnegative",
    "loophole-sweep": "efficiency grid -> verdicts and the exact identity N_m - RHS = C N_i",
    "mc-events": "event-level simulation against the analytic corrupted probabilities",
    "noise-sweep": "noisy quantum inputs: I vs N per channel on the configured states",
    "new-vs-ew": "search for states with I >= 0 > N (nonlinear detects, linear misses)",
}

REQUIRED = {"noise-sweep": ("noise",)}

# scenarios whose natural state is not the singlet
DEFAULT_STATE = {"reduction-check": "random", "separable-positivity": "random_separable"}

KEYS = (
    "scenario",
    "d_a",
    "d_b",
    "state",
    "psi_choice",
    "effects",
    "eta_plus",
    "eta_minus",
    "nbar",
    "trials",
    "seed",
    "noise",
    "out",
)


@dataclass(frozen=True)
class Grid:
    start: float
    stop: float
    steps: int

    def values(self) -> list[float]:
        return [float(v) for v in np.linspace(self.start, self.stop, self.steps)]


# -- expression parsing -------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<num>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)|(?P<name>[A-Za-z_][\w.\-/]*)|(?P<op>[(),:]))")


def _tokenize(text: str) -> list[tuple[str, str]]:
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ConfigError(f"cannot parse {text!r} at position {pos}")
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return out


def parse_call(text: str):
    """Parse ``name``, ``name(arg, ...)``, a number, or a ``start:stop:steps`` grid.

    Calls come back as ``(name, [args])``.
    """
    tokens = _tokenize(text)
    val, pos = _parse_expr(tokens, 0, text)
    if pos != len(tokens):
        raise ConfigError(f"trailing input in {text!r}")
    return val


def _number(s: str):
    f = float(s)
    return int(f) if re.fullmatch(r"[-+]?\d+", s) else f


def _parse_expr(tokens, pos, text):
    if pos >= len(tokens):
        raise ConfigError(f"unexpected end of {text!r}")
    kind, val = tokens[pos]
    if kind == "num":
        if pos + 1 < len(tokens) and tokens[pos + 1] == ("op", ":"):
            parts = [val]
            pos += 1
            while pos < len(tokens) and tokens[pos] == ("op", ":"):
                if pos + 1 >= len(tokens) or tokens[pos + 1][0] != "num":
                    raise ConfigError(f"malformed grid in {text!r}")
                parts.append(tokens[pos + 1][1])
                pos += 2
            return _make_grid(parts, text), pos
        return _number(val), pos + 1
    if kind == "name":
        pos += 1
        if pos < len(tokens) and tokens[pos] == ("op", "("):
            args = []
            pos += 1
            if tokens[pos] == ("op", ")"):
                return (val, args), pos + 1
            while True:
                arg, pos = _parse_expr(tokens, pos, text)
                args.append(arg)
                if pos >= len(tokens):
                    raise ConfigError(f"unclosed call in {text!r}")
                if tokens[pos] == ("op", ")"):
                    return (val, args), pos + 1
                if tokens[pos] != ("op", ","):
                    raise ConfigError(f"expected ',' or ')' in {text!r}")
                pos += 1
        return (val, []), pos
    raise ConfigError(f"unexpected {val!r} in {text!r}")


def _make_grid(parts, text) -> Grid:
    if len(parts) != 3:
        raise ConfigError(f"grid must be start:stop:steps, got {text!r}")
    start, stop = float(parts[0]), float(parts[1])
    if not re.fullmatch(r"\d+", parts[2]):
        raise ConfigError(f"grid steps must be an integer in {text!r}")
    steps = int(parts[2])
    if steps < 2:
        raise ConfigError(f"grid needs at least 2 steps, got {steps}")
    return Grid(start, stop, steps)


def expand(spec) -> list:
    """All concrete specs obtained by substituting grid values (grids vary jointly)."""
    grids = _collect_grids(spec)
    if not grids:
        return [spec]
    lengths = {g.steps for g in grids}
    if len(lengths) != 1:
        raise ConfigError("all grids inside one spec must have the same number of steps")
    n = lengths.pop()
    return [_substitute(spec, k) for k in range(n)]


def _collect_grids(spec) -> list[Grid]:
    if isinstance(spec, Grid):
        return [spec]
    if isinstance(spec, tuple):
        return [g for a in spec[1] for g in _collect_grids(a)]
    return []


def _substitute(spec, k):
    if isinstance(spec, Grid):
        return spec.values()[k]
    if isinstance(spec, tuple):
        return (spec[0], [_substitute(a, k) for a in spec[1]])
    return spec


def format_spec(spec) -> str:
    if isinstance(spec, tuple):
        name, args = spec
        return name if not args else f"{name}({','.join(format_spec(a) for a in args)})"
    if isinstance(spec, Grid):
        return f"{spec.start!r}:{spec.stop!r}:{spec.steps}"
    return repr(spec)


# -- builders -----------------------------------------------------------------


def build_channel(spec):
    from . import noise

    if isinstance(spec, noise.KrausChannel):
        return spec
    if not isinstance(spec, tuple):
        raise ConfigError(f"not a channel spec: {spec!r}")
    name, args = spec
    if name == "local_pair":
        if len(args) != 2:
            raise ConfigError("local_pair takes two channel specs")
        return noise.local_pair(build_channel(args[0]), build_channel(args[1]))
    if any(isinstance(a, tuple) for a in args):
        raise ConfigError(f"{name} takes numeric parameters only")
    try:
        return noise.standard_channels(name, *args)
    except (ValueError, IndexError, TypeError) as exc:
        raise ConfigError(f"bad channel {format_spec(spec)}: {exc}") from exc


def build_state(spec):
    """Named state from a parsed spec; ``random`` kinds are handled by the runner."""
    from .quantum import named_state

    name, args = spec
    try:
        if name in ("singlet", "bell_phi_plus"):
            return named_state(name)
        if name == "werner":
            return named_state(name, p=float(args[0]))
        if name == "isotropic":
            return named_state(name, p=float(args[0]), d=int(args[1]) if len(args) > 1 else 2)
        if name == "maximally_mixed":
            from .quantum import DensityMatrix

            da, db = (int(args[0]), int(args[1])) if len(args) == 2 else (2, 2)
            return DensityMatrix(np.eye(da * db) / (da * db), (da, db))
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"bad state {format_spec(spec)}: {exc}") from exc
    raise ConfigError(f"unknown state {name!r}")


RANDOM_STATES = ("random", "random_pure", "random_separable")


# -- config -------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    d_a: int = 2
    d_b: int = 2
    state: str = "singlet"
    psi_choice: str = "default"
    effects: str = "max_entangled"
    eta_plus: tuple[float, ...] = (1.0,)
    eta_minus: tuple[float, ...] = (1.0,)
    nbar: int = 10_000
    trials: int = 10
    seed: int = 0
    noise: str = "none"
    out: str | None = None
    base_dir: Path = field(default=Path("."), compare=False)

    @property
    def eta_grid(self) -> list[tuple[float, float]]:
        return list(product(self.eta_plus, self.eta_minus))

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p


def _parse_eta(key: str, raw: str) -> tuple[float, ...]:
    try:
        val = parse_call(raw)
    except ConfigError as exc:
        raise ConfigError(f"{key}: {exc}") from exc
    vals = val.values() if isinstance(val, Grid) else [val]
    if not all(isinstance(v, (int, float)) for v in vals):
        raise ConfigError(f"{key}: expected a number or start:stop:steps grid, got {raw!r}")
    for v in vals:
        if not 0 < v <= 1:
            raise ConfigError(f"{key}: efficiency {v} outside (0, 1]")
    return tuple(float(v) for v in vals)


def _parse_int(key: str, raw: str, lo: int = 0, hi: int | None = None) -> int:
    try:
        v = int(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    if v < lo or (hi is not None and v > hi):
        raise ConfigError(f"{key}: value {v} out of range")
    return v


def parse_config(text: str, base_dir=".") -> ScenarioConfig:
    raw: dict[str, str] = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {n}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {n}: duplicate key {key!r}")
        raw[key] = value
    if "scenario" not in raw:
        raise ConfigError("missing required key 'scenario'")
    scenario = raw["scenario"]
    if scenario not in SCENARIOS:
        raise ConfigError(f"scenario: unknown scenario {scenario!r}")
    for key in REQUIRED.get(scenario, ()):
        if key not in raw:
            raise ConfigError(f"scenario {scenario} requires key {key!r}")

    kw: dict = {"scenario": scenario, "base_dir": Path(base_dir)}
    if scenario in DEFAULT_STATE:
        kw["state"] = DEFAULT_STATE[scenario]
    if "d_a" in raw:
        kw["d_a"] = _parse_int("d_a", raw["d_a"], 2, 9)
    if "d_b" in raw:
        kw["d_b"] = _parse_int("d_b", raw["d_b"], 2, 9)
    for key in ("eta_plus", "eta_minus"):
        if key in raw:
            kw[key] = _parse_eta(key, raw[key])
    if "nbar" in raw:
        kw["nbar"] = _parse_int("nbar", raw["nbar"], 1)
    if "trials" in raw:
        kw["trials"] = _parse_int("trials", raw["trials"], 1)
    if "seed" in raw:
        kw["seed"] = _parse_int("seed", raw["seed"], 0, 2**64 - 1)
    for key in ("state", "psi_choice", "effects", "noise", "out"):
        if key in raw:
            kw[key] = raw[key]
    cfg = ScenarioConfig(**kw)
    _validate_specs(cfg)
    return cfg


def _validate_specs(cfg: ScenarioConfig):
    if cfg.d_a * cfg.d_b > 9:
        raise ConfigError("d_a * d_b above 9 is outside the supported size")
    if cfg.scenario == "separable-positivity" and _is_file_ref(cfg.state, cfg):
        raise ConfigError("state: separable-positivity draws its own states; use random_separable[(k)]")
    if not _is_file_ref(cfg.state, cfg):
        spec = parse_call(cfg.state)
        if not isinstance(spec, tuple):
            raise ConfigError(f"state: expected a state name, got {cfg.state!r}")
        if cfg.scenario == "separable-positivity" and spec[0] != "random_separable":
            raise ConfigError("state: separable-positivity draws its own states; use random_separable[(k)]")
        if spec[0] not in RANDOM_STATES:
            for s in expand(spec):
                st = build_state(s)
                if st.dims.dims != (cfg.d_a, cfg.d_b):
                    raise ConfigError(f"state: {format_spec(s)} has dims {st.dims.dims}, config says {(cfg.d_a, cfg.d_b)}")
    if cfg.psi_choice not in ("default", "product") and not _is_file_ref(cfg.psi_choice, cfg):
        raise ConfigError(f"psi_choice: expected default, product or an existing file, got {cfg.psi_choice!r}")
    if cfg.effects not in ("max_entangled", "random") and not _is_file_ref(cfg.effects, cfg):
        raise ConfigError(f"effects: expected max_entangled, random or an existing file, got {cfg.effects!r}")
    if cfg.noise != "none" and not _is_file_ref(cfg.noise, cfg):
        spec = parse_call(cfg.noise)
        for s in expand(spec):
            ch = build_channel(s)
            if ch.dim != cfg.d_a * cfg.d_b:
                raise ConfigError(f"noise: channel acts on dimension {ch.dim}, inputs span {cfg.d_a * cfg.d_b}")


def _is_file_ref(value: str, cfg: ScenarioConfig) -> bool:
    return ("/" in value or value.endswith((".txt", ".dat", ".state", ".chan"))) and cfg.resolve(value).is_file()


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)
