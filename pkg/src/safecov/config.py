"""Scenario configuration: INI schema, validation and checksums.

A scenario file is plain INI (``key = value`` under ``[section]`` headers).
Vectors are comma separated; point lists separate points with ``;``::

    [scenario]
    schema = 1
    name = demo
    mode = cbf
    n = 2
    T = 10
    dt = 0.005

    [agents]
    initial_positions = 0.5, 0.5; 2.0, 2.0

See ``schema.md`` next to the bundled scenarios for every key and default.
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .geometry import DomainPolygon, GeometryError

SCHEMA_VERSION = 1
MODES = ("nominal", "cbf")
DISTURBANCE_PROFILES = ("piecewise", "none")
DENSITY_KINDS = ("gaussian", "uniform")


class ConfigError(ValueError):
    """Scenario file could not be parsed or violates an invariant."""


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    mode: str = "cbf"
    n: int = 8
    T: float = 30.0
    dt: float = 0.005
    seed: int = 0
    # agents
    initial_positions: tuple = ()
    theta_true: tuple = (0.5,)
    k_p: float = 1.0
    r_safe: float = 0.25
    sensing_range: float = math.inf
    # adaptation and robustness margins
    L: int = 5
    alpha: float = 0.1
    nu: float = 0.1
    mu: float = 2.0
    E: float = 0.2
    V_z: float = 10.0
    d_bar: float = 20.0
    # disturbance
    disturbance: str = "piecewise"
    d_max: float = 1.0
    # density
    density: str = "gaussian"
    density_mean: tuple = (1.75, 1.75)
    density_sigma: tuple = (0.3, 0.3)
    # domain and numerics
    domain: tuple = ((0.0, 0.0), (2.5, 0.0), (2.5, 2.5), (0.0, 2.5))
    quadrature: int = 4
    outside_policy: str = "abort"

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def N(self) -> int:
        return 2 * self.L + 1

    def theta_vector(self) -> np.ndarray:
        th = np.asarray(self.theta_true, dtype=float)
        return np.full(self.n, th[0]) if th.size == 1 else th

    def positions(self) -> np.ndarray:
        return np.asarray(self.initial_positions, dtype=float).reshape(-1, 2)

    def domain_polygon(self) -> DomainPolygon:
        return DomainPolygon(np.asarray(self.domain, dtype=float))

    def replace(self, **changes) -> "ScenarioConfig":
        cfg = dataclasses.replace(self, **changes)
        cfg.validate()
        return cfg

    def as_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = _plain(v)
        return out

    def checksum(self) -> str:
        """SHA-256 over every field, canonically serialised."""
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def validate(self) -> None:
        def bad(key, msg):
            raise ConfigError(f"{key}: {msg}")

        if self.mode not in MODES:
            bad("scenario.mode", f"must be one of {MODES}, got {self.mode!r}")
        if self.n < 1:
            bad("scenario.n", "need at least one agent")
        if not self.T > 0.0:
            bad("scenario.T", "horizon must be positive")
        if not self.dt > 0.0 or self.dt > self.T:
            bad("scenario.dt", "step must be positive and no longer than T")
        if abs(self.steps * self.dt - self.T) > 1e-9 * self.T:
            bad("scenario.dt", f"T = {self.T} is not a whole number of steps of {self.dt}")
        if not 0.0 < self.alpha < 1.0:
            bad("adaptation.alpha", "must lie in (0, 1)")
        theta = self.theta_vector()
        if theta.size != self.n:
            bad("agents.theta_true", f"expected 1 or {self.n} values, got {theta.size}")
        for i, th in enumerate(theta):
            if not self.alpha <= th <= 1.0:
                bad(
                    "agents.theta_true",
                    f"agent {i} has theta = {th}; actuator effectiveness must lie in "
                    f"[alpha, 1] = [{self.alpha}, 1] (theta = 0 leaves the agent uncontrollable)",
                )
        if not self.r_safe > 0.0:
            bad("agents.r_safe", "must be positive")
        if not self.sensing_range > 0.0:
            bad("agents.sensing_range", "must be positive (use inf for unlimited)")
        if self.k_p <= 0.0:
            bad("agents.k_p", "must be positive")
        if self.L < 1:
            bad("adaptation.L", "need at least one harmonic pair")
        for key in ("nu", "mu", "d_bar"):
            if not getattr(self, key) > 0.0:
                bad(f"adaptation.{key}", "must be positive")
        for key in ("E", "V_z", "d_max"):
            if getattr(self, key) < 0.0:
                bad(f"adaptation.{key}" if key != "d_max" else "disturbance.d_max", "must be non-negative")
        if self.disturbance not in DISTURBANCE_PROFILES:
            bad("disturbance.profile", f"must be one of {DISTURBANCE_PROFILES}")
        if self.density not in DENSITY_KINDS:
            bad("density.kind", f"must be one of {DENSITY_KINDS}")
        if self.density == "gaussian" and (len(self.density_sigma) != 2 or min(self.density_sigma) <= 0.0):
            bad("density.sigma", "need two positive values")
        if self.quadrature < 1:
            bad("numerics.quadrature", "must be >= 1")
        if self.outside_policy not in ("abort", "steer_back"):
            bad("numerics.outside_policy", "must be 'abort' or 'steer_back'")
        try:
            domain = self.domain_polygon()
        except GeometryError as exc:
            bad("domain.vertices", str(exc))
        pos = self.positions()
        if len(pos) != self.n:
            bad("agents.initial_positions", f"expected {self.n} points, got {len(pos)}")
        for i, p in enumerate(pos):
            if not domain.contains(p):
                bad("agents.initial_positions", f"agent {i} at ({p[0]}, {p[1]}) is outside the domain")
        if self.n > 1:
            diff = pos[:, None, :] - pos[None, :, :]
            dist = np.sqrt((diff**2).sum(-1))
            np.fill_diagonal(dist, np.inf)
            i, j = np.unravel_index(np.argmin(dist), dist.shape)
            i, j = sorted((int(i), int(j)))
            if dist[i, j] <= 1e-9:
                bad("agents.initial_positions", f"agents {i} and {j} coincide")
            if self.mode == "cbf" and dist[i, j] ** 2 - (2.0 * self.r_safe) ** 2 <= 0.0:
                bad(
                    "agents.initial_positions",
                    f"agents {i} and {j} start {dist[i, j]:.6g} m apart; safety disks of radius "
                    f"{self.r_safe} overlap, so the initial barrier value is not positive",
                )


def _plain(v):
    if isinstance(v, (tuple, list, np.ndarray)):
        return [_plain(x) for x in v]
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


# (section, key) -> (field, parser)
def _floats(s: str) -> tuple:
    return tuple(float(x) for x in s.replace(",", " ").split())


def _points(s: str) -> tuple:
    pts = [_floats(chunk) for chunk in s.split(";") if chunk.strip()]
    for p in pts:
        if len(p) != 2:
            raise ValueError(f"point {p} does not have two coordinates")
    return tuple(pts)


_SCHEMA = {
    ("scenario", "name"): ("name", str),
    ("scenario", "mode"): ("mode", str),
    ("scenario", "n"): ("n", int),
    ("scenario", "T"): ("T", float),
    ("scenario", "dt"): ("dt", float),
    ("scenario", "seed"): ("seed", int),
    ("agents", "initial_positions"): ("initial_positions", None),
    ("agents", "theta_true"): ("theta_true", _floats),
    ("agents", "k_p"): ("k_p", float),
    ("agents", "r_safe"): ("r_safe", float),
    ("agents", "sensing_range"): ("sensing_range", float),
    ("adaptation", "L"): ("L", int),
    ("adaptation", "alpha"): ("alpha", float),
    ("adaptation", "nu"): ("nu", float),
    ("adaptation", "mu"): ("mu", float),
    ("adaptation", "E"): ("E", float),
    ("adaptation", "V_z"): ("V_z", float),
    ("adaptation", "d_bar"): ("d_bar", float),
    ("disturbance", "profile"): ("disturbance", str),
    ("disturbance", "d_max"): ("d_max", float),
    ("density", "kind"): ("density", str),
    ("density", "mean"): ("density_mean", _floats),
    ("density", "sigma"): ("density_sigma", _floats),
    ("domain", "vertices"): ("domain", _points),
    ("numerics", "quadrature"): ("quadrature", int),
    ("numerics", "outside_policy"): ("outside_policy", str),
}
_REQUIRED = {("scenario", "schema"), ("scenario", "name"), ("scenario", "n"), ("agents", "initial_positions")}


def random_positions(domain: DomainPolygon, n: int, min_sep: float, seed: int) -> tuple:
    """Rejection-sample ``n`` points in ``domain`` at least ``min_sep`` apart."""
    rng = np.random.default_rng(seed)
    v = domain.vertices
    lo, hi = v.min(axis=0), v.max(axis=0)
    pts = []
    for _ in range(100000):
        q = lo + (hi - lo) * rng.random(2)
        if domain.contains(q, tol=0.0) and all(np.hypot(*(q - p)) > min_sep for p in pts):
            pts.append(q)
            if len(pts) == n:
                return tuple(tuple(float(c) for c in p) for p in pts)
    raise ConfigError(f"agents.initial_positions: could not place {n} agents {min_sep} m apart")


def parse_config(text: str, source: str = "<string>") -> ScenarioConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: malformed file: {exc}") from None
    for sec, key in sorted(_REQUIRED):
        if not cp.has_option(sec, key):
            raise ConfigError(f"{source}: missing required field {sec}.{key}")
    schema = cp.get("scenario", "schema").strip()
    if schema != str(SCHEMA_VERSION):
        raise ConfigError(f"{source}: scenario.schema = {schema} is not supported (expected {SCHEMA_VERSION})")
    known = set(_SCHEMA) | {("scenario", "schema")}
    for sec in cp.sections():
        for key in cp.options(sec):
            if (sec, key) not in known:
                raise ConfigError(f"{source}: unknown field {sec}.{key}")
    values = {}
    raw_positions = None
    for (sec, key), (name, conv) in _SCHEMA.items():
        if not cp.has_option(sec, key):
            continue
        raw = cp.get(sec, key).strip()
        if name == "initial_positions":
            raw_positions = raw
            continue
        try:
            values[name] = conv(raw)
        except ValueError as exc:
            raise ConfigError(f"{source}: {sec}.{key} = {raw!r}: {exc}") from None
    cfg = ScenarioConfig(**values)
    if raw_positions.lower() == "random":
        try:
            domain = cfg.domain_polygon()
        except GeometryError as exc:
            raise ConfigError(f"{source}: domain.vertices: {exc}") from None
        pts = random_positions(domain, cfg.n, 2.0 * cfg.r_safe + 1e-6, cfg.seed)
    else:
        try:
            pts = _points(raw_positions)
        except ValueError as exc:
            raise ConfigError(f"{source}: agents.initial_positions: {exc}") from None
    cfg = dataclasses.replace(cfg, initial_positions=pts)
    try:
        cfg.validate()
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return cfg


def load_config(path) -> ScenarioConfig:
    """Load a scenario file, or a bundled scenario by name (e.g. ``paper_sec4``)."""
    p = Path(path)
    if not p.exists() and p.suffix == "" and p.name == str(path):
        bundled = resources.files("safecov") / "scenarios" / f"{path}.ini"
        if bundled.is_file():
            return parse_config(bundled.read_text(), source=str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read scenario file: {exc.strerror}") from None
    return parse_config(text, source=str(path))


def bundled_scenarios() -> list[str]:
    root = resources.files("safecov") / "scenarios"
    return sorted(f.name[:-4] for f in root.iterdir() if f.name.endswith(".ini"))


def to_ini(cfg: ScenarioConfig) -> str:
    """Serialise a config back to the INI schema (positions written explicitly)."""
    def fmt(v):
        if isinstance(v, float):
            return "inf" if math.isinf(v) else repr(v)
        if isinstance(v, tuple) and v and isinstance(v[0], tuple):
            return "; ".join(", ".join(repr(float(c)) for c in p) for p in v)
        if isinstance(v, tuple):
            return ", ".join(repr(float(c)) for c in v)
        return str(v)

    sections: dict[str, list[str]] = {"scenario": [f"schema = {SCHEMA_VERSION}"]}
    for (sec, key), (name, _) in _SCHEMA.items():
        sections.setdefault(sec, []).append(f"{key} = {fmt(getattr(cfg, name))}")
    return "\n".join(f"[{s}]\n" + "\n".join(lines) + "\n" for s, lines in sections.items())
