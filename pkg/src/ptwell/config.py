"""Scenario configuration files (TOML) and their validation."""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

from ptwell.errors import ConfigInvalid
from ptwell.grid import Grid
from ptwell.potentials import FAMILIES, PotentialSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

AUTO = "auto"

DEFAULT_TOLERANCES = {
    "bisection": 1e-4,
    "subspace_relative": 1e-7,
    "pairing_relative": 1e-10,
    "structure_relative": 1e-8,
    "threshold_agreement": 1e-3,
    "conjugation_spectrum": 1e-10,
    "conjugation_entries": 1e-9,
    "idempotency": 1e-8,
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one experiment.

    ``window_center``/``window_radius`` may be ``"auto"``: center at the
    reference eigenvalue, radius half its gap.  ``epsilon_max`` may be
    ``"auto"`` (twice the located threshold) and is capped by
    ``max_epsilon_ratio`` times the window radius.
    """

    name: str
    family: str
    params: dict
    extents: tuple
    nodes: tuple
    h: float
    ladder: tuple
    delta: float
    window_center: object = AUTO
    window_radius: object = AUTO
    contour_nodes: int = 32
    epsilon_max: object = AUTO
    epsilon_values: tuple = ()
    epsilon_levels: int = 5
    max_epsilon_ratio: float = 0.1
    conjugation_samples: int = 3
    direct_threshold: bool = True
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    seed: int = 20240229
    output: str | None = None
    source: str | None = None

    def potential(self) -> PotentialSpec:
        return FAMILIES[self.family](**self.params)

    def grid(self) -> Grid:
        return Grid(tuple(tuple(e) for e in self.extents), tuple(self.nodes))

    def numeric_dict(self) -> dict:
        """Fields that influence numbers (output location and source path excluded)."""
        d = asdict(self)
        d.pop("output")
        d.pop("source")
        return d

    @property
    def hash(self) -> str:
        blob = json.dumps(self.numeric_dict(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def check_epsilon(self, epsilon_max: float, radius: float) -> None:
        """Enforce ``epsilon_max <= max_epsilon_ratio * radius`` once the radius is known."""
        limit = self.max_epsilon_ratio * radius
        if epsilon_max > limit * (1 + 1e-12):
            raise ConfigInvalid([
                f"epsilon.max: {epsilon_max:.6g} exceeds {self.max_epsilon_ratio:g} x window "
                f"radius ({limit:.6g})"
            ])


def _positive(errors, key, value, integer=False):
    kind = int if integer else (int, float)
    if isinstance(value, bool) or not isinstance(value, kind) or not value > 0:
        errors.append(f"{key}: must be a positive {'integer' if integer else 'number'}, got {value!r}")
        return False
    return True


def _auto_or_positive(errors, key, value, allow_zero=False):
    if value == AUTO:
        return
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append(f"{key}: must be a number or \"auto\", got {value!r}")
    elif value < 0 or (value == 0 and not allow_zero):
        errors.append(f"{key}: must be positive, got {value!r}")


def from_dict(raw: dict, source: str | None = None) -> ScenarioConfig:
    """Validate a parsed TOML document; all field errors are reported at once."""
    errors: list[str] = []
    known = {"name", "seed", "potential", "grid", "semiclassical", "window", "epsilon",
             "tolerances", "output"}
    for key in raw:
        if key not in known:
            errors.append(f"{key}: unknown section")

    pot = raw.get("potential", {})
    family = pot.get("family")
    params = dict(pot.get("params", {}))
    spec = None
    if family not in FAMILIES:
        errors.append(f"potential.family: must be one of {sorted(FAMILIES)}, got {family!r}")
    else:
        if family == "tabulated" and "path" in params and source is not None:
            p = Path(params["path"])
            if not p.is_absolute():
                params["path"] = str((Path(source).parent / p).resolve())
        try:
            spec = FAMILIES[family](**params)
        except (TypeError, ValueError, OSError) as exc:
            errors.append(f"potential.params: {exc}")

    grid = raw.get("grid", {})
    nodes = grid.get("nodes")
    extents = grid.get("extents", spec.domain_box if spec is not None else None)
    if not isinstance(nodes, list) or not nodes:
        errors.append("grid.nodes: must be a list with one entry per axis")
        nodes = []
    else:
        for i, n in enumerate(nodes):
            if _positive(errors, f"grid.nodes[{i}]", n, integer=True) and n < 5:
                errors.append(f"grid.nodes[{i}]: need at least 5 nodes, got {n}")
    if extents is None or len(extents) != len(nodes):
        errors.append("grid.extents: must give one [lo, hi] pair per axis")
        extents = []
    else:
        extents = [list(map(float, e)) for e in extents]
        for i, (lo, hi) in enumerate(extents):
            if not hi > lo:
                errors.append(f"grid.extents[{i}]: upper bound must exceed lower bound")
    if spec is not None and nodes and len(nodes) != spec.dimension:
        errors.append(f"grid.nodes: potential is {spec.dimension}D, got {len(nodes)} axes")

    sc = raw.get("semiclassical", {})
    h = sc.get("h")
    _positive(errors, "semiclassical.h", h)
    ladder = sc.get("ladder", [h] if h is not None else [])
    if not isinstance(ladder, list) or not ladder:
        errors.append("semiclassical.ladder: must be a non-empty list")
        ladder = []
    for i, v in enumerate(ladder):
        _positive(errors, f"semiclassical.ladder[{i}]", v)
    delta = sc.get("delta")
    _positive(errors, "semiclassical.delta", delta)

    win = raw.get("window", {})
    center = win.get("center", AUTO)
    radius = win.get("radius", AUTO)
    if center != AUTO and (isinstance(center, bool) or not isinstance(center, (int, float))):
        errors.append(f"window.center: must be a number or \"auto\", got {center!r}")
    _auto_or_positive(errors, "window.radius", radius)
    contour = win.get("contour_nodes", 32)
    if _positive(errors, "window.contour_nodes", contour, integer=True) and contour < 4:
        errors.append("window.contour_nodes: need at least 4")

    eps = raw.get("epsilon", {})
    eps_max = eps.get("max", AUTO)
    _auto_or_positive(errors, "epsilon.max", eps_max)
    values = eps.get("values", [])
    if not isinstance(values, list):
        errors.append("epsilon.values: must be a list")
        values = []
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0:
            errors.append(f"epsilon.values[{i}]: must be a non-negative number, got {v!r}")
    levels = eps.get("levels", 5)
    _positive(errors, "epsilon.levels", levels, integer=True)
    ratio = eps.get("max_ratio", 0.1)
    _positive(errors, "epsilon.max_ratio", ratio)
    samples = eps.get("conjugation_samples", 3)
    if isinstance(samples, bool) or not isinstance(samples, int) or samples < 0:
        errors.append(f"epsilon.conjugation_samples: must be a non-negative integer, got {samples!r}")
    direct = eps.get("direct_threshold", True)
    if not isinstance(direct, bool):
        errors.append("epsilon.direct_threshold: must be true or false")

    tol = dict(DEFAULT_TOLERANCES)
    for key, value in raw.get("tolerances", {}).items():
        if key not in DEFAULT_TOLERANCES:
            errors.append(f"tolerances.{key}: unknown tolerance")
        elif _positive(errors, f"tolerances.{key}", value):
            tol[key] = float(value)

    # static form of the epsilon cap; "auto" radius is checked after the reference solve
    if not errors and eps_max != AUTO and radius != AUTO:
        if eps_max > ratio * radius * (1 + 1e-12):
            errors.append(f"epsilon.max: {eps_max} exceeds {ratio:g} x window radius {radius}")
    if not errors and radius != AUTO:
        too_big = [v for v in values if v > ratio * radius * (1 + 1e-12)]
        if too_big:
            errors.append(f"epsilon.values: {too_big[0]} exceeds {ratio:g} x window radius {radius}")

    seed = raw.get("seed", 20240229)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        errors.append(f"seed: must be a non-negative integer, got {seed!r}")

    if errors:
        raise ConfigInvalid(errors)
    return ScenarioConfig(
        name=str(raw.get("name", family)),
        family=family,
        params=params,
        extents=tuple(tuple(e) for e in extents),
        nodes=tuple(int(n) for n in nodes),
        h=float(h),
        ladder=tuple(float(v) for v in ladder),
        delta=float(delta),
        window_center=center if center == AUTO else float(center),
        window_radius=radius if radius == AUTO else float(radius),
        contour_nodes=int(contour),
        epsilon_max=eps_max if eps_max == AUTO else float(eps_max),
        epsilon_values=tuple(float(v) for v in values),
        epsilon_levels=int(levels),
        max_epsilon_ratio=float(ratio),
        conjugation_samples=int(samples),
        direct_threshold=direct,
        tolerances=tol,
        seed=int(seed),
        output=raw.get("output"),
        source=source,
    )


def bundled_scenarios() -> list[str]:
    root = resources.files("ptwell") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def load(path_or_name) -> ScenarioConfig:
    """Read a TOML file, or a bundled scenario given by name."""
    path = Path(path_or_name)
    if not path.exists():
        candidate = resources.files("ptwell") / "scenarios" / f"{path_or_name}.toml"
        if not candidate.is_file():
            raise ConfigInvalid([f"config: no file {str(path_or_name)!r} and no bundled scenario "
                                 f"of that name ({', '.join(bundled_scenarios())})"])
        text = candidate.read_text()
        source = str(candidate)
    else:
        text = path.read_text()
        source = str(path)
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigInvalid([f"config: {exc}"]) from exc
    return from_dict(raw, source)
