"""Problem descriptions shared by every solver route.

A scenario bundles the equation parameters (``alpha``, ``beta``), the spatial
domain, the data fields (initial value, forcing, source, prior history), and
the solver settings.  Fields form a closed declarative catalog rather than
arbitrary callables so that scenarios serialize to JSON, hash stably, and
reproduce bit-for-bit across machines.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Union

import numpy as np

from .errors import ParameterError, RangeError, ShapeError

__all__ = [
    "Interval",
    "Ball",
    "FullSpace",
    "Domain",
    "Zero",
    "One",
    "Constant",
    "SineMode",
    "GaussBump",
    "Poly",
    "TimeConst",
    "TimeExp",
    "TimePoly",
    "IndicatorPast",
    "Product",
    "SpaceField",
    "TimePart",
    "Field",
    "PathConfig",
    "McMode",
    "McConfig",
    "SpectralConfig",
    "Scenario",
    "domain_contains",
    "boundary_samples",
    "interior_samples",
    "evaluate_time_part",
    "evaluate_space_field",
    "evaluate_field",
    "split_product",
    "validate_scenario",
    "scenario_to_json",
    "scenario_from_json",
    "scenario_hash",
    "PAST_RANGE",
]

# Declared time-range for prior-history fields: they describe data on
# (-inf, 0] and must never be read at positive times.
PAST_RANGE = (-math.inf, 0.0)


# ---------------------------------------------------------------------------
# Domains


@dataclass(frozen=True)
class Interval:
    """Open interval (a, b) on the line."""

    a: float
    b: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ParameterError("interval endpoints must be finite")
        if not self.a < self.b:
            raise ParameterError(f"interval needs a < b, got a={self.a}, b={self.b}")

    @property
    def dim(self) -> int:
        return 1

    @property
    def length(self) -> float:
        return self.b - self.a


@dataclass(frozen=True)
class Ball:
    """Open ball of given center and radius; center fixes the dimension."""

    center: tuple[float, ...]
    radius: float

    def __post_init__(self) -> None:
        center = self.center
        if isinstance(center, (int, float)):
            center = (float(center),)
        object.__setattr__(self, "center", tuple(float(c) for c in center))
        if len(self.center) == 0:
            raise ParameterError("ball center must have at least one coordinate")
        if not all(math.isfinite(c) for c in self.center):
            raise ParameterError("ball center must be finite")
        if not (math.isfinite(self.radius) and self.radius > 0.0):
            raise ParameterError(f"ball radius must be positive, got {self.radius}")

    @property
    def dim(self) -> int:
        return len(self.center)


@dataclass(frozen=True)
class FullSpace:
    """All of R^d; paths never exit, so the spatial stopping time is +inf."""

    dim: int = 1

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ParameterError(f"dimension must be >= 1, got {self.dim}")


Domain = Union[Interval, Ball, FullSpace]


def _as_point(x: Any, dim: int) -> np.ndarray:
    pt = np.atleast_1d(np.asarray(x, dtype=float))
    if pt.ndim != 1 or pt.shape[0] != dim:
        raise ShapeError(f"point has shape {np.shape(x)}, expected {dim} coordinate(s)")
    return pt


def domain_contains(domain: Domain, x: Any) -> bool:
    """Exact membership test for the open set; boundary points are outside."""
    pt = _as_point(x, domain.dim if not isinstance(domain, Interval) else 1)
    if isinstance(domain, Interval):
        return bool(domain.a < pt[0] < domain.b)
    if isinstance(domain, Ball):
        delta = pt - np.asarray(domain.center)
        return bool(float(delta @ delta) < domain.radius * domain.radius)
    return True


def boundary_samples(domain: Domain, n: int = 64) -> np.ndarray:
    """Deterministic probe points on the boundary, shape (m, dim).

    Interval boundaries are two points, so the two endpoints are returned
    regardless of ``n``.  FullSpace has no boundary and yields an empty array.
    """
    if isinstance(domain, Interval):
        return np.array([[domain.a], [domain.b]])
    if isinstance(domain, FullSpace):
        return np.empty((0, domain.dim))
    center = np.asarray(domain.center)
    d = domain.dim
    if d == 1:
        return center + domain.radius * np.array([[-1.0], [1.0]])
    if d == 2:
        ang = 2.0 * np.pi * np.arange(n) / n
        return center + domain.radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if d == 3:
        # Fibonacci lattice: near-uniform coverage without randomness.
        k = np.arange(n)
        z = 1.0 - (2.0 * k + 1.0) / n
        rho = np.sqrt(np.maximum(1.0 - z * z, 0.0))
        ang = math.pi * (1.0 + math.sqrt(5.0)) * k
        dirs = np.stack([rho * np.cos(ang), rho * np.sin(ang), z], axis=1)
        return center + domain.radius * dirs
    raise ShapeError(f"no boundary sampling rule for dimension {d}")


def interior_samples(domain: Domain, n: int = 64) -> np.ndarray:
    """Deterministic probe points strictly inside the domain, shape (m, dim)."""
    if isinstance(domain, Interval):
        xs = np.linspace(domain.a, domain.b, n + 2)[1:-1]
        return xs[:, None]
    if isinstance(domain, FullSpace):
        pts = np.zeros((n, domain.dim))
        pts[:, 0] = np.linspace(-3.0, 3.0, n)
        return pts
    dirs = boundary_samples(domain, max(8, n // 8)) - np.asarray(domain.center)
    radii = np.linspace(0.1, 0.9, 8)
    pts = np.asarray(domain.center) + radii[:, None, None] * dirs[None, :, :]
    return pts.reshape(-1, domain.dim)[:n]


# ---------------------------------------------------------------------------
# Field catalog


@dataclass(frozen=True)
class Zero:
    """Identically zero."""


@dataclass(frozen=True)
class One:
    """Identically one."""


@dataclass(frozen=True)
class Constant:
    """Constant value c."""

    c: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.c):
            raise ParameterError("constant value must be finite")


@dataclass(frozen=True)
class SineMode:
    """sin(n*pi*(x - a)/(b - a)) on the interval (a, b): the n-th Dirichlet
    mode shape, unnormalized so its peak value is 1."""

    n: int
    a: float
    b: float

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ParameterError(f"mode index must be >= 1, got {self.n}")
        if not self.a < self.b:
            raise ParameterError(f"mode interval needs a < b, got ({self.a}, {self.b})")


@dataclass(frozen=True)
class GaussBump:
    """exp(-((x - center)/width)^2), a smooth localized bump."""

    center: float
    width: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.width) and self.width > 0.0):
            raise ParameterError(f"bump width must be positive, got {self.width}")


@dataclass(frozen=True)
class Poly:
    """Polynomial in x with coefficients in increasing-degree order."""

    coeffs: tuple[float, ...]

    def __post_init__(self) -> None:
        coeffs = tuple(float(c) for c in self.coeffs)
        if len(coeffs) == 0:
            raise ParameterError("polynomial needs at least one coefficient")
        object.__setattr__(self, "coeffs", coeffs)


@dataclass(frozen=True)
class TimeConst:
    """Time profile t -> c."""

    c: float


@dataclass(frozen=True)
class TimeExp:
    """Time profile t -> exp(rate*t)."""

    rate: float


@dataclass(frozen=True)
class TimePoly:
    """Time profile t -> polynomial in t, increasing-degree coefficients."""

    coeffs: tuple[float, ...]

    def __post_init__(self) -> None:
        coeffs = tuple(float(c) for c in self.coeffs)
        if len(coeffs) == 0:
            raise ParameterError("polynomial needs at least one coefficient")
        object.__setattr__(self, "coeffs", coeffs)


@dataclass(frozen=True)
class IndicatorPast:
    """Time profile t -> 1 for t <= threshold, else 0: a step that is on in
    the deep past and switches off after the threshold."""

    threshold: float


@dataclass(frozen=True)
class Product:
    """Separable field time_part(t) * space_part(x)."""

    time_part: "TimePart"
    space_part: "SpaceField"


SpaceField = Union[Zero, One, Constant, SineMode, GaussBump, Poly]
TimePart = Union[TimeConst, TimeExp, TimePoly, IndicatorPast]
Field = Union[SpaceField, Product]


def _horner(coeffs: tuple[float, ...], x: np.ndarray) -> np.ndarray:
    acc = np.full_like(x, coeffs[-1], dtype=float)
    for c in coeffs[-2::-1]:
        acc = acc * x + c
    return acc


def evaluate_time_part(part: TimePart, t: Any) -> np.ndarray:
    """Evaluate a time profile at t (scalar or array)."""
    tv = np.asarray(t, dtype=float)
    if isinstance(part, TimeConst):
        return np.full_like(tv, part.c)
    if isinstance(part, TimeExp):
        return np.exp(part.rate * tv)
    if isinstance(part, TimePoly):
        return _horner(part.coeffs, tv)
    if isinstance(part, IndicatorPast):
        return np.where(tv <= part.threshold, 1.0, 0.0)
    raise ParameterError(f"unknown time profile {part!r}")


def evaluate_space_field(fld: SpaceField, x: Any) -> np.ndarray:
    """Evaluate a space-only field at x.

    For one-dimensional fields x may be a scalar or an array of abscissae.
    Zero/One/Constant accept points of any dimension.
    """
    xv = np.asarray(x, dtype=float)
    if isinstance(fld, Zero):
        return np.zeros(xv.shape[:1] if xv.ndim > 1 else xv.shape)
    if isinstance(fld, One):
        return np.ones(xv.shape[:1] if xv.ndim > 1 else xv.shape)
    if isinstance(fld, Constant):
        return np.full(xv.shape[:1] if xv.ndim > 1 else xv.shape, fld.c)
    if xv.ndim > 1:
        raise ShapeError(f"{type(fld).__name__} is one-dimensional, got points of shape {xv.shape}")
    if isinstance(fld, SineMode):
        return np.sin(fld.n * np.pi * (xv - fld.a) / (fld.b - fld.a))
    if isinstance(fld, GaussBump):
        z = (xv - fld.center) / fld.width
        return np.exp(-z * z)
    if isinstance(fld, Poly):
        return _horner(fld.coeffs, xv)
    raise ParameterError(f"unknown field {fld!r}")


def _check_time_range(t: np.ndarray, time_range: tuple[float, float]) -> None:
    lo, hi = time_range
    bad_lo = t < lo
    bad_hi = t > hi
    if np.any(bad_lo) or np.any(bad_hi):
        offender = float(np.asarray(t)[np.nonzero(bad_lo | bad_hi)][0] if np.ndim(t) else t)
        raise RangeError(f"t={offender!r} outside declared time-range [{lo}, {hi}]")


def evaluate_field(
    fld: Field,
    t: Any,
    x: Any,
    *,
    time_range: tuple[float, float] | None = None,
) -> Any:
    """Evaluate a field at (t, x); space-only fields ignore t.

    Scalar inputs return a float; array inputs broadcast elementwise.  When
    ``time_range`` is given, times outside it raise RangeError: scenario
    helpers pass (-inf, 0] for prior-history data and [0, T] for forcing.
    """
    tv = np.asarray(t, dtype=float)
    if time_range is not None:
        _check_time_range(tv, time_range)
    if isinstance(fld, Product):
        vals = evaluate_time_part(fld.time_part, tv) * evaluate_space_field(fld.space_part, x)
    else:
        vals = evaluate_space_field(fld, x)
        vals = vals * np.ones_like(tv) if tv.shape != () else vals
    if vals.shape == ():
        return float(vals)
    return vals


def split_product(fld: Field) -> tuple[TimePart, SpaceField]:
    """View any catalog field as time_part * space_part."""
    if isinstance(fld, Product):
        return fld.time_part, fld.space_part
    return TimeConst(1.0), fld


# ---------------------------------------------------------------------------
# Solver settings


@dataclass(frozen=True)
class PathConfig:
    """Operational-time discretization for path simulation.

    h * max_steps bounds the simulated operational time; a path that never
    stops within the budget is reported as truncated rather than silently
    clipped.
    """

    h: float = 1e-3
    max_steps: int = 10_000_000
    record_trajectory: bool = False

    def __post_init__(self) -> None:
        if not (math.isfinite(self.h) and self.h > 0.0):
            raise ParameterError(f"step size must be positive, got {self.h}")
        if self.max_steps < 1:
            raise ParameterError(f"max_steps must be >= 1, got {self.max_steps}")


class McMode(enum.Enum):
    """How estimators draw randomness.

    PATH_MODE simulates full joint paths.  MARGINAL_MODE samples the needed
    one-dimensional laws directly and is legal only for quantities that
    depend on the time machinery alone (no spatial coupling).
    """

    PATH_MODE = "PathMode"
    MARGINAL_MODE = "MarginalMode"


@dataclass(frozen=True)
class McConfig:
    """Monte-Carlo estimator settings."""

    n_samples: int = 10_000
    seed: int = 0
    path: PathConfig = field(default_factory=PathConfig)
    mode: McMode = McMode.PATH_MODE

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ParameterError(f"n_samples must be >= 1, got {self.n_samples}")
        if not (0 <= self.seed < 2**64):
            raise ParameterError("seed must fit in 64 bits")


@dataclass(frozen=True)
class SpectralConfig:
    """Eigenfunction-expansion solver settings."""

    n_modes: int = 64
    time_quad_nodes: int = 256
    space_quad_nodes: int = 512
    tail_tol: float = 1e-10

    def __post_init__(self) -> None:
        if self.n_modes < 1:
            raise ParameterError(f"n_modes must be >= 1, got {self.n_modes}")
        if self.time_quad_nodes < 2 or self.space_quad_nodes < 2:
            raise ParameterError("quadrature node counts must be >= 2")


# ---------------------------------------------------------------------------
# Scenario


@dataclass(frozen=True)
class Scenario:
    """Full problem description consumed by every solver route.

    ``phi0`` is the value at time zero, ``f`` the forcing on [0, T], ``g`` an
    extra source term, and ``phi_past`` optional prior history on (-inf, 0]
    whose restriction to t=0 must agree with ``phi0``.
    """

    alpha: float
    beta: float
    domain: Domain
    T: float = 1.0
    phi0: SpaceField = field(default_factory=Zero)
    f: Field = field(default_factory=Zero)
    g: Field = field(default_factory=Zero)
    phi_past: Field | None = None
    mc: McConfig = field(default_factory=McConfig)
    spectral: SpectralConfig = field(default_factory=SpectralConfig)

    def forcing_value(self, t: Any, x: Any) -> Any:
        return evaluate_field(self.f, t, x, time_range=(0.0, self.T))

    def past_value(self, t: Any, x: Any) -> Any:
        if self.phi_past is None:
            raise ParameterError("scenario has no prior-history field")
        return evaluate_field(self.phi_past, t, x, time_range=PAST_RANGE)

    def with_mc(self, **kwargs: Any) -> "Scenario":
        return replace(self, mc=replace(self.mc, **kwargs))


def validate_scenario(s: Scenario) -> list[str]:
    """Collect human-readable invariant violations; empty means valid.

    Returns diagnostics instead of raising so callers can report every
    problem at once.
    """
    out: list[str] = []
    if not (0.0 < s.alpha <= 2.0):
        out.append(f"alpha={s.alpha} outside (0, 2]")
    if not (0.0 < s.beta < 1.0):
        out.append(f"beta={s.beta} outside (0, 1)")
    if not (math.isfinite(s.T) and s.T > 0.0):
        out.append(f"horizon T={s.T} must be positive")
    if isinstance(s.phi0, Product):
        out.append("phi0 must be space-only, got a product field")

    # Dirichlet compatibility: the initial value must vanish on the boundary.
    boundary = boundary_samples(s.domain, 64)
    if boundary.shape[0] and not isinstance(s.phi0, Product):
        pts = boundary[:, 0] if s.domain.dim == 1 else boundary
        vals = np.atleast_1d(evaluate_space_field(s.phi0, pts))
        worst = float(np.max(np.abs(vals)))
        if worst > 1e-12:
            out.append(
                f"phi0 does not vanish on the boundary (max |phi0|={worst:.3e} at sampled points)"
            )

    # Prior history must match the initial value at t=0.
    if s.phi_past is not None:
        pts = interior_samples(s.domain, 64)
        xs = pts[:, 0] if s.domain.dim == 1 else pts
        try:
            past0 = np.atleast_1d(evaluate_field(s.phi_past, 0.0, xs, time_range=PAST_RANGE))
            now0 = np.atleast_1d(evaluate_space_field(s.phi0, xs))
            gap = float(np.max(np.abs(past0 - now0)))
            if gap > 1e-12:
                out.append(f"phi_past at t=0 disagrees with phi0 (max gap {gap:.3e})")
        except ShapeError as exc:
            out.append(f"phi_past not evaluable on the domain: {exc}")

    # Mode-shape fields should live on the scenario's own interval.
    if isinstance(s.domain, Interval):
        for name, fld in (("phi0", s.phi0), ("f", s.f), ("g", s.g), ("phi_past", s.phi_past)):
            if fld is None:
                continue
            _, space = split_product(fld)
            if isinstance(space, SineMode) and not (
                space.a == s.domain.a and space.b == s.domain.b
            ):
                out.append(
                    f"{name} uses a mode shape on ({space.a}, {space.b}) "
                    f"but the domain is ({s.domain.a}, {s.domain.b})"
                )
    return out


# ---------------------------------------------------------------------------
# Serialization

_SPACE_KINDS = {
    Zero: "zero",
    One: "one",
    Constant: "constant",
    SineMode: "sine_mode",
    GaussBump: "gauss_bump",
    Poly: "poly",
}
_TIME_KINDS = {
    TimeConst: "const",
    TimeExp: "exp",
    TimePoly: "poly",
    IndicatorPast: "indicator_past",
}


def _field_payload(fld: Field) -> dict[str, Any]:
    if isinstance(fld, Product):
        return {
            "kind": "product",
            "time_part": _time_payload(fld.time_part),
            "space_part": _field_payload(fld.space_part),
        }
    kind = _SPACE_KINDS[type(fld)]
    if isinstance(fld, Constant):
        return {"kind": kind, "c": fld.c}
    if isinstance(fld, SineMode):
        return {"kind": kind, "n": fld.n, "a": fld.a, "b": fld.b}
    if isinstance(fld, GaussBump):
        return {"kind": kind, "center": fld.center, "width": fld.width}
    if isinstance(fld, Poly):
        return {"kind": kind, "coeffs": list(fld.coeffs)}
    return {"kind": kind}


def _time_payload(part: TimePart) -> dict[str, Any]:
    kind = _TIME_KINDS[type(part)]
    if isinstance(part, TimeConst):
        return {"kind": kind, "c": part.c}
    if isinstance(part, TimeExp):
        return {"kind": kind, "rate": part.rate}
    if isinstance(part, TimePoly):
        return {"kind": kind, "coeffs": list(part.coeffs)}
    return {"kind": kind, "threshold": part.threshold}


def _field_from_payload(doc: dict[str, Any]) -> Field:
    kind = doc["kind"]
    if kind == "product":
        return Product(
            time_part=_time_from_payload(doc["time_part"]),
            space_part=_field_from_payload(doc["space_part"]),  # type: ignore[arg-type]
        )
    if kind == "zero":
        return Zero()
    if kind == "one":
        return One()
    if kind == "constant":
        return Constant(c=doc["c"])
    if kind == "sine_mode":
        return SineMode(n=doc["n"], a=doc["a"], b=doc["b"])
    if kind == "gauss_bump":
        return GaussBump(center=doc["center"], width=doc["width"])
    if kind == "poly":
        return Poly(coeffs=tuple(doc["coeffs"]))
    raise ParameterError(f"unknown field kind {kind!r}")


def _time_from_payload(doc: dict[str, Any]) -> TimePart:
    kind = doc["kind"]
    if kind == "const":
        return TimeConst(c=doc["c"])
    if kind == "exp":
        return TimeExp(rate=doc["rate"])
    if kind == "poly":
        return TimePoly(coeffs=tuple(doc["coeffs"]))
    if kind == "indicator_past":
        return IndicatorPast(threshold=doc["threshold"])
    raise ParameterError(f"unknown time-profile kind {kind!r}")


def _domain_payload(domain: Domain) -> dict[str, Any]:
    if isinstance(domain, Interval):
        return {"kind": "interval", "a": domain.a, "b": domain.b}
    if isinstance(domain, Ball):
        return {"kind": "ball", "center": list(domain.center), "radius": domain.radius}
    return {"kind": "full_space", "dim": domain.dim}


def _domain_from_payload(doc: dict[str, Any]) -> Domain:
    kind = doc["kind"]
    if kind == "interval":
        return Interval(a=doc["a"], b=doc["b"])
    if kind == "ball":
        return Ball(center=tuple(doc["center"]), radius=doc["radius"])
    if kind == "full_space":
        return FullSpace(dim=doc["dim"])
    raise ParameterError(f"unknown domain kind {kind!r}")


def _scenario_payload(s: Scenario) -> dict[str, Any]:
    return {
        "alpha": s.alpha,
        "beta": s.beta,
        "domain": _domain_payload(s.domain),
        "T": s.T,
        "phi0": _field_payload(s.phi0),
        "f": _field_payload(s.f),
        "g": _field_payload(s.g),
        "phi_past": None if s.phi_past is None else _field_payload(s.phi_past),
        "mc": {
            "n_samples": s.mc.n_samples,
            "seed": s.mc.seed,
            "path": {
                "h": s.mc.path.h,
                "max_steps": s.mc.path.max_steps,
                "record_trajectory": s.mc.path.record_trajectory,
            },
            "mode": s.mc.mode.value,
        },
        "spectral": {
            "n_modes": s.spectral.n_modes,
            "time_quad_nodes": s.spectral.time_quad_nodes,
            "space_quad_nodes": s.spectral.space_quad_nodes,
            "tail_tol": s.spectral.tail_tol,
        },
    }


def scenario_to_json(s: Scenario, *, indent: int | None = 2) -> str:
    """Serialize to JSON; floats round-trip exactly via shortest repr."""
    return json.dumps(_scenario_payload(s), indent=indent, allow_nan=False)


def scenario_from_json(text: str) -> Scenario:
    """Parse a scenario document produced by :func:`scenario_to_json`."""
    doc = json.loads(text)
    mc = doc["mc"]
    spectral = doc["spectral"]
    return Scenario(
        alpha=doc["alpha"],
        beta=doc["beta"],
        domain=_domain_from_payload(doc["domain"]),
        T=doc["T"],
        phi0=_field_from_payload(doc["phi0"]),  # type: ignore[arg-type]
        f=_field_from_payload(doc["f"]),
        g=_field_from_payload(doc["g"]),
        phi_past=None if doc["phi_past"] is None else _field_from_payload(doc["phi_past"]),
        mc=McConfig(
            n_samples=mc["n_samples"],
            seed=mc["seed"],
            path=PathConfig(
                h=mc["path"]["h"],
                max_steps=mc["path"]["max_steps"],
                record_trajectory=mc["path"]["record_trajectory"],
            ),
            mode=McMode(mc["mode"]),
        ),
        spectral=SpectralConfig(
            n_modes=spectral["n_modes"],
            time_quad_nodes=spectral["time_quad_nodes"],
            space_quad_nodes=spectral["space_quad_nodes"],
            tail_tol=spectral["tail_tol"],
        ),
    )


def scenario_hash(s: Scenario) -> str:
    """Stable content hash of the canonical JSON form."""
    canon = json.dumps(_scenario_payload(s), sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canon.encode()).hexdigest()
