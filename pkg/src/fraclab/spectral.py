"""Eigenfunction-expansion solver for the alpha=2 interval problem.

The homogeneous part is a Mittag-Leffler series over the Dirichlet sine
basis; forcing enters through the response factor Phi computed after the
exact substitution u = (t - r)^beta, which turns the singular convolution
kernel into the entire function E'_beta(-lam*u).  The module also exposes
the killed heat kernel, its time-changed (subordinate) version, and the
history kernel H built from it, so the series route and the kernel
quadrature route can be compared without sharing code paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import IO, Callable, Sequence

import numpy as np
import scipy.special as sc

from .errors import CapabilityError, ParameterError
from .fracops import history_forcing_profile
from .model import (
    IndicatorPast,
    Interval,
    Scenario,
    SpectralConfig,
    TimeConst,
    TimeExp,
    TimePart,
    TimePoly,
    Zero,
    evaluate_space_field,
    evaluate_time_part,
    split_product,
)
from .specfun import mittag_leffler, mittag_leffler2

__all__ = [
    "SpectralBasis",
    "make_basis",
    "project",
    "phi_kernel",
    "SpectralSolution",
    "solve_spectral",
    "solve_prehistory_spectral",
    "heat_kernel",
    "subordinate_kernel",
    "h_kernel",
    "g_term_kernel_route",
    "past_term_kernel_route",
    "solution_to_csv",
]


def _check_order(beta: float) -> None:
    if not (0.0 < beta < 1.0):
        raise ParameterError(f"time order beta must lie in (0, 1), got {beta}")


def _mode_matrix(a: float, b: float, n_modes: int, x: np.ndarray) -> np.ndarray:
    """Normalized sine modes as an (nx, n_modes) matrix, exactly 0 at b."""
    length = b - a
    arg = (x[:, None] - a) * (np.arange(1, n_modes + 1) * (math.pi / length))
    out = math.sqrt(2.0 / length) * np.sin(arg)
    out[(x == a) | (x == b)] = 0.0
    return out


@dataclass(frozen=True)
class SpectralBasis:
    """Dirichlet eigenpairs of the second derivative on an interval.

    lam_n = (n pi / (b-a))^2 with unit-norm modes sqrt(2/(b-a)) sin(...);
    ``n_modes`` fixes the truncation used by projections and kernels.
    """

    a: float
    b: float
    n_modes: int

    def __post_init__(self) -> None:
        if not self.a < self.b:
            raise ParameterError(f"interval needs a < b, got ({self.a}, {self.b})")
        if self.n_modes < 1:
            raise ParameterError(f"n_modes must be >= 1, got {self.n_modes}")

    @property
    def lam(self) -> np.ndarray:
        length = self.b - self.a
        return (np.arange(1, self.n_modes + 1) * (math.pi / length)) ** 2

    def psi(self, x) -> np.ndarray:
        """Mode values at the points x, shape (nx, n_modes)."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        return _mode_matrix(self.a, self.b, self.n_modes, xs)


def make_basis(domain, n_modes: int) -> SpectralBasis:
    if not isinstance(domain, Interval):
        raise CapabilityError(
            "the eigenbasis is closed-form only on an interval; "
            "use the path engine for other domains"
        )
    return SpectralBasis(domain.a, domain.b, n_modes)


def _gl_nodes(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    xg, wg = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (xg + 1.0), half * wg


def project(basis: SpectralBasis, fld, *, nodes: int | None = None) -> np.ndarray:
    """Gauss-Legendre mode coefficients <fld, psi_n> of a space field.

    ``fld`` may be a catalog space field or a plain callable of position.
    """
    n = int(nodes) if nodes is not None else SpectralConfig().space_quad_nodes
    y, w = _gl_nodes(basis.a, basis.b, n)
    vals = np.asarray(fld(y) if callable(fld) else evaluate_space_field(fld, y), dtype=float)
    return (w * vals) @ basis.psi(y)


# ---------------------------------------------------------------------------
# Forcing response factor Phi


def _time_values(f_t, targs: np.ndarray) -> np.ndarray:
    if isinstance(f_t, TimePart):
        return np.asarray(evaluate_time_part(f_t, targs), dtype=float)
    return np.broadcast_to(np.asarray(f_t(targs), dtype=float), targs.shape)


def _phi_grid(beta: float, t: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature for int_0^{t^beta}: panels graded toward u=0.

    The composed integrand f(t - u^{1/beta}) loses smoothness only at u=0,
    so geometric panels with the innermost edge at ~1e-13 of the range give
    Gauss-Legendre its full order everywhere.
    """
    big_u = t**beta
    n_panels = max(8, nodes // 16)
    ratio = 1e-13 ** (1.0 / (n_panels - 1))
    edges = np.empty(n_panels + 1)
    edges[0] = 0.0
    edges[1:] = big_u * ratio ** np.arange(n_panels - 1, -1, -1, dtype=float)
    us, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        u, w = _gl_nodes(lo, hi, 16)
        us.append(u)
        ws.append(w)
    return np.concatenate(us), np.concatenate(ws)


def _phi_many(beta: float, lams: np.ndarray, t: float, f_t, nodes: int) -> np.ndarray:
    if t == 0.0:
        return np.zeros_like(lams)
    u, w = _phi_grid(beta, t, nodes)
    targs = np.maximum(t - u ** (1.0 / beta), 0.0)
    fv = _time_values(f_t, targs)
    deriv = mittag_leffler2(beta, beta, -np.outer(lams, u)) / beta
    return deriv @ (w * fv)


def phi_kernel(beta: float, lam: float, f_t, t: float, cfg: SpectralConfig | None = None) -> float:
    """Response factor Phi_{f,lam}(t) = int_0^{t^beta} f(t-u^{1/beta}) E'_beta(-lam u) du.

    ``f_t`` is a catalog time profile or any callable accepting an array of
    times in [0, t].  The substitution u = (t-r)^beta has already removed
    the kernel singularity, so plain graded Gauss-Legendre applies.
    """
    _check_order(beta)
    if lam <= 0.0:
        raise ParameterError(f"mode eigenvalue must be positive, got {lam}")
    if not t > 0.0:
        raise ParameterError(f"time must be positive, got {t}")
    cfg = cfg if cfg is not None else SpectralConfig()
    return float(_phi_many(beta, np.array([lam]), float(t), f_t, cfg.time_quad_nodes)[0])


# ---------------------------------------------------------------------------
# Series solution


@dataclass(frozen=True)
class SpectralSolution:
    """Truncated eigen-series solution with per-time tail bounds.

    ``values`` holds the solve-time grid evaluation; ``evaluate``/``uxx``
    recompute the series at arbitrary points from the stored coefficients.
    """

    basis: SpectralBasis
    beta: float
    a0: np.ndarray
    forcings: tuple
    time_quad_nodes: int
    tail_tol: float
    t_grid: np.ndarray
    x_grid: np.ndarray
    values: np.ndarray
    tail_bounds: np.ndarray

    def coeff_matrix(self, tt: np.ndarray) -> np.ndarray:
        """Modal coefficients c_n(t) for every t at once, shape (nt, n_modes).

        The homogeneous part is one vectorized Mittag-Leffler evaluation over
        the whole (time, mode) grid; forcing response factors are quadratures
        per time point.
        """
        lam = self.basis.lam
        c = self.a0 * np.atleast_2d(
            mittag_leffler(self.beta, -np.outer(tt**self.beta, lam))
        )
        for f_t, q in self.forcings:
            for i, ti in enumerate(tt):
                c[i] += q * _phi_many(self.beta, lam, float(ti), f_t, self.time_quad_nodes)
        return c

    def coeffs_at(self, t: float) -> np.ndarray:
        """Modal coefficients c_n(t) of the truncated series."""
        return self.coeff_matrix(np.array([float(t)]))[0]

    def tail_bound_at(self, t: float) -> float:
        return _tail_bound(np.abs(self.coeffs_at(float(t))), self.basis, self.tail_tol)

    def evaluate(self, t, x) -> np.ndarray:
        """Series values on the product of the given time and space points."""
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        xx = np.atleast_1d(np.asarray(x, dtype=float))
        _check_x_range(self.basis, xx)
        return self.coeff_matrix(tt) @ self.basis.psi(xx).T

    def uxx(self, t: float, x: float) -> float:
        """Second space derivative of the truncated series at a point."""
        c = self.coeffs_at(float(t))
        row = self.basis.psi(np.array([float(x)]))[0]
        return float((-self.basis.lam * c) @ row)


def _check_x_range(basis: SpectralBasis, xx: np.ndarray) -> None:
    if xx.size and (xx.min() < basis.a or xx.max() > basis.b):
        raise ParameterError(
            f"evaluation points must lie in [{basis.a}, {basis.b}]"
        )


def _tail_bound(cabs: np.ndarray, basis: SpectralBasis, tail_tol: float) -> float:
    """Bound the dropped series tail from the decay of the top coefficients.

    Fits |c_n| ~ C n^{-p} on the nonzero entries of the last quarter and
    bounds sum_{n>N} |c_n| * sup|psi|.  Returns 0 when the top quarter has
    already fallen below tail_tol relative to the peak: the expansion is
    effectively finite.
    """
    n = cabs.size
    peak = float(cabs.max(initial=0.0))
    top = cabs[-max(4, n // 4):]
    if peak == 0.0 or float(top.max()) <= tail_tol * peak:
        return 0.0
    idx = np.nonzero(top > 0.0)[0]
    offset = n - top.size
    ns = (offset + idx + 1).astype(float)
    if idx.size >= 2 and ns[-1] > ns[0]:
        slope = np.polyfit(np.log(ns), np.log(top[idx]), 1)[0]
        p = max(-slope, 1.1)
    else:
        p = 1.1
    sup_psi = math.sqrt(2.0 / (basis.b - basis.a))
    return 2.0 * sup_psi * float(top.max()) * n / (p - 1.0)


def solve_spectral(
    s: Scenario,
    t_grid: Sequence[float],
    x_grid: Sequence[float],
    cfg: SpectralConfig | None = None,
    *,
    extra_forcing: Sequence[tuple] = (),
) -> SpectralSolution:
    """Solve the alpha=2 interval problem by eigen-series.

    The initial datum propagates through E_beta(-lam_n t^beta); each forcing
    term (the scenario's f and g, plus any (time, space) pairs supplied in
    ``extra_forcing``) contributes its Phi response factor per mode.
    """
    if s.alpha != 2.0 or not isinstance(s.domain, Interval):
        raise CapabilityError(
            "the series solver covers alpha=2 on an interval only; "
            "use the Monte-Carlo route for stable generators or other domains"
        )
    _check_order(s.beta)
    cfg = cfg if cfg is not None else s.spectral
    basis = make_basis(s.domain, cfg.n_modes)
    a0 = project(basis, s.phi0, nodes=cfg.space_quad_nodes)

    forcings = []
    for fld in (s.f, s.g):
        if isinstance(fld, Zero):
            continue
        tp, sp = split_product(fld)
        if isinstance(sp, Zero):
            continue
        forcings.append((tp, project(basis, sp, nodes=cfg.space_quad_nodes)))
    for f_t, sp in extra_forcing:
        forcings.append((f_t, project(basis, sp, nodes=cfg.space_quad_nodes)))

    tt = np.atleast_1d(np.asarray(t_grid, dtype=float))
    xx = np.atleast_1d(np.asarray(x_grid, dtype=float))
    if tt.size == 0 or xx.size == 0:
        raise ParameterError("solution grids must be non-empty")
    if tt.min() < 0.0 or not np.all(np.isfinite(tt)):
        raise ParameterError("time grid must be finite and nonnegative")
    _check_x_range(basis, xx)

    sol = SpectralSolution(
        basis=basis,
        beta=s.beta,
        a0=a0,
        forcings=tuple(forcings),
        time_quad_nodes=cfg.time_quad_nodes,
        tail_tol=cfg.tail_tol,
        t_grid=tt,
        x_grid=xx,
        values=np.empty((tt.size, xx.size)),
        tail_bounds=np.empty(tt.size),
    )
    cmat = sol.coeff_matrix(tt)
    sol.values[:] = cmat @ basis.psi(xx).T
    for i in range(tt.size):
        sol.tail_bounds[i] = _tail_bound(np.abs(cmat[i]), basis, cfg.tail_tol)
    return sol


def solve_prehistory_spectral(
    s: Scenario,
    t_grid: Sequence[float],
    x_grid: Sequence[float],
    cfg: SpectralConfig | None = None,
) -> SpectralSolution:
    """Solve the history-driven problem by reduction to the forced one.

    The prior history enters as the equivalent forcing profile (closed form
    per catalog time shape) on top of the source g; the scenario's f belongs
    to the companion forced problem and is not read here.
    """
    if s.phi_past is None:
        raise ParameterError("scenario declares no prior history")
    tp, sp = split_product(s.phi_past)
    profile = history_forcing_profile(tp, s.beta)
    extra = [] if isinstance(sp, Zero) else [(profile, sp)]
    return solve_spectral(replace(s, f=Zero()), t_grid, x_grid, cfg, extra_forcing=extra)


# ---------------------------------------------------------------------------
# Kernels


def _broadcast_points(x, y) -> tuple[np.ndarray, np.ndarray, bool]:
    xb, yb = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    scalar = xb.ndim == 0
    return np.atleast_1d(xb), np.atleast_1d(yb), scalar


def heat_kernel(basis: SpectralBasis, s: float, x, y, cfg: SpectralConfig | None = None):
    """Transition density of the interval-killed diffusion at time s.

    The mode count grows automatically until the dropped terms fall below
    tail_tol, so small times resolve the near-Gaussian peak regardless of
    the basis truncation.
    """
    if not s > 0.0:
        raise ParameterError(f"time must be positive, got {s}")
    cfg = cfg if cfg is not None else SpectralConfig()
    length = basis.b - basis.a
    lam1 = (math.pi / length) ** 2
    need = (length / math.pi) * math.sqrt(lam1 + math.log(1.0 / cfg.tail_tol) / s)
    n_eff = max(basis.n_modes, int(math.ceil(need)) + 8)
    lam = (np.arange(1, n_eff + 1) * (math.pi / length)) ** 2
    xb, yb, scalar = _broadcast_points(x, y)
    px = _mode_matrix(basis.a, basis.b, n_eff, xb.ravel())
    py = _mode_matrix(basis.a, basis.b, n_eff, yb.ravel())
    vals = (px * py) @ np.exp(-lam * s)
    vals = vals.reshape(xb.shape)
    return float(vals[0]) if scalar else vals


def subordinate_kernel(basis: SpectralBasis, beta: float, w: float, x, y,
                       cfg: SpectralConfig | None = None):
    """Density factor of the time-changed killed diffusion at operational age w.

    q(w; x, y) = sum_n psi_n(x) psi_n(y) w^{beta-1} E_{beta,beta}(-lam_n w^beta),
    truncated at the basis mode count (terms decay like n^-4).
    """
    _check_order(beta)
    if not w > 0.0:
        raise ParameterError(f"operational age must be positive, got {w}")
    e = mittag_leffler2(beta, beta, -basis.lam * w**beta)
    xb, yb, scalar = _broadcast_points(x, y)
    px = basis.psi(xb.ravel())
    py = basis.psi(yb.ravel())
    vals = w ** (beta - 1.0) * ((px * py) @ np.atleast_1d(e))
    vals = vals.reshape(xb.shape)
    return float(vals[0]) if scalar else vals


def _h_u_grid(beta: float, t: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Panels on [0, t^beta] graded toward both ends.

    u=0 carries the composition roughness; u=t^beta is where the past-time
    kernel (t - u^{1/beta} - r)^{-1-beta} peaks as r approaches 0.
    """
    big_u = t**beta
    per_side = max(6, nodes // 32)
    ratio = 1e-13 ** (1.0 / (per_side - 1))
    dist = 0.5 * big_u * ratio ** np.arange(per_side - 1, -1, -1, dtype=float)
    edges = np.concatenate(([0.0], dist, big_u - dist[::-1][1:], [big_u]))
    us, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        u, w = _gl_nodes(lo, hi, 16)
        us.append(u)
        ws.append(w)
    return np.concatenate(us), np.concatenate(ws)


def h_kernel(basis: SpectralBasis, beta: float, t: float, x, r: float, y,
             cfg: SpectralConfig | None = None):
    """History kernel H at past time r < 0: the density against which the
    prior history is averaged when the time barrier wins.

    Computed as (1/Gamma(1-beta)) int_0^{t^beta} (t - u^{1/beta} - r)^{-1-beta}
    * sum_n psi_n(x) psi_n(y) E_{beta,beta}(-lam_n u) du; the substitution
    u = (t-z)^beta has cancelled the w^{beta-1} factor of the subordinate
    kernel against the Jacobian exactly.
    """
    _check_order(beta)
    if not t > 0.0:
        raise ParameterError(f"time must be positive, got {t}")
    if r >= 0.0:
        raise ParameterError(f"history kernel needs a past time r < 0, got {r}")
    cfg = cfg if cfg is not None else SpectralConfig()
    u, wu = _h_u_grid(beta, t, cfg.time_quad_nodes)
    kern = (np.maximum(t - u ** (1.0 / beta), 0.0) - r) ** (-1.0 - beta)
    emat = mittag_leffler2(beta, beta, -np.outer(u, basis.lam))
    xb, yb, scalar = _broadcast_points(x, y)
    px = basis.psi(xb.ravel())
    py = basis.psi(yb.ravel())
    modal = emat @ (px * py).T
    vals = (wu * kern) @ modal / math.gamma(1.0 - beta)
    vals = vals.reshape(xb.shape)
    return float(vals[0]) if scalar else vals


# ---------------------------------------------------------------------------
# Kernel-quadrature routes (kept independent of the Phi series)


def g_term_kernel_route(basis: SpectralBasis, beta: float, g, t: float, x: float,
                        cfg: SpectralConfig | None = None) -> float:
    """Forcing contribution via double quadrature against the subordinate kernel.

    u_g(t,x) = int_0^t int_Omega g(t-w, y) q(w; x, y) dy dw, with q called as
    a black box; the integrable w^{beta-1} edge is resolved by geometric
    panels instead of a cancelling substitution, so this route stays
    independent of the Phi-series forcing term.
    """
    _check_order(beta)
    if not t > 0.0:
        raise ParameterError(f"time must be positive, got {t}")
    cfg = cfg if cfg is not None else SpectralConfig()
    tp, sp = split_product(g)
    if isinstance(sp, Zero):
        return 0.0
    y, wy = _gl_nodes(basis.a, basis.b, cfg.space_quad_nodes)
    spv = np.asarray(evaluate_space_field(sp, y), dtype=float) * wy

    n_panels = max(12, cfg.time_quad_nodes // 8)
    ratio = min(0.5, (1e-8 ** (1.0 / beta)) ** (1.0 / (n_panels - 1)))
    edges = np.concatenate(([0.0], t * ratio ** np.arange(n_panels - 1, -1, -1, dtype=float)))
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        wn, ww = _gl_nodes(lo, hi, 8)
        for wj, wwj in zip(wn, ww):
            qrow = subordinate_kernel(basis, beta, float(wj), float(x), y, cfg)
            tv = float(evaluate_time_part(tp, t - wj))
            total += wwj * tv * float(spv @ qrow)
    return total


def _past_time_integral(tp: TimePart, c: float, beta: float) -> float:
    """Exact int_0^inf tp(-v) (c+v)^{-1-beta} dv for catalog time profiles."""
    if isinstance(tp, TimeConst):
        return tp.c * c**-beta / beta
    if isinstance(tp, IndicatorPast):
        lo = max(0.0, -tp.threshold)
        return (c + lo) ** -beta / beta
    if isinstance(tp, TimeExp):
        rate = tp.rate
        if rate == 0.0:
            return c**-beta / beta
        if rate < 0.0:
            raise CapabilityError(
                "history growing into the deep past has a divergent kernel average"
            )
        z = rate * c
        if z < 50.0:
            scaled = math.exp(z) * sc.gammaincc(1.0 - beta, z) * math.gamma(1.0 - beta)
            return (c**-beta - rate**beta * scaled) / beta
        # Watson expansion of int e^{-s}(1+s/z)^{-1-beta} ds, machine-exact here
        term, acc = 1.0, 1.0
        for k in range(25):
            term *= -(1.0 + beta + k) / z
            acc += term
            if abs(term) < 1e-17 * abs(acc):
                break
        return c ** (-1.0 - beta) / rate * acc
    if isinstance(tp, TimePoly):
        if len(tp.coeffs) == 1:
            return tp.coeffs[0] * c**-beta / beta
        raise CapabilityError("polynomial history is unbounded in the deep past")
    raise CapabilityError(f"unsupported history time profile {type(tp).__name__}")


def past_term_kernel_route(basis: SpectralBasis, beta: float, phi_past, t: float, x: float,
                           cfg: SpectralConfig | None = None) -> float:
    """History contribution int_{r<0} int_Omega phi(r,y) H(r,y) dy dr.

    Uses the same u grid as ``h_kernel``; the space factor reduces to mode
    projections and the past-time average against (t - u^{1/beta} - r)^{-1-beta}
    has a closed form per catalog profile, so only the u quadrature is
    numerical.  Independent of the equivalent-forcing reduction.
    """
    _check_order(beta)
    if not t > 0.0:
        raise ParameterError(f"time must be positive, got {t}")
    cfg = cfg if cfg is not None else SpectralConfig()
    tp, sp = split_product(phi_past)
    if isinstance(sp, Zero):
        return 0.0
    q = project(basis, sp, nodes=cfg.space_quad_nodes)
    u, wu = _h_u_grid(beta, t, cfg.time_quad_nodes)
    c = np.maximum(t - u ** (1.0 / beta), 0.0)
    kv = np.array([_past_time_integral(tp, float(cj), beta) for cj in c])
    emat = mittag_leffler2(beta, beta, -np.outer(u, basis.lam))
    modal = emat @ (q * basis.psi(np.array([float(x)]))[0])
    return float((wu * kv) @ modal / math.gamma(1.0 - beta))


# ---------------------------------------------------------------------------
# Output


def solution_to_csv(sol: SpectralSolution, out: IO[str]) -> None:
    """One row per (t, x) grid node; floats use repr for exact round-trips."""
    out.write("t,x,u,tail_bound\n")
    for i, ti in enumerate(sol.t_grid):
        for j, xj in enumerate(sol.x_grid):
            row = (repr(float(ti)), repr(float(xj)),
                   repr(float(sol.values[i, j])), repr(float(sol.tail_bounds[i])))
            out.write(",".join(row) + "\n")
