"""Single-path sampling of the joint stopping problem.

``run_exit_sample`` draws one coupled (subordinator, spatial motion) path and
reports which stopping event came first, the overshoot past the time barrier,
and the accumulated running-cost integral.  ``record_trajectory`` replays one
path against a whole ladder of time barriers, which is how the sawtooth
structure of the inverse process becomes visible.

Both entry points reserve a whole counter lane of the supplied stream per
path, so they can be interleaved freely with ordinary uniform draws on the
same stream without any block collisions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .backend import blocks_per_step, compile_integrand, run_path_batch
from .errors import ParameterError, PathTruncationError
from .model import (
    Ball,
    Domain,
    Field,
    FullSpace,
    Interval,
    PathConfig,
    Zero,
    domain_contains,
    split_product,
)
from .rng import RngStream, gaussian_from_uniforms, one_sided_stable_from_uniforms, philox_pairs

__all__ = [
    "PathConfig",
    "TimeWon",
    "ExitSample",
    "run_exit_sample",
    "TrajectoryRecord",
    "record_trajectory",
    "trajectory_to_csv",
]

_TINY = 5e-324
_LANE = 1 << 32


class TimeWon(enum.Enum):
    """Which stopping event arrived first along the path."""

    TIME_FIRST = "TimeFirst"
    SPACE_FIRST = "SpaceFirst"


@dataclass(frozen=True)
class ExitSample:
    """One draw of the coupled stopping experiment.

    Exactly one of ``tau0`` / ``tau_omega`` is finite, matching ``time_won``.
    ``overshoot`` is zero when space won; when time won it is strictly
    positive (an exact zero crossing is clamped to the smallest subnormal so
    the event "time barrier not yet crossed" stays distinguishable).
    """

    tau0: float
    tau_omega: float
    time_won: TimeWon
    overshoot: float
    exit_position: np.ndarray
    integral_value: float
    steps_used: int


def _reserve_lane(rng: RngStream) -> int:
    """Claim the next free whole counter lane (2**32 blocks) of the stream."""
    lane = int((rng.counter + _LANE - 1) >> 32)
    if lane >= _LANE:
        raise ParameterError("stream exhausted: no counter lanes left for paths")
    rng.counter = (lane + 1) << 32
    return lane


def _check_start(domain: Domain, x) -> np.ndarray:
    x0 = np.atleast_1d(np.asarray(x, dtype=float))
    if not domain_contains(domain, x0):
        raise ParameterError(f"start point {x0.tolist()} is not inside the domain")
    return x0


def run_exit_sample(
    alpha: float,
    beta: float,
    domain: Domain,
    t: float,
    x,
    integrand: Field | None,
    cfg: PathConfig,
    rng: RngStream,
) -> ExitSample:
    """Simulate one path until the time barrier or the domain boundary wins.

    The running integral accumulates h * integrand(t - T_k, X_k) over
    completed steps (left endpoint), so with integrand one it equals the
    stopping time exactly.
    """
    if not t > 0.0:
        raise ParameterError(f"time barrier must be positive, got {t}")
    x0 = _check_start(domain, x)
    comp = None
    if integrand is not None and not isinstance(integrand, Zero):
        tp, sp = split_product(integrand)
        comp = compile_integrand(tp, sp, domain.dim)
    lane = _reserve_lane(rng)
    out = run_path_batch(
        alpha=alpha,
        beta=beta,
        domain=domain,
        t_bar=float(t),
        x0=x0,
        h=cfg.h,
        max_steps=cfg.max_steps,
        n=1,
        seed=rng.seed,
        stream_id=rng.stream_id,
        sample0=lane,
        integrand=comp,
    )
    steps = int(out["steps"][0])
    if int(out["flag"][0]) == 2:
        raise PathTruncationError(
            f"path did not stop within {steps} steps (h={cfg.h})",
            partial={
                "steps": steps,
                "integral_value": float(out["integral"][0]),
                "position": out["exit_pos"][0].copy(),
            },
        )
    won = TimeWon.TIME_FIRST if int(out["flag"][0]) == 0 else TimeWon.SPACE_FIRST
    return ExitSample(
        tau0=float(out["tau0"][0]),
        tau_omega=float(out["tau_omega"][0]),
        time_won=won,
        overshoot=float(out["overshoot"][0]),
        exit_position=out["exit_pos"][0].copy(),
        integral_value=float(out["integral"][0]),
        steps_used=steps,
    )


@dataclass(frozen=True)
class TrajectoryRecord:
    """One path observed against an increasing ladder of time barriers.

    ``positions[i]`` is the spatial state at the step where barrier i was
    crossed, frozen at the exit position for barriers crossed after the
    path left the domain (killed convention).
    """

    obs_times: np.ndarray
    tau0: np.ndarray
    overshoot: np.ndarray
    positions: np.ndarray
    exited: bool
    exit_step: int | None
    h: float


def _outside_rows(domain: Domain, pos: np.ndarray) -> np.ndarray:
    if isinstance(domain, FullSpace):
        return np.zeros(pos.shape[0], dtype=bool)
    if isinstance(domain, Interval):
        x = pos[:, 0]
        return (x <= domain.a) | (x >= domain.b)
    if isinstance(domain, Ball):
        d2 = np.sum((pos - np.asarray(domain.center)) ** 2, axis=1)
        return d2 >= domain.radius * domain.radius
    raise ParameterError(f"unknown domain {domain!r}")


def record_trajectory(
    alpha: float,
    beta: float,
    domain: Domain,
    x,
    obs_times: Sequence[float],
    cfg: PathConfig,
    rng: RngStream,
) -> TrajectoryRecord:
    """Drive one path past every barrier and record the stopped state at each.

    Uses the same per-step block layout as the batch kernels, so the same
    (seed, stream, lane) triple reproduces the exact batch-path realization.
    The subordinator keeps running after a domain exit; only the spatial
    state freezes.
    """
    obs = np.asarray(obs_times, dtype=float)
    if obs.ndim != 1 or obs.size == 0:
        raise ParameterError("need at least one observation time")
    if not (np.all(obs > 0.0) and np.all(np.diff(obs) > 0.0)):
        raise ParameterError("observation times must be positive and strictly increasing")
    x0 = _check_start(domain, x)
    dim = domain.dim
    extra = 1 if alpha < 2.0 else 0
    bps = blocks_per_step(alpha, dim)
    hb = cfg.h ** (1.0 / beta)
    amp2 = np.sqrt(2.0 * cfg.h)
    h2a = cfg.h ** (2.0 / alpha) if alpha < 2.0 else 0.0
    lane = np.uint64(_reserve_lane(rng)) << np.uint64(32)

    t_parts: list[np.ndarray] = []
    x_parts: list[np.ndarray] = [x0[None, :]]
    total = 0.0
    done_steps = 0
    chunk = 4096
    while total < obs[-1]:
        if done_steps >= cfg.max_steps:
            raise PathTruncationError(
                f"trajectory did not reach barrier {obs[-1]} within {cfg.max_steps} steps",
                partial={"steps": done_steps, "subordinator_time": total},
            )
        nb = min(chunk, cfg.max_steps - done_steps)
        blocks = lane + np.arange(done_steps * bps, (done_steps + nb) * bps, dtype=np.uint64)
        pairs = philox_pairs(rng.seed, rng.stream_id, blocks).reshape(nb, bps, 2)
        jumps = hb * one_sided_stable_from_uniforms(beta, pairs[:, 0, 0], pairs[:, 0, 1])
        steps_x = np.empty((nb, dim))
        if alpha < 2.0:
            amp_s = one_sided_stable_from_uniforms(alpha / 2.0, pairs[:, 1, 0], pairs[:, 1, 1])
            amp = np.sqrt(2.0 * h2a * amp_s)
        for j in range(dim):
            z = gaussian_from_uniforms(pairs[:, 1 + extra + j, 0], pairs[:, 1 + extra + j, 1])
            steps_x[:, j] = (amp if alpha < 2.0 else amp2) * z
        # cumsum seeded with the running state keeps the exact left-to-right
        # float association of the step kernels, so paths match bit for bit
        t_parts.append(np.cumsum(np.concatenate([[total], jumps]))[1:])
        x_parts.append(np.cumsum(np.vstack([x_parts[-1][-1], steps_x]), axis=0)[1:])
        total = float(t_parts[-1][-1])
        done_steps += nb

    t_after = np.concatenate(t_parts)
    if not np.all(np.diff(t_after) > 0.0):
        raise AssertionError("subordinator path is not strictly increasing")
    x_after = np.concatenate(x_parts, axis=0)
    outside = _outside_rows(domain, x_after)
    hits = np.flatnonzero(outside)
    exit_step = int(hits[0]) if hits.size else None

    idx = np.searchsorted(t_after, obs, side="left")
    tau0 = (idx + 1.0) * cfg.h
    w = t_after[idx] - obs
    w[w == 0.0] = _TINY
    pos_idx = idx + 1 if exit_step is None else np.minimum(idx + 1, exit_step)
    return TrajectoryRecord(
        obs_times=obs,
        tau0=tau0,
        overshoot=w,
        positions=x_after[pos_idx],
        exited=exit_step is not None,
        exit_step=exit_step,
        h=cfg.h,
    )


def trajectory_to_csv(rec: TrajectoryRecord, out: IO[str]) -> None:
    """Write one row per barrier; floats use repr for exact round-trips."""
    dim = rec.positions.shape[1]
    out.write("t,tau0,overshoot," + ",".join(f"y{j + 1}" for j in range(dim)) + "\n")
    for i in range(rec.obs_times.size):
        cells = [rec.obs_times[i], rec.tau0[i], rec.overshoot[i]]
        cells.extend(rec.positions[i])
        out.write(",".join(repr(float(c)) for c in cells) + "\n")
