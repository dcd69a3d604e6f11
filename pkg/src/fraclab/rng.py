"""Counter-based random streams and stable-law samplers.

Randomness is generated by the Philox-4x32-10 block cipher, keyed by a
64-bit seed, with a 64-bit stream id and a 64-bit block counter.  Every
variate is a pure function of ``(seed, stream_id, block_index)``, which is
what makes Monte-Carlo runs reproducible independently of worker count,
chunking, or evaluation order.

Block layout
------------
One Philox block yields four 32-bit words, i.e. exactly two doubles with
full 53-bit mantissas, mapped into the open interval (0, 1).  The counter
is packed as ``(low word, high word) = (block, sub-stream)``, so path
simulations can reserve ``sample_index << 32`` as a per-sample base and
still draw up to 2**32 blocks per sample.

Samplers consume a documented number of blocks per variate so that the
compiled and NumPy path kernels reproduce each other block for block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sc

from .errors import ParameterError, ShapeError

__all__ = [
    "RngStream",
    "derive_stream",
    "philox_block",
    "philox_pairs",
    "sample_one_sided_stable",
    "sample_sym_stable_increment",
    "sample_tau0_marginal",
    "sample_overshoot_marginal",
    "overshoot_cdf",
    "one_sided_stable_from_uniforms",
    "gaussian_from_uniforms",
]

_PHILOX_M0 = 0xD2511F53
_PHILOX_M1 = 0xCD9E8D57
_PHILOX_W0 = 0x9E3779B9
_PHILOX_W1 = 0xBB67AE85
_MASK32 = 0xFFFFFFFF
_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN64 = 0x9E3779B97F4A7C15
# (k + 0.5) * 2**-53 maps 53-bit integers into the open unit interval
_INV53 = 1.1102230246251565e-16


def _mix64(z: int) -> int:
    """SplitMix64 finalizer; a fast 64-bit bijective scramble."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_stream(seed: int, *parts: int | float) -> int:
    """Hash ``seed`` and a sequence of ints/floats into a 64-bit stream id.

    Floats enter through their IEEE bit patterns, so two grid nodes with
    bit-identical coordinates always map to the same stream no matter how
    the grid was assembled.  Not cryptographic; collision-resistant enough
    for stream separation.
    """
    h = _mix64(seed ^ _GOLDEN64)
    for p in parts:
        if isinstance(p, float):
            word = int(np.float64(p).view(np.uint64))
        else:
            word = int(p) & _MASK64
        h = _mix64((h + _GOLDEN64) ^ word)
    return h


def philox_block(seed: int, stream_id: int, block: int) -> tuple[int, int, int, int]:
    """One Philox-4x32-10 block as four 32-bit words (scalar reference)."""
    k0 = seed & _MASK32
    k1 = (seed >> 32) & _MASK32
    c0 = block & _MASK32
    c1 = (block >> 32) & _MASK32
    c2 = stream_id & _MASK32
    c3 = (stream_id >> 32) & _MASK32
    for _ in range(10):
        p0 = c0 * _PHILOX_M0
        p1 = c2 * _PHILOX_M1
        hi0, lo0 = p0 >> 32, p0 & _MASK32
        hi1, lo1 = p1 >> 32, p1 & _MASK32
        c0 = hi1 ^ c1 ^ k0
        c2 = hi0 ^ c3 ^ k1
        c1, c3 = lo1, lo0
        k0 = (k0 + _PHILOX_W0) & _MASK32
        k1 = (k1 + _PHILOX_W1) & _MASK32
    return c0, c1, c2, c3


def philox_pairs(seed: int, stream_id: int, blocks: np.ndarray) -> np.ndarray:
    """Vectorized uniforms: shape ``(len(blocks), 2)`` in the open interval (0, 1).

    ``blocks`` is an array of 64-bit block counters.  Each block produces
    two doubles; the mapping never returns 0.0 or 1.0.
    """
    ctr = np.asarray(blocks, dtype=np.uint64)
    c0 = ctr & np.uint64(_MASK32)
    c1 = ctr >> np.uint64(32)
    c2 = np.full_like(ctr, stream_id & _MASK32)
    c3 = np.full_like(ctr, (stream_id >> 32) & _MASK32)
    k0 = np.uint64(seed & _MASK32)
    k1 = np.uint64((seed >> 32) & _MASK32)
    m0 = np.uint64(_PHILOX_M0)
    m1 = np.uint64(_PHILOX_M1)
    mask = np.uint64(_MASK32)
    for _ in range(10):
        p0 = c0 * m0
        p1 = c2 * m1
        hi0 = p0 >> np.uint64(32)
        lo0 = p0 & mask
        hi1 = p1 >> np.uint64(32)
        lo1 = p1 & mask
        c0 = hi1 ^ c1 ^ k0
        c2 = hi0 ^ c3 ^ k1
        c1 = lo1
        c3 = lo0
        k0 = (k0 + np.uint64(_PHILOX_W0)) & mask
        k1 = (k1 + np.uint64(_PHILOX_W1)) & mask
    out = np.empty((ctr.size, 2))
    out[:, 0] = ((((c0 << np.uint64(32)) | c1) >> np.uint64(11)).astype(np.float64) + 0.5) * _INV53
    out[:, 1] = ((((c2 << np.uint64(32)) | c3) >> np.uint64(11)).astype(np.float64) + 0.5) * _INV53
    return out


@dataclass
class RngStream:
    """A position inside one deterministic random stream.

    Attributes
    ----------
    seed:
        64-bit key shared by the whole experiment.
    stream_id:
        64-bit sub-stream selector; use :func:`derive_stream` to derive ids
        from node coordinates or labels.
    counter:
        Next block index to consume.  Advances by the documented block cost
        of each sampler call.
    """

    seed: int
    stream_id: int = 0
    counter: int = field(default=0)

    def __post_init__(self) -> None:
        for name in ("seed", "stream_id", "counter"):
            v = getattr(self, name)
            if not (0 <= int(v) <= _MASK64):
                raise ParameterError(f"{name} must fit in 64 bits, got {v}")

    def block_pairs(self, n: int) -> np.ndarray:
        """Consume ``n`` blocks and return their uniforms, shape ``(n, 2)``."""
        blocks = np.arange(self.counter, self.counter + n, dtype=np.uint64)
        self.counter += n
        return philox_pairs(self.seed, self.stream_id, blocks)

    def uniforms(self, n: int) -> np.ndarray:
        """Consume ``ceil(n/2)`` blocks and return ``n`` uniforms."""
        pairs = self.block_pairs((n + 1) // 2)
        return pairs.ravel()[:n]

    def spawn(self, key: int) -> "RngStream":
        """Derive an independent child stream from an integer key."""
        return RngStream(self.seed, _mix64(self.stream_id ^ _mix64(key ^ _GOLDEN64)), 0)


def one_sided_stable_from_uniforms(beta: float, u_theta, u_e):
    """Kanter transform: uniforms -> one-sided stable with transform exp(-k^beta).

    ``S = (A(pi * u_theta) / E)**((1-beta)/beta)`` with ``E = -log(u_e)``.
    ``beta = 1/2`` collapses to the closed form ``1 / (4 cos^2(theta/2) E)``,
    which is also the fast path inside the compiled kernels.
    """
    theta = np.pi * np.asarray(u_theta)
    energy = -np.log(u_e)
    if beta == 0.5:
        c = np.cos(0.5 * theta)
        return 0.25 / (c * c * energy)
    b1 = 1.0 - beta
    loga = (
        beta * np.log(np.sin(beta * theta))
        + b1 * np.log(np.sin(b1 * theta))
        - np.log(np.sin(theta))
    ) / b1
    return np.exp((loga - np.log(energy)) * (b1 / beta))


def gaussian_from_uniforms(u1, u2):
    """Box-Muller cosine branch; one standard normal per uniform pair."""
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * np.asarray(u2))


def _check_beta_open(beta: float) -> None:
    if not (0.0 < beta < 1.0):
        raise ParameterError(f"stable index beta must lie in (0, 1), got {beta}")


def sample_one_sided_stable(beta: float, rng: RngStream, size: int | None = None):
    """Draw from the one-sided stable law with Laplace transform exp(-k^beta).

    Consumes one block per variate.  Returns a scalar when ``size`` is None.
    """
    _check_beta_open(beta)
    n = 1 if size is None else int(size)
    pairs = rng.block_pairs(n)
    vals = one_sided_stable_from_uniforms(beta, pairs[:, 0], pairs[:, 1])
    return float(vals[0]) if size is None else vals


def sample_sym_stable_increment(
    alpha: float, dt: float, dim: int, rng: RngStream, size: int | None = None
):
    """Increment of the rotationally symmetric ``alpha``-stable process over ``dt``.

    The characteristic function of the returned vector is
    ``exp(-dt * |k|**alpha)``.  For ``alpha < 2`` the vector is a subordinated
    Gaussian ``sqrt(2 * dt**(2/alpha) * S) * Z`` with a single one-sided
    stable ``S`` of index ``alpha/2`` shared by all coordinates.

    Block cost per variate: ``dim`` for ``alpha = 2``, else ``1 + dim``.
    """
    if not (0.0 < alpha <= 2.0):
        raise ParameterError(f"stable index alpha must lie in (0, 2], got {alpha}")
    if dim < 1:
        raise ShapeError(f"dimension must be >= 1, got {dim}")
    if dt <= 0.0:
        raise ParameterError(f"time increment must be positive, got {dt}")
    n = 1 if size is None else int(size)
    if alpha == 2.0:
        pairs = rng.block_pairs(n * dim)
        z = gaussian_from_uniforms(pairs[:, 0], pairs[:, 1]).reshape(n, dim)
        out = math.sqrt(2.0 * dt) * z
    else:
        pairs = rng.block_pairs(n * (1 + dim))
        pairs = pairs.reshape(n, 1 + dim, 2)
        s = one_sided_stable_from_uniforms(alpha / 2.0, pairs[:, 0, 0], pairs[:, 0, 1])
        z = gaussian_from_uniforms(pairs[:, 1:, 0], pairs[:, 1:, 1])
        out = np.sqrt(2.0 * dt ** (2.0 / alpha) * s)[:, None] * z
    return out[0] if size is None else out


def sample_tau0_marginal(beta: float, t: float, rng: RngStream, size: int | None = None):
    """Draw the first-passage time of the increasing stable process over level ``t``.

    Uses the inverse-process identity ``tau0(t) = (t / S)**beta`` in
    distribution, with ``S`` one-sided stable.  One block per variate.
    """
    _check_beta_open(beta)
    if t <= 0.0:
        raise ParameterError(f"passage level t must be positive, got {t}")
    s = sample_one_sided_stable(beta, rng, size=1 if size is None else size)
    vals = (t / np.asarray(s)) ** beta
    return float(vals[0]) if size is None else vals


def sample_overshoot_marginal(beta: float, t: float, rng: RngStream, size: int | None = None):
    """Draw the jump overshoot above level ``t`` at first passage.

    The normalized overshoot ``W/t`` follows the generalized-arcsine law
    with density ``sin(pi beta)/pi * v**(-beta) (1+v)**(-1)``; sampling is
    by inverse CDF through the regularized incomplete beta function.  One
    block per variate (the second uniform of each block is discarded).
    """
    _check_beta_open(beta)
    if t <= 0.0:
        raise ParameterError(f"passage level t must be positive, got {t}")
    n = 1 if size is None else int(size)
    u = rng.block_pairs(n)[:, 0]
    # invert from whichever tail is better conditioned: the upper branch
    # computes 1-x directly, else betaincinv saturates at x = 1.0 and the
    # odds ratio below overflows
    lo = u <= 0.5
    x = np.where(lo, sc.betaincinv(1.0 - beta, beta, np.where(lo, u, 0.5)), 0.0)
    y = np.where(lo, 1.0, sc.betaincinv(beta, 1.0 - beta, np.where(lo, 0.5, 1.0 - u)))
    vals = np.where(lo, t * x / (1.0 - x), t * (1.0 - y) / y)
    return float(vals[0]) if size is None else vals


def overshoot_cdf(beta: float, t: float, w):
    """P[W(t) <= w] for the first-passage overshoot; regularized beta closed form."""
    _check_beta_open(beta)
    if t <= 0.0:
        raise ParameterError(f"passage level t must be positive, got {t}")
    arr = np.asarray(w, dtype=float)
    x = np.clip(arr / (t + arr), 0.0, 1.0)
    out = np.where(arr <= 0.0, 0.0, sc.betainc(1.0 - beta, beta, x))
    return float(out) if arr.ndim == 0 else out
