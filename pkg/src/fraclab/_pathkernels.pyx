# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled path-stepping kernel.

Scalar per-path loop over operational-time steps with the counter-based
generator inlined, so one path costs no Python work at all.  Block
consumption per (sample, step) matches the NumPy fallback exactly: the two
kernels produce identical uniforms and agree on every output up to libm
rounding in the transforms.
"""

from libc.math cimport cos, exp, log, sin, sqrt, INFINITY

import numpy as np

from libc.stdint cimport int64_t, int8_t, uint32_t, uint64_t

cdef double PI = 3.141592653589793
cdef double TWO_PI = 6.283185307179586
cdef double INV53 = 1.1102230246251565e-16  # 2**-53
cdef double TINY = 5e-324
cdef uint32_t M0 = 0xD2511F53u
cdef uint32_t M1 = 0xCD9E8D57u
cdef uint32_t W0 = 0x9E3779B9u
cdef uint32_t W1 = 0xBB67AE85u

cdef int FLAG_TIME_FIRST = 0
cdef int FLAG_SPACE_FIRST = 1
cdef int FLAG_TRUNCATED = 2

cdef int MAX_DIM = 8


cdef inline void philox2(uint64_t seed, uint64_t sid, uint64_t block,
                         double* u1, double* u2) noexcept nogil:
    cdef uint32_t k0 = <uint32_t>seed
    cdef uint32_t k1 = <uint32_t>(seed >> 32)
    cdef uint32_t c0 = <uint32_t>block
    cdef uint32_t c1 = <uint32_t>(block >> 32)
    cdef uint32_t c2 = <uint32_t>sid
    cdef uint32_t c3 = <uint32_t>(sid >> 32)
    cdef uint64_t p0, p1
    cdef uint32_t hi0, lo0, hi1, lo1
    cdef int r
    for r in range(10):
        p0 = (<uint64_t>c0) * (<uint64_t>M0)
        p1 = (<uint64_t>c2) * (<uint64_t>M1)
        hi0 = <uint32_t>(p0 >> 32)
        lo0 = <uint32_t>p0
        hi1 = <uint32_t>(p1 >> 32)
        lo1 = <uint32_t>p1
        c0 = hi1 ^ c1 ^ k0
        c2 = hi0 ^ c3 ^ k1
        c1 = lo1
        c3 = lo0
        k0 = k0 + W0
        k1 = k1 + W1
    u1[0] = ((<double>((((<uint64_t>c0) << 32) | c1) >> 11)) + 0.5) * INV53
    u2[0] = ((<double>((((<uint64_t>c2) << 32) | c3) >> 11)) + 0.5) * INV53


cdef inline double kanter(double beta, double u_theta, double u_e) noexcept nogil:
    # one-sided stable with Laplace transform exp(-k**beta)
    cdef double theta = PI * u_theta
    cdef double energy = -log(u_e)
    cdef double c, b1, loga
    if beta == 0.5:
        c = cos(0.5 * theta)
        return 0.25 / (c * c * energy)
    b1 = 1.0 - beta
    loga = (beta * log(sin(beta * theta)) + b1 * log(sin(b1 * theta)) - log(sin(theta))) / b1
    return exp((loga - log(energy)) * (b1 / beta))


cdef inline double gaussian(double u1, double u2) noexcept nogil:
    return sqrt(-2.0 * log(u1)) * cos(TWO_PI * u2)


cdef inline double eval_time(int tcode, const double* tpar, int ntpar,
                             const double* ttab, int nttab, double tmax,
                             double t) noexcept nogil:
    cdef double acc, x, r, lo, hi, frac, q
    cdef int i
    cdef long j, m
    if tcode == 1:
        return tpar[0]
    if tcode == 2:
        return exp(tpar[0] * t)
    if tcode == 3:
        acc = tpar[ntpar - 1]
        for i in range(ntpar - 2, -1, -1):
            acc = acc * t + tpar[i]
        return acc
    if tcode == 4:
        return 1.0 if t <= tpar[0] else 0.0
    # tcode == 5: graded-grid table lookup, t_j = tmax*(j/m)**4
    m = nttab - 1
    x = t / tmax
    if x < 0.0:
        x = 0.0
    elif x > 1.0:
        x = 1.0
    r = sqrt(sqrt(x))
    j = <long>(r * m)
    if j > m - 1:
        j = m - 1
    q = (<double>j) / m
    q = q * q
    lo = tmax * q * q
    q = (<double>(j + 1)) / m
    q = q * q
    hi = tmax * q * q
    frac = (t - lo) / (hi - lo)
    if frac < 0.0:
        frac = 0.0
    elif frac > 1.0:
        frac = 1.0
    return ttab[j] * (1.0 - frac) + ttab[j + 1] * frac


cdef inline double eval_space(int scode, const double* spar, int nspar,
                              const double* x) noexcept nogil:
    cdef double z, acc
    cdef int i
    if scode == 0:
        return 1.0
    if scode == 1:
        return spar[0]
    if scode == 2:
        return sin(spar[0] * PI * (x[0] - spar[1]) / (spar[2] - spar[1]))
    if scode == 3:
        z = (x[0] - spar[0]) / spar[1]
        return exp(-z * z)
    acc = spar[nspar - 1]
    for i in range(nspar - 2, -1, -1):
        acc = acc * x[0] + spar[i]
    return acc


cdef inline bint outside(int dcode, const double* dpar, const double* x,
                         int dim) noexcept nogil:
    cdef double acc, d
    cdef int j
    if dcode == 0:
        return False
    if dcode == 1:
        return x[0] <= dpar[0] or x[0] >= dpar[1]
    acc = 0.0
    for j in range(dim):
        d = x[j] - dpar[1 + j]
        acc += d * d
    return acc >= dpar[0]


def philox_pairs(seed, stream_id, blocks):
    """Compiled counterpart of rng.philox_pairs for cross-checking."""
    cdef uint64_t[::1] blk = np.ascontiguousarray(blocks, dtype=np.uint64)
    cdef Py_ssize_t n = blk.shape[0]
    out_arr = np.empty((n, 2))
    cdef double[:, ::1] out = out_arr
    cdef uint64_t s = seed, sid = stream_id
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            philox2(s, sid, blk[i], &out[i, 0], &out[i, 1])
    return out_arr


def run_paths(double alpha, double beta, int dim, int domain_code,
              double[::1] dpar, double t_bar, double[::1] x0, double lam,
              int tcode, double[::1] tpar, double[::1] ttab, double ttab_tmax,
              int scode, double[::1] spar, double h, long max_steps, bint refine,
              seed, stream_id, sample0, long n,
              double[::1] tau0, double[::1] tauom, double[::1] w,
              double[:, ::1] xexit, double[::1] integral, int64_t[::1] steps,
              int8_t[::1] flag, long off):
    """Simulate n joint paths; write results into the out arrays at [off, off+n).

    With ``refine`` the step drops from h to h/256 whenever the remaining gap
    to the time barrier is below (32h)**(1/beta), one typical pre-crossing
    strip.  The subordinator law is exact at any state-dependent step size;
    refining only the strip cuts the crossing overshoot error from h**(1/beta)
    scale to (h/256)**(1/beta) at a bounded extra cost, and paths that leap
    the strip in one heavy jump never pay for it.
    """
    if dim > MAX_DIM:
        raise ValueError(f"compiled kernel supports dim <= {MAX_DIM}, got {dim}")
    cdef uint64_t seed_u = seed
    cdef uint64_t sid = stream_id
    cdef uint64_t s0 = sample0
    cdef int extra = 1 if alpha < 2.0 else 0
    cdef int bps = 1 + extra + dim
    cdef double hb = h ** (1.0 / beta)
    cdef double amp2 = sqrt(2.0 * h)
    cdef double h2a = h ** (2.0 / alpha) if alpha < 2.0 else 0.0
    cdef double hf = h / 256.0
    cdef double hbf = hf ** (1.0 / beta)
    cdef double amp2f = sqrt(2.0 * hf)
    cdef double h2af = hf ** (2.0 / alpha) if alpha < 2.0 else 0.0
    cdef double delta = (32.0 * h) ** (1.0 / beta)
    cdef double half_alpha = 0.5 * alpha
    cdef bint have_f = tcode >= 0
    cdef bint have_lam = lam != 0.0
    cdef int ntpar = tpar.shape[0]
    cdef int nttab = ttab.shape[0]
    cdef int nspar = spar.shape[0]
    cdef const double* tpar_p = &tpar[0] if ntpar else NULL
    cdef const double* ttab_p = &ttab[0] if nttab else NULL
    cdef const double* spar_p = &spar[0] if nspar else NULL
    cdef const double* dpar_p = &dpar[0] if dpar.shape[0] else NULL

    cdef double xbuf[8]
    cdef double big_t, op_t, acc, u1, u2, sub, amp, z, tv, sv, disc, wval
    cdef double step_h, step_hb, step_h2a, step_amp2
    cdef bint fine
    cdef uint64_t base, blk
    cdef long i, k
    cdef int j, fl

    with nogil:
        for i in range(n):
            base = (s0 + <uint64_t>i) << 32
            big_t = 0.0
            op_t = 0.0
            acc = 0.0
            for j in range(dim):
                xbuf[j] = x0[j]
            fl = FLAG_TRUNCATED
            k = 0
            while k < max_steps:
                fine = refine and t_bar - big_t < delta
                if fine:
                    step_h, step_hb = hf, hbf
                    step_h2a, step_amp2 = h2af, amp2f
                else:
                    step_h, step_hb = h, hb
                    step_h2a, step_amp2 = h2a, amp2
                if have_f:
                    tv = eval_time(tcode, tpar_p, ntpar, ttab_p, nttab, ttab_tmax,
                                   t_bar - big_t)
                    sv = eval_space(scode, spar_p, nspar, xbuf)
                    if have_lam:
                        disc = exp(-lam * op_t) if refine else exp(-lam * k * h)
                    else:
                        disc = 1.0
                    acc += step_h * disc * tv * sv
                blk = base + (<uint64_t>k) * (<uint64_t>bps)
                philox2(seed_u, sid, blk, &u1, &u2)
                sub = kanter(beta, u1, u2)
                big_t = big_t + step_hb * sub
                op_t = op_t + step_h
                if extra:
                    philox2(seed_u, sid, blk + 1, &u1, &u2)
                    amp = sqrt(2.0 * step_h2a * kanter(half_alpha, u1, u2))
                else:
                    amp = step_amp2
                for j in range(dim):
                    philox2(seed_u, sid, blk + (<uint64_t>(1 + extra + j)), &u1, &u2)
                    xbuf[j] += amp * gaussian(u1, u2)
                k += 1
                # space exit takes priority on ties: a time hit must end inside
                if outside(domain_code, dpar_p, xbuf, dim):
                    fl = FLAG_SPACE_FIRST
                    break
                if big_t >= t_bar:
                    fl = FLAG_TIME_FIRST
                    break

            if not refine:
                op_t = k * h
            flag[off + i] = <int8_t>fl
            steps[off + i] = k
            integral[off + i] = acc
            for j in range(dim):
                xexit[off + i, j] = xbuf[j]
            if fl == FLAG_TIME_FIRST:
                tau0[off + i] = op_t
                tauom[off + i] = INFINITY
                wval = big_t - t_bar
                w[off + i] = wval if wval != 0.0 else TINY
            elif fl == FLAG_SPACE_FIRST:
                tau0[off + i] = INFINITY
                tauom[off + i] = op_t
                w[off + i] = 0.0
            else:
                tau0[off + i] = INFINITY
                tauom[off + i] = INFINITY
                w[off + i] = 0.0
