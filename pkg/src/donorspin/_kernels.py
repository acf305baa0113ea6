"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The Monte Carlo inner loops (telegraph-bath phase integration and charge
trajectory bookkeeping) dominate runtime.  By default they are compiled with
``numba.njit``; setting the environment variable ``DONORSPIN_DISABLE_NUMBA=1``
before import selects the fallback path instead.  For the bath kernel the
fallback is a vectorised numpy implementation; the remaining kernels run as
plain Python.  Both paths consume random numbers drawn *outside* the kernels
from per-trajectory ``numpy`` generators, so results are identical between
backends and independent of execution order.

``benchmarks/bench_kernels.py`` compares the two paths.
"""

from __future__ import annotations

import os

import numpy as np

NUMBA_DISABLED = os.environ.get("DONORSPIN_DISABLE_NUMBA", "0") == "1"

if not NUMBA_DISABLED:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover
        NUMBA_DISABLED = True

if NUMBA_DISABLED:
    def _njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def trajectory_rng(seed: int, *stream: int) -> np.random.Generator:
    """Deterministic per-trajectory generator keyed on (seed, stream indices)."""
    return np.random.default_rng(np.random.SeedSequence((int(seed),) + tuple(int(s) for s in stream)))


# ---------------------------------------------------------------------------
# sign function of a pi-pulse train
# ---------------------------------------------------------------------------

def toggle_breakpoints(pulse_times: np.ndarray, total_t: float):
    """Integral table of the DD sign function s(t).

    s(t) starts at +1 and is negated at each pulse time.  Returns
    ``(times, F, signs)`` where ``F[j] = int_0^times[j] s dt`` and ``signs[j]``
    is the value of s just after ``times[j]``; ``times[0] = 0``.
    """
    pt = np.asarray(pulse_times, dtype=np.float64)
    pt = pt[(pt > 0.0) & (pt < total_t)]  # boundary pulses only flip a global sign
    times = np.concatenate(([0.0], np.sort(pt)))
    signs = (-1.0) ** np.arange(times.size)
    gaps = np.diff(np.concatenate((times, [total_t])))
    F = np.concatenate(([0.0], np.cumsum(signs[:-1] * gaps[:-1])))
    return times, F, signs


@_njit(cache=True)
def _sign_integral(t, bp_times, bp_F, bp_signs):
    # F(t) = int_0^t s(t') dt' for the pulse train described by the breakpoints
    j = np.searchsorted(bp_times, t, side="right") - 1
    return bp_F[j] + bp_signs[j] * (t - bp_times[j])


@_njit(cache=True)
def _phase_loop(flip_times, seg_off, xi0, delta, npairs, bp_times, bp_F, bp_signs,
                total_t, out_phase):
    """Accumulated echo phase per trajectory.

    ``flip_times`` holds, for every (trajectory, pair) segment, the sorted flip
    times below ``total_t``; ``seg_off`` indexes segments (trajectory-major,
    pair-minor).  ``out_phase`` receives 2*pi*sum_p delta_p * int s(t)*xi_p(t) dt.
    """
    ntraj = out_phase.size
    for it in range(ntraj):
        phi = 0.0
        for p in range(npairs):
            k = it * npairs + p
            lo, hi = seg_off[k], seg_off[k + 1]
            xi = xi0[k]
            t_prev = 0.0
            f_prev = 0.0
            acc = 0.0
            for idx in range(lo, hi):
                t = flip_times[idx]
                f = _sign_integral(t, bp_times, bp_F, bp_signs)
                acc += xi * (f - f_prev)
                xi = -xi
                t_prev = t
                f_prev = f
            f_end = _sign_integral(total_t, bp_times, bp_F, bp_signs)
            acc += xi * (f_end - f_prev)
            phi += delta[p] * acc
        out_phase[it] = 2.0 * np.pi * phi


def _phase_vectorized(flip_times, seg_off, xi0, delta, npairs, bp_times, bp_F,
                      bp_signs, total_t, out_phase):
    """Pure-numpy evaluation of :func:`_phase_loop` (identical results)."""
    ntraj = out_phase.size
    nseg = npairs * ntraj
    counts = np.diff(seg_off)
    f_end = bp_F[-1] + bp_signs[-1] * (total_t - bp_times[-1])
    if flip_times.size == 0:
        acc = np.full(nseg, f_end)
    else:
        j = np.searchsorted(bp_times, flip_times, side="right") - 1
        F = bp_F[j] + bp_signs[j] * (flip_times - bp_times[j])
        # alternating sum of F increments within each segment:
        #   acc = xi0 * [sum_k (-1)^k (F_{k+1} - F_k)], F_0 = 0, F_last = F(T)
        k_in_seg = np.arange(flip_times.size) - np.repeat(seg_off[:-1], counts)
        alt = (-1.0) ** k_in_seg
        # each flip contributes F*( (-1)^k - (-1)^(k+1) ) = 2*alt*F to the sum
        acc = np.bincount(
            np.repeat(np.arange(nseg), counts), weights=2.0 * alt * F, minlength=nseg
        )
        acc += ((-1.0) ** counts) * f_end
    contrib = xi0 * acc * np.tile(delta, ntraj)
    out_phase[:] = 2.0 * np.pi * contrib.reshape(ntraj, npairs).sum(axis=1)


def accumulated_phases(flip_times, seg_off, xi0, delta, npairs, bp, total_t):
    """Dispatch to the numba or numpy path; returns phases in radians."""
    bp_times, bp_F, bp_signs = bp
    ntraj = (seg_off.size - 1) // npairs
    out = np.empty(ntraj, dtype=np.float64)
    if NUMBA_DISABLED:
        _phase_vectorized(flip_times, seg_off, xi0, delta, npairs,
                          bp_times, bp_F, bp_signs, total_t, out)
    else:
        _phase_loop(flip_times, seg_off, xi0, delta, npairs,
                    bp_times, bp_F, bp_signs, total_t, out)
    return out


# ---------------------------------------------------------------------------
# charge-cycle phase bookkeeping
# ---------------------------------------------------------------------------

@_njit(cache=True)
def _alternating_exposure(x, period):
    """int_0^x of the +1/-1 square wave that starts +1 and toggles every period."""
    m = int(x / period)
    r = x - m * period
    if m % 2 == 0:
        return r
    return period - r


@_njit(cache=True)
def charge_phase_kernel(starts, states, n_int, window, a_mhz, dd_period, grid,
                        out_dd, out_free, out_ion):
    """Nuclear phase traces for an ensemble of charge trajectories.

    ``starts[i, k]`` is the start time of interval k of trajectory i and
    ``states[i, k]`` its electron sign (+1/-1) or 0 when ionised; intervals
    end at the next start (the last one at ``window``).  For each grid time
    the kernel records the accumulated nuclear phase (rad) with and without
    electron DD (pulse period ``dd_period``, gated to neutral intervals) and
    the total time spent ionised.  The frequency shift while neutral is
    +/- a_mhz/2 depending on the electron sign; DD pulses toggle that sign.
    """
    ntraj = starts.shape[0]
    half = np.pi * a_mhz  # 2*pi * (a/2)
    for i in range(ntraj):
        g = 0
        phi_dd = 0.0
        phi_free = 0.0
        t_ion = 0.0
        for k in range(n_int[i]):
            t0 = starts[i, k]
            t1 = starts[i, k + 1] if k + 1 < n_int[i] else window
            s = states[i, k]
            while g < grid.size and grid[g] <= t1:
                dt = grid[g] - t0
                if s == 0:
                    out_ion[i, g] = t_ion + dt
                    out_dd[i, g] = phi_dd
                    out_free[i, g] = phi_free
                else:
                    out_ion[i, g] = t_ion
                    out_dd[i, g] = phi_dd + s * half * _alternating_exposure(dt, dd_period)
                    out_free[i, g] = phi_free + s * half * dt
                g += 1
            dur = t1 - t0
            if s == 0:
                t_ion += dur
            else:
                phi_dd += s * half * _alternating_exposure(dur, dd_period)
                phi_free += s * half * dur
        while g < grid.size:
            out_ion[i, g] = t_ion
            out_dd[i, g] = phi_dd
            out_free[i, g] = phi_free
            g += 1
