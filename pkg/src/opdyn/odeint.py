"""Adaptive Dormand-Prince 5(4) integration with dense output.

The embedded pair uses PI step-size control; accepted steps keep their
stage derivatives so the standard quartic interpolant can answer queries
anywhere inside the integrated span.  ``solve_grid`` additionally clips
steps so that every requested grid time is an exact step endpoint, which
is what the differentiate-through-the-solver training path needs (no
interpolation inside the gradient tape).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Dormand-Prince 5(4) tableau.  B propagates the 5th-order solution; E is
# the difference between the 5th- and embedded 4th-order weights (with the
# FSAL stage included), P the dense-output polynomial coefficients.
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = np.array([
    [0, 0, 0, 0, 0, 0],
    [1 / 5, 0, 0, 0, 0, 0],
    [3 / 40, 9 / 40, 0, 0, 0, 0],
    [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
])
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
E = np.array([
    71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
])
P = np.array([
    [1.0, -2.8535800653862835, 3.0717434641059005, -1.1270175653862835],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 4.023133379230305, -6.249321565289, 2.675424484351598],
    [0.0, -3.7324019615885042, 10.068970589843675, -5.685526961588504],
    [0.0, 2.5548038301849423, -6.399112377351017, 3.5219323679207912],
    [0.0, -1.3744241142186024, 3.272657752246729, -1.7672812570757455],
    [0.0, 1.3824689317781436, -3.764937863556287, 2.382468931778144],
])

N_STAGES = 6  # stages entering the update; stage 7 (FSAL) feeds error/interp
ORDER = 5
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
PI_ALPHA = 0.7 / ORDER
PI_BETA = 0.4 / ORDER


@dataclass(frozen=True)
class SolverConfig:
    rtol: float = 1e-7
    atol: float = 1e-9
    initial_step: float = 0.01
    max_step: float = np.inf
    max_steps: int = 100_000

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("rtol and atol must be positive")
        if self.initial_step <= 0 or self.max_step <= 0:
            raise ValueError("step sizes must be positive")


class StepFailure(RuntimeError):
    """Step budget exhausted or non-finite derivative encountered."""


def _error_norm(err, y_old, y_new, cfg):
    scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y_old), np.abs(y_new))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def rk_stages(f, t, y, dt):
    """The seven stage derivatives of one Dormand-Prince step."""
    k = np.empty((7,) + y.shape)
    k[0] = f(t, y)
    for i in range(1, N_STAGES):
        yi = y + dt * np.tensordot(A[i, :i], k[:i], axes=1)
        k[i] = f(t + C[i] * dt, yi)
    y_new = y + dt * np.tensordot(B, k[:N_STAGES], axes=1)
    k[6] = f(t + dt, y_new)
    return k, y_new


@dataclass
class _Segment:
    t: float
    dt: float
    y: np.ndarray
    k: np.ndarray  # (7, *state)


class DenseSolution:
    """Piecewise-quartic interpolant over the integrated span."""

    def __init__(self, t0, t1, segments):
        self.t0 = min(t0, t1)
        self.t1 = max(t0, t1)
        self._segments = segments
        self._lefts = np.array([min(s.t, s.t + s.dt) for s in segments])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        if np.any(t < self.t0 - 1e-12) or np.any(t > self.t1 + 1e-12):
            raise ValueError("query time outside the integrated span")
        out = []
        for tq in t:
            idx = int(np.searchsorted(self._lefts, tq, side="right")) - 1
            idx = max(0, min(idx, len(self._segments) - 1))
            seg = self._segments[idx]
            theta = (tq - seg.t) / seg.dt
            powers = theta ** np.arange(1, 5)
            weights = P @ powers  # (7,)
            out.append(seg.y + seg.dt * np.tensordot(weights, seg.k, axes=1))
        result = np.stack(out)
        return result[0] if scalar else result


def _propose_step(err, prev_err, dt, direction, cfg):
    if err == 0.0:
        factor = MAX_FACTOR
    else:
        factor = SAFETY * err ** -PI_ALPHA
        if prev_err is not None and prev_err > 0:
            factor *= prev_err ** PI_BETA
        factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
    return direction * min(abs(dt) * factor, cfg.max_step)


def integrate(f, h0, t0: float, t1: float, cfg: SolverConfig) -> DenseSolution:
    """Integrate dh/dt = f(t, h) from t0 to t1 and return a dense solution."""
    y = np.asarray(h0, dtype=float).copy()
    if t1 == t0:
        k = np.zeros((7,) + y.shape)
        return DenseSolution(t0, t1, [_Segment(t0, 1.0, y, k)])
    direction = 1.0 if t1 > t0 else -1.0
    dt = direction * min(cfg.initial_step, cfg.max_step, abs(t1 - t0))
    t = t0
    prev_err = None
    segments = []
    for _ in range(cfg.max_steps):
        dt = direction * min(abs(dt), abs(t1 - t))
        k, y_new = rk_stages(f, t, y, dt)
        if not np.all(np.isfinite(k)):
            raise StepFailure(f"non-finite derivative at t={t:g}")
        err_vec = dt * np.tensordot(E, k, axes=1)
        err = _error_norm(err_vec, y, y_new, cfg)
        if err <= 1.0:
            segments.append(_Segment(t, dt, y.copy(), k))
            t = t + dt
            y = y_new
            prev_err = max(err, 1e-10)
            if direction * (t1 - t) <= 1e-14 * max(1.0, abs(t1)):
                return DenseSolution(t0, t1, segments)
        dt = _propose_step(err, prev_err if err <= 1.0 else None, dt, direction, cfg)
    raise StepFailure(f"step budget {cfg.max_steps} exhausted at t={t:g}")


def solve_grid(f, h0, times, cfg: SolverConfig, record: list | None = None):
    """States at every grid time, stepping exactly onto each grid point.

    ``times[0]`` is the initial time.  When ``record`` is a list, every
    accepted step is appended as (t, dt, y, grid_index) so a reverse sweep
    can replay the exact discrete computation; ``grid_index`` is the index
    of the grid point the step lands on, or None mid-interval.
    """
    times = np.asarray(times, dtype=float)
    if len(times) < 1 or (len(times) > 1 and not np.all(np.diff(times) > 0)):
        raise ValueError("grid must be strictly increasing")
    y = np.asarray(h0, dtype=float).copy()
    out = np.empty((len(times),) + y.shape)
    out[0] = y
    t = times[0]
    dt = min(cfg.initial_step, cfg.max_step)
    prev_err = None
    steps_used = 0
    for j in range(1, len(times)):
        target = times[j]
        while t < target - 1e-14 * max(1.0, abs(target)):
            if steps_used >= cfg.max_steps:
                raise StepFailure(f"step budget {cfg.max_steps} exhausted at t={t:g}")
            step = min(dt, target - t)
            k, y_new = rk_stages(f, t, y, step)
            if not np.all(np.isfinite(k)):
                raise StepFailure(f"non-finite derivative at t={t:g}")
            err_vec = step * np.tensordot(E, k, axes=1)
            err = _error_norm(err_vec, y, y_new, cfg)
            steps_used += 1
            if err <= 1.0:
                lands = t + step >= target - 1e-14 * max(1.0, abs(target))
                if record is not None:
                    record.append((t, step, y.copy(), j if lands else None))
                t += step
                y = y_new
                prev_err = max(err, 1e-10)
                dt = abs(_propose_step(err, prev_err, step, 1.0, cfg))
            else:
                dt = abs(_propose_step(err, None, step, 1.0, cfg))
        t = target
        out[j] = y
    return out


def backward_sweep(f_with_cache, f_vjp, record, cotangents, state_shape):
    """Reverse-mode pass through a recorded ``solve_grid`` run.

    ``record`` is the accepted-step list; ``cotangents`` maps a grid index
    to the loss cotangent injected at the step landing there.  Step sizes
    are treated as fixed (discrete adjoint on the accepted mesh).
    ``f_with_cache(t, y)`` returns (dy, cache); ``f_vjp(cache, g)``
    accumulates parameter gradients and returns the state cotangent.
    Returns the cotangent with respect to the initial state.
    """
    gbar = np.zeros(state_shape)
    for t, dt, y, grid_index in reversed(record):
        if grid_index is not None and grid_index in cotangents:
            gbar = gbar + cotangents[grid_index]
        # recompute stage states and caches
        ys = []
        ks = []
        caches = []
        for i in range(N_STAGES):
            yi = y + dt * sum(A[i, m] * ks[m] for m in range(i)) if i else y
            ki, cache = f_with_cache(t + C[i] * dt, yi)
            ys.append(yi)
            ks.append(ki)
            caches.append(cache)
        acc = [np.zeros(state_shape) for _ in range(N_STAGES)]
        hbar = np.zeros(state_shape)
        for i in range(N_STAGES - 1, -1, -1):
            kbar_i = dt * B[i] * gbar + acc[i]
            xbar_i = f_vjp(caches[i], kbar_i)
            hbar = hbar + xbar_i
            for m in range(i):
                acc[m] = acc[m] + dt * A[i, m] * xbar_i
        gbar = gbar + hbar
    return gbar
