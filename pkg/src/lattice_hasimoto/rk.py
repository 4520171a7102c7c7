"""Adaptive embedded Runge-Kutta integration, batched over ensemble members.

Dormand-Prince 5(4): seven stages, FSAL, fifth-order propagation with a
fourth-order error estimate.  The state is a float array of shape
(members, dim) and every member carries its own time and step size, so one
heavy-tailed ensemble member cannot stall the rest.  Members march exactly
through their requested sample times (steps are clipped to land on them),
which removes interpolation error from sampled output.  Finished members are
compacted out of the working arrays.

For single trajectories the accepted knots (t, y, f) can be recorded and
evaluated anywhere by cubic Hermite interpolation; that is what drives the
frame transport along a stored amplitude trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import IntegrationError

# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([], dtype=float),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# b5 - b4: coefficients of the embedded error estimate
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
               -17253 / 339200, 22 / 525, -1 / 40])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_ORDER_EXP = -1.0 / 5.0


@dataclass
class BatchResult:
    """Samples and bookkeeping from one batched integration."""

    samples: np.ndarray            # (n_sample_times, members, dim)
    n_accepted: int = 0
    n_rejected: int = 0
    max_post_drift: float = 0.0    # largest adjustment made by post_accept
    knot_times: Optional[np.ndarray] = None
    knot_states: Optional[np.ndarray] = None
    knot_derivs: Optional[np.ndarray] = None

    def dense(self) -> "HermiteDense":
        if self.knot_times is None:
            raise ValueError("knots were not recorded")
        return HermiteDense(self.knot_times, self.knot_states, self.knot_derivs)


class HermiteDense:
    """Cubic Hermite interpolant through (t, y, y') knots."""

    def __init__(self, ts: np.ndarray, ys: np.ndarray, fs: np.ndarray):
        order = np.argsort(ts)
        self.ts = np.asarray(ts)[order]
        self.ys = np.asarray(ys)[order]
        self.fs = np.asarray(fs)[order]
        if len(self.ts) < 2:
            raise ValueError("need at least two knots")

    @property
    def max_gap(self) -> float:
        return float(np.max(np.diff(self.ts)))

    def __call__(self, t: float) -> np.ndarray:
        ts = self.ts
        if not (ts[0] - 1e-12 <= t <= ts[-1] + 1e-12):
            raise ValueError(f"t={t} outside stored range [{ts[0]}, {ts[-1]}]")
        i = int(np.clip(np.searchsorted(ts, t) - 1, 0, len(ts) - 2))
        h = ts[i + 1] - ts[i]
        s = (t - ts[i]) / h
        s2, s3 = s * s, s * s * s
        return ((2 * s3 - 3 * s2 + 1) * self.ys[i]
                + (s3 - 2 * s2 + s) * h * self.fs[i]
                + (-2 * s3 + 3 * s2) * self.ys[i + 1]
                + (s3 - s2) * h * self.fs[i + 1])


def _initial_step(f0, y0, rtol, atol, direction, span, max_step):
    """Cheap variant of the classic starting-step heuristic, per member."""
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2, axis=1))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2, axis=1))
    h = np.where(d1 > 1e-12, 0.01 * (d0 + 1e-6) / (d1 + 1e-12), 1e-6)
    h = np.minimum(h, min(max_step, span if span > 0 else max_step))
    return direction * np.maximum(h, 1e-12)


def integrate_batch(
    rhs: Callable[[np.ndarray, np.ndarray], np.ndarray],
    y0: np.ndarray,
    sample_times: np.ndarray,
    rtol: float,
    atol: float,
    max_step: float = np.inf,
    t0: float = 0.0,
    post_accept: Optional[Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]] = None,
    record_knots: bool = False,
    component_namer: Optional[Callable[[int, int], str]] = None,
    max_iterations: int = 10 ** 7,
) -> BatchResult:
    """Integrate dy/dt = rhs(t, y) for a batch of members.

    rhs maps (t: (B,), y: (B, D)) -> (B, D) and is evaluated on all active
    members at once; members may sit at different times.  Finished members
    are compacted out of the working arrays, so rhs must treat rows
    uniformly (member-specific parameters belong inside the state, not in
    the closure).  sample_times must be strictly monotone starting from t0
    (either direction); each member's state is captured exactly at each
    sample time.  post_accept, if given, maps accepted states to adjusted
    states plus a per-member adjustment magnitude (used to renormalize
    spins/frames, with the drift logged).
    """
    y0 = np.atleast_2d(np.asarray(y0, dtype=np.float64))
    n_members, dim = y0.shape
    sample_times = np.asarray(sample_times, dtype=np.float64)
    if sample_times.ndim != 1 or sample_times.size == 0:
        raise ValueError("need at least one sample time")
    diffs = np.diff(np.concatenate([[t0], sample_times]))
    if np.all(diffs >= 0) and np.all(np.diff(sample_times) > 0):
        direction = 1.0
    elif np.all(diffs <= 0) and np.all(np.diff(sample_times) < 0):
        direction = -1.0
    else:
        raise ValueError("sample times must be strictly monotone away from t0")
    n_samples = sample_times.size
    span = abs(sample_times[-1] - t0)

    if record_knots and n_members != 1:
        raise ValueError("knot recording only supported for a single member")

    samples = np.empty((n_samples, n_members, dim))
    member_ids = np.arange(n_members)

    t = np.full(n_members, float(t0))
    y = y0.copy()
    f = rhs(t, y)
    idx = np.zeros(n_members, dtype=int)

    # Capture any leading sample times equal to t0.
    while True:
        due = idx < n_samples
        hit = due & np.isclose(sample_times[np.minimum(idx, n_samples - 1)], t,
                               rtol=0.0, atol=1e-14 * max(1.0, abs(t0)))
        if not np.any(hit):
            break
        samples[idx[hit], member_ids[hit]] = y[hit]
        idx[hit] += 1

    h = _initial_step(f, y, rtol, atol, direction, span, max_step)

    knots_t, knots_y, knots_f = [], [], []
    if record_knots:
        knots_t.append(t[0])
        knots_y.append(y[0].copy())
        knots_f.append(f[0].copy())

    result = BatchResult(samples=samples)
    k = np.empty((7, n_members, dim))

    iteration = 0
    while np.any(idx < n_samples):
        iteration += 1
        if iteration > max_iterations:
            raise IntegrationError(
                f"exceeded {max_iterations} iterations", t=float(t[0]))

        # Compact finished members out of the working arrays.
        alive = idx < n_samples
        if np.sum(alive) < 0.6 * t.size:
            t, y, f, h, idx = t[alive], y[alive], f[alive], h[alive], idx[alive]
            member_ids = member_ids[alive]
            k = np.empty((7, t.size, dim))

        # Members past their last sample stay in the arrays until the next
        # compaction; they are stepped but masked out of every state update.
        alive = idx < n_samples

        targets = sample_times[np.minimum(idx, n_samples - 1)]
        remaining = targets - t
        h_eff = direction * np.minimum(np.abs(h), np.abs(remaining))
        hits_target = np.abs(h_eff) >= np.abs(remaining) - 1e-15 * np.maximum(
            1.0, np.abs(targets))

        # Underflow is judged on the controller's step, not the clipped one:
        # a step shortened to land on a sample time is legitimate.
        floor = 1e-14 * np.maximum(1.0, np.abs(t))
        under = (np.abs(h) < floor) & alive
        if np.any(under):
            m = int(np.argmax(under))
            comp = int(np.argmax(np.abs(f[m])))
            where = (component_namer(int(member_ids[m]), comp)
                     if component_namer else f"component {comp}")
            raise IntegrationError(
                f"step size underflow at t={t[m]:.6g} ({where})",
                t=float(t[m]), site=comp)

        hcol = h_eff[:, None]
        k[0] = f
        for s in range(1, 7):
            acc = _A[s][0] * k[0]
            for j in range(1, s):
                acc = acc + _A[s][j] * k[j]
            k[s] = rhs(t + _C[s] * h_eff, y + hcol * acc)

        y_new = y + hcol * np.einsum("s,smd->md", _B5, k)
        err_vec = hcol * np.einsum("s,smd->md", _E, k)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        with np.errstate(invalid="ignore", divide="ignore"):
            err = np.sqrt(np.mean((err_vec / scale) ** 2, axis=1))
        err = np.where(np.isfinite(err), err, np.inf)

        accept = (err <= 1.0) & alive
        with np.errstate(divide="ignore"):
            factor = _SAFETY * err ** _ORDER_EXP
        factor = np.where(np.isfinite(factor), factor, _MAX_FACTOR)
        factor = np.clip(factor, _MIN_FACTOR, _MAX_FACTOR)
        factor = np.where(accept, factor, np.minimum(factor, 1.0))

        if np.any(accept):
            acc_rows = np.nonzero(accept)[0]
            y[acc_rows] = y_new[acc_rows]
            f[acc_rows] = k[6][acc_rows]       # FSAL
            t[acc_rows] = np.where(hits_target[acc_rows],
                                   targets[acc_rows],
                                   t[acc_rows] + h_eff[acc_rows])
            if post_accept is not None:
                adjusted, drift = post_accept(y[acc_rows])
                y[acc_rows] = adjusted
                if drift.size:
                    result.max_post_drift = max(result.max_post_drift,
                                                float(np.max(drift)))
            if record_knots:
                knots_t.append(t[0])
                knots_y.append(y[0].copy())
                knots_f.append(f[0].copy())

            captured = accept & hits_target
            cap_rows = np.nonzero(captured)[0]
            if cap_rows.size:
                samples[idx[cap_rows], member_ids[cap_rows]] = y[cap_rows]
                idx[cap_rows] += 1
            result.n_accepted += int(acc_rows.size)
        result.n_rejected += int(np.sum(alive & ~accept))

        # A member that clipped its step to hit a sample time keeps its
        # previously validated natural step instead of restarting small.
        proposal = np.abs(h_eff) * factor
        proposal = np.where(accept & hits_target,
                            np.maximum(proposal, np.abs(h)), proposal)
        h = direction * np.minimum(proposal, max_step)

    if record_knots:
        result.knot_times = np.array(knots_t)
        result.knot_states = np.array(knots_y)
        result.knot_derivs = np.array(knots_f)
    return result
