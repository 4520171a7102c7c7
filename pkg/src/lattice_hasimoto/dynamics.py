"""Lattice flows, conserved quantities, and frame transport.

Three flows are integrated: the focusing Ablowitz-Ladik lattice

    i da_n/dt = -(1 + |a_n|^2)(a_{n+1} + a_{n-1}) + 2 a_n,

the integrable lattice spin chain

    dS_n/dt = -S_n x ( 2 S_{n+1}/(1 + S_n.S_{n+1}) + 2 S_{n-1}/(1 + S_n.S_{n-1}) ),

and the ordinary (non-integrable) Heisenberg chain dS_n/dt = -S_n x (S_{n+1}
+ S_{n-1}).  Free boundary drops the missing neighbor term, which is the same
as zero-extending the field; the periodic variant exists only to validate the
integrator against plane waves.

Frame transport: along an amplitude trajectory the anchor frame obeys
dP/dt = P A(t) with the antisymmetric generator built from (a_anchor,
a_{anchor-1}); all other frames follow by the Q-update recursion at each
output time.  Conservation is monitored, never enforced: the integrator is a
plain embedded pair, spins are renormalized to the sphere after accepted
steps and the renormalization magnitude is logged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rk
from .core import (ALField, DegeneracyError, FrameSequence, ParameterError,
                   ResolutionError, Rotation, SpinField, Trajectory, Window,
                   japanese_bracket)
from .hasimoto import reorthonormalize_block, transport_rotation_block

EPS_ANTIPARALLEL = 1e-12


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 0.25

    def __post_init__(self):
        if not (self.rel_tol >= 1e-14 and self.abs_tol > 0 and self.max_step > 0):
            raise ParameterError(
                "need rel_tol >= 1e-14 and positive abs_tol, max_step")


@dataclass(frozen=True)
class ConservedReport:
    """Initial values and relative drift of the monitored Hamiltonians."""

    names: tuple
    initial: np.ndarray
    drift: np.ndarray            # max_t |H(t) - H(0)| / max(1, |H(0)|), per name
    series: np.ndarray           # (n_times, n_names)
    times: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.drift) < 0):
            raise ParameterError("drift must be nonnegative")

    def as_rows(self):
        for j, name in enumerate(self.names):
            for t, v in zip(self.times, self.series[:, j]):
                yield float(t), name, float(v)


# --------------------------------------------------------------------------
# Vector fields (array cores + typed wrappers)
# --------------------------------------------------------------------------

def _shift(y: np.ndarray, direction: int, boundary: str) -> np.ndarray:
    """Neighbor lookup along the last axis: zero-extended or wrapped."""
    if boundary == "periodic":
        return np.roll(y, -direction, axis=-1)
    out = np.zeros_like(y)
    if direction == 1:
        out[..., :-1] = y[..., 1:]
    else:
        out[..., 1:] = y[..., :-1]
    return out


def al_rhs(y: np.ndarray, boundary: str = "free") -> np.ndarray:
    """da/dt for complex amplitude arrays (..., n_sites)."""
    nb = _shift(y, +1, boundary) + _shift(y, -1, boundary)
    return 1j * ((1.0 + np.abs(y) ** 2) * nb - 2.0 * y)


def al_vector_field(a: ALField, boundary: str = "free") -> ALField:
    if boundary not in ("free", "periodic"):
        raise ParameterError(f"unknown boundary {boundary!r}")
    return ALField(a.window, al_rhs(a.values, boundary))


def lhm_rhs(s: np.ndarray) -> np.ndarray:
    """dS/dt for spin arrays (..., n_sites, 3), free boundary.

    No degeneracy guard here: near-antiparallel bonds blow the field up and
    the step controller reacts; the typed wrapper raises instead.
    """
    dots = np.sum(s[..., :-1, :] * s[..., 1:, :], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = 1.0 / (1.0 + dots)
        w = np.zeros_like(s)
        w[..., :-1, :] += 2.0 * s[..., 1:, :] * coef[..., None]
        w[..., 1:, :] += 2.0 * s[..., :-1, :] * coef[..., None]
    return -np.cross(s, w)


def lhm_vector_field(s: SpinField) -> np.ndarray:
    dots = np.sum(s.values[:-1] * s.values[1:], axis=1)
    bad = np.nonzero(1.0 + dots <= EPS_ANTIPARALLEL)[0]
    if bad.size:
        site = int(s.window.lo + bad[0])
        raise DegeneracyError(f"antiparallel neighbors at site {site}", site=site)
    return lhm_rhs(s.values)


def heis_rhs(s: np.ndarray) -> np.ndarray:
    w = np.zeros_like(s)
    w[..., :-1, :] += s[..., 1:, :]
    w[..., 1:, :] += s[..., :-1, :]
    return -np.cross(s, w)


def heis_vector_field(s: SpinField) -> np.ndarray:
    return heis_rhs(s.values)


# --------------------------------------------------------------------------
# Hamiltonians
# --------------------------------------------------------------------------

def hamiltonians(state, boundary: str = "free") -> dict:
    """Values of the monitored energies on one state.

    For amplitudes: H_LHM = sum 2 log(1+|a|^2) (the mass-like invariant),
    H_AL = -sum Re(conj(a_n) a_{n+1}) + sum log(1+|a|^2), and the Heisenberg
    energy rewritten through the transform, sum 2|a|^2/(1+|a|^2).  For spins
    the same quantities are computed from the bond dot products; H_AL has no
    spin-side expression and is omitted there.
    """
    if isinstance(state, ALField):
        y = state.values
        sq = np.abs(y) ** 2
        hop = np.real(np.conj(y[:-1]) * y[1:])
        if boundary == "periodic" and len(y) > 1:
            hop = np.concatenate([hop, [np.real(np.conj(y[-1]) * y[0])]])
        return {
            "H_LHM": float(np.sum(2.0 * np.log1p(sq))),
            "H_AL": float(-np.sum(hop) + np.sum(np.log1p(sq))),
            "H_Heis": float(np.sum(2.0 * sq / (1.0 + sq))),
        }
    if isinstance(state, SpinField):
        v = state.values
        dots = np.sum(v[:-1] * v[1:], axis=1)
        if boundary == "periodic" and len(v) > 1:
            dots = np.concatenate([dots, [float(np.dot(v[-1], v[0]))]])
        if np.any(1.0 + dots <= EPS_ANTIPARALLEL):
            site = int(state.window.lo + np.argmax(1.0 + dots <= EPS_ANTIPARALLEL))
            raise DegeneracyError(
                f"H_LHM undefined: antiparallel bond at site {site}", site=site)
        return {
            "H_LHM": float(np.sum(-2.0 * np.log((1.0 + dots) / 2.0))),
            "H_Heis": float(np.sum(1.0 - dots)),
        }
    raise ParameterError(f"no Hamiltonians for {type(state).__name__}")


def conserved_report(traj: Trajectory, boundary: str = "free") -> ConservedReport:
    rows = [hamiltonians(s, boundary) for s in traj.states]
    names = tuple(rows[0].keys())
    series = np.array([[r[n] for n in names] for r in rows])
    initial = series[0]
    denom = np.maximum(1.0, np.abs(initial))
    drift = np.max(np.abs(series - initial), axis=0) / denom
    return ConservedReport(names, initial, drift, series, np.array(traj.times))


# --------------------------------------------------------------------------
# Time integration
# --------------------------------------------------------------------------

def _pack_complex(z: np.ndarray) -> np.ndarray:
    return np.concatenate([z.real, z.imag], axis=-1)


def _unpack_complex(y: np.ndarray) -> np.ndarray:
    n = y.shape[-1] // 2
    return y[..., :n] + 1j * y[..., n:]


def _spin_renormalize(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    b = y.shape[0]
    s = y.reshape(b, -1, 3)
    norms = np.linalg.norm(s, axis=2)
    drift = np.max(np.abs(norms - 1.0), axis=1)
    return (s / norms[:, :, None]).reshape(b, -1), drift


@dataclass
class IntegrationStats:
    n_accepted: int
    n_rejected: int
    max_renormalization: float


def _sorted_sample_times(t_final: float, sample_times) -> np.ndarray:
    if sample_times is None:
        ts = np.array([0.0, t_final]) if t_final != 0.0 else np.array([0.0])
    else:
        ts = np.asarray(sample_times, dtype=float)
    lo, hi = min(0.0, t_final), max(0.0, t_final)
    if np.any(ts < lo - 1e-12) or np.any(ts > hi + 1e-12):
        raise ParameterError("sample times must lie between 0 and t_final")
    ts = np.unique(ts)                      # ascending
    return ts if t_final >= 0 else ts[::-1]  # integration order


def integrate(state, field: str = "al", boundary: str = "free",
              t_final: float = 1.0, cfg: IntegratorConfig = IntegratorConfig(),
              sample_times=None, return_stats: bool = False):
    """Evolve one state and sample it at the requested times.

    Returns a Trajectory with times in increasing order regardless of the
    integration direction (t_final may be negative).  Spin states are
    renormalized to the sphere after every accepted step; the largest
    renormalization magnitude is reported through the optional stats.
    """
    if not np.isfinite(t_final):
        raise ParameterError("t_final must be finite")
    if boundary not in ("free", "periodic"):
        raise ParameterError(f"unknown boundary {boundary!r}")
    order = _sorted_sample_times(t_final, sample_times)
    window = state.window

    if field == "al":
        if not isinstance(state, ALField):
            raise ParameterError("al flow needs an ALField")
        y0 = _pack_complex(state.values)[None, :]
        n = len(window)

        def rhs(t, y):
            return _pack_complex(al_rhs(_unpack_complex(y), boundary))

        post = None

        def to_state(row):
            return ALField(window, _unpack_complex(row))

        def namer(member, comp):
            return f"site {window.lo + comp % n}"

    elif field in ("lhm", "heis"):
        if not isinstance(state, SpinField):
            raise ParameterError(f"{field} flow needs a SpinField")
        core = lhm_rhs if field == "lhm" else heis_rhs
        if field == "lhm":
            lhm_vector_field(state)        # degeneracy guard on the initial data
        y0 = state.values.reshape(1, -1)

        def rhs(t, y):
            return core(y.reshape(y.shape[0], -1, 3)).reshape(y.shape[0], -1)

        post = _spin_renormalize

        def to_state(row):
            return SpinField(window, row.reshape(-1, 3))

        def namer(member, comp):
            return f"site {window.lo + comp // 3}"

    else:
        raise ParameterError(f"unknown field {field!r}")

    res = rk.integrate_batch(rhs, y0, order, cfg.rel_tol, cfg.abs_tol,
                             cfg.max_step, post_accept=post,
                             component_namer=namer)
    states = [to_state(res.samples[i, 0]) for i in range(len(order))]
    if t_final < 0:
        order, states = order[::-1], states[::-1]
    traj = Trajectory(order, tuple(states))
    if return_stats:
        return traj, IntegrationStats(res.n_accepted, res.n_rejected,
                                      res.max_post_drift)
    return traj


# --------------------------------------------------------------------------
# Frame transport along an amplitude trajectory
# --------------------------------------------------------------------------

def frame_generator(a_here, a_prev) -> np.ndarray:
    """The antisymmetric transport generator built from (a_n, a_{n-1}).

    Row/column order matches the frame layout: entries carry
    -2 Re(conj(a_n) a_{n-1}) in the normal-plane block and
    -2 Im/Re(a_n - a_{n-1}) in the column coupling to the spin direction.
    Accepts scalars or equal-shape arrays; returns shape (..., 3, 3).
    """
    a_here = np.asarray(a_here, dtype=np.complex128)
    a_prev = np.asarray(a_prev, dtype=np.complex128)
    twist = 2.0 * np.real(np.conj(a_here) * a_prev)
    dre = 2.0 * np.real(a_here - a_prev)
    dim_ = 2.0 * np.imag(a_here - a_prev)
    m = np.zeros(a_here.shape + (3, 3))
    m[..., 0, 1] = -twist
    m[..., 1, 0] = twist
    m[..., 0, 2] = -dim_
    m[..., 2, 0] = dim_
    m[..., 1, 2] = -dre
    m[..., 2, 1] = dre
    return m


def frames_from_anchor(p_anchor: np.ndarray, alphas: np.ndarray,
                       window: Window, anchor_site: int) -> np.ndarray:
    """All frames on the spin window from the anchor frame by the Q-recursion.

    Forward, P_{n+1} = P_n Q(a_n); backward, P_n = P_{n+1} Q(a_n)^T.  The
    spin window is one site longer than the amplitude window (len(alphas) + 1
    frames), matching the free-boundary pairing: the top spin's missing
    right neighbor is the zero-extension of the amplitudes.
    """
    qs = transport_rotation_block(alphas)
    i0 = window.index(anchor_site)
    n = len(window)
    if n != len(alphas) + 1:
        raise ParameterError("spin window must be one longer than amplitudes")
    frames = np.empty((n, 3, 3))
    frames[i0] = p_anchor
    for i in range(i0, n - 1):
        frames[i + 1] = frames[i] @ qs[i]
    for i in range(i0 - 1, -1, -1):
        frames[i] = frames[i + 1] @ qs[i].T
    return frames


def _frame_renormalize(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    b = y.shape[0]
    m = y.reshape(b, 3, 3)
    fixed = reorthonormalize_block(m)
    drift = np.max(np.abs(fixed - m).reshape(b, -1), axis=1)
    return fixed.reshape(b, -1), drift


def frame_evolution(a_traj: Trajectory, o: Rotation,
                    cfg: IntegratorConfig = IntegratorConfig(),
                    return_stats: bool = False):
    """Parallel frames along an amplitude trajectory.

    The anchor frame (site 0 when the window contains it, else the window
    head) solves dP/dt = P A(t) with A interpolated from the stored
    trajectory by cubic Hermite; the remaining frames follow by the
    Q-recursion at each stored time.  The initial anchor frame is o.
    """
    if not isinstance(a_traj.states[0], ALField):
        raise ParameterError("frame_evolution needs an amplitude trajectory")
    window = a_traj.window
    anchor = 0 if 0 in window else window.lo
    times = np.array(a_traj.times)
    values = np.array([s.values for s in a_traj.states])

    # Hermite knots: the stored states with their exact vector-field slopes.
    derivs = al_rhs(values, "free")
    dense = rk.HermiteDense(times, _pack_complex(values), _pack_complex(derivs))

    # Resolution guard: the stored grid must resolve the local frequency.
    sup_sq = np.max(np.abs(values) ** 2, axis=1)
    rate = 2.0 + 2.0 * (1.0 + np.maximum(sup_sq[:-1], sup_sq[1:]))
    if len(times) < 2 or np.any(np.diff(times) * rate > 0.8):
        raise ResolutionError(
            "amplitude trajectory too sparse for frame transport "
            "(max dt * local rate exceeds 0.8)")

    i_here = window.index(anchor)
    i_prev = i_here - 1 if anchor - 1 in window else None

    def rhs(t, y):
        z = _unpack_complex(dense(float(t[0])))
        a_here = z[i_here]
        a_prev = z[i_prev] if i_prev is not None else 0.0
        gen = frame_generator(a_here, a_prev)
        return (y.reshape(3, 3) @ gen).reshape(1, 9)

    y0 = np.array(o.m).reshape(1, 9)
    order = times if times[0] <= times[-1] else times[::-1]
    res = rk.integrate_batch(rhs, y0, order, cfg.rel_tol, cfg.abs_tol,
                             cfg.max_step, post_accept=_frame_renormalize)
    spin_window = Window(window.lo, window.hi + 1)
    frames_states = []
    for i, t in enumerate(order):
        p_anchor = reorthonormalize_block(res.samples[i, 0].reshape(3, 3))
        j = int(np.argmin(np.abs(times - t)))
        frames = frames_from_anchor(p_anchor, values[j], spin_window, anchor)
        frames_states.append(FrameSequence(spin_window, frames))
    traj = Trajectory(order, tuple(frames_states))
    if return_stats:
        return traj, IntegrationStats(res.n_accepted, res.n_rejected,
                                      res.max_post_drift)
    return traj


def spins_from_frame_traj(f_traj: Trajectory) -> Trajectory:
    """Third frame columns as spin fields, per stored time."""
    return Trajectory(f_traj.times,
                      tuple(fs.spins() for fs in f_traj.states))


# --------------------------------------------------------------------------
# Good-solution diagnostics
# --------------------------------------------------------------------------

def truncation_gap_curve(traj_small: Trajectory, traj_big: Trajectory,
                         c: float = 4.0) -> np.ndarray:
    """Weighted gap between two nested-truncation trajectories, per time.

    Both trajectories must be sampled on the same time grid; the smaller
    window is zero-extended.  The weight rate defaults to 4, the value used
    in the truncation-convergence bound.
    """
    from .core import weighted_sup_norm
    if len(traj_small) != len(traj_big) or \
            np.max(np.abs(np.asarray(traj_small.times)
                          - np.asarray(traj_big.times))) > 1e-12:
        raise ParameterError("trajectories must share one sample grid")
    return np.array([weighted_sup_norm(a, b, c) for a, b in
                     zip(traj_small.states, traj_big.states)])


def good_solution_diagnostics(traj: Trajectory, p: float = 2.0, q: float = 1.5,
                              c: float = 4.0) -> dict:
    """Finite-window values of the growth functionals defining good solutions.

    For amplitudes: the time integral of sum <n>^-q |a_n|^(2p) and the sup in
    time of sum exp(-c<n>) |a_n|^2.  For spins the integrands are built from
    1/(1 + S_n.S_{n+1}) per bond; both the raw values and the values centered
    by the aligned-chain baseline (all bonds parallel) are reported.
    """
    if not (p > q > 1.0):
        raise ParameterError("need p > q > 1")
    if not (c > 0.0):
        raise ParameterError("need c > 0")
    times = np.array(traj.times)
    first = traj.states[0]
    out = {"p": p, "q": q, "c": c}
    if isinstance(first, ALField):
        sites = first.window.sites()
        wq = japanese_bracket(sites) ** (-q)
        wc = np.exp(-c * japanese_bracket(sites))
        mods = np.array([np.abs(s.values) ** 2 for s in traj.states])
        growth = mods ** p @ wq
        sup = mods @ wc
        out.update(kind="al",
                   growth_integral=float(np.trapezoid(growth, times))
                   if len(times) > 1 else 0.0,
                   weighted_sup=float(np.max(sup)))
    elif isinstance(first, SpinField):
        bonds = first.window.sites()[:-1]
        wq = japanese_bracket(bonds) ** (-q)
        wc = np.exp(-c * japanese_bracket(bonds))
        inv = []
        for s in traj.states:
            dots = np.sum(s.values[:-1] * s.values[1:], axis=1)
            inv.append(1.0 / (1.0 + dots))
        inv = np.array(inv)
        growth_raw = inv ** p @ wq
        growth_centered = (inv ** p - 0.5 ** p) @ wq
        sup_raw = inv @ wc
        sup_centered = (inv - 0.5) @ wc
        dt_int = (lambda f: float(np.trapezoid(f, times))) if len(times) > 1 \
            else (lambda f: 0.0)
        out.update(kind="spin",
                   growth_integral_raw=dt_int(growth_raw),
                   growth_integral_centered=dt_int(growth_centered),
                   weighted_sup_raw=float(np.max(sup_raw)),
                   weighted_sup_centered=float(np.max(sup_centered)))
    else:
        raise ParameterError("diagnostics need an amplitude or spin trajectory")
    return out
