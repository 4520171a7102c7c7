"""Both formulations of the lattice Hasimoto transform.

The angle formulation works in (theta, gamma): theta_n is the angle between
consecutive spins (the bond "curvature"), gamma_n the signed dihedral angle
between the planes of consecutive bonds (the site "torsion").  The complex
amplitude is a_n = tan(theta_n / 2) * exp(-i * Gamma(n)) with Gamma the
running sum of the torsions.  It breaks down whenever consecutive spins are
parallel or antiparallel.

The frame formulation transports an orthonormal frame down the chain,
P_{n+1} = P_n Q(a_n), with the spin as the third column: S_n = P_n e3.  It
only fails on exactly antiparallel neighbors and is the form used for gauge
randomization.  The two agree modulo a global U(1) phase; the gauge-invariant
products conj(a_n) a_{n-1} coincide.

Phase anchoring: on a finite window Gamma(n) sums the torsions from the
window head, a global phase choice.  A ThetaGamma built from spins carries 0
in its head slot (the torsion there needs a site off the window); a directly
constructed ThetaGamma may put any anchor value there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (ALField, ConsistencyError, DegeneracyError, FrameSequence,
                   ParameterError, Rotation, SpinField, Window)

# Degeneracy thresholds: sin^2(theta) floor for the angle transform,
# 1 + S_n.S_{n+1} floor for the frame transform (which tolerates parallel).
EPS_PARALLEL = 1e-12
EPS_ANTIPARALLEL = 1e-12

# Frames are re-orthonormalized after this many consecutive multiplications.
REORTH_INTERVAL = 64

E3 = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class ThetaGamma:
    """Bond angles theta in (0, pi) and site torsions gamma in (-pi, pi].

    window indexes theta; gamma shares the indexing, with the head entry a
    pure gauge slot (see module docstring).
    """

    window: Window
    theta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        ga = np.asarray(self.gamma, dtype=float)
        n = len(self.window)
        if th.shape != (n,) or ga.shape != (n,):
            raise ParameterError(f"expected {n} angles, got {th.shape}/{ga.shape}")
        if np.any(th <= 0.0) or np.any(th >= np.pi):
            raise ParameterError("theta must lie strictly inside (0, pi)")
        if np.any(ga <= -np.pi) or np.any(ga > np.pi):
            raise ParameterError("gamma must lie in (-pi, pi]")
        object.__setattr__(self, "theta", th.copy())
        object.__setattr__(self, "gamma", ga.copy())

    def phase_sums(self) -> np.ndarray:
        """Gamma(n): running torsion sums anchored at the window head."""
        return np.cumsum(self.gamma)


# --------------------------------------------------------------------------
# Angle formulation
# --------------------------------------------------------------------------

def theta_gamma_from_spins(s: SpinField) -> ThetaGamma:
    """Bond angles and torsions of a spin field.

    cos(theta_n) = S_n.S_{n+1};
    sin(theta_{n-1}) sin(theta_n) exp(i gamma_n)
        = (S_{n-1} x S_n).(S_n x S_{n+1}) + i S_{n-1}.(S_n x S_{n+1}).
    """
    v = s.values
    if len(s.window) < 2:
        raise ParameterError("need at least two spins")
    dots = np.sum(v[:-1] * v[1:], axis=1)
    sin_sq = 1.0 - dots ** 2
    bad = np.nonzero(sin_sq <= EPS_PARALLEL)[0]
    if bad.size:
        site = int(s.window.lo + bad[0])
        raise DegeneracyError(
            f"consecutive spins (anti)parallel at site {site}", site=site)
    theta = np.arccos(np.clip(dots, -1.0, 1.0))

    cross = np.cross(v[:-1], v[1:])            # cross[i] = S_i x S_{i+1}
    re = np.sum(cross[:-1] * cross[1:], axis=1)
    im = np.sum(v[:-2] * cross[1:], axis=1)
    gamma = np.arctan2(im, re)
    gamma[gamma == -np.pi] = np.pi
    return ThetaGamma(Window(s.window.lo, s.window.hi - 1),
                      theta, np.concatenate([[0.0], gamma]))


def alpha_from_theta_gamma(tg: ThetaGamma) -> ALField:
    """a_n = tan(theta_n / 2) exp(-i Gamma(n)), Gamma anchored at the head."""
    big_gamma = tg.phase_sums()
    values = np.tan(tg.theta / 2.0) * np.exp(-1j * big_gamma)
    return ALField(tg.window, values)


def reconstruct_spins(s0, s1, tg: ThetaGamma, anchor: str = "head") -> SpinField:
    """Rebuild the spin field from two adjacent spins and the angle data.

    With anchor="head", (s0, s1) are the spins at sites (lo, lo+1) of the
    reconstructed field and the recursion runs forward; with anchor="tail"
    they sit at (hi, hi+1) and the recursion runs backward.  The spin window
    is one site longer than the angle window.
    """
    s0 = np.asarray(s0, dtype=float)
    s1 = np.asarray(s1, dtype=float)
    for v in (s0, s1):
        if abs(np.linalg.norm(v) - 1.0) > 1e-10:
            raise ConsistencyError("anchor spins must be unit vectors")
    th, ga = tg.theta, tg.gamma
    n = len(tg.window)
    out = np.empty((n + 1, 3))

    if anchor == "head":
        _check_anchor_angle(s0, s1, th[0])
        out[0], out[1] = s0, s1
        for i in range(1, n):
            # S_{n+1} = cos(th_n) S_n
            #   + sin(th_n)/sin(th_{n-1}) [ sin(ga_n) S_{n-1} x S_n
            #                             + cos(ga_n) (S_{n-1} x S_n) x S_n ]
            c = np.cross(out[i - 1], out[i])
            nxt = (np.cos(th[i]) * out[i]
                   + np.sin(th[i]) / np.sin(th[i - 1])
                   * (np.sin(ga[i]) * c + np.cos(ga[i]) * np.cross(c, out[i])))
            out[i + 1] = nxt / np.linalg.norm(nxt)
    elif anchor == "tail":
        _check_anchor_angle(s0, s1, th[-1])
        out[n - 1], out[n] = s0, s1
        for i in range(n - 1, 0, -1):
            # S_{n-1} = cos(th_{n-1}) S_n
            #   + sin(th_{n-1})/sin(th_n) [ sin(ga_n) S_n x S_{n+1}
            #                             - cos(ga_n) (S_n x S_{n+1}) x S_n ]
            c = np.cross(out[i], out[i + 1])
            prv = (np.cos(th[i - 1]) * out[i]
                   + np.sin(th[i - 1]) / np.sin(th[i])
                   * (np.sin(ga[i]) * c - np.cos(ga[i]) * np.cross(c, out[i])))
            out[i - 1] = prv / np.linalg.norm(prv)
    else:
        raise ParameterError(f"anchor must be 'head' or 'tail', got {anchor!r}")
    return SpinField(Window(tg.window.lo, tg.window.hi + 1), out)


def _check_anchor_angle(s0, s1, theta):
    angle = np.arccos(np.clip(float(np.dot(s0, s1)), -1.0, 1.0))
    if abs(angle - theta) > 1e-8:
        raise ConsistencyError(
            f"anchor pair angle {angle:.12f} does not match theta {theta:.12f}")


# --------------------------------------------------------------------------
# Frame formulation
# --------------------------------------------------------------------------

def transport_rotation_block(z: np.ndarray) -> np.ndarray:
    """The frame-update rotations Q(z) for an array of complex z.

    Columns 1, 2 are the transported normal pair, column 3 is the inverse
    stereographic image of z: Q(z) e3 = (2 Re z, -2 Im z, 1 - |z|^2)/(1+|z|^2).
    """
    z = np.asarray(z, dtype=np.complex128)
    x, y = z.real, z.imag
    zz = x * x + y * y
    den = 1.0 + zz
    re2 = x * x - y * y            # Re(z^2)
    im2 = 2.0 * x * y              # Im(z^2)
    m = np.empty(z.shape + (3, 3))
    m[..., 0, 0] = 1.0 - re2
    m[..., 0, 1] = im2
    m[..., 0, 2] = 2.0 * x
    m[..., 1, 0] = im2
    m[..., 1, 1] = 1.0 + re2
    m[..., 1, 2] = -2.0 * y
    m[..., 2, 0] = -2.0 * x
    m[..., 2, 1] = 2.0 * y
    m[..., 2, 2] = 1.0 - zz
    m /= den[..., None, None]
    return m


def rotation_from_alpha(z: complex) -> Rotation:
    """Q(z), the frame-update rotation of a single amplitude."""
    return Rotation(transport_rotation_block(np.asarray(z))[()])


def rotation_generator_from_alpha(z: complex) -> np.ndarray:
    """The antisymmetric logarithm q(z) with Q(z) = exp(q(z)).

    Rotation by angle 2 arctan|z| about the axis (Im z, Re z, 0)/|z|.
    """
    z = complex(z)
    r = abs(z)
    # 2 arctan(r)/r, with the r -> 0 limit handled by series
    c = 2.0 * (np.arctan(r) / r if r > 1e-8 else 1.0 - r * r / 3.0)
    a, b = c * z.real, c * z.imag
    return np.array([[0.0, 0.0, a],
                     [0.0, 0.0, -b],
                     [-a, b, 0.0]])


def reorthonormalize(m: np.ndarray) -> np.ndarray:
    """Nearest-by-Gram-Schmidt rotation: MGS on the first two columns, third
    column from the cross product (keeps det = +1)."""
    q1 = m[:, 0] / np.linalg.norm(m[:, 0])
    q2 = m[:, 1] - np.dot(q1, m[:, 1]) * q1
    q2 /= np.linalg.norm(q2)
    return np.stack([q1, q2, np.cross(q1, q2)], axis=1)


def reorthonormalize_block(m: np.ndarray) -> np.ndarray:
    """Vectorized reorthonormalize for an (..., 3, 3) stack."""
    q1 = m[..., 0]
    q1 = q1 / np.linalg.norm(q1, axis=-1, keepdims=True)
    q2 = m[..., 1] - np.sum(q1 * m[..., 1], axis=-1, keepdims=True) * q1
    q2 = q2 / np.linalg.norm(q2, axis=-1, keepdims=True)
    return np.stack([q1, q2, np.cross(q1, q2)], axis=-1)


def alphas_from_spins_frame(s: SpinField, p0: Rotation) -> tuple[ALField, FrameSequence]:
    """Amplitudes and parallel frames of a spin field, given the head frame.

    Solves P_n^T S_{n+1} = Q(a_n) e3 for a_n by inverting the stereographic
    formula, a_n = (v1 - i v2)/(1 + v3), then updates P_{n+1} = P_n Q(a_n).
    """
    v = s.values
    if len(s.window) < 2:
        raise ParameterError("need at least two spins")
    if float(np.max(np.abs(p0.apply(E3) - v[0]))) > 1e-8:
        raise ConsistencyError("p0 e3 does not match the first spin")
    n_alpha = len(s.window) - 1
    alphas = np.empty(n_alpha, dtype=np.complex128)
    frames = np.empty((n_alpha + 1, 3, 3))
    p = np.array(p0.m)
    frames[0] = p
    for i in range(n_alpha):
        w = p.T @ v[i + 1]
        den = 1.0 + w[2]
        if den <= EPS_ANTIPARALLEL:
            site = s.window.lo + i
            raise DegeneracyError(
                f"antiparallel neighbors at sites {site}, {site + 1}", site=site)
        alphas[i] = (w[0] - 1j * w[1]) / den
        p = p @ transport_rotation_block(alphas[i])
        if (i + 1) % REORTH_INTERVAL == 0:
            p = reorthonormalize(p)
        frames[i + 1] = p
    return (ALField(Window(s.window.lo, s.window.hi - 1), alphas),
            FrameSequence(s.window, frames))


def spins_from_alphas(a: ALField, o: Rotation) -> tuple[SpinField, FrameSequence]:
    """Spins and frames generated from amplitudes and a head gauge frame.

    P_lo = o, P_{n+1} = P_n Q(a_n), S_n = P_n e3.  The spin window is one
    site longer than the amplitude window.
    """
    qs = transport_rotation_block(a.values)
    n = len(a.window)
    frames = np.empty((n + 1, 3, 3))
    p = np.array(o.m)
    frames[0] = p
    for i in range(n):
        p = p @ qs[i]
        if (i + 1) % REORTH_INTERVAL == 0:
            p = reorthonormalize(p)
        frames[i + 1] = p
    spins = frames[:, :, 2].copy()
    spins /= np.linalg.norm(spins, axis=1)[:, None]
    w = Window(a.window.lo, a.window.hi + 1)
    return SpinField(w, spins), FrameSequence(w, frames)


def gauge_invariant_products(a: ALField) -> np.ndarray:
    """conj(a_n) a_{n-1} for interior n; independent of the phase anchoring."""
    v = a.values
    return np.conj(v[1:]) * v[:-1]


def rotation_with_third_column(s) -> Rotation:
    """Deterministic rotation whose third column is the unit vector s.

    The first two columns come from the stable Householder completion; any
    other choice differs by a gauge rotation about s.
    """
    s = np.asarray(s, dtype=float)
    if abs(np.linalg.norm(s) - 1.0) > 1e-10:
        raise ParameterError("s must be a unit vector")
    sign = 1.0 if s[2] > 0.0 else -1.0
    v = s.copy()
    v[2] += sign
    vv = float(np.dot(v, v))
    e1 = -2.0 * v[0] * v / vv
    e1[0] += 1.0
    return Rotation(np.stack([e1, np.cross(s, e1), s], axis=1))
