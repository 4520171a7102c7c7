"""Shared domain types for lattice fields on finite windows.

Every infinite-lattice object in this package is represented by a finite
inclusive window of sites plus the zero-extension convention (values vanish
outside the window).  The types here are immutable value types: their array
payloads are marked read-only at construction, so instances can be shared
freely between threads.  Random streams are counter-based (Philox) and keyed
by a (seed, stream_id) pair, which makes every draw reproducible and lets
ensemble code hand one independent stream to each member.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np


# --------------------------------------------------------------------------
# Errors
# --------------------------------------------------------------------------

class LatticeError(Exception):
    """Base class for all errors raised by this package."""


class WindowError(LatticeError, ValueError):
    """A window/range precondition was violated (restriction out of range,
    polynomial support touching a window edge, ...)."""


class ParameterError(LatticeError, ValueError):
    """A scalar parameter is outside its admissible range."""


class DomainError(LatticeError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class DegeneracyError(LatticeError):
    """Consecutive spins (anti)parallel where the transform needs them not to be."""

    def __init__(self, message: str, site: int | None = None):
        super().__init__(message)
        self.site = site


class ConsistencyError(LatticeError):
    """Mutually inconsistent inputs (anchor frame vs. spin, anchor pair vs. angle)."""


class ResolutionError(LatticeError):
    """A stored trajectory is too sparse to interpolate reliably."""


class IntegrationError(LatticeError, RuntimeError):
    """Adaptive integration failed (step-size underflow)."""

    def __init__(self, message: str, t: float | None = None, site: int | None = None):
        super().__init__(message)
        self.t = t
        self.site = site


class NumericalError(LatticeError, RuntimeError):
    """A numerical procedure (quadrature, ...) failed to converge."""


# --------------------------------------------------------------------------
# Windows and weights
# --------------------------------------------------------------------------

def japanese_bracket(n) -> np.ndarray:
    """<n> = sqrt(1 + n^2), the smooth weight used in all decay norms."""
    n = np.asarray(n, dtype=float)
    return np.sqrt(1.0 + n * n)


@dataclass(frozen=True)
class Window:
    """Inclusive integer interval [lo, hi] of lattice sites."""

    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise WindowError(f"empty window [{self.lo}, {self.hi}]")

    def __len__(self) -> int:
        return self.hi - self.lo + 1

    def __contains__(self, n: int) -> bool:
        return self.lo <= n <= self.hi

    def contains(self, other: "Window") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def sites(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    def index(self, n: int) -> int:
        if n not in self:
            raise WindowError(f"site {n} outside window [{self.lo}, {self.hi}]")
        return n - self.lo

    @staticmethod
    def symmetric(k: int) -> "Window":
        """The window {-k, ..., k} used by truncated Hamiltonians."""
        if k < 0:
            raise WindowError("symmetric window needs k >= 0")
        return Window(-k, k)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


# --------------------------------------------------------------------------
# Field types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ALField:
    """Complex amplitudes, one per site of the window."""

    window: Window
    values: np.ndarray  # complex128, shape (len(window),)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.shape != (len(self.window),):
            raise ParameterError(
                f"expected {len(self.window)} values, got shape {v.shape}")
        if not np.all(np.isfinite(v.view(np.float64))):
            raise ParameterError("field values must be finite")
        object.__setattr__(self, "values", _readonly(v))

    def value_at(self, n: int) -> complex:
        """Amplitude at site n, zero outside the window."""
        return complex(self.values[self.window.index(n)]) if n in self.window else 0.0


SPIN_UNIT_TOL = 1e-12


@dataclass(frozen=True)
class SpinField:
    """Unit 3-vectors, one per site of the window."""

    window: Window
    values: np.ndarray  # float64, shape (len(window), 3)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (len(self.window), 3):
            raise ParameterError(
                f"expected shape ({len(self.window)}, 3), got {v.shape}")
        norms = np.linalg.norm(v, axis=1)
        worst = float(np.max(np.abs(norms - 1.0))) if len(norms) else 0.0
        if worst > SPIN_UNIT_TOL:
            raise ParameterError(f"spin norms off the sphere by {worst:.3e}")
        object.__setattr__(self, "values", _readonly(v))


ROTATION_ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class Rotation:
    """A proper rotation of R^3 (element of SO(3))."""

    m: np.ndarray  # float64, shape (3, 3)

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        if m.shape != (3, 3):
            raise ParameterError(f"expected 3x3 matrix, got {m.shape}")
        defect = float(np.max(np.abs(m.T @ m - np.eye(3))))
        if defect > ROTATION_ORTHO_TOL:
            raise ParameterError(f"matrix not orthogonal (defect {defect:.3e})")
        if np.linalg.det(m) <= 0:
            raise ParameterError("matrix has non-positive determinant")
        object.__setattr__(self, "m", _readonly(m))

    @staticmethod
    def identity() -> "Rotation":
        return Rotation(np.eye(3))

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.m @ np.asarray(v, dtype=float)

    def compose(self, other: "Rotation") -> "Rotation":
        return Rotation(self.m @ other.m)


@dataclass(frozen=True)
class FrameSequence:
    """One orthonormal frame per site; the parallel frame of a spin field."""

    window: Window
    frames: np.ndarray  # float64, shape (len(window), 3, 3)

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=np.float64)
        if f.shape != (len(self.window), 3, 3):
            raise ParameterError(
                f"expected shape ({len(self.window)}, 3, 3), got {f.shape}")
        eye = np.eye(3)
        defect = float(np.max(np.abs(np.einsum("nij,nik->njk", f, f) - eye)))
        if defect > ROTATION_ORTHO_TOL:
            raise ParameterError(f"frames not orthogonal (defect {defect:.3e})")
        if np.any(np.linalg.det(f) <= 0):
            raise ParameterError("frames must have positive determinant")
        object.__setattr__(self, "frames", _readonly(f))

    def rotation_at(self, n: int) -> Rotation:
        return Rotation(self.frames[self.window.index(n)])

    def spins(self) -> SpinField:
        """Third columns of the frames, renormalized onto the sphere."""
        s = self.frames[:, :, 2].copy()
        s /= np.linalg.norm(s, axis=1)[:, None]
        return SpinField(self.window, s)


@dataclass(frozen=True)
class Beta:
    """Inverse temperature; strictly positive."""

    value: float

    def __post_init__(self):
        if not (self.value > 0 and math.isfinite(self.value)):
            raise ParameterError(f"beta must be positive and finite, got {self.value}")


State = Union[ALField, SpinField, FrameSequence]


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered sequence of states sharing one window."""

    times: np.ndarray
    states: tuple

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        states = tuple(self.states)
        if len(states) != t.shape[0]:
            raise ParameterError("times and states must have equal length")
        if t.shape[0] == 0:
            raise ParameterError("trajectory must contain at least one state")
        if np.any(np.diff(t) <= 0):
            raise ParameterError("times must be strictly increasing")
        w0 = states[0].window
        if any(s.window != w0 for s in states):
            raise ParameterError("all states must share one window")
        object.__setattr__(self, "times", _readonly(t))
        object.__setattr__(self, "states", states)

    @property
    def window(self) -> Window:
        return self.states[0].window

    def __len__(self) -> int:
        return len(self.states)

    def state_at(self, t: float, tol: float = 1e-9):
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > tol:
            raise ParameterError(f"no stored state at t={t}")
        return self.states[i]


# --------------------------------------------------------------------------
# Deterministic random streams
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream keyed by (seed, stream_id).

    Equal keys reproduce identical draw sequences; distinct stream_ids give
    independent streams (distinct Philox keys).  Each call to generator()
    starts a fresh generator at the beginning of the stream.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not (0 <= int(v) < 2 ** 64):
                raise ParameterError(f"{name} must be a 64-bit unsigned integer")

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


# --------------------------------------------------------------------------
# Operations
# --------------------------------------------------------------------------

def window_restrict(f: Union[ALField, SpinField], w: Window):
    """Copy of f on the subwindow w; raises WindowError if w is not contained."""
    if not f.window.contains(w):
        raise WindowError(
            f"window [{w.lo}, {w.hi}] not contained in [{f.window.lo}, {f.window.hi}]")
    i0 = w.lo - f.window.lo
    i1 = w.hi - f.window.lo + 1
    return type(f)(w, f.values[i0:i1])


def weighted_sup_norm(a: ALField, b: ALField, c: float) -> float:
    """sum_n exp(-c<n>) |a_n - b_n|^2 with zero extension off each window.

    This is the weighted gap functional used to compare nested truncations;
    a and b must have nested windows.
    """
    if not (c > 0):
        raise ParameterError(f"weight rate c must be positive, got {c}")
    if not (a.window.contains(b.window) or b.window.contains(a.window)):
        raise WindowError("windows must be nested (one contained in the other)")
    outer, inner = (a, b) if a.window.contains(b.window) else (b, a)
    diff = np.array(outer.values, dtype=np.complex128)
    i0 = inner.window.lo - outer.window.lo
    diff[i0:i0 + len(inner.window)] -= inner.values
    weights = np.exp(-c * japanese_bracket(outer.window.sites()))
    return float(np.sum(weights * np.abs(diff) ** 2))


# --------------------------------------------------------------------------
# Serialization: JSON-lines trajectory records and CSV diagnostics
# --------------------------------------------------------------------------

def state_to_record(state: State, t: float) -> dict:
    """One JSON-lines record: {"t", "kind", "lo", "values"}."""
    if isinstance(state, ALField):
        kind = "al"
        values = [[float(z.real), float(z.imag)] for z in state.values]
    elif isinstance(state, SpinField):
        kind = "spin"
        values = [[float(x) for x in row] for row in state.values]
    elif isinstance(state, FrameSequence):
        kind = "frame"
        values = [[float(x) for x in m.reshape(9)] for m in state.frames]
    else:
        raise ParameterError(f"cannot serialize {type(state).__name__}")
    return {"t": float(t), "kind": kind, "lo": int(state.window.lo), "values": values}


def record_to_state(rec: dict) -> tuple[float, State]:
    kind = rec["kind"]
    lo = int(rec["lo"])
    values = rec["values"]
    w = Window(lo, lo + len(values) - 1)
    if kind == "al":
        state: State = ALField(w, np.array([complex(re, im) for re, im in values]))
    elif kind == "spin":
        state = SpinField(w, np.array(values, dtype=float))
    elif kind == "frame":
        state = FrameSequence(w, np.array(values, dtype=float).reshape(-1, 3, 3))
    else:
        raise ParameterError(f"unknown record kind {kind!r}")
    return float(rec["t"]), state


def write_jsonl(path, items: Iterable[tuple[float, State]]) -> None:
    """Write (t, state) pairs as JSON lines.  Floats use shortest round-trip
    representation, so deserialization is bit-exact."""
    with open(path, "w") as fh:
        for t, state in items:
            fh.write(json.dumps(state_to_record(state, t)) + "\n")


def read_jsonl(path) -> list[tuple[float, State]]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(record_to_state(json.loads(line)))
    return out


def write_trajectory(path, traj: Trajectory) -> None:
    write_jsonl(path, zip(traj.times, traj.states))


def read_trajectory(path) -> Trajectory:
    pairs = read_jsonl(path)
    return Trajectory(np.array([t for t, _ in pairs]), tuple(s for _, s in pairs))


def write_scalar_csv(path, rows: Iterable[tuple[float, str, float]]) -> None:
    """CSV diagnostics: columns t, name, value."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "name", "value"])
        for t, name, value in rows:
            writer.writerow([repr(float(t)), name, repr(float(value))])


def read_scalar_csv(path) -> list[tuple[float, str, float]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["t", "name", "value"]:
            raise ParameterError(f"unexpected CSV header {header}")
        return [(float(t), name, float(v)) for t, name, v in reader]
