"""Generator bracket tables for the two Poisson structures on the amplitudes.

The amplitude-side structure inherited from the spin chain has infinite
range: {x_n, y_m} is nonzero for every pair of sites, with the metric factor
(1 + |a|^2)/2 and neighbor differences entering.  The standard structure is
zero-range: {x_n, y_n}_0 = 1 + |a_n|^2 and nothing else.  Both tables return
exact polynomials; all remaining generator pairs follow by anti-symmetry.

With edge == "zero", generators referenced off the ring window are the zero
polynomial (the free-boundary convention); with edge == "error" such a
reference raises, which is the contract of the public bracket operation.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from ..core import Window, WindowError
from .poly import BracketPoly, ComplexPoly, Generator, PolyRing, alpha_poly

HALF = Fraction(1, 2)


def _one_plus_sq(ring: PolyRing, site: int, edge: str) -> BracketPoly:
    x = ring.var_or_zero(("x", site), edge)
    y = ring.var_or_zero(("y", site), edge)
    return ring.const(1) + x * x + y * y


def _alpha_xy(ring: PolyRing, n: int, m: int, edge: str) -> BracketPoly:
    """{x_n, y_m} for the amplitude-side structure, by case on n - m."""
    xv = lambda k: ring.var_or_zero(("x", k), edge)
    yv = lambda k: ring.var_or_zero(("y", k), edge)
    if n >= m + 2:
        return -HALF * _one_plus_sq(ring, m, edge) * yv(n) * (yv(m - 1) - yv(m + 1))
    if n == m + 1:
        return -HALF * _one_plus_sq(ring, m, edge) * (
            yv(n) * (yv(m - 1) - yv(m + 1)) + HALF * _one_plus_sq(ring, n, edge))
    if n == m:
        opn = _one_plus_sq(ring, n, edge)
        return HALF * opn * (ring.const(1) - (xv(n) * xv(n - 1) + yv(n) * yv(n - 1)))
    if n == m - 1:
        return -HALF * _one_plus_sq(ring, n, edge) * (
            xv(m) * (xv(n - 1) - xv(n + 1)) + HALF * _one_plus_sq(ring, m, edge))
    # n <= m - 2
    return -HALF * _one_plus_sq(ring, n, edge) * xv(m) * (xv(n - 1) - xv(n + 1))


def _alpha_xx(ring: PolyRing, n: int, m: int, edge: str) -> BracketPoly:
    if n == m:
        return ring.zero()
    if n < m:
        return -_alpha_xx(ring, m, n, edge)
    yv = lambda k: ring.var_or_zero(("y", k), edge)
    xv = lambda k: ring.var_or_zero(("x", k), edge)
    return -HALF * _one_plus_sq(ring, m, edge) * yv(n) * (xv(m - 1) - xv(m + 1))


def _alpha_yy(ring: PolyRing, n: int, m: int, edge: str) -> BracketPoly:
    if n == m:
        return ring.zero()
    if n < m:
        return -_alpha_yy(ring, m, n, edge)
    xv = lambda k: ring.var_or_zero(("x", k), edge)
    yv = lambda k: ring.var_or_zero(("y", k), edge)
    return HALF * _one_plus_sq(ring, m, edge) * xv(n) * (yv(m - 1) - yv(m + 1))


def _alpha_pair(ring: PolyRing, g1: Generator, g2: Generator,
                edge: str) -> BracketPoly:
    (k1, n), (k2, m) = g1, g2
    if k1 == "x" and k2 == "y":
        return _alpha_xy(ring, n, m, edge)
    if k1 == "y" and k2 == "x":
        return -_alpha_xy(ring, m, n, edge)
    if k1 == "x":
        return _alpha_xx(ring, n, m, edge)
    return _alpha_yy(ring, n, m, edge)


def _standard_pair(ring: PolyRing, g1: Generator, g2: Generator,
                   edge: str) -> BracketPoly:
    (k1, n), (k2, m) = g1, g2
    if n != m or k1 == k2:
        return ring.zero()
    p = _one_plus_sq(ring, n, edge)
    return p if k1 == "x" else -p


@dataclass(frozen=True)
class BracketTable:
    """kind 'alpha' (spin-inherited) or 'standard' (zero-range)."""

    kind: str
    pair: Callable[[PolyRing, Generator, Generator, str], BracketPoly]

    def __call__(self, ring: PolyRing, g1: Generator, g2: Generator,
                 edge: str = "error") -> BracketPoly:
        for g in (g1, g2):
            if g[1] not in ring.window:
                raise WindowError(f"generator {g} outside the ring window")
        return self.pair(ring, g1, g2, edge)


TABLE_ALPHA = BracketTable("alpha", _alpha_pair)
TABLE_STANDARD = BracketTable("standard", _standard_pair)


# --------------------------------------------------------------------------
# Flow case table: i {a_n, 2 log(1 + |a_k|^2)} for the amplitude structure
# --------------------------------------------------------------------------

def al_flow_case(ring: PolyRing, n: int, k: int, edge: str = "zero") -> ComplexPoly:
    """Closed form of i {a_n, 2 log(1+|a_k|^2)}, by case on n - k."""
    if n <= k - 2:
        return ComplexPoly(ring.zero(), ring.zero())
    xv = lambda j: ring.var_or_zero(("x", j), edge)
    yv = lambda j: ring.var_or_zero(("y", j), edge)
    a_n = alpha_poly(ring, n, edge)
    a_k = alpha_poly(ring, k, edge)
    if n == k - 1:
        return -a_k.mul_real(_one_plus_sq(ring, n, edge))
    # Re[conj(a_k)(a_{k-1} - a_{k+1})]
    hop = (xv(k) * (xv(k - 1) - xv(k + 1)) + yv(k) * (yv(k - 1) - yv(k + 1)))
    if n == k:
        back = xv(k) * xv(k - 1) + yv(k) * yv(k - 1)
        return a_n.mul_real(ring.const(2) - 2 * back)
    if n == k + 1:
        return (-a_n.mul_real(2 * hop)
                - a_k.mul_real(_one_plus_sq(ring, n, edge)))
    # n >= k + 2
    return -a_n.mul_real(2 * hop)


def al_flow_rhs(ring: PolyRing, n: int, edge: str = "zero") -> ComplexPoly:
    """-(1+|a_n|^2)(a_{n+1} + a_{n-1}) + 2 a_n, free boundary by zero extension."""
    nb = alpha_poly(ring, n + 1, edge) + alpha_poly(ring, n - 1, edge)
    return -nb.mul_real(_one_plus_sq(ring, n, edge)) + alpha_poly(ring, n, edge).scale(2)


# --------------------------------------------------------------------------
# Table fingerprint
# --------------------------------------------------------------------------

def bracket_table_hash(reach: int = 3) -> str:
    """Hash of the canonical forms of all encoded generator brackets.

    Covers every case split (|n - m| up to `reach`) for both structures; the
    CLI embeds it so reports are traceable to the encoded tables.
    """
    ring = PolyRing(Window(-reach - 2, reach + 2))
    pieces = []
    for n in range(-1, 2):
        for m in range(-reach, reach + 1):
            for k1 in ("x", "y"):
                for k2 in ("x", "y"):
                    for table in (TABLE_ALPHA, TABLE_STANDARD):
                        p = table(ring, (k1, n), (k2, m), edge="zero")
                        pieces.append(
                            f"{table.kind}:{k1}{n}:{k2}{m}={p.canonical()}")
    digest = hashlib.sha256("|".join(pieces).encode()).hexdigest()
    return digest[:12]
