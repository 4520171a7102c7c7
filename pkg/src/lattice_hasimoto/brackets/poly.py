"""Sparse multivariate polynomials over exact rationals.

The generators are the real and imaginary parts of the amplitudes on a
declared window: x_n = Re a_n, y_n = Im a_n.  A monomial is a fixed-width
exponent tuple over all generators of the ring; coefficients are Fractions
and zero coefficients are never stored, so equality of dictionaries is
polynomial identity.  Everything here is exact; floats only appear in the
optional evaluation helpers used by numeric spot checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ..core import WindowError, Window

Generator = tuple[str, int]          # ("x"|"y", site)


@dataclass(frozen=True)
class PolyRing:
    """Polynomial ring in the generators {x_n, y_n : n in window}."""

    window: Window

    @property
    def n_vars(self) -> int:
        return 2 * len(self.window)

    def var_index(self, gen: Generator) -> int:
        kind, site = gen
        if kind not in ("x", "y"):
            raise WindowError(f"unknown generator kind {kind!r}")
        if site not in self.window:
            raise WindowError(
                f"generator {kind}_{site} outside ring window "
                f"[{self.window.lo}, {self.window.hi}]")
        return 2 * (site - self.window.lo) + (0 if kind == "x" else 1)

    def generator_of(self, index: int) -> Generator:
        site = self.window.lo + index // 2
        return ("x" if index % 2 == 0 else "y", site)

    def zero(self) -> "BracketPoly":
        return BracketPoly(self, {})

    def const(self, c) -> "BracketPoly":
        c = Fraction(c)
        if c == 0:
            return self.zero()
        return BracketPoly(self, {(0,) * self.n_vars: c})

    def var(self, gen: Generator) -> "BracketPoly":
        exp = [0] * self.n_vars
        exp[self.var_index(gen)] = 1
        return BracketPoly(self, {tuple(exp): Fraction(1)})

    def var_or_zero(self, gen: Generator, edge: str) -> "BracketPoly":
        """Generator polynomial; sites off the window are the zero polynomial
        when edge == 'zero' (free-boundary convention) and an error otherwise."""
        if gen[1] not in self.window:
            if edge == "zero":
                return self.zero()
            raise WindowError(
                f"bracket needs generator {gen[0]}_{gen[1]} outside the window")
        return self.var(gen)

    def one_plus_mod_sq(self, site: int) -> "BracketPoly":
        """1 + x_n^2 + y_n^2, the ubiquitous metric factor."""
        x, y = self.var(("x", site)), self.var(("y", site))
        return self.const(1) + x * x + y * y


class BracketPoly:
    """Exact sparse polynomial; immutable by convention."""

    __slots__ = ("ring", "terms")

    def __init__(self, ring: PolyRing, terms: dict):
        self.ring = ring
        self.terms = {m: c for m, c in terms.items() if c != 0}

    # -- algebra ------------------------------------------------------------

    def __add__(self, other) -> "BracketPoly":
        other = self._coerce(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            s = out.get(m, Fraction(0)) + c
            if s == 0:
                out.pop(m, None)
            else:
                out[m] = s
        return BracketPoly(self.ring, out)

    def __sub__(self, other) -> "BracketPoly":
        return self + (-self._coerce(other))

    def __neg__(self) -> "BracketPoly":
        return BracketPoly(self.ring, {m: -c for m, c in self.terms.items()})

    def __mul__(self, other) -> "BracketPoly":
        if isinstance(other, (int, Fraction)):
            if other == 0:
                return self.ring.zero()
            return BracketPoly(self.ring,
                               {m: c * other for m, c in self.terms.items()})
        other = self._coerce(other)
        out: dict = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                m = tuple(a + b for a, b in zip(ma, mb))
                s = out.get(m, Fraction(0)) + ca * cb
                if s == 0:
                    out.pop(m, None)
                else:
                    out[m] = s
        return BracketPoly(self.ring, out)

    __rmul__ = __mul__

    def _coerce(self, other) -> "BracketPoly":
        if isinstance(other, BracketPoly):
            if other.ring is not self.ring and other.ring != self.ring:
                raise WindowError("polynomials from different rings")
            return other
        return self.ring.const(other)

    # -- structure ----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = self.ring.const(other)
        return isinstance(other, BracketPoly) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def diff(self, gen: Generator) -> "BracketPoly":
        i = self.ring.var_index(gen)
        out: dict = {}
        for m, c in self.terms.items():
            e = m[i]
            if e == 0:
                continue
            dm = list(m)
            dm[i] = e - 1
            out[tuple(dm)] = out.get(tuple(dm), Fraction(0)) + c * e
        return BracketPoly(self.ring, out)

    def variables(self) -> list[Generator]:
        """Generators appearing with nonzero exponent."""
        seen = set()
        for m in self.terms:
            for i, e in enumerate(m):
                if e:
                    seen.add(i)
        return sorted((self.ring.generator_of(i) for i in seen),
                      key=lambda g: (g[1], g[0]))

    def support_sites(self) -> set[int]:
        return {site for _, site in self.variables()}

    def total_degree(self) -> int:
        return max((sum(m) for m in self.terms), default=0)

    # -- evaluation ----------------------------------------------------------

    def evaluate(self, point: dict) -> Fraction:
        """Exact evaluation; point maps Generator -> Fraction (missing = 0)."""
        total = Fraction(0)
        vals = [Fraction(point.get(self.ring.generator_of(i), 0))
                for i in range(self.ring.n_vars)]
        for m, c in self.terms.items():
            term = c
            for i, e in enumerate(m):
                if e:
                    term *= vals[i] ** e
            total += term
        return total

    def evaluate_float(self, point: dict) -> float:
        total = 0.0
        vals = [float(point.get(self.ring.generator_of(i), 0.0))
                for i in range(self.ring.n_vars)]
        for m, c in self.terms.items():
            term = float(c)
            for i, e in enumerate(m):
                if e:
                    term *= vals[i] ** e
            total += term
        return total

    def canonical(self) -> str:
        """Deterministic text form, used for hashing the encoded tables."""
        if not self.terms:
            return "0"
        bits = []
        for m in sorted(self.terms):
            c = self.terms[m]
            mono = "*".join(
                f"{kind}{site}^{m[self.ring.var_index((kind, site))]}"
                for kind, site in self.variables()
                if m[self.ring.var_index((kind, site))])
            bits.append(f"{c}[{mono}]")
        return "+".join(bits)

    def __repr__(self):
        return f"BracketPoly({self.canonical()})"


@dataclass(frozen=True)
class ComplexPoly:
    """Pair (re, im) representing re + i*im with exact rational parts."""

    re: BracketPoly
    im: BracketPoly

    @staticmethod
    def from_real(p: BracketPoly) -> "ComplexPoly":
        return ComplexPoly(p, p.ring.zero())

    def __add__(self, other: "ComplexPoly") -> "ComplexPoly":
        return ComplexPoly(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "ComplexPoly") -> "ComplexPoly":
        return ComplexPoly(self.re - other.re, self.im - other.im)

    def __neg__(self) -> "ComplexPoly":
        return ComplexPoly(-self.re, -self.im)

    def times_i(self) -> "ComplexPoly":
        return ComplexPoly(-self.im, self.re)

    def scale(self, c) -> "ComplexPoly":
        return ComplexPoly(self.re * Fraction(c), self.im * Fraction(c))

    def mul_real(self, p: BracketPoly) -> "ComplexPoly":
        return ComplexPoly(self.re * p, self.im * p)

    def is_zero(self) -> bool:
        return self.re.is_zero() and self.im.is_zero()

    def __eq__(self, other) -> bool:
        return (isinstance(other, ComplexPoly)
                and self.re == other.re and self.im == other.im)


def alpha_poly(ring: PolyRing, site: int, edge: str = "error") -> ComplexPoly:
    """a_n = x_n + i y_n as a complex polynomial."""
    return ComplexPoly(ring.var_or_zero(("x", site), edge),
                       ring.var_or_zero(("y", site), edge))
