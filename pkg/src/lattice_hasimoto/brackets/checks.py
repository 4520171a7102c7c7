"""Machine verification of the bracket algebra.

Exact side: the bracket of two polynomials extends the generator tables by
bilinearity and Leibniz, {f, g} = sum over generator pairs of
df/dg_i * dg/dg_j * {g_i, g_j}.  Jacobi and the mixed-structure cyclic sum
are expanded to literal zero polynomials; the Hamiltonian flow identity is
checked case by case against the closed five-case table (each case is
polynomial even though the Hamiltonian itself is a log) and then summed to
the flow's right-hand side with the free-boundary zero-extension convention.

Numeric side: a finite-difference evaluator for the spin-level bracket
{F, G} = sum_n grad_n F . (S_n x grad_n G), used to verify every row of the
angle-variable tables and of the amplitude table on random configurations.
The cross-product structure annihilates radial gradient components, so the
ambient finite-difference extension is legitimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from ..core import Beta, RngStream, Window, WindowError
from ..sampling import sample_gibbs_chain_block
from .poly import BracketPoly, ComplexPoly, Generator, PolyRing, alpha_poly
from .tables import (TABLE_ALPHA, TABLE_STANDARD, BracketTable, al_flow_case,
                     al_flow_rhs, _one_plus_sq)


# --------------------------------------------------------------------------
# Exact brackets
# --------------------------------------------------------------------------

def _check_margin(ring: PolyRing, polys: Iterable[BracketPoly], margin: int):
    for p in polys:
        for site in p.support_sites():
            if site - margin < ring.window.lo or site + margin > ring.window.hi:
                raise WindowError(
                    f"support site {site} leaves less than {margin} sites of "
                    f"margin to the ring window "
                    f"[{ring.window.lo}, {ring.window.hi}]")


def bracket(f: BracketPoly, g: BracketPoly, table: BracketTable,
            edge: str = "error") -> BracketPoly:
    """{f, g} extended from the generator table by bilinearity and Leibniz."""
    ring = f.ring
    if edge == "error":
        _check_margin(ring, (f, g), 1)
    out = ring.zero()
    gvars = g.variables()
    g_partials = [(gj, g.diff(gj)) for gj in gvars]
    for gi in f.variables():
        dfi = f.diff(gi)
        for gj, dgj in g_partials:
            t = table(ring, gi, gj, edge=edge)
            if t.is_zero():
                continue
            out = out + dfi * dgj * t
    return out


def jacobi_residual(f: BracketPoly, g: BracketPoly, h: BracketPoly,
                    table: BracketTable, edge: str = "error") -> BracketPoly:
    """{f,{g,h}} + {g,{h,f}} + {h,{f,g}}, exactly."""
    if edge == "error":
        _check_margin(f.ring, (f, g, h), 2)
    return (bracket(f, bracket(g, h, table, edge), table, edge)
            + bracket(g, bracket(h, f, table, edge), table, edge)
            + bracket(h, bracket(f, g, table, edge), table, edge))


def compatibility_residual(f: BracketPoly, g: BracketPoly, h: BracketPoly,
                           edge: str = "error") -> BracketPoly:
    """Mixed cyclic sum of the two structures; zero iff they are compatible."""
    if edge == "error":
        _check_margin(f.ring, (f, g, h), 2)
    out = f.ring.zero()
    for a, b, c in ((f, g, h), (g, h, f), (h, f, g)):
        out = out + bracket(a, bracket(b, c, TABLE_STANDARD, edge),
                            TABLE_ALPHA, edge)
        out = out + bracket(a, bracket(b, c, TABLE_ALPHA, edge),
                            TABLE_STANDARD, edge)
    return out


def generators_in(ring: PolyRing, lo: int, hi: int) -> list[Generator]:
    return [(kind, site) for site in range(lo, hi + 1) for kind in ("x", "y")]


# --------------------------------------------------------------------------
# Hamiltonian flow identities
# --------------------------------------------------------------------------

def _bracket_complex_left(z: ComplexPoly, g: BracketPoly, table: BracketTable,
                          edge: str) -> ComplexPoly:
    return ComplexPoly(bracket(z.re, g, table, edge),
                       bracket(z.im, g, table, edge))


@dataclass
class HamiltonReport:
    window: Window
    cases_checked: int = 0
    sums_checked: int = 0
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def hamilton_check(window: Window) -> HamiltonReport:
    """The mass-like Hamiltonian induces the lattice flow, exactly.

    For every site pair (n interior, k in window) the identity
        2i {a_n, x_k^2 + y_k^2} = (1 + x_k^2 + y_k^2) * C(n, k)
    is expanded, with C(n, k) the closed five-case table; this is the
    polynomial content of i {a_n, 2 log(1+|a_k|^2)} = C(n, k).  Summing
    C(n, k) over the window then reproduces the flow's right-hand side
    exactly under zero extension (the telescoping hop terms cancel against a
    vanishing boundary term).
    """
    if len(window) < 5:
        raise WindowError("hamilton check needs a window of length >= 5")
    ring = PolyRing(window)
    report = HamiltonReport(window)
    edge = "zero"
    for n in range(window.lo + 1, window.hi):
        a_n = alpha_poly(ring, n, edge)
        total = ComplexPoly(ring.zero(), ring.zero())
        for k in window.sites():
            k = int(k)
            m_k = (ring.var(("x", k)) * ring.var(("x", k))
                   + ring.var(("y", k)) * ring.var(("y", k)))
            lhs = _bracket_complex_left(a_n, m_k, TABLE_ALPHA, edge)
            lhs = lhs.times_i().scale(2)
            case = al_flow_case(ring, n, k, edge)
            rhs = case.mul_real(ring.const(1) + m_k)
            report.cases_checked += 1
            if not lhs == rhs:
                report.failures.append(("case", n, k))
            total = total + case
        report.sums_checked += 1
        if not total == al_flow_rhs(ring, n, edge):
            report.failures.append(("sum", n))
    return report


def hamilton_check_standard(window: Window) -> HamiltonReport:
    """The standard structure with its own Hamiltonian generates the same
    flow, boundary rows included; pins the table's normalization constant.

    Checks {a_n, x_k^2+y_k^2}_0 = -2i a_n (1+|a_n|^2) delta_nk (the log part)
    and assembles i {a_n, H}_0 with the hopping part to the free-boundary
    right-hand side at every site of the window.
    """
    if len(window) < 3:
        raise WindowError("standard hamilton check needs length >= 3")
    ring = PolyRing(window)
    report = HamiltonReport(window)
    edge = "zero"
    sites = [int(s) for s in window.sites()]
    for n in sites:
        a_n = alpha_poly(ring, n, edge)
        # log part: sum_k {a_n, log(1+m_k)}_0 = -2i a_n
        for k in sites:
            m_k = (ring.var(("x", k)) * ring.var(("x", k))
                   + ring.var(("y", k)) * ring.var(("y", k)))
            lhs = _bracket_complex_left(a_n, m_k, TABLE_STANDARD, edge)
            expect = (a_n.times_i().scale(-2).mul_real(
                _one_plus_sq(ring, n, edge)) if k == n
                else ComplexPoly(ring.zero(), ring.zero()))
            report.cases_checked += 1
            if not lhs == expect:
                report.failures.append(("log-case", n, k))
        # hopping part, bonds (j, j+1) inside the window
        hop = ring.zero()
        for j in sites[:-1]:
            hop = hop + (ring.var(("x", j)) * ring.var(("x", j + 1))
                         + ring.var(("y", j)) * ring.var(("y", j + 1)))
        flow = (_bracket_complex_left(a_n, hop, TABLE_STANDARD, edge).scale(-1)
                + a_n.times_i().scale(-2))
        lhs_flow = flow.times_i()
        report.sums_checked += 1
        if not lhs_flow == al_flow_rhs(ring, n, edge):
            report.failures.append(("flow", n))
    return report


# --------------------------------------------------------------------------
# Numeric spin-level bracket
# --------------------------------------------------------------------------

_FD_STEPS = (1e-5, 1e-6)


def _fd_gradient(fn: Callable[[np.ndarray], float], spins: np.ndarray,
                 sites: Sequence[int]) -> dict:
    """Richardson-extrapolated central differences of fn at the given sites.

    Gradients are taken in the ambient coordinates; no renormalization is
    applied to the perturbed spins (the bracket kills radial components).
    """
    h1, h2 = _FD_STEPS
    grads = {}
    for n in sites:
        g = np.empty(3)
        for c in range(3):
            vals = []
            for h in (h1, h2):
                sp = spins.copy()
                sp[n, c] += h
                fp = fn(sp)
                sp[n, c] -= 2 * h
                fm = fn(sp)
                vals.append((fp - fm) / (2 * h))
            d1, d2 = vals
            g[c] = (h1 * h1 * d2 - h2 * h2 * d1) / (h1 * h1 - h2 * h2)
        grads[n] = g
    return grads


def spin_bracket_numeric(F: Callable[[np.ndarray], float],
                         G: Callable[[np.ndarray], float],
                         spins: np.ndarray,
                         support_f: Optional[Sequence[int]] = None,
                         support_g: Optional[Sequence[int]] = None) -> float:
    """{F, G}(S) = sum_n grad_n F . (S_n x grad_n G) by finite differences.

    F and G take a raw (n_sites, 3) array.  Optional supports restrict the
    differentiation to the sites each function actually depends on.
    """
    spins = np.asarray(spins, dtype=float)
    n_sites = spins.shape[0]
    sf = list(range(n_sites)) if support_f is None else list(support_f)
    sg = list(range(n_sites)) if support_g is None else list(support_g)
    common = sorted(set(sf) & set(sg))
    if not common:
        return 0.0
    gf = _fd_gradient(F, spins, common)
    gg = _fd_gradient(G, spins, common)
    return float(sum(np.dot(gf[n], np.cross(spins[n], gg[n])) for n in common))


def jacobi_residual_numeric(f: Generator, g: Generator, h: Generator,
                            table: BracketTable, ring: PolyRing,
                            point: dict, step: float = 1e-5) -> float:
    """Independent spot check of Jacobi at a point, without expansion.

    The inner bracket is evaluated as a *function* near the point and
    differentiated by central finite differences, so this path never builds
    the nested polynomial.
    """
    idx = {gen: ring.var_index(gen) for gen in
           [(k, s) for s in range(ring.window.lo, ring.window.hi + 1)
            for k in ("x", "y")]}
    base = np.zeros(ring.n_vars)
    for gen, val in point.items():
        base[idx[gen]] = float(val)

    def pair_fn(a: Generator, b: Generator) -> Callable[[np.ndarray], float]:
        poly = table(ring, a, b, edge="zero")
        def fn(vec: np.ndarray) -> float:
            pt = {ring.generator_of(i): vec[i] for i in range(ring.n_vars)}
            return poly.evaluate_float(pt)
        return fn

    def bracket_gen_fn(a: Generator, fn_b: Callable, support_b: list) -> Callable:
        """x -> {a, B}(x) where B is a function with known support indices."""
        def fn(vec: np.ndarray) -> float:
            total = 0.0
            ia = idx[a]
            for jb in support_b:
                gb = ring.generator_of(jb)
                vp = vec.copy(); vp[jb] += step
                vm = vec.copy(); vm[jb] -= step
                dB = (fn_b(vp) - fn_b(vm)) / (2 * step)
                total += dB * pair_fn(a, gb)(vec)
            return total
        return fn

    all_idx = list(range(ring.n_vars))

    def nested(a: Generator, b: Generator, c: Generator) -> float:
        # {b, c} is the table entry itself; the outer bracket differentiates
        # it by finite differences rather than symbolically.
        outer = bracket_gen_fn(a, pair_fn(b, c), all_idx)
        return outer(base)

    return (nested(f, g, h) + nested(g, h, f) + nested(h, f, g))


# --------------------------------------------------------------------------
# Spin-level functions of the transform, for table verification
# --------------------------------------------------------------------------

def theta_fn(i: int) -> Callable[[np.ndarray], float]:
    def fn(s: np.ndarray) -> float:
        return float(np.arccos(np.dot(s[i], s[i + 1])))
    return fn


def gamma_fn(i: int) -> Callable[[np.ndarray], float]:
    def fn(s: np.ndarray) -> float:
        c1 = np.cross(s[i - 1], s[i])
        c2 = np.cross(s[i], s[i + 1])
        return float(np.arctan2(np.dot(s[i - 1], c2), np.dot(c1, c2)))
    return fn


def _big_gamma_value(s: np.ndarray, i: int) -> float:
    """Gamma(i): torsions summed from the first defined slot (raw index 1)."""
    c = np.cross(s[:i + 1], s[1:i + 2])          # bond crosses 0..i
    re = np.sum(c[:-1] * c[1:], axis=1)
    im = np.sum(s[:i] * c[1:], axis=1)
    return float(np.sum(np.arctan2(im, re)))


def big_gamma_fn(i: int) -> Callable[[np.ndarray], float]:
    return lambda s: _big_gamma_value(s, i)


def alpha_re_fn(i: int) -> Callable[[np.ndarray], float]:
    def fn(s: np.ndarray) -> float:
        th = float(np.arccos(np.dot(s[i], s[i + 1])))
        return math.tan(th / 2.0) * math.cos(_big_gamma_value(s, i))
    return fn


def alpha_im_fn(i: int) -> Callable[[np.ndarray], float]:
    def fn(s: np.ndarray) -> float:
        th = float(np.arccos(np.dot(s[i], s[i + 1])))
        return -math.tan(th / 2.0) * math.sin(_big_gamma_value(s, i))
    return fn


def _alpha_complex(s: np.ndarray, i: int) -> complex:
    th = float(np.arccos(np.dot(s[i], s[i + 1])))
    return math.tan(th / 2.0) * np.exp(-1j * _big_gamma_value(s, i))


@dataclass
class TableRowResult:
    name: str
    max_discrepancy: float
    n_samples: int


@dataclass
class TableVerificationReport:
    beta: float
    rows: list
    n_resampled: int

    def max_discrepancy(self) -> float:
        return max(r.max_discrepancy for r in self.rows)

    def passed(self, tol: float = 1e-6) -> bool:
        return self.max_discrepancy() <= tol


def _sample_configs(beta: Beta, rng, n_samples: int, n_sites: int,
                    min_sin: float = 0.1) -> tuple[np.ndarray, int]:
    """Gibbs-sampled spin configurations with all bond angles bounded away
    from 0 and pi (finite differences need the cosec factors tame)."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    configs = np.empty((n_samples, n_sites, 3))
    resampled = 0
    filled = 0
    while filled < n_samples:
        batch = sample_gibbs_chain_block(beta, Window(0, n_sites - 1), gen,
                                         n_samples)
        dots = np.sum(batch[:, :-1] * batch[:, 1:], axis=2)
        ok = np.all(1.0 - dots ** 2 > min_sin ** 2, axis=1)
        resampled += int(np.sum(~ok))
        good = batch[ok]
        take = min(len(good), n_samples - filled)
        configs[filled:filled + take] = good[:take]
        filled += take
    return configs, resampled


def verify_bracket_tables(n_samples: int, rng,
                          beta: Beta = Beta(1.0)) -> TableVerificationReport:
    """Every stated row of both angle-variable tables, the anchored phase-sum
    brackets, and every case of the amplitude table, against the numeric
    spin-level bracket at random configurations.
    """
    if n_samples < 1:
        raise ValueError("need n_samples >= 1")
    n_sites = 13
    c = n_sites // 2          # center index; all references stay interior
    configs, resampled = _sample_configs(beta, rng, n_samples, n_sites)

    cot = lambda x: math.cos(x) / math.sin(x)
    csc = lambda x: 1.0 / math.sin(x)

    def th(s, i): return theta_fn(i)(s)
    def ga(s, i): return gamma_fn(i)(s)

    # Each row: (name, F spec, G spec, closed form rhs(s)).
    # Function specs are (callable factory, index, support sites).
    def f_theta(i): return (theta_fn(i), [i, i + 1])
    def f_gamma(i): return (gamma_fn(i), [i - 1, i, i + 1])
    def f_biggamma(i): return (big_gamma_fn(i), list(range(0, i + 2)))
    def f_re(i): return (alpha_re_fn(i), list(range(0, i + 2)))
    def f_im(i): return (alpha_im_fn(i), list(range(0, i + 2)))

    n = c
    rows = [
        ("{gamma_(n-1), theta_n}", f_gamma(n - 1), f_theta(n),
         lambda s: -csc(th(s, n - 1)) * math.cos(ga(s, n))),
        ("{theta_(n-1), theta_n}", f_theta(n - 1), f_theta(n),
         lambda s: math.sin(ga(s, n))),
        ("{gamma_n, theta_n}", f_gamma(n), f_theta(n),
         lambda s: cot(th(s, n) / 2) + cot(th(s, n - 1)) * math.cos(ga(s, n))),
        ("{theta_n, theta_n}", f_theta(n), f_theta(n), lambda s: 0.0),
        ("{gamma_(n+1), theta_n}", f_gamma(n + 1), f_theta(n),
         lambda s: -cot(th(s, n) / 2) - cot(th(s, n + 1)) * math.cos(ga(s, n + 1))),
        ("{theta_(n+1), theta_n}", f_theta(n + 1), f_theta(n),
         lambda s: -math.sin(ga(s, n + 1))),
        ("{gamma_(n+2), theta_n}", f_gamma(n + 2), f_theta(n),
         lambda s: csc(th(s, n + 1)) * math.cos(ga(s, n + 1))),
        ("{theta_(n+2), theta_n}", f_theta(n + 2), f_theta(n), lambda s: 0.0),
        ("{gamma_(n-2), gamma_n}", f_gamma(n - 2), f_gamma(n),
         lambda s: -math.sin(ga(s, n - 1)) * csc(th(s, n - 2)) * csc(th(s, n - 1))),
        ("{gamma_(n-1), gamma_n}", f_gamma(n - 1), f_gamma(n),
         lambda s: (cot(th(s, n - 2)) * math.sin(ga(s, n - 1))
                    + cot(th(s, n)) * math.sin(ga(s, n))) * csc(th(s, n - 1))),
        ("{gamma_n, gamma_n}", f_gamma(n), f_gamma(n), lambda s: 0.0),
        ("{gamma_(n+1), gamma_n}", f_gamma(n + 1), f_gamma(n),
         lambda s: -(cot(th(s, n - 1)) * math.sin(ga(s, n))
                     + cot(th(s, n + 1)) * math.sin(ga(s, n + 1))) * csc(th(s, n))),
        ("{gamma_(n+2), gamma_n}", f_gamma(n + 2), f_gamma(n),
         lambda s: math.sin(ga(s, n + 1)) * csc(th(s, n)) * csc(th(s, n + 1))),
        ("{gamma_(n+3), gamma_n}", f_gamma(n + 3), f_gamma(n), lambda s: 0.0),
    ]

    # Anchored phase-sum brackets {Gamma(n), theta_k}, all five cases (k = c).
    k = c
    rows += [
        ("{Gamma(k+2), theta_k}", f_biggamma(k + 2), f_theta(k),
         lambda s: (-math.tan(th(s, k - 1) / 2) * math.cos(ga(s, k))
                    + math.tan(th(s, k + 1) / 2) * math.cos(ga(s, k + 1)))),
        ("{Gamma(k+1), theta_k}", f_biggamma(k + 1), f_theta(k),
         lambda s: (-math.tan(th(s, k - 1) / 2) * math.cos(ga(s, k))
                    - cot(th(s, k + 1)) * math.cos(ga(s, k + 1)))),
        ("{Gamma(k), theta_k}", f_biggamma(k), f_theta(k),
         lambda s: (-math.tan(th(s, k - 1) / 2) * math.cos(ga(s, k))
                    + cot(th(s, k) / 2))),
        ("{Gamma(k-1), theta_k}", f_biggamma(k - 1), f_theta(k),
         lambda s: -csc(th(s, k - 1)) * math.cos(ga(s, k))),
        ("{Gamma(k-2), theta_k}", f_biggamma(k - 2), f_theta(k), lambda s: 0.0),
        ("{Gamma(m+1), Gamma(m)}", f_biggamma(c + 1), f_biggamma(c),
         lambda s: (math.tan(th(s, c - 1) / 2) * math.sin(ga(s, c))
                    - cot(th(s, c + 1)) * math.sin(ga(s, c + 1))) * csc(th(s, c))),
        ("{Gamma(m+2), Gamma(m)}", f_biggamma(c + 2), f_biggamma(c),
         lambda s: (math.tan(th(s, c - 1) / 2) * math.sin(ga(s, c))
                    + math.tan(th(s, c + 1) / 2) * math.sin(ga(s, c + 1)))
                   * csc(th(s, c))),
    ]

    # Amplitude table, all five {Re a_n, Im a_m} cases plus the cross tables.
    m = c

    def a(s, i):
        return _alpha_complex(s, i)

    def opsq(s, i):
        return 1.0 + abs(a(s, i)) ** 2

    rows += [
        ("{Re a_(m+2), Im a_m}", f_re(m + 2), f_im(m),
         lambda s: -opsq(s, m) / 2 * a(s, m + 2).imag
                   * (a(s, m - 1) - a(s, m + 1)).imag),
        ("{Re a_(m+1), Im a_m}", f_re(m + 1), f_im(m),
         lambda s: -opsq(s, m) / 2 * (a(s, m + 1).imag
                   * (a(s, m - 1) - a(s, m + 1)).imag + opsq(s, m + 1) / 2)),
        ("{Re a_m, Im a_m}", f_re(m), f_im(m),
         lambda s: opsq(s, m) / 2
                   - opsq(s, m) / 2 * (a(s, m) * np.conj(a(s, m - 1))).real),
        ("{Re a_(m-1), Im a_m}", f_re(m - 1), f_im(m),
         lambda s: -opsq(s, m - 1) / 2 * (a(s, m).real
                   * (a(s, m - 2) - a(s, m)).real + opsq(s, m) / 2)),
        ("{Re a_(m-2), Im a_m}", f_re(m - 2), f_im(m),
         lambda s: -opsq(s, m - 2) / 2 * a(s, m).real
                   * (a(s, m - 3) - a(s, m - 1)).real),
        ("{Re a_(m+1), Re a_m}", f_re(m + 1), f_re(m),
         lambda s: -opsq(s, m) / 2 * a(s, m + 1).imag
                   * (a(s, m - 1) - a(s, m + 1)).real),
        ("{Re a_(m+2), Re a_m}", f_re(m + 2), f_re(m),
         lambda s: -opsq(s, m) / 2 * a(s, m + 2).imag
                   * (a(s, m - 1) - a(s, m + 1)).real),
        ("{Im a_(m+1), Im a_m}", f_im(m + 1), f_im(m),
         lambda s: opsq(s, m) / 2 * a(s, m + 1).real
                   * (a(s, m - 1) - a(s, m + 1)).imag),
        ("{Im a_(m+2), Im a_m}", f_im(m + 2), f_im(m),
         lambda s: opsq(s, m) / 2 * a(s, m + 2).real
                   * (a(s, m - 1) - a(s, m + 1)).imag),
    ]

    results = []
    for name, (F, sup_f), (G, sup_g), closed in rows:
        worst = 0.0
        for s in configs:
            lhs = spin_bracket_numeric(F, G, s, sup_f, sup_g)
            worst = max(worst, abs(lhs - float(np.real(closed(s)))))
        results.append(TableRowResult(name, worst, n_samples))
    return TableVerificationReport(beta.value, results, resampled)
