"""Exact bracket algebra and the numeric spin-level verification."""

import itertools
from fractions import Fraction

import numpy as np
import pytest

from lattice_hasimoto.core import Beta, RngStream, Window, WindowError
from lattice_hasimoto.brackets import (TABLE_ALPHA, TABLE_STANDARD, PolyRing,
                                       al_flow_case, al_flow_rhs, alpha_poly,
                                       bracket, bracket_table_hash,
                                       compatibility_residual, generators_in,
                                       hamilton_check, hamilton_check_standard,
                                       jacobi_residual, jacobi_residual_numeric,
                                       spin_bracket_numeric,
                                       verify_bracket_tables)


@pytest.fixture(scope="module")
def ring():
    return PolyRing(Window(-5, 5))


# --------------------------------------------------------------------------
# Polynomial arithmetic
# --------------------------------------------------------------------------

def test_poly_exact_arithmetic(ring):
    x = ring.var(("x", 0))
    y = ring.var(("y", 0))
    p = (x + y) * (x - y)
    assert p == x * x - y * y
    assert (p - p).is_zero()
    third = ring.const(Fraction(1, 3))
    assert (third * 3) == ring.const(1)
    assert p.diff(("x", 0)) == 2 * x
    assert p.diff(("y", 1)).is_zero()


def test_poly_evaluation_exact(ring):
    x, y = ring.var(("x", 1)), ring.var(("y", -1))
    p = x * x * y + ring.const(Fraction(5, 7))
    point = {("x", 1): Fraction(2, 3), ("y", -1): Fraction(-1, 2)}
    assert p.evaluate(point) == Fraction(2, 3) ** 2 * Fraction(-1, 2) + Fraction(5, 7)


def test_poly_out_of_window_generator(ring):
    with pytest.raises(WindowError):
        ring.var(("x", 99))


# --------------------------------------------------------------------------
# Generator tables
# --------------------------------------------------------------------------

def test_bracket_of_generator_with_itself_vanishes(ring):
    x0 = ring.var(("x", 0))
    for table in (TABLE_ALPHA, TABLE_STANDARD):
        assert bracket(x0, x0, table).is_zero()


def test_standard_table_value(ring):
    # {x_n, y_n}_0 = 1 + x_n^2 + y_n^2, all other generator pairs zero
    x0, y0 = ring.var(("x", 0)), ring.var(("y", 0))
    expect = ring.one_plus_mod_sq(0)
    assert bracket(x0, y0, TABLE_STANDARD) == expect
    assert bracket(y0, x0, TABLE_STANDARD) == -expect
    assert bracket(x0, ring.var(("y", 1)), TABLE_STANDARD).is_zero()
    assert bracket(x0, ring.var(("x", 0)), TABLE_STANDARD).is_zero()


def test_alpha_table_diagonal_case(ring):
    # {x_n, y_n} = (1+|a_n|^2)/2 - (1+|a_n|^2)/2 * (x_n x_{n-1} + y_n y_{n-1})
    x0, y0 = ring.var(("x", 0)), ring.var(("y", 0))
    half = Fraction(1, 2)
    op = ring.one_plus_mod_sq(0)
    back = ring.var(("x", 0)) * ring.var(("x", -1)) \
        + ring.var(("y", 0)) * ring.var(("y", -1))
    expect = half * op - half * op * back
    assert bracket(x0, y0, TABLE_ALPHA) == expect


def test_alpha_table_antisymmetry_all_pairs(ring):
    gens = generators_in(ring, -3, 3)
    polys = {g: ring.var(g) for g in gens}
    for g1, g2 in itertools.product(gens, repeat=2):
        s = bracket(polys[g1], polys[g2], TABLE_ALPHA) \
            + bracket(polys[g2], polys[g1], TABLE_ALPHA)
        assert s.is_zero(), (g1, g2)


def test_bracket_bilinearity_and_leibniz(ring):
    rng = np.random.default_rng(0)
    gens = generators_in(ring, -2, 2)

    def random_poly():
        p = ring.zero()
        for _ in range(4):
            term = ring.const(Fraction(int(rng.integers(-4, 5)), int(rng.integers(1, 5))))
            for _ in range(int(rng.integers(0, 3))):
                term = term * ring.var(gens[int(rng.integers(0, len(gens)))])
            p = p + term
        return p

    for table in (TABLE_ALPHA, TABLE_STANDARD):
        for _ in range(5):
            f, g, h = random_poly(), random_poly(), random_poly()
            lhs = bracket(f * g, h, table)
            rhs = f * bracket(g, h, table) + bracket(f, h, table) * g
            assert (lhs - rhs).is_zero()
            lin = bracket(f + g, h, table)
            assert (lin - bracket(f, h, table) - bracket(g, h, table)).is_zero()


def test_bracket_margin_errors(ring):
    edge = ring.var(("x", 5))
    with pytest.raises(WindowError):
        bracket(edge, ring.var(("y", 5)), TABLE_ALPHA)
    with pytest.raises(WindowError):
        jacobi_residual(ring.var(("x", 4)), ring.var(("y", 0)),
                        ring.var(("x", 1)), TABLE_ALPHA)


# --------------------------------------------------------------------------
# Jacobi and compatibility
# --------------------------------------------------------------------------

def test_jacobi_repeated_argument_trivial(ring):
    f, g = ring.var(("x", 0)), ring.var(("y", 1))
    assert jacobi_residual(f, g, g, TABLE_ALPHA).is_zero()


def test_jacobi_standard_specific_triple(ring):
    f, g, h = ring.var(("x", 0)), ring.var(("y", 0)), ring.var(("x", 1))
    assert jacobi_residual(f, g, h, TABLE_STANDARD).is_zero()


def test_jacobi_alpha_all_triples_reach_two(ring):
    gens = generators_in(ring, -2, 2)
    polys = {g: ring.var(g) for g in gens}
    for f, g, h in itertools.combinations(gens, 3):
        assert jacobi_residual(polys[f], polys[g], polys[h], TABLE_ALPHA).is_zero(), \
            (f, g, h)


def test_compatibility_degenerate_triples(ring):
    x0, y0 = ring.var(("x", 0)), ring.var(("y", 0))
    assert compatibility_residual(x0, x0, y0).is_zero()
    assert compatibility_residual(x0, y0, x0).is_zero()


def test_compatibility_all_triples_reach_two(ring):
    gens = generators_in(ring, -2, 2)
    polys = {g: ring.var(g) for g in gens}
    for f, g, h in itertools.combinations(gens, 3):
        assert compatibility_residual(polys[f], polys[g], polys[h]).is_zero(), \
            (f, g, h)


def test_jacobi_numeric_spot_oracle(ring):
    # independent finite-difference path at random rational points
    rng = np.random.default_rng(1)
    gens = generators_in(ring, -2, 2)
    point = {g: Fraction(int(rng.integers(-3, 4)), 4) for g in gens}
    for f, g, h in (((("x", 0)), ("y", 1), ("x", -1)),
                    ((("y", 0)), ("y", 2), ("x", 1))):
        val = jacobi_residual_numeric(f, g, h, TABLE_ALPHA, ring, point)
        assert abs(val) <= 1e-4


# --------------------------------------------------------------------------
# Hamiltonian flow identities
# --------------------------------------------------------------------------

def test_hamilton_case_adjacent_below():
    # i {a_n, 2 log(1+|a_k|^2)} = -(1+|a_n|^2) a_k for n = k - 1
    ring = PolyRing(Window(-3, 3))
    case = al_flow_case(ring, 0, 1, edge="zero")
    a1 = alpha_poly(ring, 1, "zero")
    expect = -a1.mul_real(ring.one_plus_mod_sq(0))
    assert case == expect


def test_hamilton_case_far_below_zero():
    ring = PolyRing(Window(-3, 3))
    assert al_flow_case(ring, 0, 2, edge="zero").is_zero()
    assert al_flow_case(ring, -3, 3, edge="zero").is_zero()


def test_hamilton_check_full_window():
    rep = hamilton_check(Window(-3, 3))
    assert rep.passed
    assert rep.cases_checked == 5 * 7      # interior n times all k
    assert rep.sums_checked == 5


def test_hamilton_check_rejects_small_window():
    with pytest.raises(WindowError):
        hamilton_check(Window(0, 3))


def test_hamilton_standard_pins_normalization():
    rep = hamilton_check_standard(Window(-2, 2))
    assert rep.passed


def test_flow_rhs_free_boundary_matches_zero_extension():
    ring = PolyRing(Window(0, 4))
    rhs_edge = al_flow_rhs(ring, 0, edge="zero")
    # at the window edge the left neighbor term disappears exactly
    a1 = alpha_poly(ring, 1, "zero")
    a0 = alpha_poly(ring, 0, "zero")
    expect = -a1.mul_real(ring.one_plus_mod_sq(0)) + a0.scale(2)
    assert rhs_edge == expect


# --------------------------------------------------------------------------
# Numeric spin-level bracket
# --------------------------------------------------------------------------

def _random_units(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1)[:, None]


def test_spin_bracket_linear_functions():
    rng = np.random.default_rng(2)
    spins = _random_units(rng, 5)
    a, b = rng.standard_normal((2, 3))
    f = lambda s: float(np.dot(a, s[2]))
    g = lambda s: float(np.dot(b, s[2]))
    val = spin_bracket_numeric(f, g, spins, [2], [2])
    assert val == pytest.approx(float(np.dot(a, np.cross(spins[2], b))), abs=1e-8)


def test_spin_bracket_different_sites_vanish():
    rng = np.random.default_rng(3)
    spins = _random_units(rng, 5)
    a, b = rng.standard_normal((2, 3))
    f = lambda s: float(np.dot(a, s[1]))
    g = lambda s: float(np.dot(b, s[3]))
    assert spin_bracket_numeric(f, g, spins, [1], [3]) == 0.0


def test_spin_bracket_cos_theta_row():
    # {cos th_m, cos th_n} at random non-degenerate configurations matches
    # the closed form with the triple products
    rng = np.random.default_rng(4)
    for _ in range(5):
        spins = _random_units(rng, 6)
        dots = np.sum(spins[:-1] * spins[1:], axis=1)
        if np.any(1 - dots ** 2 < 0.01):
            continue
        f = lambda s: float(np.dot(s[2], s[3]))
        g = lambda s: float(np.dot(s[1], s[2]))
        lhs = spin_bracket_numeric(f, g, spins, [2, 3], [1, 2])
        rhs = float(np.dot(spins[3], np.cross(spins[2], spins[1])))
        assert lhs == pytest.approx(rhs, abs=1e-7)


def test_verify_bracket_tables_smoke():
    rep = verify_bracket_tables(10, RngStream(777, 0), Beta(1.0))
    assert rep.passed(1e-6)
    names = {r.name for r in rep.rows}
    assert "{theta_(n-1), theta_n}" in names
    assert "{gamma_(n+2), gamma_n}" in names
    assert "{Re a_m, Im a_m}" in names
    assert all(r.n_samples == 10 for r in rep.rows)


def test_table_hash_stable():
    h1 = bracket_table_hash()
    h2 = bracket_table_hash()
    assert h1 == h2 and len(h1) == 12
