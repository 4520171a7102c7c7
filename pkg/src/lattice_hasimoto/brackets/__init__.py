"""Exact and numeric verification of the two Poisson structures."""

from .poly import BracketPoly, ComplexPoly, PolyRing, alpha_poly
from .tables import (TABLE_ALPHA, TABLE_STANDARD, BracketTable, al_flow_case,
                     al_flow_rhs, bracket_table_hash)
from .checks import (HamiltonReport, TableVerificationReport, bracket,
                     compatibility_residual, generators_in, hamilton_check,
                     hamilton_check_standard, jacobi_residual,
                     jacobi_residual_numeric, spin_bracket_numeric,
                     verify_bracket_tables)

__all__ = [
    "BracketPoly", "ComplexPoly", "PolyRing", "alpha_poly",
    "BracketTable", "TABLE_ALPHA", "TABLE_STANDARD",
    "al_flow_case", "al_flow_rhs", "bracket_table_hash",
    "bracket", "jacobi_residual", "compatibility_residual",
    "hamilton_check", "hamilton_check_standard", "HamiltonReport",
    "spin_bracket_numeric", "verify_bracket_tables",
    "TableVerificationReport", "jacobi_residual_numeric", "generators_in",
]
