"""Desk-scale constructions from discrepancy theory, flat polynomials, the nibble and Littlewood-Offord theory."""

__version__ = "0.1.0"
