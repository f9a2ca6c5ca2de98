"""Polynomial-filter perturbation theory: Chebyshev polynomials, Pauli
Hamiltonians, dense verification and resource estimates."""

__version__ = "0.1.0"
