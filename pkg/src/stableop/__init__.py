"""Numerical verification suite for stable-like nonlocal operators.

Modules:
    measure   spherical measures, operator specs, nondegeneracy
    modulus   moduli of continuity, Dini integrals, the upgrade pipeline
    zeta      zeta profiles, touching functions, profile checks
    operator  pointwise operator evaluation by graded quadrature
    geometry  domains, regularized distance, barriers
    solver    Dirichlet collocation solver and boundary diagnostics
    cli       configuration-driven check orchestration
"""

__version__ = "1.0.0"
