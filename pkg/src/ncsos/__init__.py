"""Exact sums-of-squares certification for group algebras and free *-algebras.

Subpackages / modules:

- ``rcf``        -- truncated infinitesimal scalars, polynomial functionals,
                    square-root-free PSD testing
- ``cones``      -- finitely generated rational cones and lexicographic
                    separating functionals
- ``groupalg``   -- exact group-algebra / free *-algebra arithmetic
- ``soscone``    -- Gram-matrix feasibility, exact certificate rounding,
                    absorption and Laplacian-domination bounds, Kazhdan
                    constants for finite groups
- ``repwitness`` -- GNS spaces, unitary dilations and replayable refutation
                    witnesses
- ``cli``        -- command line front end (``python -m ncsos``)
"""

__version__ = "0.1.0"
