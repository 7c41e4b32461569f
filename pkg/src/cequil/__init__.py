"""cequil: learning approximate correlated equilibria in convex games.

A coordinator that does not know the players' cost functions proposes
finite-support joint-action distributions and queries the players'
correlated regrets; Bayesian optimization over the weight simplex drives
the average regret down, and a difference-of-convex heuristic picks the
supporting joint actions.  The bundled application is multi-player traffic
assignment with BPR link costs on standard network files.
"""

from cequil.polytope import (
    Polyhedron,
    LpSolution,
    FwResult,
    solve_lp,
    frank_wolfe_min,
    project_simplex,
    contains,
)

__version__ = "0.1.0"

__all__ = [
    "Polyhedron",
    "LpSolution",
    "FwResult",
    "solve_lp",
    "frank_wolfe_min",
    "project_simplex",
    "contains",
    "__version__",
]
