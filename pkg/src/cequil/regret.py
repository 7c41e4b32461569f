"""Correlated regret of finite-support joint-action distributions.

A distribution here is a weight vector ``w`` on the probability simplex
over ``N`` basis joint actions.  Player ``i``'s correlated regret is the
expected cost of following the sampled recommendation minus the best
expected cost achievable by a single constant deviation:

    regret_i(w) = sum_k w_k f_i(xhat_i^k, xhat_-i^k)
                  - min_{y in X_i} sum_k w_k f_i(y, xhat_-i^k)

The minimization is a convex program solved by Frank-Wolfe; its gap is
reported so callers can bound the exact value (the solver under-minimizes
the benchmark, making the reported regret an upper bound tight to the
gap).  Regrets are signed: a mixture can beat every constant deviation,
so negative values are meaningful and are never clamped.  A distribution
is an (approximate) correlated equilibrium exactly when every player's
regret is non-positive, which is what :func:`verify_ce` checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from cequil.polytope import contains, frank_wolfe_min

__all__ = [
    "BasisSet",
    "RegretReport",
    "CeVerdict",
    "RegretOracle",
    "validate_weights",
    "expected_cost",
    "best_response_value",
    "correlated_regret",
    "regret_report",
    "verify_ce",
]


@dataclass(frozen=True)
class BasisSet:
    """N joint actions, each a list of per-player action vectors."""

    actions: List[List[np.ndarray]]

    def __post_init__(self):
        if len(self.actions) < 1:
            raise ValueError("a basis needs at least one joint action")
        m = len(self.actions[0])
        dims = [np.asarray(x).size for x in self.actions[0]]
        clean = []
        for joint in self.actions:
            if len(joint) != m:
                raise ValueError("inconsistent player count across joint actions")
            row = []
            for i, x in enumerate(joint):
                x = np.asarray(x, dtype=float)
                if x.size != dims[i]:
                    raise ValueError(f"inconsistent dimension for player {i}")
                row.append(x)
            clean.append(row)
        object.__setattr__(self, "actions", clean)

    @property
    def size(self) -> int:
        return len(self.actions)

    @property
    def num_players(self) -> int:
        return len(self.actions[0])

    def joint(self, k: int) -> np.ndarray:
        return np.concatenate(self.actions[k])

    def validate_feasible(self, game, tol: float = 1e-7) -> None:
        """Raise unless every per-player component lies in its action set."""
        for k, joint in enumerate(self.actions):
            for i, x in enumerate(joint):
                if not contains(game.action_sets[i], x, tol):
                    raise ValueError(f"basis action {k}, player {i} is infeasible")


@dataclass(frozen=True)
class RegretReport:
    """Per-player and average correlated regrets for one queried w."""

    per_player: np.ndarray
    average: float
    best_responses: List[np.ndarray]
    fw_gaps: np.ndarray


class CeVerdict(NamedTuple):
    is_equilibrium: bool
    worst_player: int
    worst_regret: float


def validate_weights(w, n: Optional[int] = None) -> np.ndarray:
    w = np.asarray(w, dtype=float).ravel()
    if n is not None and w.size != n:
        raise ValueError(f"weight vector has length {w.size}, expected {n}")
    if np.any(w < -1e-9):
        raise ValueError("weights must be nonnegative")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1 (got {w.sum()!r})")
    return w


class RegretOracle:
    """Caches the per-basis quantities that every regret query reuses.

    On construction it evaluates each player's cost at every basis action
    and, for traffic-style games exposing ``mixture_best_response``, the
    per-player opponent flow totals.  ``report(w)`` is then the oracle the
    learner queries; identical inputs give bitwise-identical reports.
    """

    def __init__(self, game, basis: BasisSet, tol_gap: Optional[float] = None,
                 max_iter: int = 2000):
        basis.validate_feasible(game)
        self.game = game
        self.basis = basis
        self.tol_gap = tol_gap
        self.max_iter = max_iter
        m, N = basis.num_players, basis.size
        self.atom_costs = np.empty((m, N))
        for i in range(m):
            for k, joint in enumerate(basis.actions):
                others = [joint[p] for p in range(m) if p != i]
                self.atom_costs[i, k] = game.cost(i, joint[i], others)
        self._fast = hasattr(game, "mixture_best_response")
        if self._fast:
            self.opp_totals = []
            for i in range(m):
                T = np.stack([
                    np.sum([joint[p] for p in range(m) if p != i], axis=0)
                    if m > 1 else np.zeros_like(joint[i])
                    for joint in basis.actions
                ])
                self.opp_totals.append(T)
        self._cache: dict = {}

    # -- single-player pieces --------------------------------------------

    def expected_cost(self, i: int, w: np.ndarray) -> float:
        return float(self.atom_costs[i] @ w)

    def _mixture_functions(self, i: int, w: np.ndarray):
        if self._fast:
            return self.game.mixture_best_response(i, w, self.opp_totals[i])
        game, basis = self.game, self.basis
        m = basis.num_players
        scenarios = [[joint[p] for p in range(m) if p != i] for joint in basis.actions]
        active = [(float(wk), opp) for wk, opp in zip(w, scenarios) if wk > 0.0]

        def fun(y: np.ndarray):
            val = 0.0
            grad = np.zeros_like(y)
            for wk, opp in active:
                val += wk * game.cost(i, y, opp)
                grad += wk * game.cost_gradient(i, y, opp)
            return val, grad

        return fun, None

    def best_response(self, i: int, w: np.ndarray):
        """(value, minimizer, fw_gap) of the constant-deviation benchmark."""
        w = validate_weights(w, self.basis.size)
        tol = self.tol_gap
        if tol is None:
            tol = 1e-6 * max(1.0, abs(self.expected_cost(i, w)))
        fun, line_poly = self._mixture_functions(i, w)
        res = frank_wolfe_min(fun, self.game.action_sets[i], tol_gap=tol,
                              max_iter=self.max_iter, line_poly=line_poly)
        return fun(res.point)[0], res.point, res.gap

    # -- the oracle surface ------------------------------------------------

    def report(self, w) -> RegretReport:
        w = validate_weights(w, self.basis.size)
        key = w.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        m = self.basis.num_players
        per = np.empty(m)
        gaps = np.empty(m)
        responses = []
        for i in range(m):
            value, y_star, gap = self.best_response(i, w)
            per[i] = self.expected_cost(i, w) - value
            gaps[i] = gap
            responses.append(y_star)
        rep = RegretReport(per, float(np.mean(per)), responses, gaps)
        self._cache[key] = rep
        return rep

    def average(self, w) -> float:
        return self.report(w).average


def expected_cost(i: int, w, basis: BasisSet, game) -> float:
    """Expected cost of following recommendations drawn with weights w."""
    w = validate_weights(w, basis.size)
    m = basis.num_players
    total = 0.0
    for wk, joint in zip(w, basis.actions):
        if wk == 0.0:
            continue
        others = [joint[p] for p in range(m) if p != i]
        total += float(wk) * game.cost(i, joint[i], others)
    return total


def best_response_value(i: int, w, basis: BasisSet, game,
                        tol_gap: Optional[float] = None):
    """Best constant deviation against the mixture of basis scenarios."""
    return RegretOracle(game, basis, tol_gap=tol_gap).best_response(i, validate_weights(w, basis.size))


def correlated_regret(i: int, w, basis: BasisSet, game,
                      tol_gap: Optional[float] = None) -> float:
    """Signed correlated regret of player i at weights w."""
    oracle = RegretOracle(game, basis, tol_gap=tol_gap)
    w = validate_weights(w, basis.size)
    value, _, _ = oracle.best_response(i, w)
    return oracle.expected_cost(i, w) - value


def regret_report(w, basis: BasisSet, game, tol_gap: Optional[float] = None) -> RegretReport:
    """Per-player regrets, their average, minimizers, and gap certificates."""
    return RegretOracle(game, basis, tol_gap=tol_gap).report(w)


def verify_ce(basis: BasisSet, w, game, tol: float = 1e-6) -> CeVerdict:
    """Equilibrium test: every player's regret must be <= tol."""
    rep = regret_report(w, basis, game)
    worst = int(np.argmax(rep.per_player))
    return CeVerdict(bool(rep.per_player[worst] <= tol), worst,
                     float(rep.per_player[worst]))
