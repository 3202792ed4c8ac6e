"""Two-phase revised primal simplex for the hull-membership gauge program.

The membership LP  max alpha s.t. alpha*p in conv({0, c_1..c_m})  is, for
p != 0, equivalent to the Minkowski-gauge program

    min sum(mu)   s.t.   C^T mu = p,   mu >= 0,

with alpha = 1 / sum(mu) and convex weights lam_i = mu_i / sum(mu); an
infeasible program means p lies outside the conic hull of the rows and the
only admissible scaling is alpha = 0.  The shape is extreme (d <= 81 rows,
up to 10^5 columns) and solves arrive in large batches, which general
solvers handle slowly; this implementation exploits the shape directly:

- the basis is a d x d matrix refactorized by LU at every pivot (cheap at
  this size and immune to update drift),
- pricing is pooled: a full reduced-cost sweep every so many pivots
  refreshes a candidate pool, and pivots price only the pool in between,
- the cost vector carries a deterministic per-column perturbation of
  relative size 1e-9, which breaks the heavy degeneracy of points near the
  hull boundary; optimality is always certified by a final full sweep
  against the *unperturbed* costs, iterating further if that fails.

Callers are expected to fall back to a general solver when ``status`` is
"failed" and may re-verify the returned residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

#: Reduced-cost / feasibility tolerance.
RC_TOL = 1e-9
#: Smallest pivot magnitude accepted in the ratio test.
PIVOT_TOL = 1e-11
#: Relative size of the deterministic anti-degeneracy cost perturbation.
PERTURB = 1e-9

_POOL_SIZE = 512
_REFRESH_EVERY = 40
_STALL_LIMIT = 80
_BLAND_BURST = 30


def _perturbation(m: int) -> np.ndarray:
    """Deterministic pseudo-random per-column cost offsets in [0, PERTURB)."""
    idx = np.arange(m, dtype=np.uint64)
    mixed = (idx * np.uint64(2654435761)) % np.uint64(2**32)
    return PERTURB * (mixed.astype(float) / 2.0**32)


@dataclass
class GaugeResult:
    status: str  # "optimal" | "infeasible_cone" | "failed"
    basic_indices: np.ndarray  # columns of C in the final basis (mu > 0 subset)
    basic_values: np.ndarray
    objective: float  # sum(mu) at the optimum
    residual: float  # max |C^T mu - p|
    iterations: int


class _Simplex:
    """One gauge solve; artificial columns are indexed m + row."""

    def __init__(self, points: np.ndarray, p: np.ndarray):
        self.points = points
        self.p = np.asarray(p, dtype=float)
        self.m, self.d = points.shape
        self.scale = max(1.0, float(np.max(np.abs(self.p))))
        self.art_sign = np.where(self.p >= 0.0, 1.0, -1.0)
        self.basis = np.arange(self.m, self.m + self.d)
        self.dead_rows = np.zeros(self.d, dtype=bool)  # redundant constraint rows
        self.perturb = _perturbation(self.m)
        self.iterations = 0
        self.binv = None  # maintained explicit basis inverse
        self.x_b = None
        self._since_refactor = 0

    # -- basis linear algebra -------------------------------------------------

    def _basis_matrix(self) -> np.ndarray:
        b = np.empty((self.d, self.d))
        real = self.basis < self.m
        if real.any():
            b[:, real] = self.points[self.basis[real]].T
        for i in np.flatnonzero(~real):
            b[:, i] = 0.0
            b[self.basis[i] - self.m, i] = self.art_sign[self.basis[i] - self.m]
        return b

    def _refactor(self) -> bool:
        try:
            lu = sla.lu_factor(self._basis_matrix())
            self.binv = sla.lu_solve(lu, np.eye(self.d))
        except (ValueError, sla.LinAlgError):
            return False
        if not np.all(np.isfinite(self.binv)):
            return False
        self.x_b = self.binv @ self.p
        self._since_refactor = 0
        return bool(np.all(np.isfinite(self.x_b)))

    def _update_inverse(self, w: np.ndarray, leave: int) -> bool:
        """Rank-1 eta update of the inverse after basis[leave] is replaced."""
        piv = w[leave]
        if abs(piv) < PIVOT_TOL:
            return self._refactor()
        row = self.binv[leave] / piv
        self.binv -= np.outer(w, row)
        self.binv[leave] = row
        self.x_b = self.binv @ self.p
        self._since_refactor += 1
        if self._since_refactor >= 100 or not np.all(np.isfinite(self.x_b)):
            return self._refactor()
        if float(self.x_b.min(initial=0.0)) < -1e-7 * self.scale:
            return self._refactor()
        return True

    def _column(self, j: int) -> np.ndarray:
        if j < self.m:
            return self.points[j]
        col = np.zeros(self.d)
        col[j - self.m] = self.art_sign[j - self.m]
        return col

    # -- pricing --------------------------------------------------------------

    def _cost(self, phase: int, exact: bool) -> np.ndarray:
        """Objective coefficients of the *real* columns."""
        base = np.zeros(self.m) if phase == 1 else np.ones(self.m)
        return base if exact else base + self.perturb

    def _duals(self, phase: int, exact: bool) -> np.ndarray:
        c_b = np.empty(self.d)
        art = self.basis >= self.m
        real_cost = self._cost(phase, exact)
        c_b[art] = 1.0 if phase == 1 else 0.0
        c_b[~art] = real_cost[self.basis[~art]]
        return c_b @ self.binv  # y solves B^T y = c_B

    # -- pivoting -------------------------------------------------------------

    def _ratio_test(self, w: np.ndarray, bland: bool):
        art = self.basis >= self.m
        # zero-level artificials must not grow: force them out on contact
        block = art & ~self.dead_rows & (np.abs(w) > PIVOT_TOL) & (
            self.x_b <= RC_TOL * self.scale
        )
        if np.any(block):
            rows = np.flatnonzero(block)
            return rows[np.argmax(np.abs(w[rows]))]
        ok = w > PIVOT_TOL
        if not np.any(ok):
            return None
        ratios = np.where(ok, self.x_b / np.where(ok, w, 1.0), np.inf)
        ratios = np.maximum(ratios, 0.0)
        theta = ratios[ok].min()
        near = np.flatnonzero(ratios <= theta + 1e-12 * self.scale)
        art_near = near[art[near]]
        if art_near.size:  # prefer kicking artificials out
            return art_near[np.argmax(np.abs(w[art_near]))]
        if bland:
            return near[np.argmin(self.basis[near])]
        return near[np.argmax(np.abs(w[near]))]

    def _phase_objective(self, phase: int) -> float:
        art = self.basis >= self.m
        return float(self.x_b[art].sum()) if phase == 1 else float(self.x_b[~art].sum())

    def _full_sweep(self, phase: int, exact: bool):
        """(entering candidates sorted by violation, rc vector)."""
        y = self._duals(phase, exact)
        rc = self._cost(phase, exact) - self.points @ y
        rc[self.basis[self.basis < self.m]] = 0.0
        neg = np.flatnonzero(rc < -RC_TOL)
        if neg.size == 0:
            return None, rc
        take = min(_POOL_SIZE, neg.size)
        pool = neg[np.argpartition(rc[neg], take - 1)[:take]]
        return pool[np.argsort(rc[pool])], rc

    def _run_phase(self, phase: int, max_iters: int) -> str:
        if not self._refactor():
            return "failed"
        pool = None
        pool_pts = None
        pool_cost = None
        since_refresh = 0
        stall = 0
        bland_left = 0
        best_obj = np.inf

        while self.iterations < max_iters:
            bland = bland_left > 0
            entering = -1
            if pool is not None and since_refresh < _REFRESH_EVERY and not bland:
                y = self._duals(phase, exact=False)
                rc = pool_cost - pool_pts @ y
                k = int(np.argmin(rc))
                if rc[k] < -RC_TOL and pool[k] not in self.basis:
                    entering = int(pool[k])
            if entering < 0:
                since_refresh = 0
                cands, _ = self._full_sweep(phase, exact=False)
                if cands is None:
                    # perturbed-optimal; certify against the exact costs
                    cands, _ = self._full_sweep(phase, exact=True)
                    if cands is None:
                        return "optimal"
                pool = cands
                pool_pts = self.points[pool]
                pool_cost = self._cost(phase, exact=False)[pool]
                entering = int(pool[0])

            w = self.binv @ self._column(entering)
            leave = self._ratio_test(w, bland)
            if leave is None:
                return "failed"  # gauge objective is bounded below; numerical trouble
            self.basis[leave] = entering
            self.iterations += 1
            since_refresh += 1
            if bland:
                bland_left -= 1
            if not self._update_inverse(w, leave):
                return "failed"

            obj = self._phase_objective(phase)
            if obj < best_obj - RC_TOL * self.scale:
                best_obj = obj
                stall = 0
            else:
                stall += 1
                if stall > _STALL_LIMIT:
                    bland_left = _BLAND_BURST
                    stall = 0
            if phase == 1 and obj <= RC_TOL * self.scale:
                return "feasible"
        return "failed"

    def _purge_artificials(self) -> bool:
        """Pivot zero-level artificials out; mark untouchable rows dead."""
        for i in range(self.d):
            if self.basis[i] < self.m or self.dead_rows[i]:
                continue
            weight = np.abs(self.points @ self.binv[i])
            weight[self.basis[self.basis < self.m]] = 0.0
            pivoted = False
            for j in np.argsort(-weight)[:64]:
                if weight[j] <= 1e-7:
                    break
                self.basis[i] = int(j)
                if self._refactor():
                    pivoted = True
                    break
                self.basis[i] = self.m + i  # roll back
                if not self._refactor():
                    return False
            if not pivoted:
                self.dead_rows[i] = True  # linearly dependent constraint row
        return True

    def solve(self, max_iters: int) -> GaugeResult:
        status = self._run_phase(1, max_iters)
        if status == "optimal":
            if self._phase_objective(1) > 1e-7 * self.scale:
                return GaugeResult("infeasible_cone", np.empty(0, dtype=np.int64),
                                   np.empty(0), 0.0, 0.0, self.iterations)
            status = "feasible"
        if status != "feasible":
            return GaugeResult("failed", np.empty(0, dtype=np.int64), np.empty(0),
                               0.0, np.inf, self.iterations)
        if not self._purge_artificials():
            return GaugeResult("failed", np.empty(0, dtype=np.int64), np.empty(0),
                               0.0, np.inf, self.iterations)
        status = self._run_phase(2, max_iters)
        if status != "optimal":
            return GaugeResult("failed", np.empty(0, dtype=np.int64), np.empty(0),
                               0.0, np.inf, self.iterations)

        real = (self.basis < self.m) & (self.x_b > 0.0)
        idx = self.basis[real]
        mu = self.x_b[real]
        combo = mu @ self.points[idx] if idx.size else np.zeros(self.d)
        residual = float(np.max(np.abs(combo - self.p)))
        return GaugeResult("optimal", idx.astype(np.int64), mu, float(mu.sum()),
                           residual, self.iterations)


def solve_gauge(points: np.ndarray, p: np.ndarray, *, max_iters: int = 20000) -> GaugeResult:
    """Minimize sum(mu) subject to points^T mu = p, mu >= 0.

    Returns basic columns and values at a vertex optimum.  ``status`` is
    "infeasible_cone" when p has no nonnegative combination (the membership
    alpha is then exactly 0) and "failed" on numerical breakdown, in which
    case the caller should use a fallback solver.
    """
    points = np.ascontiguousarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != len(p):
        raise ValueError(f"points must be (m, {len(p)}), got {points.shape}")
    return _Simplex(points, p).solve(max_iters)
