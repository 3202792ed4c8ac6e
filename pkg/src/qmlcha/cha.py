"""Inner convex-hull approximation of the separable set.

A hull is a matrix of feature vectors of sampled separable pure states,
always joined by the origin (the maximally mixed state).  Membership of a
scaled ray is decided by the linear program

    max alpha  s.t.  alpha*p = sum_i lam_i c_i,  lam_i >= 0,  sum_i lam_i = 1,

whose optimum alpha >= 1 certifies separability of the state with feature
vector p.  For large hulls the LP is solved by delayed column generation:
optimize over the best-scoring subset of extreme points, then price the
remaining columns with the dual solution and repeat until no column has a
negative reduced cost, which certifies the global optimum.

The iterative critical-point routine refines a hull around the supporting
facet of the ray through a target state by re-sampling product states near
the active extreme points under shrinking local rotations.
"""

from __future__ import annotations

import enum
import multiprocessing
import os
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import linprog

from . import lpsolve
from .errors import (
    DimensionMismatchError,
    InvariantViolationError,
    LpInfeasibleError,
    NumericalError,
)
from .qstate import (
    DensityMatrix,
    Dims,
    FeatureVector,
    defeaturize,
    featurize_entries,
    pure_product_feature,
)
from .sampling import (
    LABEL_ENTANGLED,
    LABEL_SEPARABLE,
    LabeledDataset,
    random_pure_product,
)

#: Reported alpha for rays on which the LP is unbounded (p = 0).
ALPHA_CAP = 1e6
#: Weights above this are treated as active extreme points of the optimal face.
ACTIVE_WEIGHT_TOL = 1e-9
#: Hulls larger than this are solved by column generation.
CG_MIN_COLUMNS = 1500

_LP_OPTIONS = {
    "primal_feasibility_tolerance": 1e-9,
    "dual_feasibility_tolerance": 1e-9,
}


class AlphaStatus(enum.Enum):
    OPTIMAL = "optimal"
    CAPPED_UNBOUNDED = "capped_unbounded"


@dataclass
class AlphaResult:
    """LP optimum with its active convex weights.

    ``weights`` holds (row index into the hull, weight) pairs for the
    sampled extreme points; the implicit origin's weight is kept separately
    so that origin_weight + sum of weights == 1.
    """

    alpha: float
    weights: List[Tuple[int, float]]
    origin_weight: float
    status: AlphaStatus
    residual: float = 0.0


@dataclass
class ConvexHull:
    """Feature vectors of separable pure states, plus the implicit origin.

    ``kets_a``/``kets_b`` keep the product-state factors of each row when
    the hull was built by sampling; they are needed by the critical-point
    refinement and can be recovered from the rows otherwise.
    """

    dims: Dims
    points: np.ndarray  # (m, feature_dim)
    include_origin: bool = True
    kets_a: Optional[np.ndarray] = None  # (m, d_a) complex
    kets_b: Optional[np.ndarray] = None  # (m, d_b) complex

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != self.dims.feature_dim:
            raise DimensionMismatchError(
                f"points must be (m, {self.dims.feature_dim}), got {self.points.shape}"
            )
        if self.points.shape[0] < 1:
            raise InvariantViolationError("a hull needs at least one extreme point")
        for kets, d in ((self.kets_a, self.dims.d_a), (self.kets_b, self.dims.d_b)):
            if kets is not None and kets.shape != (self.points.shape[0], d):
                raise DimensionMismatchError("ket array shape does not match points")

    @property
    def m(self) -> int:
        return self.points.shape[0]

    def prefix(self, m: int) -> "ConvexHull":
        """Hull over the first m rows (shares memory; used for nested sweeps)."""
        if not 1 <= m <= self.m:
            raise InvariantViolationError(f"prefix size {m} out of range 1..{self.m}")
        ka = self.kets_a[:m] if self.kets_a is not None else None
        kb = self.kets_b[:m] if self.kets_b is not None else None
        return ConvexHull(self.dims, self.points[:m], self.include_origin, ka, kb)

    def product_factors(self) -> Tuple[np.ndarray, np.ndarray]:
        """Per-row product-state factors, recovering them from the rows if absent."""
        if self.kets_a is not None and self.kets_b is not None:
            return self.kets_a, self.kets_b
        d_a, d_b = self.dims.d_a, self.dims.d_b
        kets_a = np.empty((self.m, d_a), dtype=complex)
        kets_b = np.empty((self.m, d_b), dtype=complex)
        for i in range(self.m):
            rho = defeaturize(FeatureVector(self.dims, self.points[i])).entries
            t = rho.reshape(d_a, d_b, d_a, d_b)
            red_a = np.trace(t, axis1=1, axis2=3)
            red_b = np.trace(t, axis1=0, axis2=2)
            kets_a[i] = np.linalg.eigh(red_a)[1][:, -1]
            kets_b[i] = np.linalg.eigh(red_b)[1][:, -1]
        return kets_a, kets_b

    def validate(self, tol: float = 1e-10) -> None:
        """Check every row is the feature vector of a rank-1 product state."""
        kets_a, kets_b = self.product_factors()
        for i in range(self.m):
            rebuilt = pure_product_feature(self.dims, kets_a[i], kets_b[i])
            err = np.max(np.abs(rebuilt - self.points[i]))
            if err > tol:
                raise InvariantViolationError(
                    f"hull row {i} is not a product pure state (residual {err:.3e})"
                )


@dataclass(frozen=True)
class CriticalPointConfig:
    """Parameters of the iterative critical-point algorithm."""

    initial_points: int = 1000
    epsilon0: float = 1.0
    gamma: float = 0.95
    neighbors_per_point: int = 10
    max_iters: int = 200
    convergence_tol: float = 1e-4
    convergence_window: int = 5

    def __post_init__(self):
        if min(self.initial_points, self.neighbors_per_point, self.max_iters,
               self.convergence_window) < 1:
            raise InvariantViolationError("all counts must be positive")
        if self.epsilon0 <= 0 or self.convergence_tol <= 0:
            raise InvariantViolationError("epsilon0 and convergence_tol must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise InvariantViolationError(f"gamma must lie in (0, 1), got {self.gamma}")


@dataclass
class CriticalPointResult:
    alpha_est: float
    final_hull: ConvexHull
    trace: np.ndarray  # per-iteration alpha values


def build_hull(dims: Dims, m: int, rng: np.random.Generator) -> ConvexHull:
    """Hull from m sampled separable pure states (origin always included)."""
    if m < 1:
        raise InvariantViolationError(f"hull size must be >= 1, got {m}")
    points = np.empty((m, dims.feature_dim))
    kets_a = np.empty((m, dims.d_a), dtype=complex)
    kets_b = np.empty((m, dims.d_b), dtype=complex)
    for i in range(m):
        s = random_pure_product(dims, rng)
        points[i] = s.feature
        kets_a[i] = s.ket_a
        kets_b[i] = s.ket_b
    norms = np.linalg.norm(points, axis=1)
    if np.max(np.abs(norms - 1.0)) > 1e-9:
        raise InvariantViolationError("sampled hull rows must have unit feature norm")
    return ConvexHull(dims, points, True, kets_a, kets_b)


def _as_coords(hull: ConvexHull, p) -> np.ndarray:
    if isinstance(p, FeatureVector):
        if p.dims != hull.dims:
            raise DimensionMismatchError("feature vector dims do not match hull dims")
        return p.coords
    p = np.asarray(p, dtype=float)
    if p.shape != (hull.dims.feature_dim,):
        raise DimensionMismatchError(
            f"expected {hull.dims.feature_dim} coordinates, got shape {p.shape}"
        )
    return p


def _solve_direct(points: np.ndarray, p: np.ndarray, include_origin: bool):
    """One linprog call over the given columns; returns (alpha, lam, origin_w, duals)."""
    m, d = points.shape
    n_lam = m + (1 if include_origin else 0)
    a_eq = np.zeros((d + 1, 1 + n_lam))
    a_eq[:d, 0] = p
    a_eq[:d, 1 + (1 if include_origin else 0):] = -points.T
    a_eq[d, 1:] = 1.0
    b_eq = np.zeros(d + 1)
    b_eq[d] = 1.0
    c = np.zeros(1 + n_lam)
    c[0] = -1.0
    bounds = [(0.0, ALPHA_CAP)] + [(0.0, None)] * n_lam
    # Dual simplex with tight tolerances first (small residuals, vertex
    # solutions); HiGHS sporadically reports "Unknown" on degenerate
    # instances, so fall back to default tolerances and then to the
    # automatic method before giving up.
    res = None
    for method, options in (
        ("highs-ds", _LP_OPTIONS),
        ("highs-ds", None),
        ("highs", None),
    ):
        res = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=bounds,
                      method=method, options=options)
        if res.status == 0:
            break
        if res.status == 2:
            raise LpInfeasibleError("hull membership LP infeasible (no origin in hull?)")
    if res.status != 0:
        raise NumericalError(f"LP solver failed: {res.message}")
    origin_w = float(res.x[1]) if include_origin else 0.0
    lam = res.x[1 + (1 if include_origin else 0):]
    return float(res.x[0]), lam, origin_w, np.asarray(res.eqlin.marginals)


def _solve_restricted_dual(points: np.ndarray, p: np.ndarray):
    """min z s.t. p.y = 1, c_i.y <= z, z >= 0 over the given rows.

    This is the dual of the membership LP: its optimum equals the
    restricted primal's alpha and it stays feasible for any row subset.
    Returns (z, y).
    """
    m, d = points.shape
    a_ub = np.empty((m, d + 1))
    a_ub[:, :d] = points
    a_ub[:, d] = -1.0
    c = np.zeros(d + 1)
    c[d] = 1.0
    a_eq = np.concatenate([p, [0.0]])[None, :]
    bounds = [(None, None)] * d + [(0.0, None)]
    res = None
    for method, options in (
        ("highs-ds", {"presolve": False, **_LP_OPTIONS}),
        ("highs-ds", None),
        ("highs", None),
    ):
        res = linprog(c, A_ub=a_ub, b_ub=np.zeros(m), A_eq=a_eq, b_eq=[1.0],
                      bounds=bounds, method=method, options=options)
        if res.status == 0:
            break
    if res.status != 0:
        raise NumericalError(f"cutting-plane dual LP failed: {res.message}")
    return float(res.x[d]), res.x[:d]


def _solve_column_generation(points: np.ndarray, p: np.ndarray, *,
                             seed_rows: Optional[np.ndarray] = None,
                             subset0: int = 768, add_per_round: int = 512,
                             max_rounds: int = 200):
    """Exact LP optimum via cutting planes on the dual over the hull rows.

    Solve the dual restricted to a working subset of rows, then add the
    rows whose dual constraint c_i.y <= z is violated; once none remains
    violated, z certifies the optimum of the full problem.  A final
    restricted primal solve over the settled subset recovers the convex
    weights (always feasible: the origin carries alpha = 0).

    ``seed_rows`` primes the subset, e.g. with rows active for previously
    scored states; the certificate makes the result independent of seeding.
    """
    m, d = points.shape
    scores = points @ p
    in_subset = np.zeros(m, dtype=bool)
    if seed_rows is not None and len(seed_rows):
        in_subset[seed_rows] = True
    k0 = min(m, max(subset0, 4 * (d + 1)))
    if k0 < m:
        in_subset[np.argpartition(scores, m - k0)[m - k0:]] = True
        # spread rows keep the subset's conic hull full-dimensional
        in_subset[np.arange(0, m, max(1, m // 128))] = True
    else:
        in_subset[:] = True
    subset = np.flatnonzero(in_subset)

    settled = False
    z = 0.0
    for _ in range(max_rounds):
        z, y = _solve_restricted_dual(points[subset], p)
        violation = points @ y - z
        violation[subset] = 0.0
        violating = np.flatnonzero(violation > 1e-9)
        if violating.size == 0:
            settled = True
            break
        worst = violating[np.argsort(violation[violating])[-add_per_round:]]
        in_subset[worst] = True
        subset = np.flatnonzero(in_subset)
    if not settled:  # fall back to one full primal solve
        alpha_v, lam, origin_w, _ = _solve_direct(points, p, True)
        return alpha_v, lam, origin_w, np.arange(m)

    alpha_v, lam, origin_w, _ = _solve_direct(points[subset], p, True)
    if abs(alpha_v - z) > 1e-6 * max(1.0, abs(z)):
        raise NumericalError(
            f"primal/dual mismatch in column generation: {alpha_v:.12g} vs {z:.12g}"
        )
    return alpha_v, lam, origin_w, subset


def _result_from_weights(hull: ConvexHull, p, alpha_v, rows, lam, origin_w) -> AlphaResult:
    pos = np.flatnonzero(lam > 0.0)
    weights = [(int(rows[i]), float(lam[i])) for i in pos]
    combo = lam[pos] @ hull.points[rows[pos]] if pos.size else np.zeros_like(p)
    residual = float(np.max(np.abs(alpha_v * p - combo)))
    status = AlphaStatus.CAPPED_UNBOUNDED if alpha_v >= ALPHA_CAP else AlphaStatus.OPTIMAL
    return AlphaResult(alpha_v, weights, float(origin_w), status, residual)


def _try_gauge(hull: ConvexHull, p: np.ndarray) -> Optional[AlphaResult]:
    """Specialized simplex solve; None means fall back to the general solver."""
    res = lpsolve.solve_gauge(hull.points, p)
    if res.status == "infeasible_cone":
        # no positive scaling of the ray meets the hull; alpha = 0 exactly
        return AlphaResult(0.0, [], 1.0, AlphaStatus.OPTIMAL, 0.0)
    if res.status != "optimal":
        return None
    total = res.objective
    if total <= 1.0 / ALPHA_CAP:
        return AlphaResult(ALPHA_CAP, [], 1.0, AlphaStatus.CAPPED_UNBOUNDED)
    if res.residual / total > 1e-8:
        return None
    alpha_v = 1.0 / total
    lam = res.basic_values / total
    return _result_from_weights(hull, p, alpha_v, res.basic_indices, lam, 0.0)


def _alpha_impl(hull: ConvexHull, p: np.ndarray, method: str,
                seed_rows: Optional[np.ndarray]) -> AlphaResult:
    if np.max(np.abs(p), initial=0.0) < 1e-12:
        return AlphaResult(ALPHA_CAP, [], 1.0, AlphaStatus.CAPPED_UNBOUNDED)

    if method == "auto" and hull.include_origin:
        result = _try_gauge(hull, p)
        if result is not None:
            return result

    use_cg = hull.include_origin and (
        method == "cg" or (method == "auto" and hull.m > CG_MIN_COLUMNS)
    )
    if use_cg:
        alpha_v, lam, origin_w, subset = _solve_column_generation(
            hull.points, p, seed_rows=seed_rows
        )
        rows = subset
    else:
        alpha_v, lam, origin_w, _ = _solve_direct(hull.points, p, hull.include_origin)
        rows = np.arange(hull.m)
    return _result_from_weights(hull, p, alpha_v, rows, lam, origin_w)


def alpha(hull: ConvexHull, p, *, method: str = "auto") -> AlphaResult:
    """Largest a with a*p inside the hull, with the active convex weights.

    ``method``: "auto" (default) uses the specialized gauge simplex with a
    fall-back to the general HiGHS paths; "direct" forces one full HiGHS
    solve of the membership LP; "cg" forces the HiGHS cutting-plane path.
    Rays with p = 0 (the maximally mixed state) make the LP unbounded and
    are reported as CAPPED_UNBOUNDED with ALPHA_CAP.
    """
    return _alpha_impl(hull, _as_coords(hull, p), method, None)


# ---------------------------------------------------------------------------
# Batch evaluation (optionally fork-parallel)

_BATCH_STATE: dict = {}


def _alpha_run(hull: ConvexHull, coords: np.ndarray, lo: int, hi: int,
               method: str) -> np.ndarray:
    return np.array(
        [_alpha_impl(hull, coords[i], method, None).alpha for i in range(lo, hi)]
    )


def _batch_chunk(args):
    lo, hi = args
    return lo, _alpha_run(
        _BATCH_STATE["hull"], _BATCH_STATE["coords"], lo, hi, _BATCH_STATE["method"]
    )


def resolve_workers(workers: Optional[int]) -> int:
    """Worker count from the argument, QMLCHA_THREADS, or the machine."""
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("QMLCHA_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def alpha_batch(hull: ConvexHull, coords: np.ndarray, *, workers: int = 1,
                method: str = "auto") -> np.ndarray:
    """Alpha values for many feature vectors against one hull.

    With workers > 1 the rows are scored in forked processes (the hull is
    shared copy-on-write); results do not depend on the worker count.
    """
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 2 or coords.shape[1] != hull.dims.feature_dim:
        raise DimensionMismatchError(
            f"coords must be (n, {hull.dims.feature_dim}), got {coords.shape}"
        )
    n = coords.shape[0]
    if n == 0:
        return np.empty(0)
    workers = max(1, int(workers))
    if workers == 1 or n < 2 * workers or "fork" not in multiprocessing.get_all_start_methods():
        return _alpha_run(hull, coords, 0, n, method)

    # one contiguous chunk per worker so each process amortizes its warm core
    bounds = np.linspace(0, n, workers + 1, dtype=int)
    chunks = [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    _BATCH_STATE.update(hull=hull, coords=coords, method=method)
    try:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(workers) as pool:
            parts = pool.map(_batch_chunk, chunks)
    finally:
        _BATCH_STATE.clear()
    out = np.empty(n)
    for lo, vals in parts:
        out[lo:lo + len(vals)] = vals
    return out


def classify_cha(hull: ConvexHull, rho: DensityMatrix) -> int:
    """-1 (separable) iff alpha(hull, featurize(rho)) >= 1, else +1."""
    if rho.dims != hull.dims:
        raise DimensionMismatchError("state dims do not match hull dims")
    p = featurize_entries(rho.dims, rho.entries)
    return LABEL_SEPARABLE if alpha(hull, p).alpha >= 1.0 else LABEL_ENTANGLED


def classify_cha_features(hull: ConvexHull, coords: np.ndarray, *,
                          workers: int = 1) -> np.ndarray:
    """Vectorized CHA labels for feature rows."""
    a = alpha_batch(hull, coords, workers=workers)
    return np.where(a >= 1.0, LABEL_SEPARABLE, LABEL_ENTANGLED).astype(np.int8)


def extend_dataset(hull: ConvexHull, ds: LabeledDataset, *, workers: int = 1) -> LabeledDataset:
    """Fill the alpha column of a dataset via the hull LP (capped at ALPHA_CAP)."""
    if ds.dims != hull.dims:
        raise DimensionMismatchError("dataset dims do not match hull dims")
    a = alpha_batch(hull, ds.coords, workers=workers)
    return ds.with_alpha(np.minimum(a, ALPHA_CAP))


# ---------------------------------------------------------------------------
# Iterative critical-point refinement

def _random_unit_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    """GUE draw normalized to unit Frobenius norm."""
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    h = 0.5 * (a + a.conj().T)
    return h / np.linalg.norm(h)


def _rotate_ket(ket: np.ndarray, h: np.ndarray, xi: float) -> np.ndarray:
    """exp(i xi h) |ket> through the eigendecomposition of h."""
    w, v = np.linalg.eigh(h)
    return v @ (np.exp(1j * xi * w) * (v.conj().T @ ket))


def critical_point(
    rho: DensityMatrix,
    cfg: CriticalPointConfig = CriticalPointConfig(),
    rng: Optional[np.random.Generator] = None,
) -> CriticalPointResult:
    """Iteratively refine a hull toward the boundary point of the ray through rho.

    Each round solves the membership LP, keeps only the extreme points that
    carry weight in the optimal combination, and surrounds each of them with
    neighbors obtained by local unitary kicks exp(i xi H1) x exp(i xi H2)
    of its product factors, with xi uniform in [0, eps] and eps decaying by
    gamma per round.  Stops when alpha >= 1, when the last
    ``convergence_window + 1`` alphas vary by less than ``convergence_tol``,
    or after ``max_iters`` rounds.
    """
    if rng is None:
        rng = np.random.default_rng()
    dims = rho.dims
    p = featurize_entries(dims, rho.entries)
    hull = build_hull(dims, cfg.initial_points, rng)
    eps = cfg.epsilon0
    trace: List[float] = []

    for _ in range(cfg.max_iters):
        res = alpha(hull, p)
        trace.append(res.alpha)
        if res.alpha >= 1.0:
            break
        if len(trace) > cfg.convergence_window:
            window = trace[-(cfg.convergence_window + 1):]
            if max(window) - min(window) < cfg.convergence_tol:
                break

        active = [i for i, w in res.weights if w > ACTIVE_WEIGHT_TOL]
        if not active:  # degenerate ray carried by the origin alone
            active = list(range(hull.m))
        kets_a, kets_b = hull.product_factors()
        base_a = kets_a[active]
        base_b = kets_b[active]

        n_nb = cfg.neighbors_per_point
        total = len(active) * (1 + n_nb)
        new_points = np.empty((total, dims.feature_dim))
        new_a = np.empty((total, dims.d_a), dtype=complex)
        new_b = np.empty((total, dims.d_b), dtype=complex)
        new_points[:len(active)] = hull.points[active]
        new_a[:len(active)] = base_a
        new_b[:len(active)] = base_b
        pos = len(active)
        for k in range(len(active)):
            for _ in range(n_nb):
                h1 = _random_unit_hermitian(dims.d_a, rng)
                h2 = _random_unit_hermitian(dims.d_b, rng)
                xi = rng.uniform(0.0, eps)
                ka = _rotate_ket(base_a[k], h1, xi)
                kb = _rotate_ket(base_b[k], h2, xi)
                new_points[pos] = pure_product_feature(dims, ka, kb)
                new_a[pos] = ka
                new_b[pos] = kb
                pos += 1
        hull = ConvexHull(dims, new_points, True, new_a, new_b)
        eps *= cfg.gamma

    return CriticalPointResult(trace[-1], hull, np.asarray(trace))
