"""Bipartite quantum states, the generalized Gell-Mann basis, and featurization.

A state on C^{d_A} x C^{d_B} is represented either as a density matrix or as
its real coordinate vector in the (traceless, Hermitian, orthogonal)
generalized Gell-Mann basis.  The normalization is chosen so that the
maximally mixed state maps to the origin and every pure state to a unit
vector, which is what makes the convex-hull scaling factor alpha
geometrically meaningful.

All objects are immutable after construction and all functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidDimensionError,
    InvariantViolationError,
    KindMismatchError,
)

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10


@dataclass(frozen=True)
class Dims:
    """Subsystem dimensions (d_a, d_b) of a bipartite system."""

    d_a: int
    d_b: int

    def __post_init__(self):
        if self.d_a < 2 or self.d_b < 2:
            raise InvalidDimensionError(
                f"subsystem dimensions must be >= 2, got ({self.d_a}, {self.d_b})"
            )

    @property
    def n(self) -> int:
        """Total Hilbert-space dimension d_a * d_b."""
        return self.d_a * self.d_b

    @property
    def feature_dim(self) -> int:
        """Length of the real coordinate vector, n^2 - 1."""
        return self.n * self.n - 1


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@lru_cache(maxsize=32)
def _gellmann_stack(n: int) -> np.ndarray:
    """Stacked (n^2-1, n, n) generalized Gell-Mann matrices.

    Order: symmetric s_{j,k} for j<k lexicographic, then antisymmetric
    a_{j,k}, then diagonal d_l for l = 1..n-1.
    """
    if n < 2:
        raise InvalidDimensionError(f"basis dimension must be >= 2, got {n}")
    mats = np.zeros((n * n - 1, n, n), dtype=complex)
    idx = 0
    for j in range(n):
        for k in range(j + 1, n):
            mats[idx, j, k] = 1.0
            mats[idx, k, j] = 1.0
            idx += 1
    for j in range(n):
        for k in range(j + 1, n):
            mats[idx, j, k] = -1.0j
            mats[idx, k, j] = 1.0j
            idx += 1
    for l in range(1, n):
        coeff = np.sqrt(2.0 / (l * (l + 1)))
        diag = np.zeros(n)
        diag[:l] = 1.0
        diag[l] = -l
        mats[idx] = coeff * np.diag(diag)
        idx += 1
    return _frozen(mats)


class GellMannBasis:
    """The n^2-1 traceless Hermitian basis matrices with tr(l_i l_j) = 2 d_ij."""

    __slots__ = ("n", "matrices")

    def __init__(self, n: int):
        self.n = n
        self.matrices = _gellmann_stack(n)

    def __len__(self) -> int:
        return self.matrices.shape[0]

    def __getitem__(self, i: int) -> np.ndarray:
        return self.matrices[i]


def gellmann_basis(n: int) -> GellMannBasis:
    """Return the generalized Gell-Mann basis for dimension n >= 2."""
    return GellMannBasis(n)


class DensityMatrix:
    """A Hermitian, trace-one matrix with recorded bipartite dimensions.

    Hermiticity and unit trace are always enforced at construction.
    Positivity is enforced by default but may be skipped (the defeaturize
    map legitimately produces non-positive Hermitian matrices, which the
    iterative hull algorithms probe); it is then available via
    ``is_positive`` / ``min_eigenvalue``.
    """

    __slots__ = ("dims", "entries", "_min_eig")

    def __init__(self, dims: Dims, entries: np.ndarray, *, check_positive: bool = True):
        entries = np.asarray(entries, dtype=complex)
        n = dims.n
        if entries.shape != (n, n):
            raise DimensionMismatchError(
                f"expected a {n}x{n} matrix for dims ({dims.d_a},{dims.d_b}), "
                f"got shape {entries.shape}"
            )
        herm = np.max(np.abs(entries - entries.conj().T))
        if herm > HERMITICITY_TOL:
            raise InvariantViolationError(f"matrix not Hermitian: residual {herm:.3e}")
        tr = entries.trace()
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvariantViolationError(f"trace must be 1, got {tr:.15g}")
        self.dims = dims
        self.entries = _frozen(entries.copy())
        self._min_eig = None
        if check_positive and not self.is_positive:
            raise InvariantViolationError(
                f"matrix not positive semidefinite: min eigenvalue {self.min_eigenvalue:.3e}"
            )

    @property
    def min_eigenvalue(self) -> float:
        if self._min_eig is None:
            self._min_eig = float(np.linalg.eigvalsh(self.entries)[0])
        return self._min_eig

    @property
    def is_positive(self) -> bool:
        """Min eigenvalue >= -1e-10 (floating-point PSD)."""
        return self.min_eigenvalue >= -PSD_TOL

    def purity(self) -> float:
        """tr(rho^2); equals 1 exactly for pure states."""
        return float(np.real(np.vdot(self.entries, self.entries)))

    def __repr__(self) -> str:
        return f"DensityMatrix(dims=({self.dims.d_a},{self.dims.d_b}))"


@dataclass(frozen=True)
class FeatureVector:
    """Real Gell-Mann coordinates of a state; length dims.feature_dim."""

    dims: Dims
    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.shape != (self.dims.feature_dim,):
            raise DimensionMismatchError(
                f"expected {self.dims.feature_dim} coordinates, got shape {coords.shape}"
            )
        object.__setattr__(self, "coords", _frozen(coords.copy()))


def _feature_scale(n: int) -> float:
    return np.sqrt(n / (2.0 * (n - 1.0)))


def coords_for_dimension(n: int, entries: np.ndarray) -> np.ndarray:
    """x_i = sqrt(n/(2(n-1))) tr(entries l_i) for any single dimension n >= 2."""
    basis = _gellmann_stack(n)
    raw = np.einsum("kij,ji->k", basis, entries)
    imag = np.max(np.abs(raw.imag)) if raw.size else 0.0
    if imag > HERMITICITY_TOL:
        raise InvariantViolationError(f"non-real feature coordinates: residual {imag:.3e}")
    return _feature_scale(n) * raw.real


def featurize_entries(dims: Dims, entries: np.ndarray) -> np.ndarray:
    """Coordinates of a raw Hermitian matrix, without DensityMatrix checks."""
    return coords_for_dimension(dims.n, entries)


def featurize(rho: DensityMatrix) -> FeatureVector:
    """Map a state to x_i = sqrt(n/(2(n-1))) tr(rho l_i)."""
    return FeatureVector(rho.dims, featurize_entries(rho.dims, rho.entries))


def defeaturize(x: FeatureVector) -> DensityMatrix:
    """Inverse map rho = (I + sqrt(n(n-1)/2) x.l) / n.

    Hermitian and trace-one by construction.  Positivity is *not* enforced:
    check ``is_positive`` on the result when it matters.
    """
    dims = x.dims
    n = dims.n
    basis = _gellmann_stack(n)
    mat = np.tensordot(x.coords, basis, axes=(0, 0))
    mat *= np.sqrt(n * (n - 1.0) / 2.0)
    mat += np.eye(n)
    mat /= n
    return DensityMatrix(dims, mat, check_positive=False)


def state_from_ket(dims: Dims, ket: np.ndarray) -> DensityMatrix:
    """Rank-one projector |ket><ket| as a DensityMatrix."""
    ket = np.asarray(ket, dtype=complex).ravel()
    if ket.shape != (dims.n,):
        raise DimensionMismatchError(f"ket length {ket.shape} != n={dims.n}")
    nrm = np.linalg.norm(ket)
    if nrm == 0:
        raise InvariantViolationError("cannot normalize the zero vector")
    ket = ket / nrm
    return DensityMatrix(dims, np.outer(ket, ket.conj()))


def pure_product_feature(dims: Dims, ket_a: np.ndarray, ket_b: np.ndarray) -> np.ndarray:
    """Feature coordinates of |a><a| (x) |b><b| without building the projector twice.

    Fast path used in bulk by hull construction; kets must be normalized.
    """
    psi = np.kron(np.asarray(ket_a, dtype=complex), np.asarray(ket_b, dtype=complex))
    basis = _gellmann_stack(dims.n)
    vals = np.einsum("i,kij,j->k", psi.conj(), basis, psi)
    return _feature_scale(dims.n) * vals.real


def tensor(a, b):
    """Kronecker product of two density matrices or two state vectors.

    Two DensityMatrix operands give a DensityMatrix with dims recorded as
    (n_a, n_b); two 1-D arrays give the product ket.  Mixing kinds raises.
    """
    a_is_dm = isinstance(a, DensityMatrix)
    b_is_dm = isinstance(b, DensityMatrix)
    if a_is_dm and b_is_dm:
        dims = Dims(a.dims.n, b.dims.n)
        return DensityMatrix(dims, np.kron(a.entries, b.entries), check_positive=False)
    if a_is_dm or b_is_dm:
        raise KindMismatchError("cannot tensor a density matrix with a state vector")
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim != 1 or b.ndim != 1:
        raise KindMismatchError("tensor expects two kets or two density matrices")
    return np.kron(a, b)


def partial_transpose(rho: DensityMatrix) -> np.ndarray:
    """Transpose on the B-subsystem indices; Hermitian, trace-preserving, involutive."""
    d_a, d_b = rho.dims.d_a, rho.dims.d_b
    n = rho.dims.n
    t = rho.entries.reshape(d_a, d_b, d_a, d_b)
    return t.transpose(0, 3, 2, 1).reshape(n, n)


def is_ppt(rho: DensityMatrix) -> bool:
    """True iff the partial transpose has min eigenvalue >= -1e-10."""
    return bool(np.linalg.eigvalsh(partial_transpose(rho))[0] >= -PSD_TOL)


def depolarize(rho: DensityMatrix, alpha: float) -> DensityMatrix:
    """Mix toward the maximally mixed state: alpha*rho + (1-alpha)*I/n."""
    if not 0.0 <= alpha <= 1.0:
        raise InvariantViolationError(f"mixing weight must lie in [0, 1], got {alpha}")
    n = rho.dims.n
    mat = alpha * rho.entries + (1.0 - alpha) * np.eye(n) / n
    return DensityMatrix(rho.dims, mat, check_positive=False)


def maximally_mixed(dims: Dims) -> DensityMatrix:
    return DensityMatrix(dims, np.eye(dims.n) / dims.n)


def tiles_state() -> DensityMatrix:
    """The 9x9 PPT-entangled state built from the five-tile unextendible product basis."""
    e = np.eye(3, dtype=complex)
    rt2 = np.sqrt(2.0)
    vs = [
        np.kron(e[0], e[0] - e[1]) / rt2,
        np.kron(e[2], e[1] - e[2]) / rt2,
        np.kron(e[0] - e[1], e[2]) / rt2,
        np.kron(e[1] - e[2], e[0]) / rt2,
        np.kron(e[0] + e[1] + e[2], e[0] + e[1] + e[2]) / 3.0,
    ]
    proj = sum(np.outer(v, v.conj()) for v in vs)
    return DensityMatrix(Dims(3, 3), (np.eye(9) - proj) / 4.0)


def singlet_state() -> DensityMatrix:
    """The two-qubit singlet (|01> - |10>)/sqrt(2) as a projector."""
    ket = np.zeros(4, dtype=complex)
    ket[1] = 1.0 / np.sqrt(2.0)
    ket[2] = -1.0 / np.sqrt(2.0)
    return state_from_ket(Dims(2, 2), ket)
