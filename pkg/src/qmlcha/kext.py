"""Extreme points of the k-symmetric-extendible sets and the derived witnesses.

A two-body observable H_AB, embedded pairwise into a star-shaped
(k+1)-party Hamiltonian H = sum_i H_{AB_i}, has a ground state whose AB_i
marginal rho_H is an extreme point of the k-extendible set in the
direction of H_AB.  The ground energy bounds tr(rho H_AB) from below for
every k-extendible rho (per pair: E0 / k), so any state beating the bound
is certified entangled.

Three eigensolver paths are provided: a dense solve on the full
d_A * d_B^k space, a sparse Lanczos solve for larger full spaces, and a
bosonic (symmetric-subspace) construction whose dimension
d_A * C(k + d_B - 1, d_B - 1) stays tiny even at k = 12.  The symmetric
restriction tightens the extendible set (it yields the Bose-symmetric
variant), which keeps every witness sound and the k-hierarchy nested, and
is the default above k = 6 where full solves get expensive.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import combinations_with_replacement
from math import comb
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    DimensionMismatchError,
    EigensolverError,
    InvariantViolationError,
    SizeLimitError,
)
from .qstate import DensityMatrix, Dims, _gellmann_stack

#: Ground-space eigenvalue gap below which states are averaged as degenerate.
DEGENERACY_GAP = 1e-10
#: Largest full-space dimension handled by the dense eigensolver.
DENSE_LIMIT = 4096
#: Largest dimension accepted for any eigensolve.
HARD_LIMIT = 1 << 21


def _hs_basis(n: int) -> np.ndarray:
    """Orthonormal traceless Hermitian basis, tr(O_i O_j) = delta_ij."""
    return _gellmann_stack(n) / np.sqrt(2.0)


@dataclass(frozen=True)
class TwoLocalHamiltonian:
    """Traceless pair observable H_AB = sum_i a_i O_i with unit coefficient norm."""

    dims: Dims
    coeffs: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.coeffs, dtype=float)
        if a.shape != (self.dims.feature_dim,):
            raise DimensionMismatchError(
                f"expected {self.dims.feature_dim} coefficients, got {a.shape}"
            )
        nrm = np.linalg.norm(a)
        if abs(nrm - 1.0) > 1e-12:
            raise InvariantViolationError(f"coefficient norm must be 1, got {nrm:.15g}")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "coeffs", a)

    @cached_property
    def matrix(self) -> np.ndarray:
        """The n x n observable itself (Hermitian, traceless, unit Frobenius norm)."""
        mat = np.tensordot(self.coeffs, _hs_basis(self.dims.n), axes=(0, 0))
        mat.setflags(write=False)
        return mat

    @classmethod
    def from_observable(cls, dims: Dims, observable: np.ndarray) -> "TwoLocalHamiltonian":
        """Expand a traceless Hermitian matrix in the basis and normalize.

        Rescaling an observable moves its ground energy and the witness
        threshold together, so normalizing here changes nothing downstream.
        """
        obs = np.asarray(observable, dtype=complex)
        n = dims.n
        if obs.shape != (n, n):
            raise DimensionMismatchError(f"observable must be {n}x{n}, got {obs.shape}")
        basis = _hs_basis(n)
        a = np.einsum("kij,ji->k", basis, obs)
        if np.max(np.abs(a.imag), initial=0.0) > 1e-10:
            raise InvariantViolationError("observable must be Hermitian")
        a = a.real
        rebuilt = np.tensordot(a, basis, axes=(0, 0))
        if np.max(np.abs(rebuilt - obs)) > 1e-10:
            raise InvariantViolationError("observable must be traceless and Hermitian")
        nrm = np.linalg.norm(a)
        if nrm < 1e-12:
            raise InvariantViolationError("cannot normalize the zero observable")
        return cls(dims, a / nrm)


@dataclass
class ThetaKPoint:
    """Ground-state marginal rho_H with its basis coordinates and total energy.

    ``energy`` is the ground energy of the full star Hamiltonian; the
    per-pair witness bound is energy / k, which numerically equals the
    coefficient contraction sum_i a_i b_i (checked at construction).
    """

    k: int
    marginal: DensityMatrix
    coords: np.ndarray
    energy: float


def random_two_local(dims: Dims, rng: np.random.Generator) -> TwoLocalHamiltonian:
    """Coefficients uniform on the unit sphere (normalized Gaussian)."""
    a = rng.standard_normal(dims.feature_dim)
    return TwoLocalHamiltonian(dims, a / np.linalg.norm(a))


def _operator_schmidt(h_ab: np.ndarray, d_a: int, d_b: int):
    """Decompose a pair observable as sum_mu A_mu (x) B_mu (exact)."""
    r = h_ab.reshape(d_a, d_b, d_a, d_b).transpose(0, 2, 1, 3).reshape(d_a * d_a, d_b * d_b)
    u, s, vh = np.linalg.svd(r, full_matrices=False)
    keep = s > 1e-14 * max(s[0], 1.0)
    terms = []
    for mu in np.flatnonzero(keep):
        scale = np.sqrt(s[mu])
        terms.append((scale * u[:, mu].reshape(d_a, d_a),
                      scale * vh[mu, :].conj().reshape(d_b, d_b)))
    return terms


def _star_hamiltonian_sparse(h_ab: np.ndarray, d_a: int, d_b: int, k: int) -> sp.csr_matrix:
    """sum_{i=1..k} H_{AB_i} on A (x) B_1 ... B_k as a sparse matrix."""
    terms = _operator_schmidt(h_ab, d_a, d_b)
    total = None
    for a_op, b_op in terms:
        a_sp = sp.csr_matrix(a_op)
        b_sp = sp.csr_matrix(b_op)
        for i in range(k):
            op = sp.kron(
                a_sp,
                sp.kron(sp.identity(d_b**i, format="csr"),
                        sp.kron(b_sp, sp.identity(d_b**(k - 1 - i), format="csr"),
                                format="csr"),
                        format="csr"),
                format="csr",
            )
            total = op if total is None else total + op
    return total.tocsr()


def _pair_marginals_mean(vectors: np.ndarray, d_a: int, d_b: int, k: int) -> np.ndarray:
    """AB_i marginal averaged over B indices and ground-basis columns."""
    n = d_a * d_b
    out = np.zeros((n, n), dtype=complex)
    for col in range(vectors.shape[1]):
        psi = vectors[:, col]
        for i in range(k):
            t = psi.reshape(d_a, d_b**i, d_b, d_b**(k - 1 - i))
            out += np.einsum("apxq,bpyq->axby", t, t.conj()).reshape(n, n)
    return out / (k * vectors.shape[1])


@lru_cache(maxsize=64)
def _occupations(d: int, k: int):
    """Occupation-number basis of the k-boson symmetric subspace on d levels."""
    occs = []
    for combo in combinations_with_replacement(range(d), k):
        n = [0] * d
        for level in combo:
            n[level] += 1
        occs.append(tuple(n))
    occs.sort()
    index = {n: i for i, n in enumerate(occs)}
    return occs, index


def _ladder_matrix(d: int, k: int, p: int, q: int) -> np.ndarray:
    """Matrix of a_p^dag a_q in the occupation basis (annihilate q, create p)."""
    occs, index = _occupations(d, k)
    m = np.zeros((len(occs), len(occs)))
    for j, n in enumerate(occs):
        if n[q] == 0:
            continue
        amp = np.sqrt(n[q] * (n[p] + 1 - (1 if p == q else 0)))
        n2 = list(n)
        n2[q] -= 1
        n2[p] += 1
        m[index[tuple(n2)], j] = amp
    return m


def _second_quantized(b_op: np.ndarray, d: int, k: int) -> np.ndarray:
    """dGamma(B) = sum_pq B_pq a_p^dag a_q on the symmetric subspace."""
    dim = comb(k + d - 1, d - 1)
    out = np.zeros((dim, dim), dtype=complex)
    for p in range(d):
        for q in range(d):
            if b_op[p, q] != 0:
                out += b_op[p, q] * _ladder_matrix(d, k, p, q)
    return out


def _ground_block(h: np.ndarray):
    """Orthonormal basis of the numerically degenerate ground space."""
    w, v = np.linalg.eigh(h)
    mask = w <= w[0] + DEGENERACY_GAP
    return float(w[0]), v[:, mask]


def _solve_dense(h_ab, d_a, d_b, k):
    h = _star_hamiltonian_sparse(h_ab, d_a, d_b, k).toarray()
    h = 0.5 * (h + h.conj().T)
    energy, ground = _ground_block(h)
    return energy, _pair_marginals_mean(ground, d_a, d_b, k)


def _solve_sparse(h_ab, d_a, d_b, k):
    dim = d_a * d_b**k
    h = _star_hamiltonian_sparse(h_ab, d_a, d_b, k)
    n_eig = min(4, dim - 1)
    try:
        w, v = spla.eigsh(h, k=n_eig, which="SA")
    except spla.ArpackError as exc:  # pragma: no cover - rare
        raise EigensolverError(f"Lanczos ground-state solve failed: {exc}") from exc
    order = np.argsort(w)
    w, v = w[order], v[:, order]
    mask = w <= w[0] + DEGENERACY_GAP
    return float(w[0]), _pair_marginals_mean(v[:, mask], d_a, d_b, k)


def _solve_symmetric(h_ab, d_a, d_b, k):
    """Ground solve restricted to A (x) Sym^k(B); Bose-symmetric extreme point."""
    dim_sym = comb(k + d_b - 1, d_b - 1)
    terms = _operator_schmidt(h_ab, d_a, d_b)
    h = np.zeros((d_a * dim_sym, d_a * dim_sym), dtype=complex)
    for a_op, b_op in terms:
        h += np.kron(a_op, _second_quantized(b_op, d_b, k))
    h = 0.5 * (h + h.conj().T)
    energy, ground = _ground_block(h)

    n = d_a * d_b
    rho = np.zeros((n, n), dtype=complex)
    for col in range(ground.shape[1]):
        c = ground[:, col].reshape(d_a, dim_sym)
        for p in range(d_b):
            for q in range(d_b):
                # rho[(a p), (a' q)] = <psi| |a'><a| (x) a_q^dag a_p |psi> / k
                block = c @ _ladder_matrix(d_b, k, q, p).T @ c.conj().T
                rho[p::d_b, q::d_b] += block
    rho /= k * ground.shape[1]
    return energy, rho


def ground_marginal(h: TwoLocalHamiltonian, k: int, *, method: str = "auto") -> ThetaKPoint:
    """Extreme point of the k-extendible set in the direction of -H_AB.

    ``method``: "dense" (full space, exact diagonalization, dim <= 4096),
    "sparse" (full space, Lanczos), "symmetric" (Bose-symmetric subspace),
    or "auto", which uses the symmetric construction above k = 6 and the
    full space below it.  Degenerate ground spaces are averaged over an
    orthonormal ground basis and over the B parties, which restores the
    equal-marginal property of the symmetrized ground state.
    """
    if k < 1:
        raise InvariantViolationError(f"extension order k must be >= 1, got {k}")
    d_a, d_b = h.dims.d_a, h.dims.d_b
    full_dim = d_a * d_b**k

    if method == "auto":
        if k > 6 or full_dim > DENSE_LIMIT:
            method = "symmetric"
        else:
            method = "dense"
    if method == "dense":
        if full_dim > DENSE_LIMIT:
            raise SizeLimitError(
                f"dense solve limited to dimension {DENSE_LIMIT}, need {full_dim}"
            )
        energy, rho = _solve_dense(h.matrix, d_a, d_b, k)
    elif method == "sparse":
        if full_dim > HARD_LIMIT:
            raise SizeLimitError(f"full space dimension {full_dim} exceeds {HARD_LIMIT}")
        energy, rho = _solve_sparse(h.matrix, d_a, d_b, k)
    elif method == "symmetric":
        dim = d_a * comb(k + d_b - 1, d_b - 1)
        if dim > DENSE_LIMIT:
            raise SizeLimitError(f"symmetric subspace dimension {dim} exceeds {DENSE_LIMIT}")
        energy, rho = _solve_symmetric(h.matrix, d_a, d_b, k)
    else:
        raise InvariantViolationError(f"unknown method {method!r}")

    rho = 0.5 * (rho + rho.conj().T)
    rho /= rho.trace().real
    marginal = DensityMatrix(h.dims, rho)
    coords = np.einsum("kij,ji->k", _hs_basis(h.dims.n), marginal.entries).real
    pair_energy = float(h.coeffs @ coords)
    if abs(energy - k * pair_energy) > 1e-7 * max(1.0, abs(energy)):
        raise EigensolverError(
            f"ground energy {energy:.12g} inconsistent with k * tr(rho_H H_AB) "
            f"= {k * pair_energy:.12g}"
        )
    return ThetaKPoint(k, marginal, coords, energy)


def witness_check(
    rho: DensityMatrix,
    h: TwoLocalHamiltonian,
    k: int,
    *,
    point: Optional[ThetaKPoint] = None,
    method: str = "auto",
) -> bool:
    """True iff rho is certified to have no k-symmetric extension.

    The certificate is tr(rho H_AB) < E0 / k, the per-pair ground-energy
    bound satisfied by every k-extendible (in particular every separable)
    state.  A precomputed ThetaKPoint for the same (h, k) may be supplied
    to amortize the ground solve over many states.
    """
    if rho.dims != h.dims:
        raise DimensionMismatchError("state dims do not match Hamiltonian dims")
    if point is None:
        point = ground_marginal(h, k, method=method)
    elif point.k != k:
        raise InvariantViolationError(f"precomputed point is for k={point.k}, not k={k}")
    value = float(np.real(np.vdot(rho.entries, h.matrix)))  # = tr(rho H), both Hermitian
    return value < point.energy / k - 1e-10


def boundary_projection(
    h1: np.ndarray,
    h2: np.ndarray,
    k: int,
    num_angles: int,
    dims: Dims,
    *,
    method: str = "auto",
) -> np.ndarray:
    """Supporting points of the k-extendible set in the (h1, h2) plane.

    For each direction theta the pair observable cos(theta) h1 +
    sin(theta) h2 is minimized over the set via its star ground state, and
    the marginal is projected back to (tr(rho h1), tr(rho h2)).  Returns an
    (num_angles, 3) array of rows (theta, x1, x2); the support value in
    direction theta is cos(theta) x1 + sin(theta) x2.
    """
    if num_angles < 1:
        raise InvariantViolationError("need at least one angle")
    h1 = np.asarray(h1, dtype=complex)
    h2 = np.asarray(h2, dtype=complex)
    thetas = np.linspace(0.0, 2.0 * np.pi, num_angles, endpoint=False)
    out = np.empty((num_angles, 3))
    for j, theta in enumerate(thetas):
        direction = np.cos(theta) * h1 + np.sin(theta) * h2
        ham = TwoLocalHamiltonian.from_observable(dims, direction)
        point = ground_marginal(ham, k, method=method)
        rho = point.marginal.entries
        out[j] = (theta, np.real(np.trace(rho @ h1)), np.real(np.trace(rho @ h2)))
    return out


def separable_projection(
    h1: np.ndarray,
    h2: np.ndarray,
    dims: Dims,
    n_samples: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """(tr(rho h1), tr(rho h2)) over sampled separable pure product states."""
    from .sampling import random_pure_product

    out = np.empty((n_samples, 2))
    for i in range(n_samples):
        rho = random_pure_product(dims, rng).density().entries
        out[i] = (np.real(np.trace(rho @ h1)), np.real(np.trace(rho @ h2)))
    return out


def _symmetrizer_isometry(d: int, k: int) -> np.ndarray:
    """Embedding of the occupation basis into (C^d)^(x k); test helper."""
    from itertools import permutations
    from math import factorial

    occs, _ = _occupations(d, k)
    v = np.zeros((d**k, len(occs)))
    for j, n in enumerate(occs):
        levels = [p for p in range(d) for _ in range(n[p])]
        coeff = np.sqrt(np.prod([factorial(c) for c in n]) / factorial(k))
        seen = set()
        for arr in permutations(levels):
            if arr in seen:
                continue
            seen.add(arr)
            idx = 0
            for level in arr:
                idx = idx * d + level
            v[idx, j] = coeff
    return v
