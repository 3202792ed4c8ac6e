"""Seeded random generation of states and labeled datasets.

Random full-rank density matrices are drawn from the product measure
(Haar unitary) x (Dirichlet spectrum), with the Dirichlet density
proportional to prod_i d_i^(-lam); that corresponds to a symmetric
Dirichlet with concentration a = 1 - lam per coordinate, sampled through
normalized Gamma draws.  At lam = 1/2 roughly 35% of two-qubit draws and
2.2% of two-qutrit draws are PPT.

Every sampler takes an explicit numpy Generator, so identical seeds give
bit-identical outputs.  Independent parallel streams should be derived
with Generator.spawn.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    CriterionInsufficientError,
    DimensionMismatchError,
    InvariantViolationError,
    MissingAlphaError,
)
from .qstate import DensityMatrix, Dims, featurize_entries, is_ppt, pure_product_feature

#: Separable / entangled label values used throughout the package.
LABEL_SEPARABLE = -1
LABEL_ENTANGLED = 1


def make_rng(seed) -> np.random.Generator:
    """A freshly seeded 64-bit PCG64 generator."""
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class SamplerConfig:
    """Dimensions, Dirichlet exponent, and seed for random-state generation."""

    dims: Dims
    dirichlet_exponent: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.dirichlet_exponent < 1.0:
            raise InvariantViolationError(
                f"dirichlet exponent must lie in (0, 1), got {self.dirichlet_exponent}"
            )


class LabelSource(enum.Enum):
    PPT = "ppt"
    HULL_ORACLE = "hull_oracle"


@dataclass
class LabeledDataset:
    """Feature vectors with optional hull-distance column and +-1 labels."""

    dims: Dims
    coords: np.ndarray  # (n, feature_dim)
    labels: np.ndarray  # (n,) int8 in {-1, +1}
    alpha: Optional[np.ndarray] = None  # (n,) float, filled by cha.extend_dataset
    label_source: LabelSource = LabelSource.PPT

    def __post_init__(self):
        self.coords = np.ascontiguousarray(self.coords, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int8)
        if self.coords.ndim != 2 or self.coords.shape[1] != self.dims.feature_dim:
            raise DimensionMismatchError(
                f"coords must be (n, {self.dims.feature_dim}), got {self.coords.shape}"
            )
        if self.labels.shape != (self.coords.shape[0],):
            raise DimensionMismatchError("labels length must match coords rows")
        if self.labels.size and not np.all(np.isin(self.labels, (-1, 1))):
            raise InvariantViolationError("labels must be -1 (separable) or +1 (entangled)")
        if self.alpha is not None:
            self.alpha = np.asarray(self.alpha, dtype=float)
            if self.alpha.shape != (self.coords.shape[0],):
                raise DimensionMismatchError("alpha length must match coords rows")

    def __len__(self) -> int:
        return self.coords.shape[0]

    @property
    def has_alpha(self) -> bool:
        return self.alpha is not None

    def with_alpha(self, alpha: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.dims, self.coords, self.labels, alpha, self.label_source)

    def subset(self, idx) -> "LabeledDataset":
        a = self.alpha[idx] if self.alpha is not None else None
        return LabeledDataset(self.dims, self.coords[idx], self.labels[idx], a, self.label_source)

    def extended_matrix(self) -> np.ndarray:
        """(n, feature_dim + 1) matrix with the alpha column appended last."""
        if self.alpha is None:
            raise MissingAlphaError("dataset has no alpha column; run cha.extend_dataset")
        return np.hstack([self.coords, self.alpha[:, None]])


@dataclass(frozen=True)
class ProductStateSample:
    """A sampled separable pure state |a><a| (x) |b><b| with its feature vector."""

    dims: Dims
    ket_a: np.ndarray
    ket_b: np.ndarray
    feature: np.ndarray

    def density(self) -> DensityMatrix:
        psi = np.kron(self.ket_a, self.ket_b)
        return DensityMatrix(self.dims, np.outer(psi, psi.conj()))


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed U(n) via QR of a complex Ginibre matrix.

    The R-diagonal phase correction makes the QR factorization unique and
    the resulting Q exactly Haar.
    """
    if n < 1:
        raise InvariantViolationError(f"dimension must be >= 1, got {n}")
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_ket(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform point on the unit sphere of C^n (normalized complex Gaussian)."""
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def dirichlet_spectrum(n: int, lam: float, rng: np.random.Generator) -> np.ndarray:
    """Simplex point with density ~ prod d_i^(-lam), via normalized Gamma(1-lam)."""
    if not 0.0 < lam < 1.0:
        raise InvariantViolationError(f"lambda must lie in (0, 1), got {lam}")
    while True:
        g = rng.gamma(1.0 - lam, size=n)
        s = g.sum()
        if s > 0.0:  # guards against the (measure-zero) all-underflow draw
            return g / s


def random_density(cfg: SamplerConfig, rng: np.random.Generator) -> DensityMatrix:
    """Full-rank random state U diag(d) U^dag under the Haar x Dirichlet measure."""
    n = cfg.dims.n
    u = haar_unitary(n, rng)
    d = dirichlet_spectrum(n, cfg.dirichlet_exponent, rng)
    mat = (u * d) @ u.conj().T
    mat = 0.5 * (mat + mat.conj().T)  # kill last-ulp asymmetry from the matmul
    return DensityMatrix(cfg.dims, mat)


def random_pure_product(dims: Dims, rng: np.random.Generator) -> ProductStateSample:
    """Haar-uniform |psi_A> |psi_B>, returned with its feature coordinates."""
    ket_a = random_ket(dims.d_a, rng)
    ket_b = random_ket(dims.d_b, rng)
    feature = pure_product_feature(dims, ket_a, ket_b)
    return ProductStateSample(dims, ket_a, ket_b, feature)


def sample_ppt_states(cfg: SamplerConfig, count: int, rng: np.random.Generator):
    """Exactly `count` draws of random_density conditioned on a positive partial transpose."""
    if count < 1:
        raise InvariantViolationError(f"count must be >= 1, got {count}")
    out = []
    while len(out) < count:
        rho = random_density(cfg, rng)
        if is_ppt(rho):
            out.append(rho)
    return out


def split_dataset(
    ds: LabeledDataset, train_fraction: float, rng: np.random.Generator
) -> tuple["LabeledDataset", "LabeledDataset"]:
    """Seeded shuffle split into (train, test)."""
    if not 0.0 < train_fraction < 1.0:
        raise InvariantViolationError("train fraction must lie strictly in (0, 1)")
    perm = rng.permutation(len(ds))
    cut = int(round(train_fraction * len(ds)))
    return ds.subset(perm[:cut]), ds.subset(perm[cut:])


def build_dataset(
    cfg: SamplerConfig,
    count: int,
    labeler: LabelSource,
    rng: np.random.Generator,
    *,
    hull=None,
    ppt_only: Optional[bool] = None,
    workers: int = 1,
) -> LabeledDataset:
    """Sample `count` states and label them separable (-1) or entangled (+1).

    With the PPT labeler (valid only for d_a*d_b <= 6, where PPT is exact)
    states come straight from the random-density measure.  With a hull
    oracle the default follows the two-qutrit protocol: draw PPT states by
    rejection and label each by hull membership (alpha >= 1 -> separable).
    The alpha column is left unfilled either way; cha.extend_dataset adds it.
    """
    dims = cfg.dims
    if labeler is LabelSource.PPT:
        if dims.n > 6:
            raise CriterionInsufficientError(
                f"the PPT criterion is only decisive for d_a*d_b <= 6, got {dims.n}"
            )
        if ppt_only is None:
            ppt_only = False
    else:
        if hull is None:
            raise InvariantViolationError("hull oracle labeling requires a reference hull")
        if ppt_only is None:
            ppt_only = True

    feats = np.empty((count, dims.feature_dim))
    states = []
    for i in range(count):
        while True:
            rho = random_density(cfg, rng)
            if not ppt_only or is_ppt(rho):
                break
        states.append(rho)
        feats[i] = featurize_entries(dims, rho.entries)

    if labeler is LabelSource.PPT:
        labels = np.array(
            [LABEL_SEPARABLE if is_ppt(r) else LABEL_ENTANGLED for r in states],
            dtype=np.int8,
        )
    else:
        from .cha import alpha_batch

        a = alpha_batch(hull, feats, workers=workers)
        labels = np.where(a >= 1.0, LABEL_SEPARABLE, LABEL_ENTANGLED).astype(np.int8)

    return LabeledDataset(dims, feats, labels, None, labeler)
