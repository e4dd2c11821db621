"""Random projection operators: Gaussian, subsampled Hadamard, Clarkson-Woodruff.

Each operator is applied to the column-concatenation [y | X] in a single
pass, so the sketched response and design share one realization of the
projection.  The dense k x n matrix is never materialized: the Gaussian
sketch streams over column blocks, the Hadamard sketch runs a fast
Walsh-Hadamard transform, and the Clarkson-Woodruff sketch scatters rows
into hash buckets.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core_model import DataSet
from .errors import DimensionMismatch, DomainError

# column block for the streaming Gaussian application; fixed so that the
# realization is bit-identical whether or not W* is requested
_GAUSS_CHUNK = 1 << 16


class SketchKind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    HADAMARD = "hadamard"
    CLARKSON_WOODRUFF = "clarkson_woodruff"


@dataclass(frozen=True)
class SketchSpec:
    """Description of a k x n random projection: kind, target rows, seed."""

    kind: SketchKind
    k: int
    seed: int

    def __post_init__(self):
        if self.k < 1:
            raise DomainError(f"sketch size k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class SketchedData:
    """Sketched design X_s = S X and response y_s = S y, plus provenance.

    ``W_star`` is the k x k byproduct S S^T, populated only on request; it
    enables the exact generalized-least-squares style inference paths.
    """

    Xs: np.ndarray
    ys: np.ndarray
    spec: SketchSpec
    n: int
    p: int
    W_star: np.ndarray | None = None

    def __post_init__(self):
        k = self.spec.k
        if self.Xs.shape != (k, self.p) or self.ys.shape != (k,):
            raise DimensionMismatch(
                f"sketched shapes {self.Xs.shape}/{self.ys.shape} inconsistent with (k={k}, p={self.p})"
            )
        if self.W_star is not None:
            W = self.W_star
            if W.shape != (k, k):
                raise DimensionMismatch(f"W_star has shape {W.shape}, expected ({k}, {k})")
            if not np.allclose(W, W.T, atol=1e-10 * max(1.0, np.abs(W).max())):
                raise DomainError("W_star is not symmetric")


def derive_seed(root_seed: int, index: int) -> int:
    """Derive the seed for one replicate from a root seed.

    Uses a spawn-key of the splittable counter-based SeedSequence, so any
    subset of replicates can be generated independently and in parallel
    while the whole collection stays reproducible from ``root_seed``.
    """
    ss = np.random.SeedSequence(root_seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


def _concat(data: DataSet) -> np.ndarray:
    return np.column_stack([data.y, data.X])


def _split(B: np.ndarray):
    return np.ascontiguousarray(B[:, 1:]), np.ascontiguousarray(B[:, 0])


def _check_feasible(data: DataSet, spec: SketchSpec, want_w_star: bool) -> None:
    # k <= p cannot support any downstream fit; S S^T is singular with
    # probability 1 when k > n
    if spec.k <= data.p:
        raise DomainError(f"sketch size must exceed p (got k={spec.k}, p={data.p})")
    if want_w_star and spec.k > data.n:
        raise DomainError(f"W_star requires k <= n (got k={spec.k}, n={data.n})")


def apply_gaussian(data: DataSet, spec: SketchSpec, want_w_star: bool = False) -> SketchedData:
    """Apply a Gaussian sketch with i.i.d. N(0, 1/k) entries.

    The projection is generated in fixed column blocks and applied
    immediately, so memory stays O(k * block) and the realization depends
    only on (n, k, seed).
    """
    if spec.kind is not SketchKind.GAUSSIAN:
        raise DomainError(f"spec.kind is {spec.kind}, expected gaussian")
    _check_feasible(data, spec, want_w_star)
    A = _concat(data)
    n, m = A.shape
    k = spec.k
    rng = np.random.default_rng(spec.seed)
    B = np.zeros((k, m))
    W = np.zeros((k, k)) if want_w_star else None
    scale = 1.0 / np.sqrt(k)
    for start in range(0, n, _GAUSS_CHUNK):
        stop = min(start + _GAUSS_CHUNK, n)
        Sc = rng.standard_normal((k, stop - start))
        Sc *= scale
        B += Sc @ A[start:stop]
        if W is not None:
            W += Sc @ Sc.T
    Xs, ys = _split(B)
    return SketchedData(Xs=Xs, ys=ys, spec=spec, n=n, p=data.p, W_star=W)


def _fwht(a: np.ndarray) -> np.ndarray:
    """In-place unnormalized fast Walsh-Hadamard transform along axis 0.

    a.shape[0] must be a power of two.
    """
    n = a.shape[0]
    h = 1
    while h < n:
        b = a.reshape(n // (2 * h), 2, h, -1)
        x = b[:, 0]
        y = b[:, 1]
        x += y
        y *= -2.0
        y += x
        h *= 2
    return a


def _walsh_rows(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Entries H[rows, cols] of the unnormalized Hadamard matrix (natural order)."""
    bits = np.bitwise_count(rows[:, None].astype(np.uint64) & cols[None, :].astype(np.uint64))
    return 1.0 - 2.0 * (bits & 1)


def apply_hadamard(data: DataSet, spec: SketchSpec, want_w_star: bool = False) -> SketchedData:
    """Subsampled randomized Hadamard sketch.

    Rows are zero-padded to the next power of two n', multiplied by random
    signs, transformed by the normalized Walsh-Hadamard transform (1/sqrt(n')),
    and k distinct rows are sampled uniformly; the result is scaled by
    sqrt(n'/k) so that E[S^T S] restricted to the original coordinates is the
    identity.  Runs in O(n' (p+1) log n') time.
    """
    if spec.kind is not SketchKind.HADAMARD:
        raise DomainError(f"spec.kind is {spec.kind}, expected hadamard")
    _check_feasible(data, spec, want_w_star)
    A = _concat(data)
    n, m = A.shape
    k = spec.k
    n_pad = 1 << int(np.ceil(np.log2(n)))
    if k > n_pad:
        raise DomainError(f"hadamard sketch needs k <= padded size (k={k}, n'={n_pad})")
    rng = np.random.default_rng(spec.seed)
    signs = rng.integers(0, 2, n) * 2.0 - 1.0
    idx = rng.choice(n_pad, size=k, replace=False)
    B = np.zeros((n_pad, m))
    B[:n] = A * signs[:, None]
    _fwht(B)
    # combined scaling: (1/sqrt(n')) for the transform, sqrt(n'/k) overall
    out = B[idx] * (1.0 / np.sqrt(k))
    Xs, ys = _split(out)
    W = None
    if want_w_star:
        # rows of S are orthogonal over the padded space: S_full S_full^T = (n'/k) I;
        # subtract the contribution of the padding columns to get S S^T over the
        # n real columns
        W = (n_pad / k) * np.eye(k)
        if n_pad > n:
            pad_cols = np.arange(n, n_pad)
            Hp = _walsh_rows(idx, pad_cols) / np.sqrt(k)
            W -= Hp @ Hp.T
    return SketchedData(Xs=Xs, ys=ys, spec=spec, n=n, p=data.p, W_star=W)


def apply_clarkson_woodruff(data: DataSet, spec: SketchSpec, want_w_star: bool = False) -> SketchedData:
    """Clarkson-Woodruff (CountSketch) projection.

    Each input row i is assigned a uniform bucket h(i) in {1..k} and a sign
    s(i); output row b is the signed sum of the rows hashed to it.  A single
    streaming pass, O(n (p+1)) time.  Left unscaled: one +-1 per column of S
    already gives E[S^T S] = I exactly.
    """
    if spec.kind is not SketchKind.CLARKSON_WOODRUFF:
        raise DomainError(f"spec.kind is {spec.kind}, expected clarkson_woodruff")
    _check_feasible(data, spec, want_w_star)
    A = _concat(data)
    n, m = A.shape
    k = spec.k
    rng = np.random.default_rng(spec.seed)
    buckets = rng.integers(0, k, n)
    signs = rng.integers(0, 2, n) * 2.0 - 1.0
    signed = A * signs[:, None]
    B = np.empty((k, m))
    for j in range(m):
        B[:, j] = np.bincount(buckets, weights=signed[:, j], minlength=k)
    Xs, ys = _split(B)
    W = None
    if want_w_star:
        # S rows are disjoint +-1 indicators, so S S^T is diagonal with the
        # bucket occupancy counts
        W = np.diag(np.bincount(buckets, minlength=k).astype(float))
    return SketchedData(Xs=Xs, ys=ys, spec=spec, n=n, p=data.p, W_star=W)


_APPLIERS = {
    SketchKind.GAUSSIAN: apply_gaussian,
    SketchKind.HADAMARD: apply_hadamard,
    SketchKind.CLARKSON_WOODRUFF: apply_clarkson_woodruff,
}


def apply_sketch(data: DataSet, spec: SketchSpec, want_w_star: bool = False) -> SketchedData:
    """Dispatch to the operator named by ``spec.kind``."""
    return _APPLIERS[spec.kind](data, spec, want_w_star)
