"""Windowed block operator matrices.

Doubly infinite operator matrices are represented on a finite index
window; every space is zero-dimensional outside it. Blocks are stored
sparsely (absent means zero) and every stored block is a dense complex
array. All objects are immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, Mapping, Optional, Tuple

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidRange,
    NotHermitian,
    NotPSD,
    NotSquare,
    NotUpperTriangular,
    SingularBlock,
)

__all__ = [
    "Window",
    "BlockSpace",
    "BlockMatrix",
    "Subspace",
    "Tolerance",
    "Check",
    "finite_section",
    "op_norm",
    "multiply",
    "adjoint",
    "invert_upper",
    "neumann_inverse",
    "is_nonnegative",
    "min_eigenvalue",
    "real_part",
    "column_operator",
    "is_column_contractive",
    "column_gram",
    "hermitian_sqrt_psd",
    "range_subspace",
    "spectral_norm",
    "max_block_residual",
]

DTYPE = np.complex128


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=DTYPE)
    arr.setflags(write=False)
    return arr


def spectral_norm(a) -> float:
    """Largest singular value; 0 for empty arrays."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


@dataclass(frozen=True)
class Tolerance:
    rank_tol: float = 1e-10
    psd_tol: float = 1e-10
    eq_tol: float = 1e-8

    def __post_init__(self):
        for name in ("rank_tol", "psd_tol", "eq_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


DEFAULT_TOL = Tolerance()


@dataclass
class Check:
    """Outcome of a verification: a verdict plus the residuals backing it."""

    ok: bool
    residuals: Dict[str, float] = field(default_factory=dict)
    flags: Dict[str, bool] = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def __bool__(self):
        return bool(self.ok)


@dataclass(frozen=True)
class Window:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise InvalidRange(f"window lo={self.lo} exceeds hi={self.hi}")

    def __iter__(self) -> Iterator[int]:
        return iter(range(self.lo, self.hi + 1))

    def __contains__(self, k) -> bool:
        return self.lo <= k <= self.hi

    def __len__(self) -> int:
        return self.hi - self.lo + 1

    def union(self, other: "Window") -> "Window":
        return Window(min(self.lo, other.lo), max(self.hi, other.hi))


@dataclass(frozen=True)
class BlockSpace:
    """A direct sum of finite-dimensional spaces indexed by a window."""

    window: Window
    dims: Tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != len(self.window):
            raise DimensionMismatch(
                f"{len(dims)} dims given for a window of width {len(self.window)}"
            )
        if any(d < 0 for d in dims):
            raise DimensionMismatch("dimensions must be non-negative")
        object.__setattr__(self, "dims", dims)
        offsets = np.concatenate([[0], np.cumsum(dims, dtype=int)]).astype(int)
        object.__setattr__(self, "_offsets", tuple(int(o) for o in offsets))

    @classmethod
    def from_dims(cls, lo: int, dims: Iterable[int]) -> "BlockSpace":
        dims = tuple(dims)
        return cls(Window(lo, lo + len(dims) - 1), dims)

    @classmethod
    def from_map(cls, window: Window, dims: Mapping[int, int]) -> "BlockSpace":
        return cls(window, tuple(dims.get(k, 0) for k in window))

    def dim(self, k: int) -> int:
        if k in self.window:
            return self.dims[k - self.window.lo]
        return 0

    @property
    def total(self) -> int:
        return self._offsets[-1]

    def offset(self, k: int) -> int:
        """Start of block ``k`` in the flattened full-window vector."""
        if k < self.window.lo:
            return 0
        if k > self.window.hi:
            return self.total
        return self._offsets[k - self.window.lo]

    def slice(self, k: int) -> slice:
        o = self.offset(k)
        return slice(o, o + self.dim(k))

    def range_slice(self, j: int, k: int) -> slice:
        """Flattened coordinates of blocks ``j..k``."""
        return slice(self.offset(j), self.offset(k) + self.dim(k))

    def compatible(self, other: "BlockSpace") -> bool:
        w = self.window.union(other.window)
        return all(self.dim(k) == other.dim(k) for k in w)

    def support(self) -> Iterator[int]:
        return (k for k in self.window if self.dim(k) > 0)


class BlockMatrix:
    """Block operator matrix ``[M_{j,k}]`` mapping ``domain`` into ``codomain``.

    Block ``(j, k)`` maps the ``k``-th component of the domain into the
    ``j``-th component of the codomain. Blocks that are absent, of zero size
    or exactly zero are not stored.
    """

    __slots__ = ("domain", "codomain", "_blocks", "_dense")

    def __init__(self, domain: BlockSpace, codomain: BlockSpace, blocks: Optional[Mapping] = None):
        self.domain = domain
        self.codomain = codomain
        store = {}
        for (j, k), b in (blocks or {}).items():
            j, k = int(j), int(k)
            b = np.asarray(b, dtype=DTYPE)
            shape = (codomain.dim(j), domain.dim(k))
            if b.shape != shape:
                raise DimensionMismatch(f"block ({j},{k}) has shape {b.shape}, expected {shape}")
            if b.size == 0 or not b.any():
                continue
            store[(j, k)] = _frozen(b)
        self._blocks = store
        self._dense = None

    # construction -----------------------------------------------------
    @classmethod
    def zeros(cls, domain: BlockSpace, codomain: Optional[BlockSpace] = None) -> "BlockMatrix":
        return cls(domain, codomain if codomain is not None else domain, {})

    @classmethod
    def identity(cls, space: BlockSpace) -> "BlockMatrix":
        return cls(space, space, {(k, k): np.eye(space.dim(k)) for k in space.window})

    @classmethod
    def diagonal(cls, domain, codomain, diag: Mapping[int, np.ndarray]) -> "BlockMatrix":
        return cls(domain, codomain, {(k, k): b for k, b in diag.items()})

    @classmethod
    def from_dense(cls, a, domain: BlockSpace, codomain: BlockSpace) -> "BlockMatrix":
        a = np.asarray(a, dtype=DTYPE)
        if a.shape != (codomain.total, domain.total):
            raise DimensionMismatch(f"dense shape {a.shape} != {(codomain.total, domain.total)}")
        blocks = {}
        for j in codomain.support():
            for k in domain.support():
                blocks[(j, k)] = a[codomain.slice(j), domain.slice(k)]
        return cls(domain, codomain, blocks)

    # access -----------------------------------------------------------
    def block(self, j: int, k: int) -> np.ndarray:
        b = self._blocks.get((j, k))
        if b is None:
            return np.zeros((self.codomain.dim(j), self.domain.dim(k)), dtype=DTYPE)
        return b

    @property
    def blocks(self) -> Dict[Tuple[int, int], np.ndarray]:
        return dict(self._blocks)

    def support(self):
        return sorted(self._blocks)

    def dense(self) -> np.ndarray:
        if self._dense is None:
            out = np.zeros((self.codomain.total, self.domain.total), dtype=DTYPE)
            for (j, k), b in self._blocks.items():
                out[self.codomain.slice(j), self.domain.slice(k)] = b
            out.setflags(write=False)
            self._dense = out
        return self._dense

    @property
    def is_square(self) -> bool:
        return self.domain.compatible(self.codomain)

    @property
    def is_upper(self) -> bool:
        return all(j <= k for j, k in self._blocks)

    @property
    def is_strictly_upper(self) -> bool:
        return all(j < k for j, k in self._blocks)

    @property
    def is_diagonal(self) -> bool:
        return all(j == k for j, k in self._blocks)

    @property
    def triangularity(self) -> str:
        if self.is_strictly_upper:
            return "strictly-upper"
        if self.is_diagonal:
            return "diagonal"
        if self.is_upper:
            return "upper"
        return "general"

    # algebra ----------------------------------------------------------
    def _check_same_shape(self, other):
        if not (self.domain.compatible(other.domain) and self.codomain.compatible(other.codomain)):
            raise DimensionMismatch("block structures differ")

    def __add__(self, other: "BlockMatrix") -> "BlockMatrix":
        self._check_same_shape(other)
        blocks = dict(self._blocks)
        for key, b in other._blocks.items():
            blocks[key] = blocks[key] + b if key in blocks else b
        return BlockMatrix(self.domain, self.codomain, blocks)

    def __neg__(self) -> "BlockMatrix":
        return BlockMatrix(self.domain, self.codomain, {k: -b for k, b in self._blocks.items()})

    def __sub__(self, other: "BlockMatrix") -> "BlockMatrix":
        return self + (-other)

    def __mul__(self, scalar) -> "BlockMatrix":
        return BlockMatrix(self.domain, self.codomain, {k: scalar * b for k, b in self._blocks.items()})

    __rmul__ = __mul__

    def __matmul__(self, other: "BlockMatrix") -> "BlockMatrix":
        return multiply(self, other)

    def adjoint(self) -> "BlockMatrix":
        return BlockMatrix(
            self.codomain, self.domain, {(k, j): b.conj().T for (j, k), b in self._blocks.items()}
        )

    @property
    def H(self) -> "BlockMatrix":
        return self.adjoint()

    def strict_upper_part(self) -> "BlockMatrix":
        return BlockMatrix(self.domain, self.codomain, {(j, k): b for (j, k), b in self._blocks.items() if j < k})

    def diagonal_part(self) -> "BlockMatrix":
        return BlockMatrix(self.domain, self.codomain, {(j, k): b for (j, k), b in self._blocks.items() if j == k})

    def section(self, j: int, k: int) -> np.ndarray:
        return finite_section(self, j, k)

    def __repr__(self):
        return (
            f"BlockMatrix({self.codomain.dims}<-{self.domain.dims}, "
            f"window={self.domain.window.lo}..{self.domain.window.hi}, {self.triangularity}, "
            f"{len(self._blocks)} blocks)"
        )


def max_block_residual(a: BlockMatrix, b: BlockMatrix) -> float:
    """Largest spectral norm of a blockwise difference."""
    diff = a - b
    return max((spectral_norm(blk) for blk in diff._blocks.values()), default=0.0)


@dataclass(frozen=True)
class Subspace:
    """Subspace of ``C^n`` given by an orthonormal basis (``n x r``)."""

    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=DTYPE)
        if b.ndim != 2:
            raise DimensionMismatch("subspace basis must be two-dimensional")
        object.__setattr__(self, "basis", _frozen(b))

    @classmethod
    def full(cls, n: int) -> "Subspace":
        return cls(np.eye(n))

    @classmethod
    def zero(cls, n: int) -> "Subspace":
        return cls(np.zeros((n, 0)))

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    def orthonormality_residual(self) -> float:
        return spectral_norm(self.basis.conj().T @ self.basis - np.eye(self.rank))

    def complement(self, tol: Tolerance = DEFAULT_TOL) -> "Subspace":
        p = np.eye(self.ambient_dim) - self.projector
        return range_subspace(p, tol)


# --------------------------------------------------------------------
# operations


def finite_section(M: BlockMatrix, j: int, k: int) -> np.ndarray:
    """Dense assembly of the blocks with row and column indices in ``j..k``."""
    if j > k:
        raise InvalidRange(f"section ({j},{k}) has j > k")
    rows = M.codomain.range_slice(j, k)
    cols = M.domain.range_slice(j, k)
    return np.array(M.dense()[rows, cols])


def op_norm(M: BlockMatrix) -> float:
    # Principal sections never exceed the full-window section in norm.
    return spectral_norm(M.dense())


def multiply(A: BlockMatrix, B: BlockMatrix) -> BlockMatrix:
    if not A.domain.compatible(B.codomain):
        raise DimensionMismatch(f"cannot multiply: inner dims {A.domain.dims} vs {B.codomain.dims}")
    by_row: Dict[int, list] = {}
    for (m, k), b in B._blocks.items():
        by_row.setdefault(m, []).append((k, b))
    out: Dict[Tuple[int, int], np.ndarray] = {}
    for (j, m), a in A._blocks.items():
        for k, b in by_row.get(m, ()):
            prod = a @ b
            if (j, k) in out:
                out[(j, k)] = out[(j, k)] + prod
            else:
                out[(j, k)] = prod
    return BlockMatrix(B.domain, A.codomain, out)


def adjoint(M: BlockMatrix) -> BlockMatrix:
    return M.adjoint()


def _require_square(M: BlockMatrix):
    if not M.is_square:
        raise NotSquare(f"domain {M.domain.dims} and codomain {M.codomain.dims} differ")


def invert_upper(M: BlockMatrix, tol: Tolerance = DEFAULT_TOL) -> BlockMatrix:
    """Inverse of an upper triangular block matrix by block back-substitution."""
    _require_square(M)
    if not M.is_upper:
        raise NotUpperTriangular("invert_upper needs an upper triangular matrix")
    space = M.domain
    idx = list(space.support())
    dinv = {}
    for k in idx:
        d = M.block(k, k)
        s = np.linalg.svd(d, compute_uv=False)
        if s.min() <= tol.rank_tol:
            raise SingularBlock(k, float(s.min()))
        dinv[k] = np.linalg.inv(d)
    X: Dict[Tuple[int, int], np.ndarray] = {}
    for k in idx:
        X[(k, k)] = dinv[k]
        for j in reversed([i for i in idx if i < k]):
            acc = np.zeros((space.dim(j), space.dim(k)), dtype=DTYPE)
            for m in idx:
                if j < m <= k and (j, m) in M._blocks:
                    acc = acc + M._blocks[(j, m)] @ X[(m, k)]
            X[(j, k)] = -dinv[j] @ acc
    return BlockMatrix(space, space, X)


def neumann_inverse(N: BlockMatrix) -> BlockMatrix:
    """``(I - N)^{-1}`` for strictly upper ``N`` as the finite sum ``I + N + N^2 + ...``."""
    _require_square(N)
    if not N.is_strictly_upper:
        raise NotUpperTriangular("neumann_inverse needs a strictly upper triangular matrix")
    result = BlockMatrix.identity(N.domain)
    power = N
    while power.support():
        result = result + power
        power = power @ N
    return result


def _hermitian_residual(a: np.ndarray) -> float:
    return spectral_norm(a - a.conj().T)


def min_eigenvalue(a: np.ndarray) -> float:
    """Smallest eigenvalue of the hermitian part of ``a`` (+inf when empty)."""
    a = np.asarray(a)
    if a.size == 0:
        return float("inf")
    return float(np.linalg.eigvalsh(0.5 * (a + a.conj().T))[0])


def is_nonnegative(M: BlockMatrix, tol: Tolerance = DEFAULT_TOL) -> bool:
    _require_square(M)
    d = M.dense()
    if _hermitian_residual(d) > tol.eq_tol:
        raise NotHermitian(f"hermitian residual {_hermitian_residual(d):.3e}")
    return min_eigenvalue(d) >= -tol.psd_tol


def real_part(M: BlockMatrix) -> BlockMatrix:
    _require_square(M)
    return 0.5 * (M + M.adjoint())


def column_operator(H: BlockMatrix, k: int) -> np.ndarray:
    """Column ``k`` of ``H`` stacked over the codomain: a map ``U_k -> Y``."""
    if k not in H.domain.window:
        raise InvalidRange(f"column {k} outside window {H.domain.window}")
    return np.array(H.dense()[:, H.domain.slice(k)])


def is_column_contractive(H: BlockMatrix, tol: Tolerance = DEFAULT_TOL) -> Check:
    norms = {}
    for k in H.domain.window:
        norms[f"column_norm[{k}]"] = spectral_norm(column_operator(H, k))
    ok = all(v <= 1 + tol.psd_tol for v in norms.values())
    margin = min((1 - v for v in norms.values()), default=1.0)
    return Check(ok, {**norms, "margin": margin})


def column_gram(H: BlockMatrix) -> BlockMatrix:
    """The hermitian matrix ``[(H_j)^* H_k]`` over the domain of ``H``."""
    d = H.dense()
    return BlockMatrix.from_dense(d.conj().T @ d, H.domain, H.domain)


def hermitian_sqrt_psd(M, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Principal square root of a (numerically) PSD hermitian matrix.

    Eigenvalues inside ``[-psd_tol, psd_tol]`` are treated as exact zeros so
    that roundoff does not create spurious range directions; anything below
    ``-psd_tol`` raises :class:`NotPSD`.
    """
    m = np.asarray(M, dtype=DTYPE)
    if m.size == 0:
        return np.zeros(m.shape, dtype=DTYPE)
    if _hermitian_residual(m) > tol.eq_tol:
        raise NotHermitian(f"hermitian residual {_hermitian_residual(m):.3e}")
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    if w[0] < -tol.psd_tol:
        raise NotPSD(float(w[0]))
    w = np.where(w <= tol.psd_tol, 0.0, w)
    return (v * np.sqrt(w)) @ v.conj().T


def range_subspace(M, tol: Tolerance = DEFAULT_TOL) -> Subspace:
    m = np.asarray(M, dtype=DTYPE)
    if m.size == 0:
        return Subspace.zero(m.shape[0])
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    return Subspace(u[:, s > tol.rank_tol])
