"""The norm-constrained interpolation problem and its (Z1, Z2) <-> (H, F) bijection.

A solution is an upper triangular ``H`` whose columns are contractions and
which satisfies, for every ``k``,

    H_{k,k} | F_k = omega_{k,1},     H_{j,k} | F_k = H_{j,k-1} omega_{k,2}   (j < k).

``omega_k`` is stored in ``F_k`` coordinates: it is a ``(dim Y_k + dim U_{k-1}) x r_k``
matrix acting on the coefficient vector with respect to the orthonormal basis
of ``F_k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .core import (
    DEFAULT_TOL,
    BlockMatrix,
    BlockSpace,
    Check,
    Subspace,
    Tolerance,
    Window,
    column_gram,
    is_column_contractive,
    min_eigenvalue,
    neumann_inverse,
    op_norm,
    spectral_norm,
)
from .errors import DimensionMismatch, InterpolationError, InvalidData, NotContractive

__all__ = [
    "InterpolationData",
    "StructuredData",
    "ZPair",
    "CompletionInstance4x4",
    "validate_data",
    "build_structured",
    "check_interpolation",
    "check_zpair",
    "construct",
    "recover_zpair",
    "canonical_zpair",
    "central_solution",
    "check_F_interpolation",
    "majorant_margin",
    "embed_completion_4x4",
    "extract_completion",
]


@dataclass(frozen=True)
class InterpolationData:
    """Spaces ``U_k``, ``Y_k``, subspaces ``F_k`` and contractions ``omega_k``."""

    U: BlockSpace
    Y: BlockSpace
    F: Tuple[Subspace, ...]
    omega: Tuple[np.ndarray, ...]

    def __post_init__(self):
        if self.U.window != self.Y.window:
            raise DimensionMismatch("U and Y must share a window")
        w = self.U.window
        F = tuple(f if isinstance(f, Subspace) else Subspace(f) for f in self.F)
        om = tuple(np.array(o, dtype=complex) for o in self.omega)
        if len(F) != len(w) or len(om) != len(w):
            raise DimensionMismatch("one subspace and one omega per window index required")
        for k, f, o in zip(w, F, om):
            if f.ambient_dim != self.U.dim(k):
                raise DimensionMismatch(f"F_{k} lives in dimension {f.ambient_dim}, U_{k} has {self.U.dim(k)}")
            shape = (self.Y.dim(k) + self.U.dim(k - 1), f.rank)
            if o.shape != shape:
                raise DimensionMismatch(f"omega_{k} has shape {o.shape}, expected {shape}")
            o.setflags(write=False)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "omega", om)

    @classmethod
    def from_lists(cls, lo: int, u_dims: Sequence[int], y_dims: Sequence[int], F_bases, omegas):
        return cls(BlockSpace.from_dims(lo, u_dims), BlockSpace.from_dims(lo, y_dims), tuple(F_bases), tuple(omegas))

    @property
    def window(self) -> Window:
        return self.U.window

    def _i(self, k):
        return k - self.window.lo

    def basis(self, k: int) -> np.ndarray:
        if k not in self.window:
            return np.zeros((0, 0), dtype=complex)
        return self.F[self._i(k)].basis

    def rank(self, k: int) -> int:
        return self.F[self._i(k)].rank if k in self.window else 0

    def omega1(self, k: int) -> np.ndarray:
        return self.omega[self._i(k)][: self.Y.dim(k)]

    def omega2(self, k: int) -> np.ndarray:
        return self.omega[self._i(k)][self.Y.dim(k):]

    @property
    def Fspace(self) -> BlockSpace:
        return BlockSpace(self.window, tuple(f.rank for f in self.F))


@dataclass(frozen=True)
class StructuredData:
    E: BlockMatrix
    Omega1: BlockMatrix
    Omega2: BlockMatrix


@dataclass(frozen=True)
class ZPair:
    Z1: BlockMatrix
    Z2: BlockMatrix

    def stacked(self) -> np.ndarray:
        return np.vstack([self.Z1.dense(), self.Z2.dense()])


def validate_data(data: InterpolationData, tol: Tolerance = DEFAULT_TOL) -> Check:
    """Check orthonormality of the ``F_k`` bases and contractivity of every ``omega_k``."""
    res = {}
    for k, f, o in zip(data.window, data.F, data.omega):
        orth = f.orthonormality_residual()
        if orth > tol.eq_tol:
            raise InvalidData(f"F_{k} basis is not orthonormal (residual {orth:.3e})", index=k)
        sv = np.linalg.svd(o, compute_uv=False) if o.size else np.zeros(0)
        norm = float(sv.max()) if sv.size else 0.0
        if norm > 1 + tol.psd_tol:
            raise NotContractive(k, norm, "omega")
        res[f"omega_norm[{k}]"] = norm
        res[f"omega_sv[{k}]"] = [float(s) for s in sv]
    return Check(True, res)


def build_structured(data: InterpolationData) -> StructuredData:
    Fs, U, Y = data.Fspace, data.U, data.Y
    E = BlockMatrix.diagonal(Fs, U, {k: data.basis(k) for k in data.window})
    Om1 = BlockMatrix.diagonal(Fs, Y, {k: data.omega1(k) for k in data.window})
    Om2 = BlockMatrix(Fs, U, {(k - 1, k): data.omega2(k) for k in data.window if k - 1 in data.window})
    return StructuredData(E, Om1, Om2)


def _entrywise_interp(H: BlockMatrix, data: InterpolationData):
    out = {}
    for k in data.window:
        b = data.basis(k)
        out[f"diag[{k}]"] = spectral_norm(H.block(k, k) @ b - data.omega1(k))
        om2 = data.omega2(k)
        for j in H.codomain.window:
            if j < k:
                r = H.block(j, k) @ b - H.block(j, k - 1) @ om2
                out[f"({j},{k})"] = spectral_norm(r)
    return out


def check_interpolation(H: BlockMatrix, data: InterpolationData, tol: Tolerance = DEFAULT_TOL) -> Check:
    """Evaluate ``H E = Omega1 + H Omega2`` (plus the entrywise conditions).

    Column contractivity is reported in ``flags`` but does not enter the verdict.
    """
    if not (H.domain.compatible(data.U) and H.codomain.compatible(data.Y)):
        raise DimensionMismatch("H does not map U into Y")
    s = build_structured(data)
    resid = op_norm(H @ s.E - s.Omega1 - H @ s.Omega2)
    entry = _entrywise_interp(H, data)
    cc = is_column_contractive(H, tol)
    ok = resid <= tol.eq_tol and H.is_upper
    return Check(
        ok,
        {"interpolation": resid, "column_margin": cc.residuals["margin"], **entry},
        {"upper": H.is_upper, "column_contractive": cc.ok},
    )


def check_zpair(pair: ZPair, data: InterpolationData, tol: Tolerance = DEFAULT_TOL) -> Check:
    s = build_structured(data)
    joint = spectral_norm(pair.stacked())
    r1 = op_norm(pair.Z1 @ s.E - s.Omega1)
    r2 = op_norm(pair.Z2 @ s.E - s.Omega2)
    flags = {
        "Z1_upper": pair.Z1.is_upper,
        "Z2_strictly_upper": pair.Z2.is_strictly_upper,
        "joint_contraction": joint <= 1 + tol.psd_tol,
        "Z1E=Omega1": r1 <= tol.eq_tol,
        "Z2E=Omega2": r2 <= tol.eq_tol,
    }
    return Check(all(flags.values()), {"joint_norm": joint, "Z1E-Omega1": r1, "Z2E-Omega2": r2}, flags)


def construct(pair: ZPair) -> Tuple[BlockMatrix, BlockMatrix]:
    """``H = Z1 (I - Z2)^{-1}`` and ``F = (I - Z2)^{-1}``."""
    F = neumann_inverse(pair.Z2)
    return pair.Z1 @ F, F


def majorant_margin(H: BlockMatrix, F: BlockMatrix) -> float:
    """Smallest eigenvalue of the full section of ``F + F^* - H^*H - I``."""
    gap = F + F.adjoint() - column_gram(H) - BlockMatrix.identity(F.domain)
    return min_eigenvalue(gap.dense())


def _diag_identity_residual(F: BlockMatrix) -> float:
    return max(
        (spectral_norm(F.block(k, k) - np.eye(F.domain.dim(k))) for k in F.domain.window),
        default=0.0,
    )


def recover_zpair(H: BlockMatrix, F: BlockMatrix, tol: Tolerance = DEFAULT_TOL) -> ZPair:
    """Inverse map ``(H, F) -> (H F^{-1}, I - F^{-1})``."""
    if not F.is_upper:
        raise InvalidData("F must be upper triangular")
    dres = _diag_identity_residual(F)
    if dres > tol.eq_tol:
        raise InvalidData(f"diagonal blocks of F differ from identity by {dres:.3e}")
    margin = majorant_margin(H, F)
    if margin < -tol.psd_tol:
        raise InvalidData(f"F + F* >= H*H + I violated (min eigenvalue {margin:.3e})")
    # F = I - N with N strictly upper, so F^{-1} is an exact finite Neumann sum.
    N = -F.strict_upper_part()
    Finv = neumann_inverse(N)
    Z2 = BlockMatrix.identity(F.domain) - Finv
    Z2 = Z2.strict_upper_part()
    return ZPair(H @ Finv, Z2)


def canonical_zpair(data: InterpolationData) -> ZPair:
    """``Z1_{k,k} = omega_{k,1} Pi_{F_k}``, ``Z2_{k-1,k} = omega_{k,2} Pi_{F_k}``."""
    w = data.window
    Z1 = BlockMatrix.diagonal(data.U, data.Y, {k: data.omega1(k) @ data.basis(k).conj().T for k in w})
    Z2 = BlockMatrix(
        data.U,
        data.U,
        {(k - 1, k): data.omega2(k) @ data.basis(k).conj().T for k in w if k - 1 in w},
    )
    return ZPair(Z1, Z2)


def central_solution(data: InterpolationData) -> BlockMatrix:
    """Solution attached to the canonical pair, evaluated by its product formula."""
    w = data.window
    blocks = {}
    for k in w:
        pk = data.basis(k).conj().T
        blocks[(k, k)] = data.omega1(k) @ pk
        if k - 1 in w:
            step = data.omega2(k) @ pk
            for j in range(w.lo, k):
                blocks[(j, k)] = blocks[(j, k - 1)] @ step
    return BlockMatrix(data.U, data.Y, blocks)


def check_F_interpolation(F: BlockMatrix, data: InterpolationData, tol: Tolerance = DEFAULT_TOL) -> Check:
    s = build_structured(data)
    resid = op_norm(F @ s.E - s.E - F @ s.Omega2)
    return Check(resid <= tol.eq_tol, {"F_interpolation": resid})


# --------------------------------------------------------------------
# 4 x 4 completion embedding

_C4_LO, _C4_HI = 1, 6


@dataclass(frozen=True)
class CompletionInstance4x4:
    X_dims: Tuple[int, int, int, int]
    Y_dims: Tuple[int, int, int, int]
    A: Tuple[Tuple[np.ndarray, ...], ...]

    def dense(self) -> np.ndarray:
        return np.block([[np.asarray(b, dtype=complex) for b in row] for row in self.A])

    def slab(self, k: int) -> np.ndarray:
        """Column slab ``[A_{., k}  A_{., k+1}]`` for ``k = 1, 2, 3``."""
        d = self.dense()
        xo = np.concatenate([[0], np.cumsum(self.X_dims)]).astype(int)
        return d[:, xo[k - 1]: xo[k + 1]]

    def slab_norms(self) -> Tuple[float, float, float]:
        return tuple(spectral_norm(self.slab(k)) for k in (1, 2, 3))


def embed_completion_4x4(x_dims: Sequence[int], y_dims: Sequence[int]) -> InterpolationData:
    """Interpolation data on window 1..6 whose solutions are the slab-constrained 4x4 matrices."""
    x1, x2, x3, x4 = (int(d) for d in x_dims)
    y = [int(d) for d in y_dims]
    if len(y) != 4:
        raise DimensionMismatch("four codomain dimensions required")
    u_dims = [0, 0, 0, x1 + x2, x2 + x3, x3 + x4]
    y_full = y + [0, 0]

    def first(a, b):
        return np.vstack([np.eye(a), np.zeros((b, a))])

    def shift(a, b):
        # x (+) 0 in X_a (+) X_b  ->  0 (+) x in X_prev (+) X_a
        return np.vstack([np.zeros((b, a)), np.eye(a)])

    F = [np.zeros((0, 0))] * 3 + [np.zeros((x1 + x2, 0)), first(x2, x3), first(x3, x4)]
    omegas = [np.zeros((y_full[i] + (u_dims[i - 1] if i else 0), F[i].shape[1])) for i in range(4)]
    omegas.append(shift(x2, x1))  # Y_5 = {0}; omega_{5,2} = sigma_5 into U_4 = X_1 (+) X_2
    omegas.append(shift(x3, x2))
    return InterpolationData.from_lists(_C4_LO, u_dims, y_full, F, omegas)


def _x_dims_of(data: InterpolationData):
    x2 = data.rank(5)
    x3 = data.rank(6)
    return data.U.dim(4) - x2, x2, x3, data.U.dim(6) - x3


def extract_completion(H: BlockMatrix, data: InterpolationData, tol: Tolerance = DEFAULT_TOL):
    """Read the 4x4 matrix ``A`` off a solution of the embedded problem.

    Returns ``(instance, overlap_residual)``; the overlap residual measures how
    well the entries shared between neighbouring slab columns agree.
    """
    chk = check_interpolation(H, data, tol)
    if not chk.ok:
        raise InterpolationError(
            f"H does not solve the embedded problem (residual {chk.residuals['interpolation']:.3e})"
        )
    x1, x2, x3, x4 = _x_dims_of(data)
    A = []
    overlap = 0.0
    for i in range(1, 5):
        c4, c5, c6 = H.block(i, 4), H.block(i, 5), H.block(i, 6)
        row = (c4[:, :x1], c4[:, x1:], c5[:, x2:], c6[:, x3:])
        overlap = max(overlap, spectral_norm(c4[:, x1:] - c5[:, :x2]), spectral_norm(c5[:, x2:] - c6[:, :x3]))
        A.append(tuple(np.array(b) for b in row))
    y_dims = tuple(data.Y.dim(i) for i in range(1, 5))
    return CompletionInstance4x4((x1, x2, x3, x4), y_dims, tuple(A)), overlap
