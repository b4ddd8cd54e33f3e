"""Cayley transforms, majorants of ``H^*H`` and the state space example.

Defect-space objects (``nabla``, ``C``, ``K``) live in defect coordinates:
for column ``k`` the defect space of ``H_k`` is represented by an orthonormal
basis ``Q_k`` of the range of ``D_{H_k}``, ``Pi_k = Q_k^*`` is the coordinate
map and ``nabla_k = Q_k^* D_{H_k} Q_k`` is invertible.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from .core import (
    DEFAULT_TOL,
    BlockMatrix,
    BlockSpace,
    Check,
    Subspace,
    Tolerance,
    Window,
    column_gram,
    column_operator,
    hermitian_sqrt_psd,
    invert_upper,
    is_column_contractive,
    min_eigenvalue,
    neumann_inverse,
    op_norm,
    range_subspace,
    real_part,
    spectral_norm,
)
from .errors import DimensionMismatch, InvalidData, NotContractive, NotPSD, NotUpperTriangular

__all__ = [
    "DefectData",
    "StateSpaceSystem",
    "defect_data",
    "cayley",
    "inverse_cayley",
    "build_V",
    "build_N",
    "build_Ntilde",
    "harmonic_majorant",
    "check_harmonic_majorant",
    "recover_C_from_W",
    "solve_problem2",
    "lyapunov_solve",
    "state_space_gram",
    "state_space_to_H",
    "truncation_tail_bound",
    "restrict_gram",
]


@dataclass(frozen=True)
class DefectData:
    D: Tuple[np.ndarray, ...]
    spaces: Tuple[Subspace, ...]
    nabla: BlockMatrix
    pi: BlockMatrix

    @property
    def space(self) -> BlockSpace:
        """The direct sum of defect spaces, in coordinates."""
        return self.nabla.domain

    @property
    def is_trivial(self) -> bool:
        return self.space.total == 0

    def basis(self, k: int) -> np.ndarray:
        return self.spaces[k - self.space.window.lo].basis

    def defect(self, k: int) -> np.ndarray:
        return self.D[k - self.space.window.lo]


def defect_data(H: BlockMatrix, tol: Tolerance = DEFAULT_TOL) -> DefectData:
    U = H.domain
    cc = is_column_contractive(H, tol)
    if not cc.ok:
        k, norm = max(
            ((k, cc.residuals[f"column_norm[{k}]"]) for k in U.window), key=lambda t: t[1]
        )
        raise NotContractive(k, norm, "column")
    Ds, spaces = [], []
    for k in U.window:
        hk = column_operator(H, k)
        D = hermitian_sqrt_psd(np.eye(U.dim(k)) - hk.conj().T @ hk, tol)
        Ds.append(D)
        spaces.append(range_subspace(D, tol))
    DH = BlockSpace(U.window, tuple(s.rank for s in spaces))
    nabla = BlockMatrix.diagonal(
        DH, DH, {k: s.basis.conj().T @ D @ s.basis for k, D, s in zip(U.window, Ds, spaces)}
    )
    pi = BlockMatrix.diagonal(U, DH, {k: s.basis.conj().T for k, s in zip(U.window, spaces)})
    return DefectData(tuple(Ds), tuple(spaces), nabla, pi)


def cayley(C: BlockMatrix, tol: Tolerance = DEFAULT_TOL) -> BlockMatrix:
    """``K = (I + C)(I - C)^{-1}`` for a strictly upper contraction ``C``."""
    if not C.is_strictly_upper:
        raise NotUpperTriangular("Cayley transform needs a strictly upper triangular C")
    nrm = op_norm(C)
    if nrm > 1 + tol.psd_tol:
        raise NotContractive(None, nrm, "C")
    I = BlockMatrix.identity(C.domain)
    return (I + C) @ neumann_inverse(C)


def _unit_diagonal_residual(M: BlockMatrix) -> float:
    return max(
        (spectral_norm(M.block(k, k) - np.eye(M.domain.dim(k))) for k in M.domain.window),
        default=0.0,
    )


def inverse_cayley(K: BlockMatrix, tol: Tolerance = DEFAULT_TOL) -> BlockMatrix:
    """``C = (K - I)(K + I)^{-1}`` for positive real ``K`` with unit diagonal."""
    if not K.is_upper:
        raise NotUpperTriangular("K must be upper triangular")
    dres = _unit_diagonal_residual(K)
    if dres > tol.eq_tol:
        raise InvalidData(f"diagonal of K differs from identity by {dres:.3e}")
    lam = min_eigenvalue(real_part(K).dense())
    if lam < -tol.psd_tol:
        raise NotPSD(lam, f"Re K is not non-negative (min eigenvalue {lam:.3e})")
    I = BlockMatrix.identity(K.domain)
    S = K.strict_upper_part()
    # K - I and K + I with the diagonal pinned to its exact value.
    C = S @ invert_upper(2 * I + S, tol)
    return C.strict_upper_part()


def build_V(H: BlockMatrix) -> BlockMatrix:
    G = column_gram(H)
    return BlockMatrix(
        H.domain,
        H.domain,
        {(j, k): (2 * b if j < k else b) for (j, k), b in G.blocks.items() if j <= k},
    )


def build_N(H: BlockMatrix) -> BlockMatrix:
    G = column_gram(H)
    return BlockMatrix(H.domain, H.domain, {(j, k): b for (j, k), b in G.blocks.items() if j <= k})


def build_Ntilde(H: BlockMatrix) -> BlockMatrix:
    G = column_gram(H)
    return BlockMatrix(H.domain, H.domain, {(j, k): b for (j, k), b in G.blocks.items() if j < k})


def _check_C_shape(C: BlockMatrix, dd: DefectData):
    if not (C.domain.compatible(dd.space) and C.codomain.compatible(dd.space)):
        raise DimensionMismatch(
            f"C must act on the defect spaces {dd.space.dims}, got {C.codomain.dims}<-{C.domain.dims}"
        )


def harmonic_majorant(
    H: BlockMatrix, C: BlockMatrix, tol: Tolerance = DEFAULT_TOL, defects: Optional[DefectData] = None
) -> BlockMatrix:
    """``W = V + Pi^* nabla K nabla Pi`` with ``K`` the Cayley transform of ``C``."""
    dd = defects or defect_data(H, tol)
    _check_C_shape(C, dd)
    K = cayley(C, tol)
    lift = dd.pi.adjoint() @ dd.nabla @ K @ dd.nabla @ dd.pi
    return build_V(H) + lift


def check_harmonic_majorant(W: BlockMatrix, H: BlockMatrix, tol: Tolerance = DEFAULT_TOL) -> Check:
    """``Re W >= H^*H`` and ``W_{j,j} = I``."""
    margin = min_eigenvalue((real_part(W) - column_gram(H)).dense())
    dres = _unit_diagonal_residual(W)
    ok = W.is_upper and margin >= -tol.psd_tol and dres <= tol.eq_tol
    return Check(ok, {"psd_margin": margin, "diagonal_residual": dres})


def recover_C_from_W(
    W: BlockMatrix, H: BlockMatrix, tol: Tolerance = DEFAULT_TOL, defects: Optional[DefectData] = None
) -> BlockMatrix:
    """Recover the parameter ``C`` of a harmonic majorant ``W`` of ``H^*H``."""
    dd = defects or defect_data(H, tol)
    if not W.is_upper:
        raise NotUpperTriangular("W must be upper triangular")
    dres = _unit_diagonal_residual(W)
    if dres > tol.eq_tol:
        raise InvalidData(f"diagonal of W differs from identity by {dres:.3e}")
    Lam = W - build_V(H)
    DH = dd.space
    ninv = {k: np.linalg.inv(dd.nabla.block(k, k)) for k in DH.support()}
    blocks = {}
    worst = 0.0
    for (j, k), lam in Lam.blocks.items():
        if j >= k:
            continue
        Qj, Qk = dd.basis(j), dd.basis(k)
        if Qj.shape[1] and Qk.shape[1]:
            Kjk = ninv[j] @ Qj.conj().T @ lam @ Qk @ ninv[k]
            blocks[(j, k)] = Kjk
            back = Qj @ dd.nabla.block(j, j) @ Kjk @ dd.nabla.block(k, k) @ Qk.conj().T
        else:
            back = np.zeros_like(lam)
        worst = max(worst, spectral_norm(lam - back))
    if worst > tol.eq_tol:
        raise InvalidData(
            f"W - V is not supported on the defect spaces (residual {worst:.3e}); W is not a majorant of this H"
        )
    K = BlockMatrix.identity(DH) + BlockMatrix(DH, DH, blocks)
    return inverse_cayley(K, tol)


def solve_problem2(
    H: BlockMatrix, C: BlockMatrix, tol: Tolerance = DEFAULT_TOL, defects: Optional[DefectData] = None
) -> BlockMatrix:
    """``F = N + Pi^* nabla (I - C)^{-1} nabla Pi``; ``F + F^* >= H^*H + I``, ``F_{j,j} = I``."""
    dd = defects or defect_data(H, tol)
    _check_C_shape(C, dd)
    if not C.is_strictly_upper:
        raise NotUpperTriangular("C must be strictly upper triangular")
    nrm = op_norm(C)
    if nrm > 1 + tol.psd_tol:
        raise NotContractive(None, nrm, "C")
    lift = dd.pi.adjoint() @ dd.nabla @ neumann_inverse(C) @ dd.nabla @ dd.pi
    return build_N(H) + lift


# --------------------------------------------------------------------
# state space example


def _spectral_radius(A) -> float:
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def lyapunov_solve(A, E, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Solve the Stein equation ``P = A^* P A + E^* E`` for stable ``A``."""
    A = np.asarray(A, dtype=complex)
    E = np.asarray(E, dtype=complex)
    rho = _spectral_radius(A)
    if rho >= 1 - tol.rank_tol:
        raise InvalidData(f"spectral radius {rho:.6g} is not below 1")
    if A.size == 0:
        return np.zeros((0, 0), dtype=complex)
    # scipy solves X = a X a^H + q; take a = A^*.
    P = scipy.linalg.solve_discrete_lyapunov(A.conj().T, E.conj().T @ E)
    return 0.5 * (P + P.conj().T)


@dataclass(frozen=True)
class StateSpaceSystem:
    """``{A, B, E, D}`` with inputs ``U_1..U_n`` and outputs ``Y_1..Y_n``.

    ``D`` is an upper triangular block matrix over window ``1..n``; ``B`` maps the
    stacked inputs into the state space and ``E`` maps states into the stacked
    outputs.
    """

    A: np.ndarray
    B: np.ndarray
    E: np.ndarray
    D: BlockMatrix
    P: Optional[np.ndarray] = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=complex)
        B = np.asarray(self.B, dtype=complex)
        E = np.asarray(self.E, dtype=complex)
        n = A.shape[0]
        if A.shape != (n, n) or B.shape != (n, self.D.domain.total) or E.shape != (self.D.codomain.total, n):
            raise DimensionMismatch("inconsistent state space dimensions")
        if not self.D.is_upper:
            raise NotUpperTriangular("D must be upper triangular")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "E", E)
        if self.P is None:
            object.__setattr__(self, "P", lyapunov_solve(A, E))

    @property
    def U(self) -> BlockSpace:
        return self.D.domain

    @property
    def Y(self) -> BlockSpace:
        return self.D.codomain

    def lyapunov_residual(self) -> float:
        return spectral_norm(self.P - self.A.conj().T @ self.P @ self.A - self.E.conj().T @ self.E)


def state_space_gram(sys: StateSpaceSystem) -> BlockMatrix:
    """``D^*D + B^* P B`` over the inputs."""
    dd = sys.D.dense()
    return BlockMatrix.from_dense(dd.conj().T @ dd + sys.B.conj().T @ sys.P @ sys.B, sys.U, sys.U)


def truncation_tail_bound(sys: StateSpaceSystem, depth: int) -> float:
    """Bound on the norm of the discarded part of each column after ``depth`` rows.

    Uses ``||A^depth|| ||E|| ||B|| / (1 - ||A||)`` when ``||A|| < 1`` and an
    explicit tail sum otherwise.
    """
    a = spectral_norm(sys.A)
    e, b = spectral_norm(sys.E), spectral_norm(sys.B)
    ad = spectral_norm(np.linalg.matrix_power(sys.A, depth)) if sys.A.size else 0.0
    if a < 1:
        return ad * e * b / (1 - a)
    # non-normal A: sum the tail directly until it is negligible
    total, M = 0.0, np.linalg.matrix_power(sys.A, depth)
    for _ in range(10000):
        t = spectral_norm(M)
        total += t
        if t < 1e-18:
            break
        M = sys.A @ M
    return total * e * b


def state_space_to_H(sys: StateSpaceSystem, depth: int, tol: Tolerance = DEFAULT_TOL) -> BlockMatrix:
    """Windowed ``H`` with rows ``-depth..n``: ``H_{j,k} = E A^{-j-1} B_k`` for ``j < 0``
    and ``H_{j,k} = D_{j,k}`` for ``1 <= j <= n``.

    Warns when the truncation tail bound exceeds ``eq_tol``.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    n_lo, n_hi = sys.U.window.lo, sys.U.window.hi
    if n_lo < 1:
        raise DimensionMismatch("the input window must start at 1 or later")
    lo = -depth
    ytot = sys.Y.total
    ydims = {j: ytot for j in range(lo, 0)}
    ydims.update({j: sys.Y.dim(j) for j in sys.Y.window})
    w = Window(lo, n_hi)
    Ybig = BlockSpace.from_map(w, ydims)
    Ubig = BlockSpace.from_map(w, {k: sys.U.dim(k) for k in sys.U.window})
    blocks = {}
    pw = np.eye(sys.A.shape[0], dtype=complex)
    for j in range(-1, lo - 1, -1):
        EAp = sys.E @ pw
        for k in sys.U.window:
            blocks[(j, k)] = EAp @ sys.B[:, sys.U.slice(k)]
        pw = sys.A @ pw
    for (j, k), b in sys.D.blocks.items():
        blocks[(j, k)] = b
    bound = truncation_tail_bound(sys, depth)
    if bound > tol.eq_tol:
        warnings.warn(f"truncation depth {depth} leaves a tail bound of {bound:.3e}", RuntimeWarning)
    return BlockMatrix(Ubig, Ybig, blocks)


def restrict_gram(G: BlockMatrix, U: BlockSpace) -> BlockMatrix:
    """Restrict a gram matrix over an enlarged window to the blocks of ``U``."""
    return BlockMatrix(U, U, {(j, k): G.block(j, k) for j in U.window for k in U.window})
