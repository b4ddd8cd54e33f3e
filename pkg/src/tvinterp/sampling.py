"""Random instance generators for tests, the acceptance suite and ``--random``.

Contractions are Gaussian matrices scaled by ``1 / (sigma_max + margin)``.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .core import BlockMatrix, BlockSpace, op_norm, spectral_norm
from .majorant import StateSpaceSystem
from .problem import InterpolationData, ZPair
from .rcl import RclData

__all__ = [
    "gaussian",
    "random_contraction",
    "random_isometry",
    "random_dims",
    "random_data",
    "random_zpair",
    "random_admissible_zpair",
    "random_strict_upper_contraction",
    "random_column_contractive",
    "random_isometric_columns",
    "random_state_space",
    "random_rcl",
]

MARGIN = 0.05


def gaussian(rng: np.random.Generator, m: int, n: int, real: bool = False) -> np.ndarray:
    g = rng.standard_normal((m, n))
    if real:
        return g.astype(complex)
    return g + 1j * rng.standard_normal((m, n))


def random_contraction(rng, m, n, margin: float = MARGIN, real: bool = False) -> np.ndarray:
    g = gaussian(rng, m, n, real)
    return g / (spectral_norm(g) + margin)


def random_isometry(rng, m, n) -> np.ndarray:
    """``m x n`` matrix with orthonormal columns (``n <= m``)."""
    q, _ = np.linalg.qr(gaussian(rng, m, n))
    return q[:, :n]


def random_dims(rng, width: int, lo: int = 0, hi: int = 3):
    return [int(d) for d in rng.integers(lo, hi + 1, size=width)]


def random_data(
    rng: np.random.Generator,
    width: int = 4,
    max_dim: int = 3,
    lo: int = 0,
    full_F: bool = False,
    zero_F: bool = False,
    margin: float = MARGIN,
    u_dims: Optional[Sequence[int]] = None,
    y_dims: Optional[Sequence[int]] = None,
) -> InterpolationData:
    """Random interpolation data on ``lo .. lo+width-1``."""
    u = list(u_dims) if u_dims is not None else random_dims(rng, width, 1, max_dim)
    y = list(y_dims) if y_dims is not None else random_dims(rng, width, 1, max_dim)
    F, om = [], []
    for i in range(width):
        if full_F:
            r = u[i]
        elif zero_F:
            r = 0
        else:
            r = int(rng.integers(0, u[i] + 1))
        F.append(random_isometry(rng, u[i], r) if r else np.zeros((u[i], 0)))
        rows = y[i] + (u[i - 1] if i else 0)
        om.append(random_contraction(rng, rows, r, margin) if r and rows else np.zeros((rows, r)))
    return InterpolationData.from_lists(lo, u, y, F, om)


def _random_upper(rng, dom: BlockSpace, cod: BlockSpace, strict: bool):
    blocks = {}
    for j in cod.window:
        for k in dom.window:
            if j < k or (j == k and not strict):
                blocks[(j, k)] = gaussian(rng, cod.dim(j), dom.dim(k))
    return BlockMatrix(dom, cod, blocks)


def random_zpair(rng, U: BlockSpace, Y: BlockSpace, margin: float = MARGIN) -> ZPair:
    """Random pair with ``||[Z1; Z2]|| < 1``, ignoring any interpolation data."""
    Z1 = _random_upper(rng, U, Y, strict=False)
    Z2 = _random_upper(rng, U, U, strict=True)
    s = spectral_norm(np.vstack([Z1.dense(), Z2.dense()])) + margin
    return ZPair(Z1 * (1 / s), Z2 * (1 / s))


def random_admissible_zpair(rng, data: InterpolationData, scale: float = 0.5) -> ZPair:
    """Admissible pair for ``data`` (canonical pair plus a random free perturbation)."""
    from .param import random_data_member

    return random_data_member(data, rng, scale)


def random_strict_upper_contraction(rng, space: BlockSpace, margin: float = MARGIN) -> BlockMatrix:
    C = _random_upper(rng, space, space, strict=True)
    n = op_norm(C)
    return C * (1 / (n + margin)) if n else C


def random_column_contractive(rng, U: BlockSpace, Y: BlockSpace, margin: float = MARGIN) -> BlockMatrix:
    """Upper ``H`` whose stacked columns have norm ``<= 1 / (1 + margin)``."""
    H = _random_upper(rng, U, Y, strict=False)
    blocks = {}
    for k in U.window:
        col = H.dense()[:, U.slice(k)]
        s = spectral_norm(col) + margin
        for j in Y.window:
            blocks[(j, k)] = H.block(j, k) / s
    return BlockMatrix(U, Y, blocks)


def random_isometric_columns(rng, width: int = 3, lo: int = 0) -> BlockMatrix:
    """Upper ``H`` with isometric columns (every defect space is zero)."""
    u = random_dims(rng, width, 1, 2)
    y = [u[i] + 1 for i in range(width)]
    U, Y = BlockSpace.from_dims(lo, u), BlockSpace.from_dims(lo, y)
    blocks = {}
    for k in U.window:
        rows = sum(Y.dim(j) for j in Y.window if j <= k)
        Qk = random_isometry(rng, rows, U.dim(k))
        o = 0
        for j in Y.window:
            if j > k:
                break
            blocks[(j, k)] = Qk[o: o + Y.dim(j)]
            o += Y.dim(j)
    return BlockMatrix(U, Y, blocks)


def random_state_space(
    rng, n: int = 3, state_dim: int = 3, u_max: int = 2, y_max: int = 2, rho: float = 0.8, real: bool = False
) -> StateSpaceSystem:
    """Stable system with spectral radius ``rho`` and column-contractive ``H``.

    ``B`` and ``D`` are rescaled so that the diagonal blocks of
    ``D^*D + B^*PB`` are contractions.
    """
    u = random_dims(rng, n, 1, u_max)
    y = random_dims(rng, n, 1, y_max)
    U, Y = BlockSpace.from_dims(1, u), BlockSpace.from_dims(1, y)
    A = gaussian(rng, state_dim, state_dim, real)
    r = np.max(np.abs(np.linalg.eigvals(A)))
    A = A * (rho / r)
    B = gaussian(rng, state_dim, U.total, real)
    E = gaussian(rng, Y.total, state_dim, real)
    D = _random_upper(rng, U, Y, strict=False)
    sys = StateSpaceSystem(A, B, E, D)
    from .majorant import state_space_gram

    G = state_space_gram(sys)
    s = max(spectral_norm(G.block(k, k)) for k in U.window)
    c = 1 / np.sqrt(s * (1 + MARGIN))
    return StateSpaceSystem(A, B * c, E, D * c)


def random_rcl(
    rng,
    width: int = 4,
    max_dim: int = 2,
    lo: int = 0,
    equality: bool = False,
    margin: float = 0.1,
) -> RclData:
    """Valid data set with ``A_k`` of singular values in ``[0.5, 0.9]`` and ``||T'_k|| <= 0.3``.

    ``Q_k = A_k^+ S_k + V_k Y_k`` with ``S_k = T'_k A_{k-1} R_{k-1}`` and ``V_k`` an
    orthonormal basis of the kernel of ``A_k``; ``Y_k`` is chosen so that
    ``Q_k^* Q_k = R_{k-1}^* R_{k-1}`` (``equality``) or exceeds it by ``margin``.
    """
    hp = random_dims(rng, width, 1, max_dim)
    h0 = random_dims(rng, width, 1, max_dim)
    h = [hp[i] + (h0[i - 1] if i else 0) + int(rng.integers(0, 2)) for i in range(width)]
    A, Tp, R, Q = [], [], [], []
    for i in range(width):
        U_, _, Vh = np.linalg.svd(gaussian(rng, hp[i], h[i]), full_matrices=True)
        s = rng.uniform(0.5, 0.9, size=hp[i])
        Ai = (U_ * s) @ Vh[: hp[i]]
        A.append(Ai)
        prev = hp[i - 1] if i else 0
        Tp.append(0.3 * random_contraction(rng, hp[i], prev, margin=0.0) if prev else np.zeros((hp[i], 0)))
        R.append(random_contraction(rng, h[i], h0[i]))
    for i in range(width):
        n0 = h0[i - 1] if i else 0
        if n0 == 0:
            Q.append(np.zeros((h[i], 0)))
            continue
        S = Tp[i] @ A[i - 1] @ R[i - 1]
        Ap = np.linalg.pinv(A[i])
        X = Ap @ S
        _, _, Vh = np.linalg.svd(A[i], full_matrices=True)
        V = Vh[hp[i]:].conj().T
        M = R[i - 1].conj().T @ R[i - 1] - X.conj().T @ X
        if not equality:
            M = M + margin * np.eye(n0)
        w, v = np.linalg.eigh(0.5 * (M + M.conj().T))
        Ysq = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
        Yk = np.zeros((V.shape[1], n0), dtype=complex)
        Yk[:n0] = Ysq
        Q.append(X + V @ Yk)
    return RclData.from_lists(lo, h, hp, h0, A, Tp, R, Q)
