"""Time-variant relaxed commutant lifting and its translation to interpolation.

A data set consists of contractions ``A_n: H_n -> H'_n`` and ``T'_n: H'_{n-1} -> H'_n``
together with ``R_n: H0_n -> H_n`` and ``Q_n: H0_{n-1} -> H_n`` subject to

    T'_k A_{k-1} R_{k-1} = A_k Q_k,     R_{k-1}^* R_{k-1} <= Q_k^* Q_k.

Defect spaces are handled in coordinates: ``D_{A_k}`` is represented on an
orthonormal basis ``QA_k`` of its range and ``DAc_k = QA_k^* D_{A_k}``; likewise
``QT_k`` and ``DTc_k`` for ``T'_k``. The cumulative space ``D'_k`` is the
direct sum of the ``D_{T'_i}``, ``i <= k`` inside the window, ordered by ``i``,
so that ``D'_k = D'_{k-1} (+) D_{T'_k}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .core import (
    DEFAULT_TOL,
    BlockMatrix,
    BlockSpace,
    Check,
    Tolerance,
    Window,
    hermitian_sqrt_psd,
    min_eigenvalue,
    range_subspace,
    spectral_norm,
)
from .errors import DimensionMismatch, InvalidData, NotContractive
from .problem import InterpolationData

__all__ = [
    "RclData",
    "LiftingData",
    "BSequence",
    "validate_rcl",
    "underlying_contractions",
    "build_lifting",
    "b_to_h",
    "h_to_b",
    "check_rcl_solution",
    "omega_to_rcl",
    "omega_roundtrip_residual",
]


def _arr(a):
    return np.array(a, dtype=complex)


@dataclass(frozen=True)
class RclData:
    """Operators indexed by the window; every space outside it is zero."""

    window: Window
    h: Tuple[int, ...]
    hp: Tuple[int, ...]
    h0: Tuple[int, ...]
    A: Tuple[np.ndarray, ...]
    Tp: Tuple[np.ndarray, ...]
    R: Tuple[np.ndarray, ...]
    Q: Tuple[np.ndarray, ...]

    def __post_init__(self):
        n = len(self.window)
        for name in ("h", "hp", "h0", "A", "Tp", "R", "Q"):
            if len(getattr(self, name)) != n:
                raise DimensionMismatch(f"{name} needs one entry per window index")
        for name in ("A", "Tp", "R", "Q"):
            object.__setattr__(self, name, tuple(_arr(x) for x in getattr(self, name)))
        object.__setattr__(self, "h", tuple(int(x) for x in self.h))
        object.__setattr__(self, "hp", tuple(int(x) for x in self.hp))
        object.__setattr__(self, "h0", tuple(int(x) for x in self.h0))
        for k in self.window:
            checks = {
                "A": (self.A_(k), (self.dim_hp(k), self.dim_h(k))),
                "Tp": (self.Tp_(k), (self.dim_hp(k), self.dim_hp(k - 1))),
                "R": (self.R_(k), (self.dim_h(k), self.dim_h0(k))),
                "Q": (self.Q_(k), (self.dim_h(k), self.dim_h0(k - 1))),
            }
            for name, (a, shape) in checks.items():
                if a.shape != shape:
                    raise DimensionMismatch(f"{name}_{k} has shape {a.shape}, expected {shape}")

    @classmethod
    def from_lists(cls, lo, h, hp, h0, A, Tp, R, Q) -> "RclData":
        return cls(Window(lo, lo + len(h) - 1), tuple(h), tuple(hp), tuple(h0), tuple(A), tuple(Tp), tuple(R), tuple(Q))

    def _get(self, seq, k):
        return seq[k - self.window.lo] if k in self.window else 0

    def dim_h(self, k):
        return self._get(self.h, k)

    def dim_hp(self, k):
        return self._get(self.hp, k)

    def dim_h0(self, k):
        return self._get(self.h0, k)

    def _op(self, seq, k, rows, cols):
        if k in self.window:
            return seq[k - self.window.lo]
        return np.zeros((rows, cols), dtype=complex)

    def A_(self, k):
        return self._op(self.A, k, self.dim_hp(k), self.dim_h(k))

    def Tp_(self, k):
        return self._op(self.Tp, k, self.dim_hp(k), self.dim_hp(k - 1))

    def R_(self, k):
        return self._op(self.R, k, self.dim_h(k), self.dim_h0(k))

    def Q_(self, k):
        return self._op(self.Q, k, self.dim_h(k), self.dim_h0(k - 1))


def validate_rcl(lam: RclData, tol: Tolerance = DEFAULT_TOL) -> Check:
    """Contractivity, intertwining and relaxation, raising on the first violation."""
    res: Dict[str, float] = {}
    for k in lam.window:
        a, t = spectral_norm(lam.A_(k)), spectral_norm(lam.Tp_(k))
        res[f"norm_A[{k}]"], res[f"norm_Tp[{k}]"] = a, t
        if a > 1 + tol.psd_tol:
            raise NotContractive(k, a, "A")
        if t > 1 + tol.psd_tol:
            raise NotContractive(k, t, "T'")
        inter = spectral_norm(lam.Tp_(k) @ lam.A_(k - 1) @ lam.R_(k - 1) - lam.A_(k) @ lam.Q_(k))
        res[f"intertwining[{k}]"] = inter
        if inter > tol.eq_tol:
            raise InvalidData(f"intertwining fails at index {k} (residual {inter:.3e})", index=k)
        Qk, Rk = lam.Q_(k), lam.R_(k - 1)
        lam_min = min_eigenvalue(Qk.conj().T @ Qk - Rk.conj().T @ Rk)
        res[f"relaxation[{k}]"] = lam_min if np.isfinite(lam_min) else 0.0
        if lam_min < -tol.psd_tol:
            raise InvalidData(f"R*R <= Q*Q fails at index {k} (min eigenvalue {lam_min:.3e})", index=k)
    return Check(True, res)


def _defect_coords(T: np.ndarray, tol: Tolerance):
    """``(basis, D_T in coordinates)`` for a contraction ``T``."""
    n = T.shape[1]
    D = hermitian_sqrt_psd(np.eye(n) - T.conj().T @ T, tol)
    sub = range_subspace(D, tol)
    return sub.basis, sub.basis.conj().T @ D


@dataclass(frozen=True)
class LiftingData:
    """Defect coordinates of every ``A_k`` and ``T'_k`` and the isometries ``U'_k``."""

    window: Window
    QA: Tuple[np.ndarray, ...]
    DAc: Tuple[np.ndarray, ...]
    QT: Tuple[np.ndarray, ...]
    DTc: Tuple[np.ndarray, ...]
    U: Tuple[np.ndarray, ...]

    def _i(self, k):
        return k - self.window.lo

    def da(self, k) -> int:
        return self.QA[self._i(k)].shape[1] if k in self.window else 0

    def dt(self, k) -> int:
        return self.QT[self._i(k)].shape[1] if k in self.window else 0

    def dp(self, k) -> int:
        """Dimension of the cumulative space ``D'_k``."""
        return sum(self.dt(i) for i in self.window if i <= k)

    def dp_offset(self, i) -> int:
        """Start of ``D_{T'_i}`` inside any ``D'_k`` with ``k >= i``."""
        return self.dp(i - 1)

    @property
    def D_space(self) -> BlockSpace:
        return BlockSpace(self.window, tuple(self.da(k) for k in self.window))

    @property
    def Dp_space(self) -> BlockSpace:
        return BlockSpace(self.window, tuple(self.dt(k) for k in self.window))

    def isometry_residual(self) -> float:
        return max(
            (spectral_norm(u.conj().T @ u - np.eye(u.shape[1])) for u in self.U if u.size), default=0.0
        )


def build_lifting(lam: RclData, tol: Tolerance = DEFAULT_TOL) -> LiftingData:
    QA, DAc, QT, DTc = [], [], [], []
    for k in lam.window:
        qa, da = _defect_coords(lam.A_(k), tol)
        qt, dt = _defect_coords(lam.Tp_(k), tol)
        QA.append(qa)
        DAc.append(da)
        QT.append(qt)
        DTc.append(dt)
    partial = LiftingData(lam.window, tuple(QA), tuple(DAc), tuple(QT), tuple(DTc), ())
    Us = []
    for k in lam.window:
        hp_prev, hp_k = lam.dim_hp(k - 1), lam.dim_hp(k)
        dprev, dt = partial.dp(k - 1), partial.dt(k)
        # rows H'_k, D'_{k-1}, D_{T'_k}; columns H'_{k-1}, D'_{k-1}
        U = np.zeros((hp_k + dprev + dt, hp_prev + dprev), dtype=complex)
        U[:hp_k, :hp_prev] = lam.Tp_(k)
        U[hp_k: hp_k + dprev, hp_prev:] = np.eye(dprev)
        U[hp_k + dprev:, :hp_prev] = DTc[k - lam.window.lo]
        Us.append(U)
    return LiftingData(lam.window, partial.QA, partial.DAc, partial.QT, partial.DTc, tuple(Us))


def underlying_contractions(
    lam: RclData, tol: Tolerance = DEFAULT_TOL, lifting: Optional[LiftingData] = None
) -> InterpolationData:
    """Interpolation data with ``U_k = D_{A_k}`` and ``Y_k = D_{T'_k}`` (in coordinates).

    ``F_k`` is the range of ``D_{A_k} Q_k`` and ``omega_k`` solves
    ``omega_k D_{A_k} Q_k = [D_{T'_k} A_{k-1} R_{k-1}; D_{A_{k-1}} R_{k-1}]``.
    """
    lf = lifting or build_lifting(lam, tol)
    w = lam.window
    Fs, oms = [], []
    for k in w:
        i = k - w.lo
        M = lf.DAc[i] @ lam.Q_(k)
        sub = range_subspace(M, tol)
        A = sub.basis.conj().T @ M
        Rp = lam.R_(k - 1)
        top = lf.DTc[i] @ lam.A_(k - 1) @ Rp
        bottom = lf.DAc[i - 1] @ Rp if k - 1 in w else np.zeros((0, Rp.shape[1]), dtype=complex)
        rhs = np.vstack([top, bottom])
        if A.shape[0] and rhs.shape[0]:
            om = np.linalg.lstsq(A.conj().T, rhs.conj().T, rcond=None)[0].conj().T
        else:
            om = np.zeros((rhs.shape[0], A.shape[0]), dtype=complex)
        r = spectral_norm(om @ A - rhs)
        if r > tol.eq_tol:
            raise InvalidData(f"underlying contraction {k} is inconsistent (residual {r:.3e})", index=k)
        Fs.append(sub)
        oms.append(om)
    U = lf.D_space
    Y = lf.Dp_space
    return InterpolationData(U, Y, tuple(Fs), tuple(oms))


@dataclass(frozen=True)
class BSequence:
    """``B_n: H_n -> K'_n = H'_n (+) D'_n``."""

    window: Window
    B: Tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "B", tuple(_arr(b) for b in self.B))
        if len(self.B) != len(self.window):
            raise DimensionMismatch("one B_n per window index required")

    def at(self, k):
        return self.B[k - self.window.lo]


def _gamma_from_B(Bk, Ak, DAc, tol, k):
    hp = Ak.shape[0]
    top, bottom = Bk[:hp], Bk[hp:]
    r = spectral_norm(top - Ak)
    if r > tol.eq_tol:
        raise InvalidData(f"top rows of B_{k} differ from A_{k} by {r:.3e}", index=k)
    if DAc.shape[0] == 0:
        G = np.zeros((bottom.shape[0], 0), dtype=complex)
    elif bottom.shape[0] == 0:
        G = np.zeros((0, DAc.shape[0]), dtype=complex)
    else:
        # DAc has orthonormal-basis rows on range(D_A); the minimal-norm solution
        # vanishes on the orthogonal complement.
        G = np.linalg.lstsq(DAc.conj().T, bottom.conj().T, rcond=None)[0].conj().T
    r = spectral_norm(G @ DAc - bottom)
    if r > tol.eq_tol:
        raise InvalidData(f"bottom rows of B_{k} are not supported on the range of D_A (residual {r:.3e})", index=k)
    return G


def b_to_h(B: BSequence, lam: RclData, tol: Tolerance = DEFAULT_TOL, lifting: Optional[LiftingData] = None) -> BlockMatrix:
    """Recover ``Gamma_k`` from ``B_k = [A_k; Gamma_k D_{A_k}]`` and stack them as columns."""
    lf = lifting or build_lifting(lam, tol)
    w = lam.window
    blocks = {}
    for k in w:
        Bk = B.at(k)
        shape = (lam.dim_hp(k) + lf.dp(k), lam.dim_h(k))
        if Bk.shape != shape:
            raise DimensionMismatch(f"B_{k} has shape {Bk.shape}, expected {shape}")
        nrm = spectral_norm(Bk)
        if nrm > 1 + tol.psd_tol:
            raise NotContractive(k, nrm, "B")
        G = _gamma_from_B(Bk, lam.A_(k), lf.DAc[k - w.lo], tol, k)
        for i in w:
            if i > k:
                break
            o = lf.dp_offset(i)
            blocks[(i, k)] = G[o: o + lf.dt(i)]
    return BlockMatrix(lf.D_space, lf.Dp_space, blocks)


def h_to_b(H: BlockMatrix, lam: RclData, tol: Tolerance = DEFAULT_TOL, lifting: Optional[LiftingData] = None) -> BSequence:
    """``Gamma_k = Pi_{D'_k} H_k`` and ``B_k = [A_k; Gamma_k D_{A_k}]``."""
    lf = lifting or build_lifting(lam, tol)
    if not (H.domain.compatible(lf.D_space) and H.codomain.compatible(lf.Dp_space)):
        raise DimensionMismatch("H must map the D_A spaces into the D_T' spaces")
    w = lam.window
    Bs = []
    for k in w:
        G = np.vstack([np.zeros((0, lf.da(k)))] + [H.block(i, k) for i in w if i <= k])
        Bs.append(np.vstack([lam.A_(k), G @ lf.DAc[k - w.lo]]))
    return BSequence(w, tuple(Bs))


def check_rcl_solution(
    B: BSequence, lam: RclData, tol: Tolerance = DEFAULT_TOL, lifting: Optional[LiftingData] = None
) -> Check:
    lf = lifting or build_lifting(lam, tol)
    w = lam.window
    res: Dict[str, float] = {}
    flags = {"shape": True, "contraction": True, "projection": True, "intertwining": True}
    for k in w:
        Bk = B.at(k)
        shape = (lam.dim_hp(k) + lf.dp(k), lam.dim_h(k))
        if Bk.shape != shape:
            flags["shape"] = False
            return Check(False, res, flags, [f"B_{k} has shape {Bk.shape}, expected {shape}"])
        nrm = spectral_norm(Bk)
        proj = spectral_norm(Bk[: lam.dim_hp(k)] - lam.A_(k))
        if k - 1 in w:
            lhs = lf.U[k - w.lo] @ B.at(k - 1) @ lam.R_(k - 1)
        else:
            lhs = np.zeros((shape[0], lam.dim_h0(k - 1)), dtype=complex)
        inter = spectral_norm(lhs - Bk @ lam.Q_(k))
        res[f"norm_B[{k}]"], res[f"projection[{k}]"], res[f"intertwining[{k}]"] = nrm, proj, inter
        flags["contraction"] &= nrm <= 1 + tol.psd_tol
        flags["projection"] &= proj <= tol.eq_tol
        flags["intertwining"] &= inter <= tol.eq_tol
    return Check(all(flags.values()), res, flags)


def omega_to_rcl(data: InterpolationData) -> RclData:
    """Data set whose underlying contractions are the given ``omega_k``.

    On the window ``lo-1 .. hi``: ``H_n = Y_{n+1} (+) U_n``, ``H'_n = Y_{n+1}``,
    ``H0_n = F_{n+1}``, ``A_n = [I 0]``, ``T'_n = 0``, ``R_n = omega_{n+1}`` and
    ``Q_n = [0; Pi_{F_n}^*]``.
    """
    lo, hi = data.window.lo - 1, data.window.hi
    w = Window(lo, hi)
    Y, U = data.Y, data.U
    h, hp, h0, A, Tp, R, Q = [], [], [], [], [], [], []
    for n in w:
        y1, u = Y.dim(n + 1), U.dim(n)
        h.append(y1 + u)
        hp.append(y1)
        h0.append(data.rank(n + 1))
        A.append(np.hstack([np.eye(y1), np.zeros((y1, u))]))
        Tp.append(np.zeros((y1, Y.dim(n) if n - 1 >= lo else 0)))
        R.append(data.omega[n + 1 - data.window.lo] if n + 1 in data.window else np.zeros((y1 + u, 0)))
        rn = data.rank(n)
        Q.append(np.vstack([np.zeros((y1, rn)), data.basis(n) if n in data.window else np.zeros((u, 0))]))
    return RclData(w, tuple(h), tuple(hp), tuple(h0), tuple(A), tuple(Tp), tuple(R), tuple(Q))


def omega_roundtrip_residual(
    data: InterpolationData, lam: RclData, tol: Tolerance = DEFAULT_TOL
) -> Tuple[float, InterpolationData]:
    """Compare the underlying contractions of ``lam = omega_to_rcl(data)`` with ``data``.

    Both sides are mapped to operators ``H_k -> H'_{k-1} (+) H_{k-1}`` so the
    comparison does not depend on the coordinates chosen for defect spaces.
    Returns the largest deviation (over ``omega`` and the ``F_k`` projectors)
    together with the underlying data.
    """
    lf = build_lifting(lam, tol)
    und = underlying_contractions(lam, tol, lf)
    w = data.window
    worst = 0.0
    # the extra leading index carries no constraint
    worst = max(worst, float(und.rank(lam.window.lo)))
    for k in w:
        y1, u = data.Y.dim(k + 1), data.U.dim(k)
        J = np.vstack([np.zeros((y1, u)), np.eye(u)])
        Jp = np.vstack([np.zeros((data.Y.dim(k), data.U.dim(k - 1))), np.eye(data.U.dim(k - 1))])
        b = data.basis(k)
        orig = np.vstack([data.omega1(k) @ b.conj().T @ J.conj().T, Jp @ data.omega2(k) @ b.conj().T @ J.conj().T])
        i = k - lam.window.lo
        fb = und.basis(k)
        QA = lf.QA[i]
        QAp = lf.QA[i - 1]
        back = fb.conj().T @ QA.conj().T
        mine = np.vstack([lf.QT[i] @ und.omega1(k) @ back, QAp @ und.omega2(k) @ back])
        worst = max(worst, spectral_norm(mine - orig))
        P_orig = J @ b @ b.conj().T @ J.conj().T
        P_mine = QA @ fb @ fb.conj().T @ QA.conj().T
        worst = max(worst, spectral_norm(P_orig - P_mine))
    return worst, und
