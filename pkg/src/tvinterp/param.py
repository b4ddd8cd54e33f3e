"""Parametrization of all solutions for a fixed solution ``H`` and uniqueness tests.

Every (Z1, Z2) pair producing a given solution ``H`` corresponds to a strictly
upper contraction ``C`` on the defect spaces of ``H`` whose restriction to the
subspaces ``F_{H_k}`` is prescribed by the induced contractions
``omega_{H_k}``. The same restriction pattern, one level down, describes all
admissible pairs for the raw data; both levels share the uniqueness analysis
implemented here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from .core import (
    DEFAULT_TOL,
    BlockMatrix,
    BlockSpace,
    Check,
    Subspace,
    Tolerance,
    hermitian_sqrt_psd,
    max_block_residual,
    op_norm,
    range_subspace,
    spectral_norm,
)
from .errors import DimensionMismatch, InterpolationError, InvalidData, MembershipError, NotContractive
from .majorant import DefectData, defect_data, solve_problem2
from .problem import (
    InterpolationData,
    ZPair,
    canonical_zpair,
    check_F_interpolation,
    check_interpolation,
    check_zpair,
    construct,
    recover_zpair,
)

__all__ = [
    "InducedData",
    "Parametrization",
    "UniquenessReport",
    "induced_contractions",
    "check_C_membership",
    "canonical_C",
    "random_member",
    "param_witness",
    "parametrize_solution",
    "verify_parametrization",
    "uniqueness_of_param",
    "uniqueness_of_problem",
    "random_data_member",
    "problem_witness",
]


def _lstsq_right(A: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Least squares solution ``X`` of ``X A = R``."""
    if A.shape[0] == 0 or R.shape[0] == 0:
        return np.zeros((R.shape[0], A.shape[0]), dtype=complex)
    if A.shape[1] == 0:
        return np.zeros((R.shape[0], A.shape[0]), dtype=complex)
    X = np.linalg.lstsq(A.conj().T, R.conj().T, rcond=None)[0]
    return X.conj().T


def _coisometry_defect(om: np.ndarray, tol: Tolerance) -> Tuple[np.ndarray, float, bool]:
    """``D_{om^*}`` together with ``||om om^* - I||`` and the co-isometry flag."""
    n = om.shape[0]
    gap = np.eye(n) - om @ om.conj().T
    res = spectral_norm(gap)
    is_co = res <= tol.eq_tol
    if is_co:
        return np.zeros((n, n), dtype=complex), res, True
    return hermitian_sqrt_psd(gap, tol), res, False


@dataclass(frozen=True)
class InducedData:
    """``F_{H_k}`` (defect coordinates) and ``omega_{H_k}: F_{H_k} -> D_{H_{k-1}}``.

    ``complements[k]`` is an orthonormal basis of the orthogonal complement of
    ``F_{H_k}`` inside the defect space, and ``co_defects[k]`` is the defect
    operator of ``omega_{H_k}^*`` on ``D_{H_{k-1}}``.
    """

    defects: DefectData
    F_H: Tuple[Subspace, ...]
    omega_H: Tuple[np.ndarray, ...]
    complements: Tuple[Subspace, ...]
    co_defects: Tuple[np.ndarray, ...]
    coisometry_residuals: Tuple[float, ...]
    coisometry: Tuple[bool, ...]
    relation_residuals: Tuple[float, ...]

    @property
    def space(self) -> BlockSpace:
        return self.defects.space

    @property
    def window(self):
        return self.space.window

    def _i(self, k):
        return k - self.window.lo

    def basis(self, k):
        return self.F_H[self._i(k)].basis

    def omega(self, k):
        return self.omega_H[self._i(k)]

    def complement(self, k):
        return self.complements[self._i(k)].basis

    def co_defect(self, k):
        return self.co_defects[self._i(k)]

    def full(self, k) -> bool:
        return self.F_H[self._i(k)].rank == self.space.dim(k)


def induced_contractions(H: BlockMatrix, data: InterpolationData, tol: Tolerance = DEFAULT_TOL) -> InducedData:
    chk = check_interpolation(H, data, tol)
    if not chk.ok or not chk.flags["column_contractive"]:
        raise InterpolationError(
            f"H does not solve the interpolation problem (residual {chk.residuals['interpolation']:.3e})"
        )
    dd = defect_data(H, tol)
    w = data.window
    FH, oms, comps, codef, cores, coflags, rel = [], [], [], [], [], [], []
    for k in w:
        Qk = dd.basis(k)
        M = Qk.conj().T @ dd.defect(k) @ data.basis(k)
        sub = range_subspace(M, tol)
        G = sub.basis
        if k - 1 in w:
            R = dd.basis(k - 1).conj().T @ dd.defect(k - 1) @ data.omega2(k)
        else:
            R = np.zeros((0, M.shape[1]), dtype=complex)
        A = G.conj().T @ M
        om = _lstsq_right(A, R)
        r = spectral_norm(om @ A - R)
        if r > tol.eq_tol:
            raise InvalidData(f"defining relation of omega_H_{k} is inconsistent (residual {r:.3e})", index=k)
        nrm = spectral_norm(om)
        if nrm > 1 + tol.psd_tol:
            raise NotContractive(k, nrm, "omega_H")
        D, cres, cflag = _coisometry_defect(om, tol)
        FH.append(sub)
        oms.append(om)
        comps.append(sub.complement(tol))
        codef.append(D)
        cores.append(cres)
        coflags.append(cflag)
        rel.append(r)
    return InducedData(dd, tuple(FH), tuple(oms), tuple(comps), tuple(codef), tuple(cores), tuple(coflags), tuple(rel))


def check_C_membership(C: BlockMatrix, induced: InducedData, tol: Tolerance = DEFAULT_TOL) -> Check:
    DH = induced.space
    if not (C.domain.compatible(DH) and C.codomain.compatible(DH)):
        return Check(False, {}, {"shape": False}, [f"C must act on defect spaces {DH.dims}"])
    nrm = op_norm(C)
    res: Dict[str, float] = {"norm": nrm}
    worst = 0.0
    for k in DH.support():
        G = induced.basis(k)
        if G.shape[1] == 0:
            continue
        for j in DH.window:
            if j >= k:
                continue
            target = induced.omega(k) if j == k - 1 else 0.0
            r = spectral_norm(C.block(j, k) @ G - target)
            res[f"restriction({j},{k})"] = r
            worst = max(worst, r)
    res["restriction"] = worst
    flags = {
        "shape": True,
        "strictly_upper": C.is_strictly_upper,
        "contraction": nrm <= 1 + tol.psd_tol,
        "restriction": worst <= tol.eq_tol,
    }
    return Check(all(flags.values()), res, flags)


def canonical_C(induced: InducedData) -> BlockMatrix:
    """``C_{k-1,k} = omega_{H_k} Pi_{F_{H_k}}``, all other blocks zero."""
    DH = induced.space
    w = DH.window
    return BlockMatrix(
        DH, DH, {(k - 1, k): induced.omega(k) @ induced.basis(k).conj().T for k in w if k - 1 in w}
    )


def _free_entries(full, coiso, rows, known_rows) -> List[Tuple[int, int]]:
    """Entries ``(i, j)``, ``i < j``, that the restriction constraints leave free.

    ``full[j]`` says the prescribed subspace is the whole column space, and
    ``coiso[m]`` that the prescribed block feeding row ``m - 1`` is a co-isometry.
    """
    out = []
    for i in rows:
        if i not in known_rows or coiso[i + 1]:
            continue
        for j in full:
            if j > i and not full[j]:
                out.append((i, j))
    return out


def _perturbation(induced: InducedData, Y: Dict[Tuple[int, int], np.ndarray]) -> BlockMatrix:
    DH = induced.space
    blocks = {}
    for (i, j), y in Y.items():
        blocks[(i, j)] = induced.co_defect(i + 1) @ y @ induced.complement(j).conj().T
    return BlockMatrix(DH, DH, blocks)


def _free_param_entries(induced: InducedData):
    w = induced.window
    full = {k: induced.full(k) for k in w}
    coiso = {k: induced.coisometry[k - w.lo] for k in w}
    rows = [i for i in w if i + 1 in w and induced.space.dim(i) > 0]
    return _free_entries(full, coiso, rows, set(rows))


def random_member(
    induced: InducedData, rng: np.random.Generator, scale: float = 0.5
) -> BlockMatrix:
    """A random element ``canonical_C + D_{omega^*} Y Pi_G`` of the parameter set.

    ``Y`` is strictly upper with norm ``scale <= 1``; because the canonical part's
    rows are orthogonal and ``D_{omega^*}^2 = I - omega omega^*``, the sum is a
    contraction. Returns the canonical element when no entry is free.
    """
    if not 0 <= scale <= 1:
        raise ValueError("scale must lie in [0, 1]")
    free = _free_param_entries(induced)
    C0 = canonical_C(induced)
    if not free or scale == 0:
        return C0
    DH = induced.space
    Y = {}
    for i, j in free:
        c = induced.complement(j).shape[1]
        Y[(i, j)] = rng.standard_normal((DH.dim(i), c)) + 1j * rng.standard_normal((DH.dim(i), c))
    nrm = op_norm(BlockMatrix(BlockSpace(DH.window, tuple(induced.complement(k).shape[1] for k in DH.window)), DH, Y))
    Y = {key: y * (scale / nrm) for key, y in Y.items()}
    return C0 + _perturbation(induced, Y)


def param_witness(induced: InducedData) -> Optional[Tuple[BlockMatrix, Tuple[int, int]]]:
    """Second member differing from the canonical one in a single free entry.

    The entry ``(i, j)`` receives ``D_{omega_{H_{i+1}}^*} N Pi_{G_{H_j}}`` with
    ``N = u v^* / 2`` built from the top singular vector ``u`` of the co-isometry
    defect. Returns ``None`` when every entry is pinned.
    """
    free = _free_param_entries(induced)
    if not free:
        return None
    best = None
    for i, j in free:
        D = induced.co_defect(i + 1)
        u, s, _ = np.linalg.svd(D)
        if best is None or s[0] > best[0]:
            best = (s[0], i, j, u[:, :1])
    _, i, j, u = best
    c = induced.complement(j).shape[1]
    v = np.zeros((c, 1))
    v[0, 0] = 1.0
    C1 = canonical_C(induced) + _perturbation(induced, {(i, j): 0.5 * u @ v.T})
    return C1, (i, j)


class Parametrization(NamedTuple):
    Z1: BlockMatrix
    Z2: BlockMatrix
    F: BlockMatrix


def verify_parametrization(
    H: BlockMatrix, data: InterpolationData, par: Parametrization, tol: Tolerance = DEFAULT_TOL
) -> Check:
    zc = check_zpair(ZPair(par.Z1, par.Z2), data, tol)
    Hr, Fr = construct(ZPair(par.Z1, par.Z2))
    rec = max_block_residual(Hr, H)
    frec = max_block_residual(Fr, par.F)
    fint = check_F_interpolation(par.F, data, tol)
    res = {**zc.residuals, "reconstruction": rec, "F_reconstruction": frec, **fint.residuals}
    flags = {**zc.flags, "reconstruction": rec <= tol.eq_tol, "F_interpolation": fint.ok}
    return Check(all(flags.values()), res, flags)


def parametrize_solution(
    H: BlockMatrix,
    data: InterpolationData,
    C: BlockMatrix,
    tol: Tolerance = DEFAULT_TOL,
    induced: Optional[InducedData] = None,
) -> Parametrization:
    """``F = N + Pi^* nabla (I - C)^{-1} nabla Pi`` and ``(Z1, Z2) = (H F^{-1}, I - F^{-1})``.

    Raises :class:`MembershipError` when ``C`` is outside the parameter set (the
    resulting ``F`` would violate the F-interpolation condition).
    """
    ind = induced or induced_contractions(H, data, tol)
    mem = check_C_membership(C, ind, tol)
    if not mem.flags.get("shape", False):
        raise DimensionMismatch(mem.notes[0])
    if not (mem.flags["strictly_upper"] and mem.flags["contraction"]):
        raise MembershipError("C must be a strictly upper triangular contraction", mem.residuals)
    F = solve_problem2(H, C, tol, defects=ind.defects)
    fint = check_F_interpolation(F, data, tol)
    if not fint.ok:
        raise MembershipError(
            f"C violates the restriction constraints (F interpolation residual {fint.residuals['F_interpolation']:.3e})",
            {**mem.residuals, **fint.residuals},
        )
    pair = recover_zpair(H, F, tol)
    par = Parametrization(pair.Z1, pair.Z2, F)
    chk = verify_parametrization(H, data, par, tol)
    if not chk.ok:
        bad = [k for k, v in chk.flags.items() if not v]
        raise InterpolationError(f"parametrization failed its self-check: {bad}")
    return par


# --------------------------------------------------------------------
# uniqueness


@dataclass
class UniquenessReport:
    """Per-index flags and the verdict of the three sufficient-and-necessary conditions.

    ``full[k]``: the prescribed subspace fills its space; ``coisometry[k]``: the
    prescribed contraction is a co-isometry. ``unique`` refers to the parameter
    (or, at data level, to the (Z1, Z2) pair); ``free_entries`` lists the block
    positions left undetermined, which is empty exactly when ``unique`` holds.
    """

    level: str
    full: Dict[int, bool]
    coisometry: Dict[int, bool]
    coisometry_residuals: Dict[int, float]
    cond1: bool
    cond2: bool
    cond3: bool
    threshold: Optional[int]
    unique: bool
    free_entries: List[Tuple[int, int]] = field(default_factory=list)
    solution_unique: Optional[bool] = None

    def as_dict(self) -> dict:
        return {
            "level": self.level,
            "full": {str(k): v for k, v in self.full.items()},
            "coisometry": {str(k): v for k, v in self.coisometry.items()},
            "coisometry_residuals": {str(k): v for k, v in self.coisometry_residuals.items()},
            "cond1": self.cond1,
            "cond2": self.cond2,
            "cond3": self.cond3,
            "threshold": self.threshold,
            "unique": self.unique,
            "free_entries": [list(e) for e in self.free_entries],
            "solution_unique": self.solution_unique,
        }


def _verdict(level, full, coiso, cres, free) -> UniquenessReport:
    ks = sorted(full)
    c1 = all(full.values())
    c2 = all(coiso.values())
    threshold = None
    for t in range(ks[0] - 1, ks[-1] + 1):
        if all(coiso[j] for j in ks if j <= t) and all(full[j] for j in ks if j > t):
            threshold = t
            break
    c3 = threshold is not None
    unique = c1 or c2 or c3
    if unique != (not free):
        # the two characterisations agree by construction; guard against regressions
        raise AssertionError("uniqueness verdict disagrees with the free-entry scan")
    return UniquenessReport(level, full, coiso, cres, c1, c2, c3, threshold, unique, free)


def uniqueness_of_param(induced: InducedData, tol: Tolerance = DEFAULT_TOL) -> UniquenessReport:
    """Is the (Z1, Z2) pair producing this ``H`` unique?"""
    w = induced.window
    full = {k: induced.full(k) for k in w}
    # co-isometry onto a zero space holds vacuously
    coiso = {k: bool(induced.coisometry[k - w.lo]) for k in w}
    cres = {k: float(induced.coisometry_residuals[k - w.lo]) for k in w}
    return _verdict("parameter", full, coiso, cres, _free_param_entries(induced))


@dataclass(frozen=True)
class _DataLevel:
    """Restriction pattern of the stacked pair ``Zt_{i,j} = [Z1_{i+1,j}; Z2_{i,j}]``.

    Row ``i`` runs over ``lo-1 .. hi-1`` and lives in ``Y_{i+1} (+) U_i``.
    """

    data: InterpolationData
    complements: Dict[int, np.ndarray]
    co_defects: Dict[int, np.ndarray]
    coisometry: Dict[int, bool]
    coisometry_residuals: Dict[int, float]
    full: Dict[int, bool]

    def rows(self):
        w = self.data.window
        return [i for i in range(w.lo - 1, w.hi) if self.row_dim(i) > 0]

    def row_dim(self, i):
        return self.data.Y.dim(i + 1) + self.data.U.dim(i)

    def free(self):
        rows = self.rows()
        return _free_entries(self.full, self.coisometry, rows, set(rows))


def _data_level(data: InterpolationData, tol: Tolerance) -> _DataLevel:
    comps, codef, coiso, cres, full = {}, {}, {}, {}, {}
    for k, f, om in zip(data.window, data.F, data.omega):
        comps[k] = f.complement(tol).basis
        full[k] = f.rank == data.U.dim(k)
        D, r, flag = _coisometry_defect(om, tol)
        codef[k], cres[k], coiso[k] = D, r, flag
    return _DataLevel(data, comps, codef, coiso, cres, full)


def uniqueness_of_problem(data: InterpolationData, tol: Tolerance = DEFAULT_TOL) -> UniquenessReport:
    """Is the admissible (Z1, Z2) pair unique for the raw data?

    A unique pair forces a unique solution ``H``; when the pair is not unique the
    solution may or may not be, so ``solution_unique`` is then left as ``None``.
    """
    lvl = _data_level(data, tol)
    rep = _verdict("data", lvl.full, lvl.coisometry, lvl.coisometry_residuals, lvl.free())
    rep.solution_unique = True if rep.unique else None
    return rep


def _split_stacked(data: InterpolationData, Zt: Dict[Tuple[int, int], np.ndarray]) -> ZPair:
    z1, z2 = {}, {}
    for (i, j), b in Zt.items():
        y = data.Y.dim(i + 1)
        if y:
            z1[(i + 1, j)] = b[:y]
        if data.U.dim(i):
            z2[(i, j)] = b[y:]
    return ZPair(BlockMatrix(data.U, data.Y, z1), BlockMatrix(data.U, data.U, z2))


def _data_pair(data: InterpolationData, lvl: _DataLevel, Y: Dict[Tuple[int, int], np.ndarray]) -> ZPair:
    can = canonical_zpair(data)
    blocks = {}
    for (i, j), y in Y.items():
        blocks[(i, j)] = lvl.co_defects[i + 1] @ y @ lvl.complements[j].conj().T
    extra = _split_stacked(data, blocks)
    return ZPair(can.Z1 + extra.Z1, can.Z2 + extra.Z2)


def random_data_member(
    data: InterpolationData, rng: np.random.Generator, scale: float = 0.5, tol: Tolerance = DEFAULT_TOL
) -> ZPair:
    """A random admissible pair: canonical pair plus ``D_{omega^*} Y Pi_{F^perp}`` entries."""
    if not 0 <= scale <= 1:
        raise ValueError("scale must lie in [0, 1]")
    lvl = _data_level(data, tol)
    free = lvl.free()
    if not free or scale == 0:
        return canonical_zpair(data)
    Y = {}
    for i, j in free:
        shape = (lvl.row_dim(i), lvl.complements[j].shape[1])
        Y[(i, j)] = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    # dense norm of the strictly upper Y
    w = data.window
    rw = list(range(w.lo - 1, w.hi))
    ro = np.concatenate([[0], np.cumsum([lvl.row_dim(i) for i in rw])]).astype(int)
    co = np.concatenate([[0], np.cumsum([lvl.complements[k].shape[1] for k in w])]).astype(int)
    dense = np.zeros((ro[-1], co[-1]), dtype=complex)
    for (i, j), y in Y.items():
        a, b = i - rw[0], j - w.lo
        dense[ro[a]: ro[a + 1], co[b]: co[b + 1]] = y
    nrm = spectral_norm(dense)
    Y = {key: y * (scale / nrm) for key, y in Y.items()}
    return _data_pair(data, lvl, Y)


def problem_witness(
    data: InterpolationData,
    tol: Tolerance = DEFAULT_TOL,
    rng: Optional[np.random.Generator] = None,
    tries: int = 4,
    refine: int = 3,
):
    """Two solutions built from distinct admissible pairs, chosen to be far apart.

    Each free entry ``(i, j)`` receives ``N = u v^* / 2`` with ``u`` a unit vector
    in the range of the co-isometry defect and ``v`` a unit vector of the
    complement. A coarse pass tries the top singular direction on every entry;
    the ``refine`` best entries are then searched over all singular directions,
    complement basis vectors and ``tries`` random directions. Returns
    ``(H_central, H_other, gap, (i, j))`` for the largest gap, or ``None`` when
    the pair is unique.
    """
    lvl = _data_level(data, tol)
    free = lvl.free()
    if not free:
        return None
    rng = rng if rng is not None else np.random.default_rng(0)
    H0, _ = construct(canonical_zpair(data))

    def attempt(i, j, u, v):
        H1, _ = construct(_data_pair(data, lvl, {(i, j): 0.5 * u @ v.conj().T}))
        return op_norm(H1 - H0), H1

    coarse = []
    for i, j in free:
        u = np.linalg.svd(lvl.co_defects[i + 1])[0][:, :1]
        v = np.eye(lvl.complements[j].shape[1])[:, :1]
        gap, H1 = attempt(i, j, u, v)
        coarse.append((gap, i, j, H1))
    coarse.sort(key=lambda t: -t[0])
    gap, i, j, H1 = coarse[0]
    best = (H0, H1, gap, (i, j))
    for _, i, j, _ in coarse[:refine]:
        D = lvl.co_defects[i + 1]
        u, s, _ = np.linalg.svd(D)
        us = [u[:, [a]] for a in range(len(s)) if s[a] > tol.rank_tol]
        c = lvl.complements[j].shape[1]
        vs = [np.eye(c)[:, [b]] for b in range(c)]
        for _ in range(tries):
            x = rng.standard_normal((D.shape[0], 1)) + 1j * rng.standard_normal((D.shape[0], 1))
            us.append(x / np.linalg.norm(x))
            y = rng.standard_normal((c, 1)) + 1j * rng.standard_normal((c, 1))
            vs.append(y / np.linalg.norm(y))
        for uu in us:
            for vv in vs:
                gap, H1 = attempt(i, j, uu, vv)
                if gap > best[2]:
                    best = (H0, H1, gap, (i, j))
    return best
