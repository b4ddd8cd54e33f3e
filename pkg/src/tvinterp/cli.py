"""Command line front end.

Every command prints a JSON report (sorted keys) on standard output and
writes its main artifact to ``--out`` when given. Exit status: 0 all verdicts
pass, 1 a verdict fails or the input data is rejected, 2 the input cannot be
parsed, 3 shapes are inconsistent, 4 a parameter violates the membership
constraints.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from . import sampling
from .core import (
    DEFAULT_TOL,
    BlockSpace,
    Tolerance,
    column_gram,
    is_column_contractive,
    max_block_residual,
    min_eigenvalue,
    op_norm,
    real_part,
    spectral_norm,
)
from .errors import DimensionMismatch, MembershipError, TvInterpError
from .io import FormatError, ProblemFile, dump, dumps, load
from .majorant import (
    StateSpaceSystem,
    cayley,
    inverse_cayley,
    lyapunov_solve,
    state_space_gram,
    state_space_to_H,
)
from .param import (
    canonical_C,
    check_C_membership,
    induced_contractions,
    parametrize_solution,
    random_member,
    uniqueness_of_param,
    uniqueness_of_problem,
    verify_parametrization,
)
from .problem import (
    CompletionInstance4x4,
    InterpolationData,
    ZPair,
    central_solution,
    check_F_interpolation,
    check_interpolation,
    check_zpair,
    construct,
    embed_completion_4x4,
    extract_completion,
    validate_data,
)
from .rcl import (
    b_to_h,
    build_lifting,
    check_rcl_solution,
    h_to_b,
    omega_roundtrip_residual,
    omega_to_rcl,
    underlying_contractions,
    validate_rcl,
)

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_SHAPE, EXIT_MEMBERSHIP = 0, 1, 2, 3, 4


class Report:
    """Named verdicts backed by residuals, plus optional artifacts."""

    def __init__(self, command: str, seed: Optional[int] = None):
        self.command = command
        self.seed = seed
        self.verdicts: Dict[str, bool] = {}
        self.residuals: Dict[str, object] = {}
        self.info: Dict[str, object] = {}
        self.artifacts: List[str] = []

    def add(self, name: str, check, prefix: Optional[str] = None):
        self.verdicts[name] = bool(check.ok)
        p = prefix or name
        for k, v in check.residuals.items():
            self.residuals[f"{p}.{k}"] = v
        for k, v in check.flags.items():
            self.info[f"{p}.flag.{k}"] = bool(v)

    def verdict(self, name: str, ok: bool, **residuals):
        self.verdicts[name] = bool(ok)
        for k, v in residuals.items():
            self.residuals[f"{name}.{k}"] = v

    @property
    def ok(self) -> bool:
        return all(self.verdicts.values())

    def as_dict(self) -> dict:
        out = {
            "command": self.command,
            "verdicts": self.verdicts,
            "residuals": self.residuals,
            "artifacts": self.artifacts,
            "all_pass": self.ok,
        }
        if self.info:
            out["info"] = self.info
        if self.seed is not None:
            out["seed"] = self.seed
        return out


def _tol(args, pf: Optional[ProblemFile] = None) -> Tolerance:
    base = pf.tolerances if pf is not None and pf.tolerances is not None else DEFAULT_TOL
    return Tolerance(
        args.tol_rank if args.tol_rank is not None else base.rank_tol,
        args.tol_psd if args.tol_psd is not None else base.psd_tol,
        args.tol_eq if args.tol_eq is not None else base.eq_tol,
    )


def _require(pf: ProblemFile, *kinds):
    if pf.kind not in kinds:
        raise FormatError(f"expected a file of kind {' or '.join(kinds)}, got {pf.kind!r}")


def _write(args, rep: Report, kind: str, obj, tol: Optional[Tolerance] = None, path=None):
    path = path or args.out
    if path:
        dump(ProblemFile(kind, obj, tol), path)
        rep.artifacts.append(str(path))


def _interp_data(pf: ProblemFile) -> InterpolationData:
    if pf.kind == "completion4x4":
        p = pf.payload
        return embed_completion_4x4(p.X_dims, p.Y_dims)
    _require(pf, "interpolation")
    return pf.payload


# --------------------------------------------------------------------
# verify


def _verify_H(rep, H, data, tol):
    rep.add("interpolation", check_interpolation(H, data, tol))
    rep.add("column_contractive", is_column_contractive(H, tol))


def _verify(rep: Report, pf: ProblemFile, cand: ProblemFile, tol: Tolerance):
    k, c = pf.kind, cand.kind
    if k in ("interpolation", "completion4x4") and c == "blockmatrix":
        data = _interp_data(pf)
        _verify_H(rep, cand.payload, data, tol)
        if k == "completion4x4" and rep.ok:
            inst, overlap = extract_completion(cand.payload, data, tol)
            _completion_verdicts(rep, inst, tol, overlap)
    elif k in ("interpolation", "completion4x4") and c == "zpair":
        rep.add("zpair", check_zpair(cand.payload, _interp_data(pf), tol))
    elif k in ("interpolation", "completion4x4") and c == "parametrization":
        data = _interp_data(pf)
        par = cand.payload
        rep.add("zpair", check_zpair(ZPair(par.Z1, par.Z2), data, tol))
        rep.add("F_interpolation", check_F_interpolation(par.F, data, tol))
        H, F = construct(ZPair(par.Z1, par.Z2))
        rep.verdict("F_consistent", max_block_residual(F, par.F) <= tol.eq_tol, residual=max_block_residual(F, par.F))
        _verify_H(rep, H, data, tol)
    elif k == "interpolation" and c == "rcl":
        data = pf.payload
        rep.add("rcl_valid", validate_rcl(cand.payload, tol))
        r, _ = omega_roundtrip_residual(data, cand.payload, tol)
        rep.verdict("omega_roundtrip", r <= tol.eq_tol, residual=r)
    elif k == "completion4x4" and c == "completion4x4":
        inst = cand.payload
        if inst.A is None:
            raise FormatError("candidate completion carries no matrix")
        if inst.X_dims != pf.payload.X_dims or inst.Y_dims != pf.payload.Y_dims:
            raise DimensionMismatch("candidate completion dimensions differ from the problem")
        _completion_verdicts(rep, inst, tol, 0.0)
    elif k == "rcl" and c == "bsequence":
        rep.add("rcl_solution", check_rcl_solution(cand.payload, pf.payload, tol))
    elif k == "rcl" and c == "blockmatrix":
        lam = pf.payload
        und = underlying_contractions(lam, tol)
        _verify_H(rep, cand.payload, und, tol)
    elif k == "statespace" and c == "blockmatrix":
        sys_ = pf.payload
        G = state_space_gram(sys_)
        H = cand.payload
        rep.add("column_contractive", is_column_contractive(H, tol))
        rows = [kk for kk in H.domain.window if kk in sys_.U.window]
        gH = column_gram(H)
        r = max((spectral_norm(gH.block(a, b) - G.block(a, b)) for a in rows for b in rows), default=0.0)
        rep.verdict("gram", r <= tol.eq_tol, residual=r)
    elif k in ("cayley", "blockmatrix") and c in ("cayley", "blockmatrix"):
        C, K = pf.payload, cand.payload
        r = max_block_residual(cayley(C, tol), K)
        rep.verdict("cayley", r <= tol.eq_tol, residual=r)
    elif k in ("lyapunov", "statespace") and c == "matrix":
        A, E = (pf.payload.A, pf.payload.E) if k == "statespace" else pf.payload
        P = cand.payload
        r = spectral_norm(P - A.conj().T @ P @ A - E.conj().T @ E)
        rep.verdict("lyapunov", r <= tol.eq_tol, residual=r, min_eigenvalue=min_eigenvalue(P))
    else:
        raise FormatError(f"cannot verify a {c!r} candidate against a {k!r} problem")


def _completion_verdicts(rep, inst: CompletionInstance4x4, tol, overlap):
    norms = inst.slab_norms()
    rep.verdict(
        "slabs",
        all(n <= 1 + tol.psd_tol for n in norms),
        **{f"slab_norm[{i + 1}]": float(n) for i, n in enumerate(norms)},
    )
    rep.verdict("overlap", overlap <= tol.eq_tol, residual=overlap)


def cmd_verify(args) -> Report:
    pf, cand = load(args.problem), load(args.candidate)
    tol = _tol(args, pf)
    rep = Report("verify")
    _verify(rep, pf, cand, tol)
    return rep


# --------------------------------------------------------------------
# central


def cmd_central(args) -> Report:
    pf = load(args.problem)
    tol = _tol(args, pf)
    data = _interp_data(pf)
    rep = Report("central")
    v = validate_data(data, tol)
    rep.verdict("data_valid", v.ok, **{kk: vv for kk, vv in v.residuals.items() if kk.startswith("omega_norm")})
    H = central_solution(data)
    _verify_H(rep, H, data, tol)
    _write(args, rep, "blockmatrix", H)
    if pf.kind == "completion4x4":
        inst, overlap = extract_completion(H, data, tol)
        _completion_verdicts(rep, inst, tol, overlap)
        if args.out_completion:
            _write(args, rep, "completion4x4", inst, path=args.out_completion)
    return rep


# --------------------------------------------------------------------
# parametrize


def cmd_parametrize(args) -> Report:
    pf = load(args.problem)
    tol = _tol(args, pf)
    data = _interp_data(pf)
    rep = Report("parametrize", seed=args.seed if args.random else None)
    if args.H:
        hf = load(args.H)
        _require(hf, "blockmatrix")
        H = hf.payload
    else:
        H = central_solution(data)
    ind = induced_contractions(H, data, tol)
    if args.C:
        cf = load(args.C)
        _require(cf, "blockmatrix", "cayley")
        C = cf.payload
        mode = "file"
    elif args.random:
        C = random_member(ind, np.random.default_rng(args.seed))
        mode = "random"
    else:
        C = canonical_C(ind)
        mode = "canonical"
    rep.info["parameter"] = mode
    mem = check_C_membership(C, ind, tol)
    if not mem.flags.get("shape", False):
        raise DimensionMismatch(mem.notes[0])
    rep.add("membership", mem)
    if not mem.ok:
        raise MembershipError("C is not in the parameter set", mem.residuals)
    par = parametrize_solution(H, data, C, tol, induced=ind)
    rep.add("parametrization", verify_parametrization(H, data, par, tol))
    up = uniqueness_of_param(ind, tol)
    ud = uniqueness_of_problem(data, tol)
    rep.info["uniqueness_parameter"] = up.as_dict()
    rep.info["uniqueness_data"] = ud.as_dict()
    _write(args, rep, "parametrization", par)
    return rep


# --------------------------------------------------------------------
# rcl


def cmd_rcl(args) -> Report:
    pf = load(args.problem)
    tol = _tol(args, pf)
    rep = Report(f"rcl {args.action}")
    if args.action == "embed":
        _require(pf, "interpolation")
        data = pf.payload
        validate_data(data, tol)
        lam = omega_to_rcl(data)
        rep.add("rcl_valid", validate_rcl(lam, tol))
        r, _ = omega_roundtrip_residual(data, lam, tol)
        rep.verdict("omega_roundtrip", r <= tol.eq_tol, residual=r)
        _write(args, rep, "rcl", lam)
        return rep
    _require(pf, "rcl")
    lam = pf.payload
    rep.add("rcl_valid", validate_rcl(lam, tol))
    lf = build_lifting(lam, tol)
    r = lf.isometry_residual()
    rep.verdict("lifting_isometry", r <= tol.eq_tol, residual=r)
    und = underlying_contractions(lam, tol, lf)
    if args.action == "lift":
        H = central_solution(und)
        _verify_H(rep, H, und, tol)
        B = h_to_b(H, lam, tol, lf)
        rep.add("rcl_solution", check_rcl_solution(B, lam, tol, lf))
        _write(args, rep, "bsequence", B)
        return rep
    # translate
    if not args.candidate:
        raise FormatError("rcl translate needs a candidate file")
    cand = load(args.candidate)
    if cand.kind == "bsequence":
        rep.add("rcl_solution", check_rcl_solution(cand.payload, lam, tol, lf))
        H = b_to_h(cand.payload, lam, tol, lf)
        _verify_H(rep, H, und, tol)
        _write(args, rep, "blockmatrix", H)
    elif cand.kind == "blockmatrix":
        _verify_H(rep, cand.payload, und, tol)
        B = h_to_b(cand.payload, lam, tol, lf)
        rep.add("rcl_solution", check_rcl_solution(B, lam, tol, lf))
        _write(args, rep, "bsequence", B)
    else:
        raise FormatError(f"rcl translate accepts bsequence or blockmatrix, got {cand.kind!r}")
    return rep


# --------------------------------------------------------------------
# cayley / lyapunov


def cmd_cayley(args) -> Report:
    pf = load(args.problem)
    _require(pf, "cayley", "blockmatrix")
    tol = _tol(args, pf)
    M = pf.payload
    rep = Report("cayley --inverse" if args.inverse else "cayley")
    if args.inverse:
        C = inverse_cayley(M, tol)
        back = cayley(C, tol)
        nrm = op_norm(C)
        rep.verdict("contraction", nrm <= 1 + tol.psd_tol, norm=nrm)
        rep.verdict("strictly_upper", C.is_strictly_upper)
        r = max_block_residual(back, M)
        rep.verdict("roundtrip", r <= tol.eq_tol, residual=r)
        _write(args, rep, "cayley", C)
    else:
        K = cayley(M, tol)
        lam = min_eigenvalue(real_part(K).dense())
        rep.verdict("positive_real", lam >= -tol.psd_tol, min_eigenvalue=lam)
        r = max_block_residual(inverse_cayley(K, tol), M)
        rep.verdict("roundtrip", r <= tol.eq_tol, residual=r)
        _write(args, rep, "cayley", K)
    return rep


def cmd_lyapunov(args) -> Report:
    pf = load(args.problem)
    _require(pf, "lyapunov", "statespace")
    tol = _tol(args, pf)
    rep = Report("lyapunov")
    if pf.kind == "lyapunov":
        A, E = pf.payload
        P = lyapunov_solve(A, E, tol)
    else:
        sys_: StateSpaceSystem = pf.payload
        A, E, P = sys_.A, sys_.E, sys_.P
        G = state_space_gram(sys_)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            H = state_space_to_H(sys_, args.depth, tol)
        rep.info["truncation_warnings"] = [str(w.message) for w in caught]
        gH = column_gram(H)
        win = list(sys_.U.window)
        r = max((spectral_norm(gH.block(a, b) - G.block(a, b)) for a in win for b in win), default=0.0)
        rep.verdict("gram", r <= tol.eq_tol, residual=r, depth=args.depth)
        diag = max(spectral_norm(G.block(k, k)) for k in win)
        rep.verdict("column_contractive", diag <= 1 + tol.psd_tol, max_diagonal_norm=diag)
    r = spectral_norm(P - A.conj().T @ P @ A - E.conj().T @ E)
    rep.verdict("lyapunov", r <= tol.eq_tol, residual=r, min_eigenvalue=min_eigenvalue(P))
    _write(args, rep, "matrix", P)
    return rep


# --------------------------------------------------------------------
# sample


def cmd_sample(args) -> Report:
    rng = np.random.default_rng(args.seed)
    rep = Report(f"sample {args.kind}", seed=args.seed)
    if args.kind == "interpolation":
        obj = sampling.random_data(rng, width=args.width, max_dim=args.max_dim)
    elif args.kind == "rcl":
        obj = sampling.random_rcl(rng, width=args.width, max_dim=args.max_dim)
    elif args.kind == "statespace":
        obj = sampling.random_state_space(rng, n=args.width)
    elif args.kind == "completion4x4":
        dims = [int(d) for d in rng.integers(1, args.max_dim + 1, size=8)]
        obj = CompletionInstance4x4(tuple(dims[:4]), tuple(dims[4:]), None)
    elif args.kind == "cayley":
        space = BlockSpace.from_dims(0, sampling.random_dims(rng, args.width, 1, args.max_dim))
        obj = sampling.random_strict_upper_contraction(rng, space)
    else:
        A = sampling.gaussian(rng, args.max_dim, args.max_dim)
        A = A * (0.8 / np.max(np.abs(np.linalg.eigvals(A))))
        obj = (A, sampling.gaussian(rng, args.max_dim, args.max_dim))
    rep.verdict("generated", True)
    _write(args, rep, args.kind, obj)
    return rep


# --------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol-rank", type=float, default=None, help="singular value threshold")
    common.add_argument("--tol-psd", type=float, default=None, help="allowed negative eigenvalue magnitude")
    common.add_argument("--tol-eq", type=float, default=None, help="residual threshold for equalities")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized runs")
    common.add_argument("--out", default=None, help="write the main artifact to this path")

    p = argparse.ArgumentParser(prog="tvinterp", description="Time-variant norm-constrained interpolation toolkit")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("verify", parents=[common], help="check a candidate against a problem")
    s.add_argument("problem")
    s.add_argument("candidate")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("central", parents=[common], help="central solution of interpolation data")
    s.add_argument("problem")
    s.add_argument("--out-completion", default=None, help="write the extracted 4x4 completion here")
    s.set_defaults(func=cmd_central)

    s = sub.add_parser("parametrize", parents=[common], help="(Z1, Z2, F) for a solution and a parameter")
    s.add_argument("problem")
    s.add_argument("--H", default=None, help="solution file (default: central solution)")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--C", default=None, help="parameter file")
    g.add_argument("--canonical", action="store_true", help="use the canonical parameter (default)")
    g.add_argument("--random", action="store_true", help="random member of the parameter set (uses --seed)")
    s.set_defaults(func=cmd_parametrize)

    s = sub.add_parser("rcl", parents=[common], help="relaxed commutant lifting")
    s.add_argument("action", choices=["lift", "translate", "embed"])
    s.add_argument("problem")
    s.add_argument("candidate", nargs="?", default=None)
    s.set_defaults(func=cmd_rcl)

    s = sub.add_parser("cayley", parents=[common], help="Cayley transform of a strictly upper contraction")
    s.add_argument("problem")
    s.add_argument("--inverse", action="store_true", help="inverse transform of a positive real K")
    s.set_defaults(func=cmd_cayley)

    s = sub.add_parser("lyapunov", parents=[common], help="Stein equation P = A*PA + E*E")
    s.add_argument("problem")
    s.add_argument("--depth", type=int, default=60, help="truncation depth for state space columns")
    s.set_defaults(func=cmd_lyapunov)

    s = sub.add_parser("sample", parents=[common], help="write a random problem file")
    s.add_argument("kind", choices=["interpolation", "rcl", "statespace", "completion4x4", "cayley", "lyapunov"])
    s.add_argument("--width", type=int, default=4)
    s.add_argument("--max-dim", type=int, default=3)
    s.set_defaults(func=cmd_sample)
    return p


def _error_report(command, code, exc, extra=None) -> dict:
    err = {"type": type(exc).__name__, "message": str(exc), "exit_code": code}
    idx = getattr(exc, "index", None)
    if idx is not None:
        err["index"] = idx
    if extra:
        err.update(extra)
    return {"command": command, "all_pass": False, "error": err}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rep = args.func(args)
    except FormatError as exc:
        out, code = _error_report(args.command, EXIT_PARSE, exc), EXIT_PARSE
    except DimensionMismatch as exc:
        out, code = _error_report(args.command, EXIT_SHAPE, exc), EXIT_SHAPE
    except MembershipError as exc:
        out, code = _error_report(args.command, EXIT_MEMBERSHIP, exc, {"residuals": exc.residuals}), EXIT_MEMBERSHIP
    except TvInterpError as exc:
        out, code = _error_report(args.command, EXIT_FAIL, exc), EXIT_FAIL
    else:
        out, code = rep.as_dict(), (EXIT_OK if rep.ok else EXIT_FAIL)
    if "error" in out:
        print(f"tvinterp: {out['error']['message']}", file=sys.stderr)
    sys.stdout.write(dumps(out))
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
