"""JSON serialization of problem files, candidates and reports.

Complex numbers are ``[re, im]`` pairs, dense matrices are
``{"shape": [r, c], "data": [[[re, im], ...], ...]}`` and block matrices are
``{"window": [lo, hi], "dims_domain": [...], "dims_codomain": [...],
"blocks": [{"j": j, "k": k, "data": <matrix>}, ...]}``. See ``docs/FORMAT.md``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from .core import DEFAULT_TOL, BlockMatrix, BlockSpace, Subspace, Tolerance, Window
from .errors import TvInterpError
from .majorant import StateSpaceSystem
from .param import Parametrization
from .problem import CompletionInstance4x4, InterpolationData, ZPair
from .rcl import BSequence, RclData

__all__ = [
    "KINDS",
    "FormatError",
    "ProblemFile",
    "encode_matrix",
    "decode_matrix",
    "encode_block_matrix",
    "decode_block_matrix",
    "encode",
    "decode",
    "load",
    "dump",
    "dumps",
    "sanitize",
]

KINDS = (
    "interpolation",
    "rcl",
    "statespace",
    "completion4x4",
    "zpair",
    "blockmatrix",
    "bsequence",
    "parametrization",
    "cayley",
    "lyapunov",
    "matrix",
)


class FormatError(TvInterpError, ValueError):
    """The file does not follow the documented format."""


@dataclass(frozen=True)
class ProblemFile:
    kind: str
    payload: Any
    tolerances: Optional[Tolerance] = None


def _num(x: complex):
    return [float(x.real), float(x.imag)]


def encode_matrix(a) -> dict:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise FormatError("only two-dimensional matrices can be encoded")
    return {"shape": [int(a.shape[0]), int(a.shape[1])], "data": [[_num(x) for x in row] for row in a]}


def decode_matrix(obj) -> np.ndarray:
    try:
        r, c = (int(v) for v in obj["shape"])
        data = obj["data"]
        out = np.zeros((r, c), dtype=complex)
        if len(data) != r:
            raise FormatError(f"matrix has {len(data)} rows, shape says {r}")
        for i, row in enumerate(data):
            if len(row) != c:
                raise FormatError(f"row {i} has {len(row)} entries, shape says {c}")
            for j, x in enumerate(row):
                if isinstance(x, (int, float)):
                    out[i, j] = float(x)
                else:
                    re, im = x
                    out[i, j] = complex(float(re), float(im))
        return out
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed matrix: {exc}") from exc


def _window(obj) -> Window:
    lo, hi = (int(v) for v in obj)
    return Window(lo, hi)


def encode_block_matrix(M: BlockMatrix) -> dict:
    out = {
        "window": [M.domain.window.lo, M.domain.window.hi],
        "dims_domain": list(M.domain.dims),
        "dims_codomain": list(M.codomain.dims),
        "blocks": [{"j": j, "k": k, "data": encode_matrix(M.block(j, k))} for j, k in M.support()],
    }
    if M.codomain.window != M.domain.window:
        out["window_codomain"] = [M.codomain.window.lo, M.codomain.window.hi]
    return out


def decode_block_matrix(obj) -> BlockMatrix:
    try:
        w = _window(obj["window"])
        wc = _window(obj["window_codomain"]) if "window_codomain" in obj else w
        dom = BlockSpace(w, tuple(obj["dims_domain"]))
        cod = BlockSpace(wc, tuple(obj["dims_codomain"]))
        blocks = {}
        for b in obj.get("blocks", []):
            key = (int(b["j"]), int(b["k"]))
            if key in blocks:
                raise FormatError(f"block {key} given twice")
            blocks[key] = decode_matrix(b["data"])
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed block matrix: {exc}") from exc
    return BlockMatrix(dom, cod, blocks)


def _enc_list(ms):
    return [encode_matrix(m) for m in ms]


def _dec_list(objs):
    return [decode_matrix(o) for o in objs]


def _encode_payload(kind: str, obj) -> dict:
    if kind == "interpolation":
        return {
            "window": [obj.window.lo, obj.window.hi],
            "U": list(obj.U.dims),
            "Y": list(obj.Y.dims),
            "F": _enc_list(f.basis for f in obj.F),
            "omega": _enc_list(obj.omega),
        }
    if kind == "rcl":
        return {
            "window": [obj.window.lo, obj.window.hi],
            "h": list(obj.h),
            "hp": list(obj.hp),
            "h0": list(obj.h0),
            "A": _enc_list(obj.A),
            "Tp": _enc_list(obj.Tp),
            "R": _enc_list(obj.R),
            "Q": _enc_list(obj.Q),
        }
    if kind == "statespace":
        return {"A": encode_matrix(obj.A), "B": encode_matrix(obj.B), "E": encode_matrix(obj.E), "D": encode_block_matrix(obj.D)}
    if kind == "completion4x4":
        out = {"X_dims": list(obj.X_dims), "Y_dims": list(obj.Y_dims)}
        if obj.A is not None:
            out["A"] = [[encode_matrix(b) for b in row] for row in obj.A]
        return out
    if kind == "zpair":
        return {"Z1": encode_block_matrix(obj.Z1), "Z2": encode_block_matrix(obj.Z2)}
    if kind == "parametrization":
        return {"Z1": encode_block_matrix(obj.Z1), "Z2": encode_block_matrix(obj.Z2), "F": encode_block_matrix(obj.F)}
    if kind in ("blockmatrix", "cayley"):
        return encode_block_matrix(obj)
    if kind == "bsequence":
        return {"window": [obj.window.lo, obj.window.hi], "B": _enc_list(obj.B)}
    if kind == "lyapunov":
        A, E = obj
        return {"A": encode_matrix(A), "E": encode_matrix(E)}
    if kind == "matrix":
        return encode_matrix(obj)
    raise FormatError(f"unknown kind {kind!r}")


def _decode_payload(kind: str, p):
    if kind == "interpolation":
        w = _window(p["window"])
        U, Y = BlockSpace(w, tuple(p["U"])), BlockSpace(w, tuple(p["Y"]))
        return InterpolationData(U, Y, tuple(Subspace(b) for b in _dec_list(p["F"])), tuple(_dec_list(p["omega"])))
    if kind == "rcl":
        return RclData(
            _window(p["window"]),
            tuple(p["h"]),
            tuple(p["hp"]),
            tuple(p["h0"]),
            *(tuple(_dec_list(p[n])) for n in ("A", "Tp", "R", "Q")),
        )
    if kind == "statespace":
        return StateSpaceSystem(decode_matrix(p["A"]), decode_matrix(p["B"]), decode_matrix(p["E"]), decode_block_matrix(p["D"]))
    if kind == "completion4x4":
        A = None
        if "A" in p:
            A = tuple(tuple(decode_matrix(b) for b in row) for row in p["A"])
            if len(A) != 4 or any(len(r) != 4 for r in A):
                raise FormatError("completion matrix must be 4 x 4 blocks")
        xd, yd = tuple(int(v) for v in p["X_dims"]), tuple(int(v) for v in p["Y_dims"])
        if len(xd) != 4 or len(yd) != 4:
            raise FormatError("X_dims and Y_dims must have four entries")
        return CompletionInstance4x4(xd, yd, A)
    if kind == "zpair":
        return ZPair(decode_block_matrix(p["Z1"]), decode_block_matrix(p["Z2"]))
    if kind == "parametrization":
        return Parametrization(decode_block_matrix(p["Z1"]), decode_block_matrix(p["Z2"]), decode_block_matrix(p["F"]))
    if kind in ("blockmatrix", "cayley"):
        return decode_block_matrix(p)
    if kind == "bsequence":
        return BSequence(_window(p["window"]), tuple(_dec_list(p["B"])))
    if kind == "lyapunov":
        return decode_matrix(p["A"]), decode_matrix(p["E"])
    if kind == "matrix":
        return decode_matrix(p)
    raise FormatError(f"unknown kind {kind!r}")


def encode(pf: ProblemFile) -> dict:
    out = {"kind": pf.kind, "payload": _encode_payload(pf.kind, pf.payload)}
    if pf.tolerances is not None:
        t = pf.tolerances
        out["tolerances"] = {"rank_tol": t.rank_tol, "psd_tol": t.psd_tol, "eq_tol": t.eq_tol}
    return out


def decode(obj) -> ProblemFile:
    """Parse a problem file object.

    Format violations raise :class:`FormatError`; shape inconsistencies raise
    :class:`~tvinterp.errors.DimensionMismatch` from the type constructors.
    """
    if not isinstance(obj, dict) or "kind" not in obj or "payload" not in obj:
        raise FormatError("a problem file needs 'kind' and 'payload'")
    kind = obj["kind"]
    if kind not in KINDS:
        raise FormatError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    tol = None
    if "tolerances" in obj:
        t = obj["tolerances"]
        try:
            tol = Tolerance(
                float(t.get("rank_tol", DEFAULT_TOL.rank_tol)),
                float(t.get("psd_tol", DEFAULT_TOL.psd_tol)),
                float(t.get("eq_tol", DEFAULT_TOL.eq_tol)),
            )
        except (AttributeError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed tolerances: {exc}") from exc
    try:
        payload = _decode_payload(kind, obj["payload"])
    except FormatError:
        raise
    except (KeyError, TypeError, AttributeError) as exc:
        raise FormatError(f"malformed {kind} payload: {exc!r}") from exc
    return ProblemFile(kind, payload, tol)


def load(path) -> ProblemFile:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror}") from exc
    return decode(obj)


def sanitize(x):
    """Make a report JSON-safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): sanitize(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [sanitize(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        if math.isfinite(v):
            return v
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return x


def dumps(obj) -> str:
    return json.dumps(sanitize(obj), sort_keys=True, indent=2) + "\n"


def dump(pf: ProblemFile, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(encode(pf)))
