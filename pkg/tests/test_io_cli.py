import json

import numpy as np
import pytest

from conftest import scalar_bm
from tvinterp import cli
from tvinterp.core import BlockMatrix, BlockSpace, Tolerance, max_block_residual
from tvinterp.io import (
    FormatError,
    ProblemFile,
    decode,
    decode_block_matrix,
    decode_matrix,
    dump,
    dumps,
    encode,
    encode_block_matrix,
    encode_matrix,
    load,
    sanitize,
)
from tvinterp.problem import CompletionInstance4x4, InterpolationData, central_solution
from tvinterp.sampling import random_data, random_rcl, random_state_space, random_strict_upper_contraction


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, json.loads(out.out), out


def write(tmp_path, name, kind, obj, tol=None):
    p = tmp_path / name
    dump(ProblemFile(kind, obj, tol), p)
    return p


def test_matrix_roundtrip(rng):
    a = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    np.testing.assert_array_equal(decode_matrix(encode_matrix(a)), a)
    assert decode_matrix({"shape": [1, 2], "data": [[1, 2.5]]}).tolist() == [[1, 2.5]]
    assert decode_matrix(encode_matrix(np.zeros((0, 3)))).shape == (0, 3)
    with pytest.raises(FormatError):
        decode_matrix({"shape": [2, 1], "data": [[[1, 0]]]})
    with pytest.raises(FormatError):
        decode_matrix({"data": []})


def test_block_matrix_roundtrip(rng):
    dom = BlockSpace.from_dims(-1, [2, 0, 1])
    cod = BlockSpace.from_dims(-1, [1, 3, 2])
    M = BlockMatrix(dom, cod, {(-1, -1): rng.standard_normal((1, 2)), (0, 1): rng.standard_normal((3, 1))})
    back = decode_block_matrix(json.loads(json.dumps(encode_block_matrix(M))))
    assert back.support() == M.support()
    assert max_block_residual(back, M) == 0
    with pytest.raises(FormatError):
        decode_block_matrix({"window": [0, 0], "dims_domain": [1], "dims_codomain": [1],
                             "blocks": [{"j": 0, "k": 0, "data": encode_matrix([[1]])}] * 2})


@pytest.mark.parametrize("kind", ["interpolation", "rcl", "statespace", "completion4x4", "cayley", "lyapunov"])
def test_problem_file_roundtrip(kind, rng, tmp_path):
    obj = {
        "interpolation": lambda: random_data(rng),
        "rcl": lambda: random_rcl(rng),
        "statespace": lambda: random_state_space(rng),
        "completion4x4": lambda: CompletionInstance4x4((1, 2, 1, 1), (2, 1, 1, 2), None),
        "cayley": lambda: random_strict_upper_contraction(rng, BlockSpace.from_dims(0, [1, 2, 1])),
        "lyapunov": lambda: (0.5 * np.eye(2), np.ones((1, 2))),
    }[kind]()
    p = write(tmp_path, "f.json", kind, obj, Tolerance(1e-9, 1e-9, 1e-7))
    pf = load(p)
    assert pf.kind == kind and pf.tolerances == Tolerance(1e-9, 1e-9, 1e-7)
    # re-encoding is byte identical
    assert dumps(encode(pf)) == p.read_text()


def test_decode_errors(tmp_path):
    with pytest.raises(FormatError):
        decode({"kind": "interpolation"})
    with pytest.raises(FormatError):
        decode({"kind": "nope", "payload": {}})
    with pytest.raises(FormatError):
        decode({"kind": "interpolation", "payload": {"window": [0, 0]}})
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(FormatError):
        load(p)
    with pytest.raises(FormatError):
        load(tmp_path / "missing.json")


def test_sanitize():
    out = sanitize({"a": np.float64(np.inf), "b": [np.int64(3), np.bool_(True)], "c": -np.inf})
    assert out == {"a": "inf", "b": [3, True], "c": "-inf"}
    assert json.loads(dumps(out)) == out


def test_central_and_verify(tmp_path, capsys, rng):
    prob = write(tmp_path, "p.json", "interpolation", random_data(rng))
    out = tmp_path / "H.json"
    code, rep, _ = run(["central", prob, "--out", out], capsys)
    assert code == 0 and rep["all_pass"] and rep["artifacts"] == [str(out)]
    code, rep, _ = run(["verify", prob, out], capsys)
    assert code == 0 and rep["verdicts"]["interpolation"] and rep["verdicts"]["column_contractive"]


def test_verify_failure_exit_1(tmp_path, capsys):
    F = [np.eye(1)] * 2
    om = [np.array([[0.5]]), np.array([[0.5], [0.5]])]
    d = InterpolationData.from_lists(0, [1, 1], [1, 1], F, om)
    prob = write(tmp_path, "p.json", "interpolation", d)
    cand = write(tmp_path, "H.json", "blockmatrix", BlockMatrix.zeros(d.U, d.Y))
    code, rep, _ = run(["verify", prob, cand], capsys)
    assert code == 1 and not rep["all_pass"] and not rep["verdicts"]["interpolation"]


def test_exit_2_on_parse_error(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("[1, 2")
    code, rep, out = run(["central", p], capsys)
    assert code == 2 and rep["error"]["exit_code"] == 2
    assert "invalid JSON" in out.err


def test_exit_3_on_shape_mismatch(tmp_path, capsys, rng):
    d = random_data(rng, width=3)
    prob = write(tmp_path, "p.json", "interpolation", d)
    wrong = BlockMatrix.zeros(BlockSpace.from_dims(0, [4, 4, 4]))
    cand = write(tmp_path, "H.json", "blockmatrix", wrong)
    code, rep, _ = run(["verify", prob, cand], capsys)
    assert code == 3 and rep["error"]["type"] == "DimensionMismatch"


def test_exit_4_on_non_member(tmp_path, capsys, rng):
    for _ in range(20):
        d = random_data(rng, full_F=True)
        from tvinterp.param import canonical_C, induced_contractions

        ind = induced_contractions(central_solution(d), d)
        if canonical_C(ind).support():
            break
    prob = write(tmp_path, "p.json", "interpolation", d)
    C = write(tmp_path, "C.json", "blockmatrix", BlockMatrix.zeros(ind.space))
    code, rep, _ = run(["parametrize", prob, "--C", C], capsys)
    assert code == 4 and "residuals" in rep["error"]


def test_exit_1_with_index_on_invalid_data(tmp_path, capsys):
    d = InterpolationData.from_lists(0, [1, 1], [1, 1], [np.zeros((1, 0)), np.eye(1)],
                                     [np.zeros((1, 0)), np.array([[1.0], [0.5]])])
    prob = write(tmp_path, "p.json", "interpolation", d)
    code, rep, _ = run(["central", prob], capsys)
    assert code == 1 and rep["error"]["index"] == 1


def test_parametrize_random_deterministic(tmp_path, capsys, rng):
    prob = write(tmp_path, "p.json", "interpolation", random_data(rng))
    out = tmp_path / "par.json"
    runs = []
    for _ in range(2):
        cli.main(["parametrize", str(prob), "--random", "--seed", "5", "--out", str(out)])
        runs.append((capsys.readouterr().out, out.read_bytes()))
    assert runs[0] == runs[1]
    rep = json.loads(runs[0][0])
    assert rep["all_pass"] and rep["seed"] == 5
    code, rep, _ = run(["verify", prob, out], capsys)
    assert code == 0


def test_cayley_commands(tmp_path, capsys):
    C = write(tmp_path, "C.json", "cayley", scalar_bm([[0, 0.5], [0, 0]]))
    K = tmp_path / "K.json"
    code, rep, _ = run(["cayley", C, "--out", K], capsys)
    assert code == 0
    np.testing.assert_allclose(load(K).payload.dense(), [[1, 1], [0, 1]])
    code, _, _ = run(["verify", C, K], capsys)
    assert code == 0
    C2 = tmp_path / "C2.json"
    code, rep, _ = run(["cayley", K, "--inverse", "--out", C2], capsys)
    assert code == 0
    np.testing.assert_allclose(load(C2).payload.dense(), [[0, 0.5], [0, 0]])


def test_lyapunov_commands(tmp_path, capsys):
    prob = write(tmp_path, "l.json", "lyapunov", (np.array([[0.5]]), np.array([[1.0]])))
    P = tmp_path / "P.json"
    code, rep, _ = run(["lyapunov", prob, "--out", P], capsys)
    assert code == 0
    assert abs(load(P).payload[0, 0] - 4 / 3) <= 1e-12
    assert run(["verify", prob, P], capsys)[0] == 0
    ss = write(tmp_path, "s.json", "statespace", random_state_space(np.random.default_rng(1)))
    code, rep, _ = run(["lyapunov", ss, "--out", P], capsys)
    assert code == 0 and rep["verdicts"]["gram"]
    assert run(["verify", ss, P], capsys)[0] == 0


def test_rcl_commands(tmp_path, capsys, rng):
    lam = write(tmp_path, "r.json", "rcl", random_rcl(rng))
    B = tmp_path / "B.json"
    H = tmp_path / "H.json"
    B2 = tmp_path / "B2.json"
    assert run(["rcl", "lift", lam, "--out", B], capsys)[0] == 0
    assert run(["verify", lam, B], capsys)[0] == 0
    assert run(["rcl", "translate", lam, B, "--out", H], capsys)[0] == 0
    assert run(["verify", lam, H], capsys)[0] == 0
    assert run(["rcl", "translate", lam, H, "--out", B2], capsys)[0] == 0
    assert run(["verify", lam, B2], capsys)[0] == 0
    prob = write(tmp_path, "p.json", "interpolation", random_data(rng))
    emb = tmp_path / "emb.json"
    assert run(["rcl", "embed", prob, "--out", emb], capsys)[0] == 0
    assert run(["verify", prob, emb], capsys)[0] == 0
    assert run(["rcl", "translate", lam], capsys)[0] == 2


def test_completion_commands(tmp_path, capsys):
    prob = write(tmp_path, "c.json", "completion4x4", CompletionInstance4x4((1, 2, 1, 1), (1, 1, 2, 1), None))
    H = tmp_path / "H.json"
    comp = tmp_path / "A.json"
    code, rep, _ = run(["central", prob, "--out", H, "--out-completion", comp], capsys)
    assert code == 0 and rep["verdicts"]["slabs"] and rep["verdicts"]["overlap"]
    assert run(["verify", prob, H], capsys)[0] == 0
    assert run(["verify", prob, comp], capsys)[0] == 0


def test_sample_command_deterministic(tmp_path, capsys):
    outs = []
    for _ in range(2):
        p = tmp_path / "s.json"
        code, rep, _ = run(["sample", "interpolation", "--seed", "3", "--out", p], capsys)
        assert code == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]
    assert load(tmp_path / "s.json").kind == "interpolation"


def test_tolerance_flags_override_file(tmp_path, capsys):
    F = [np.eye(1)] * 2
    om = [np.array([[0.5]]), np.array([[0.5], [0.5]])]
    d = InterpolationData.from_lists(0, [1, 1], [1, 1], F, om)
    prob = write(tmp_path, "p.json", "interpolation", d, Tolerance(1e-10, 1e-10, 1e-8))
    H = central_solution(d)
    bump = BlockMatrix(H.domain, H.codomain, {(0, 0): [[1e-6]]})
    cand = write(tmp_path, "H.json", "blockmatrix", H + bump)
    assert not run(["verify", prob, cand], capsys)[1]["verdicts"]["interpolation"]
    assert run(["verify", prob, cand, "--tol-eq", "1e-3"], capsys)[1]["verdicts"]["interpolation"]
