import numpy as np
import pytest
from hypothesis import given, settings

from conftest import seeds
from tvinterp.core import BlockMatrix, is_column_contractive, max_block_residual, spectral_norm
from tvinterp.errors import DimensionMismatch, InvalidData, NotContractive
from tvinterp.problem import central_solution, check_interpolation, construct, validate_data
from tvinterp.rcl import (
    BSequence,
    RclData,
    b_to_h,
    build_lifting,
    check_rcl_solution,
    h_to_b,
    omega_roundtrip_residual,
    omega_to_rcl,
    underlying_contractions,
    validate_rcl,
)
from tvinterp.sampling import (
    random_admissible_zpair,
    random_column_contractive,
    random_contraction,
    random_data,
    random_rcl,
)


def zero_rcl(width=3, h=2, hp=1, h0=1):
    n = width
    return RclData.from_lists(
        0,
        [h] * n,
        [hp] * n,
        [h0] * n,
        [np.zeros((hp, h))] * n,
        [np.zeros((hp, hp if i else 0)) for i in range(n)],
        [np.zeros((h, h0))] * n,
        [np.zeros((h, h0 if i else 0)) for i in range(n)],
    )


def commutant_rcl(rng, width=3, n=2):
    """``R_k = Q_k = I`` and ``T'_k = I`` with a constant ``A``."""
    A = random_contraction(rng, n, n)
    return RclData.from_lists(
        0,
        [n] * width,
        [n] * width,
        [n] * width,
        [A] * width,
        [np.eye(n) if i else np.zeros((n, 0)) for i in range(width)],
        [np.eye(n)] * width,
        [np.eye(n) if i else np.zeros((n, 0)) for i in range(width)],
    )


def is_solution(H, data):
    chk = check_interpolation(H, data)
    return chk.ok and chk.flags["column_contractive"]


def test_validate_examples(rng):
    assert validate_rcl(zero_rcl()).ok
    assert validate_rcl(commutant_rcl(rng)).ok
    assert validate_rcl(random_rcl(rng)).ok
    lam = zero_rcl()
    R = list(lam.R)
    R[0] = np.ones_like(R[0])  # R_0^* R_0 > Q_1^* Q_1 = 0
    bad = RclData(lam.window, lam.h, lam.hp, lam.h0, lam.A, lam.Tp, tuple(R), lam.Q)
    with pytest.raises(InvalidData) as ei:
        validate_rcl(bad)
    assert ei.value.index == 1


def test_validate_contractivity_errors():
    lam = zero_rcl()
    A = list(lam.A)
    A[2] = 2 * np.ones_like(A[2])
    with pytest.raises(NotContractive) as ei:
        validate_rcl(RclData(lam.window, lam.h, lam.hp, lam.h0, tuple(A), lam.Tp, lam.R, lam.Q))
    assert ei.value.index == 2


def test_shape_errors():
    with pytest.raises(DimensionMismatch):
        RclData.from_lists(0, [1], [1], [1], [np.zeros((2, 1))], [np.zeros((1, 0))], [np.zeros((1, 1))], [np.zeros((1, 0))])


def test_lifting_examples(rng):
    lf = build_lifting(zero_rcl(width=3, hp=1))
    # T' = 0: D_{T'_k} is the whole of H'_{k-1}, which is empty for k = 0
    assert [lf.dt(k) for k in range(3)] == [0, 1, 1]
    assert lf.isometry_residual() <= 1e-14
    lf = build_lifting(commutant_rcl(rng))
    assert all(lf.dt(k) == 0 for k in range(3))  # T' isometric (or empty)
    for _ in range(20):
        lam = random_rcl(rng, width=4)
        lf = build_lifting(lam)
        assert lf.isometry_residual() <= 1e-10
        for k in lam.window:
            u = lf.U[k - lam.window.lo]
            assert u.shape == (lam.dim_hp(k) + lf.dp(k), lam.dim_hp(k - 1) + lf.dp(k - 1))


def test_underlying_contractions_examples(rng):
    und = underlying_contractions(commutant_rcl(rng, n=2))
    assert validate_data(und).ok
    for _ in range(10):
        lam = random_rcl(rng, width=4)
        und = underlying_contractions(lam)
        assert validate_data(und).ok
        assert all(spectral_norm(om) <= 1 + 1e-10 for om in und.omega)


def test_isometric_A_gives_trivial_data(rng):
    n = 2
    A = np.linalg.qr(rng.standard_normal((n, n)))[0]
    lam = RclData.from_lists(
        0, [n] * 2, [n] * 2, [n] * 2, [A] * 2, [np.zeros((n, 0)), np.eye(n)], [np.eye(n)] * 2, [np.zeros((n, 0)), np.eye(n)]
    )
    und = underlying_contractions(lam)
    assert und.U.total == 0


def test_equality_case_gives_isometric_omega(rng):
    for _ in range(10):
        lam = random_rcl(rng, width=4, equality=True)
        und = underlying_contractions(lam)
        for om in und.omega:
            if om.shape[1]:
                s = np.linalg.svd(om, compute_uv=False)
                assert s.min() >= 1 - 1e-8
        lam = random_rcl(rng, width=4, equality=False, margin=0.3)
        und = underlying_contractions(lam)
        gaps = [np.linalg.svd(om, compute_uv=False).min() for om in und.omega if om.shape[1]]
        assert not gaps or min(gaps) < 1 - 1e-6


def test_b_to_h_zero(rng):
    lam = random_rcl(rng)
    lf = build_lifting(lam)
    B = BSequence(lam.window, tuple(np.vstack([lam.A_(k), np.zeros((lf.dp(k), lam.dim_h(k)))]) for k in lam.window))
    assert b_to_h(B, lam).support() == []
    H0 = BlockMatrix.zeros(lf.D_space, lf.Dp_space)
    for k, Bk in zip(lam.window, h_to_b(H0, lam).B):
        np.testing.assert_allclose(Bk, B.at(k), atol=0)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_b_h_roundtrip(seed):
    rng = np.random.default_rng(seed)
    lam = random_rcl(rng, width=4)
    lf = build_lifting(lam)
    H = random_column_contractive(rng, lf.D_space, lf.Dp_space)
    B = h_to_b(H, lam, lifting=lf)
    assert all(spectral_norm(b) <= 1 + 1e-10 for b in B.B)
    assert max_block_residual(b_to_h(B, lam, lifting=lf), H) <= 1e-9
    B2 = h_to_b(b_to_h(B, lam, lifting=lf), lam, lifting=lf)
    assert max(spectral_norm(a - b) for a, b in zip(B.B, B2.B)) <= 1e-9


def test_b_to_h_errors(rng):
    lam = random_rcl(rng)
    lf = build_lifting(lam)
    H = BlockMatrix.zeros(lf.D_space, lf.Dp_space)
    B = h_to_b(H, lam)
    k = lam.window.lo
    bad = list(B.B)
    bad[0] = bad[0].copy()
    bad[0][: lam.dim_hp(k)] += 0.01
    with pytest.raises(InvalidData) as ei:
        b_to_h(BSequence(lam.window, tuple(bad)), lam)
    assert ei.value.index == k
    assert not check_rcl_solution(BSequence(lam.window, tuple(bad)), lam).flags["projection"]
    with pytest.raises(DimensionMismatch):
        b_to_h(BSequence(lam.window, tuple(np.zeros((7, 7)) for _ in lam.window)), lam)


def test_solution_transfer_equivalence(rng):
    contradictions = 0
    n_sol = n_non = 0
    for t in range(50):
        lam = random_rcl(rng, width=4)
        lf = build_lifting(lam)
        und = underlying_contractions(lam, lifting=lf)
        if t % 2:
            H, _ = construct(random_admissible_zpair(rng, und))
        else:
            H = random_column_contractive(rng, und.U, und.Y)
        sol = is_solution(H, und)
        n_sol += sol
        n_non += not sol
        B = h_to_b(H, lam, lifting=lf)
        rcl_ok = check_rcl_solution(B, lam, lifting=lf).ok
        back = is_solution(b_to_h(B, lam, lifting=lf), und)
        contradictions += (sol != rcl_ok) + (rcl_ok != back)
    assert contradictions == 0
    assert n_sol > 0 and n_non > 0


def test_central_solution_lifts(rng):
    for _ in range(10):
        lam = random_rcl(rng, width=4)
        und = underlying_contractions(lam)
        B = h_to_b(central_solution(und), lam)
        assert check_rcl_solution(B, lam).ok


def test_omega_to_rcl_examples(rng):
    d = random_data(rng, zero_F=True)
    lam = omega_to_rcl(d)
    assert all(r.shape[1] == 0 for r in lam.R)
    assert validate_rcl(lam).ok
    for _ in range(20):
        d = random_data(rng, width=4)
        lam = omega_to_rcl(d)
        chk = validate_rcl(lam)
        assert max(v for key, v in chk.residuals.items() if key.startswith("intertwining")) == 0
        worst, und = omega_roundtrip_residual(d, lam)
        assert worst <= 1e-10
        # solutions transfer through the same identification
        assert is_solution(BlockMatrix.zeros(und.U, und.Y), und) == is_solution(BlockMatrix.zeros(d.U, d.Y), d)


def test_omega_roundtrip_detects_mismatch(rng):
    d = random_data(rng, width=3, full_F=True)
    other = random_data(rng, width=3, full_F=True, u_dims=d.U.dims, y_dims=d.Y.dims)
    worst, _ = omega_roundtrip_residual(d, omega_to_rcl(other))
    assert worst > 1e-6


def test_lifted_central_solution_of_embedded_data(rng):
    d = random_data(rng, width=4)
    lam = omega_to_rcl(d)
    und = underlying_contractions(lam)
    H = central_solution(und)
    assert is_column_contractive(H).ok
    assert check_rcl_solution(h_to_b(H, lam), lam).ok
