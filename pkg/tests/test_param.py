import numpy as np
import pytest
from hypothesis import given, settings

from conftest import seeds
from tvinterp.core import BlockMatrix, BlockSpace, is_column_contractive, max_block_residual, op_norm, spectral_norm
from tvinterp.errors import DimensionMismatch, InterpolationError, MembershipError
from tvinterp.param import (
    canonical_C,
    check_C_membership,
    induced_contractions,
    param_witness,
    parametrize_solution,
    problem_witness,
    random_data_member,
    random_member,
    uniqueness_of_param,
    uniqueness_of_problem,
    verify_parametrization,
)
from tvinterp.problem import (
    InterpolationData,
    ZPair,
    build_structured,
    central_solution,
    check_F_interpolation,
    check_interpolation,
    check_zpair,
    construct,
)
from tvinterp.sampling import random_admissible_zpair, random_data, random_strict_upper_contraction, random_zpair


def solution_and_induced(rng, **kw):
    d = random_data(rng, **kw)
    H, _ = construct(random_admissible_zpair(rng, d))
    return d, H, induced_contractions(H, d)


def split_data():
    """Co-isometric prescription at index 0, full subspaces afterwards."""
    F = [np.array([[1.0], [0.0]]), np.eye(1), np.eye(1)]
    om = [np.array([[1.0]]), np.array([[0.3], [0.1], [0.2]]), np.array([[0.3], [0.4]])]
    return InterpolationData.from_lists(0, [2, 1, 1], [1, 1, 1], F, om)


def test_induced_examples(rng):
    d = random_data(rng, zero_F=True)
    ind = induced_contractions(central_solution(d), d)
    assert all(f.rank == 0 for f in ind.F_H)
    d = random_data(rng)
    ind = induced_contractions(central_solution(d), d)
    assert max(ind.relation_residuals) <= 1e-9
    assert all(spectral_norm(om) <= 1 + 1e-10 for om in ind.omega_H)
    # defining relation checked independently
    dd = ind.defects
    for k in d.window:
        lhs = ind.omega(k) @ ind.basis(k).conj().T @ dd.basis(k).conj().T @ dd.defect(k) @ d.basis(k)
        if k - 1 in d.window:
            rhs = dd.basis(k - 1).conj().T @ dd.defect(k - 1) @ d.omega2(k)
        else:
            rhs = np.zeros_like(lhs)
        assert spectral_norm(lhs - rhs) <= 1e-9


def test_induced_refuses_non_solution(rng):
    d = random_data(rng, full_F=True)
    with pytest.raises(InterpolationError):
        induced_contractions(BlockMatrix.zeros(d.U, d.Y), d)


def test_canonical_C_examples(rng):
    d, H, ind = solution_and_induced(rng)
    C = canonical_C(ind)
    assert check_C_membership(C, ind).ok
    norms = [spectral_norm(ind.omega(k)) for k in ind.window if ind.omega(k).size]
    assert op_norm(C) == pytest.approx(max(norms, default=0.0), abs=1e-12)
    d = random_data(rng, zero_F=True)
    ind = induced_contractions(central_solution(d), d)
    assert canonical_C(ind).support() == []


def test_canonical_C_single_block_norm():
    d = InterpolationData.from_lists(
        0, [1, 1], [1, 1], [np.zeros((1, 0)), np.eye(1)], [np.zeros((1, 0)), np.array([[0.0], [0.9]])]
    )
    H = central_solution(d)
    ind = induced_contractions(H, d)
    C = canonical_C(ind)
    # H_0 = 0 so D_{H_0} = 1; omega_{H_1} maps into it with norm |0.9| * 1 / D_{H_1}
    D1 = ind.defects.defect(1)[0, 0]
    assert op_norm(C) == pytest.approx(0.9 / D1, rel=1e-12)


def test_membership_examples(rng):
    d, H, ind = solution_and_induced(rng, full_F=True)
    C0 = canonical_C(ind)
    if C0.support():
        assert not check_C_membership(BlockMatrix.zeros(ind.space), ind).ok
    bad = BlockMatrix.zeros(BlockSpace.from_dims(0, [5] * len(ind.space.dims)))
    assert not check_C_membership(bad, ind).flags["shape"]


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_random_members_pass_and_reconstruct(seed):
    rng = np.random.default_rng(seed)
    d, H, ind = solution_and_induced(rng, width=4, max_dim=2)
    for C in (canonical_C(ind), random_member(ind, rng, 0.9)):
        assert check_C_membership(C, ind).ok
        par = parametrize_solution(H, d, C, induced=ind)
        assert check_zpair(ZPair(par.Z1, par.Z2), d).ok
        H2, _ = construct(ZPair(par.Z1, par.Z2))
        assert max_block_residual(H2, H) <= 1e-8
        assert verify_parametrization(H, d, par).ok


def test_distinct_members_give_distinct_pairs(rng):
    seen = 0
    for _ in range(30):
        d, H, ind = solution_and_induced(rng, width=4)
        C0 = canonical_C(ind)
        C1 = random_member(ind, rng, 0.8)
        gap = op_norm(C1 - C0)
        if gap <= 1e-3:
            continue
        seen += 1
        p0 = parametrize_solution(H, d, C0, induced=ind)
        p1 = parametrize_solution(H, d, C1, induced=ind)
        zgap = max(op_norm(p0.Z1 - p1.Z1), op_norm(p0.Z2 - p1.Z2))
        assert zgap > 1e-6
        assert op_norm(p0.F - p1.F) > 1e-6
    assert seen > 0


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_membership_iff_F_interpolation(seed):
    """F built from C passes the F-interpolation condition exactly when C is a member."""
    rng = np.random.default_rng(seed)
    d, H, ind = solution_and_induced(rng, width=4, max_dim=2)
    from tvinterp.majorant import solve_problem2

    cands = [canonical_C(ind), random_member(ind, rng, 0.7), random_strict_upper_contraction(rng, ind.space)]
    for C in cands:
        member = check_C_membership(C, ind).ok
        F = solve_problem2(H, C, defects=ind.defects)
        assert member == check_F_interpolation(F, d).ok


def test_parametrize_rejects_non_members(rng):
    for _ in range(20):
        d, H, ind = solution_and_induced(rng, full_F=True)
        if canonical_C(ind).support():
            break
    with pytest.raises(MembershipError) as ei:
        parametrize_solution(H, d, BlockMatrix.zeros(ind.space), induced=ind)
    assert "F_interpolation" in ei.value.residuals
    C = canonical_C(ind)
    with pytest.raises(MembershipError):
        parametrize_solution(H, d, (2 / op_norm(C)) * C, induced=ind)
    with pytest.raises(DimensionMismatch):
        parametrize_solution(H, d, BlockMatrix.zeros(BlockSpace.from_dims(0, [9] * 3)), induced=ind)


def test_zero_F_parametrization_gives_zero_Z1(rng):
    d = random_data(rng, zero_F=True)
    H = BlockMatrix.zeros(d.U, d.Y)
    ind = induced_contractions(H, d)
    for C in (canonical_C(ind), random_member(ind, rng, 0.9)):
        par = parametrize_solution(H, d, C, induced=ind)
        assert par.Z1.support() == [] or op_norm(par.Z1) <= 1e-12


def test_uniqueness_isometric_columns(rng):
    from tvinterp.sampling import random_isometric_columns

    H = random_isometric_columns(rng, 3)
    U, Y = H.domain, H.codomain
    # with every F_k = {0} any column contraction solves the problem
    F = [np.zeros((U.dim(k), 0)) for k in U.window]
    om = [np.zeros((Y.dim(k) + U.dim(k - 1), 0)) for k in U.window]
    d = InterpolationData.from_lists(U.window.lo, list(U.dims), list(Y.dims), F, om)
    ind = induced_contractions(H, d)
    assert ind.defects.is_trivial
    rep = uniqueness_of_param(ind)
    assert rep.cond1 and rep.unique


def test_uniqueness_of_param_flags(rng):
    d = random_data(rng, full_F=True)
    rep = uniqueness_of_param(induced_contractions(central_solution(d), d))
    assert rep.cond1 and rep.unique and rep.free_entries == []
    d = split_data()
    rep = uniqueness_of_problem(d)
    assert not rep.cond1 and not rep.cond2 and rep.cond3 and rep.threshold == 0
    assert rep.unique and rep.solution_unique is True
    # one-by-one flag evaluation
    assert rep.full == {0: False, 1: True, 2: True}
    assert rep.coisometry == {0: True, 1: False, 2: False}


def test_uniqueness_of_problem_examples(rng):
    rep = uniqueness_of_problem(random_data(rng, full_F=True))
    assert rep.cond1 and rep.unique and rep.solution_unique
    rep = uniqueness_of_problem(random_data(rng, zero_F=True))
    assert not rep.unique and rep.solution_unique is None and rep.free_entries
    # every omega co-isometric
    u = InterpolationData.from_lists(0, [1, 1], [1, 0], [np.eye(1), np.eye(1)], [np.array([[1.0]]), np.array([[1.0]])])
    rep = uniqueness_of_problem(u)
    assert rep.cond2 and rep.unique


def test_nonunique_witness_param_level(rng):
    found = 0
    for _ in range(30):
        d, H, ind = solution_and_induced(rng, width=4)
        rep = uniqueness_of_param(ind)
        w = param_witness(ind)
        assert (w is None) == rep.unique
        if w is None:
            continue
        found += 1
        C1, (i, j) = w
        assert (i, j) in rep.free_entries
        assert check_C_membership(C1, ind).ok
        p0 = parametrize_solution(H, d, canonical_C(ind), induced=ind)
        p1 = parametrize_solution(H, d, C1, induced=ind)
        assert max(op_norm(p0.Z1 - p1.Z1), op_norm(p0.Z2 - p1.Z2)) > 1e-6
    assert found > 0


def test_unique_param_pins_perturbation(rng):
    """When unique, the witness perturbation has nowhere to go."""
    d = random_data(rng, full_F=True)
    ind = induced_contractions(central_solution(d), d)
    assert param_witness(ind) is None
    assert max_block_residual(random_member(ind, rng, 1.0), canonical_C(ind)) == 0


def project_onto_constraints(p: ZPair, d: InterpolationData) -> ZPair:
    """Closest pair satisfying the linear interpolation conditions."""
    s = build_structured(d)
    E = s.E
    P = E @ E.H
    Z1 = p.Z1 - p.Z1 @ P + s.Omega1 @ E.H
    Z2 = p.Z2 - p.Z2 @ P + s.Omega2 @ E.H
    return ZPair(Z1, Z2)


def test_full_F_forces_unique_solution(rng):
    for _ in range(10):
        d = random_data(rng, full_F=True)
        H0 = central_solution(d)
        for _ in range(3):
            p = project_onto_constraints(random_zpair(rng, d.U, d.Y), d)
            assert check_zpair(p, d).flags["Z1E=Omega1"]
            H1, _ = construct(p)
            assert max_block_residual(H1, H0) <= 1e-9


def test_data_level_witness(rng):
    for _ in range(20):
        d = random_data(rng, width=4)
        rep = uniqueness_of_problem(d)
        w = problem_witness(d, rng=rng)
        assert (w is None) == rep.unique
        if w is None:
            continue
        H0, H1, gap, _ = w
        assert gap >= 1e-3
        for H in (H0, H1):
            assert check_interpolation(H, d).ok and is_column_contractive(H).ok


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_random_data_member_admissible(seed):
    rng = np.random.default_rng(seed)
    d = random_data(rng, width=4, max_dim=2)
    p = random_data_member(d, rng, 1.0)
    assert check_zpair(p, d).ok
    H, F = construct(p)
    assert check_interpolation(H, d).ok and check_F_interpolation(F, d).ok


def test_random_member_scale_errors(rng):
    d, H, ind = solution_and_induced(rng)
    with pytest.raises(ValueError):
        random_member(ind, rng, 1.5)
    with pytest.raises(ValueError):
        random_data_member(d, rng, -0.1)


def test_report_as_dict(rng):
    rep = uniqueness_of_problem(split_data())
    out = rep.as_dict()
    assert out["cond3"] is True and out["threshold"] == 0 and out["full"]["1"] is True
