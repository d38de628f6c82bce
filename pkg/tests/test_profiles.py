import numpy as np
import pytest

from wmblow.bsystem import BParams, explicit_solution, rhs
from wmblow.linop import RadialPair
from wmblow.numerics import ContractError
from wmblow.profiles import (DegreeTag, admissibility_check, assemble_Qb, lambda_vec,
                             mono_degree, modulation_vector, recursion_residual,
                             residual_Psib, residual_scaling)


def test_S2_is_b1_squared(ps7):
    assert list(ps7.S[2].terms) == [(2, 0, 0)]


def test_degree_bookkeeping(ps7):
    for k, S in ps7.S.items():
        print(k, sorted(S.terms))
        for m in S.terms:
            assert mono_degree(m) == k
            # S_k depends only on b_1 .. b_{k-1}
            assert all(e == 0 for j, e in enumerate(m, start=1) if j >= k)
    assert set(ps7.S) == {2, 3, 4, 5}


def test_T_recursion(ps7):
    for k in range(4):
        assert recursion_residual(ps7, k) < 1e-6


@pytest.mark.parametrize("k", [1, 2, 3])
def test_T_admissible(ps7, k):
    rep = admissibility_check(ps7.ctx, ps7.T[k], DegreeTag(k, k, k % 2))
    print(k, rep)
    assert rep.passed


def test_S_admissible(ps7):
    for k, S in ps7.S.items():
        for m, p in S.terms.items():
            rep = admissibility_check(ps7.ctx, p, DegreeTag(k, k - 1, k % 2))
            assert rep.passed, (k, m, rep)


def test_LamT_minus_T_admissible(ps7):
    g = ps7.ctx.gs.gamma
    for k in (1, 2, 3):
        p = lambda_vec(ps7.ctx, ps7.T[k]) - (k - g) * ps7.T[k]
        rep = admissibility_check(ps7.ctx, p, DegreeTag(k, k - 1, k % 2))
        print(k, rep)
        assert rep.passed


def test_admissibility_negative_control(ps7):
    # a profile with a tail growing faster than allowed must be rejected
    y = ps7.y
    bad = RadialPair(ps7.T[2].f1 * (1 + y**2), ps7.T[2].f2)
    assert not admissibility_check(ps7.ctx, bad, DegreeTag(2, 2, 0)).passed
    # wrong component position
    assert not admissibility_check(ps7.ctx, ps7.T[2], DegreeTag(2, 2, 1)).passed


def test_exact_b_has_no_modulation(ps7):
    p = BParams.make(3, d=7)
    b = explicit_solution(p, 80.0)
    db, _, _ = rhs(p, b)
    assert np.max(np.abs(modulation_vector(ps7, b, db))) < 1e-17


def test_residual_scaling_and_ablation(ps7):
    p = BParams.make(3, d=7)
    slope, b1, vals = residual_scaling(ps7, p)
    slope0, _, vals0 = residual_scaling(ps7, p, include_S=False)
    print("slope", slope, "ablation", slope0)
    assert slope >= 5.5
    assert slope - slope0 >= 1.0
    assert np.all(vals < vals0)


def test_residual_local_norms_grow_with_M(ps7):
    p = BParams.make(3, d=7)
    b = explicit_solution(p, 60.0)
    db, _, _ = rhs(p, b)
    _, norms = residual_Psib(ps7, b, db)
    print(norms)
    assert norms[5.0] <= norms[10.0] <= norms[20.0]


def test_assembled_profile_close_to_Q(ps7):
    p = BParams.make(3, d=7)
    b = explicit_solution(p, 50.0)
    Qb = assemble_Qb(ps7, b)
    dev = np.max(np.abs(Qb.f1 - ps7.ctx.Q))
    print("sup |Q_b - Q|", dev)
    assert dev <= 0.2
    # beyond 2 B_1 the localized profile is exactly Q
    far = ps7.y > 2 * ps7.B1(b[0])
    assert np.all(Qb.f1[far] == ps7.ctx.Q[far]) and np.all(Qb.f2[far] == 0)


def test_assemble_contracts(ps7):
    with pytest.raises(ContractError):
        assemble_Qb(ps7, [0.2, 0.0, 0.0])
    with pytest.raises(ContractError):
        assemble_Qb(ps7, [0.05, 10.0, 0.0])
    Q0 = assemble_Qb(ps7, [0.0, 0.0, 0.0])
    assert np.all(Q0.f1 == ps7.ctx.Q)
