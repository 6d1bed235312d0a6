import numpy as np
import pytest

from prioloss import (
    SystemParams,
    build_blocks,
    loss_distribution,
    solve,
    solve_R,
    solve_boundary,
    solve_pi0,
    stability,
)
from prioloss.qbd import NotConverged, Unstable, spectral_radius, total_mass
from oracles import truncated_ctmc_stationary

PAPER_C2 = SystemParams(1, 8, 4, 20, 2)
PAPER_C5 = SystemParams(1, 8, 4, 20, 5)


def random_stable_params(rng, c_max=8):
    c = int(rng.integers(1, c_max + 1))
    mu1 = float(rng.uniform(0.5, 20))
    mu2 = float(rng.uniform(0.5, 20))
    lam1 = float(rng.uniform(0, 3) * mu1)
    p_probe = SystemParams(lam1, 1.0, mu1, mu2, c)
    lam_max = stability(p_probe).lambda_max
    lam2 = float(rng.uniform(0.05, 0.9)) * lam_max
    return SystemParams(lam1, lam2, mu1, mu2, c)


# ---------------------------------------------------------------- blocks

def test_blocks_paper_c2():
    blocks = build_blocks(PAPER_C2)
    np.testing.assert_allclose(np.diag(blocks.A_at(2)), [40, 20, 0])
    np.testing.assert_allclose(blocks.C, 8 * np.eye(3))
    assert blocks.B_at(2)[0, 0] == -49


def test_blocks_c1_hand_evaluated():
    blocks = build_blocks(SystemParams(1, 1, 1, 1, 1))
    np.testing.assert_allclose(np.diag(blocks.A_at(1)), [1, 0])
    np.testing.assert_allclose(blocks.B_at(1), [[-3, 1], [1, -2]])
    e = np.ones(2)
    np.testing.assert_allclose(
        (blocks.C + blocks.A_at(1) + blocks.B_at(1)) @ e, 0, atol=1e-14)


def test_blocks_no_class1_arrivals():
    blocks = build_blocks(SystemParams(0, 8, 4, 20, 3))
    for Bn in blocks.B:
        assert np.all(np.diag(Bn, k=1) == 0)


def test_generator_row_sums_zero_all_levels():
    rng = np.random.default_rng(11)
    for _ in range(20):
        p = random_stable_params(rng)
        blocks = build_blocks(p)
        e = np.ones(p.c + 1)
        for n in range(1, p.c + 3):
            rows = (blocks.C + blocks.A_at(n) + blocks.B_at(n)) @ e
            np.testing.assert_allclose(rows, 0, atol=1e-10)
        # boundary level: B_0 + C rows sum to zero
        np.testing.assert_allclose((blocks.B_at(0) + blocks.C) @ e, 0, atol=1e-10)


def test_generator_off_diagonals_nonnegative():
    blocks = build_blocks(PAPER_C5)
    for M in (*blocks.A, *blocks.B):
        off = M - np.diag(np.diag(M))
        assert (off >= 0).all()


# ---------------------------------------------------------------- R

def test_R_mm2_reduction():
    blocks = build_blocks(SystemParams(0, 8, 4, 20, 2))
    R = solve_R(blocks)
    assert R[0, 0] == pytest.approx(0.2, abs=1e-10)  # lambda2 / (c mu2)
    np.testing.assert_allclose(R[0, 1:], 0, atol=1e-12)  # phase 0 is closed


def test_R_vanishing_class2():
    # R scales linearly with lambda2: empty upper levels as lambda2 -> 0
    blocks = build_blocks(SystemParams(1, 1e-6, 4, 20, 2))
    R = solve_R(blocks)
    assert np.abs(R).max() < 1e-6


def test_R_residual_and_radius_paper_point():
    blocks = build_blocks(PAPER_C2)
    R = solve_R(blocks)
    resid = np.abs(blocks.C + R @ blocks.B_at(2) + R @ R @ blocks.A_at(2)).max()
    assert resid <= 1e-10
    assert (R >= -1e-15).all()
    assert spectral_radius(R) < 1


def test_R_monotone_iteration():
    # the fixed-point sequence from R=0 is elementwise nondecreasing
    blocks = build_blocks(PAPER_C2)
    Binv = np.linalg.inv(blocks.B_at(2))
    R = np.zeros((3, 3))
    for _ in range(500):
        R_new = -(blocks.C + R @ R @ blocks.A_at(2)) @ Binv
        assert (R_new >= R - 1e-13).all()
        if np.abs(R_new - R).max() < 1e-14:
            break
        R = R_new


def test_R_logred_agrees_with_iteration():
    rng = np.random.default_rng(3)
    for _ in range(10):
        p = random_stable_params(rng)
        blocks = build_blocks(p)
        R_it = solve_R(blocks, method="iteration")
        R_lr = solve_R(blocks, method="logred")
        np.testing.assert_allclose(R_it, R_lr, atol=1e-10)


def test_R_unstable_detected():
    lam_max = stability(PAPER_C2).lambda_max
    p = SystemParams(1, 1.01 * lam_max, 4, 20, 2)
    with pytest.raises(Unstable) as exc:
        solve_R(build_blocks(p), method="logred")
    assert exc.value.spectral_radius >= 1 - 1e-9


# ---------------------------------------------------------------- boundary

def test_boundary_c1_base_case():
    blocks = build_blocks(SystemParams(1, 1, 1, 1, 1))
    R = solve_R(blocks)
    Rj = solve_boundary(blocks, R)
    assert len(Rj) == 1
    np.testing.assert_allclose(Rj[0], R)


def test_boundary_mm2_level1_ratio():
    blocks = build_blocks(SystemParams(0, 8, 4, 20, 2))
    R = solve_R(blocks)
    Rj = solve_boundary(blocks, R)
    assert Rj[0][0, 0] == pytest.approx(0.4, abs=1e-10)  # pi_1/pi_0 = lambda/mu


def test_boundary_nonnegative():
    blocks = build_blocks(PAPER_C5)
    R = solve_R(blocks)
    for M in solve_boundary(blocks, R):
        assert (M >= -1e-14).all()


# ---------------------------------------------------------------- pi

def test_pi0_mm2_idle_probability():
    sol = solve(SystemParams(0, 8, 4, 20, 2))
    # M/M/2 empty-system probability with a = 0.4 (verified against the
    # truncated-chain oracle): 1/(1 + 0.4 + 0.08/0.8) = 2/3
    assert sol.pi[0, 0] == pytest.approx(2 / 3, abs=1e-10)


def test_total_mass_one():
    rng = np.random.default_rng(17)
    for _ in range(20):
        sol = solve(random_stable_params(rng))
        assert total_mass(sol) == pytest.approx(1.0, abs=1e-10)


def test_phase_marginal_matches_eta_c5():
    sol = solve(PAPER_C5)
    from prioloss import marginal_phase
    eta = loss_distribution(PAPER_C5.rho1, 5).eta
    np.testing.assert_allclose(marginal_phase(sol), eta, atol=1e-8)


def test_stationary_level_geometric_tail():
    sol = solve(PAPER_C2)
    np.testing.assert_allclose(sol.level(2), sol.pi[2])
    lvl4 = sol.level(4)
    np.testing.assert_allclose(lvl4, sol.pi[2] @ sol.R @ sol.R, atol=1e-15)
    assert (lvl4 >= -1e-15).all()


def test_stationary_level_mm2_decay():
    sol = solve(SystemParams(0, 8, 4, 20, 2))
    for k in range(1, 5):
        assert sol.level(2 + k)[0] == pytest.approx(sol.pi[2, 0] * 0.2**k, rel=1e-9)


def test_brute_force_equivalence_paper_points():
    for p in (PAPER_C2, PAPER_C5):
        sol = solve(p)
        oracle = truncated_ctmc_stationary(p, L=200)
        ma = np.array([sol.level(j) for j in range(51)])
        tv = 0.5 * np.abs(ma - oracle[:51]).sum()
        assert tv < 1e-7


def test_global_balance_residuals():
    p = PAPER_C2
    blocks = build_blocks(p)
    sol = solve(p)
    levels = [sol.level(j) for j in range(53)]
    resid0 = levels[0] @ blocks.B_at(0) + levels[1] @ blocks.A_at(1)
    assert np.abs(resid0).max() <= 1e-9
    for j in range(1, 51):
        r = (levels[j - 1] @ blocks.C + levels[j] @ blocks.B_at(j)
             + levels[j + 1] @ blocks.A_at(j + 1))
        assert np.abs(r).max() <= 1e-9


def test_unstable_model_pipeline_raises():
    with pytest.raises((Unstable, NotConverged)):
        solve(SystemParams(1, 50, 4, 20, 2))
