import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from risdfrc.sdp import (SdpProblem, SdpSolution, SdpStatus, check_certificate, dump_problem, load_problem,
                         max_ineq_value, solve)

from conftest import crandn, rand_herm


def test_identity_cost():
    sol = solve(SdpProblem(np.eye(3)))
    assert sol.status is SdpStatus.OPTIMAL
    assert sol.primal_obj == pytest.approx(3.0, abs=1e-7)


@pytest.mark.parametrize("c", [1.0, -2.0, 0.5 + 1.5j, -3j])
def test_two_by_two_offdiagonal(c):
    cost = np.array([[0, c], [np.conj(c), 0]], dtype=complex)
    sol = solve(SdpProblem(cost))
    assert sol.status is SdpStatus.OPTIMAL
    assert sol.primal_obj == pytest.approx(-2 * abs(c), abs=1e-6)
    assert sol.phi[0, 1] == pytest.approx(-c / abs(c), abs=1e-4)
    assert check_certificate(SdpProblem(cost), sol).passed


def test_rank_one_optimum():
    cost = np.array([[1, -1], [-1, 1]], dtype=complex)
    sol = solve(SdpProblem(cost))
    assert sol.primal_obj == pytest.approx(0.0, abs=1e-7)
    assert np.allclose(sol.phi, np.ones((2, 2)), atol=1e-4)


def test_active_inequality():
    cost = np.array([[0, 1], [1, 0]], dtype=complex)
    prob = SdpProblem(cost, cost.copy(), 0.0)
    sol = solve(prob)
    assert sol.status is SdpStatus.OPTIMAL
    assert sol.primal_obj == pytest.approx(0.0, abs=1e-6)
    rep = check_certificate(prob, sol)
    assert rep.passed and rep.ineq_slack >= -1e-7


def test_infeasible_detected():
    sol = solve(SdpProblem(np.eye(3), np.eye(3), 4.0))
    assert sol.status is SdpStatus.INFEASIBLE
    assert solve(SdpProblem(np.eye(3), np.eye(3), 2.9)).status is SdpStatus.OPTIMAL
    assert solve(SdpProblem(np.eye(3), np.zeros((3, 3)), 1.0)).status is SdpStatus.INFEASIBLE


def test_max_ineq_value_analytic():
    t = np.array([[0, 1], [1, 0]], dtype=complex)
    assert max_ineq_value(SdpProblem(np.eye(2), t, 0.0)) == pytest.approx(2.0, abs=1e-6)


def _random_problem(rng, n, with_ineq=True):
    cost = rand_herm(rng, n)
    if not with_ineq:
        return SdpProblem(cost)
    t = rand_herm(rng, n)
    x0 = crandn(rng, n)
    x0 /= np.abs(x0)
    # feasible by construction: a unit-modulus point meets the constraint
    rhs = float(np.real(x0.conj() @ t @ x0)) - 0.5
    return SdpProblem(cost, t, rhs)


@pytest.mark.parametrize("n", [5, 11, 21])
def test_random_certificates(n):
    rng = np.random.default_rng(n)
    prob = _random_problem(rng, n)
    sol = solve(prob)
    assert sol.status is SdpStatus.OPTIMAL
    rep = check_certificate(prob, sol)
    assert rep.passed, rep
    assert rep.min_eig == pytest.approx(np.linalg.eigvalsh(sol.phi)[0], abs=1e-12)
    # weak duality
    assert sol.dual_obj <= sol.primal_obj + 1e-6 * max(1.0, abs(sol.primal_obj))


def test_perturbed_solution_fails_certificate(rng):
    prob = _random_problem(rng, 6)
    sol = solve(prob)
    bad = SdpSolution(sol.phi + 1e-3 * np.eye(6), sol.primal_obj, sol.dual_obj, sol.dual_gap, sol.status,
                      sol.iterations, sol.y, sol.max_ineq_slack)
    assert not check_certificate(prob, bad).passed


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), scale=st.sampled_from([1e-6, 1e-2, 1.0, 1e3]))
def test_scale_invariance(seed, scale):
    rng = np.random.default_rng(seed)
    prob = _random_problem(rng, 5)
    a = solve(prob)
    b = solve(SdpProblem(prob.cost * scale, prob.ineq * scale, prob.ineq_rhs * scale))
    assert a.status is b.status is SdpStatus.OPTIMAL
    assert b.primal_obj == pytest.approx(a.primal_obj * scale, rel=1e-5, abs=1e-6 * scale)


def test_lower_bounds_every_unit_modulus_point(rng):
    prob = _random_problem(rng, 6, with_ineq=False)
    sol = solve(prob)
    for _ in range(200):
        x = np.exp(2j * np.pi * rng.random(6))
        assert sol.primal_obj <= float(np.real(x.conj() @ prob.cost @ x)) + 1e-6


def test_deterministic(rng):
    prob = _random_problem(rng, 7)
    a, b = solve(prob), solve(prob)
    assert np.array_equal(a.phi, b.phi)
    assert a.iterations == b.iterations


def test_from_blocks_aggregates():
    m = np.array([[0, 1j], [0, 0]])
    prob = SdpProblem.from_blocks(np.eye(2), [m, m], 0.5)
    assert np.allclose(prob.ineq, 2 * (m + m.conj().T))
    assert not SdpProblem.from_blocks(np.eye(2), [], -math.inf).has_ineq


def test_dump_load_roundtrip(tmp_path, rng):
    prob = _random_problem(rng, 4)
    p = tmp_path / "p.sdp"
    dump_problem(prob, p)
    text = p.read_text().splitlines()
    assert text[0] == "risdfrc-sdp 1" and text[1] == "dim 4" and text[3] == "cost"
    back = load_problem(p)
    assert np.array_equal(back.cost, prob.cost)
    assert np.array_equal(back.ineq, prob.ineq)
    assert back.ineq_rhs == prob.ineq_rhs
    plain = SdpProblem(np.eye(2))
    dump_problem(plain, p)
    back = load_problem(p)
    assert back.ineq is None and back.ineq_rhs == -math.inf


def test_load_rejects_garbage(tmp_path):
    p = tmp_path / "bad.sdp"
    p.write_text("hello\n")
    with pytest.raises(ValueError):
        load_problem(p)


def test_problem_validation():
    with pytest.raises(ValueError):
        SdpProblem(np.ones((2, 3)))
    with pytest.raises(ValueError):
        SdpProblem(np.eye(2), np.eye(3), 0.0)
