"""Simplex and branch-and-bound, checked against an independent LP solver
and exhaustive enumeration on small integer programs."""

import numpy as np
import pytest
from scipy import optimize, sparse

from fdbackhaul import SolverOptions, TooManyBinariesError
from fdbackhaul.formulation import LinearProgram
from fdbackhaul.solver import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    brute_force_milp,
    solve_lp,
    solve_milp,
)


def make_lp(c, a_le=None, b_le=None, a_eq=None, b_eq=None,
            lower=None, upper=None, integral=()):
    c = np.asarray(c, dtype=float)
    n = c.size
    def block(a, b):
        if a is None:
            return sparse.csr_matrix((0, n)), np.zeros(0)
        a = np.atleast_2d(np.asarray(a, dtype=float))
        return sparse.csr_matrix(a), np.asarray(b, dtype=float)
    a_le, b_le = block(a_le, b_le)
    a_eq, b_eq = block(a_eq, b_eq)
    lower = np.zeros(n) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
    return LinearProgram(
        c=c, a_le=a_le, b_le=b_le, a_eq=a_eq, b_eq=b_eq,
        lower=lower, upper=upper, integral=frozenset(integral),
        le_labels=tuple(f"le{i}" for i in range(b_le.size)),
        eq_labels=tuple(f"eq{i}" for i in range(b_eq.size)))


class TestToyLps:
    def test_single_bound_row(self):
        sol = solve_lp(make_lp([1.0], a_le=[[-1.0]], b_le=[-3.0], upper=[10.0]))
        assert sol.status == OPTIMAL
        assert sol.objective == pytest.approx(3.0, abs=1e-9)
        assert sol.x[0] == pytest.approx(3.0, abs=1e-9)

    def test_box_only(self):
        sol = solve_lp(make_lp([2.0, -1.0], lower=[1.0, 0.0], upper=[5.0, 4.0]))
        assert sol.status == OPTIMAL
        assert sol.objective == pytest.approx(2.0 - 4.0)

    def test_unbounded(self):
        sol = solve_lp(make_lp([-1.0]))
        assert sol.status == UNBOUNDED

    def test_unbounded_with_rows(self):
        # x - y <= 1 does not stop y from growing
        sol = solve_lp(make_lp([0.0, -1.0], a_le=[[1.0, -1.0]], b_le=[1.0]))
        assert sol.status == UNBOUNDED

    def test_infeasible(self):
        sol = solve_lp(make_lp([1.0, 1.0], a_le=[[-1.0, -1.0]], b_le=[-2.0],
                               upper=[0.5, 0.5]))
        assert sol.status == INFEASIBLE

    def test_equality(self):
        sol = solve_lp(make_lp([1.0, 0.0], a_eq=[[1.0, 1.0]], b_eq=[1.0],
                               upper=[1.0, 1.0]))
        assert sol.status == OPTIMAL
        assert sol.objective == pytest.approx(0.0, abs=1e-9)
        assert sol.x[1] == pytest.approx(1.0, abs=1e-9)

    def test_free_variable(self):
        # min y with x free, x = -5, y >= x + 7
        sol = solve_lp(make_lp(
            [0.0, 1.0],
            a_le=[[1.0, -1.0]], b_le=[-7.0],
            a_eq=[[1.0, 0.0]], b_eq=[-5.0],
            lower=[-np.inf, 0.0]))
        assert sol.status == OPTIMAL
        assert sol.objective == pytest.approx(2.0, abs=1e-9)

    def test_weak_duality_on_toy(self):
        sol = solve_lp(make_lp([1.0], a_le=[[-1.0]], b_le=[-3.0], upper=[10.0]))
        assert sol.dual_objective is not None
        assert sol.dual_objective <= sol.objective + 1e-6 * (1 + abs(sol.objective))


class TestToyMilps:
    def test_fixed_charge(self):
        # min x + 10 y, x <= 5 y, x >= 3, y binary -> y=1, x=3
        lp = make_lp([1.0, 10.0],
                     a_le=[[1.0, -5.0], [-1.0, 0.0]], b_le=[0.0, -3.0],
                     upper=[np.inf, 1.0], integral=[1])
        sol, stats = solve_milp(lp)
        assert sol.status == OPTIMAL
        assert sol.objective == pytest.approx(13.0, abs=1e-6)
        assert sol.x[1] == pytest.approx(1.0, abs=1e-6)
        assert stats.nodes_explored >= 1

    def test_continuous_milp_equals_lp(self):
        lp = make_lp([1.0, 2.0], a_le=[[-1.0, -1.0]], b_le=[-1.0],
                     upper=[1.0, 1.0])
        direct = solve_lp(lp)
        relaxed, stats = solve_milp(lp)
        assert relaxed.status == OPTIMAL
        assert relaxed.objective == pytest.approx(direct.objective, abs=1e-9)
        assert stats.nodes_explored == 1

    def test_integer_infeasible(self):
        # 0.4 <= y <= 0.6 has no binary point
        lp = make_lp([1.0], a_le=[[-1.0], [1.0]], b_le=[-0.4, 0.6],
                     upper=[1.0], integral=[0])
        sol, _ = solve_milp(lp)
        assert sol.status == INFEASIBLE

    def test_rejects_nonbinary_bounds(self):
        lp = make_lp([1.0], upper=[2.0], integral=[0])
        with pytest.raises(ValueError):
            solve_milp(lp)

    def test_warm_start_accepts_incumbent(self):
        lp = make_lp([1.0, 10.0],
                     a_le=[[1.0, -5.0], [-1.0, 0.0]], b_le=[0.0, -3.0],
                     upper=[np.inf, 1.0], integral=[1])
        # one value per binary column
        sol, stats = solve_milp(lp, warm_start=np.array([1.0]))
        assert sol.status == OPTIMAL
        assert sol.objective == pytest.approx(13.0, abs=1e-6)


def random_lp(rng, n, m_le, m_eq, integral_count=0):
    """A random instance that is feasible by construction: the rhs is set
    from a random interior point."""
    c = rng.normal(size=n)
    lower = np.zeros(n)
    upper = rng.uniform(0.5, 3.0, size=n)
    x0 = rng.uniform(0.1, 0.9, size=n) * upper
    a_le = rng.normal(size=(m_le, n)) if m_le else None
    b_le = a_le @ x0 + rng.uniform(0.05, 1.0, size=m_le) if m_le else None
    a_eq = rng.normal(size=(m_eq, n)) if m_eq else None
    b_eq = a_eq @ x0 if m_eq else None
    integral = []
    if integral_count:
        integral = list(rng.choice(n, size=integral_count, replace=False))
        upper[integral] = 1.0
    return make_lp(c, a_le, b_le, a_eq, b_eq, lower, upper, integral)


def scipy_solve(lp):
    res = optimize.linprog(
        lp.c,
        A_ub=lp.a_le.toarray() if lp.b_le.size else None,
        b_ub=lp.b_le if lp.b_le.size else None,
        A_eq=lp.a_eq.toarray() if lp.b_eq.size else None,
        b_eq=lp.b_eq if lp.b_eq.size else None,
        bounds=list(zip(np.where(np.isinf(lp.lower), None, lp.lower),
                        np.where(np.isinf(lp.upper), None, lp.upper))),
        method="highs")
    return res


class TestAgainstReference:
    def test_random_feasible_lps(self):
        rng = np.random.default_rng(2024)
        for trial in range(30):
            n = int(rng.integers(2, 18))
            m_le = int(rng.integers(0, 12))
            m_eq = int(rng.integers(0, min(n - 1, 4) + 1))
            lp = random_lp(rng, n, m_le, m_eq)
            mine = solve_lp(lp)
            ref = scipy_solve(lp)
            assert mine.status == OPTIMAL, f"trial {trial}: {mine.status}"
            assert ref.status == 0
            scale = 1.0 + abs(ref.fun)
            assert abs(mine.objective - ref.fun) <= 1e-6 * scale, (
                f"trial {trial}: {mine.objective} vs {ref.fun}")
            # the claimed point must really satisfy the rows it reports
            assert np.all(lp.a_le @ mine.x <= lp.b_le + 1e-7 * (1 + np.abs(lp.b_le)))
            if lp.b_eq.size:
                assert np.allclose(lp.a_eq @ mine.x, lp.b_eq, atol=1e-6)

    def test_random_infeasible_lps(self):
        rng = np.random.default_rng(7)
        found = 0
        for _ in range(40):
            n = int(rng.integers(2, 8))
            lp = random_lp(rng, n, int(rng.integers(1, 6)), 0)
            # contradictory pair of rows on the first variable
            row = np.zeros(n)
            row[0] = 1.0
            a = np.vstack([lp.a_le.toarray(), row, -row])
            b = np.concatenate([lp.b_le, [0.2], [-0.4]])
            bad = make_lp(lp.c, a, b, None, None, lp.lower, lp.upper)
            sol = solve_lp(bad)
            ref = scipy_solve(bad)
            assert ref.status == 2
            assert sol.status == INFEASIBLE
            found += 1
        assert found == 40

    def test_weak_duality_random(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            lp = random_lp(rng, int(rng.integers(3, 12)),
                           int(rng.integers(1, 8)), 0)
            sol = solve_lp(lp)
            assert sol.status == OPTIMAL
            assert sol.dual_objective is not None
            assert (sol.dual_objective
                    <= sol.objective + 1e-6 * (1 + abs(sol.objective)))


class TestBranchAndBound:
    def test_random_milps_match_enumeration(self):
        rng = np.random.default_rng(99)
        for trial in range(25):
            n = int(rng.integers(3, 12))
            k = int(rng.integers(1, min(n, 8) + 1))
            lp = random_lp(rng, n, int(rng.integers(1, 10)), 0,
                           integral_count=k)
            mine, stats = solve_milp(lp)
            ref = brute_force_milp(lp)
            assert mine.status == ref.status, f"trial {trial}"
            if mine.status == OPTIMAL:
                scale = 1.0 + abs(ref.objective)
                assert abs(mine.objective - ref.objective) <= 1e-6 * scale, (
                    f"trial {trial}: {mine.objective} vs {ref.objective}")
                assert stats.best_bound <= mine.objective + 1e-6 * scale

    def test_gap_closed_on_optimal(self):
        lp = make_lp([1.0, 10.0],
                     a_le=[[1.0, -5.0], [-1.0, 0.0]], b_le=[0.0, -3.0],
                     upper=[np.inf, 1.0], integral=[1])
        _, stats = solve_milp(lp, SolverOptions(gap_tol=1e-6))
        assert stats.gap <= 1e-6

    def test_brute_force_tie_break_is_lexicographic(self):
        # both y assignments cost the same; enumeration order must win
        lp = make_lp([0.0, 0.0], a_le=[[1.0, 1.0]], b_le=[2.0],
                     upper=[1.0, 1.0], integral=[0, 1])
        ref = brute_force_milp(lp)
        assert ref.status == OPTIMAL
        np.testing.assert_allclose(ref.x[:2], [0.0, 0.0], atol=1e-9)

    def test_brute_force_binary_limit(self):
        n = 21
        lp = make_lp(np.ones(n), upper=np.ones(n), integral=range(n))
        with pytest.raises(TooManyBinariesError):
            brute_force_milp(lp)

    def test_determinism(self):
        rng = np.random.default_rng(31)
        lp = random_lp(rng, 10, 8, 2, integral_count=4)
        a, _ = solve_milp(lp)
        b, _ = solve_milp(lp)
        assert a.status == b.status
        np.testing.assert_array_equal(a.x, b.x)
        assert a.objective == b.objective
