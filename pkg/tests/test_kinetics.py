"""Kinetic equation solvers: closed routes, specialization lattice, residual."""

import math

import numpy as np
import pytest

from fkin.errors import DomainError, ResourceError
from fkin.kinetics import (KineticProblem, MLForcing, PowerLaw, Sampled,
                           TruncationPolicy, Unit, binomial_problem,
                           enumerate_compositions, geometric_problem,
                           laplace_domain, residual_grid, select_solver,
                           solve_arithmetic, solve_binomial, solve_geometric,
                           solve_ml_closed, solve_multiterm,
                           solve_multiterm_grid, solve_power_closed,
                           solve_single_term)
from fkin.fracops import SampledFunction
from fkin.oracles import forward_laplace

TS = np.array([0.25, 0.5, 1.0, 2.0, 4.0])


def max_rel(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


class TestLaplaceDomain:
    def test_single_unit(self):
        v = laplace_domain(KineticProblem(1, (1.0,), (1.0,), Unit()), 2.0)
        assert abs(v - 1.0 / 3.0) < 1e-14

    def test_two_term_power_forcing(self):
        p = KineticProblem(1, (0.5, 1.0), (1.0, 2.0), PowerLaw(1.0))
        assert abs(laplace_domain(p, 1.0) - 0.25) < 1e-14

    def test_initial_amount_scales_image(self):
        p1 = KineticProblem(1, (0.5,), (0.7,), Unit())
        p3 = KineticProblem(3, (0.5,), (0.7,), Unit())
        assert laplace_domain(p3, 1.3) == 3.0 * laplace_domain(p1, 1.3)

    def test_complex_argument(self):
        p = KineticProblem(1, (1.0,), (1.0,), Unit())
        s = 1.0 + 2.0j
        assert abs(laplace_domain(p, s) - 1.0 / (s + 1.0)) < 1e-14


class TestForcings:
    def test_power_law_time_and_image(self):
        f = PowerLaw(2.0)
        assert f.value(2.0) == 2.0
        assert abs(f.transform(3.0) - 1.0 / 9.0) < 1e-15

    def test_ml_transform_matches_quadrature(self):
        f = MLForcing(nu=0.5, gamma_=2.0, delta=1.5, c=0.5)
        for s in (0.8, 2.0):
            num = forward_laplace(f.value, s, head_power=f.gamma_ - 1.0)
            assert abs(complex(f.transform(s)) - num) < 1e-9 * abs(num)

    def test_sampled_image_matches_unit(self):
        grid = np.linspace(0.0, 40.0, 4001)
        f = Sampled(SampledFunction(grid, np.ones_like(grid)))
        got = laplace_domain(KineticProblem(1, (1.0,), (1.0,), f), 2.0)
        assert abs(got - 1.0 / 3.0) < 1e-12


class TestCompositions:
    def test_small_levels(self):
        assert enumerate_compositions(2, 2) == [(0, 2), (1, 1), (2, 0)]
        assert enumerate_compositions(0, 3) == [(0, 0, 0)]
        assert len(enumerate_compositions(3, 3)) == 10

    def test_multinomial_weights_sum(self):
        # sum over compositions of l into k parts of l!/(prod r_i!) is k^l
        l, k = 3, 3
        total = 0
        for comp in enumerate_compositions(l, k):
            w = math.factorial(l)
            for r in comp:
                w //= math.factorial(r)
            total += w
        assert total == k ** l

    def test_budget_guard(self):
        with pytest.raises(ResourceError):
            enumerate_compositions(50, 6, max_compositions=1000)


class TestClassicalLimits:
    def test_single_term_is_exponential(self):
        p = KineticProblem(1, (1.0,), (1.0,), Unit())
        assert max_rel(solve_single_term(p, TS), np.exp(-TS)) < 1e-12

    def test_rate_and_amount(self):
        p = KineticProblem(2.5, (1.0,), (1.7,), Unit())
        assert max_rel(solve_single_term(p, TS), 2.5 * np.exp(-1.7 * TS)) < 1e-10

    def test_repeated_root_value(self):
        # second-order equation with a double classical root:
        # N(t) = n0 e^{-t}(1 - t), printed reference 0.3032653299 at t=1/2
        p = binomial_problem(1, 2, 1.0, 1.0, Unit())
        got = solve_binomial(p, np.array([0.5]))[0]
        assert abs(got - 0.5 * math.exp(-0.5)) < 1e-8
        assert abs(got - 0.3032653299) < 1e-9

    def test_repeated_root_curve(self):
        p = binomial_problem(1, 2, 1.0, 1.0, Unit())
        ref = np.exp(-TS) * (1.0 - TS)
        got = solve_binomial(p, TS)
        assert float(np.max(np.abs(got - ref))) < 1e-8

    def test_power_forcing_classical(self):
        # rho=2, nu=1, rate 1: image 1/(s(s+1)) inverts to 1 - e^{-t}
        p = KineticProblem(1, (1.0,), (1.0,), PowerLaw(2.0))
        ref = 1.0 - np.exp(-TS)
        assert max_rel(solve_power_closed(p, TS), ref) < 1e-10


class TestRouteAgreement:
    def test_closed_vs_derivative_single(self):
        p = KineticProblem(1, (0.5,), (1.0,), Unit())
        a = solve_single_term(p, TS, via="closed")
        b = solve_single_term(p, TS, via="derivative")
        assert max_rel(a, b) < 1e-8

    def test_binomial_vs_multiterm(self):
        p = binomial_problem(1, 2, 0.5, 0.5, Unit())
        assert max_rel(solve_binomial(p, TS), solve_multiterm(p, TS)) < 1e-8

    def test_geometric_vs_multiterm(self):
        p = geometric_problem(1, 2, 0.5, 0.5, Unit())
        assert max_rel(solve_geometric(p, TS), solve_multiterm(p, TS)) < 1e-8

    def test_geometric_three_levels(self):
        p = geometric_problem(1, 3, 0.4, 0.6, Unit())
        assert max_rel(solve_geometric(p, TS), solve_multiterm(p, TS)) < 1e-8

    def test_arithmetic_vs_multiterm(self):
        p = KineticProblem(2, (0.5, 1.0), (1.0, 0.3), Unit())
        assert max_rel(solve_arithmetic(p, TS), solve_multiterm(p, TS)) < 1e-10

    def test_matched_ml_forcing_collapses(self):
        # forcing built from the same binomial denominator cancels it,
        # leaving a pure power-kernel solution
        p = binomial_problem(1, 2, 0.5, 0.5,
                             MLForcing(nu=0.5, gamma_=2.0, delta=1.5, c=0.5))
        assert max_rel(solve_ml_closed(p, TS), solve_binomial(p, TS)) < 1e-8

    def test_power_closed_vs_binomial(self):
        p = KineticProblem(1, (0.5,), (1.0,), PowerLaw(2.0))
        assert max_rel(solve_power_closed(p, TS), solve_binomial(p, TS)) < 1e-8

    def test_grid_matches_pointwise(self):
        p = KineticProblem(2, (0.5, 1.0), (1.0, 0.3), Unit())
        ts, vals = solve_multiterm_grid(p, 2.0)
        sub = slice(0, None, 200)
        assert max_rel(vals[sub], solve_multiterm(p, ts[sub])) < 1e-12


class TestStructure:
    def test_problem_normalizes_order(self):
        a = KineticProblem(1, (1.0, 0.5), (0.3, 1.0), Unit())
        b = KineticProblem(1, (0.5, 1.0), (1.0, 0.3), Unit())
        assert a.nus == b.nus and a.rates == b.rates
        assert np.allclose(solve_multiterm(a, TS), solve_multiterm(b, TS))

    def test_initial_value(self):
        for p in (KineticProblem(1, (0.5,), (1.0,), Unit()),
                  KineticProblem(4.0, (1.0,), (2.0,), Unit())):
            got = solve_single_term(p, np.array([0.0]))[0]
            assert abs(got - p.n0) < 1e-12

    def test_amount_linearity_exact(self):
        base = KineticProblem(1, (0.5, 1.0), (1.0, 0.3), Unit())
        scaled = KineticProblem(3.7, (0.5, 1.0), (1.0, 0.3), Unit())
        assert np.allclose(solve_multiterm(scaled, TS),
                           3.7 * solve_multiterm(base, TS), rtol=1e-13)

    def test_vanishing_rate_recovers_forcing(self):
        # the solution tends to n0 f(t) as the rate goes to zero
        p = geometric_problem(1, 2, 0.5, 1e-6, Unit())
        got = solve_geometric(p, np.array([0.5, 2.0]))
        assert float(np.max(np.abs(got - 1.0))) < 5e-6

    def test_selector_routes(self):
        cases = [
            (KineticProblem(1, (1.0,), (1.0,), Unit()), "single"),
            (KineticProblem(1, (0.5,), (1.0,), Unit()), "single"),
            (binomial_problem(1, 2, 0.5, 0.5, Unit()), "binomial"),
            (geometric_problem(1, 2, 0.5, 0.5, Unit()), "geometric"),
            (KineticProblem(2, (0.5, 1.0), (1.0, 0.3), Unit()), "arithmetic"),
            (KineticProblem(1, (0.5, 0.9, 1.6), (0.4, 0.2, 0.1), Unit()),
             "multiterm"),
            (binomial_problem(1, 2, 0.5, 0.5,
                              MLForcing(nu=0.5, gamma_=2.0, delta=1.5, c=0.5)),
             "ml-closed"),
            (KineticProblem(1, (0.5,), (1.0,), PowerLaw(2.0)), "power-closed"),
        ]
        for problem, expected in cases:
            name, solver = select_solver(problem)
            assert name == expected
            vals = solver(problem, np.array([1.0]))
            assert np.all(np.isfinite(vals))


def test_residual_shrinks_with_mesh():
    p = KineticProblem(2, (0.5, 1.0), (1.0, 0.3), Unit())
    from fkin.fracops import ConvolutionControls
    defects = []
    for ppu in (128, 256):
        ts, vals = solve_multiterm_grid(
            p, 2.0, controls=ConvolutionControls(points_per_unit=ppu))
        res = residual_grid(p, vals, float(ts[1] - ts[0]))
        defects.append(float(np.max(np.abs(res)) / np.max(np.abs(vals))))
    assert defects[1] < defects[0] < 5e-3


@pytest.mark.parametrize("bad", [
    lambda: KineticProblem(1, (0.0,), (1.0,), Unit()),
    lambda: KineticProblem(1, (0.5, 0.5), (1.0, 1.0), Unit()),
    lambda: KineticProblem(1, (0.5,), (math.inf,), Unit()),
    lambda: KineticProblem(1, (0.5, 1.0), (1.0,), Unit()),
    lambda: KineticProblem(math.nan, (0.5,), (1.0,), Unit()),
    lambda: PowerLaw(0.0),
    lambda: MLForcing(0.5, 2.0, 1.5, -0.5),
    lambda: binomial_problem(1, 0, 0.5, 0.5, Unit()),
    lambda: geometric_problem(1, 2, 0.5, 0.0, Unit()),
    lambda: TruncationPolicy(l_max=-1),
    lambda: TruncationPolicy(rel_tol=0.0),
])
def test_problem_validation(bad):
    with pytest.raises(DomainError):
        bad()


def test_negative_times_rejected():
    p = KineticProblem(1, (0.5,), (1.0,), Unit())
    with pytest.raises(DomainError):
        solve_single_term(p, np.array([-1.0]))
    with pytest.raises(DomainError):
        solve_single_term(p, np.array([1.0]), via="bogus")
