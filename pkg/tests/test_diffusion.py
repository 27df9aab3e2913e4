"""Point-source diffusion densities and the one-sided stable density."""

import math

import numpy as np
import pytest
import scipy.integrate as si
import scipy.special as sc

from fkin.diffusion import (DiffusionProblem, StableParams, asymptotic_n2,
                            fundamental_solution, levy_density, series_n1,
                            series_n3)
from fkin.errors import DomainError, NonConvergence, NotSupported

# frozen from independent 120-digit term-by-term summations of the
# residue series, arguments promoted as exact doubles
DEEP_DIM1 = 1.5595540802478901e-09     # alpha=0.9, D=1, x=10, t=1
DEEP_DIM3 = 3.151566913922336e-05      # alpha=0.6, D=1, x=6, t=1
MID_DIM1 = 0.19166770828534177         # alpha=0.5, D=1, x=1, t=1
MID_DIM3 = 0.024852423879502757        # alpha=0.5, D=1, x=1, t=1
SERIES1_HALF_AT_1 = 0.3833354165706835
SERIES3_HALF_AT_1 = 0.3123047691349817
SERIES1_RESCUE = 3.1191081604957803e-09  # alpha=0.9, A=100
LEVY_34_AT_1 = 0.45494890769270696
LEVY_34_AT_25 = 0.06732003219496925
LEVY_13_AT_15 = 0.08422868063437805


def rel(got, ref):
    return abs(got - ref) / max(abs(ref), 1e-300)


class TestSeriesFactors:
    def test_frozen_values(self):
        assert rel(series_n1(0.5, 1.0), SERIES1_HALF_AT_1) < 1e-13
        assert rel(series_n3(0.5, 1.0), SERIES3_HALF_AT_1) < 1e-13

    def test_origin_value(self):
        for alpha in (0.3, 0.5, 0.8, 1.0):
            ref = 1.0 / math.gamma(1.0 - alpha / 2.0)
            assert rel(series_n1(alpha, 0.0), ref) < 1e-13

    def test_deep_argument_rescue(self):
        assert rel(series_n1(0.9, 100.0), SERIES1_RESCUE) < 1e-12

    def test_classical_collapses_to_gaussian(self):
        # alpha=1 zeroes every second coefficient through the gamma
        # poles, leaving exp(-A/4)/sqrt(pi)
        for A in (0.25, 1.0, 4.0):
            ref = math.exp(-A / 4.0) / math.sqrt(math.pi)
            assert rel(series_n1(1.0, A), ref) < 1e-13

    def test_radius_guard(self):
        with pytest.raises(NonConvergence):
            series_n1(0.5, 5000.0)
        with pytest.raises(NonConvergence):
            series_n3(0.5, 5000.0)

    def test_argument_validation(self):
        with pytest.raises(DomainError):
            series_n1(0.0, 1.0)
        with pytest.raises(DomainError):
            series_n1(0.5, -1.0)
        with pytest.raises(DomainError):
            series_n3(1.0, 1.0)
        with pytest.raises(DomainError):
            series_n3(0.5, 0.0)


class TestOneDimension:
    def test_classical_point_values(self):
        p = DiffusionProblem(1.0, 1.0, 1)
        got0 = fundamental_solution(p, 0.0, 1.0)
        assert rel(got0, 1.0 / (2.0 * math.sqrt(math.pi))) < 1e-12
        assert abs(got0 - 0.2820947918) < 1e-9
        got2 = fundamental_solution(p, 2.0, 1.0)
        assert rel(got2, math.exp(-1.0) / (2.0 * math.sqrt(math.pi))) < 1e-12
        assert abs(got2 - 0.1037768744) < 1e-9

    def test_half_order_origin(self):
        p = DiffusionProblem(0.5, 1.0, 1)
        got = fundamental_solution(p, 0.0, 1.0)
        assert rel(got, 0.5 / math.gamma(0.75)) < 1e-12

    def test_frozen_interior_value(self):
        p = DiffusionProblem(0.5, 1.0, 1)
        assert rel(fundamental_solution(p, 1.0, 1.0), MID_DIM1) < 1e-12

    def test_frozen_deep_tail(self):
        p = DiffusionProblem(0.9, 1.0, 1)
        assert rel(fundamental_solution(p, 10.0, 1.0), DEEP_DIM1) < 1e-12

    def test_matches_explicit_series_route(self):
        # the contour two-sum and the explicit one-dimensional series are
        # independent arrangements of the same function
        for alpha, d, x, t in ((0.5, 1.0, 1.0, 1.0), (0.7, 2.0, 0.5, 0.8),
                               (0.9, 0.5, 2.0, 2.0)):
            p = DiffusionProblem(alpha, d, 1)
            got = fundamental_solution(p, x, t)
            A = x * x / (d * t ** alpha)
            ref = series_n1(alpha, A) / (2.0 * math.sqrt(d) * t ** (alpha / 2.0))
            assert rel(got, ref) < 1e-10

    def test_self_similarity(self):
        p = DiffusionProblem(0.6, 1.0, 1)
        s = 4.0
        for x in (0.3, 1.0, 2.5):
            a = fundamental_solution(p, x * s ** 0.3, s)
            b = fundamental_solution(p, x, 1.0)
            assert rel(a * s ** 0.3, b) < 1e-10

    def test_mass_is_conserved(self):
        p = DiffusionProblem(0.6, 1.0, 1)
        t = 1.0
        ell = t ** 0.3
        near, _ = si.quad(lambda x: fundamental_solution(p, x, t), 0.0,
                          6.0 * ell, epsabs=1e-12, epsrel=1e-12, limit=300)
        far, _ = si.quad(lambda x: fundamental_solution(p, x, t), 6.0 * ell,
                         20.0 * ell, epsabs=1e-12, epsrel=1e-12, limit=300)
        assert abs(2.0 * (near + far) - 1.0) < 1e-6


class TestThreeDimensions:
    def test_frozen_interior_value(self):
        p = DiffusionProblem(0.5, 1.0, 3)
        assert rel(fundamental_solution(p, 1.0, 1.0), MID_DIM3) < 1e-12

    def test_frozen_deep_tail(self):
        p = DiffusionProblem(0.6, 1.0, 3)
        assert rel(fundamental_solution(p, 6.0, 1.0), DEEP_DIM3) < 1e-12

    def test_matches_explicit_series_route(self):
        for alpha, d, x, t in ((0.5, 1.0, 1.0, 1.0), (0.7, 2.0, 0.5, 0.8)):
            p = DiffusionProblem(alpha, d, 3)
            got = fundamental_solution(p, x, t)
            A = x * x / (d * t ** alpha)
            ref = series_n3(alpha, A) / (4.0 * math.pi * d ** 1.5
                                         * t ** (1.5 * alpha) * math.sqrt(A))
            assert rel(got, ref) < 1e-10

    def test_origin_diverges(self):
        with pytest.raises(DomainError):
            fundamental_solution(DiffusionProblem(0.5, 1.0, 3), 0.0, 1.0)


class TestTwoDimensions:
    def test_logarithmic_value(self):
        got = asymptotic_n2(0.5, 0.1, 1.0)
        ref = math.log(10.0) / (math.pi * math.gamma(0.5))
        assert rel(got, ref) < 1e-12
        assert abs(got - 0.4135) < 5e-5

    def test_boundary_is_zero(self):
        for alpha, t in ((0.5, 1.0), (0.7, 2.0)):
            assert asymptotic_n2(alpha, t ** (alpha / 2.0), t) == 0.0

    def test_halving_step(self):
        # halving x adds exactly ln 2 / (pi Gamma(1-alpha) t^alpha)
        alpha, t = 0.6, 1.5
        step = math.log(2.0) / (math.pi * math.gamma(1.0 - alpha) * t ** alpha)
        for x in (0.2, 0.4):
            diff = asymptotic_n2(alpha, x / 2.0, t) - asymptotic_n2(alpha, x, t)
            assert rel(diff, step) < 1e-12

    def test_solution_delegates(self):
        p = DiffusionProblem(0.5, 2.0, 2)
        x, t = 0.3, 1.0
        got = fundamental_solution(p, x, t)
        ref = asymptotic_n2(0.5, x / math.sqrt(2.0), t) / 2.0
        assert got == ref

    def test_classical_limit_unsupported(self):
        with pytest.raises(NotSupported):
            fundamental_solution(DiffusionProblem(1.0, 1.0, 2), 0.5, 1.0)

    def test_beyond_diffusion_length_rejected(self):
        with pytest.raises(DomainError):
            asymptotic_n2(0.5, 2.0, 1.0)


class TestStableDensity:
    def test_half_index_closed_form(self):
        sp = StableParams(0.5)
        for t in (0.3, 1.0, 2.7):
            ref = t ** -1.5 * math.exp(-0.25 / t) / (2.0 * math.sqrt(math.pi))
            assert rel(levy_density(sp, t), ref) < 1e-10
        assert rel(levy_density(sp, 1.0), 0.21969564473386122) < 1e-12

    def test_frozen_values(self):
        assert rel(levy_density(StableParams(0.75), 1.0), LEVY_34_AT_1) < 1e-12
        assert rel(levy_density(StableParams(0.75), 2.5), LEVY_34_AT_25) < 1e-12
        assert rel(levy_density(StableParams(1.0 / 3.0), 1.5),
                   LEVY_13_AT_15) < 1e-12

    def test_small_time_underflow_shortcut(self):
        # below the steepest-descent floor the density is under e^-640
        assert levy_density(StableParams(0.75), 0.01) == 0.0

    def test_nonnegative(self):
        for rho in (0.3, 0.5, 0.8):
            sp = StableParams(rho)
            for t in np.logspace(-1.0, 2.0, 40):
                assert levy_density(sp, float(t)) >= 0.0

    def test_unit_mass(self):
        # quadrature to T plus term-by-term integrated tail
        rho = 0.75
        sp = StableParams(rho)
        T = 2.0
        head, _ = si.quad(lambda t: levy_density(sp, t), 0.0, T,
                          epsabs=1e-11, epsrel=1e-11, limit=300)
        tail = 0.0
        for k in range(1, 60):
            tail += ((-1.0) ** k * sc.rgamma(-rho * k) * T ** (-rho * k)
                     / (math.factorial(k) * rho * k))
        assert abs(head + tail - 1.0) < 1e-7

    def test_index_validation(self):
        for bad in (0.0, 1.0, -0.5):
            with pytest.raises(DomainError):
                StableParams(bad)
        with pytest.raises(DomainError):
            levy_density(StableParams(0.5), 0.0)


@pytest.mark.parametrize("bad", [
    lambda: DiffusionProblem(0.0, 1.0, 1),
    lambda: DiffusionProblem(1.5, 1.0, 1),
    lambda: DiffusionProblem(0.5, 0.0, 1),
    lambda: DiffusionProblem(0.5, 1.0, 4),
    lambda: fundamental_solution(DiffusionProblem(0.5, 1.0, 1), 1.0, 0.0),
    lambda: fundamental_solution(DiffusionProblem(0.5, 1.0, 1), -1.0, 1.0),
])
def test_problem_validation(bad):
    with pytest.raises(DomainError):
        bad()


def test_far_tail_rejected_beyond_radius():
    with pytest.raises(NonConvergence):
        fundamental_solution(DiffusionProblem(0.5, 1.0, 1), 70.0, 1.0)
