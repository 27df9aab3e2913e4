"""Fundamental solution of time-fractional diffusion and the stable density.

The solution of the fractional Cauchy problem with a point initial mass is
an H-function of the similarity variable; only its convergent residue
series are evaluated here (one and three dimensions, plus the planar
logarithmic asymptote), never a general H-function engine.  The one-sided
stable density that subordinates the process is evaluated the same way.

Deep in the spatial tail the series lose all their leading digits to
cancellation; sums whose double-precision noise estimate exceeds the
result are redone in extended precision, so every returned value is
trustworthy or an exception.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np
import scipy.special as _sc

from .errors import DomainError, NonConvergence, NotSupported
from .specfun import _EPS, _GUARD_FACTOR, _GUARD_REL, _MAX_DPS, gamma_recip
from .specfun import _gamma_recip_array

__all__ = [
    "DiffusionProblem",
    "StableParams",
    "fundamental_solution",
    "series_n1",
    "series_n3",
    "asymptotic_n2",
    "levy_density",
]

# largest scaled argument A = x^2/(diff_coeff * t^alpha) the series
# accept; 64 diffusion lengths, far beyond any resolvable density
_MAX_A = 4096.0
_BUDGET = 2000
_MP_BUDGET = 20000
_STOP_TOL = 1e-16


@dataclass(frozen=True)
class DiffusionProblem:
    """Time-fraction, diffusion constant, and spatial dimension."""

    alpha: float
    diff_coeff: float
    dim: int

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise DomainError("alpha must lie in (0, 1]")
        if not (self.diff_coeff > 0.0 and math.isfinite(self.diff_coeff)):
            raise DomainError("diff_coeff must be positive and finite")
        if self.dim not in (1, 2, 3):
            raise DomainError("dim must be 1, 2, or 3")


@dataclass(frozen=True)
class StableParams:
    """Index of the one-sided stable density."""

    rho: float

    def __post_init__(self):
        if not (0.0 < self.rho < 1.0):
            raise DomainError("rho must lie in (0, 1)")


def _log_abs_rgamma(g):
    """log|1/Gamma(g)| elementwise; -inf at the poles."""
    g = np.asarray(g, dtype=float)
    out = np.empty_like(g)
    pos = g > 0.0
    out[pos] = -_sc.gammaln(g[pos])
    neg = ~pos
    if np.any(neg):
        gn = g[neg]
        frac = np.abs(np.sin(math.pi * (gn - np.round(gn))))
        with np.errstate(divide="ignore"):
            out[neg] = _sc.gammaln(1.0 - gn) + np.log(frac) - math.log(math.pi)
    return out


def _budget_for(slope):
    # double-precision reciprocal gamma overflows once the argument
    # passes about -170; the caller's gamma argument is g0 - slope*m
    if slope <= 0.0:
        return _BUDGET
    return int(min(_BUDGET, max(64.0, 168.0 / slope)))


def _fsum_with_guard(terms):
    """(value, converged, clean) for an alternating tail-stopped array."""
    if not np.all(np.isfinite(terms)):
        return 0.0, False, False
    total = math.fsum(terms)
    absum = float(np.sum(np.abs(terms)))
    scale = max(abs(total), _EPS * absum, 1e-300)
    tail = np.abs(terms[-3:])
    converged = bool(np.all(tail <= _STOP_TOL * scale))
    clean = _GUARD_FACTOR * _EPS * absum <= _GUARD_REL * abs(total)
    return total, converged, clean


def _mp_alt_series(builder, k0, log10_peak, budget=_MP_BUDGET):
    """sum_{k>=k0} (-w)^k rgamma(g0 - slope*k) / k! in extended precision.

    ``builder`` returns ``(w, g0, slope)`` and runs inside the working
    precision so every constant is formed there; forming them in double
    first injects one-ulp argument noise that the huge cancellation of
    the tail regime amplifies past the value itself.
    """
    dps = min(_MAX_DPS, 40 + max(0, int(log10_peak)))
    for _ in range(4):
        with mp.workdps(dps):
            wm, g0m, slm = builder()
            total = mp.mpf(0)
            fac = mp.factorial(k0)
            powk = (-wm) ** k0
            peak = mp.mpf(0)
            small = 0
            done = False
            for k in range(k0, k0 + budget):
                term = powk * mp.rgamma(g0m - slm * k) / fac
                total += term
                at = abs(term)
                if at > peak:
                    peak = at
                if at <= mp.mpf(_STOP_TOL) * max(abs(total), mp.mpf(1e-300)):
                    small += 1
                    if small >= 3 and k - k0 > 4:
                        done = True
                        break
                else:
                    small = 0
                powk *= -wm
                fac *= k + 1
            if not done:
                raise NonConvergence(
                    "series did not settle within the extended budget")
            floor = mp.mpf(10) ** (-dps + 8)
            if peak * mp.mpf(10) ** (-dps) <= 1e-19 * max(abs(total), floor):
                return float(total)
        if dps >= _MAX_DPS:
            break
        dps = min(_MAX_DPS, 2 * dps)
    raise NonConvergence("extended precision exhausted without a certificate")


def _alt_series(alpha, A, g0, slope, builder):
    """sum_m (-sqrt(A))^m rgamma(g0 - slope*m) / m! with rescue."""
    w = math.sqrt(A)
    n = _budget_for(slope)
    ms = np.arange(n, dtype=float)
    rg = _gamma_recip_array(g0 - slope * ms)
    fac = np.ones(n)
    if n > 1:
        fac[1:] = np.cumprod(w / np.arange(1.0, n))
    terms = np.where(ms % 2 == 0, fac, -fac) * rg
    total, converged, clean = _fsum_with_guard(terms)
    if converged and clean:
        return total
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = ms * (math.log(w) if w > 0 else -math.inf) \
            - _sc.gammaln(ms + 1.0) + _log_abs_rgamma(g0 - slope * ms)
    log10_peak = float(np.max(logs[np.isfinite(logs)])) / math.log(10.0) \
        if np.any(np.isfinite(logs)) else 0.0
    return _mp_alt_series(builder, 0, log10_peak)


def series_n1(alpha, A):
    """Similarity-series factor of the one-dimensional solution.

    Returns ``sum_m (-1)^m A^(m/2) / (Gamma(1 - alpha(m+1)/2) m!)``; the
    caller supplies the ``1/(2 sqrt(D) t^(alpha/2))`` prefactor.  Terms
    whose gamma argument lands on a pole vanish identically, which is
    what collapses the sum to a Gaussian at ``alpha = 1``.
    """
    if not (0.0 < alpha <= 1.0):
        raise DomainError("alpha must lie in (0, 1]")
    if not (A >= 0.0 and math.isfinite(A)):
        raise DomainError("A must be finite and nonnegative")
    if A > _MAX_A:
        raise NonConvergence(f"A={A:g} beyond the validated radius {_MAX_A:g}")
    return _alt_series(
        alpha, A, 1.0 - alpha / 2.0, alpha / 2.0,
        lambda: (mp.sqrt(A), 1 - mp.mpf(alpha) / 2, mp.mpf(alpha) / 2))


def series_n3(alpha, A):
    """Similarity-series factor of the three-dimensional solution.

    Returns ``sum_m (-1)^m A^(m/2) / (Gamma(1 - alpha(1 + m/2)) m!)``;
    the caller supplies the ``1/(4 pi D^(3/2) t^(3 alpha/2) sqrt(A))``
    prefactor, which is singular at ``A = 0``.
    """
    if not (0.0 < alpha < 1.0):
        raise DomainError("alpha must lie in (0, 1)")
    if not (A > 0.0 and math.isfinite(A)):
        raise DomainError("A must be finite and positive")
    if A > _MAX_A:
        raise NonConvergence(f"A={A:g} beyond the validated radius {_MAX_A:g}")
    return _alt_series(
        alpha, A, 1.0 - alpha, alpha / 2.0,
        lambda: (mp.sqrt(A), 1 - mp.mpf(alpha), mp.mpf(alpha) / 2))


def asymptotic_n2(alpha, x, t):
    """Small-x logarithmic form of the planar solution (unit diffusivity).

    ``ln(t^(alpha/2)/x) / (pi Gamma(1-alpha) t^alpha)`` for
    ``0 < x <= t^(alpha/2)``; the boundary gives exactly 0.  This is the
    leading behavior only, not a convergent series.
    """
    if not (0.0 < alpha < 1.0):
        raise DomainError("the logarithmic form needs alpha in (0, 1)")
    if t <= 0.0:
        raise DomainError("t must be positive")
    if x <= 0.0:
        raise DomainError("x must be positive")
    half = t ** (alpha / 2.0)
    if x > half:
        raise DomainError("x beyond the diffusion length: asymptote invalid")
    return math.log(half / x) * gamma_recip(1.0 - alpha) / (math.pi * t ** alpha)


def _two_sum(alpha, n_dim, B):
    """The double pole-residue series of the contour solution.

    ``sum_l (-1)^l Gamma(1-n/2-l) B^(n/2+l) rg(1-alpha n/2-alpha l)/l!
    + sum_l (-1)^l Gamma(n/2-1-l) B^(1+l) rg(1-alpha-alpha l)/l!``
    evaluated through log magnitudes so no intermediate factor overflows.
    """
    fams = (
        (1.0 - n_dim / 2.0, n_dim / 2.0, 1.0 - alpha * n_dim / 2.0),
        (n_dim / 2.0 - 1.0, 1.0, 1.0 - alpha),
    )
    total = 0.0
    all_conv = True
    all_clean = True
    logw = math.log(B) if B > 0.0 else -math.inf
    n = _budget_for(alpha)
    ls = np.arange(n, dtype=float)
    for c0, p0, d0 in fams:
        # numerator gamma sits on half-integers for odd n: never a pole
        cn = c0 - ls
        gd = d0 - alpha * ls
        rg = _gamma_recip_array(gd)
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = (p0 + ls) * logw + _sc.gammaln(cn) \
                - _sc.gammaln(ls + 1.0) + _log_abs_rgamma(gd)
        logs[rg == 0.0] = -math.inf
        signs = np.where(ls % 2 == 0, 1.0, -1.0) * _sc.gammasgn(cn) \
            * np.where(gd > 0.0, 1.0, _sc.gammasgn(gd))
        terms = signs * np.exp(logs)
        val, converged, clean = _fsum_with_guard(terms)
        total += val
        all_conv = all_conv and converged
        all_clean = all_clean and clean
    if all_conv and all_clean:
        return total
    return _two_sum_mp(alpha, n_dim, B)


def _two_sum_mp(alpha, n_dim, B):
    fams = (
        (1.0 - n_dim / 2.0, n_dim / 2.0, 1.0 - alpha * n_dim / 2.0),
        (n_dim / 2.0 - 1.0, 1.0, 1.0 - alpha),
    )
    n = _budget_for(alpha)
    ls = np.arange(n, dtype=float)
    peak = -math.inf
    logw = math.log(B) if B > 0.0 else -math.inf
    for c0, p0, d0 in fams:
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = (p0 + ls) * logw + _sc.gammaln(c0 - ls) \
                - _sc.gammaln(ls + 1.0) + _log_abs_rgamma(d0 - alpha * ls)
        finite = logs[np.isfinite(logs)]
        if finite.size:
            peak = max(peak, float(np.max(finite)))
    log10_peak = peak / math.log(10.0) if math.isfinite(peak) else 0.0
    dps = min(_MAX_DPS, 40 + max(0, int(log10_peak)))
    for _ in range(4):
        with mp.workdps(dps):
            Bm = mp.mpf(B)
            alm = mp.mpf(alpha)
            # family constants formed here, not reused from the double
            # tuples: 1 - 0.45 rounds in double and the cancellation
            # amplifies that single ulp past the tail values themselves
            fams_mp = (
                (1 - mp.mpf(n_dim) / 2, mp.mpf(n_dim) / 2,
                 1 - alm * n_dim / 2),
                (mp.mpf(n_dim) / 2 - 1, mp.mpf(1), 1 - alm),
            )
            total = mp.mpf(0)
            peak_t = mp.mpf(0)
            # the family totals cancel against each other, so a tail cut
            # relative to one family alone is not small relative to the
            # difference; push each tail down to the working precision
            stop = mp.mpf(10) ** (-dps + 15)
            for c0, p0, d0 in fams_mp:
                s = mp.mpf(0)
                gnum = mp.gamma(c0)
                fac = mp.mpf(1)
                powb = Bm ** p0
                small = 0
                done = False
                for l in range(_MP_BUDGET):
                    term = gnum * powb * mp.rgamma(d0 - alm * l) / fac
                    if l % 2:
                        term = -term
                    s += term
                    at = abs(term)
                    if at > peak_t:
                        peak_t = at
                    if at <= stop * max(abs(s), mp.mpf(1e-300)):
                        small += 1
                        if small >= 3 and l > 4:
                            done = True
                            break
                    else:
                        small = 0
                    gnum /= c0 - l - 1
                    powb *= Bm
                    fac *= l + 1
                if not done:
                    raise NonConvergence(
                        "series did not settle within the extended budget")
                total += s
            floor = mp.mpf(10) ** (-dps + 8)
            if peak_t * mp.mpf(10) ** (-dps) <= 1e-19 * max(abs(total), floor):
                return float(total)
        if dps >= _MAX_DPS:
            break
        dps = min(_MAX_DPS, 2 * dps)
    raise NonConvergence("extended precision exhausted without a certificate")


def fundamental_solution(p: DiffusionProblem, x, t):
    """Density at radius ``x``, time ``t``, of the point-source solution.

    Dimensions 1 and 3 evaluate the double pole-residue series of the
    contour-integral solution at ``B = x^2/(4 D t^alpha)`` with the
    ``|sqrt(pi) x|^(-n)`` prefactor; the explicit one- and
    three-dimensional sums serve as independent cross-checks in the test
    suite.  Dimension 2 has no convergent series of this form and
    delegates to the small-x logarithmic asymptote.
    """
    if t <= 0.0:
        raise DomainError("t must be positive")
    if x < 0.0:
        raise DomainError("x is a radius and must be nonnegative")
    d = p.diff_coeff
    if p.dim == 2:
        if p.alpha >= 1.0:
            raise NotSupported("no planar route at the classical limit")
        return asymptotic_n2(p.alpha, x / math.sqrt(d), t) / d
    if x == 0.0:
        if p.dim == 3:
            raise DomainError("the three-dimensional density diverges at x=0")
        return gamma_recip(1.0 - p.alpha / 2.0) / (2.0 * math.sqrt(d) * t ** (p.alpha / 2.0))
    B = x * x / (4.0 * d * t ** p.alpha)
    if B > _MAX_A / 4.0:
        raise NonConvergence(
            f"scaled argument {4.0 * B:g} beyond the validated radius {_MAX_A:g}")
    pref = (math.sqrt(math.pi) * x) ** (-p.dim)
    return pref * _two_sum(p.alpha, p.dim, B)


def levy_density(sp: StableParams, t):
    """One-sided stable density with Laplace transform ``exp(-u^rho)``.

    Power series in ``t^(-rho)`` from term-by-term inversion of the
    transform's exponential series; the poles of the reciprocal gamma
    factor silently remove every term with integer ``k rho``.  Below the
    saddle-point floor the density underflows and 0.0 is returned without
    summing.
    """
    rho = sp.rho
    if t <= 0.0:
        raise DomainError("t must be positive")
    # steepest-descent exponent; 30 nats of slack for the algebraic factor
    lam = (1.0 - rho) * rho ** (rho / (1.0 - rho))
    if -lam * t ** (-rho / (1.0 - rho)) + 30.0 < -640.0:
        return 0.0
    w = t ** (-rho)
    n = _budget_for(rho)
    ks = np.arange(1, n, dtype=float)
    rg = _gamma_recip_array(-rho * ks)
    fac = np.cumprod(w / ks)
    terms = np.where(ks % 2 == 0, fac, -fac) * rg
    total, converged, clean = _fsum_with_guard(terms)
    if converged and clean:
        return total / t
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = ks * math.log(w) - _sc.gammaln(ks + 1.0) \
            + _log_abs_rgamma(-rho * ks)
    finite = logs[np.isfinite(logs)]
    log10_peak = float(np.max(finite)) / math.log(10.0) if finite.size else 0.0
    builder = lambda: (mp.mpf(t) ** -mp.mpf(rho), mp.mpf(0), mp.mpf(rho))
    return _mp_alt_series(builder, 1, log10_peak) / t
