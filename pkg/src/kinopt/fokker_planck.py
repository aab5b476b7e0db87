"""Analytic layer of the small-interaction limit: moment ODEs, stationary
densities with numerically normalized constants, and the exact mean-field
solution of the uncontrolled Sznajd dynamic.

The stationary families solve the first-order balance

    (varsigma/2) * d/dw [D(w)^2 f] = (P(w) + 2/kappa) * (w_d - w) * f

with D(w) = 1 - w^2 and either P == 1 (constant compromise) or P = 1 - w^2
(Sznajd compromise).  Both are integrated in closed form; the normalization
constant is computed by adaptive quadrature with a boundary cutoff chosen so
the discarded tails stay below 1e-12 of the mass (the exponential factor
decays superpolynomially at +-1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

from .model import DiffusionFunction, MomentTrace


class ConditionUnmet(ValueError):
    """A parameter condition required by an analytic bound does not hold."""


class ClosureUnavailable(ValueError):
    """The moment system has no closed form for this diffusion function."""


class QuadratureFailure(RuntimeError):
    """Normalization quadrature did not converge to tolerance."""


# ---------------------------------------------------------------------------
# moments


def mean_closed_form(t, m0: float, w_d: float, eta: float, beta: float):
    """Mean opinion under symmetric compromise: exponential relaxation to w_d
    at rate eta*beta."""
    if eta < 0 or beta < 0:
        raise ValueError("eta and beta must be >= 0")
    decay = np.exp(-eta * beta * np.asarray(t, dtype=float))
    return (1.0 - decay) * w_d + m0 * decay


def mean_limit_bounds(alpha: float, nu: float, w_d: float) -> tuple[float, float]:
    """Bracket for the asymptotic mean under a non-symmetric compromise,
    valid for nu < 4*alpha: [4a/(4a+nu), 4a/(4a-nu)] * w_d (order swapped for
    negative targets)."""
    if nu >= 4.0 * alpha:
        raise ConditionUnmet(f"bracket requires nu < 4*alpha (nu={nu}, alpha={alpha})")
    lo = 4.0 * alpha / (4.0 * alpha + nu) * w_d
    hi = 4.0 * alpha / (4.0 * alpha - nu) * w_d
    return (lo, hi) if w_d >= 0 else (hi, lo)


def moment_ode_solve(
    m0: float,
    E0: float,
    T: float,
    kappa: float,
    varsigma: float,
    D: DiffusionFunction,
    w_d: float,
    record_dt: Optional[float] = None,
) -> MomentTrace:
    """Integrate the limit moment system

        dm/dt = (4/kappa) (w_d - m)
        dE/dt = -2 (1 + 2/kappa) (E - m^2) - (8/kappa) m (m - w_d) + varsigma * <D>

    with the closure <D> = 1 - E for quadratic D and 0 for no diffusion,
    using an embedded adaptive Runge-Kutta pair (rtol 1e-10, atol 1e-12).
    """
    if D.kind == "quadratic":
        closure = lambda E: 1.0 - E
    elif D.kind == "none":
        closure = lambda E: 0.0
    else:
        raise ClosureUnavailable(f"no moment closure for diffusion kind {D.kind!r}")
    if not (m0 * m0 <= E0 + 1e-12 and E0 <= 1.0 + 1e-12):
        raise ValueError(f"need m0^2 <= E0 <= 1 (got m0={m0}, E0={E0})")

    inv_k = 0.0 if math.isinf(kappa) else 1.0 / kappa

    def rhs(_t, y):
        m, E = y
        dm = 4.0 * inv_k * (w_d - m)
        dE = (
            -2.0 * (1.0 + 2.0 * inv_k) * (E - m * m)
            - 8.0 * inv_k * m * (m - w_d)
            + varsigma * closure(E)
        )
        return (dm, dE)

    if record_dt is None:
        record_dt = T / 200.0 if T > 0 else 1.0
    t_eval = np.arange(0.0, T + 0.5 * record_dt, record_dt) if T > 0 else np.array([0.0])
    t_eval[-1] = T
    sol = integrate.solve_ivp(
        rhs, (0.0, T), (m0, E0), method="RK45", t_eval=t_eval, rtol=1e-10, atol=1e-12
    )
    if not sol.success:
        raise RuntimeError(f"moment ODE integration failed: {sol.message}")
    m, E = sol.y
    return MomentTrace(
        times=sol.t, m=m, E=E, dist=np.abs(m - w_d),
        aux=np.zeros_like(sol.t), aux_label="none",
    )


# ---------------------------------------------------------------------------
# stationary densities


@dataclass(frozen=True)
class SteadyDensity:
    """Normalized stationary density on (-1, 1); callable on scalars/arrays.

    ``family`` is 'constant' (P == 1) or 'sznajd' (P = 1 - w^2); ``m`` is the
    mean parameter of the constant family (equal to w_d at stationarity).
    """

    family: str
    w_d: float
    varsigma: float
    kappa: float
    m: float
    norm_constant: float
    _log_unnorm: Callable = field(repr=False)
    _cut: float = field(repr=False, default=1e-8)
    _peaks: tuple = field(repr=False, default=())
    _beta_ab: Optional[tuple] = field(repr=False, default=None)

    def __call__(self, w):
        scalar = np.isscalar(w) or np.ndim(w) == 0
        w = np.atleast_1d(np.asarray(w, dtype=float))
        out = np.zeros_like(w)
        inside = np.abs(w) < 1.0
        if np.any(inside):
            with np.errstate(over="ignore", under="ignore"):
                out[inside] = self.norm_constant * np.exp(self._log_unnorm(w[inside]))
        return float(out[0]) if scalar else out

    def moment(self, k: int) -> float:
        """k-th raw moment (adaptive quadrature; exact Beta moments for the
        pure power-law family, whose endpoint tails defeat a cutoff)."""
        if self._beta_ab is not None:
            a, b = self._beta_ab
            # w = 1 - 2X with X ~ Beta(a, b)
            x_raw = [1.0]
            for j in range(k):
                x_raw.append(x_raw[-1] * (a + j) / (a + b + j))
            return float(sum(
                math.comb(k, j) * (-2.0) ** j * x_raw[j] for j in range(k + 1)
            ))
        val, _ = _quad_cut(lambda w: w**k * self(w), self._cut, self._peaks, epsrel=1e-9)
        return val

    def variance_about(self, center: float) -> float:
        if self._beta_ab is not None:
            return self.moment(2) - 2.0 * center * self.moment(1) + center**2
        val, _ = _quad_cut(
            lambda w: (w - center) ** 2 * self(w), self._cut, self._peaks, epsrel=1e-9
        )
        return val


def _quad_cut(fn, cut, peaks, epsrel=1e-10):
    pts = [p for p in peaks if -1.0 + cut < p < 1.0 - cut]
    return integrate.quad(
        fn, -1.0 + cut, 1.0 - cut, points=pts or None, limit=400,
        epsabs=1e-13, epsrel=epsrel,
    )


def _log_unnorm_constant(w, w_d, varsigma, kappa, m):
    # solves (s/2) (D^2 f)' = (1 + 2/k)(w_d - w) f for D = 1 - w^2; both the
    # odd power and the exponential carry the control factor 1 + 2/kappa
    c = 1.0 if math.isinf(kappa) else 1.0 + 2.0 / kappa
    one_minus = 1.0 - w
    one_plus = 1.0 + w
    s = c * m / (2.0 * varsigma)
    return (
        -2.0 * np.log(one_minus * one_plus)
        + s * (np.log(one_plus) - np.log(one_minus))
        - c * (1.0 - m * w) / (varsigma * one_minus * one_plus)
    )


def _log_unnorm_sznajd(w, w_d, varsigma, kappa):
    p_minus = -2.0 - (w_d - 1.0) / varsigma
    p_plus = -2.0 + (w_d + 1.0) / varsigma
    out = np.zeros_like(w)
    if not math.isinf(kappa):
        p_minus -= w_d / (kappa * varsigma)
        p_plus += w_d / (kappa * varsigma)
        out = -(2.0 / kappa) * (1.0 - w_d * w) / (varsigma * (1.0 - w * w))
    return out + p_minus * np.log(1.0 - w) + p_plus * np.log(1.0 + w)


def steady_density(
    family: str,
    w_d: float,
    varsigma: float,
    kappa: float,
    m: Optional[float] = None,
) -> SteadyDensity:
    """Construct and normalize a stationary density.

    Raises QuadratureFailure when the normalization integral cannot be
    computed to tolerance (including non-integrable parameter choices).
    """
    if varsigma <= 0:
        raise ValueError("varsigma must be > 0")
    if kappa <= 0:
        raise ValueError("kappa must be > 0")
    if not abs(w_d) < 1:
        raise ValueError("need |w_d| < 1")
    if m is None:
        m = w_d

    if family == "constant":
        log_unnorm = lambda w: _log_unnorm_constant(w, w_d, varsigma, kappa, m)
        has_exp = True
    elif family == "sznajd":
        log_unnorm = lambda w: _log_unnorm_sznajd(w, w_d, varsigma, kappa)
        has_exp = not math.isinf(kappa)
    else:
        raise ValueError(f"unknown steady family {family!r}")

    # locate interior peaks so the adaptive rule subdivides there
    scan = np.linspace(-1.0 + 1e-6, 1.0 - 1e-6, 4001)
    log_scan = log_unnorm(scan)
    log_max = float(log_scan.max())
    strict = np.flatnonzero(
        (log_scan[1:-1] > log_scan[:-2]) & (log_scan[1:-1] > log_scan[2:])
    )
    peaks = tuple(scan[strict + 1][:8]) or (float(scan[int(np.argmax(log_scan))]),)

    beta_ab = None
    if has_exp:
        # shrink the cutoff until both discarded tails are negligible; the
        # integrand decreases monotonically past the last peak, so the tail is
        # bounded by endpoint value * width
        cut = 1e-3
        norm = None
        for _ in range(40):
            z, err = _quad_cut(lambda w: np.exp(log_unnorm(w) - log_max), cut, peaks)
            if z <= 0 or not math.isfinite(z):
                raise QuadratureFailure("normalization integral vanished or diverged")
            tail = (
                math.exp(float(log_unnorm(np.array(1.0 - cut))) - log_max)
                + math.exp(float(log_unnorm(np.array(-1.0 + cut))) - log_max)
            ) * cut
            if tail < 1e-12 * z and err < 1e-8 * z:
                norm = z
                break
            cut *= 0.25
        if norm is None:
            raise QuadratureFailure("tail cutoff iteration did not converge")
    else:
        # pure power-law endpoints (uncontrolled Sznajd family): exact Beta
        # normalization, a cutoff cannot reach the tolerance here
        a = -1.0 + (1.0 - w_d) / varsigma
        b = -1.0 + (1.0 + w_d) / varsigma
        if a <= 0 or b <= 0:
            raise QuadratureFailure(
                f"non-integrable endpoints (need varsigma < 1 -|w_d|, got {varsigma})"
            )
        cut = 0.0
        beta_ab = (a, b)
        norm = math.exp((a + b - 1.0) * math.log(2.0) + special.betaln(a, b) - log_max)

    return SteadyDensity(
        family=family, w_d=w_d, varsigma=varsigma, kappa=kappa, m=m,
        norm_constant=math.exp(-log_max) / norm,
        _log_unnorm=log_unnorm, _cut=cut, _peaks=peaks, _beta_ab=beta_ab,
    )


# ---------------------------------------------------------------------------
# exact mean-field Sznajd transport


def sznajd_exact(w, t: float, gamma: float, f0: Callable):
    """Exact density of the mean-field Sznajd dynamic (zero initial mean):
    the pushforward of f0 along the characteristics of
    d/dt f = gamma * d/dw [w (1 - w^2) f]."""
    w = np.asarray(w, dtype=float)
    g = (1.0 - w * w) * math.exp(-2.0 * gamma * t) + w * w
    return math.exp(-2.0 * gamma * t) / g**1.5 * np.asarray(f0(w / np.sqrt(g)), dtype=float)


def sznajd_exact_cdf(w, t: float, gamma: float, f0_cdf: Optional[Callable] = None):
    """CDF of sznajd_exact; defaults to uniform initial data on [-1, 1]."""
    if f0_cdf is None:
        f0_cdf = lambda x: np.clip((np.asarray(x) + 1.0) / 2.0, 0.0, 1.0)
    w = np.asarray(w, dtype=float)
    g = (1.0 - w * w) * math.exp(-2.0 * gamma * t) + w * w
    return np.asarray(f0_cdf(w / np.sqrt(g)))
