"""Binary collision rules and the pairwise Monte Carlo solver.

A collision maps an opinion pair (w, v) to candidates (w*, v*) that embed the
single-interval feedback control directly in the interaction.  The base rule
(two interacting agents, control strength beta = 4*alpha^2/(nu + 4*alpha^2)) is

    w* = w + alpha*P(w,v)*(v-w) - (beta/2)*((w-w_d)+(v-w_d)) + c + theta1*D(w)
    v* = v + alpha*P(v,w)*(w-v) - (beta/2)*((w-w_d)+(v-w_d)) + c + theta2*D(v)

with the shared cross term c = alpha*(beta/2)*(P(w,v)-P(v,w))*(w-v), which is
exactly the inversion of the implicit two-agent feedback system (the control
acts identically on both agents).  Without noise the pair identities

    w* + v* = (1-beta)*(w+v) + 2*beta*w_d + alpha*(1-beta)*(P(w,v)-P(v,w))*(v-w)
    w* - v* = (w - v)*(1 - alpha*(P(w,v)+P(v,w)))

hold to rounding, so for 0 <= alpha <= 1/2 and P in [0, 1] the relative
distance between two agents never grows.

Variants: 'noise_coupled' feeds the noise through the controller as well,
'mean_control' couples the control to the current population mean instead of
the pair mean, and 'agent_weighted' modulates the control per agent with a
susceptibility Q(w).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import (
    CompromiseFunction,
    ControlWeight,
    DiffusionFunction,
    MomentTrace,
    NoiseModel,
    OpinionEnsemble,
    ScalingParams,
)


class PairingError(ValueError):
    """The ensemble cannot be split into disjoint pairs."""


@dataclass(frozen=True)
class BinaryRule:
    """A binary interaction rule: kind, strengths, target, model functions.

    ``beta`` is stored for the uniform-control kinds; the agent-weighted kind
    recomputes its pair-dependent coefficient from (alpha, nu, Q) instead.
    """

    kind: str  # base | noise_coupled | mean_control | agent_weighted
    P: CompromiseFunction
    D: DiffusionFunction
    alpha: float
    nu: float
    w_d: float
    noise: NoiseModel
    Q: Optional[ControlWeight] = None

    @property
    def beta(self) -> float:
        if math.isinf(self.nu):
            return 0.0
        return 4.0 * self.alpha**2 / (self.nu + 4.0 * self.alpha**2)

    def beta_pair(self, w, v):
        """Agent-dependent control coefficient 4*alpha^2*Q(w) / (nu + 2*alpha^2*(Q(v)^2+Q(w)^2))."""
        qw, qv = self.Q(w), self.Q(v)
        return 4.0 * self.alpha**2 * qw / (self.nu + 2.0 * self.alpha**2 * (qv**2 + qw**2))

    @staticmethod
    def from_scaling(
        kind: str,
        P: CompromiseFunction,
        D: DiffusionFunction,
        scaling: ScalingParams,
        w_d: float,
        Q: Optional[ControlWeight] = None,
    ) -> "BinaryRule":
        """Rule in the small-interaction regime: alpha = eps, nu = eps*kappa,
        uniform noise of variance eps*varsigma."""
        return BinaryRule(
            kind=kind,
            P=P,
            D=D,
            alpha=scaling.epsilon,
            nu=scaling.nu,
            w_d=w_d,
            noise=NoiseModel.scaled_uniform(scaling.epsilon, scaling.varsigma),
            Q=Q,
        )


def collide(w, v, theta1, theta2, rule: BinaryRule, mean: Optional[float] = None):
    """Apply one binary interaction; returns candidate pair (w*, v*).

    Pure and vectorized; candidates may leave [-1, 1], the caller decides
    accept/reject.  The 'mean_control' kind needs the current population mean.
    """
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    a = rule.alpha
    pwv = rule.P(w, v)
    pvw = rule.P(v, w)

    if rule.kind == "agent_weighted":
        bwv = rule.beta_pair(w, v)
        bvw = rule.beta_pair(v, w)
        qw, qv = rule.Q(w), rule.Q(v)
        pull = qv * (v - rule.w_d) + qw * (w - rule.w_d)
        cross = (qw * pwv - qv * pvw) * (v - w)
        w_star = w + a * pwv * (v - w) - 0.5 * bwv * pull - 0.5 * a * bwv * cross
        v_star = v + a * pvw * (w - v) - 0.5 * bvw * pull - 0.5 * a * bvw * cross
        return w_star + theta1 * rule.D(w), v_star + theta2 * rule.D(v)

    b = rule.beta
    cross = 0.5 * a * b * (pwv - pvw) * (w - v)
    if rule.kind == "mean_control":
        if mean is None:
            raise ValueError("mean_control rule needs the current ensemble mean")
        pull = b * (mean - rule.w_d)
    else:
        pull = 0.5 * b * ((w - rule.w_d) + (v - rule.w_d))
    w_det = w + a * pwv * (v - w) - pull + cross
    v_det = v + a * pvw * (w - v) - pull + cross

    if rule.kind == "noise_coupled":
        nw = theta1 * rule.D(w)
        nv = theta2 * rule.D(v)
        return w_det + (1.0 - 0.5 * b) * nw - 0.5 * b * nv, v_det + (1.0 - 0.5 * b) * nv - 0.5 * b * nw
    if rule.kind in ("base", "mean_control"):
        return w_det + theta1 * rule.D(w), v_det + theta2 * rule.D(v)
    raise ValueError(f"unknown rule kind {rule.kind!r}")


# ---------------------------------------------------------------------------
# bound-preservation conditions


@dataclass(frozen=True)
class BoundReport:
    """Sufficient conditions for collisions to stay inside [-1, 1]:
    beta/2 <= alpha*p and noise amplitude < d*(1 - beta/2), with p the minimum
    of P on I x I and d the minimum of (1-w)/D(w) where D does not vanish."""

    p: float
    d: float
    condition_control: bool
    noise_cap: float
    satisfied: bool
    reason: str = ""


def _refine_min(fn, lo, hi, iters=200):
    # ternary search; assumes fn is unimodal on [lo, hi] near the grid minimum
    for _ in range(iters):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if fn(m1) <= fn(m2):
            hi = m2
        else:
            lo = m1
    mid = 0.5 * (lo + hi)
    return min(fn(lo), fn(mid), fn(hi))


def check_bounds_conditions(rule: BinaryRule) -> BoundReport:
    """Evaluate the bound-preservation conditions for a rule by dense-grid
    minimization (step 1e-3) with local ternary refinement."""
    grid = np.linspace(-1.0, 1.0, 2001)
    ww, vv = np.meshgrid(grid, grid, indexing="ij")
    pvals = rule.P(ww, vv)
    p = float(pvals.min())
    k = np.unravel_index(int(np.argmin(pvals)), pvals.shape)
    # refine along each axis around the grid argmin
    w0, v0 = grid[k[0]], grid[k[1]]
    h = 2.0 / 2000.0
    p = min(
        p,
        _refine_min(lambda x: float(rule.P(x, v0)), max(-1.0, w0 - h), min(1.0, w0 + h)),
        _refine_min(lambda x: float(rule.P(w0, x)), max(-1.0, v0 - h), min(1.0, v0 + h)),
    )

    if not rule.P.bounded_unit or p <= 0.0:
        return BoundReport(
            p=p, d=math.nan, condition_control=False, noise_cap=math.nan,
            satisfied=False, reason="p <= 0" if p <= 0.0 else "P not in [0, 1]",
        )

    inner = grid[1:-1]
    dvals = rule.D(inner)
    mask = dvals > 1e-12
    if not np.any(mask):
        d = math.inf  # no diffusion anywhere: noise is inert
    else:
        ratio = (1.0 - inner[mask]) / dvals[mask]
        d = float(ratio.min())
        w0 = float(inner[mask][int(np.argmin(ratio))])

        def f(x):
            dx = float(rule.D(x))
            return (1.0 - x) / dx if dx > 1e-12 else math.inf

        d = min(d, _refine_min(f, max(-1.0 + 1e-9, w0 - h), min(1.0 - 1e-9, w0 + h)))

    condition_control = 0.5 * rule.beta <= rule.alpha * p
    noise_cap = d * (1.0 - 0.5 * rule.beta)
    satisfied = condition_control and rule.noise.half_width < noise_cap
    reason = ""
    if not condition_control:
        reason = "beta/2 > alpha*p"
    elif not satisfied:
        reason = "noise amplitude >= d*(1 - beta/2)"
    return BoundReport(
        p=p, d=d, condition_control=condition_control,
        noise_cap=noise_cap, satisfied=satisfied, reason=reason,
    )


# ---------------------------------------------------------------------------
# direct simulation Monte Carlo


def dsmc_step(
    ensemble: OpinionEnsemble,
    rule: BinaryRule,
    scaling: ScalingParams,
    rng: np.random.Generator,
    dt_mc: Optional[float] = None,
) -> tuple[OpinionEnsemble, int]:
    """Advance the ensemble by one collision sweep of length dt_mc.

    The population is shuffled into N/2 disjoint pairs; each pair collides
    with probability eta*dt_mc (default dt_mc = epsilon, probability 1).  A
    collision whose candidates leave [-1, 1] is rejected as a whole: both
    agents keep their pre-collision values.  Returns the new ensemble and the
    number of rejected collisions.
    """
    n = ensemble.count
    if n % 2 != 0:
        raise PairingError(f"cannot pair an odd ensemble (count={n})")
    if dt_mc is None:
        dt_mc = scaling.epsilon
    p_collide = scaling.eta * dt_mc
    if p_collide > 1.0 + 1e-12:
        raise ValueError(f"eta*dt_mc = {p_collide} exceeds 1; shrink dt_mc")

    values = ensemble.values
    perm = rng.permutation(n)
    i_idx, j_idx = perm[: n // 2], perm[n // 2 :]
    if p_collide < 1.0:
        hit = rng.random(n // 2) < p_collide
        i_idx, j_idx = i_idx[hit], j_idx[hit]
    if i_idx.size == 0:
        return ensemble, 0

    theta1 = rule.noise.sample(rng, i_idx.size)
    theta2 = rule.noise.sample(rng, i_idx.size)
    mean = ensemble.mean() if rule.kind == "mean_control" else None
    w_star, v_star = collide(values[i_idx], values[j_idx], theta1, theta2, rule, mean=mean)

    ok = (np.abs(w_star) <= 1.0) & (np.abs(v_star) <= 1.0)
    new_values = values.copy()
    new_values[i_idx[ok]] = w_star[ok]
    new_values[j_idx[ok]] = v_star[ok]
    return OpinionEnsemble(new_values), int(np.count_nonzero(~ok))


def run_dsmc(
    initial: OpinionEnsemble,
    rule: BinaryRule,
    scaling: ScalingParams,
    T: float,
    record_dt: float,
    rng: np.random.Generator,
    dt_mc: Optional[float] = None,
) -> tuple[MomentTrace, OpinionEnsemble]:
    """Iterate dsmc_step up to time T, recording moments and the rejection
    rate (rejected / attempted collisions per record interval)."""
    if T < 0:
        raise ValueError("T must be >= 0")
    if dt_mc is None:
        dt_mc = scaling.epsilon

    times, ms, es, dists, rates = [], [], [], [], []

    def record(t, rate):
        times.append(t)
        m = ensemble.mean()
        ms.append(m)
        es.append(ensemble.second_moment())
        dists.append(abs(m - rule.w_d))
        rates.append(rate)

    ensemble = initial
    record(0.0, 0.0)
    n_steps = int(round(T / dt_mc))
    steps_per_record = max(1, int(round(record_dt / dt_mc)))
    p_collide = min(1.0, scaling.eta * dt_mc)
    rejected, attempted = 0, 0.0
    for step in range(1, n_steps + 1):
        ensemble, rej = dsmc_step(ensemble, rule, scaling, rng, dt_mc=dt_mc)
        attempted += p_collide * (ensemble.count // 2)  # expected attempts
        rejected += rej
        if step % steps_per_record == 0 or step == n_steps:
            record(step * dt_mc, rejected / attempted if attempted else 0.0)
            rejected, attempted = 0, 0.0

    return (
        MomentTrace(
            times=np.array(times), m=np.array(ms), E=np.array(es),
            dist=np.array(dists), aux=np.array(rates), aux_label="rejection_rate",
        ),
        ensemble,
    )
