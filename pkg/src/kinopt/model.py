"""Shared domain types: opinion ensembles, model functions, parameters, validation.

Opinions live on the closed interval I = [-1, 1].  The model functions
(compromise P, diffusion D, control weight Q) are carried as vectorized
evaluators so that custom variants plug into every solver unchanged; the
built-in kinds are tagged so analytic closures elsewhere can special-case
them.  All types are immutable after construction and safe to share.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

I_MIN, I_MAX = -1.0, 1.0

# dense validation grid on I (step 0.01)
_GRID = np.linspace(I_MIN, I_MAX, 201)


def _freeze(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.flags.writeable = False
    return arr


# ---------------------------------------------------------------------------
# model functions


@dataclass(frozen=True)
class CompromiseFunction:
    """Interaction strength P(w, v): the inclination of agent w to move toward v.

    ``bounded_unit`` records whether 0 <= P <= 1 holds on I x I; it is probed
    on a 201x201 grid at construction because custom evaluators are opaque.
    Solvers that rely on bound preservation check this flag instead of P itself.
    """

    kind: str
    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    params: dict = field(default_factory=dict)
    bounded_unit: bool = True

    def __call__(self, w, v):
        return self.evaluate(np.asarray(w, dtype=float), np.asarray(v, dtype=float))

    @staticmethod
    def constant() -> "CompromiseFunction":
        return CompromiseFunction(
            kind="constant",
            evaluate=lambda w, v: np.ones(np.broadcast(w, v).shape),
            bounded_unit=True,
        )

    @staticmethod
    def sznajd(gamma: float) -> "CompromiseFunction":
        """P(w, v) = gamma * (1 - w^2); concentration for gamma>0, separation for gamma<0."""

        def ev(w, v):
            return gamma * (1.0 - w**2) * np.ones(np.broadcast(w, v).shape)

        return CompromiseFunction(
            kind="sznajd",
            evaluate=ev,
            params={"gamma": gamma},
            bounded_unit=_scan_bounded_unit(ev),
        )

    @staticmethod
    def bounded_confidence(delta: float) -> "CompromiseFunction":
        """P(w, v) = 1 if |w - v| <= delta else 0."""

        def ev(w, v):
            return np.where(np.abs(w - v) <= delta, 1.0, 0.0)

        return CompromiseFunction(
            kind="bounded_confidence",
            evaluate=ev,
            params={"delta": delta},
            bounded_unit=True,
        )

    @staticmethod
    def custom(fn: Callable, name: str = "custom") -> "CompromiseFunction":
        def ev(w, v):
            return np.asarray(fn(w, v), dtype=float)

        return CompromiseFunction(
            kind=name, evaluate=ev, bounded_unit=_scan_bounded_unit(ev)
        )


def _scan_bounded_unit(ev) -> bool:
    ww, vv = np.meshgrid(_GRID, _GRID, indexing="ij")
    p = ev(ww, vv)
    return bool(np.all(p >= 0.0) and np.all(p <= 1.0))


@dataclass(frozen=True)
class DiffusionFunction:
    """Local noise amplitude D(w), 0 <= D <= 1 on I; vanishing D keeps bounds."""

    kind: str
    evaluate: Callable[[np.ndarray], np.ndarray]

    def __call__(self, w):
        return self.evaluate(np.asarray(w, dtype=float))

    @staticmethod
    def none() -> "DiffusionFunction":
        return DiffusionFunction("none", lambda w: np.zeros_like(np.asarray(w, dtype=float)))

    @staticmethod
    def quadratic() -> "DiffusionFunction":
        return DiffusionFunction("quadratic", lambda w: 1.0 - w**2)

    @staticmethod
    def custom(fn: Callable, name: str = "custom") -> "DiffusionFunction":
        return DiffusionFunction(name, lambda w: np.asarray(fn(w), dtype=float))


@dataclass(frozen=True)
class ControlWeight:
    """Agent-dependent control susceptibility Q(w) with 0 < Q <= 1 on I."""

    kind: str
    evaluate: Callable[[np.ndarray], np.ndarray]

    def __call__(self, w):
        return self.evaluate(np.asarray(w, dtype=float))

    @staticmethod
    def uniform() -> "ControlWeight":
        return ControlWeight("uniform", lambda w: np.ones_like(np.asarray(w, dtype=float)))

    @staticmethod
    def custom(fn: Callable, name: str = "custom") -> "ControlWeight":
        q = np.asarray(fn(_GRID), dtype=float)
        if np.any(q <= 0.0) or np.any(q > 1.0):
            raise ValueError(
                "control weight must satisfy 0 < Q(w) <= 1 on [-1, 1]; "
                f"grid scan found range [{q.min():.4g}, {q.max():.4g}]"
            )
        return ControlWeight(name, lambda w: np.asarray(fn(w), dtype=float))


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class ControlParams:
    """Target state and penalization of the feedback controller.

    ``clamp = (u_L, u_R)`` optionally saturates the applied control; when it
    is set the microscopic stepper also clips opinions back to I instead of
    raising on a bound violation.
    """

    w_d: float
    nu: float
    clamp: Optional[tuple[float, float]] = None

    def saturate(self, u: float) -> float:
        if self.clamp is None:
            return u
        lo, hi = self.clamp
        return min(max(u, lo), hi)


@dataclass(frozen=True)
class ScalingParams:
    """Joint small-interaction scaling: alpha = eps, eta = 1/eps, nu = eps*kappa,
    noise variance = eps*varsigma.  Derived quantities are recomputed from the
    fields so there is no cached state to fall out of sync."""

    epsilon: float
    kappa: float  # may be math.inf (uncontrolled)
    varsigma: float = 0.0

    @property
    def alpha(self) -> float:
        return self.epsilon

    @property
    def eta(self) -> float:
        return 1.0 / self.epsilon

    @property
    def beta(self) -> float:
        if math.isinf(self.kappa):
            return 0.0
        return 4.0 * self.epsilon / (self.kappa + 4.0 * self.epsilon)

    @property
    def nu(self) -> float:
        return self.epsilon * self.kappa

    @property
    def noise_variance(self) -> float:
        return self.epsilon * self.varsigma


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean collision noise; only 'none' and symmetric uniform are built in."""

    kind: str
    half_width: float = 0.0

    @property
    def variance(self) -> float:
        return self.half_width**2 / 3.0

    @staticmethod
    def none() -> "NoiseModel":
        return NoiseModel("none", 0.0)

    @staticmethod
    def uniform(half_width: float) -> "NoiseModel":
        if half_width <= 0:
            raise ValueError("uniform noise needs half_width > 0")
        return NoiseModel("uniform", half_width)

    @staticmethod
    def scaled_uniform(epsilon: float, varsigma: float) -> "NoiseModel":
        """Uniform noise with variance epsilon*varsigma (half width sqrt(3*eps*varsigma))."""
        if varsigma == 0.0:
            return NoiseModel.none()
        return NoiseModel.uniform(math.sqrt(3.0 * epsilon * varsigma))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "none":
            return np.zeros(size)
        return rng.uniform(-self.half_width, self.half_width, size)


# ---------------------------------------------------------------------------
# state


@dataclass(frozen=True)
class OpinionEnsemble:
    """A population of opinions in [-1, 1]; the backing array is read-only."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values))

    @property
    def count(self) -> int:
        return self.values.size

    def mean(self) -> float:
        # compensated summation: moment assertions at 1e-13 need better than
        # naive accumulation at N_s = 1e5
        return math.fsum(self.values) / self.count

    def second_moment(self) -> float:
        return math.fsum(self.values**2) / self.count

    @staticmethod
    def uniform(
        n: int, rng: np.random.Generator, low: float = I_MIN, high: float = I_MAX
    ) -> "OpinionEnsemble":
        return OpinionEnsemble(rng.uniform(low, high, n))


@dataclass(frozen=True)
class MomentTrace:
    """Recorded time series of mean, second moment, distance to target and a
    mode-specific auxiliary series (control value, rejection rate, ...)."""

    times: np.ndarray
    m: np.ndarray
    E: np.ndarray
    dist: np.ndarray
    aux: np.ndarray
    aux_label: str = "aux"
    m_stderr: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("times", "m", "E", "dist", "aux"):
            object.__setattr__(self, name, _freeze(getattr(self, name)))
        if self.m_stderr is not None:
            object.__setattr__(self, "m_stderr", _freeze(self.m_stderr))

    def __len__(self) -> int:
        return self.times.size

    def target_variance(self, w_d: float) -> np.ndarray:
        """Second moment about the target, E - 2*m*w_d + w_d^2."""
        return self.E - 2.0 * self.m * w_d + w_d**2


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class ModelSpec:
    """Bundle of model functions and parameters handed to the solvers."""

    P: CompromiseFunction
    D: DiffusionFunction = field(default_factory=DiffusionFunction.none)
    Q: ControlWeight = field(default_factory=ControlWeight.uniform)
    noise: NoiseModel = field(default_factory=NoiseModel.none)
    control: Optional[ControlParams] = None
    scaling: Optional[ScalingParams] = None


@dataclass(frozen=True)
class ValidationReport:
    entries: tuple  # (name, level, message) with level in {"ok", "warning", "error"}

    @property
    def ok(self) -> bool:
        return all(level != "error" for _, level, _ in self.entries)

    @property
    def warnings(self) -> list[str]:
        return [msg for _, level, msg in self.entries if level == "warning"]

    @property
    def errors(self) -> list[str]:
        return [msg for _, level, msg in self.entries if level == "error"]

    def lines(self) -> list[str]:
        return [f"[{level.upper():7s}] {name}: {msg}" for name, level, msg in self.entries]


def validate_spec(
    spec: ModelSpec, ensemble: Optional[OpinionEnsemble] = None
) -> ValidationReport:
    """Check every invariant of a model bundle; hard violations are errors,
    soft ones (e.g. a compromise function leaving [0, 1]) are warnings."""
    entries = []

    def add(name, level, msg):
        entries.append((name, level, msg))

    if spec.P.kind == "bounded_confidence":
        delta = spec.P.params.get("delta", 0.0)
        if not 0.0 < delta <= 2.0:
            add("P.delta", "error", f"confidence bound delta={delta} outside (0, 2]")
        else:
            add("P.delta", "ok", f"delta={delta} in (0, 2]")
    if spec.P.bounded_unit:
        add("P.bounded_unit", "ok", "0 <= P <= 1 on the validation grid")
    else:
        add(
            "P.bounded_unit",
            "warning",
            "P not in [0,1]; bound preservation not guaranteed, rejection kernel required",
        )

    d = spec.D(_GRID)
    if np.any(d < 0.0) or np.any(d > 1.0):
        add("D.range", "error", f"D(w) outside [0, 1]: range [{d.min():.4g}, {d.max():.4g}]")
    else:
        add("D.range", "ok", "0 <= D <= 1 on the validation grid")

    q = spec.Q(_GRID)
    if np.any(q <= 0.0) or np.any(q > 1.0):
        add("Q.range", "error", f"Q(w) outside (0, 1]: range [{q.min():.4g}, {q.max():.4g}]")
    else:
        add("Q.range", "ok", "0 < Q <= 1 on the validation grid")

    if spec.control is not None:
        c = spec.control
        if c.nu <= 0.0:
            add("control.nu", "error", f"penalization nu={c.nu} must be > 0")
        else:
            add("control.nu", "ok", f"nu={c.nu} > 0")
        if not I_MIN <= c.w_d <= I_MAX:
            add("control.w_d", "error", f"desired state w_d={c.w_d} outside [-1, 1]")
        else:
            add("control.w_d", "ok", f"w_d={c.w_d} in [-1, 1]")
        if c.clamp is not None:
            lo, hi = c.clamp
            if not lo < hi:
                add("control.clamp", "error", f"clamp bounds ({lo}, {hi}) need u_L < u_R")
            else:
                add("control.clamp", "ok", f"clamp ({lo}, {hi})")

    if spec.scaling is not None:
        s = spec.scaling
        if s.epsilon <= 0.0:
            add("scaling.epsilon", "error", f"epsilon={s.epsilon} must be > 0")
        else:
            add("scaling.epsilon", "ok", f"epsilon={s.epsilon} > 0")
        if s.kappa <= 0.0:
            add("scaling.kappa", "error", f"kappa={s.kappa} must be > 0 (or inf)")
        elif not 0.0 <= s.beta < 1.0:
            add("scaling.beta", "error", f"derived beta={s.beta} outside [0, 1)")
        else:
            add("scaling.kappa", "ok", f"kappa={s.kappa}, beta={s.beta:.6g}")
        if s.varsigma < 0.0:
            add("scaling.varsigma", "error", f"varsigma={s.varsigma} must be >= 0")

    if ensemble is not None:
        if ensemble.count < 2:
            add("ensemble.count", "error", f"need at least 2 agents, got {ensemble.count}")
        elif ensemble.count % 2 != 0:
            add("ensemble.count", "warning", f"odd count {ensemble.count}: pairwise collision stepping needs an even population")
        else:
            add("ensemble.count", "ok", f"{ensemble.count} agents")
        if np.any(np.abs(ensemble.values) > 1.0):
            worst = float(np.abs(ensemble.values).max())
            add("ensemble.bounds", "error", f"opinion outside [-1, 1]: max |w| = {worst}")
        elif ensemble.count >= 2:
            add("ensemble.bounds", "ok", "all opinions in [-1, 1]")

    return ValidationReport(entries=tuple(entries))
