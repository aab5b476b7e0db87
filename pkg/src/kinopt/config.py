"""Scenario configuration: YAML parsing with field-precise diagnostics.

A scenario file has five blocks (model, control, scaling, run, output); see
the shipped presets for worked examples.  Exactly one of control.nu (micro
mode) or control.kappa (kinetic/analytic modes) must be set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Any, Optional

import yaml

MODES = ("micro", "dsmc", "steady", "moments")
P_KINDS = ("constant", "sznajd", "bounded_confidence")
D_KINDS = ("none", "quadratic")
RULE_KINDS = ("base", "noise_coupled", "mean_control", "agent_weighted")


class ConfigError(ValueError):
    """Invalid scenario configuration; the message carries the field path."""


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


class _Block:
    """Mapping view that tracks consumed keys so leftovers can be reported."""

    def __init__(self, data: dict, path: str):
        if not isinstance(data, dict):
            _fail(path, f"expected a mapping, got {type(data).__name__}")
        self.data = data
        self.path = path
        self.seen = set()

    def take(self, key, default=None, required=False, kind=None, choices=None):
        self.seen.add(key)
        if key not in self.data:
            if required:
                _fail(f"{self.path}.{key}", "required key is missing")
            return default
        val = self.data[key]
        if kind is float:
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                if isinstance(val, str) and val.lower() in ("inf", ".inf", "infinity"):
                    val = math.inf
                else:
                    _fail(f"{self.path}.{key}", f"expected a number, got {val!r}")
            val = float(val)
        elif kind is int:
            if isinstance(val, bool) or not isinstance(val, int):
                _fail(f"{self.path}.{key}", f"expected an integer, got {val!r}")
        elif kind is bool:
            if not isinstance(val, bool):
                _fail(f"{self.path}.{key}", f"expected true/false, got {val!r}")
        elif kind is str:
            if not isinstance(val, str):
                _fail(f"{self.path}.{key}", f"expected a string, got {val!r}")
        if choices is not None and val not in choices:
            _fail(f"{self.path}.{key}", f"must be one of {list(choices)}, got {val!r}")
        return val

    def sub(self, key, default_empty=False) -> Optional["_Block"]:
        self.seen.add(key)
        if key not in self.data:
            return _Block({}, f"{self.path}.{key}") if default_empty else None
        return _Block(self.data[key], f"{self.path}.{key}")

    def finish(self):
        unknown = set(self.data) - self.seen
        if unknown:
            k = sorted(unknown)[0]
            _fail(f"{self.path}.{k}", "unknown key")


@dataclass(frozen=True, eq=True)
class ScenarioConfig:
    mode: str
    # model
    p_kind: str
    p_gamma: Optional[float]
    p_delta: Optional[float]
    d_kind: str
    q_kind: str
    rule: str
    # control
    w_d: float
    nu: Optional[float]
    kappa: Optional[float]
    clamp: Optional[tuple[float, float]]
    # scaling
    epsilon: Optional[float]
    varsigma: float
    # run
    agents: Optional[int]
    samples: Optional[int]
    t_final: float
    record_dt: Optional[float]
    dt: Optional[float]
    dt_mc: Optional[float]
    seed: int
    repetitions: int
    initial_low: float
    initial_high: float
    m0: Optional[float]
    E0: Optional[float]
    # output
    out_path: Optional[str]
    out_format: str
    bins: int
    figures: bool

    def to_dict(self) -> dict:
        """Canonical nested form; parse_config on its YAML dump round-trips."""
        model: dict[str, Any] = {"P": {"kind": self.p_kind}, "D": {"kind": self.d_kind},
                                 "Q": {"kind": self.q_kind}, "rule": self.rule}
        if self.p_gamma is not None:
            model["P"]["gamma"] = self.p_gamma
        if self.p_delta is not None:
            model["P"]["delta"] = self.p_delta
        control: dict[str, Any] = {"w_d": self.w_d}
        if self.nu is not None:
            control["nu"] = self.nu
        if self.kappa is not None:
            control["kappa"] = "inf" if math.isinf(self.kappa) else self.kappa
        if self.clamp is not None:
            control["clamp"] = list(self.clamp)
        scaling: dict[str, Any] = {"varsigma": self.varsigma}
        if self.epsilon is not None:
            scaling["epsilon"] = self.epsilon
        run: dict[str, Any] = {"mode": self.mode, "seed": self.seed,
                               "repetitions": self.repetitions, "t_final": self.t_final}
        if self.agents is not None:
            run["agents"] = self.agents
        if self.samples is not None:
            run["samples"] = self.samples
        if self.record_dt is not None:
            run["record_dt"] = self.record_dt
        if self.dt is not None:
            run["dt"] = self.dt
        if self.dt_mc is not None:
            run["dt_mc"] = self.dt_mc
        if self.mode == "moments":
            run["initial"] = {"m0": self.m0, "E0": self.E0}
        elif self.mode in ("micro", "dsmc"):
            run["initial"] = {"kind": "uniform", "low": self.initial_low,
                              "high": self.initial_high}
        output: dict[str, Any] = {"format": self.out_format, "bins": self.bins,
                                  "figures": self.figures}
        if self.out_path is not None:
            output["path"] = self.out_path
        return {"model": model, "control": control, "scaling": scaling,
                "run": run, "output": output}


def parse_config(text: str, name: str = "config") -> ScenarioConfig:
    """Parse and fully validate a scenario document (YAML or JSON)."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{name}: not valid YAML: {exc}") from exc
    if raw is None:
        raise ConfigError(f"{name}: empty document")
    root = _Block(raw, name)

    model = root.sub("model", default_empty=True)
    p = model.sub("P", default_empty=True)
    p_kind = p.take("kind", default="constant", kind=str, choices=P_KINDS)
    p_gamma = p.take("gamma", kind=float) if p_kind == "sznajd" else None
    p_delta = p.take("delta", kind=float) if p_kind == "bounded_confidence" else None
    p.finish()
    if p_kind == "sznajd" and p_gamma is None:
        _fail(f"{model.path}.P.gamma", "sznajd compromise needs gamma")
    if p_kind == "bounded_confidence":
        if p_delta is None:
            _fail(f"{model.path}.P.delta", "bounded confidence needs delta")
        if not 0.0 < p_delta <= 2.0:
            _fail(f"{model.path}.P.delta", f"delta must be in (0, 2], got {p_delta}")
    d = model.sub("D", default_empty=True)
    d_kind = d.take("kind", default="none", kind=str, choices=D_KINDS)
    d.finish()
    q = model.sub("Q", default_empty=True)
    q_kind = q.take("kind", default="uniform", kind=str, choices=("uniform",))
    q.finish()
    rule = model.take("rule", default="base", kind=str, choices=RULE_KINDS)
    model.finish()

    control = root.sub("control", default_empty=True)
    w_d = control.take("w_d", default=0.0, kind=float)
    nu = control.take("nu", kind=float)
    kappa = control.take("kappa", kind=float)
    clamp_raw = control.take("clamp")
    control.finish()
    if not -1.0 <= w_d <= 1.0:
        _fail("config.control.w_d", f"desired state must be in [-1, 1], got {w_d}")
    clamp = None
    if clamp_raw is not None:
        if (not isinstance(clamp_raw, (list, tuple)) or len(clamp_raw) != 2
                or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in clamp_raw)):
            _fail("config.control.clamp", f"expected a pair [u_L, u_R], got {clamp_raw!r}")
        lo, hi = float(clamp_raw[0]), float(clamp_raw[1])
        if not lo < hi:
            _fail("config.control.clamp", f"need u_L < u_R, got ({lo}, {hi})")
        clamp = (lo, hi)

    scaling = root.sub("scaling", default_empty=True)
    epsilon = scaling.take("epsilon", kind=float)
    varsigma = scaling.take("varsigma", default=0.0, kind=float)
    scaling.finish()
    if epsilon is not None and epsilon <= 0:
        _fail("config.scaling.epsilon", f"must be > 0, got {epsilon}")
    if varsigma < 0:
        _fail("config.scaling.varsigma", f"must be >= 0, got {varsigma}")

    run = root.sub("run")
    if run is None:
        _fail("config.run", "required block is missing")
    mode = run.take("mode", required=True, kind=str, choices=MODES)
    seed = run.take("seed", default=0, kind=int)
    repetitions = run.take("repetitions", default=1, kind=int)
    t_final = run.take("t_final", default=0.0, kind=float)
    record_dt = run.take("record_dt", kind=float)
    dt = run.take("dt", kind=float)
    dt_mc = run.take("dt_mc", kind=float)
    agents = run.take("agents", kind=int)
    samples = run.take("samples", kind=int)
    initial = run.sub("initial", default_empty=True)
    m0 = E0 = None
    initial_low, initial_high = -1.0, 1.0
    if mode == "moments":
        m0 = initial.take("m0", default=0.0, kind=float)
        E0 = initial.take("E0", default=1.0 / 3.0, kind=float)
    else:
        initial.take("kind", default="uniform", kind=str, choices=("uniform",))
        initial_low = initial.take("low", default=-1.0, kind=float)
        initial_high = initial.take("high", default=1.0, kind=float)
    initial.finish()
    run.finish()

    output = root.sub("output", default_empty=True)
    out_path = output.take("path", kind=str)
    out_format = output.take("format", default="csv", kind=str, choices=("csv", "json"))
    bins = output.take("bins", default=50, kind=int)
    figures = output.take("figures", default=True, kind=bool)
    output.finish()
    root.finish()

    # cross-field invariants
    if (nu is None) == (kappa is None):
        _fail("config.control", "exactly one of nu/kappa must be set")
    if mode == "micro":
        if nu is None:
            _fail("config.control.nu", "micro mode uses the unscaled penalization nu")
        if nu <= 0:
            _fail("config.control.nu", f"must be > 0, got {nu}")
        if agents is None or agents < 2:
            _fail("config.run.agents", "micro mode needs agents >= 2")
        if dt is None or dt <= 0:
            _fail("config.run.dt", "micro mode needs a positive time step dt")
    else:
        if kappa is None:
            _fail("config.control.kappa", f"{mode} mode uses the scaled penalization kappa")
        if kappa <= 0:
            _fail("config.control.kappa", f"must be > 0, got {kappa}")
    if mode == "dsmc":
        if samples is None or samples < 2 or samples % 2 != 0:
            _fail("config.run.samples", "dsmc mode needs an even samples count >= 2")
        if epsilon is None:
            _fail("config.scaling.epsilon", "dsmc mode needs the scaling parameter epsilon")
        if dt_mc is not None and not 0 < dt_mc <= epsilon:
            _fail("config.run.dt_mc", f"need 0 < dt_mc <= epsilon, got {dt_mc}")
    if mode in ("micro", "dsmc", "moments"):
        if t_final < 0:
            _fail("config.run.t_final", f"must be >= 0, got {t_final}")
        if record_dt is not None and record_dt <= 0:
            _fail("config.run.record_dt", f"must be > 0, got {record_dt}")
    if mode == "steady":
        if p_kind not in ("constant", "sznajd"):
            _fail("config.model.P.kind", "steady mode has analytic families only for constant/sznajd compromise")
        if varsigma <= 0:
            _fail("config.scaling.varsigma", "steady mode needs varsigma > 0")
        if not abs(w_d) < 1:
            _fail("config.control.w_d", "steady families need |w_d| < 1")
    if mode == "moments":
        if d_kind not in ("none", "quadratic"):
            _fail("config.model.D.kind", "moment closure exists only for none/quadratic diffusion")
        if not (m0 * m0 <= E0 + 1e-12 and E0 <= 1.0 + 1e-12):
            _fail("config.run.initial", f"need m0^2 <= E0 <= 1, got m0={m0}, E0={E0}")
    if mode in ("micro", "dsmc") and not (-1.0 <= initial_low < initial_high <= 1.0):
        _fail("config.run.initial", f"need -1 <= low < high <= 1, got [{initial_low}, {initial_high}]")
    if repetitions < 1:
        _fail("config.run.repetitions", f"must be >= 1, got {repetitions}")
    if bins < 2:
        _fail("config.output.bins", f"must be >= 2, got {bins}")
    if rule == "agent_weighted" and mode == "micro":
        pass  # micro dispatches on Q kind, rule applies to dsmc only

    return ScenarioConfig(
        mode=mode, p_kind=p_kind, p_gamma=p_gamma, p_delta=p_delta, d_kind=d_kind,
        q_kind=q_kind, rule=rule, w_d=w_d, nu=nu, kappa=kappa, clamp=clamp,
        epsilon=epsilon, varsigma=varsigma, agents=agents, samples=samples,
        t_final=t_final, record_dt=record_dt, dt=dt, dt_mc=dt_mc, seed=seed,
        repetitions=repetitions, initial_low=initial_low, initial_high=initial_high,
        m0=m0, E0=E0, out_path=out_path, out_format=out_format, bins=bins,
        figures=figures,
    )
