"""Scenario execution: deterministic seeding, dispatch to the solvers, and
emission of byte-stable artifacts (trace.csv, hist_final.csv, analytic.csv,
meta.json, figures)."""

from __future__ import annotations

import hashlib
import json
import math
import platform
import time
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import scipy
import yaml

from . import __version__, report
from .analytics import histogram
from .config import ConfigError, ScenarioConfig, parse_config
from .fokker_planck import moment_ode_solve, steady_density
from .kinetic import BinaryRule, run_dsmc
from .micro import MicroState, run_micro
from .model import (
    CompromiseFunction,
    ControlParams,
    DiffusionFunction,
    MomentTrace,
    OpinionEnsemble,
    ScalingParams,
)

TRACE_HEADER = "t,m,E,dist_wd,u_or_rejrate"


def derive_seed(root_seed: int, label: str) -> int:
    """Deterministic substream seed: low 8 bytes of sha256('<seed>:<label>')."""
    digest = hashlib.sha256(f"{root_seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def substream(root_seed: int, label: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root_seed, label))


def _fmt(x: float) -> str:
    # fixed 17-significant-digit decimals: byte-stable across platforms
    return format(float(x), ".17g")


def build_compromise(cfg: ScenarioConfig) -> CompromiseFunction:
    if cfg.p_kind == "constant":
        return CompromiseFunction.constant()
    if cfg.p_kind == "sznajd":
        return CompromiseFunction.sznajd(cfg.p_gamma)
    return CompromiseFunction.bounded_confidence(cfg.p_delta)


def build_diffusion(cfg: ScenarioConfig) -> DiffusionFunction:
    return DiffusionFunction.quadratic() if cfg.d_kind == "quadratic" else DiffusionFunction.none()


def steady_family(cfg: ScenarioConfig) -> Optional[str]:
    """Analytic stationary family matching the configured model, if any."""
    if cfg.kappa is None or cfg.varsigma <= 0 or not abs(cfg.w_d) < 1:
        return None
    if cfg.d_kind != "quadratic":
        return None
    if cfg.p_kind == "constant":
        return "constant"
    if cfg.p_kind == "sznajd" and cfg.p_gamma == 1.0:
        return "sznajd"
    return None


# ---------------------------------------------------------------------------
# artifact writers


def _write_table(out_dir: Path, stem: str, fmt: str, header: list[str], columns) -> Path:
    rows = zip(*columns)
    if fmt == "csv":
        path = out_dir / f"{stem}.csv"
        lines = [",".join(header)]
        lines += [",".join(_fmt(x) for x in row) for row in rows]
        path.write_text("\n".join(lines) + "\n")
    else:
        path = out_dir / f"{stem}.json"
        payload = {name: [float(x) for x in col] for name, col in zip(header, columns)}
        path.write_text(json.dumps(payload, indent=1) + "\n")
    return path


def write_trace(out_dir: Path, trace: MomentTrace, fmt: str) -> Path:
    header = TRACE_HEADER.split(",")
    columns = [trace.times, trace.m, trace.E, trace.dist, trace.aux]
    if trace.m_stderr is not None:
        header.append("m_stderr")
        columns.append(trace.m_stderr)
    return _write_table(out_dir, "trace", fmt, header, columns)


def write_hist(out_dir: Path, hist, fmt: str) -> Path:
    return _write_table(
        out_dir, "hist_final", fmt,
        ["bin_left", "bin_right", "density"],
        [hist.bin_edges[:-1], hist.bin_edges[1:], hist.density],
    )


def write_analytic(out_dir: Path, density, fmt: str) -> Path:
    w = np.linspace(-1.0, 1.0, 401)
    return _write_table(out_dir, "analytic", fmt, ["w", "f_steady"], [w, density(w)])


# ---------------------------------------------------------------------------
# mode runners


def _average_traces(traces: list[MomentTrace], w_d: float) -> MomentTrace:
    times = traces[0].times
    m_all = np.stack([t.m for t in traces])
    e_all = np.stack([t.E for t in traces])
    aux_all = np.stack([t.aux for t in traces])
    m = m_all.mean(axis=0)
    stderr = m_all.std(axis=0, ddof=1) / math.sqrt(len(traces))
    return MomentTrace(
        times=times, m=m, E=e_all.mean(axis=0), dist=np.abs(m - w_d),
        aux=aux_all.mean(axis=0), aux_label=traces[0].aux_label, m_stderr=stderr,
    )


def _run_dsmc_mode(cfg: ScenarioConfig):
    P = build_compromise(cfg)
    D = build_diffusion(cfg)
    scaling = ScalingParams(epsilon=cfg.epsilon, kappa=cfg.kappa, varsigma=cfg.varsigma)
    rule = BinaryRule.from_scaling(cfg.rule, P, D, scaling, cfg.w_d)
    record_dt = cfg.record_dt
    if record_dt is None:
        dt_eff = cfg.dt_mc or cfg.epsilon
        record_dt = dt_eff * max(1, int(round(cfg.t_final / dt_eff)) // 200 or 1)
    traces, finals = [], []
    for rep in range(cfg.repetitions):
        rng = substream(cfg.seed, f"rep{rep}")
        initial = OpinionEnsemble.uniform(cfg.samples, rng, cfg.initial_low, cfg.initial_high)
        trace, final = run_dsmc(
            initial, rule, scaling, cfg.t_final, record_dt, rng, dt_mc=cfg.dt_mc
        )
        traces.append(trace)
        finals.append(final.values)
    trace = traces[0] if cfg.repetitions == 1 else _average_traces(traces, cfg.w_d)
    pooled = OpinionEnsemble(np.concatenate(finals))
    return trace, pooled


def _run_micro_mode(cfg: ScenarioConfig):
    P = build_compromise(cfg)
    ctrl = ControlParams(w_d=cfg.w_d, nu=cfg.nu, clamp=cfg.clamp)
    traces, finals = [], []
    for rep in range(cfg.repetitions):
        rng = substream(cfg.seed, f"rep{rep}")
        ens = OpinionEnsemble.uniform(cfg.agents, rng, cfg.initial_low, cfg.initial_high)
        state = MicroState(ensemble=ens, time=0.0, dt=cfg.dt)
        trace, final = run_micro(state, P, ctrl, cfg.t_final, record_dt=cfg.record_dt)
        traces.append(trace)
        finals.append(final.ensemble.values)
    trace = traces[0] if cfg.repetitions == 1 else _average_traces(traces, cfg.w_d)
    pooled = OpinionEnsemble(np.concatenate(finals))
    return trace, pooled


def run_scenario(
    cfg: ScenarioConfig,
    out_dir,
    workers: int = 1,
    figures: Optional[bool] = None,
) -> dict:
    """Execute one scenario and write its artifacts; returns artifact paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t_start = time.perf_counter()
    figures = cfg.figures if figures is None else figures
    artifacts: dict[str, str] = {}

    trace = hist = density = None
    if cfg.mode in ("dsmc", "micro"):
        trace, pooled = (_run_dsmc_mode if cfg.mode == "dsmc" else _run_micro_mode)(cfg)
        hist = histogram(pooled, cfg.bins)
        family = steady_family(cfg) if cfg.mode == "dsmc" else None
        if family is not None:
            density = steady_density(family, cfg.w_d, cfg.varsigma, cfg.kappa)
    elif cfg.mode == "moments":
        trace = moment_ode_solve(
            cfg.m0, cfg.E0, cfg.t_final, cfg.kappa, cfg.varsigma,
            build_diffusion(cfg), w_d=cfg.w_d, record_dt=cfg.record_dt,
        )
    else:  # steady
        family = "constant" if cfg.p_kind == "constant" else "sznajd"
        density = steady_density(family, cfg.w_d, cfg.varsigma, cfg.kappa)

    if trace is not None:
        artifacts["trace"] = str(write_trace(out_dir, trace, cfg.out_format))
        if figures:
            report.render_trace(trace, cfg.w_d, out_dir / "trace.png")
            artifacts["trace_figure"] = str(out_dir / "trace.png")
    if hist is not None:
        artifacts["hist_final"] = str(write_hist(out_dir, hist, cfg.out_format))
        if figures:
            report.render_hist(hist, density, out_dir / "hist_final.png")
            artifacts["hist_figure"] = str(out_dir / "hist_final.png")
    if density is not None:
        artifacts["analytic"] = str(write_analytic(out_dir, density, cfg.out_format))
        if figures and hist is None:
            report.render_analytic(density, out_dir / "analytic.png")
            artifacts["analytic_figure"] = str(out_dir / "analytic.png")

    meta = {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "workers": workers,
        "versions": {
            "kinopt": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "wall_time_s": time.perf_counter() - t_start,
        "artifacts": sorted(artifacts),
    }
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=1) + "\n")
    artifacts["meta"] = str(out_dir / "meta.json")
    return artifacts


# ---------------------------------------------------------------------------
# presets

PRESETS = {
    "fig1": ["fig1_zeta5_uncontrolled", "fig1_zeta5_controlled",
             "fig1_zeta2_uncontrolled", "fig1_zeta2_controlled"],
    "fig2": [f"fig2_k{k}_wd{w}" for k in ("0.1", "0.01")
             for w in ("-0.75", "-0.5", "0", "0.25")],
    "fig3": ["fig3_zeta0.9_uncontrolled", "fig3_zeta0.9_controlled",
             "fig3_zeta0.5_uncontrolled", "fig3_zeta0.5_controlled"],
    "fig4": ["fig4_k1", "fig4_k0.1"],
    "fig5": ["fig5_micro_weak", "fig5_micro_strong",
             "fig5_dsmc_weak", "fig5_dsmc_strong"],
    "table1": [f"table1_k{k}_wd{w}" for k in ("10", "5", "1", "0.5")
               for w in ("0.25", "0.5", "0.75", "0.95")],
}

TABLE1_KAPPAS = (10.0, 5.0, 1.0, 0.5)
TABLE1_TARGETS = (0.25, 0.5, 0.75, 0.95)


def preset_text(member: str) -> str:
    ref = resources.files("kinopt.presets").joinpath(f"{member}.yaml")
    return ref.read_text()


def load_preset_config(member: str) -> ScenarioConfig:
    return parse_config(preset_text(member), name=member)


def run_preset(
    name: str,
    out_root,
    seed: Optional[int] = None,
    workers: int = 1,
    figures: Optional[bool] = None,
) -> dict:
    """Run every member scenario of a preset; table1 also aggregates the
    final-time mean errors into table1.csv."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    out_root = Path(out_root)
    results = {}
    for member in PRESETS[name]:
        cfg = load_preset_config(member)
        if seed is not None:
            cfg = replace_seed(cfg, seed)
        results[member] = run_scenario(cfg, out_root / member, workers=workers, figures=figures)
    if name == "table1":
        results["table1"] = str(_aggregate_table1(out_root))
    return results


def replace_seed(cfg: ScenarioConfig, seed: int) -> ScenarioConfig:
    from dataclasses import replace

    return replace(cfg, seed=seed)


def _aggregate_table1(out_root: Path) -> Path:
    rows = ["kappa," + ",".join(f"wd={w}" for w in TABLE1_TARGETS)]
    for k, kname in zip(TABLE1_KAPPAS, ("10", "5", "1", "0.5")):
        errors = []
        for w, wname in zip(TABLE1_TARGETS, ("0.25", "0.5", "0.75", "0.95")):
            trace_path = out_root / f"table1_k{kname}_wd{wname}" / "trace.csv"
            last = trace_path.read_text().strip().splitlines()[-1].split(",")
            errors.append(float(last[3]))  # dist_wd at final time
        rows.append(_fmt(k) + "," + ",".join(_fmt(e) for e in errors))
    path = out_root / "table1.csv"
    path.write_text("\n".join(rows) + "\n")
    return path
