"""Evaluation of configured points and sweeps, with deterministic parallel execution."""
from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .config import RunConfig, distance_to_transmissivity
from .finite_size import AttackClass, KeyRateReport, asymptotic_key_rate, key_length
from .optimize import ObjectiveError, optimal_hybrid_point, optimize_modulation_variance
from .protocol import MemoryParams, SystemModel

COLUMNS = ("swept", "value", "attack", "regime", "mu_star", "V_star", "I_ab", "eve_info",
           "delta", "ell", "rate", "feasible", "error")


@dataclass(frozen=True)
class Row:
    swept: str
    value: float | None
    attack: str
    regime: str
    mu_star: float
    V_star: float
    I_ab: float
    eve_info: float
    delta: float | None
    ell: float | None
    rate: float
    feasible: bool
    error: str = ""

    def as_tuple(self):
        return tuple(getattr(self, c) for c in COLUMNS)


def _report(model: SystemModel, attack: AttackClass, regime: str, cfg: RunConfig) -> KeyRateReport:
    if regime == "asymptotic":
        return asymptotic_key_rate(model, attack, cfg.beta)
    return key_length(model, attack, cfg.finite)


def evaluate_report(model: SystemModel, attack, regime: str, cfg: RunConfig) -> KeyRateReport:
    """Key-rate report at ``model``, optimising V unless the config fixes it."""
    attack = AttackClass(attack)
    if attack is AttackClass.COHERENT and cfg.coherent_memory == "perfect":
        model = model.with_(memory=MemoryParams())
    if cfg.V is not None:
        return _report(model.with_(V=cfg.V), attack, regime, cfg)
    if attack is AttackClass.HYBRID:
        best = optimal_hybrid_point(model, regime, cfg.finite, cfg.beta, cfg.v_bounds)
        v_star = best.V_star
    else:
        res = optimize_modulation_variance(
            lambda v: _report(model.with_(V=v), attack, regime, cfg).rate, cfg.v_bounds
        )
        v_star = res.x
    if not math.isfinite(v_star):
        raise ArithmeticError("no feasible modulation variance in range")
    return _report(model.with_(V=v_star), attack, regime, cfg)


def point_model(cfg: RunConfig, variable: str | None, value: float | None) -> SystemModel:
    if variable is None:
        return cfg.model()
    if variable == "tau":
        w = cfg.memory
        return cfg.model(memory=MemoryParams(value, value, w.omega1, w.omega2))
    if variable == "distance_km":
        return cfg.model(T=float(distance_to_transmissivity(value)))
    if variable == "xi":
        return cfg.model(xi=value)
    return cfg.model()


def _point_config(cfg: RunConfig, variable, value) -> RunConfig:
    if variable == "n":
        return dataclasses.replace(cfg, finite=cfg.finite.with_(n=value))
    return cfg


def evaluate_row(task) -> Row:
    cfg, variable, value, attack, regime = task
    nan = math.nan
    try:
        cfg = _point_config(cfg, variable, value)
        rep = evaluate_report(point_model(cfg, variable, value), attack, regime, cfg)
    except (ArithmeticError, ValueError, ObjectiveError) as exc:
        return Row(variable or "", value, attack, regime, nan, nan, nan, nan, None, None, nan, False,
                   f"{type(exc).__name__}: {exc}")
    return Row(variable or "", value, attack, regime, rep.mu_star, rep.V, rep.I_ab, rep.eve_info,
               rep.delta, rep.ell, rep.rate, bool(rep.feasible), rep.error or "")


def sweep_tasks(cfg: RunConfig):
    values = cfg.sweep.values() if cfg.sweep else [None]
    variable = cfg.sweep.variable if cfg.sweep else None
    return [
        (cfg, variable, None if v is None else float(v), attack, regime)
        for v in values
        for regime in cfg.regimes
        for attack in cfg.attacks
    ]


def run_sweep(cfg: RunConfig, workers: int = 1) -> list[Row]:
    """One row per grid point, regime and attack class, in that nesting order."""
    tasks = sweep_tasks(cfg)
    if workers <= 1 or len(tasks) == 1:
        return [evaluate_row(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(evaluate_row, tasks, chunksize=1))


def evaluate_point(cfg: RunConfig) -> list[dict]:
    """Verbose reports (intermediate quantities included) for every configured attack and regime."""
    model = point_model(cfg, None, None)
    out = []
    for regime in cfg.regimes:
        for attack in cfg.attacks:
            entry = {"attack": attack, "regime": regime}
            try:
                rep = evaluate_report(model, attack, regime, cfg)
            except (ArithmeticError, ValueError, ObjectiveError) as exc:
                entry["error"] = f"{type(exc).__name__}: {exc}"
                out.append(entry)
                continue
            entry.update({
                "mu_star": rep.mu_star, "V_star": rep.V, "I_ab": rep.I_ab, "eve_info": rep.eve_info,
                "delta": rep.delta, "ell": rep.ell, "rate": rep.rate, "feasible": bool(rep.feasible),
                "branch": rep.branch, "error": rep.error, **rep.details,
            })
            if rep.estimate is not None:
                entry["estimate"] = dataclasses.asdict(rep.estimate)
            out.append(entry)
    return out
