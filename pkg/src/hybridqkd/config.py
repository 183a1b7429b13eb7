"""Run configuration: parsing, validation and the embedded figure presets."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .finite_size import AttackClass, FiniteSizeConfig
from .protocol import MemoryParams, SystemModel

ATTACKS = tuple(a.value for a in AttackClass)
REGIMES = ("asymptotic", "finite")
SWEEP_VARIABLES = ("tau", "distance_km", "xi", "n")
DB_PER_KM = 0.2


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def distance_to_transmissivity(km):
    """Fibre transmissivity at 0.2 dB/km."""
    return 10.0 ** (-DB_PER_KM * np.asarray(km, dtype=float) / 10.0)


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    start: float
    stop: float
    step: float

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigError("sweep.variable", f"must be one of {SWEEP_VARIABLES}, got {self.variable!r}")
        if not self.step > 0:
            raise ConfigError("sweep.step", f"must be > 0, got {self.step!r}")
        if self.stop < self.start:
            raise ConfigError("sweep.stop", "range is empty (stop < start)")

    def values(self) -> np.ndarray:
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        # rounding keeps grid points like 0.07 exact in the output
        return np.round(self.start + self.step * np.arange(count), 12)


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to evaluate key rates at one point or along a sweep.

    ``V is None`` means the modulation variance is optimised per point.
    ``coherent_memory='perfect'`` evaluates the coherent attack with
    lossless memories regardless of the configured ones.
    """

    T: float | None
    distance_km: float | None
    xi: float
    eta: float
    v_el: float
    memory: MemoryParams
    V: float | None = None
    v_bounds: tuple = (1.001, 1e3)
    beta: float = 0.98
    finite: FiniteSizeConfig = field(default_factory=FiniteSizeConfig)
    attacks: tuple = ATTACKS
    regimes: tuple = REGIMES
    sweep: SweepSpec | None = None
    coherent_memory: str = "configured"
    reconciliation: str = "reverse"

    def model(self, **overrides) -> SystemModel:
        T = self.T if self.distance_km is None else float(distance_to_transmissivity(self.distance_km))
        params = dict(V=self.V if self.V is not None else 2.0, T=T, xi=self.xi, eta=self.eta,
                      v_el=self.v_el, memory=self.memory)
        params.update(overrides)
        return SystemModel(**params)


_BASE = {
    "model": {"T": 0.1, "xi": 0.01, "eta": 0.6, "v_el": 0.015, "V": "optimize", "memory": {"omega": 1.0}},
    "finite": {"n": 1e9, "d": 5, "eps_tilde": 1e-6, "coherent_eps": 1e-42},
    "beta": 0.98,
    "coherent_memory": "perfect",
}

PRESETS = {
    "fig2": {
        **_BASE,
        "attacks": list(ATTACKS),
        "regime": "both",
        "sweep": {"variable": "tau", "start": 0.0, "stop": 1.0, "step": 0.01},
    },
    "fig3": {
        **_BASE,
        "model": {k: v for k, v in _BASE["model"].items() if k != "T"},
        "attacks": ["individual", "coherent"],
        "regime": "both",
        "sweep": {"variable": "distance_km", "start": 0.0, "stop": 200.0, "step": 2.0},
    },
    "figA1": {
        **_BASE,
        "model": {**_BASE["model"], "T": 0.5},
        "attacks": list(ATTACKS),
        "regime": "both",
        "sweep": {"variable": "tau", "start": 0.0, "stop": 1.0, "step": 0.01},
    },
}


def preset(name: str) -> dict:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def load_config_text(text: str) -> dict:
    """Parse JSON or YAML text into a mapping."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f"line {mark.line + 1}" if mark is not None else "config"
            raise ConfigError(where, f"unparsable config: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a mapping")
    return data


def merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in update.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def apply_override(raw: dict, assignment: str) -> dict:
    """Apply ``dotted.key=value`` (value parsed as YAML) to a raw config."""
    if "=" not in assignment:
        raise ConfigError("--set", f"expected key=value, got {assignment!r}")
    key, text = assignment.split("=", 1)
    parts = key.strip().split(".")
    patch = yaml.safe_load(text) if text.strip() else None
    for part in reversed(parts):
        patch = {part: patch}
    return merge(raw, patch)


def _number(section: dict, key: str, prefix: str, required=False, default=None):
    if key not in section or section[key] is None:
        if required:
            raise ConfigError(f"{prefix}{key}", "missing required field")
        return default
    val = section[key]
    try:
        if isinstance(val, bool):
            raise TypeError
        return float(val)  # YAML 1.1 leaves "1e-42" as a string
    except (TypeError, ValueError):
        raise ConfigError(f"{prefix}{key}", f"expected a number, got {val!r}") from None


def _check_keys(section, allowed, prefix):
    if not isinstance(section, dict):
        raise ConfigError(prefix.rstrip(".") or "config", "expected a mapping")
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{prefix}{key}", "unknown field")


def _choices(raw, key, allowed, default, all_word):
    val = raw.get(key, default)
    if isinstance(val, str):
        val = list(allowed) if val in (all_word, "all", "both") else [val]
    if not isinstance(val, (list, tuple)) or not val:
        raise ConfigError(key, f"expected one or more of {allowed}")
    for v in val:
        if v not in allowed:
            raise ConfigError(key, f"{v!r} is not one of {allowed}")
    return tuple(v for v in allowed if v in val)


def parse_config(raw: dict) -> RunConfig:
    """Validate a raw mapping; errors name the offending field."""
    _check_keys(raw, {"model", "finite", "beta", "attacks", "regime", "sweep", "coherent_memory",
                      "reconciliation", "v_bounds"}, "")
    recon = raw.get("reconciliation", "reverse")
    if recon not in ("reverse", "direct"):
        raise ConfigError("reconciliation", f"must be 'reverse' or 'direct', got {recon!r}")

    model = raw.get("model")
    if model is None:
        raise ConfigError("model", "missing required section")
    _check_keys(model, {"T", "distance_km", "xi", "eta", "v_el", "V", "memory"}, "model.")
    sweep = None
    if raw.get("sweep") is not None:
        sw = raw["sweep"]
        _check_keys(sw, {"variable", "start", "stop", "step"}, "sweep.")
        if "variable" not in sw:
            raise ConfigError("sweep.variable", "missing required field")
        sweep = SweepSpec(str(sw["variable"]), *(_number(sw, k, "sweep.", required=True) for k in ("start", "stop", "step")))
    swept = sweep.variable if sweep else None

    T = _number(model, "T", "model.")
    km = _number(model, "distance_km", "model.")
    if T is not None and km is not None:
        raise ConfigError("model.distance_km", "give either T or distance_km, not both")
    if T is None and km is None and swept != "distance_km":
        raise ConfigError("model.T", "missing required field")
    xi = _number(model, "xi", "model.", required=swept != "xi", default=0.0)
    eta = _number(model, "eta", "model.", required=True)
    v_el = _number(model, "v_el", "model.", required=True)
    v = model.get("V", "optimize")
    V = None if v == "optimize" else _number(model, "V", "model.")

    mem = model.get("memory", {}) or {}
    _check_keys(mem, {"tau", "omega", "tau1", "tau2", "omega1", "omega2"}, "model.memory.")
    tau = _number(mem, "tau", "model.memory.", default=1.0)
    w = _number(mem, "omega", "model.memory.", default=1.0)
    try:
        memory = MemoryParams(
            _number(mem, "tau1", "model.memory.", default=tau),
            _number(mem, "tau2", "model.memory.", default=tau),
            _number(mem, "omega1", "model.memory.", default=w),
            _number(mem, "omega2", "model.memory.", default=w),
        )
    except ValueError as exc:
        raise ConfigError("model.memory", str(exc)) from None

    fin = raw.get("finite", {}) or {}
    _check_keys(fin, {"n", "d", "eps_tilde", "coherent_eps", "component_fraction", "d_a", "d_b", "k",
                      "pe_sigmas", "ab_on_estimate"}, "finite.")
    beta = _number(raw, "beta", "", default=0.98)
    kwargs = {}
    for key in ("n", "eps_tilde", "component_fraction", "d_a", "d_b", "k", "pe_sigmas"):
        val = _number(fin, key, "finite.")
        if val is not None:
            kwargs[key] = val
    if "d" in fin:
        kwargs["d"] = int(_number(fin, "d", "finite."))
    if "coherent_eps" in fin:
        ce = fin["coherent_eps"]
        kwargs["coherent_eps"] = None if ce in (None, "derive") else _number(fin, "coherent_eps", "finite.")
    if "ab_on_estimate" in fin:
        kwargs["ab_on_estimate"] = bool(fin["ab_on_estimate"])
    try:
        finite = FiniteSizeConfig(beta=beta, **kwargs)
    except ValueError as exc:
        raise ConfigError("finite", str(exc)) from None

    cm = raw.get("coherent_memory", "configured")
    if cm not in ("configured", "perfect"):
        raise ConfigError("coherent_memory", f"must be 'configured' or 'perfect', got {cm!r}")
    vb = raw.get("v_bounds", [1.001, 1e3])
    try:
        v_bounds = (float(vb[0]), float(vb[1]))
    except (TypeError, ValueError, IndexError):
        raise ConfigError("v_bounds", f"expected [low, high], got {vb!r}") from None
    if not 1.0 < v_bounds[0] < v_bounds[1]:
        raise ConfigError("v_bounds", "need 1 < low < high")

    cfg = RunConfig(
        T=T, distance_km=km, xi=xi, eta=eta, v_el=v_el, memory=memory, V=V, v_bounds=v_bounds, beta=beta,
        finite=finite, attacks=_choices(raw, "attacks", ATTACKS, "all", "all"),
        regimes=_choices(raw, "regime", REGIMES, "both", "both"), sweep=sweep, coherent_memory=cm,
        reconciliation=recon,
    )
    # validate the fixed fields, standing in for whichever one is swept
    stand_in = {"distance_km": {"T": 0.5}, "xi": {"xi": 0.0}}.get(swept, {})
    try:
        cfg.model(**stand_in)
    except ValueError as exc:
        raise ConfigError("model", str(exc)) from None
    return cfg
