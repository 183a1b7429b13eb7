"""Scalar search routines: grid-guarded golden section and bisection on a classifier."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
ENDPOINT_MARGIN = 1e-4


class ObjectiveError(RuntimeError):
    """The objective failed at a particular point."""


@dataclass(frozen=True)
class OptimizationResult:
    x: float
    value: float
    iterations: int
    bracket: float
    feasible: bool = True
    note: str = ""


def golden_section_max(f: Callable[[float], float], a: float, b: float, tol: float):
    """Maximise ``f`` on ``[a, b]`` until the bracket is at most ``tol``.

    Returns ``(x, f(x), iterations, final_bracket_width)``.
    """
    a, b = min(a, b), max(a, b)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol:
        it += 1
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    x, fx = (c, fc) if fc >= fd else (d, fd)
    return x, fx, it, b - a


def _evaluate(objective, xs, vectorized, label):
    try:
        if vectorized:
            return np.asarray(objective(xs), dtype=float)
        return np.array([objective(float(x)) for x in xs], dtype=float)
    except Exception as exc:  # re-raised with the failing context
        raise ObjectiveError(f"objective failed on {label} grid [{xs[0]:.6g}, {xs[-1]:.6g}]: {exc}") from exc


def maximize_over_mu(objective, tol: float = 1e-6, step: float = 1e-2, vectorized: bool = True) -> OptimizationResult:
    """Maximise ``objective(mu)`` on [0, 1].

    A grid including both endpoints guards against multiple local maxima.  If
    an endpoint beats every interior sample it is returned exactly; otherwise
    the best grid cell is refined by golden section.
    """
    n = int(round(1.0 / step))
    grid = np.linspace(0.0, 1.0, n + 1)
    vals = _evaluate(objective, grid, vectorized, "mu")
    if not np.all(np.isfinite(vals)):
        bad = grid[~np.isfinite(vals)][0]
        raise ObjectiveError(f"objective not finite at mu={bad:.6g}")
    i = int(np.argmax(vals))
    if i in (0, n):
        return OptimizationResult(float(grid[i]), float(vals[i]), 0, step)

    def scalar(mu):
        try:
            return float(objective(np.asarray(mu)) if vectorized else objective(mu))
        except Exception as exc:
            raise ObjectiveError(f"objective failed at mu={mu:.9g}: {exc}") from exc

    x, fx, it, width = golden_section_max(scalar, grid[i - 1], grid[i + 1], tol)
    if fx < vals[i]:
        x, fx = float(grid[i]), float(vals[i])
    return OptimizationResult(float(x), float(fx), it, width)


def classify_mu(mu_star: float, margin: float = ENDPOINT_MARGIN) -> str:
    """Attack class implied by an optimal splitting ratio."""
    if mu_star <= margin:
        return "individual"
    if mu_star >= 1.0 - margin:
        return "coherent"
    return "hybrid"


def optimize_modulation_variance(
    objective: Callable[[float], float],
    bounds: tuple[float, float] = (1.001, 1e3),
    per_decade: int = 40,
    rtol: float = 1e-4,
) -> OptimizationResult:
    """Maximise ``objective(V)`` by a log-spaced scan followed by golden section in log V.

    Points where the objective raises or returns NaN count as infeasible; if
    nothing is feasible the result has ``feasible=False``.
    """
    lo, hi = bounds
    if not 1.0 < lo < hi:
        raise ValueError(f"need 1 < V_lo < V_hi, got {bounds}")
    n = max(3, int(math.ceil(per_decade * math.log10(hi / lo))) + 1)
    log_grid = np.linspace(math.log(lo), math.log(hi), n)

    def safe(logv):
        try:
            val = float(objective(math.exp(logv)))
        except (ArithmeticError, ValueError):
            return -math.inf
        return val if math.isfinite(val) else -math.inf

    vals = np.array([safe(lv) for lv in log_grid])
    if not np.any(np.isfinite(vals)):
        return OptimizationResult(math.nan, -math.inf, 0, hi - lo, feasible=False)
    i = int(np.argmax(vals))
    a, b = log_grid[max(i - 1, 0)], log_grid[min(i + 1, n - 1)]
    x, fx, it, width = golden_section_max(safe, a, b, rtol)
    if fx < vals[i]:
        x, fx = log_grid[i], vals[i]
    return OptimizationResult(math.exp(x), float(fx), it, math.exp(x) * width)


def bisect_threshold(indicator: Callable[[float], bool], lo: float = 0.0, hi: float = 1.0, tol: float = 5e-4):
    """Locate where a boolean indicator switches from False (at ``lo``) to True (at ``hi``).

    Returns ``None`` when both ends agree.
    """
    f_lo, f_hi = indicator(lo), indicator(hi)
    if f_lo == f_hi:
        return None
    it = 0
    while hi - lo > tol:
        it += 1
        mid = 0.5 * (lo + hi)
        if indicator(mid) == f_hi:
            hi = mid
        else:
            lo = mid
    return OptimizationResult(0.5 * (lo + hi), math.nan, it, hi - lo)


BOUNDARIES = ("individual-hybrid", "hybrid-coherent")


@dataclass(frozen=True)
class TauClassification:
    tau: float
    attack: str
    mu_star: float
    V_star: float
    rate: float


def _log_v_grid(bounds, per_decade):
    lo, hi = bounds
    n = max(3, int(math.ceil(per_decade * math.log10(hi / lo))) + 1)
    return np.exp(np.linspace(math.log(lo), math.log(hi), n))


def optimal_hybrid_point(template, regime="asymptotic", config=None, beta=0.98,
                         bounds=(1.001, 1e3), per_decade=40, rtol=1e-4, fixed_V=None):
    """Variance-optimised hybrid attack at ``template``'s memory settings.

    Returns a ``TauClassification`` with the optimal class at ``V*``
    (or at ``fixed_V`` when given, skipping the variance search).
    """
    from .attacks import eve_information
    from .finite_size import EstimationFailure, FiniteSizeConfig, epsilon_budget, hybrid_rate_scan, pe_worstcase_channel

    if regime == "finite":
        config = config or FiniteSizeConfig(beta=beta)
        beta = config.beta
    grid = _log_v_grid(bounds, per_decade) if fixed_V is None else np.array([float(fixed_V)])
    rates, _ = hybrid_rate_scan(template, grid, regime, config, beta)
    if not np.any(np.isfinite(rates)):
        return TauClassification(template.memory.tau1, "infeasible", math.nan, math.nan, -math.inf)
    i = int(np.argmax(rates))

    def objective(logv):
        r = hybrid_rate_scan(template, [math.exp(logv)], regime, config, beta)[0][0]
        return float(r)

    lg = np.log(grid)
    if fixed_V is None:
        x, fx, _, _ = golden_section_max(objective, lg[max(i - 1, 0)], lg[min(i + 1, len(lg) - 1)], rtol)
    else:
        x, fx = lg[0], rates[0]
    if fx < rates[i]:
        x, fx = lg[i], rates[i]
    v_star = math.exp(x)
    model = template.with_(V=v_star)
    if regime == "finite":
        budget = epsilon_budget("hybrid", config, v_star)
        try:
            model = pe_worstcase_channel(model, config.n, budget.eps_pe, config.pe_sigmas).model(model)
        except EstimationFailure:
            return TauClassification(template.memory.tau1, "infeasible", math.nan, v_star, -math.inf)
    res = maximize_over_mu(lambda mu: eve_information(model, mu))
    return TauClassification(template.memory.tau1, classify_mu(res.x), res.x, v_star, float(fx))


def classify_tau(template, tau, regime="asymptotic", config=None, omega=None, **kw) -> TauClassification:
    """Optimal attack class when both memories have transmissivity ``tau``."""
    from .protocol import MemoryParams

    w = template.memory.omega1 if omega is None else omega
    return optimal_hybrid_point(template.with_(memory=MemoryParams.identical(tau, w)), regime, config, **kw)


def _indicator(boundary):
    if boundary == "individual-hybrid":
        return lambda c: c.attack != "individual"
    if boundary == "hybrid-coherent":
        return lambda c: c.attack == "coherent"
    raise ValueError(f"boundary must be one of {BOUNDARIES}, got {boundary!r}")


def find_tau_thresholds(template, regime="asymptotic", boundaries=BOUNDARIES, tol=5e-4, config=None, **kw):
    """Memory transmissivities at which the optimal attack class changes.

    Classifications are cached so both boundaries share evaluations.
    Returns ``{boundary: OptimizationResult}``; a boundary without a sign
    change on [0, 1] gets ``feasible=False`` and a note.
    """
    @lru_cache(maxsize=None)
    def classify(tau):
        return classify_tau(template, tau, regime, config, **kw)

    out = {}
    for boundary in boundaries:
        ind = _indicator(boundary)
        res = bisect_threshold(lambda tau: ind(classify(round(tau, 12))), 0.0, 1.0, tol)
        if res is None:
            cls = classify(0.0).attack
            res = OptimizationResult(math.nan, math.nan, 0, 1.0, feasible=False,
                                     note=f"single class on [0,1] ({cls} at tau=0)")
        out[boundary] = res
    return out


def find_tau_threshold(template, regime="asymptotic", boundary="individual-hybrid", tol=5e-4, config=None, **kw):
    return find_tau_thresholds(template, regime, (boundary,), tol, config, **kw)[boundary]
