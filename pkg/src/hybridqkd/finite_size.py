"""
Composable finite-size key length and the asymptotic key rates.

Parameter estimation is modelled analytically: the data moments
``|X|^2``, ``|Y|^2`` and ``<X, Y>`` are taken a few standard deviations
away from their expectations (against the users), turned into worst-case
covariance-matrix elements, and inverted to an estimated channel on which
every information term is then evaluated.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .attacks import (
    UnrepresentableChannel,
    closed_form_arrays,
    cloner_variance,
    eve_information,
    eve_terms,
    eve_terms_from_bundle,
)
from .optimize import ENDPOINT_MARGIN, maximize_over_mu
from .protocol import DetectorModelError, SystemModel, bob_variance, mutual_info_ab, mutual_info_ab_arrays


class AttackClass(str, enum.Enum):
    INDIVIDUAL = "individual"
    COHERENT = "coherent"
    HYBRID = "hybrid"


class EstimationFailure(ArithmeticError):
    """Worst-case parameter estimation produced no admissible channel."""


class BudgetError(ValueError):
    pass


@dataclass(frozen=True)
class FiniteSizeConfig:
    """Block and security settings shared by all attack classes.

    ``coherent_eps`` fixes the collective-attack security parameter used for
    coherent and hybrid attacks; ``None`` derives it from the de Finetti
    factor instead.  ``d_a``/``d_b`` default to ``2 V`` and ``k`` to ``n``.
    """

    n: float = 1e9
    d: int = 5
    beta: float = 0.98
    eps_tilde: float = 1e-6
    coherent_eps: float | None = 1e-42
    component_fraction: float = 0.1
    d_a: float | None = None
    d_b: float | None = None
    k: float | None = None
    pe_sigmas: float = 3.0
    ab_on_estimate: bool = True

    def __post_init__(self):
        if not self.n >= 1:
            raise ValueError(f"n must be >= 1, got {self.n!r}")
        if not self.d >= 1:
            raise ValueError(f"d must be >= 1, got {self.d!r}")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta!r}")
        if not 0.0 < self.eps_tilde < 1.0:
            raise ValueError(f"eps_tilde must lie in (0, 1), got {self.eps_tilde!r}")

    @property
    def N(self) -> float:
        return 2.0 * self.n

    def with_(self, **changes) -> "FiniteSizeConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class SecurityBudget:
    attack: AttackClass
    eps: float
    eps_sm: float
    eps_bar: float
    eps_pe: float
    eps_cor: float
    eps_tilde: float
    de_finetti_k: float | None = None
    reduction_ok: bool | None = None  # (K^4 / 50) eps <= eps_tilde

    @property
    def composed(self) -> float:
        return 2.0 * self.eps_sm + self.eps_bar + self.eps_pe + self.eps_cor


def delta_aep(N: float, d: float, eps_sm: float, eps: float) -> float:
    """Finite-size penalty (bits) from the asymptotic equipartition bound."""
    if not (0.0 < eps_sm < 1.0 and 0.0 < eps < 1.0):
        raise ValueError("eps_sm and eps must lie in (0, 1)")
    # work in logs: eps**2 underflows nothing at 1e-42 but eps**2 * eps_sm might
    log_term = 2.0 * (1.0 - 2.0 * math.log2(eps) - math.log2(eps_sm))
    root = math.sqrt(1.0 - 2.0 * math.log2(eps_sm))
    return math.sqrt(N) * ((d + 1) ** 2 + 4 * (d + 1) * root + log_term) + 4.0 * eps_sm * d / eps


def de_finetti_factor(n: float, d_a: float, d_b: float, k: float, eps: float) -> float:
    """``K`` of the Gaussian de Finetti reduction (security loss ``K^4 / 50``)."""
    L = math.log(8.0 / eps)
    denom = 1.0 - 2.0 * math.sqrt(L / (2.0 * k))
    if denom <= 0.0:
        return math.inf
    return max(1.0, n * (d_a + d_b) * (1.0 + 2.0 * math.sqrt(L / (2.0 * n)) + L / n) / denom)


def epsilon_budget(attack: AttackClass | str, config: FiniteSizeConfig, V: float | None = None) -> SecurityBudget:
    """Split the security parameter for one attack class.

    Individual attacks use ``eps = eps_tilde`` directly; coherent and hybrid
    attacks use the (much smaller) collective parameter, either fixed by
    ``config.coherent_eps`` or solved from ``eps_tilde = (K^4 / 50) eps``.
    The hash, estimation and correction failure probabilities are each
    ``component_fraction * eps``; smoothing takes what is left.
    """
    attack = AttackClass(attack)
    d_a = config.d_a if config.d_a is not None else (2.0 * V if V is not None else None)
    d_b = config.d_b if config.d_b is not None else (2.0 * V if V is not None else None)
    k = config.k if config.k is not None else config.n
    K = None
    ok = None
    if attack is AttackClass.INDIVIDUAL:
        eps = config.eps_tilde
    else:
        if config.coherent_eps is not None:
            eps = config.coherent_eps
        else:
            if d_a is None or d_b is None:
                raise BudgetError("energy-test thresholds need V (or explicit d_a, d_b)")
            eps = _solve_collective_eps(config.n, d_a, d_b, k, config.eps_tilde)
        if d_a is not None and d_b is not None:
            K = de_finetti_factor(config.n, d_a, d_b, k, eps)
            ok = bool(K**4 / 50.0 * eps <= config.eps_tilde)
    comp = config.component_fraction * eps
    eps_sm = (eps - 3.0 * comp) / 2.0
    if eps_sm <= 0.0:
        raise BudgetError(f"security budget infeasible: eps_sm = {eps_sm!r}")
    return SecurityBudget(attack, eps, eps_sm, comp, comp, comp, config.eps_tilde, K, ok)


def _solve_collective_eps(n, d_a, d_b, k, eps_tilde):
    # K depends weakly on eps through log terms; a few fixed-point steps suffice
    eps = eps_tilde
    for _ in range(50):
        K = de_finetti_factor(n, d_a, d_b, k, eps)
        new = 50.0 * eps_tilde / K**4
        if abs(math.log(new) - math.log(eps)) < 1e-12:
            break
        eps = new
    return eps * (1.0 - 1e-9)  # land on the safe side of the fixed point


@dataclass(frozen=True)
class PEMoments:
    """Expected data moments for 2n heterodyned modes (4n real samples per side)."""

    n: float
    var_a: float  # per real sample
    var_b: float
    cov_ab: float
    mean_x2: float
    mean_y2: float
    mean_xy: float
    sd_x2: float
    sd_y2: float
    sd_xy: float


def pe_moments(model: SystemModel, n: float) -> PEMoments:
    """Moments of Alice's and Bob's heterodyne strings implied by the dilated state.

    Each heterodyne outcome per quadrature has variance ``(v + 1) / 2`` and
    the Alice-Bob covariance is half the covariance-matrix correlation (the
    p quadrature is sign-conjugated so both quadratures correlate positively).
    """
    v = model.V
    var_a = (v + 1.0) / 2.0
    var_b = (bob_variance(model) + 1.0) / 2.0
    cov = 0.5 * math.sqrt(model.eta * model.T * (v * v - 1.0))
    m = 4.0 * n
    return PEMoments(
        n=n,
        var_a=var_a,
        var_b=var_b,
        cov_ab=cov,
        mean_x2=m * var_a,
        mean_y2=m * var_b,
        mean_xy=m * cov,
        sd_x2=math.sqrt(2.0 * m) * var_a,
        sd_y2=math.sqrt(2.0 * m) * var_b,
        sd_xy=math.sqrt(m * (var_a * var_b + cov * cov)),
    )


@dataclass(frozen=True)
class EstimatedChannel:
    V: float
    T: float
    xi: float
    sigma_a: float
    sigma_b: float
    sigma_c: float

    def model(self, template: SystemModel) -> SystemModel:
        return template.with_(V=self.V, T=self.T, xi=self.xi)


def covariance_bounds(x2: float, y2: float, xy: float, n: float, eps_pe: float):
    """Worst-case covariance-matrix elements from observed data norms."""
    f = 1.0 + 2.0 * math.sqrt(math.log(36.0 / eps_pe) / n)
    sigma_a = f * x2 / (2.0 * n) - 1.0
    sigma_b = f * y2 / (2.0 * n) - 1.0
    sigma_c = xy / (2.0 * n) - 5.0 * math.sqrt(math.log(8.0 / eps_pe) / n**3) * (x2 + y2)
    return sigma_a, sigma_b, sigma_c


def pe_worstcase_channel(model: SystemModel, n: float, eps_pe: float, sigmas: float = 3.0) -> EstimatedChannel:
    """Channel parameters inferred from adversely shifted expected moments.

    The detector (eta, v_el) is trusted and deconvolved before inferring
    transmissivity and excess noise.
    """
    mom = pe_moments(model, n)
    x2 = mom.mean_x2 + sigmas * mom.sd_x2
    y2 = mom.mean_y2 + sigmas * mom.sd_y2
    xy = mom.mean_xy - sigmas * mom.sd_xy
    s_a, s_b, s_c = covariance_bounds(x2, y2, xy, n, eps_pe)
    if s_c <= 0.0 or s_a <= 1.0:
        raise EstimationFailure(f"no correlation left after estimation (Sigma_c = {s_c:.6g})")
    eta, v_el = model.eta, model.v_el
    v_hat = s_a
    t_hat = s_c * s_c / (eta * (v_hat * v_hat - 1.0))
    if not 0.0 < t_hat < 1.0:
        raise EstimationFailure(f"estimated transmissivity {t_hat:.6g} outside (0, 1)")
    b_channel = (s_b - (1.0 - eta) - 2.0 * v_el) / eta
    xi_hat = max((b_channel - 1.0) / t_hat + 1.0 - v_hat, 0.0)
    return EstimatedChannel(v_hat, t_hat, xi_hat, s_a, s_b, s_c)


@dataclass(frozen=True)
class KeyRateReport:
    attack: AttackClass
    regime: str  # "asymptotic" | "finite"
    V: float
    mu_star: float
    I_ab: float
    eve_info: float
    rate: float
    feasible: bool
    delta: float | None = None
    ell: float | None = None
    N: float | None = None
    estimate: EstimatedChannel | None = None
    branch: str | None = None
    error: str | None = None
    details: dict = field(default_factory=dict)


def _hybrid_max(model: SystemModel, tol: float = 1e-6):
    return maximize_over_mu(lambda mu: eve_information(model, mu), tol=tol)


def _eve_for(model: SystemModel, attack: AttackClass):
    if attack is AttackClass.INDIVIDUAL:
        return 0.0, eve_information(model, 0.0)
    if attack is AttackClass.COHERENT:
        return 1.0, eve_information(model, 1.0)
    res = _hybrid_max(model)
    return res.x, res.value


def _terms_detail(model: SystemModel, mu: float) -> dict:
    terms = eve_terms(model, mu)
    return {
        "omega_E": cloner_variance(model.T, model.xi),
        "chi_collective": float(terms.chi_collective),
        "shannon_individual": float(terms.shannon_individual),
        "chi_cross": float(terms.chi_cross),
    }


def asymptotic_key_rate(model: SystemModel, attack: AttackClass | str, beta: float = 0.98) -> KeyRateReport:
    attack = AttackClass(attack)
    i_ab = mutual_info_ab(model)
    mu, eve = _eve_for(model, attack)
    rate = beta * i_ab - eve
    return KeyRateReport(
        attack, "asymptotic", model.V, mu, i_ab, eve, rate, rate > 0.0, details=_terms_detail(model, mu)
    )


def _infeasible(attack, model, config, exc) -> KeyRateReport:
    return KeyRateReport(
        attack, "finite", model.V, math.nan, math.nan, math.nan, math.nan, False, N=config.N, error=str(exc)
    )


def _ell(config, budget, i_ab, eve, delta):
    return config.N * (config.beta * i_ab - eve) - delta - 2.0 * math.log2(1.0 / (2.0 * budget.eps_bar))


def _single_class(model, attack, config) -> KeyRateReport:
    budget = epsilon_budget(attack, config, model.V)
    est = pe_worstcase_channel(model, config.n, budget.eps_pe, config.pe_sigmas)
    est_model = est.model(model)
    i_ab = mutual_info_ab(est_model if config.ab_on_estimate else model)
    mu = 0.0 if attack is AttackClass.INDIVIDUAL else 1.0
    eve = eve_information(est_model, mu)
    delta = delta_aep(config.N, config.d, budget.eps_sm, budget.eps)
    ell = _ell(config, budget, i_ab, eve, delta)
    return KeyRateReport(
        attack, "finite", model.V, mu, i_ab, eve, ell / config.N, ell > 0.0,
        delta=delta, ell=ell, N=config.N, estimate=est, branch=attack.value,
        details={**_terms_detail(est_model, mu), "eps": budget.eps, "eps_pe": budget.eps_pe},
    )


def key_length(model: SystemModel, attack: AttackClass | str, config: FiniteSizeConfig | None = None) -> KeyRateReport:
    """Finite-size key length for one attack class.

    Hybrid: Eve's information is maximised over ``mu`` on the channel
    estimated with the coherent budget.  ``mu* = 1`` gives the coherent key
    length, ``mu* = 0`` the smaller of the coherent and individual ones, and
    an interior ``mu*`` the hybrid bound with the coherent penalty.
    """
    attack = AttackClass(attack)
    config = config or FiniteSizeConfig()
    try:
        if attack is not AttackClass.HYBRID:
            return _single_class(model, attack, config)
        budget = epsilon_budget(AttackClass.HYBRID, config, model.V)
        est = pe_worstcase_channel(model, config.n, budget.eps_pe, config.pe_sigmas)
        est_model = est.model(model)
        best = _hybrid_max(est_model)
        coh = _single_class(model, AttackClass.COHERENT, config)
        if best.x >= 1.0 - ENDPOINT_MARGIN:
            chosen, branch = coh, "coherent"
        elif best.x <= ENDPOINT_MARGIN:
            ind = _single_class(model, AttackClass.INDIVIDUAL, config)
            chosen, branch = (coh, "coherent") if coh.ell <= ind.ell else (ind, "individual")
        else:
            i_ab = mutual_info_ab(est_model if config.ab_on_estimate else model)
            delta = coh.delta
            ell = _ell(config, budget, i_ab, best.value, delta)
            return KeyRateReport(
                attack, "finite", model.V, best.x, i_ab, best.value, ell / config.N, ell > 0.0,
                delta=delta, ell=ell, N=config.N, estimate=est, branch="hybrid",
                details={**_terms_detail(est_model, best.x), "eps": budget.eps, "eps_pe": budget.eps_pe},
            )
        return replace(chosen, attack=attack, mu_star=best.x, branch=branch)
    except (EstimationFailure, UnrepresentableChannel, DetectorModelError) as exc:
        return _infeasible(attack, model, config, exc)


def _eve_grid(template: SystemModel, V, T, xi, mu):
    mem = template.memory
    bundle = closed_form_arrays(
        V, T, xi, template.eta, template.v_el, mem.tau1, mem.tau2, mem.omega1, mem.omega2, mu
    )
    return eve_terms_from_bundle(bundle).total


def _estimates(template, Vs, config, attack):
    """Per-V estimated (V, T, xi) and the constant finite-size penalty per symbol."""
    est = np.full((len(Vs), 3), np.nan)
    penalty = np.full(len(Vs), np.nan)
    for k, v in enumerate(Vs):
        model = template.with_(V=float(v))
        try:
            budget = epsilon_budget(attack, config, float(v))
            e = pe_worstcase_channel(model, config.n, budget.eps_pe, config.pe_sigmas)
        except (EstimationFailure, BudgetError):
            continue
        est[k] = (e.V, e.T, e.xi)
        delta = delta_aep(config.N, config.d, budget.eps_sm, budget.eps)
        penalty[k] = (delta + 2.0 * math.log2(1.0 / (2.0 * budget.eps_bar))) / config.N
    return est, penalty


def hybrid_rate_scan(
    template: SystemModel,
    Vs,
    regime: str = "asymptotic",
    config: FiniteSizeConfig | None = None,
    beta: float = 0.98,
    mu_step: float = 1e-2,
):
    """Hybrid-attack rate on a grid of modulation variances, with mu maximised on a grid only.

    This is the fast inner objective for variance optimisation; the full
    golden refinement in mu is applied afterwards at the chosen V.  Returns
    ``(rates, mu_grid_argmax)``; infeasible points have rate ``-inf``.
    """
    Vs = np.atleast_1d(np.asarray(Vs, dtype=float))
    mu = np.linspace(0.0, 1.0, int(round(1.0 / mu_step)) + 1)
    t, xi, eta, v_el = template.T, template.xi, template.eta, template.v_el
    if regime == "asymptotic":
        eve = _eve_grid(template, Vs[:, None], t, xi, mu[None, :])
        best = np.argmax(eve, axis=1)
        rates = beta * mutual_info_ab_arrays(Vs, t, xi, eta, v_el) - eve.max(axis=1)
        return rates, mu[best]
    if regime != "finite":
        raise ValueError(f"unknown regime {regime!r}")
    config = config or FiniteSizeConfig(beta=beta)
    beta = config.beta
    rates = np.full(len(Vs), -np.inf)
    mu_star = np.full(len(Vs), np.nan)
    est, pen_c = _estimates(template, Vs, config, AttackClass.HYBRID)
    ok = np.isfinite(pen_c)
    if not np.any(ok):
        return rates, mu_star
    vh, th, xh = (est[ok, j] for j in range(3))
    eve = _eve_grid(template, vh[:, None], th[:, None], xh[:, None], mu[None, :])
    best = np.argmax(eve, axis=1)
    i_ab = mutual_info_ab_arrays(*((vh, th, xh) if config.ab_on_estimate else (Vs[ok], t, xi)), eta, v_el)
    r = beta * i_ab - eve.max(axis=1) - pen_c[ok]
    at_zero = best == 0
    if np.any(at_zero):
        coh = beta * i_ab - eve[:, -1] - pen_c[ok]
        idx = np.flatnonzero(ok)[at_zero]
        est_i, pen_i = _estimates(template, Vs[idx], config, AttackClass.INDIVIDUAL)
        ind = np.full(len(idx), -np.inf)
        good = np.isfinite(pen_i)
        if np.any(good):
            e_i = _eve_grid(template, est_i[good, 0], est_i[good, 1], est_i[good, 2], 0.0)
            src = (est_i[good, 0], est_i[good, 1], est_i[good, 2]) if config.ab_on_estimate else (Vs[idx][good], t, xi)
            ind[good] = beta * mutual_info_ab_arrays(*src, eta, v_el) - e_i - pen_i[good]
        r[at_zero] = np.minimum(coh[at_zero], ind)
    rates[ok] = r
    mu_star[ok] = mu[best]
    return rates, mu_star
