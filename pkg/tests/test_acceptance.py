"""Acceptance criteria, one check per criterion.

Run under pytest (lines appear in the live output) or directly with
``python tests/test_acceptance.py`` for a plain PASS/FAIL listing.
"""
import dataclasses
import sys
import time
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import collective_holevo_heterodyne, heterodyne_samples, individual_shannon  # noqa: E402

from hybridqkd.attacks import (  # noqa: E402
    collective_conditional,
    collective_conditional_direct,
    eve_information,
    hybrid_bundle_circuit,
    hybrid_bundle_closed_form,
    hybrid_circuit_state,
    min_symplectic_eigenvalue,
)
from hybridqkd.cli import main as cli_main  # noqa: E402
from hybridqkd.config import distance_to_transmissivity, parse_config, preset  # noqa: E402
from hybridqkd.finite_size import FiniteSizeConfig, asymptotic_key_rate, key_length, pe_moments  # noqa: E402
from hybridqkd.gaussian import (  # noqa: E402
    apply_beamsplitter,
    attach,
    condition_on_heterodyne,
    condition_on_heterodyne_split,
    symplectic_eigenvalues,
    thermal_cm,
    tmsv_cm,
    von_neumann_entropy,
)
from hybridqkd.optimize import find_tau_thresholds, optimize_modulation_variance  # noqa: E402
from hybridqkd.protocol import MemoryParams, SystemModel  # noqa: E402
from hybridqkd.sweep import evaluate_report  # noqa: E402

FIG2 = dict(V=5.0, T=0.1, xi=0.01, eta=0.6, v_el=0.015)
FIG2_CONFIG = FiniteSizeConfig(n=1e9, d=5, beta=0.98, eps_tilde=1e-6, coherent_eps=1e-42)
BOUNDARIES = ("individual-hybrid", "hybrid-coherent")


@lru_cache(maxsize=None)
def thresholds(T):
    """Thresholds for both regimes at the fig2-preset settings with channel transmissivity T, plus wall time."""
    start = time.perf_counter()
    template = SystemModel(**{**FIG2, "T": T})
    out = {reg: find_tau_thresholds(template, reg, BOUNDARIES, config=FIG2_CONFIG) for reg in ("asymptotic", "finite")}
    return out, time.perf_counter() - start


def _threshold_check(T, targets):
    found, elapsed = thresholds(T)
    parts, ok = [], True
    for (regime, boundary), (want, tol) in targets.items():
        got = found[regime][boundary].x
        good = abs(got - want) <= tol
        ok &= good
        parts.append(f"{regime} {boundary} {got:.4f} (want {want}±{tol})")
    return ok, elapsed, parts


def criterion_1():
    ok, elapsed, parts = _threshold_check(0.1, {
        ("asymptotic", "individual-hybrid"): (0.17, 0.02),
        ("asymptotic", "hybrid-coherent"): (0.72, 0.02),
        ("finite", "individual-hybrid"): (0.23, 0.04),
        ("finite", "hybrid-coherent"): (0.70, 0.04),
    })
    return ok and elapsed < 60, "; ".join(parts) + f"; {elapsed:.1f}s (limit 60s)"


def criterion_2():
    ok, elapsed, parts = _threshold_check(0.5, {
        ("asymptotic", "individual-hybrid"): (0.18, 0.02),
        ("asymptotic", "hybrid-coherent"): (0.75, 0.02),
        ("finite", "individual-hybrid"): (0.26, 0.04),
        ("finite", "hybrid-coherent"): (0.89, 0.04),
    })
    return ok, "; ".join(parts)


def criterion_3():
    cfg = parse_config(preset("fig2"))
    base = cfg.model()
    taus = np.round(np.linspace(0, 1, 11), 12)

    def at(tau):
        return base.with_(memory=MemoryParams.identical(float(tau)))

    coh_fin = [evaluate_report(at(t), "coherent", "finite", cfg).rate for t in taus]
    ind_fin = [evaluate_report(at(t), "individual", "finite", cfg).rate for t in taus]
    ok_fin = max(coh_fin) <= 0 and min(ind_fin) > 0

    found, _ = thresholds(0.1)
    t_low = found["asymptotic"]["individual-hybrid"].x
    t_high = found["asymptotic"]["hybrid-coherent"].x
    fine = np.round(np.linspace(0, 1, 101), 12)
    hyb = np.array([evaluate_report(at(t), "hybrid", "asymptotic", cfg).rate for t in fine])
    steps = np.diff(hyb)
    non_increasing = bool(np.all(steps <= 1e-8))
    continuous = bool(np.max(np.abs(steps)) <= 0.1 * (hyb[0] - hyb[-1]))
    ind = evaluate_report(at(0.0), "individual", "asymptotic", cfg).rate
    below = [abs(h - ind) for t, h in zip(fine, hyb) if t < t_low - 5e-3]
    configured = dataclasses.replace(cfg, coherent_memory="configured")
    above = [abs(h - evaluate_report(at(t), "coherent", "asymptotic", configured).rate)
             for t, h in zip(fine, hyb) if t > t_high + 5e-3]
    ok_coincide = max(below) <= 1e-6 and max(above) <= 1e-6
    ok = ok_fin and non_increasing and continuous and ok_coincide
    return ok, (
        f"finite coherent max {max(coh_fin):.4g} (<=0), finite individual min {min(ind_fin):.4g} (>0); "
        f"hybrid non-increasing={non_increasing}, continuous={continuous}; "
        f"|hyb-ind| below {max(below):.2e}, |hyb-coh| above {max(above):.2e} (<=1e-6)"
    )


def max_secure_distance(cfg, attack, regime, lo=1.0, hi=200.0, tol=0.5):
    """Largest distance in [lo, hi] km with positive rate; ``hi`` means the whole range is secure."""
    def rate(km):
        model = cfg.model(T=float(distance_to_transmissivity(km)))
        try:
            return evaluate_report(model, attack, regime, cfg).rate
        except ArithmeticError:
            return -np.inf

    if rate(hi) > 0:
        return hi
    if not rate(lo) > 0:
        return 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if rate(mid) > 0 else (lo, mid)
    return 0.5 * (lo + hi)


def criterion_4():
    cfg = parse_config(preset("fig3"))
    d = {(a, r): max_secure_distance(cfg, a, r) for a in ("individual", "coherent") for r in ("asymptotic", "finite")}
    strict = all(d["individual", r] > d["coherent", r] for r in ("asymptotic", "finite"))
    gap_fin = d["individual", "finite"] - d["coherent", "finite"]
    gap_asy = d["individual", "asymptotic"] - d["coherent", "asymptotic"]
    detail = ", ".join(f"{a}/{r} {v:.1f} km" for (a, r), v in d.items())
    return strict and gap_fin > gap_asy, f"{detail} (200 km = positive over the whole 0-200 km range); " \
        f"gaps finite {gap_fin:.1f} km vs asymptotic {gap_asy:.1f} km"


def random_model(rng, memory=True):
    mem = MemoryParams(*rng.uniform(0, 1, 2), *rng.uniform(1, 3, 2)) if memory else MemoryParams()
    return SystemModel(V=rng.uniform(1.01, 100), T=rng.uniform(0.005, 0.995), xi=rng.uniform(0, 0.2),
                       eta=rng.uniform(0.2, 0.99), v_el=rng.uniform(0, 0.2), memory=mem)


def criterion_5():
    rng = np.random.default_rng(20240501)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        m, mu = random_model(rng), float(rng.uniform(0, 1))
        diff = hybrid_bundle_closed_form(m, mu).joint() - hybrid_bundle_circuit(m, mu).joint()
        worst = max(worst, float(np.abs(diff).max()))
    elapsed = time.perf_counter() - start
    return worst <= 1e-9 and elapsed < 30, f"max entrywise diff {worst:.2e} (<=1e-9), {elapsed:.1f}s (limit 30s)"


def criterion_6():
    rng = np.random.default_rng(77)
    coll = ind = 0.0
    for _ in range(100):
        m = random_model(rng, memory=False)
        args = (m.V, m.T, m.xi, m.eta, m.v_el)
        coll = max(coll, abs(eve_information(m, 1.0) - collective_holevo_heterodyne(*args)))
        ind = max(ind, abs(eve_information(m, 0.0) - individual_shannon(*args)))
    return coll <= 1e-9 and ind <= 1e-9, f"collective {coll:.2e}, individual {ind:.2e} bits (<=1e-9)"


def criterion_7():
    rng = np.random.default_rng(4242)
    violations = {"physicality": 0, "beamsplitter": 0, "purity": 0, "heterodyne": 0}
    min_nu = np.inf
    for _ in range(300):
        m, mu = random_model(rng), float(rng.uniform(0, 1))
        b = hybrid_bundle_closed_form(m, mu)
        nu = min_symplectic_eigenvalue(b)
        min_nu = min(min_nu, nu)
        violations["physicality"] += nu < 1 - 1e-7
        if not np.allclose(collective_conditional(b), collective_conditional_direct(b), atol=1e-9 * m.V):
            violations["heterodyne"] += 1
    for tau in np.linspace(0, 1, 21):
        for V in (1.5, 5.0, 15.0, 60.0):
            for T in (0.1, 0.5):
                m = SystemModel(**{**FIG2, "V": V, "T": T}, memory=MemoryParams.identical(float(tau)))
                for mu in np.linspace(0, 1, 11):
                    nu = min_symplectic_eigenvalue(hybrid_bundle_closed_form(m, float(mu)))
                    min_nu = min(min_nu, nu)
                    violations["physicality"] += nu < 1 - 1e-7
    for _ in range(50):
        m, mu = random_model(rng), float(rng.uniform(0, 1))
        if abs(von_neumann_entropy(hybrid_circuit_state(m, mu))) > 1e-6:
            violations["purity"] += 1
        state = attach(tmsv_cm(rng.uniform(1, 50)), thermal_cm(rng.uniform(1, 5), "E"))
        after = apply_beamsplitter(state, "B", "E", rng.uniform(0, 1))
        if not np.allclose(symplectic_eigenvalues(state), symplectic_eigenvalues(after), rtol=1e-9):
            violations["beamsplitter"] += 1
        if not np.allclose(condition_on_heterodyne(after, "B").matrix,
                           condition_on_heterodyne_split(after, "B").matrix, atol=1e-9 * 50):
            violations["heterodyne"] += 1
    total = sum(violations.values())
    return total == 0, f"violations {violations}, min symplectic eigenvalue {min_nu:.12f}"


def criterion_8():
    model = SystemModel(**FIG2, memory=MemoryParams.identical(0.1))
    asym = optimize_modulation_variance(lambda v: asymptotic_key_rate(model.with_(V=v), "individual").rate).value
    rates = []
    for n in (1e7, 1e9, 1e11):
        cfg = FIG2_CONFIG.with_(n=n)
        rates.append(optimize_modulation_variance(lambda v: key_length(model.with_(V=v), "individual", cfg).rate).value)
    gaps = [asym - r for r in rates]
    increasing = rates[0] < rates[1] < rates[2] < asym
    shrink = [gaps[0] / gaps[1], gaps[1] / gaps[2]]
    ok = increasing and min(shrink) >= 2.5
    return ok, f"rates {', '.join(f'{r:.5f}' for r in rates)} -> asymptotic {asym:.5f}; " \
        f"gap shrink factors {shrink[0]:.2f}, {shrink[1]:.2f} (>=2.5)"


def criterion_9():
    m = SystemModel(**{**FIG2, "V": 5.38})
    x, y = heterodyne_samples(m.V, m.T, m.xi, m.eta, m.v_el, 200_000, np.random.default_rng(99))
    block = 100
    xb, yb = x.reshape(-1, 2 * block), y.reshape(-1, 2 * block)
    mom = pe_moments(m, block / 2)
    rel = {
        "|X|^2": (xb**2).sum(1).std(ddof=1) / mom.sd_x2 - 1,
        "|Y|^2": (yb**2).sum(1).std(ddof=1) / mom.sd_y2 - 1,
        "<X,Y>": (xb * yb).sum(1).std(ddof=1) / mom.sd_xy - 1,
    }
    ok = all(abs(v) <= 0.05 for v in rel.values())
    return ok, ", ".join(f"{k} {v:+.3%}" for k, v in rel.items()) + " (within 5%)"


def criterion_10():
    import contextlib
    import io

    err = io.StringIO()
    with contextlib.redirect_stderr(err), contextlib.redirect_stdout(io.StringIO()):
        code = cli_main(["preset", "fig2", "--reconciliation", "direct"])
    msg = err.getvalue().strip()
    return code == 2 and "out of scope" in msg, f"exit code {code}, message: {msg}"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


def _line(k, ok, detail):
    return f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"


@pytest.mark.parametrize("k", range(1, len(CRITERIA) + 1))
def test_acceptance(k, capsys):
    ok, detail = CRITERIA[k - 1]()
    with capsys.disabled():
        print("\n" + _line(k, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    results = []
    for k, check in enumerate(CRITERIA, 1):
        ok, detail = check()
        results.append(ok)
        print(_line(k, ok, detail), flush=True)
    sys.exit(0 if all(results) else 1)
