"""
Entangling-cloner hybrid attack.

Eve replaces the channel by a beamsplitter fed with half of a TMSV of
variance ``omega_E``.  Each of her two ancilla modes is split at
transmissivity ``mu``: one part goes through a thermal-loss memory channel
(modes E'1, E'2, measured collectively), the other is mixed on a balanced
splitter (modes E''1, E''2) whose q and p quadratures are homodyned at once.

Two independent constructions of the relevant covariance blocks are kept:
``hybrid_bundle_closed_form`` (explicit entries, vectorised over any
broadcastable parameters) and ``hybrid_bundle_circuit`` (builds the whole
circuit from beamsplitters and reads the blocks off).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussian import (
    CovarianceMatrix,
    apply_beamsplitter,
    attach,
    entropy_of,
    homodyne_projector,
    schur_condition,
    symplectic_spectrum,
    tmsv_cm,
    vacuum_cm,
)
from .protocol import SystemModel, detector_upsilon

EVE_COLLECTIVE = ("E'1", "E'2")
EVE_INDIVIDUAL = ("E''1", "E''2")
BOB = "B2"

_I2 = np.eye(2)
_X_IND = homodyne_projector(["q", "p"])
_X_ALL = homodyne_projector(["q", "p", "q", "p"])


class UnrepresentableChannel(ValueError):
    """A noisy channel with T = 1 cannot be realised by an entangling cloner."""


def cloner_variance(T, xi):
    """Variance of Eve's TMSV that reproduces a channel (T, xi)."""
    T = np.asarray(T, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if np.any((T >= 1.0) & (xi > 0.0)):
        raise UnrepresentableChannel("T = 1 with xi > 0 has no entangling-cloner dilation")
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(T < 1.0, 1.0 + T * xi / np.where(T < 1.0, 1.0 - T, 1.0), 1.0)
    return float(w) if w.ndim == 0 else w


@dataclass(frozen=True, eq=False)
class HybridBundle:
    """Covariance blocks needed for Eve's hybrid information at one (or many) ``mu``.

    Array fields may carry leading batch dimensions.  Mode order inside every
    block is (E'1, E'2), (E''1, E''2), B2.
    """

    mu: np.ndarray
    m_coll: np.ndarray  # (..., 4, 4)  E'1 E'2
    m_ind: np.ndarray  # (..., 4, 4)  E''1 E''2
    sigma_coll_ind: np.ndarray  # (..., 4, 4)
    sigma_coll_bob: np.ndarray  # (..., 4, 2)
    sigma_bob_ind: np.ndarray  # (..., 2, 4)
    v_bob: np.ndarray  # (...)

    def joint(self) -> np.ndarray:
        """Covariance matrix of (E'1, E'2, E''1, E''2, B2)."""
        vb = np.asarray(self.v_bob)[..., None, None] * _I2
        top = np.concatenate([self.m_coll, self.sigma_coll_ind, self.sigma_coll_bob], axis=-1)
        mid = np.concatenate(
            [np.swapaxes(self.sigma_coll_ind, -1, -2), self.m_ind, np.swapaxes(self.sigma_bob_ind, -1, -2)],
            axis=-1,
        )
        bot = np.concatenate([np.swapaxes(self.sigma_coll_bob, -1, -2), self.sigma_bob_ind, vb], axis=-1)
        return np.concatenate([top, mid, bot], axis=-2)

    def joint_cm(self) -> CovarianceMatrix:
        return CovarianceMatrix(self.joint(), EVE_COLLECTIVE + EVE_INDIVIDUAL + (BOB,))


def _model_arrays(model: SystemModel):
    mem = model.memory
    return (model.V, model.T, model.xi, model.eta, model.v_el, mem.tau1, mem.tau2, mem.omega1, mem.omega2)


def closed_form_arrays(V, T, xi, eta, v_el, tau1, tau2, omega1, omega2, mu) -> HybridBundle:
    """Closed-form bundle; every argument broadcasts against the others."""
    V, T, xi, eta, v_el, tau1, tau2, omega1, omega2, mu = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (V, T, xi, eta, v_el, tau1, tau2, omega1, omega2, mu))
    )
    if np.any((mu < 0.0) | (mu > 1.0)):
        raise ValueError("mu must lie in [0, 1]")
    w_e = np.asarray(cloner_variance(T, xi))
    v_e1 = T * w_e + (1.0 - T) * V
    v_e2 = w_e
    c_e12 = np.sqrt(T) * np.sqrt(np.maximum(w_e * w_e - 1.0, 0.0))

    chi_line = xi + 1.0 / T - 1.0
    chi_d = ((1.0 - eta) + 2.0 * v_el) / eta
    v_b2 = eta * T * (V + chi_line + chi_d / T)

    # collective arm after the memory channels
    v_c1 = mu * v_e1 + (1.0 - mu)
    v_c2 = mu * v_e2 + (1.0 - mu)
    c_c = mu * c_e12
    a11 = tau1 * v_c1 + (1.0 - tau1) * omega1
    a22 = tau2 * v_c2 + (1.0 - tau2) * omega2
    a12 = np.sqrt(tau1 * tau2) * c_c
    m_coll = _two_mode(a11, a22, a12, -a12)

    # individual arm before its balanced splitter
    v_i1 = (1.0 - mu) * v_e1 + mu
    v_i2 = (1.0 - mu) * v_e2 + mu
    c_i = (1.0 - mu) * c_e12
    v_minus = (v_i1 + v_i2) / 2.0 - c_i
    v_plus = (v_i1 + v_i2) / 2.0 + c_i
    c_pp = (v_i1 - v_i2) / 2.0
    m_ind = _stack4(
        [[v_minus, 0, c_pp, 0], [0, v_plus, 0, c_pp], [c_pp, 0, v_plus, 0], [0, c_pp, 0, v_minus]], mu
    )

    # collective-individual cross terms
    r1 = np.sqrt(tau1 * (1.0 - mu) * mu)
    r2 = np.sqrt(tau2 * (1.0 - mu) * mu)
    c_i1_c1 = r1 * (1.0 - v_e1)
    c_i2_c1 = -r1 * c_e12
    c_i1_c2 = -r2 * c_e12
    c_i2_c2 = r2 * (1.0 - v_e2)
    s2 = np.sqrt(2.0)
    q1q1 = (c_i1_c1 - c_i2_c1) / s2  # = p E'1 , p E''2
    p1p1 = (c_i1_c1 + c_i2_c1) / s2  # = q E'1 , q E''2
    q2q2 = (c_i1_c2 + c_i2_c2) / s2  # = -p E'2 , p E''1
    p2p2 = (-c_i1_c2 + c_i2_c2) / s2  # = -q E'2 , q E''1
    sigma_ci = _stack4(
        [[q1q1, 0, p1p1, 0], [0, p1p1, 0, q1q1], [-p2p2, 0, q2q2, 0], [0, -q2q2, 0, p2p2]], mu
    )

    # collective arm vs Bob
    g1 = np.sqrt(tau1 * mu * (1.0 - T) * T * eta) * (w_e - V)
    g2 = np.sqrt(tau2 * mu * (1.0 - T) * eta) * np.sqrt(np.maximum(w_e * w_e - 1.0, 0.0))
    zero = np.zeros_like(mu)
    sigma_cb = np.stack(
        [np.stack([g1, zero], -1), np.stack([zero, g1], -1), np.stack([g2, zero], -1), np.stack([zero, -g2], -1)],
        axis=-2,
    )

    # Bob vs individual arm
    h1 = np.sqrt((1.0 - mu) * (1.0 - T) * T * eta) * (V - w_e)
    h2 = -np.sqrt((1.0 - mu) * (1.0 - T) * eta) * np.sqrt(np.maximum(w_e * w_e - 1.0, 0.0))
    bq1 = (h1 - h2) / s2  # q B2, q E''1 = p B2, p E''2
    bp1 = (h1 + h2) / s2  # p B2, p E''1 = q B2, q E''2
    sigma_bi = np.stack(
        [np.stack([bq1, zero, bp1, zero], -1), np.stack([zero, bp1, zero, bq1], -1)], axis=-2
    )
    return HybridBundle(mu, m_coll, m_ind, sigma_ci, sigma_cb, sigma_bi, v_b2)


def _two_mode(a11, a22, c_q, c_p):
    z = np.zeros_like(a11)
    return _stack4([[a11, z, c_q, z], [z, a11, z, c_p], [c_q, z, a22, z], [z, c_p, z, a22]], a11)


def _stack4(rows, like):
    like = np.asarray(like, dtype=float)
    return np.stack(
        [np.stack([np.broadcast_to(np.asarray(e, dtype=float), like.shape) for e in row], -1) for row in rows],
        axis=-2,
    )


def hybrid_bundle_closed_form(model: SystemModel, mu) -> HybridBundle:
    return closed_form_arrays(*_model_arrays(model), mu)


def hybrid_circuit_state(model: SystemModel, mu: float) -> CovarianceMatrix:
    """Pure global state of the whole attack circuit.

    Thermal noise of the memories and of Bob's detector is purified by TMSV
    partners (D1/D1p, D2/D2p, F/G) so that the global state stays pure.
    """
    if not 0.0 <= mu <= 1.0:
        raise ValueError("mu must lie in [0, 1]")
    mem = model.memory
    w_e = cloner_variance(model.T, model.xi)
    state = attach(tmsv_cm(model.V, ("A", "B")), tmsv_cm(w_e, ("E0", "E2")))
    state = apply_beamsplitter(state, "B", "E0", model.T).relabel({"B": "B1", "E0": "E1"})

    # split both ancillas: collective arm keeps label, individual arm takes the vacuum port
    state = attach(state, vacuum_cm("Ei1"))
    state = attach(state, vacuum_cm("Ei2"))
    state = apply_beamsplitter(state, "E1", "Ei1", mu)
    state = apply_beamsplitter(state, "E2", "Ei2", mu)

    state = attach(state, tmsv_cm(mem.omega1, ("D1", "D1p")))
    state = attach(state, tmsv_cm(mem.omega2, ("D2", "D2p")))
    state = apply_beamsplitter(state, "E1", "D1", mem.tau1)
    state = apply_beamsplitter(state, "E2", "D2", mem.tau2)
    state = state.relabel({"E1": "E'1", "E2": "E'2"})

    state = apply_beamsplitter(state, "Ei2", "Ei1", 0.5).relabel({"Ei1": "E''1", "Ei2": "E''2"})

    upsilon = detector_upsilon(model.eta, model.v_el)
    if upsilon is None:
        return state.relabel({"B1": "B2"})
    state = attach(state, tmsv_cm(upsilon, ("F", "G")))
    state = apply_beamsplitter(state, "B1", "F", model.eta)
    return state.relabel({"B1": "B2"})


def hybrid_bundle_circuit(model: SystemModel, mu: float) -> HybridBundle:
    state = hybrid_circuit_state(model, mu)
    return HybridBundle(
        mu=np.asarray(float(mu)),
        m_coll=state.block(EVE_COLLECTIVE),
        m_ind=state.block(EVE_INDIVIDUAL),
        sigma_coll_ind=state.block(EVE_COLLECTIVE, EVE_INDIVIDUAL),
        sigma_coll_bob=state.block(EVE_COLLECTIVE, [BOB]),
        sigma_bob_ind=state.block([BOB], EVE_INDIVIDUAL),
        v_bob=np.asarray(state.block([BOB])[0, 0]),
    )


def collective_conditional(bundle: HybridBundle) -> np.ndarray:
    """E'1E'2 conditioned on q(E''1), p(E''2) and Bob's heterodyne via the B3/C split."""
    vb = np.asarray(bundle.v_bob)[..., None, None]
    s_b3 = bundle.sigma_bob_ind / np.sqrt(2.0)
    m_b3 = 0.5 * (vb + 1.0) * _I2
    c_cb3 = 0.5 * (1.0 - vb) * _I2
    s_b3_t = np.swapaxes(s_b3, -1, -2)
    m_meas = np.concatenate(
        [
            np.concatenate([bundle.m_ind, s_b3_t, -s_b3_t], axis=-1),
            np.concatenate([s_b3, m_b3, c_cb3], axis=-1),
            np.concatenate([-s_b3, c_cb3, m_b3], axis=-1),
        ],
        axis=-2,
    )
    s_cb3 = bundle.sigma_coll_bob / np.sqrt(2.0)
    sigma = np.concatenate([bundle.sigma_coll_ind, s_cb3, -s_cb3], axis=-1)
    return schur_condition(bundle.m_coll, sigma, m_meas, _X_ALL)


def collective_conditional_direct(bundle: HybridBundle) -> np.ndarray:
    """Same conditional state, homodyning E'' first and then heterodyning B2 directly."""
    joint = bundle.joint()
    keep = list(range(4))
    ind = list(range(4, 8))
    bob = [8, 9]
    # homodyne on E'' acting on (E', B2)
    rest = keep + bob
    after = schur_condition(
        joint[..., rest, :][..., :, rest],
        joint[..., rest, :][..., :, ind],
        joint[..., ind, :][..., :, ind],
        _X_IND,
    )
    return schur_condition(after[..., :4, :4], after[..., :4, 4:], after[..., 4:, 4:] + _I2)


def individual_conditional(bundle: HybridBundle) -> np.ndarray:
    return schur_condition(bundle.m_coll, bundle.sigma_coll_ind, bundle.m_ind, _X_IND)


def chi_collective_part(bundle: HybridBundle):
    """Holevo information between E'1E'2 and (B, E''1, E''2)."""
    return entropy_of(bundle.m_coll) - entropy_of(collective_conditional(bundle))


def chi_cross_part(bundle: HybridBundle):
    """Holevo information between E'1E'2 and the homodyned E''1E''2."""
    return entropy_of(bundle.m_coll) - entropy_of(individual_conditional(bundle))


def _bob_given_individual(bundle: HybridBundle):
    vb = np.asarray(bundle.v_bob)
    m, s = bundle.m_ind, bundle.sigma_bob_ind
    vq = vb - s[..., 0, 0] ** 2 / m[..., 0, 0]
    vp = vb - s[..., 1, 3] ** 2 / m[..., 3, 3]
    return vq, vp


def shannon_individual_part(bundle: HybridBundle, check_symmetry: bool = True):
    """Shannon information Eve's homodynes on E''1 (q) and E''2 (p) hold on Bob's heterodyne."""
    vb = np.asarray(bundle.v_bob)
    vq, vp = _bob_given_individual(bundle)
    if check_symmetry and not np.allclose(vq, vp, rtol=0.0, atol=1e-9 * np.max(np.abs(vb))):
        raise ArithmeticError("q/p conditional variances of Bob differ; bundle is not phase symmetric")
    v_het = (vb + 1.0) / 2.0
    out = 0.5 * np.log2(v_het / ((vq + 1.0) / 2.0)) + 0.5 * np.log2(v_het / ((vp + 1.0) / 2.0))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class EveTerms:
    mu: np.ndarray
    chi_collective: np.ndarray
    shannon_individual: np.ndarray
    chi_cross: np.ndarray

    @property
    def total(self):
        return self.chi_collective + self.shannon_individual - self.chi_cross


def eve_terms_from_bundle(bundle: HybridBundle) -> EveTerms:
    s_coll = entropy_of(bundle.m_coll)
    chi_c = s_coll - entropy_of(collective_conditional(bundle))
    chi_x = s_coll - entropy_of(individual_conditional(bundle))
    return EveTerms(bundle.mu, chi_c, shannon_individual_part(bundle), chi_x)


def eve_terms(model: SystemModel, mu) -> EveTerms:
    return eve_terms_from_bundle(hybrid_bundle_closed_form(model, mu))


def eve_information(model: SystemModel, mu):
    """Upper bound on Eve's information about Bob's data for splitting ``mu`` (scalar or array)."""
    total = eve_terms(model, mu).total
    return float(total) if np.ndim(total) == 0 else total


def individual_information(model: SystemModel) -> float:
    """Eve's information under the pure individual attack (mu = 0)."""
    return eve_information(model, 0.0)


def coherent_information(model: SystemModel) -> float:
    """Eve's Holevo information when every ancilla goes to memory (mu = 1)."""
    return eve_information(model, 1.0)


def min_symplectic_eigenvalue(bundle: HybridBundle) -> float:
    """Smallest symplectic eigenvalue over the joint and both conditional states."""
    vals = [
        symplectic_spectrum(bundle.joint()),
        symplectic_spectrum(collective_conditional(bundle)),
        symplectic_spectrum(individual_conditional(bundle)),
    ]
    return float(min(np.min(v) for v in vals))


__all__ = [
    "HybridBundle",
    "EveTerms",
    "UnrepresentableChannel",
    "cloner_variance",
    "closed_form_arrays",
    "hybrid_bundle_closed_form",
    "hybrid_bundle_circuit",
    "hybrid_circuit_state",
    "chi_collective_part",
    "chi_cross_part",
    "shannon_individual_part",
    "eve_terms",
    "eve_information",
    "individual_information",
    "coherent_information",
    "min_symplectic_eigenvalue",
    "collective_conditional",
    "collective_conditional_direct",
    "individual_conditional",
]
