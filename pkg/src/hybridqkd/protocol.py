"""No-switching protocol model: source, Gaussian channel and trusted noisy heterodyne detector."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .gaussian import (
    CovarianceMatrix,
    apply_beamsplitter,
    attach,
    condition_on_heterodyne,
    tmsv_cm,
)


class DetectorModelError(ValueError):
    """Detector purification is undefined (eta == 1 with electronic noise)."""


@dataclass(frozen=True)
class MemoryParams:
    """Eve's two memory channels: transmissivities ``tau*`` and thermal variances ``omega*``."""

    tau1: float = 1.0
    tau2: float = 1.0
    omega1: float = 1.0
    omega2: float = 1.0

    def __post_init__(self):
        for name in ("tau1", "tau2"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {val!r}")
        for name in ("omega1", "omega2"):
            val = getattr(self, name)
            if not val >= 1.0:
                raise ValueError(f"{name} must be >= 1, got {val!r}")

    @classmethod
    def identical(cls, tau: float, omega: float = 1.0) -> "MemoryParams":
        return cls(tau, tau, omega, omega)


@dataclass(frozen=True)
class SystemModel:
    """Physical parameters, all variances in shot-noise units.

    ``V`` is the source quadrature variance (modulation variance + 1) and
    ``xi`` is excess noise referred to the channel input.
    """

    V: float
    T: float
    xi: float = 0.0
    eta: float = 1.0
    v_el: float = 0.0
    memory: MemoryParams = field(default_factory=MemoryParams)

    def __post_init__(self):
        if not self.V >= 1.0:
            raise ValueError(f"V must be >= 1, got {self.V!r}")
        if not 0.0 < self.T <= 1.0:
            raise ValueError(f"T must lie in (0, 1], got {self.T!r}")
        if not self.xi >= 0.0:
            raise ValueError(f"xi must be >= 0, got {self.xi!r}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta!r}")
        if not self.v_el >= 0.0:
            raise ValueError(f"v_el must be >= 0, got {self.v_el!r}")

    def with_(self, **changes) -> "SystemModel":
        return replace(self, **changes)


class Noises(NamedTuple):
    chi_line: float
    chi_het: float
    chi_tot: float
    chi_d: float
    chi_t: float
    upsilon: float | None  # None when the detector needs no dilation


def detector_upsilon(eta: float, v_el: float) -> float | None:
    """Variance of the TMSV that purifies the electronic noise (None if eta == 1)."""
    if eta < 1.0:
        return 1.0 + 2.0 * v_el / (1.0 - eta)
    if v_el > 0.0:
        raise DetectorModelError("eta = 1 with electronic noise cannot be dilated by a beamsplitter")
    return None


def derived_noises(model: SystemModel) -> Noises:
    T, eta, v_el = model.T, model.eta, model.v_el
    chi_line = model.xi + 1.0 / T - 1.0
    chi_het = (1.0 + (1.0 - eta) + 2.0 * v_el) / eta
    chi_d = ((1.0 - eta) + 2.0 * v_el) / eta
    if eta < 1.0:
        upsilon = 1.0 + 2.0 * v_el / (1.0 - eta)
    else:
        upsilon = None  # v_el > 0 here is only rejected when a dilation is requested
    return Noises(chi_line, chi_het, chi_line + chi_het / T, chi_d, chi_line + chi_d / T, upsilon)


def bob_variance(model: SystemModel) -> float:
    """Variance of Bob's mode B2 just before the ideal heterodyne detector."""
    return model.eta * model.T * (model.V + derived_noises(model).chi_t)


def shared_state_cm(model: SystemModel) -> CovarianceMatrix:
    """Alice-Bob state (modes A, B1) at the channel output."""
    V, T = model.V, model.T
    chi_line = derived_noises(model).chi_line
    eye, z = np.eye(2), np.diag([1.0, -1.0])
    c = np.sqrt(T) * np.sqrt(V * V - 1.0)
    mat = np.block([[V * eye, c * z], [c * z, T * (V + chi_line) * eye]])
    return CovarianceMatrix(mat, ("A", "B1"))


def detector_dilated_state(model: SystemModel) -> CovarianceMatrix:
    """State of (A, B2, F, G): B1 mixed at transmissivity eta with half a TMSV(upsilon).

    With an ideal detector the dilation is skipped and the result has modes (A, B2).
    """
    ab1 = shared_state_cm(model)
    upsilon = detector_upsilon(model.eta, model.v_el)
    if upsilon is None:
        return ab1.relabel({"B1": "B2"})
    full = attach(ab1, tmsv_cm(upsilon, ("F", "G")))
    full = apply_beamsplitter(full, "B1", "F", model.eta)
    return full.relabel({"B1": "B2"})


def mutual_info_ab_arrays(V, T, xi, eta, v_el):
    """Closed-form I(A:B) in bits; arguments broadcast."""
    chi_het = (1.0 + (1.0 - eta) + 2.0 * v_el) / eta
    chi_tot = xi + 1.0 / T - 1.0 + chi_het / T
    return np.log2((V + chi_tot) / (1.0 + chi_tot))


def mutual_info_ab(model: SystemModel) -> float:
    """Alice-Bob Shannon information (bits per channel use), closed form."""
    return float(mutual_info_ab_arrays(model.V, model.T, model.xi, model.eta, model.v_el))


def mutual_info_ab_numeric(model: SystemModel) -> float:
    """Same quantity obtained by conditioning the dilated state on Alice's heterodyne."""
    state = detector_dilated_state(model)
    v_b = state.block(["B2"])[0, 0]
    v_b_given_a = condition_on_heterodyne(state.reduce(["A", "B2"]), "A").matrix[0, 0]
    return float(np.log2((v_b + 1.0) / (v_b_given_a + 1.0)))
