"""
Symplectic algebra for zero-mean Gaussian states.

All covariance matrices are in shot-noise units (vacuum variance 1) with
quadrature-interleaved ordering (q1, p1, q2, p2, ...).  The array-level
kernels (``symplectic_spectrum``, ``entropy_of``, ``schur_condition``)
accept stacks of matrices with arbitrary leading dimensions; the
``CovarianceMatrix`` wrapper adds mode labels on top of them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

SYMMETRY_TOL = 1e-9
PHYSICAL_TOL = 1e-7
PINV_RCOND = 1e-10


class PhysicalityError(ValueError):
    """A covariance matrix violates the uncertainty principle."""


class NumericalError(ArithmeticError):
    """An eigen-solve or conditioning step failed."""


def g_function(x):
    """Entropy of a thermal mode with mean photon number ``x``, in bits.

    ``G(x) = (x + 1) log2(x + 1) - x log2(x)`` with ``G(0) = 0``.  Accepts
    scalars or arrays; values in ``[-1e-12, 0)`` are clamped to zero.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < -1e-12):
        raise ValueError(f"g_function domain error: min argument {x.min()!r} < 0")
    x = np.maximum(x, 0.0)
    safe = np.where(x > 0, x, 1.0)
    out = np.where(x > 0, (x + 1) * np.log2(x + 1) - x * np.log2(safe), 0.0)
    return float(out) if out.ndim == 0 else out


def omega(n_modes: int) -> np.ndarray:
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def symplectic_spectrum(m: np.ndarray) -> np.ndarray:
    """Sorted symplectic eigenvalues of one matrix or a stack of them.

    Computed as the moduli of the eigenvalues of ``Omega @ M`` (they come in
    ``+-i nu`` pairs).  Values in ``[1 - 1e-7, 1)`` are clamped to 1; anything
    smaller raises ``PhysicalityError``.
    """
    m = np.asarray(m, dtype=float)
    dim = m.shape[-1]
    if dim % 2 or m.shape[-2] != dim:
        raise ValueError(f"expected square even-dimensional matrices, got shape {m.shape}")
    try:
        ev = np.linalg.eigvals(omega(dim // 2) @ m)
    except np.linalg.LinAlgError as exc:
        conds = np.linalg.cond(m)
        raise NumericalError(f"symplectic eigensolve failed (condition number {conds})") from exc
    nu = np.sort(np.abs(ev), axis=-1)[..., ::2]
    if np.any(nu < 1.0 - PHYSICAL_TOL):
        raise PhysicalityError(f"unphysical state: min symplectic eigenvalue {nu.min():.12g}")
    return np.maximum(nu, 1.0)


def entropy_of(m: np.ndarray):
    """Von Neumann entropy (bits) of a Gaussian state, stack-aware."""
    nu = symplectic_spectrum(m)
    s = np.sum(g_function((nu - 1.0) / 2.0), axis=-1)
    return float(s) if np.ndim(s) == 0 else s


def homodyne_projector(pattern: Sequence[str]) -> np.ndarray:
    """Diagonal selector for measured quadratures, e.g. ``("q", "p")`` -> diag(1,0,0,1)."""
    diag = []
    for quad in pattern:
        if quad not in ("q", "p"):
            raise ValueError(f"quadrature must be 'q' or 'p', got {quad!r}")
        diag += [1.0, 0.0] if quad == "q" else [0.0, 1.0]
    return np.diag(diag)


def schur_condition(m_a, sigma, m_b, projector=None):
    """Conditional covariance ``M_A - sigma (X M_B X)^MP sigma^T``.

    With ``projector=None`` the measured block is inverted outright (used for
    heterodyne, where ``M_B + I`` is passed in).  Broadcasts over leading
    dimensions.
    """
    m_b = np.asarray(m_b, dtype=float)
    if projector is None:
        h = np.linalg.inv(m_b)
    else:
        h = np.linalg.pinv(projector @ m_b @ projector, rcond=PINV_RCOND, hermitian=True)
    sigma = np.asarray(sigma, dtype=float)
    return np.asarray(m_a) - sigma @ h @ np.swapaxes(sigma, -1, -2)


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Labelled covariance matrix of an m-mode zero-mean Gaussian state."""

    matrix: np.ndarray
    labels: tuple

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=float)
        labels = tuple(self.labels)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] != 2 * len(labels):
            raise ValueError(f"matrix shape {mat.shape} does not fit {len(labels)} modes")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate mode labels in {labels}")
        scale = max(1.0, float(np.abs(mat).max()))
        if np.abs(mat - mat.T).max() > SYMMETRY_TOL * scale:
            raise ValueError("covariance matrix is not symmetric")
        mat = 0.5 * (mat + mat.T)
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_modes(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"mode {label!r} not in {self.labels}") from None

    def quad_indices(self, labels: Iterable) -> list[int]:
        idx = []
        for lab in labels:
            k = self.index(lab)
            idx += [2 * k, 2 * k + 1]
        return idx

    def block(self, rows: Iterable, cols: Iterable | None = None) -> np.ndarray:
        """Sub-matrix between the quadratures of ``rows`` and ``cols`` modes."""
        r = self.quad_indices(rows)
        c = r if cols is None else self.quad_indices(cols)
        return self.matrix[np.ix_(r, c)].copy()

    def reduce(self, keep: Iterable) -> "CovarianceMatrix":
        """Marginal on the modes in ``keep`` (partial trace), in the given order."""
        keep = tuple(keep)
        return CovarianceMatrix(self.block(keep), keep)

    def trace_out(self, *labels) -> "CovarianceMatrix":
        drop = set(labels)
        for lab in drop:
            self.index(lab)
        return self.reduce(lab for lab in self.labels if lab not in drop)

    def relabel(self, mapping: dict) -> "CovarianceMatrix":
        return CovarianceMatrix(self.matrix, tuple(mapping.get(lab, lab) for lab in self.labels))

    def __repr__(self):
        return f"CovarianceMatrix(labels={self.labels}, dim={self.dim})"


def _check_variance(v, name):
    if not np.isfinite(v) or v < 1.0:
        raise ValueError(f"{name} must be >= 1 (shot-noise units), got {v!r}")


def vacuum_cm(label="vac") -> CovarianceMatrix:
    return CovarianceMatrix(np.eye(2), (label,))


def thermal_cm(w: float, label="th") -> CovarianceMatrix:
    _check_variance(w, "thermal variance")
    return CovarianceMatrix(w * np.eye(2), (label,))


def tmsv_cm(v: float, labels=("A", "B")) -> CovarianceMatrix:
    """Two-mode squeezed vacuum with quadrature variance ``v``."""
    _check_variance(v, "TMSV variance")
    c = np.sqrt(v * v - 1.0)
    eye, z = np.eye(2), np.diag([1.0, -1.0])
    return CovarianceMatrix(np.block([[v * eye, c * z], [c * z, v * eye]]), tuple(labels))


def attach(m1: CovarianceMatrix, m2: CovarianceMatrix) -> CovarianceMatrix:
    """Tensor product: block-diagonal concatenation."""
    clash = set(m1.labels) & set(m2.labels)
    if clash:
        raise ValueError(f"mode label collision: {sorted(map(str, clash))}")
    d1, d2 = m1.dim, m2.dim
    out = np.zeros((d1 + d2, d1 + d2))
    out[:d1, :d1] = m1.matrix
    out[d1:, d1:] = m2.matrix
    return CovarianceMatrix(out, m1.labels + m2.labels)


def beamsplitter_matrix(dim: int, i: int, j: int, t: float) -> np.ndarray:
    s = np.eye(dim)
    a, b = np.sqrt(t), np.sqrt(1.0 - t)
    for off in (0, 1):
        qi, qj = 2 * i + off, 2 * j + off
        s[qi, qi], s[qi, qj] = a, b
        s[qj, qi], s[qj, qj] = -b, a
    return s


def apply_beamsplitter(m: CovarianceMatrix, mode_i, mode_j, t: float) -> CovarianceMatrix:
    """Mix two modes on a beamsplitter of transmissivity ``t``.

    ``mode_i -> sqrt(t) i + sqrt(1-t) j`` and ``mode_j -> -sqrt(1-t) i + sqrt(t) j``,
    identically on both quadratures.  Labels are unchanged.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"beamsplitter transmissivity must lie in [0, 1], got {t!r}")
    if mode_i == mode_j:
        raise ValueError("beamsplitter needs two distinct modes")
    s = beamsplitter_matrix(m.dim, m.index(mode_i), m.index(mode_j), t)
    return CovarianceMatrix(s @ m.matrix @ s.T, m.labels)


def symplectic_eigenvalues(m: CovarianceMatrix) -> np.ndarray:
    return symplectic_spectrum(m.matrix)


def von_neumann_entropy(m: CovarianceMatrix) -> float:
    return entropy_of(m.matrix)


def condition_on_homodyne(m: CovarianceMatrix, measured: Sequence[tuple]) -> CovarianceMatrix:
    """Condition on homodyne outcomes; ``measured`` is a list of ``(mode, 'q'|'p')``.

    Measured modes are removed from the result.
    """
    meas_modes = [mode for mode, _ in measured]
    if len(set(meas_modes)) != len(meas_modes):
        raise ValueError("each mode can be measured only once")
    rest = [lab for lab in m.labels if lab not in set(meas_modes)]
    if not rest:
        raise ValueError("conditioning would leave no unmeasured modes")
    x = homodyne_projector([quad for _, quad in measured])
    out = schur_condition(m.block(rest), m.block(rest, meas_modes), m.block(meas_modes), x)
    return CovarianceMatrix(out, tuple(rest))


def condition_on_heterodyne(m: CovarianceMatrix, mode) -> CovarianceMatrix:
    """Condition on an ideal heterodyne (double-homodyne) measurement of ``mode``."""
    rest = [lab for lab in m.labels if lab != mode]
    m.index(mode)
    if not rest:
        raise ValueError("conditioning would leave no unmeasured modes")
    out = schur_condition(m.block(rest), m.block(rest, [mode]), m.block([mode]) + np.eye(2))
    return CovarianceMatrix(out, tuple(rest))


def condition_on_heterodyne_split(m: CovarianceMatrix, mode) -> CovarianceMatrix:
    """Heterodyne as vacuum + balanced splitter + conjugate homodynes (q, p)."""
    aux_a, aux_b = (mode, "_het_q"), (mode, "_het_p")
    split = attach(m.relabel({mode: aux_a}), vacuum_cm(aux_b))
    split = apply_beamsplitter(split, aux_a, aux_b, 0.5)
    return condition_on_homodyne(split, [(aux_a, "q"), (aux_b, "p")])
