"""Classical comparison estimators.

Greedy sparse regression over an angular steering dictionary, and a
per-port least-squares/shrinkage reconstruction on the observed ports.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .channel_model import ArrayGeometry
from .pilot_system import PilotObservation, SwitchSchedule

RANK_TOL = 1e-10


@dataclass
class AngularDictionary:
    """Steering-vector dictionary on a spatial-frequency grid.

    ``full_atoms`` holds unit-norm length-N steering columns; ``atoms`` is
    the same dictionary seen through the switch schedule (rows ordered
    slot-major like observations).
    """

    grid_angles: np.ndarray
    atoms: np.ndarray
    full_atoms: np.ndarray


def build_dictionary(
    geometry: ArrayGeometry, sched: SwitchSchedule, num_atoms: int
) -> AngularDictionary:
    """Grid uniform in cos(theta) over [-1, 1) with ``num_atoms`` points.

    Steering vectors are Fourier-like in cos(theta), so this grid keeps
    mutual coherence uniform across atoms.
    """
    if num_atoms < 1:
        raise ValueError(f"num_atoms must be >= 1, got {num_atoms}")
    if sched.num_ports != geometry.num_ports:
        raise ValueError(
            f"schedule covers {sched.num_ports} ports, geometry has "
            f"{geometry.num_ports}"
        )
    cos_grid = -1.0 + 2.0 * np.arange(num_atoms) / num_atoms
    angles = np.arccos(cos_grid)
    n = np.arange(geometry.num_ports)
    phases = 2.0 * np.pi * geometry.spacing_ratio * np.outer(n, cos_grid)
    full_atoms = np.exp(1j * phases) / np.sqrt(geometry.num_ports)
    atoms = full_atoms[sched.flat_indices(), :]
    return AngularDictionary(angles, atoms, full_atoms)


@dataclass
class OmpTrace:
    """Per-iteration diagnostics: chosen support and residual norms
    (entry 0 is the initial ||y||, then one entry per accepted atom)."""

    support: list[int]
    residual_norms: list[float]


def omp_estimate(
    obs, dictionary: AngularDictionary, sparsity: int, with_trace: bool = False
):
    """Greedy sparse reconstruction of the full port-domain channel.

    Iterates ``sparsity`` times: pick the atom with the largest residual
    correlation (normalized by its observed-column norm), refit the
    least-squares coefficients on the grown support, deflate the residual.
    The support system is kept orthogonal through an incrementally updated
    QR factorization; atoms that would make it numerically rank-deficient
    (tolerance 1e-10) are dropped with a warning.

    Returns the length-N estimate, or (estimate, OmpTrace) with
    ``with_trace``.
    """
    y = obs.samples if isinstance(obs, PilotObservation) else np.asarray(obs)
    y = y.astype(complex)
    m, n_atoms = dictionary.atoms.shape
    if y.shape != (m,):
        raise ValueError(
            f"observation length {y.shape} does not match dictionary rows {m}"
        )
    if sparsity < 0 or sparsity > n_atoms or sparsity > m:
        raise ValueError(
            f"sparsity {sparsity} must lie in [0, min(num_atoms={n_atoms}, "
            f"observations={m})]"
        )

    atom_norms = np.linalg.norm(dictionary.atoms, axis=0)
    residual = y.copy()
    support: list[int] = []
    residual_norms = [float(np.linalg.norm(residual))]
    q_cols: list[np.ndarray] = []
    r_cols: list[np.ndarray] = []  # column k holds R[:k+1, k]
    excluded = np.zeros(n_atoms, dtype=bool)
    excluded[atom_norms == 0] = True

    while len(support) < sparsity:
        corr = np.abs(dictionary.atoms.conj().T @ residual)
        with np.errstate(invalid="ignore", divide="ignore"):
            corr = np.where(atom_norms > 0, corr / atom_norms, 0.0)
        corr[excluded] = -1.0
        best = int(np.argmax(corr))
        if corr[best] <= 0.0:
            break  # nothing correlated remains (e.g. zero observation)
        excluded[best] = True

        # Orthogonalize the new column against the current basis (two
        # Gram-Schmidt passes for numerical robustness).
        col = dictionary.atoms[:, best].astype(complex)
        w = col.copy()
        head = np.zeros(len(q_cols) + 1, dtype=complex)
        for _ in range(2):
            for k, q in enumerate(q_cols):
                proj = np.vdot(q, w)
                head[k] += proj
                w = w - proj * q
        w_norm = np.linalg.norm(w)
        if w_norm <= RANK_TOL * atom_norms[best]:
            warnings.warn(
                f"dropping atom {best}: support system would be rank-deficient",
                stacklevel=2,
            )
            continue
        head[-1] = w_norm
        q = w / w_norm
        support.append(best)
        q_cols.append(q)
        r_cols.append(head)
        residual = residual - np.vdot(q, residual) * q
        residual_norms.append(float(np.linalg.norm(residual)))

    estimate = np.zeros(dictionary.full_atoms.shape[0], dtype=complex)
    if support:
        k = len(support)
        r = np.zeros((k, k), dtype=complex)
        for j, col in enumerate(r_cols):
            r[: j + 1, j] = col
        qh_y = np.array([np.vdot(q, y) for q in q_cols])
        coeffs = np.linalg.solve(r, qh_y)
        estimate = dictionary.full_atoms[:, support] @ coeffs
    if with_trace:
        return estimate, OmpTrace(support, residual_norms)
    return estimate


def ls_observed_estimate(obs, sched: SwitchSchedule, sigma2: float) -> np.ndarray:
    """Observed ports get their (revisit-averaged) samples scaled by the
    scalar shrinkage 1/(1 + sigma2) against unit per-port prior power;
    unobserved ports fall back to the zero prior mean."""
    y = obs.samples if isinstance(obs, PilotObservation) else np.asarray(obs)
    y = y.astype(complex)
    flat = sched.flat_indices()
    if y.shape != (flat.size,):
        raise ValueError(
            f"observation length {y.shape} does not match schedule samples {flat.size}"
        )
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be >= 0, got {sigma2}")
    sums = np.zeros(sched.num_ports, dtype=complex)
    counts = np.zeros(sched.num_ports)
    np.add.at(sums, flat, y)
    np.add.at(counts, flat, 1.0)
    estimate = np.zeros(sched.num_ports, dtype=complex)
    seen = counts > 0
    estimate[seen] = (sums[seen] / counts[seen]) / (1.0 + sigma2)
    return estimate
