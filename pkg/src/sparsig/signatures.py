"""Complex spreading signatures and signature-level capacity metrics.

The signature matrix is S = F D^-1 Phi: the binary mapping F column-normalized
(D holds the column Euclidean norms, sqrt(rho) for biregular mappings) and
rotated by per-user unit-magnitude phasors Phi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .euler import ParameterError, SparseMapping

PHASE_MODES = ("none", "uniform", "evenly-spaced")


@dataclass(frozen=True)
class SignatureMatrix:
    matrix: np.ndarray        # complex, (n_s, K), unit-norm columns
    phases: np.ndarray        # complex phasors, (K,)
    mapping: SparseMapping
    phase_mode: str
    seed: int | None

    @property
    def n_s(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_users(self) -> int:
        return self.matrix.shape[1]


def build_signatures(fm: SparseMapping, phase_mode: str = "uniform",
                     seed: int | None = 0) -> SignatureMatrix:
    """Normalize the mapping columns and apply the chosen phase rotations.

    ``none`` uses phi_k = 1, ``uniform`` draws i.i.d. phases on the unit
    circle from ``seed``, ``evenly-spaced`` assigns phi_k = exp(2i pi k / K).
    """
    if phase_mode not in PHASE_MODES:
        raise ParameterError(f"phase_mode must be one of {PHASE_MODES}, got {phase_mode!r}")
    F = fm.matrix.astype(np.float64)
    norms = np.sqrt(F.sum(axis=0))
    if (norms == 0).any():
        raise ParameterError("mapping has an empty column")
    K = fm.n_users
    if phase_mode == "none":
        phases = np.ones(K, dtype=np.complex128)
    elif phase_mode == "evenly-spaced":
        phases = np.exp(2j * np.pi * np.arange(K) / K)
    else:
        rng = np.random.default_rng(seed)
        phases = np.exp(2j * np.pi * rng.random(K))
    S = (F / norms) * phases
    return SignatureMatrix(matrix=S, phases=phases, mapping=fm,
                           phase_mode=phase_mode, seed=seed)


def spectral_efficiency(sig: SignatureMatrix | np.ndarray, snr: float) -> float:
    """Optimum-decoding throughput per resource element at the given linear SNR.

    (1/n_s) * sum_i log2(1 + snr * lambda_i(S S^H)), with the eigenvalues taken
    on the small n_s x n_s Gram side.
    """
    if snr < 0:
        raise ParameterError(f"snr must be >= 0, got {snr}")
    S = sig.matrix if isinstance(sig, SignatureMatrix) else np.asarray(sig)
    gram = S @ S.conj().T
    eig = np.linalg.eigvalsh(gram)
    eig = np.clip(eig.real, 0.0, None)
    return float(np.sum(np.log2(1.0 + snr * eig)) / S.shape[0])


def cover_wyner(beta: float, snr: float) -> float:
    """Spreading-free upper bound log2(1 + beta * snr) at system load beta."""
    if beta <= 0:
        raise ParameterError(f"beta must be > 0, got {beta}")
    if snr < 0:
        raise ParameterError(f"snr must be >= 0, got {snr}")
    return float(np.log2(1.0 + beta * snr))
