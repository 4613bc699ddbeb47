"""Amplitude encoding of a density field and decoding of measurement data.

A density field ``rho`` on ``2**M`` cells is stored as

    |psi> = sum_k sqrt(rho_k / C2) |0...0>_f |k>,     C2 = sum_k rho_k

so measuring the position register returns cell ``k`` with probability
``rho_k / C2``.  Decoding multiplies probabilities back by ``C2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, LayoutError
from .qcore import QubitLayout, ShotHistogram, StateVector


@dataclass
class EncodedState:
    state: StateVector
    norm_sq: float


def as_density_field(values) -> np.ndarray:
    """Validate a density field: finite, non-negative, power-of-two length."""
    rho = np.asarray(values, dtype=float)
    if rho.ndim != 1 or rho.size == 0:
        raise LayoutError("density field must be a non-empty 1-D sequence")
    n = rho.size
    if n & (n - 1):
        raise LayoutError(f"field length {n} is not a power of two; pad explicitly")
    if not np.all(np.isfinite(rho)):
        raise DomainError("density field contains non-finite values")
    if np.any(rho < 0):
        raise DomainError("density field contains negative values")
    return rho


def encode_sqrt_density(field, layout: QubitLayout) -> EncodedState:
    """Prepare ``sum_k sqrt(rho_k / C2)|0>_f|k>`` by direct amplitude assignment."""
    rho = as_density_field(field)
    if rho.size != layout.n_cells:
        raise LayoutError(f"field has {rho.size} cells, layout expects {layout.n_cells}")
    norm_sq = float(rho.sum())
    if not norm_sq > 0:
        raise DomainError("density field has zero total mass")
    amps = np.zeros(layout.dim)
    amps[: layout.n_cells] = np.sqrt(rho / norm_sq)
    return EncodedState(StateVector(amps, layout), norm_sq)


def decode_histogram(hist: ShotHistogram, norm_sq: float | None = None):
    """Density estimate and per-cell binomial standard error from shot counts."""
    c2 = hist.norm_sq if norm_sq is None else norm_sq
    if c2 is None or not c2 > 0:
        raise DomainError("decoding needs a positive norm_sq")
    p = hist.frequencies
    stderr = c2 * np.sqrt(p * (1 - p) / hist.shots)
    return c2 * p, stderr


def decode_density(data, norm_sq: float | None = None) -> np.ndarray:
    """Map position probabilities (or a ``ShotHistogram``) back to densities.

    Probabilities may sum to less than one when part of the state was
    discarded; they are not renormalised.
    """
    if isinstance(data, ShotHistogram):
        return decode_histogram(data, norm_sq)[0]
    if norm_sq is None or not norm_sq > 0:
        raise DomainError("decoding needs a positive norm_sq")
    p = np.asarray(data, dtype=float)
    if p.sum() > 1 + 1e-9:
        raise DomainError(f"probabilities sum to {p.sum()} > 1")
    return norm_sq * p
