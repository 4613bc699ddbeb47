"""Classical D1Q3 lattice Boltzmann reference and the Gaussian-hill solution.

Lattice units throughout: dx = dt = 1, dt/tau = 1, cs^2 = 1/3.  With
dt/tau = 1 the BGK update collapses to "stream the equilibrium":

    f_i(x + c_i, t + 1) = f_i^eq(rho(x, t), u(x, t))
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AdmissibilityError, DegeneracyError, DomainError

MODES = ("linear", "nonlinear")
_TOL = 1e-12


@dataclass(frozen=True)
class VelocitySet:
    weights: tuple
    velocities: tuple
    cs_sq: float


D1Q3 = VelocitySet(weights=(2 / 3, 1 / 6, 1 / 6), velocities=(0, 1, -1), cs_sq=1 / 3)


def max_velocity(mode: str, vs: VelocitySet = D1Q3) -> float:
    """Largest |u| for which the quantum collision angles of ``mode`` exist.

    linear: |u / cs^2| <= 1.  nonlinear: |u +- 0.5| <= 1 and |sqrt(3/2) u| <= 1,
    i.e. |u| <= 0.5.
    """
    if mode == "linear":
        return vs.cs_sq
    if mode == "nonlinear":
        return 0.5
    raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def check_velocity(u, mode: str, vs: VelocitySet = D1Q3) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    umax = max_velocity(mode, vs)
    if not np.all(np.isfinite(u)):
        raise AdmissibilityError("velocity contains non-finite values")
    if np.any(np.abs(u) > umax + _TOL):
        bound = "|u/cs^2| <= 1 (theta_1 arccos argument)" if mode == "linear" else (
            "|u| <= 0.5 (theta_3/theta_4 arccos arguments)"
        )
        raise AdmissibilityError(
            f"velocity max |u| = {np.max(np.abs(u)):.6g} violates {mode} bound {bound}"
        )
    return u


def equilibrium(rho, u, mode: str = "linear", vs: VelocitySet = D1Q3):
    """Equilibrium populations ``(f0, f1, f2)`` for density ``rho`` and velocity ``u``.

    Arguments broadcast, so per-cell fields work directly.

    >>> [round(float(f), 6) for f in equilibrium(1.0, 0.3, "nonlinear")]
    [0.576667, 0.361667, 0.061667]
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise DomainError("negative density")
    u = check_velocity(u, mode, vs)
    w0, w1, w2 = vs.weights
    cs2 = vs.cs_sq
    if mode == "linear":
        f0 = w0 * rho * np.ones_like(u)
        f1 = w1 * rho * (1 + u / cs2)
        f2 = w2 * rho * (1 - u / cs2)
    else:
        # second-order expansion written as completed squares
        f0 = w0 * rho * (1 - 1.5 * u**2)
        f1 = 3 * w1 * rho * (u + 0.5) ** 2 + 0.25 * w1 * rho
        f2 = 3 * w2 * rho * (u - 0.5) ** 2 + 0.25 * w2 * rho
    return f0, f1, f2


def moments(f0, f1, f2):
    """Density and velocity, ``rho = sum f_i`` and ``rho u = f1 - f2``."""
    f0, f1, f2 = (np.asarray(f, dtype=float) for f in (f0, f1, f2))
    rho = f0 + f1 + f2
    mom = f1 - f2
    empty = rho == 0
    if np.any(empty & (mom != 0)):
        raise DegeneracyError("zero density with non-zero momentum")
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.where(empty, 0.0, mom / np.where(empty, 1.0, rho))
    return rho, u


def stream(f0, f1, f2):
    """Periodic streaming: f1 moves one cell right, f2 one cell left."""
    return f0, np.roll(f1, 1), np.roll(f2, -1)


def classical_step(rho, u, mode: str = "linear", update_velocity: bool = False,
                   vs: VelocitySet = D1Q3):
    """One collide-and-stream step on a periodic lattice.

    Returns the new density, or ``(rho, u)`` when ``update_velocity`` is set.
    """
    rho = np.asarray(rho, dtype=float)
    u = np.broadcast_to(np.asarray(u, dtype=float), rho.shape)
    f = stream(*equilibrium(rho, u, mode, vs))
    if update_velocity:
        return moments(*f)
    return f[0] + f[1] + f[2]


def classical_run(rho, u, steps: int, mode: str = "linear", update_velocity: bool = False):
    """Iterate ``classical_step``; returns the final ``(rho, u)``."""
    rho = np.asarray(rho, dtype=float)
    u = np.broadcast_to(np.asarray(u, dtype=float), rho.shape).copy()
    for _ in range(steps):
        if update_velocity:
            rho, u = classical_step(rho, u, mode, True)
        else:
            rho = classical_step(rho, u, mode)
    return rho, u


# --------------------------------------------------------------------------
# Gaussian hill
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianParams:
    """Gaussian hill on a constant background; lengths in cells, D in cells^2/step."""

    rho0: float = 0.1
    ambient: float = 0.1
    x0: float = 16.0
    sigma0: float = 4.0
    D: float = 1 / 6

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise DomainError("sigma0 must be positive")
        if self.rho0 < 0 or self.ambient < 0:
            raise DomainError("rho0 and ambient must be non-negative")
        if self.D < 0:
            raise DomainError("diffusivity must be non-negative")


def _wrap(dx, n: int):
    """Minimal-image displacement on a periodic domain of ``n`` cells."""
    return dx - n * np.round(dx / n)


def analytic_gaussian(x, t: float, p: GaussianParams, u: float, n_cells: int):
    """Advected, diffused Gaussian hill at time ``t`` plus the ambient offset."""
    if t < 0:
        raise DomainError("t must be non-negative")
    x = np.asarray(x, dtype=float)
    var = p.sigma0**2 + 2 * p.D * t
    d = _wrap(x - p.x0 - u * t, n_cells)
    return p.ambient + (p.sigma0**2 / var) * p.rho0 * np.exp(-(d**2) / (2 * var))


def initial_gaussian(p: GaussianParams, n_cells: int) -> np.ndarray:
    return analytic_gaussian(np.arange(n_cells), 0.0, p, 0.0, n_cells)
