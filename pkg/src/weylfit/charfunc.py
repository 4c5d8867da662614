"""Characteristic functions: closed forms, Fock-space numerics, source maps.

All functions accept plain complex scalars or numpy arrays for the
phase-space argument; `PhasePoint` is a thin validated wrapper used at
module boundaries.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import fockspace
from .errors import (
    InvalidParameterError,
    InvalidTimeError,
    TruncationWarning,
    UnsupportedOrderError,
)

TWO_PI = 2.0 * np.pi

# Below this |delta * t| the circle function switches to its series limit,
# avoiding catastrophic cancellation in (e^{i delta t} - 1) / delta.
CIRCLE_SERIES_THRESHOLD = 1e-8


@dataclass(frozen=True)
class SqueezeSpec:
    """Squeezing order n, amplitude r >= 0 and phase theta in [0, 2 pi)."""

    n: int
    r: float
    theta: float = 0.0

    def __post_init__(self):
        if not 2 <= self.n <= 4:
            raise UnsupportedOrderError(f"squeezing order must be 2, 3 or 4, got {self.n}")
        if self.r < 0:
            raise InvalidParameterError("squeezing amplitude must be non-negative")
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)

    @property
    def zeta(self) -> complex:
        return self.r * np.exp(1j * self.theta)


@dataclass(frozen=True)
class SourceSpec:
    """Harmonic drive amplitude J0, detuning, and active window [t0, tf]."""

    J0: complex
    delta: float = 0.0
    t0: float = 0.0
    tf: float = np.inf

    def __post_init__(self):
        if self.tf < self.t0:
            raise InvalidParameterError("source window must satisfy tf >= t0")

    @classmethod
    def resonant(cls, omega_eta: float, dphi: float = 0.0, t0: float = 0.0,
                 tf: float = np.inf) -> "SourceSpec":
        """Resonant spin-dependent force with |J0| = omega_eta."""
        return cls(J0=-1j * omega_eta * np.exp(1j * dphi), delta=0.0, t0=t0, tf=tf)


@dataclass(frozen=True)
class PhasePoint:
    """Dimensionless phase-space displacement."""

    xi: complex
    flagged: bool = False

    def __post_init__(self):
        z = complex(self.xi)
        if not (np.isfinite(z.real) and np.isfinite(z.imag)):
            raise InvalidParameterError("phase-space point must be finite")


def _as_complex(xi) -> complex | np.ndarray:
    if isinstance(xi, PhasePoint):
        return complex(xi.xi)
    return xi


def circle_function(delta: float, t: float):
    """Integrated detuned response (e^{i delta t} - 1) / delta.

    Continued by its series i*t - delta*t^2/2 when |delta * t| is tiny,
    which avoids the cancellation in the difference of exponentials.
    """
    t = np.asarray(t, dtype=float)
    arg = delta * t
    small = np.abs(arg) < CIRCLE_SERIES_THRESHOLD
    safe_delta = delta if delta != 0 else 1.0
    with np.errstate(invalid="ignore"):
        val = (np.exp(1j * arg) - 1.0) / safe_delta
    out = np.where(small, t * (1j - 0.5 * arg), val)
    if out.ndim == 0:
        return complex(out)
    return out


def xi_of_time(source: SourceSpec, t: float) -> PhasePoint:
    """Phase-space coordinate accumulated by the drive up to time t.

    xi = J0 * C_delta(t - t0): on resonance the linear law
    i J0 (t - t0) = omega_eta (t - t0) e^{i dphi}, off resonance a circle
    that closes after each detuning period.
    """
    if t < source.t0:
        raise InvalidTimeError(f"t = {t} precedes source start {source.t0}")
    tau = min(t, source.tf) - source.t0
    xi = source.J0 * circle_function(source.delta, tau)
    return PhasePoint(complex(xi))


def chi_vacuum(xi):
    """Ground-state value exp(-|xi|^2 / 2)."""
    z = _as_complex(xi)
    return np.exp(-0.5 * np.abs(z) ** 2)


def chi_squeezed_exact(xi, spec: SqueezeSpec):
    """Closed-form Weyl function of the order-2 squeezed vacuum.

    Evaluates the vacuum Gaussian at the Bogoliubov-rotated argument pair
    (xi* ch r + xi sh r e^{-i theta}, xi ch r + xi* sh r e^{i theta});
    the result is real and in (0, 1].
    """
    if spec.n != 2:
        raise UnsupportedOrderError("closed form available for order n=2 only")
    z = _as_complex(xi)
    ch, sh = np.cosh(spec.r), np.sinh(spec.r)
    u = np.conj(z) * ch + z * sh * np.exp(-1j * spec.theta)
    v = z * ch + np.conj(z) * sh * np.exp(1j * spec.theta)
    return np.real(np.exp(-0.5 * u * v))


def chi_thermal_squeezed_exact(xi, spec: SqueezeSpec, n_bar: float):
    """Squeezed thermal state: zero-T closed form raised to (1 + 2 n_bar)."""
    if spec.n != 2:
        raise UnsupportedOrderError("closed form available for order n=2 only")
    if n_bar < 0:
        raise InvalidParameterError("mean occupation must be non-negative")
    return chi_squeezed_exact(xi, spec) ** (1.0 + 2.0 * n_bar)


@lru_cache(maxsize=512)
def _cached_squeeze(n: int, zeta: complex, cutoff: int) -> np.ndarray:
    return fockspace.generalized_squeeze(n, zeta, cutoff).matrix


@lru_cache(maxsize=4096)
def _cached_displacement(xi: complex, cutoff: int):
    op = fockspace.displacement(xi, cutoff)
    return op.matrix, op.truncation_flagged


def chi_numeric(rho: fockspace.DensityOperator, spec: SqueezeSpec, xi) -> complex:
    """Tr{S_n(zeta) rho S_n(zeta)^dag D(xi)} on the truncated space.

    Emits a TruncationWarning when the squeezed state or the displacement
    leans on the top Fock levels.
    """
    cutoff = rho.cutoff
    s = _cached_squeeze(spec.n, complex(spec.zeta), cutoff)
    sigma = s @ rho.matrix @ s.conj().T
    k = fockspace.tail_start(cutoff)
    tail = float(np.sum(np.real(np.diag(sigma))[k:]))
    z = complex(_as_complex(xi))
    d, d_flagged = _cached_displacement(z, cutoff)
    if tail > fockspace.TAIL_TOLERANCE or d_flagged:
        warnings.warn(
            f"truncation guard tripped (tail population {tail:.2e}, |xi|^2 = {abs(z)**2:.2f})",
            TruncationWarning,
            stacklevel=2,
        )
    return complex(np.trace(sigma @ d))


def chi_numeric_grid(rho: fockspace.DensityOperator, spec: SqueezeSpec,
                     xis: np.ndarray) -> np.ndarray:
    """Vectorized chi_numeric over a grid of displacement values."""
    cutoff = rho.cutoff
    s = _cached_squeeze(spec.n, complex(spec.zeta), cutoff)
    sigma_t = (s @ rho.matrix @ s.conj().T).T.copy()
    flat = np.asarray(xis, dtype=complex).ravel()
    out = np.empty(flat.shape, dtype=complex)
    for i, z in enumerate(flat):
        d, _ = _cached_displacement(complex(z), cutoff)
        out[i] = np.sum(sigma_t * d)
    return out.reshape(np.shape(xis))


def xi_heated(xi, c_h: float) -> PhasePoint:
    """Leading-order heating distortion xi -> xi + c_h xi^2.

    Valid for |c_h xi| <= 0.5; beyond that the returned point is flagged
    rather than rejected.
    """
    z = complex(_as_complex(xi))
    flagged = abs(c_h * z) > 0.5
    return PhasePoint(z + c_h * z * z, flagged=flagged)


def heated_xi_values(xis: np.ndarray, c_h: float) -> np.ndarray:
    """Array version of the heating substitution, without guard flags."""
    z = np.asarray(xis, dtype=complex)
    return z + c_h * z * z
