"""Truncated Fock-space linear algebra for a qubit-coupled oscillator.

Everything is dense complex linear algebra in the number basis
|0>, ..., |d-1| with an explicit cutoff d.  Unitaries are built by
eigendecomposition of the Hermitian i*(generator), which keeps them
exactly unitary up to roundoff even when the generator is close to
nilpotent.  The master-equation integrator is fixed-step RK4, so runs
are bit-reproducible for a given step size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    AccuracyError,
    InvalidDimensionError,
    InvalidParameterError,
    InvalidStepError,
    UnsupportedOrderError,
)

# Fraction of top Fock levels watched by the truncation guard, and the
# population they may carry before a result is flagged.
TAIL_FRACTION = 0.1
TAIL_TOLERANCE = 1e-8

# Step-size rule for the RK4 integrator: dt * ||H|| must stay below this.
STEP_RULE = 0.05

DEFAULT_CUTOFF = 100


@dataclass(frozen=True)
class TruncatedOperator:
    """Dense operator on the truncated oscillator space."""

    cutoff: int
    matrix: np.ndarray
    truncation_flagged: bool = False

    def dag(self) -> "TruncatedOperator":
        return TruncatedOperator(self.cutoff, self.matrix.conj().T, self.truncation_flagged)

    def __matmul__(self, other: "TruncatedOperator") -> "TruncatedOperator":
        return TruncatedOperator(self.cutoff, self.matrix @ other.matrix)


@dataclass(frozen=True)
class StateVector:
    """Pure state of the truncated oscillator."""

    cutoff: int
    amplitudes: np.ndarray
    truncation_flagged: bool = False

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tail_population(self) -> float:
        k = tail_start(self.cutoff)
        return float(np.sum(np.abs(self.amplitudes[k:]) ** 2))

    def to_density(self) -> "DensityOperator":
        rho = np.outer(self.amplitudes, self.amplitudes.conj())
        return DensityOperator(self.cutoff, rho, self.truncation_flagged)


@dataclass(frozen=True)
class DensityOperator:
    """Density matrix of the oscillator (d x d) or qubit+oscillator (2d x 2d)."""

    cutoff: int
    matrix: np.ndarray
    truncation_flagged: bool = False

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def expectation(self, op: np.ndarray) -> complex:
        return complex(np.trace(op @ self.matrix))

    def tail_population(self) -> float:
        pops = np.real(np.diag(self.matrix))
        if self.dim == 2 * self.cutoff:
            pops = pops[: self.cutoff] + pops[self.cutoff :]
        k = tail_start(self.cutoff)
        return float(np.sum(pops[k:]))

    def validate(self, trace_tol: float = 1e-10, herm_tol: float = 1e-12,
                 eig_tol: float = 1e-10) -> None:
        """Raise if the Hermiticity / trace / positivity invariants fail."""
        m = self.matrix
        herm = np.max(np.abs(m - m.conj().T))
        if herm > herm_tol:
            raise AccuracyError(f"density matrix not Hermitian: deviation {herm:.3e}")
        tr = abs(np.trace(m) - 1.0)
        if tr > trace_tol:
            raise AccuracyError(f"density matrix trace off unity by {tr:.3e}", drift=tr)
        lo = float(np.min(np.linalg.eigvalsh((m + m.conj().T) / 2)))
        if lo < -eig_tol:
            raise AccuracyError(f"density matrix has eigenvalue {lo:.3e} below 0")


def tail_start(cutoff: int) -> int:
    """First Fock index belonging to the watched top-10% tail."""
    return cutoff - max(1, int(np.ceil(TAIL_FRACTION * cutoff)))


def annihilation(cutoff: int) -> TruncatedOperator:
    """Ladder operator with <n-1|A|n> = sqrt(n)."""
    if cutoff < 2:
        raise InvalidDimensionError(f"cutoff must be >= 2, got {cutoff}")
    a = np.zeros((cutoff, cutoff), dtype=complex)
    ns = np.arange(1, cutoff)
    a[ns - 1, ns] = np.sqrt(ns)
    return TruncatedOperator(cutoff, a)


def number_operator(cutoff: int) -> TruncatedOperator:
    a = annihilation(cutoff)
    return TruncatedOperator(cutoff, a.matrix.conj().T @ a.matrix)


def identity(cutoff: int) -> TruncatedOperator:
    return TruncatedOperator(cutoff, np.eye(cutoff, dtype=complex))


def fock_state(n: int, cutoff: int) -> StateVector:
    if not 0 <= n < cutoff:
        raise InvalidDimensionError(f"Fock index {n} outside cutoff {cutoff}")
    amp = np.zeros(cutoff, dtype=complex)
    amp[n] = 1.0
    return StateVector(cutoff, amp)


def vacuum_state(cutoff: int) -> StateVector:
    return fock_state(0, cutoff)


def expm_antihermitian(generator: np.ndarray) -> np.ndarray:
    """exp(K) for anti-Hermitian K, via eigendecomposition of i*K.

    i*K is Hermitian, so the result is unitary up to roundoff regardless
    of the near-nilpotent ladder structure of K.
    """
    h = 1j * generator
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w)) @ v.conj().T


def displacement(xi: complex, cutoff: int = DEFAULT_CUTOFF) -> TruncatedOperator:
    """Displacement unitary exp(xi A^dag - xi* A).

    The result carries ``truncation_flagged=True`` when |xi|^2 exceeds
    cutoff/10, i.e. when the displaced vacuum starts leaning on the top
    Fock levels; this is a flag, not a hard error.
    """
    xi = complex(xi)
    if not np.isfinite(xi.real) or not np.isfinite(xi.imag):
        raise InvalidParameterError("displacement amplitude must be finite")
    a = annihilation(cutoff).matrix
    gen = xi * a.conj().T - np.conj(xi) * a
    u = expm_antihermitian(gen)
    flagged = abs(xi) ** 2 > cutoff / 10.0
    return TruncatedOperator(cutoff, u, truncation_flagged=flagged)


def generalized_squeeze(n: int, zeta: complex, cutoff: int = DEFAULT_CUTOFF) -> TruncatedOperator:
    """Order-n squeezing unitary exp((zeta* A^n - zeta A^dag^n) / n!)."""
    if not 2 <= n <= 4:
        raise UnsupportedOrderError(f"squeezing order must be 2, 3 or 4, got {n}")
    zeta = complex(zeta)
    if abs(zeta) > 1.0 + 1e-12:
        raise InvalidParameterError(f"|zeta| = {abs(zeta):.3f} above supported range 1")
    a = annihilation(cutoff).matrix
    an = np.linalg.matrix_power(a, n)
    gen = (np.conj(zeta) * an - zeta * an.conj().T) / math.factorial(n)
    u = expm_antihermitian(gen)
    return TruncatedOperator(cutoff, u)


def thermal_state(n_bar: float, cutoff: int = DEFAULT_CUTOFF) -> DensityOperator:
    """Diagonal Gibbs state with mean occupation n_bar.

    Populations follow the geometric law (n_bar/(1+n_bar))^n and are
    renormalized on the truncated space.  Rejects n_bar so large that the
    discarded tail would exceed 1e-10.
    """
    if n_bar < 0:
        raise InvalidParameterError("mean occupation must be non-negative")
    if n_bar == 0:
        return vacuum_state(cutoff).to_density()
    q = n_bar / (1.0 + n_bar)
    if q**cutoff > 1e-10:
        raise InvalidParameterError(
            f"n_bar = {n_bar} leaves tail population {q**cutoff:.2e} beyond cutoff {cutoff}"
        )
    pops = (1.0 - q) * q ** np.arange(cutoff)
    pops /= pops.sum()
    return DensityOperator(cutoff, np.diag(pops.astype(complex)))


def apply_unitary(u: TruncatedOperator, state: StateVector) -> StateVector:
    amp = u.matrix @ state.amplitudes
    norm = np.linalg.norm(amp)
    if abs(norm**2 - 1.0) > 1e-12:
        raise AccuracyError(f"norm drift {abs(norm**2 - 1.0):.3e} after unitary application")
    out = StateVector(state.cutoff, amp, state.truncation_flagged or u.truncation_flagged)
    if out.tail_population() > TAIL_TOLERANCE:
        out = StateVector(state.cutoff, amp, truncation_flagged=True)
    return out


def qubit_kron(qubit_matrix: np.ndarray, osc_matrix: np.ndarray) -> np.ndarray:
    """Operator on the joint qubit (x) oscillator space, qubit factor first."""
    return np.kron(qubit_matrix, osc_matrix)


# ---------------------------------------------------------------------------
# Lindblad master equation
# ---------------------------------------------------------------------------

HamiltonianTerm = tuple[TruncatedOperator, Callable[[float], float] | None]


@dataclass(frozen=True)
class LindbladSpec:
    """Hamiltonian terms (operator, coefficient schedule) plus jump operators.

    A ``None`` schedule means a constant unit coefficient.  Jump rates are
    in quanta per second.
    """

    hamiltonian: tuple[HamiltonianTerm, ...]
    jumps: tuple[tuple[TruncatedOperator, float], ...] = ()

    def __post_init__(self):
        for _, rate in self.jumps:
            if rate < 0:
                raise InvalidParameterError(f"jump rate must be non-negative, got {rate}")

    def norm_bound(self, times: np.ndarray) -> float:
        """Upper bound on ||H(t)|| over the sampled time grid."""
        bound = 0.0
        for op, coef in self.hamiltonian:
            cmax = 1.0 if coef is None else float(np.max(np.abs([coef(t) for t in times])))
            bound += cmax * float(np.linalg.norm(op.matrix, 2))
        return bound

    def hamiltonian_at(self, t: float, dim: int) -> np.ndarray:
        h = np.zeros((dim, dim), dtype=complex)
        for op, coef in self.hamiltonian:
            c = 1.0 if coef is None else coef(t)
            h += c * op.matrix
        return h


def lindblad_rhs(rho: np.ndarray, h: np.ndarray,
                 jumps: Sequence[tuple[np.ndarray, np.ndarray, float]]) -> np.ndarray:
    """d rho / dt for given H and precomputed jump tuples (L, L^dag L, rate)."""
    out = -1j * (h @ rho - rho @ h)
    for l_op, ldl, rate in jumps:
        out += rate * (l_op @ rho @ l_op.conj().T - 0.5 * (ldl @ rho + rho @ ldl))
    return out


def evolve_lindblad(rho0: DensityOperator, spec: LindbladSpec,
                    t_span: tuple[float, float], dt: float) -> DensityOperator:
    """Fixed-step RK4 integration of the Lindblad master equation.

    The step must satisfy dt * ||H|| <= 0.05; the trace may drift by at
    most 1e-8 over the run, otherwise an AccuracyError reports the drift.
    """
    t0, tf = t_span
    if tf < t0:
        raise InvalidParameterError("t_span must be ordered")
    if dt <= 0:
        raise InvalidStepError("dt must be positive")
    duration = tf - t0
    if duration == 0:
        return rho0

    n_steps = max(1, int(np.ceil(duration / dt - 1e-12)))
    dt_eff = duration / n_steps
    times = t0 + dt_eff * np.arange(n_steps + 1)

    bound = spec.norm_bound(times)
    if dt_eff * bound > STEP_RULE * (1 + 1e-9):
        raise InvalidStepError(
            f"dt*||H|| = {dt_eff * bound:.3e} violates the {STEP_RULE} step rule"
        )

    dim = rho0.matrix.shape[0]
    jumps = []
    for op, rate in spec.jumps:
        l_mat = op.matrix
        if l_mat.shape[0] != dim:
            raise InvalidDimensionError("jump operator dimension does not match the state")
        jumps.append((l_mat, l_mat.conj().T @ l_mat, rate))

    rho = rho0.matrix.astype(complex).copy()
    trace0 = np.trace(rho).real
    for i in range(n_steps):
        t = times[i]
        h1 = spec.hamiltonian_at(t, dim)
        h2 = spec.hamiltonian_at(t + 0.5 * dt_eff, dim)
        h3 = spec.hamiltonian_at(t + dt_eff, dim)
        k1 = lindblad_rhs(rho, h1, jumps)
        k2 = lindblad_rhs(rho + 0.5 * dt_eff * k1, h2, jumps)
        k3 = lindblad_rhs(rho + 0.5 * dt_eff * k2, h2, jumps)
        k4 = lindblad_rhs(rho + dt_eff * k3, h3, jumps)
        rho += (dt_eff / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    drift = abs(np.trace(rho).real - trace0)
    if drift > 1e-8:
        raise AccuracyError(f"trace drift {drift:.3e} exceeds 1e-8", drift=drift)

    out = DensityOperator(rho0.cutoff, rho)
    if out.tail_population() > TAIL_TOLERANCE:
        out = DensityOperator(rho0.cutoff, rho, truncation_flagged=True)
    return out
