"""Truncated series models of the characteristic function.

The model is chi = clip(1 + sum_j theta_j f_j(xi', r, theta)) * chi0^(1+2nB)
with xi' = xi + c_h xi^2.  Basis terms f_j are exposed separately so the
estimator can assemble analytic Jacobians; the model is linear in theta
inside the clip.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import charfunc, fockspace
from .errors import InvalidParameterError, UnsupportedOrderError

TruthTable = {
    2: np.array([-1.0, -1.0, 0.5], dtype=complex),
    3: np.array([-1j / 3.0, -0.5, 1.0 / 6.0, -1.0 / 18.0], dtype=complex),
}


@dataclass(frozen=True)
class CoefficientVector:
    """Expansion coefficients being estimated (real for n=2, complex for n=3)."""

    n: int
    values: np.ndarray
    n_bar: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        expected = 3 if self.n == 2 else 4
        if vals.shape != (expected,):
            raise InvalidParameterError(
                f"order {self.n} takes {expected} coefficients, got shape {vals.shape}"
            )
        object.__setattr__(self, "values", vals)

    @property
    def real_values(self) -> np.ndarray:
        return self.values.real.copy()


@dataclass(frozen=True)
class TermBasis:
    """Ordered term functions f_j(xi, r, theta); the constant 1 is implicit."""

    n: int
    terms: tuple[Callable, ...]

    def matrix(self, xi, r, theta) -> np.ndarray:
        """Stack of term values, shape (npoints, nterms)."""
        xi = np.atleast_1d(np.asarray(xi, dtype=complex))
        r = np.broadcast_to(np.asarray(r, dtype=float), xi.shape)
        return np.stack([f(xi, r, theta) for f in self.terms], axis=-1)


def _re_pair(xi, theta):
    return np.real(xi**2 * np.exp(-1j * theta))


def _im_triple(xi, theta):
    return np.imag(xi**3 * np.exp(-1j * theta))


def basis_n2() -> TermBasis:
    """Second-order terms: r Re{xi^2 e^-it}, r^2 |xi|^2, r^2 (Re{xi^2 e^-it})^2."""
    return TermBasis(
        2,
        (
            lambda xi, r, theta: r * _re_pair(xi, theta),
            lambda xi, r, theta: r**2 * np.abs(xi) ** 2,
            lambda xi, r, theta: r**2 * _re_pair(xi, theta) ** 2,
        ),
    )


def basis_n3() -> TermBasis:
    """Third-order terms: r Im{xi^3 e^-it}, r^2 |xi|^2, r^2 |xi|^4, r^2 (Im{xi^3 e^-it})^2."""
    return TermBasis(
        3,
        (
            lambda xi, r, theta: r * _im_triple(xi, theta),
            lambda xi, r, theta: r**2 * np.abs(xi) ** 2,
            lambda xi, r, theta: r**2 * np.abs(xi) ** 4,
            lambda xi, r, theta: r**2 * _im_triple(xi, theta) ** 2,
        ),
    )


def basis(n: int) -> TermBasis:
    if n == 2:
        return basis_n2()
    if n == 3:
        return basis_n3()
    raise UnsupportedOrderError(f"no term basis for order {n}")


def truth_coefficients(n: int, n_bar: float = 0.0) -> CoefficientVector:
    """Exact coefficient values; thermal scaling implemented for n=2 only."""
    if n not in TruthTable:
        raise UnsupportedOrderError(f"no exact coefficients for order {n}")
    if n_bar < 0:
        raise InvalidParameterError("mean occupation must be non-negative")
    if n_bar > 0:
        if n != 2:
            raise UnsupportedOrderError("thermal coefficients only derived for order 2")
        g = 1.0 + 2.0 * n_bar
        vals = np.array([-g, -g, 0.5 * g**2], dtype=complex)
        return CoefficientVector(2, vals, n_bar=n_bar)
    return CoefficientVector(n, TruthTable[n].copy(), n_bar=0.0)


def clip_model_value(n: int, value: np.ndarray) -> np.ndarray:
    """Clip of the model value: [0,1] for n=2, [-1,1] per part for n=3.

    Applied to the full truncated characteristic function (series times
    free Gaussian), which keeps the Born probabilities well defined
    without distorting directions where the series ratio exceeds one.
    """
    if n == 2:
        return np.clip(np.real(value), 0.0, 1.0)
    return np.clip(np.real(value), -1.0, 1.0) + 1j * np.clip(np.imag(value), -1.0, 1.0)


def eval_model(n: int, theta, xi, r: float, phase: float = 0.0,
               n_bar: float = 0.0, c_h: float = 0.0):
    """Truncated-model characteristic function at one or many xi values.

    The heating substitution xi -> xi + c_h xi^2 is applied before both the
    basis terms and the free Gaussian factor; the product of the series
    bracket and chi0^(1+2 n_bar) is clipped at the end.
    """
    values = theta.values if isinstance(theta, CoefficientVector) else np.asarray(theta, dtype=complex)
    if isinstance(xi, charfunc.PhasePoint):
        xi = xi.xi
    xi_in = np.asarray(xi, dtype=complex)
    scalar = xi_in.ndim == 0
    xi_arr = np.atleast_1d(xi_in)
    xi_p = charfunc.heated_xi_values(xi_arr, c_h)
    b = basis(n).matrix(xi_p, r, phase)
    bracket = 1.0 + b @ values
    chi0 = np.exp(-0.5 * (1.0 + 2.0 * n_bar) * np.abs(xi_p) ** 2)
    out = clip_model_value(n, bracket * chi0)
    if scalar:
        return complex(out[0]) if n == 3 else float(np.real(out[0]))
    return out


def truncation_residual(n: int, r: float, xi_grid, n_bar: float = 0.0,
                        cutoff: int = fockspace.DEFAULT_CUTOFF) -> float:
    """Max gap between the truncated model at exact coefficients and the oracle.

    The oracle is the closed form for n=2 (thermal closed form when
    n_bar > 0) and the Fock-space numeric for n=3.
    """
    xi_grid = np.asarray(xi_grid, dtype=complex)
    theta = truth_coefficients(n, n_bar)
    model = eval_model(n, theta, xi_grid, r, 0.0, n_bar=n_bar)
    spec = charfunc.SqueezeSpec(n=n, r=r, theta=0.0)
    if n == 2:
        oracle = charfunc.chi_thermal_squeezed_exact(xi_grid, spec, n_bar) if n_bar > 0 \
            else charfunc.chi_squeezed_exact(xi_grid, spec)
    else:
        if n_bar > 0:
            raise UnsupportedOrderError("thermal oracle only available for order 2")
        rho = fockspace.vacuum_state(cutoff).to_density()
        oracle = charfunc.chi_numeric_grid(rho, spec, xi_grid)
    return float(np.max(np.abs(oracle - model)))
