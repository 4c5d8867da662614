"""Coefficient recovery from shot records.

Maximum-likelihood and weighted least-squares fits of the truncated
characteristic-function models, Fisher-information covariance, linearized
systematic-bias propagation, total-error sweeps over grid designs, and
zero-noise extrapolation over calibrated thermal occupations.

Parameters are real under the hood: order-2 models carry 3 real
coefficients (plus an optional heating parameter), order-3 models are
split into independent real and imaginary subproblems, one per Pauli
basis, which is exact because the joint cost is the sum of the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from . import fockspace, sampler, series
from .series import CoefficientVector
from .errors import (
    DatasetError,
    InvalidParameterError,
    NonConvergenceError,
    RankDeficiencyError,
    UnsupportedOrderError,
)
from .sampler import MeasurementPoint, ShotRecord

# Probability floor inside logs; the clip makes p = 0 or 1 reachable.
EPS_P = 1e-9
# Exit test on the gradient, relative to the cost scale.
GRAD_RTOL = 1e-8


@dataclass(frozen=True)
class ModelSpec:
    """Which truncated model is being fitted."""

    n: int
    n_bar: float = 0.0
    heating: bool = False

    def __post_init__(self):
        if self.n not in (2, 3):
            raise UnsupportedOrderError(f"estimation supports orders 2 and 3, got {self.n}")
        if self.n_bar < 0:
            raise InvalidParameterError("mean occupation must be non-negative")
        if self.heating and self.n != 2:
            raise UnsupportedOrderError("heated model is only defined for order 2")
        if self.n_bar > 0 and self.n != 2:
            raise UnsupportedOrderError("thermal model is only defined for order 2")

    @property
    def nu(self) -> float:
        return 1.0 + 2.0 * self.n_bar

    @property
    def n_coeffs(self) -> int:
        return 3 if self.n == 2 else 4


@dataclass
class FitProblem:
    """Dataset plus model and cost selection."""

    model: ModelSpec
    records: list[ShotRecord]
    theta0: np.ndarray | None = None
    cost: str = "ls"

    def __post_init__(self):
        if not self.records:
            raise DatasetError("fit problem needs a non-empty dataset")
        if self.cost not in ("ls", "ml"):
            raise InvalidParameterError(f"cost must be 'ls' or 'ml', got {self.cost!r}")
        bases = {rec.basis for rec in self.records}
        needed = set(sampler.bases_for_order(self.model.n))
        if not needed <= bases:
            raise DatasetError(f"model order {self.model.n} needs bases {sorted(needed)}, "
                               f"dataset has {sorted(bases)}")


@dataclass
class EstimationReport:
    """Fit outcome: coefficients, covariance, error budget, diagnostics."""

    model: ModelSpec
    coefficients: CoefficientVector
    covariance: np.ndarray
    std: np.ndarray
    c_h: float | None = None
    c_h_std: float | None = None
    bias_sys: np.ndarray | None = None
    mse: np.ndarray | None = None
    rmse: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def coefficient_names(self) -> list[str]:
        names = [f"c{j + 1}" for j in range(len(self.coefficients.values))]
        if self.c_h is not None:
            names.append("c_h")
        return names


# ---------------------------------------------------------------------------
# Subproblems: one clipped linear model per Pauli basis component
# ---------------------------------------------------------------------------


@dataclass
class _Subproblem:
    """One basis component of the model with its measurement rows."""

    n: int
    offset: float            # 1 for the real part, 0 for the imaginary part
    lo: float
    hi: float
    nu: float
    xi: np.ndarray           # complex displacements
    r: np.ndarray
    phase: np.ndarray        # squeeze phase per row
    shots: np.ndarray
    freq: np.ndarray         # empirical +1 frequency per row

    def model_probability(self, theta: np.ndarray, c_h: float = 0.0,
                          with_ch_grad: bool = False):
        """p(+1), dp/dtheta, and optionally dp/dc_h at real parameters.

        The clip acts on the model value (series bracket times the free
        Gaussian); saturated points carry zero Jacobian rows.
        """
        xi2 = self.xi * self.xi
        xi_p = self.xi + c_h * xi2
        b = _basis_values(self.n, xi_p, self.r, self.phase)
        bracket = self.offset + b @ theta
        chi0 = np.exp(-0.5 * self.nu * np.abs(xi_p) ** 2)
        value = bracket * chi0
        interior = (value > self.lo) & (value < self.hi)
        clipped = np.clip(value, self.lo, self.hi)
        p = 0.5 * (1.0 + clipped)
        dp = 0.5 * chi0[:, None] * b * interior[:, None]
        if not with_ch_grad:
            return p, dp, None
        db = _basis_ch_derivative(self.n, xi_p, xi2, self.r, self.phase)
        dchi0 = -self.nu * np.real(np.conj(xi_p) * xi2) * chi0
        dbracket = db @ theta
        dp_ch = 0.5 * (bracket * dchi0 + chi0 * dbracket) * interior
        return p, dp, dp_ch

    def sigma2(self) -> np.ndarray:
        """LS weights: empirical binomial variance with a 1/(4N^2) floor."""
        raw = self.freq * (1.0 - self.freq) / self.shots
        return np.maximum(raw, 1.0 / (4.0 * self.shots.astype(float) ** 2))


def _basis_values(n: int, xi: np.ndarray, r: np.ndarray, phase: np.ndarray) -> np.ndarray:
    w = np.exp(-1j * phase)
    if n == 2:
        re2 = np.real(xi * xi * w)
        return np.stack([r * re2, r**2 * np.abs(xi) ** 2, r**2 * re2**2], axis=-1)
    im3 = np.imag(xi**3 * w)
    a2 = np.abs(xi) ** 2
    return np.stack([r * im3, r**2 * a2, r**2 * a2**2, r**2 * im3**2], axis=-1)


def _basis_ch_derivative(n: int, xi_p: np.ndarray, xi2: np.ndarray,
                         r: np.ndarray, phase: np.ndarray) -> np.ndarray:
    """d f_j / d c_h through xi' = xi + c_h xi^2 (order 2 only)."""
    if n != 2:
        raise UnsupportedOrderError("heating gradient only defined for order 2")
    w = np.exp(-1j * phase)
    re2 = np.real(xi_p * xi_p * w)
    dre2 = np.real(2.0 * xi_p * xi2 * w)
    dabs2 = 2.0 * np.real(np.conj(xi_p) * xi2)
    return np.stack([r * dre2, r**2 * dabs2, 2.0 * r**2 * re2 * dre2], axis=-1)


def _records_to_subproblem(model: ModelSpec, records: Sequence[ShotRecord],
                           basis: str, offset: float, lo: float, hi: float) -> _Subproblem:
    rows = [rec for rec in records if rec.basis == basis]
    if not rows:
        raise DatasetError(f"no records in basis {basis!r}")
    return _Subproblem(
        n=model.n, offset=offset, lo=lo, hi=hi, nu=model.nu,
        xi=np.array([rec.point.xi for rec in rows], dtype=complex),
        r=np.array([rec.point.r for rec in rows], dtype=float),
        phase=np.array([rec.point.theta for rec in rows], dtype=float),
        shots=np.array([rec.shots for rec in rows], dtype=int),
        freq=np.array([rec.frequency for rec in rows], dtype=float),
    )


def _points_to_subproblem(model: ModelSpec, points: Sequence[MeasurementPoint],
                          shots: np.ndarray, basis: str, offset: float,
                          lo: float, hi: float,
                          freq: np.ndarray | None = None) -> _Subproblem:
    return _Subproblem(
        n=model.n, offset=offset, lo=lo, hi=hi, nu=model.nu,
        xi=np.array([p.xi for p in points], dtype=complex),
        r=np.array([p.r for p in points], dtype=float),
        phase=np.array([p.theta for p in points], dtype=float),
        shots=np.asarray(shots, dtype=int),
        freq=np.zeros(len(points)) if freq is None else np.asarray(freq, dtype=float),
    )


def _subproblem_layout(model: ModelSpec):
    """(basis, offset, lo, hi) per independent fit component."""
    if model.n == 2:
        return [("x", 1.0, 0.0, 1.0)]
    return [("x", 1.0, -1.0, 1.0), ("y", 0.0, -1.0, 1.0)]


# ---------------------------------------------------------------------------
# Cost functions
# ---------------------------------------------------------------------------


def _ls_cost_grad(sub: _Subproblem, theta: np.ndarray, c_h: float | None):
    with_ch = c_h is not None
    p, dp, dp_ch = sub.model_probability(theta, c_h or 0.0, with_ch_grad=with_ch)
    sigma = np.sqrt(sub.sigma2())
    res = (p - sub.freq) / sigma
    jac = dp / sigma[:, None]
    if with_ch:
        jac = np.hstack([jac, (dp_ch / sigma)[:, None]])
    return res, jac


def _ml_cost_grad(sub: _Subproblem, theta: np.ndarray, c_h: float | None):
    with_ch = c_h is not None
    p, dp, dp_ch = sub.model_probability(theta, c_h or 0.0, with_ch_grad=with_ch)
    p_safe = np.clip(p, EPS_P, 1.0 - EPS_P)
    cost = -np.sum(sub.shots * (sub.freq * np.log(p_safe)
                                + (1.0 - sub.freq) * np.log1p(-p_safe)))
    w = -sub.shots * (sub.freq / p_safe - (1.0 - sub.freq) / (1.0 - p_safe))
    grad = dp.T @ w
    if with_ch:
        grad = np.append(grad, np.dot(dp_ch, w))
    return float(cost), grad


def _pack_theta(model: ModelSpec, theta) -> list[np.ndarray]:
    """Split a CoefficientVector / complex array into per-subproblem real vectors."""
    values = theta.values if isinstance(theta, CoefficientVector) else np.asarray(theta)
    if model.n == 2:
        vec = np.real(values).astype(float)
        return [vec]
    vals = np.asarray(values, dtype=complex)
    return [vals.real.copy(), vals.imag.copy()]


def cost_ls(theta, problem: FitProblem, c_h: float | None = None) -> float:
    """Weighted least-squares cost of the model against the dataset."""
    total = 0.0
    for packed, (basis, offset, lo, hi) in zip(_pack_theta(problem.model, theta),
                                               _subproblem_layout(problem.model)):
        sub = _records_to_subproblem(problem.model, problem.records, basis, offset, lo, hi)
        res, _ = _ls_cost_grad(sub, packed, c_h)
        total += float(np.sum(res**2))
    return total


def cost_ml(theta, problem: FitProblem, c_h: float | None = None) -> float:
    """Negative log-likelihood of the dataset under the truncated model."""
    total = 0.0
    for packed, (basis, offset, lo, hi) in zip(_pack_theta(problem.model, theta),
                                               _subproblem_layout(problem.model)):
        sub = _records_to_subproblem(problem.model, problem.records, basis, offset, lo, hi)
        cost, _ = _ml_cost_grad(sub, packed, c_h)
        total += cost
    return total


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------


def _cost_grad_curvature(sub: _Subproblem, x: np.ndarray, cost: str,
                         n_coeffs: int, fit_ch: bool):
    """Cost, gradient, and Gauss-Newton curvature at packed parameters x."""
    theta = x[:n_coeffs]
    c_h = float(x[n_coeffs]) if fit_ch else None
    if cost == "ls":
        res, jac = _ls_cost_grad(sub, theta, c_h)
        return float(np.sum(res**2)), 2.0 * jac.T @ res, 2.0 * jac.T @ jac
    p, dp, dp_ch = sub.model_probability(theta, c_h or 0.0, with_ch_grad=fit_ch)
    if fit_ch:
        dp = np.hstack([dp, dp_ch[:, None]])
    p_safe = np.clip(p, EPS_P, 1.0 - EPS_P)
    cost_val = -np.sum(sub.shots * (sub.freq * np.log(p_safe)
                                    + (1.0 - sub.freq) * np.log1p(-p_safe)))
    w = -sub.shots * (sub.freq / p_safe - (1.0 - sub.freq) / (1.0 - p_safe))
    grad = dp.T @ w
    # the model is linear in theta inside the clip, so this is the exact
    # Hessian there; for c_h it is the Gauss-Newton part
    curv_w = sub.shots * (sub.freq / p_safe**2 + (1.0 - sub.freq) / (1.0 - p_safe) ** 2)
    curv = (dp * curv_w[:, None]).T @ dp
    return float(cost_val), grad, curv


def _polish(sub: _Subproblem, x: np.ndarray, cost: str, n_coeffs: int,
            fit_ch: bool, max_iter: int = 60):
    """Damped Newton refinement; exits on the gradient test or stagnation.

    The clipped model makes the cost piecewise smooth, so a minimum can sit
    on an active-set boundary where the one-sided gradient stays finite.
    Exhausting the damping ladder without any relative cost decrease then
    certifies local optimality (the cost-stationary exit).
    """
    cost_val, grad, curv = _cost_grad_curvature(sub, x, cost, n_coeffs, fit_ch)
    lam = 1e-12 * (np.trace(curv) / len(x) + 1.0)
    exit_reason = "max-iterations"
    for _ in range(max_iter):
        if np.linalg.norm(grad) <= GRAD_RTOL * (1.0 + abs(cost_val)):
            exit_reason = "gradient"
            break
        accepted = False
        for _ in range(30):
            try:
                step = np.linalg.solve(curv + lam * np.eye(len(x)), -grad)
            except np.linalg.LinAlgError:
                lam = max(lam * 10.0, 1e-8)
                continue
            trial = x + step
            trial_cost, trial_grad, trial_curv = _cost_grad_curvature(
                sub, trial, cost, n_coeffs, fit_ch)
            if trial_cost <= cost_val * (1.0 - 1e-12) - 1e-300:
                x, cost_val, grad, curv = trial, trial_cost, trial_grad, trial_curv
                lam = max(lam / 3.0, 1e-14)
                accepted = True
                break
            lam = max(lam * 10.0, 1e-10)
        if not accepted:
            exit_reason = "cost-stationary"
            break
    return x, cost_val, grad, exit_reason


def _solve_subproblem(sub: _Subproblem, n_coeffs: int, cost: str, x0: np.ndarray,
                      fit_ch: bool, center: np.ndarray) -> tuple[np.ndarray, dict]:
    """Minimize one subproblem; multistart fallback guards the clipped region."""

    def split(x):
        return (x[:n_coeffs], float(x[n_coeffs])) if fit_ch else (x, None)

    def run(x_start):
        if cost == "ls":
            def fun(x):
                th, ch = split(x)
                res, _ = _ls_cost_grad(sub, th, ch)
                return res

            def jac(x):
                th, ch = split(x)
                _, j = _ls_cost_grad(sub, th, ch)
                return j

            sol = optimize.least_squares(fun, x_start, jac=jac, method="trf",
                                         xtol=1e-14, ftol=1e-14, gtol=1e-12,
                                         max_nfev=400)
            x, cost_val, grad, reason = _polish(sub, sol.x, cost, n_coeffs, fit_ch)
            return x, cost_val, grad, reason, int(sol.nfev)

        def fun(x):
            th, ch = split(x)
            return _ml_cost_grad(sub, th, ch)

        sol = optimize.minimize(fun, x_start, jac=True, method="L-BFGS-B",
                                options={"ftol": 1e-12, "gtol": 1e-9, "maxiter": 2000})
        x, cost_val, grad, reason = _polish(sub, sol.x, cost, n_coeffs, fit_ch)
        return x, cost_val, grad, reason, int(sol.nit)

    best = None
    starts = [np.asarray(x0, dtype=float)]
    rng = np.random.default_rng(709)
    extra = [center + rng.normal(scale=0.3, size=len(x0)) for _ in range(6)]
    attempts = 0
    for start in starts + extra:
        x, cost_val, grad, reason, nit = run(start)
        attempts += 1
        if best is None or cost_val < best[1]:
            best = (x, cost_val, grad, reason, nit)
        if best[3] in ("gradient", "cost-stationary"):
            break

    x, cost_val, grad, reason, nit = best
    gnorm = float(np.linalg.norm(grad))
    diag = {"cost": cost_val, "grad_norm": gnorm, "iterations": nit,
            "starts": attempts, "exit": reason}
    if reason == "max-iterations":
        diag["best_parameters"] = x.tolist()
        raise NonConvergenceError(
            f"no convergence after {attempts} starts (gradient norm {gnorm:.3e})",
            report=diag,
        )
    return x, diag


def minimize(problem: FitProblem) -> EstimationReport:
    """Fit the model coefficients to the dataset.

    Order-3 problems are solved as independent real and imaginary
    subproblems.  The report covariance is the inverse Fisher information
    at the fitted parameters under the dataset's shot allocation.
    """
    model = problem.model
    n_coeffs = model.n_coeffs
    fit_ch = model.heating
    layout = _subproblem_layout(model)
    center = np.real(series.truth_coefficients(model.n, model.n_bar).values)

    if problem.theta0 is not None:
        packed0 = _pack_theta(model, problem.theta0)
    else:
        packed0 = [np.zeros(n_coeffs) for _ in layout]

    results = []
    diags = []
    for part_index, (basis, offset, lo, hi) in enumerate(layout):
        sub = _records_to_subproblem(model, problem.records, basis, offset, lo, hi)
        x0 = packed0[part_index]
        part_center = center if part_index == 0 else np.zeros(n_coeffs)
        if fit_ch:
            x0 = np.append(x0, 0.0)
            part_center = np.append(part_center, 0.0)
        x, diag = _solve_subproblem(sub, n_coeffs, problem.cost, x0, fit_ch, part_center)
        results.append(x)
        diags.append(diag)

    if model.n == 2:
        theta = results[0][:n_coeffs].astype(complex)
        c_h = float(results[0][n_coeffs]) if fit_ch else None
    else:
        theta = results[0][:n_coeffs] + 1j * results[1][:n_coeffs]
        c_h = None

    coeffs = CoefficientVector(model.n, theta, n_bar=model.n_bar)
    shots_by_basis = {
        basis: np.array([rec.shots for rec in problem.records if rec.basis == basis], dtype=int)
        for basis, *_ in layout
    }
    points = [rec.point for rec in problem.records if rec.basis == layout[0][0]]
    info = fisher_information(coeffs, points, shots_by_basis, c_h=c_h, model=model)
    cov = _safe_inverse(info)
    std, ch_std = _std_from_cov(model, cov, fit_ch)

    return EstimationReport(
        model=model,
        coefficients=coeffs,
        covariance=cov,
        std=std,
        c_h=c_h,
        c_h_std=ch_std,
        diagnostics={"parts": diags, "cost_kind": problem.cost,
                     "n_records": len(problem.records)},
    )


def _safe_inverse(info: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(info)
    if w[0] <= 1e-12 * max(w[-1], 1.0):
        direction = v[:, 0]
        raise RankDeficiencyError(
            f"Fisher information singular along direction {np.round(direction, 4)}",
            direction=direction,
        )
    return (v / w) @ v.T


def _std_from_cov(model: ModelSpec, cov: np.ndarray, fit_ch: bool):
    n_coeffs = model.n_coeffs
    var = np.diag(cov)
    if model.n == 2:
        std = np.sqrt(var[:n_coeffs])
        ch_std = float(np.sqrt(var[n_coeffs])) if fit_ch else None
        return std, ch_std
    std = np.sqrt(var[:n_coeffs] + var[n_coeffs:])
    return std, None


# ---------------------------------------------------------------------------
# Fisher information and systematic bias
# ---------------------------------------------------------------------------


def _coerce_allocation(shots, n_points: int, basis: str | None = None) -> np.ndarray:
    if isinstance(shots, dict):
        shots = shots[basis]
    arr = np.asarray(shots)
    if arr.ndim == 0:
        return np.full(n_points, int(arr), dtype=int)
    if len(arr) != n_points:
        raise InvalidParameterError("shot allocation length does not match grid")
    return arr.astype(int)


def fisher_information(theta: CoefficientVector, points: Sequence[MeasurementPoint],
                       shots, c_h: float | None = None,
                       model: ModelSpec | None = None,
                       check: bool = True) -> np.ndarray:
    """Total Fisher information I = sum_k N_k I_k at the given parameters.

    Real parameter ordering: the 3 (or 4) coefficient components for order
    2 (plus c_h when fitted), or [Re theta..., Im theta...] for order 3.
    Raises RankDeficiencyError naming the flat direction when singular
    (suppressed with ``check=False``).
    """
    model = model or ModelSpec(theta.n, theta.n_bar, heating=c_h is not None)
    packed = _pack_theta(model, theta)
    layout = _subproblem_layout(model)
    fit_ch = c_h is not None

    blocks = []
    for part_index, (basis, offset, lo, hi) in enumerate(layout):
        alloc = _coerce_allocation(shots, len(points), basis)
        sub = _points_to_subproblem(model, points, alloc, basis, offset, lo, hi)
        p, dp, dp_ch = sub.model_probability(packed[part_index], c_h or 0.0,
                                             with_ch_grad=fit_ch)
        if fit_ch:
            dp = np.hstack([dp, dp_ch[:, None]])
        p_safe = np.clip(p, EPS_P, 1.0 - EPS_P)
        w = alloc / (p_safe * (1.0 - p_safe))
        blocks.append((dp * w[:, None]).T @ dp)

    if model.n == 2:
        info = blocks[0]
    else:
        size = model.n_coeffs
        info = np.zeros((2 * size, 2 * size))
        info[:size, :size] = blocks[0]
        info[size:, size:] = blocks[1]

    if check:
        w_eig, v = np.linalg.eigh(info)
        if w_eig[0] <= 1e-12 * max(w_eig[-1], 1.0):
            raise RankDeficiencyError(
                f"Fisher information singular along direction {np.round(v[:, 0], 4)}",
                direction=v[:, 0],
            )
    return info


def systematic_bias(theta_star: CoefficientVector, points: Sequence[MeasurementPoint],
                    shots, cutoff: int = fockspace.DEFAULT_CUTOFF) -> np.ndarray:
    """Linearized truncation bias I^-1 F (p_exact - p_model) at theta_star.

    The exact probabilities come from the closed forms (order 2) or the
    Fock-space numerics (order 3) at the grid's own thermal occupation.
    """
    model = ModelSpec(theta_star.n, theta_star.n_bar)
    packed = _pack_theta(model, theta_star)
    layout = _subproblem_layout(model)
    chi_exact = sampler.analytic_chi_grid(points, model.n, cutoff)

    info = fisher_information(theta_star, points, shots, model=model)
    size = model.n_coeffs
    rhs = np.zeros(info.shape[0])
    for part_index, (basis, offset, lo, hi) in enumerate(layout):
        alloc = _coerce_allocation(shots, len(points), basis)
        sub = _points_to_subproblem(model, points, alloc, basis, offset, lo, hi)
        p_model, dp, _ = sub.model_probability(packed[part_index])
        comp = np.real(chi_exact) if basis == "x" else np.imag(chi_exact)
        p_exact = 0.5 * (1.0 + comp)
        p_safe = np.clip(p_model, EPS_P, 1.0 - EPS_P)
        f_mat = (dp * (alloc / (p_safe * (1.0 - p_safe)))[:, None]).T
        dp_sys = p_exact - p_model
        sl = slice(part_index * size, (part_index + 1) * size)
        rhs[sl] = f_mat @ dp_sys

    delta = np.linalg.solve(info, rhs)
    if model.n == 2:
        return delta.astype(complex)
    return delta[:size] + 1j * delta[size:]


# ---------------------------------------------------------------------------
# Grid builders
# ---------------------------------------------------------------------------


def build_grid(xi_max: float, r_max: float, d_xi: float, d_r: float,
               n_bar: float = 0.0, theta: float = 0.0,
               omega_eta: float = sampler.OMEGA_ETA_DEFAULT) -> list[MeasurementPoint]:
    """Square lattice of real displacements: xi in d_xi..xi_max, r in d_r..r_max."""
    if d_xi <= 0 or d_r <= 0:
        raise InvalidParameterError("grid spacings must be positive")
    if xi_max < d_xi or r_max < d_r:
        raise InvalidParameterError("grid maxima must reach at least one spacing")
    xis = d_xi * np.arange(1, int(round(xi_max / d_xi)) + 1)
    rs = d_r * np.arange(1, int(round(r_max / d_r)) + 1)
    return [MeasurementPoint(xi=complex(x), r=float(r), theta=theta, n_bar=n_bar,
                             omega_eta=omega_eta)
            for r in rs for x in xis]


def build_grid_complex(re_max: float, im_max: float, r_max: float,
                       n_re: int = 10, n_im: int = 10, n_r: int = 3,
                       n_bar: float = 0.0, theta: float = 0.0,
                       omega_eta: float = sampler.OMEGA_ETA_DEFAULT) -> list[MeasurementPoint]:
    """3-D grid over (Re xi, Im xi, r) for the order-3 estimator."""
    if min(n_re, n_im, n_r) < 1:
        raise InvalidParameterError("grid needs at least one point per axis")
    res = np.linspace(0.0, re_max, n_re)
    ims = np.linspace(0.0, im_max, n_im)
    rs = np.linspace(0.0, r_max, n_r)
    return [MeasurementPoint(xi=complex(x, y), r=float(r), theta=theta, n_bar=n_bar,
                             omega_eta=omega_eta)
            for r in rs for y in ims for x in res]


# ---------------------------------------------------------------------------
# Error-budget sweep and zero-noise extrapolation
# ---------------------------------------------------------------------------


@dataclass
class SweepResult:
    xi_maxes: np.ndarray
    r_maxes: np.ndarray
    rmse: np.ndarray              # shape (len(r_maxes), len(xi_maxes))
    best_xi_max: float
    best_r_max: float
    best_rmse: float


def rmse_sweep(xi_maxes: Sequence[float], r_maxes: Sequence[float], total_shots: int,
               d_xi: float = 0.02, d_r: float = 0.02, n_bar: float = 0.0,
               cutoff: int = fockspace.DEFAULT_CUTOFF) -> SweepResult:
    """Expected total error over grid designs at a fixed shot budget.

    Each cell combines the linearized systematic bias with the Fisher
    covariance: rmse = sqrt(mean_j(bias_j^2 + var_j)).
    """
    theta_star = series.truth_coefficients(2, n_bar)
    xi_maxes = np.asarray(list(xi_maxes), dtype=float)
    r_maxes = np.asarray(list(r_maxes), dtype=float)
    out = np.empty((len(r_maxes), len(xi_maxes)))
    for i, r_max in enumerate(r_maxes):
        for j, xi_max in enumerate(xi_maxes):
            points = build_grid(xi_max, r_max, d_xi, d_r, n_bar=n_bar)
            alloc = sampler.allocate_shots(len(points), total_shots)
            try:
                info = fisher_information(theta_star, points, alloc)
            except RankDeficiencyError:
                # single-r designs leave c1 and c2 exactly collinear;
                # the expected error along the flat direction is unbounded
                out[i, j] = np.inf
                continue
            cov = np.linalg.inv(info)
            bias = systematic_bias(theta_star, points, alloc, cutoff=cutoff)
            mse = np.abs(bias) ** 2 + np.diag(cov)
            out[i, j] = math.sqrt(float(np.mean(mse)))
    k = np.unravel_index(np.argmin(out), out.shape)
    return SweepResult(xi_maxes=xi_maxes, r_maxes=r_maxes, rmse=out,
                       best_xi_max=float(xi_maxes[k[1]]), best_r_max=float(r_maxes[k[0]]),
                       best_rmse=float(out[k]))


def zero_noise_extrapolate(reports: Sequence[EstimationReport],
                           n_bars: Sequence[float], degree: int = 2) -> EstimationReport:
    """Polynomial extrapolation of coefficient estimates to zero occupation.

    Fits one degree-`degree` polynomial per coefficient over the supplied
    occupations and evaluates it at zero; the reported variance follows
    from propagating the per-report variances through the evaluation
    weights, so it always exceeds the inputs.
    """
    n_bars = np.asarray(list(n_bars), dtype=float)
    if len(reports) != len(n_bars):
        raise InvalidParameterError("one occupation value per report is required")
    if len(reports) < degree + 1:
        raise InvalidParameterError(
            f"degree {degree} extrapolation needs at least {degree + 1} points")
    if len(set(np.round(n_bars, 12))) != len(n_bars):
        raise InvalidParameterError("occupation values must be distinct")

    model = reports[0].model
    n_coeffs = model.n_coeffs
    vander = np.vander(n_bars, degree + 1, increasing=True)
    # weights of the prediction at 0: e0^T (X^T X)^-1 X^T
    gram_inv = np.linalg.inv(vander.T @ vander)
    weights = gram_inv[0] @ vander.T

    values = np.stack([rep.coefficients.values for rep in reports])      # (M, J)
    variances = np.stack([rep.std**2 for rep in reports])                # (M, J)
    extrap = weights @ values
    var0 = (weights**2) @ variances
    std0 = np.sqrt(var0)

    coeffs = CoefficientVector(model.n, extrap, n_bar=0.0)
    return EstimationReport(
        model=ModelSpec(model.n, 0.0),
        coefficients=coeffs,
        covariance=np.diag(var0),
        std=std0,
        diagnostics={"method": "zero-noise extrapolation", "degree": degree,
                     "n_bars": n_bars.tolist(), "weights": weights.tolist()},
    )


# ---------------------------------------------------------------------------
# Convenience wrappers
# ---------------------------------------------------------------------------


def fit_thermal(problem: FitProblem) -> EstimationReport:
    """Order-2 fit at a known, fixed thermal occupation."""
    if problem.model.n != 2:
        raise UnsupportedOrderError("thermal fits are defined for order 2 only")
    return minimize(problem)


def fit_with_heating(problem: FitProblem) -> EstimationReport:
    """Joint order-2 fit of the coefficients and the heating parameter."""
    if not problem.model.heating:
        problem = FitProblem(ModelSpec(2, problem.model.n_bar, heating=True),
                             problem.records, problem.theta0, problem.cost)
    return minimize(problem)


def fit_exact_frequencies(points: Sequence[MeasurementPoint], model: ModelSpec,
                          shots, chi_values: np.ndarray | None = None,
                          cost: str = "ml",
                          cutoff: int = fockspace.DEFAULT_CUTOFF):
    """Fit in the infinite-shot limit, with frequencies set to the exact
    probabilities of the untruncated characteristic function.

    Isolates the systematic (truncation) part of the estimate: the result
    should sit at theta_star plus the linearized bias.
    """
    if chi_values is None:
        chi_values = sampler.analytic_chi_grid(points, model.n, cutoff)
    layout = _subproblem_layout(model)
    n_coeffs = model.n_coeffs
    center = np.real(series.truth_coefficients(model.n, model.n_bar).values)
    solution = []
    for part_index, (basis, offset, lo, hi) in enumerate(layout):
        alloc = _coerce_allocation(shots, len(points), basis)
        comp = np.real(chi_values) if basis == "x" else np.imag(chi_values)
        freq = np.clip(0.5 * (1.0 + comp), 0.0, 1.0)
        sub = _points_to_subproblem(model, points, alloc, basis, offset, lo, hi, freq=freq)
        x0 = np.zeros(n_coeffs)
        part_center = center if part_index == 0 else np.zeros(n_coeffs)
        if model.heating:
            x0 = np.append(x0, 0.0)
            part_center = np.append(part_center, 0.0)
        x, _ = _solve_subproblem(sub, n_coeffs, cost, x0, model.heating, part_center)
        solution.append(x)
    if model.n == 2:
        theta = solution[0][:n_coeffs].astype(complex)
        c_h = float(solution[0][n_coeffs]) if model.heating else None
    else:
        theta = solution[0][:n_coeffs] + 1j * solution[1][:n_coeffs]
        c_h = None
    return CoefficientVector(model.n, theta, n_bar=model.n_bar), c_h


def monte_carlo_recovery(points: Sequence[MeasurementPoint], model: ModelSpec,
                         total_shots: int, repeats: int, seed: int,
                         chi_values: np.ndarray | None = None, cost: str = "ls",
                         cutoff: int = fockspace.DEFAULT_CUTOFF,
                         theta0: np.ndarray | None = None):
    """Repeated seeded fits against freshly sampled datasets.

    Returns (thetas, c_hs): fitted coefficients of shape (repeats, J) and,
    for heated models, the fitted heating parameters (else None).  Each
    repeat draws all its counts from one child stream of `seed`, which is
    faster than the per-point streams of `generate_dataset` and equally
    reproducible.
    """
    if chi_values is None:
        chi_values = sampler.analytic_chi_grid(points, model.n, cutoff)
    bases = sampler.bases_for_order(model.n)
    n_cells = len(points) * len(bases)
    alloc = sampler.allocate_shots(n_cells, total_shots)
    alloc_by_basis = {b: alloc[k * len(points):(k + 1) * len(points)]
                      for k, b in enumerate(bases)}
    p_by_basis = {}
    for b in bases:
        comp = np.real(chi_values) if b == "x" else np.imag(chi_values)
        p_by_basis[b] = np.clip(0.5 * (1.0 + comp), 0.0, 1.0)

    layout = _subproblem_layout(model)
    n_coeffs = model.n_coeffs
    center = np.real(series.truth_coefficients(model.n, model.n_bar).values)
    thetas = np.empty((repeats, n_coeffs), dtype=complex)
    c_hs = np.empty(repeats) if model.heating else None

    for m in range(repeats):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(m,)))
        parts = []
        for part_index, (basis, offset, lo, hi) in enumerate(layout):
            counts = rng.binomial(alloc_by_basis[basis], p_by_basis[basis])
            freq = counts / alloc_by_basis[basis]
            parts.append(_points_to_subproblem(model, points, alloc_by_basis[basis],
                                               basis, offset, lo, hi, freq=freq))
        solution = []
        for part_index, sub in enumerate(parts):
            x0 = np.zeros(n_coeffs) if theta0 is None else _pack_theta(model, theta0)[part_index]
            part_center = center if part_index == 0 else np.zeros(n_coeffs)
            if model.heating:
                x0 = np.append(x0, 0.0)
                part_center = np.append(part_center, 0.0)
            x, _ = _solve_subproblem(sub, n_coeffs, cost, x0, model.heating, part_center)
            solution.append(x)
        if model.n == 2:
            thetas[m] = solution[0][:n_coeffs]
            if model.heating:
                c_hs[m] = solution[0][n_coeffs]
        else:
            thetas[m] = solution[0][:n_coeffs] + 1j * solution[1][:n_coeffs]
    return thetas, c_hs


# ---------------------------------------------------------------------------
# Report persistence
# ---------------------------------------------------------------------------


def report_rows(report: EstimationReport) -> list[dict]:
    """Per-coefficient rows for the report CSV."""
    rows = []
    values = report.coefficients.values
    bias = report.bias_sys
    mse = report.mse
    for j, name in enumerate(f"c{k + 1}" for k in range(len(values))):
        bias_j = np.nan
        if bias is not None:
            bias_j = float(np.real(bias[j])) if report.model.n == 2 else float(np.abs(bias[j]))
        mse_j = float(mse[j]) if mse is not None else np.nan
        rows.append({
            "name": name,
            "re": float(values[j].real),
            "im": float(values[j].imag),
            "std": float(report.std[j]),
            "bias_sys": bias_j,
            "mse": mse_j,
        })
    if report.c_h is not None:
        rows.append({"name": "c_h", "re": report.c_h, "im": 0.0,
                     "std": report.c_h_std if report.c_h_std is not None else np.nan,
                     "bias_sys": np.nan, "mse": np.nan})
    return rows
