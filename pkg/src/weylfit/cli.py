"""Command-line front end.

Subcommands: charfunc, simulate, estimate, sweep, extrapolate, validate.
Every run writes its fully resolved config next to the outputs; exit codes
are 0 (success), 1 (validation failure), 2 (bad input), 3 (I/O error).
"""

from __future__ import annotations

import argparse
import csv
import sys
import warnings
from pathlib import Path

import numpy as np
import yaml

from . import charfunc, config as config_mod, estimator, fockspace, sampler, series
from .errors import ConfigError, DatasetError, WeylfitError


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _write_csv(path: Path, header: list[str], rows) -> None:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    _atomic_write(path, buf.getvalue())


def _fmt(value: float) -> str:
    return np.format_float_positional(value, precision=12, unique=False,
                                      fractional=False, trim="k")


def _grid_points(cfg: config_mod.RunConfig) -> list[sampler.MeasurementPoint]:
    g, m = cfg.grid, cfg.model
    if m["n"] == 2:
        return estimator.build_grid(g["xi_max"], g["r_max"], g["d_xi"], g["d_r"],
                                    n_bar=m["n_B"],
                                    omega_eta=cfg.protocol["omega_eta"])
    return estimator.build_grid_complex(g["re_xi_max"], g["im_xi_max"], g["r_max"],
                                        n_re=g["n_re"], n_im=g["n_im"], n_r=g["n_r"],
                                        n_bar=m["n_B"],
                                        omega_eta=cfg.protocol["omega_eta"])


def _save_report(report: estimator.EstimationReport, cfg: config_mod.RunConfig,
                 path: Path, extra_meta: dict | None = None) -> None:
    rows = estimator.report_rows(report)
    header = ["name", "re", "im", "std", "bias_sys", "mse"]
    _write_csv(path, header, ([r[h] for h in header] for r in rows))
    meta = {
        "model": {"n": report.model.n, "n_B": report.model.n_bar,
                  "heating": report.model.heating},
        "rmse": report.rmse,
        "diagnostics": _plain(report.diagnostics),
        "config": cfg.as_dict(),
    }
    if extra_meta:
        meta.update(_plain(extra_meta))
    _atomic_write(path.with_suffix(".meta.yaml"), yaml.safe_dump(meta, sort_keys=True))


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def _load_report(path: Path) -> tuple[estimator.EstimationReport, dict]:
    meta = yaml.safe_load(path.with_suffix(".meta.yaml").read_text())
    model = estimator.ModelSpec(int(meta["model"]["n"]), float(meta["model"]["n_B"]),
                                bool(meta["model"]["heating"]))
    values, stds, c_h, c_h_std = [], [], None, None
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["name"] == "c_h":
                c_h = float(row["re"])
                c_h_std = float(row["std"])
            else:
                values.append(complex(float(row["re"]), float(row["im"])))
                stds.append(float(row["std"]))
    coeffs = series.CoefficientVector(model.n, np.array(values), n_bar=model.n_bar)
    report = estimator.EstimationReport(
        model=model, coefficients=coeffs, covariance=np.diag(np.array(stds) ** 2),
        std=np.array(stds), c_h=c_h, c_h_std=c_h_std,
        diagnostics=meta.get("diagnostics", {}),
    )
    return report, meta


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_charfunc(cfg: config_mod.RunConfig, args) -> int:
    n = cfg.model["n"]
    spec = charfunc.SqueezeSpec(n=n, r=args.r, theta=args.theta)
    g = cfg.grid
    axis = np.arange(-g["xi_max"], g["xi_max"] + 0.5 * g["d_xi"], g["d_xi"])
    re, im = np.meshgrid(axis, axis, indexing="ij")
    xis = re + 1j * im
    if n == 2:
        chi = charfunc.chi_thermal_squeezed_exact(xis, spec, cfg.model["n_B"]) \
            if cfg.model["n_B"] > 0 else charfunc.chi_squeezed_exact(xis, spec)
        chi = chi.astype(complex)
    else:
        rho = fockspace.thermal_state(cfg.model["n_B"], cfg.protocol["cutoff"])
        chi = charfunc.chi_numeric_grid(rho, spec, xis)
    out = cfg.out_dir / "charfunc.csv"
    rows = ([_fmt(x.real), _fmt(x.imag), _fmt(c.real), _fmt(c.imag)]
            for x, c in zip(xis.ravel(), chi.ravel()))
    _write_csv(out, ["re_xi", "im_xi", "re_chi", "im_chi"], rows)
    config_mod.write_resolved(cfg, cfg.out_dir, "charfunc")
    print(f"wrote {out}")
    return 0


def cmd_simulate(cfg: config_mod.RunConfig, args) -> int:
    points = _grid_points(cfg)
    records = sampler.generate_dataset(
        points, cfg.shots["total"], cfg.model["n"], cfg.seed,
        chi_source=args.source, allocation=cfg.shots["allocation"],
        config=cfg.protocol_config(), jobs=args.jobs,
    )
    out = cfg.out_dir / "dataset.csv"
    _atomic_write(out, sampler.dataset_to_string(records))
    config_mod.write_resolved(cfg, cfg.out_dir, "dataset")
    print(f"wrote {out} ({len(records)} records, {sum(r.shots for r in records)} shots)")
    return 0


def cmd_estimate(cfg: config_mod.RunConfig, args) -> int:
    with open(args.dataset, newline="") as fh:
        records = sampler.dataset_from_csv(fh)
    model = estimator.ModelSpec(cfg.model["n"], cfg.model["n_B"], cfg.model["heating"])
    problem = estimator.FitProblem(model, records, cost=args.cost)
    if model.heating:
        report = estimator.fit_with_heating(problem)
    elif model.n_bar > 0:
        report = estimator.fit_thermal(problem)
    else:
        report = estimator.minimize(problem)

    if not model.heating:
        first_basis = sampler.bases_for_order(model.n)[0]
        points = [r.point for r in records if r.basis == first_basis]
        shots = {b: np.array([r.shots for r in records if r.basis == b])
                 for b in sampler.bases_for_order(model.n)}
        theta_star = series.truth_coefficients(model.n, model.n_bar)
        bias = estimator.systematic_bias(theta_star, points, shots,
                                         cutoff=cfg.protocol["cutoff"])
        report.bias_sys = bias
        report.mse = np.abs(bias) ** 2 + report.std**2
        report.rmse = float(np.sqrt(np.mean(report.mse)))

    out = cfg.out_dir / "report.csv"
    _save_report(report, cfg, out, extra_meta={"dataset": str(args.dataset),
                                               "seed": cfg.seed})
    config_mod.write_resolved(cfg, cfg.out_dir, "report")
    print(f"wrote {out}")
    for row in estimator.report_rows(report):
        print(f"  {row['name']}: {row['re']:+.6f}{row['im']:+.6f}j (std {row['std']:.2e})")
    return 0


def cmd_sweep(cfg: config_mod.RunConfig, args) -> int:
    xi_maxes = [float(v) for v in args.xi_max_list.split(",")]
    r_maxes = [float(v) for v in args.r_max_list.split(",")]
    result = estimator.rmse_sweep(xi_maxes, r_maxes, cfg.shots["total"],
                                  d_xi=cfg.grid["d_xi"], d_r=cfg.grid["d_r"],
                                  n_bar=cfg.model["n_B"],
                                  cutoff=cfg.protocol["cutoff"])
    out = cfg.out_dir / "rmse_sweep.csv"
    rows = []
    for i, r_max in enumerate(result.r_maxes):
        for j, xi_max in enumerate(result.xi_maxes):
            rows.append([_fmt(xi_max), _fmt(r_max), _fmt(result.rmse[i, j])])
    _write_csv(out, ["xi_max", "r_max", "rmse"], rows)
    config_mod.write_resolved(cfg, cfg.out_dir, "rmse_sweep")
    print(f"wrote {out}")
    print(f"minimum rmse {result.best_rmse:.4f} at xi_max={result.best_xi_max}, "
          f"r_max={result.best_r_max}")
    return 0


def cmd_extrapolate(cfg: config_mod.RunConfig, args) -> int:
    reports, n_bars = [], []
    for path in args.reports:
        rep, meta = _load_report(Path(path))
        reports.append(rep)
        data_n_bar = meta.get("data_n_B")
        if data_n_bar is None:
            data_n_bar = meta.get("config", {}).get("model", {}).get("n_B")
        if data_n_bar is None:
            raise ConfigError(f"report {path} does not record its occupation")
        n_bars.append(float(data_n_bar))
    if args.n_bars:
        n_bars = [float(v) for v in args.n_bars.split(",")]
    extrapolated = estimator.zero_noise_extrapolate(reports, n_bars, degree=args.degree)
    out = cfg.out_dir / "report_extrapolated.csv"
    _save_report(extrapolated, cfg, out, extra_meta={"inputs": list(args.reports),
                                                     "n_bars": n_bars})
    config_mod.write_resolved(cfg, cfg.out_dir, "report_extrapolated")
    print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def _validate_checks(cfg: config_mod.RunConfig):
    cutoff = int(cfg.protocol["cutoff"])
    rng = np.random.default_rng(17)
    checks = []

    def check(name, fn):
        checks.append((name, fn))

    def unitarity():
        worst = 0.0
        for xi in (0.7 + 0.3j, 1.2 - 0.4j):
            u = fockspace.displacement(xi, cutoff).matrix
            worst = max(worst, float(np.max(np.abs(u.conj().T @ u - np.eye(cutoff)))))
        for n, zeta in ((2, 0.25), (3, 0.2 + 0.1j)):
            u = fockspace.generalized_squeeze(n, zeta, cutoff).matrix
            worst = max(worst, float(np.max(np.abs(u.conj().T @ u - np.eye(cutoff)))))
        return worst <= 1e-9, f"max unitarity deviation {worst:.2e} (tol 1e-9)"

    def commutator():
        # strict 1e-14 bound checked at d=30; sqrt-roundoff makes the
        # absolute deviation scale like d*eps at larger cutoffs
        d = 30
        a = fockspace.annihilation(d).matrix
        comm = a @ a.conj().T - a.conj().T @ a
        dev = float(np.max(np.abs((comm - np.eye(d))[: d - 1, : d - 1])))
        return dev <= 1e-14, f"ladder commutator deviation {dev:.2e} (tol 1e-14)"

    def trace_preservation():
        a = fockspace.annihilation(cutoff)
        n_op = fockspace.number_operator(cutoff)
        spec = fockspace.LindbladSpec(hamiltonian=((n_op, None),),
                                      jumps=((a, 50.0),))
        rho0 = fockspace.thermal_state(0.2, cutoff)
        dt = fockspace.STEP_RULE / spec.norm_bound(np.array([0.0]))
        rho = fockspace.evolve_lindblad(rho0, spec, (0.0, 5e-4), dt)
        drift = abs(np.trace(rho.matrix).real - 1.0)
        return drift <= 1e-8, f"trace drift {drift:.2e} (tol 1e-8)"

    def truncation():
        u = fockspace.displacement(1.0, cutoff)
        val = u.matrix[0, 0].real
        err = abs(val - np.exp(-0.5))
        ok = err <= 1e-6 and not u.truncation_flagged
        return ok, f"<0|D(1)|0> error {err:.2e} (tol 1e-6), guard flag {u.truncation_flagged}"

    def chi_agreement():
        spec = charfunc.SqueezeSpec(n=2, r=0.25, theta=0.0)
        rho = fockspace.vacuum_state(cutoff).to_density()
        xis = (rng.uniform(-1.5, 1.5, 24) + 1j * rng.uniform(-1.5, 1.5, 24))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            num = charfunc.chi_numeric_grid(rho, spec, xis)
        exact = charfunc.chi_squeezed_exact(xis, spec)
        gap = float(np.max(np.abs(num - exact)))
        return gap <= 1e-6, f"numeric-vs-exact gap {gap:.2e} (tol 1e-6)"

    def chi_hermiticity():
        g = rng.normal(size=(cutoff, cutoff)) + 1j * rng.normal(size=(cutoff, cutoff))
        rho_m = g @ g.conj().T
        rho = fockspace.DensityOperator(cutoff, rho_m / np.trace(rho_m))
        spec = charfunc.SqueezeSpec(n=3, r=0.2, theta=0.3)
        xis = rng.uniform(-1.0, 1.0, 8) + 1j * rng.uniform(-1.0, 1.0, 8)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            plus = charfunc.chi_numeric_grid(rho, spec, xis)
            minus = charfunc.chi_numeric_grid(rho, spec, -xis)
        dev = float(np.max(np.abs(minus - np.conj(plus))))
        bound = float(np.max(np.abs(plus)))
        ok = dev <= 1e-10 and bound <= 1 + 1e-8
        return ok, f"hermiticity deviation {dev:.2e} (tol 1e-10), max |chi| {bound:.6f}"

    def bundle_rule():
        state = fockspace.apply_unitary(fockspace.generalized_squeeze(3, 0.25, cutoff),
                                        fockspace.vacuum_state(cutoff))
        pops = np.abs(state.amplitudes) ** 2
        mask = np.arange(cutoff) % 3 != 0
        leak = float(np.max(pops[mask]))
        return leak <= 1e-12, f"off-bundle population {leak:.2e} (tol 1e-12)"

    def parity_n3():
        spec = charfunc.SqueezeSpec(n=3, r=0.25, theta=0.0)
        rho = fockspace.vacuum_state(cutoff).to_density()
        xis = rng.uniform(-1.2, 1.2, 8) + 1j * rng.uniform(-1.2, 1.2, 8)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            plus = charfunc.chi_numeric_grid(rho, spec, xis)
            minus = charfunc.chi_numeric_grid(rho, spec, -xis)
        dev_re = float(np.max(np.abs(np.real(minus) - np.real(plus))))
        dev_im = float(np.max(np.abs(np.imag(minus) + np.imag(plus))))
        ok = max(dev_re, dev_im) <= 1e-10
        return ok, f"parity deviations re {dev_re:.2e}, im {dev_im:.2e} (tol 1e-10)"

    def series_n2():
        xis = np.linspace(0.02, 0.3, 8)[None, :] * np.exp(1j * np.linspace(0, np.pi, 5))[:, None]
        worst = max(series.truncation_residual(2, r, xis) for r in (0.01, 0.03, 0.05))
        return worst <= 1e-3, f"order-2 series residual {worst:.2e} (tol 1e-3)"

    def series_n3():
        xis = np.linspace(0.05, 0.3, 5)[None, :] * np.exp(1j * np.linspace(0.2, 2.8, 4))[:, None]
        worst = max(series.truncation_residual(3, r, xis, cutoff=cutoff) for r in (0.02, 0.05))
        return worst <= 2e-3, f"order-3 series residual {worst:.2e} (tol 2e-3)"

    def protocol_analytic():
        pcfg = cfg.protocol_config()
        worst = 0.0
        for r in (0.1, 0.25):
            points = [sampler.MeasurementPoint(xi=complex(x), r=r,
                                               omega_eta=pcfg.omega_eta)
                      for x in (0.5, 1.0, 1.5)]
            chis = sampler.simulate_chi_grid(points, 2, pcfg)
            exact = sampler.analytic_chi_grid(points, 2, pcfg.cutoff)
            worst = max(worst, float(np.max(np.abs(chis - exact))))
        return worst <= 1e-3, f"protocol-vs-analytic gap {worst:.2e} (tol 1e-3)"

    def fisher_mc():
        points = estimator.build_grid(2.0, 0.78, 0.1, 0.1)
        total = 400_000
        theta_star = series.truth_coefficients(2)
        thetas, _ = estimator.monte_carlo_recovery(points, estimator.ModelSpec(2),
                                                   total, repeats=60, seed=424242)
        alloc = sampler.allocate_shots(len(points), total)
        cov = np.linalg.inv(estimator.fisher_information(theta_star, points, alloc))
        predicted = np.sqrt(np.diag(cov))
        observed = np.std(np.real(thetas), axis=0, ddof=1)
        ratio = observed / predicted
        ok = bool(np.all((ratio > 0.7) & (ratio < 1.3)))
        return ok, f"MC/Fisher std ratios {np.round(ratio, 3)} (band 0.7-1.3)"

    check("fock-unitarity", unitarity)
    check("fock-commutator", commutator)
    check("fock-trace-preservation", trace_preservation)
    check("fock-truncation", truncation)
    check("chi-agreement", chi_agreement)
    check("chi-hermiticity-bounded", chi_hermiticity)
    check("bundle-selection-rule", bundle_rule)
    check("parity-n3", parity_n3)
    check("series-residual-n2", series_n2)
    check("series-residual-n3", series_n3)
    check("protocol-vs-analytic", protocol_analytic)
    check("fisher-vs-monte-carlo", fisher_mc)
    return checks


def cmd_validate(cfg: config_mod.RunConfig, args) -> int:
    if args.dataset is not None:
        with open(args.dataset, newline="") as fh:
            sampler.dataset_from_csv(fh)
        print(f"dataset {args.dataset}: OK")

    failures = 0
    for name, fn in _validate_checks(cfg):
        try:
            ok, detail = fn()
        except WeylfitError as exc:
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        status = "PASS" if ok else "FAIL"
        if not ok:
            failures += 1
        print(f"{status} {name}: {detail}")
    if failures:
        print(f"{failures} check(s) failed")
        return 1
    print("all checks passed")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="weylfit",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=str, default=None, help="YAML config path")
    parser.add_argument("--seed", type=int, default=None, help="master RNG seed override")
    parser.add_argument("--out", type=str, default=None, help="output directory override")
    parser.add_argument("--jobs", type=int, default=1, help="worker-thread cap")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("charfunc", help="characteristic-function grid to CSV")
    p.add_argument("--r", type=float, default=0.25)
    p.add_argument("--theta", type=float, default=0.0)

    p = sub.add_parser("simulate", help="generate a shot dataset")
    p.add_argument("--source", choices=("analytic", "protocol"), default="analytic")

    p = sub.add_parser("estimate", help="fit coefficients to a dataset")
    p.add_argument("dataset", type=str)
    p.add_argument("--cost", choices=("ls", "ml"), default="ls")

    p = sub.add_parser("sweep", help="expected-error sweep over grid designs")
    p.add_argument("--xi-max-list", type=str, default="0.6,1.0,1.4,1.8,2.0,2.4")
    p.add_argument("--r-max-list", type=str, default="0.1,0.3,0.5,0.7,0.78,0.9")

    p = sub.add_parser("extrapolate", help="zero-noise extrapolation of reports")
    p.add_argument("reports", nargs="+", type=str)
    p.add_argument("--n-bars", type=str, default=None)
    p.add_argument("--degree", type=int, default=2)

    p = sub.add_parser("validate", help="run the invariant suite")
    p.add_argument("--dataset", type=str, default=None)

    return parser


COMMANDS = {
    "charfunc": cmd_charfunc,
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "sweep": cmd_sweep,
    "extrapolate": cmd_extrapolate,
    "validate": cmd_validate,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = {}
        if args.seed is not None:
            overrides["rng"] = {"seed": args.seed}
        if args.out is not None:
            overrides["output"] = {"directory": args.out}
        cfg = config_mod.load_config(args.config, overrides)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except WeylfitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
