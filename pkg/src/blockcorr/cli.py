"""Command-line front end.

Exit codes: 0 success, 1 check or verdict failure, 2 usage or input error,
3 numerical failure.  Flag names are listed in docs/cli.md.
"""
from __future__ import annotations

import argparse
import copy
import csv
import difflib
import json
import os
import sys
import time

import numpy as np

from . import __version__, detequiv, harness, mplaw
from .errors import (
    DimensionError,
    DomainError,
    NoConvergence,
    NonPositiveVariance,
    NotPositiveDefinite,
    ParseError,
    PositivityError,
    SingularBlockError,
)
from .sampling import eigen_stats, sample_block_corr, sq_dev_trace
from .tsmodel import CovarianceModel, Ensemble, ModelBank, sample_ensemble

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

SUBCOMMANDS = ("simulate", "detequiv", "histogram", "error-curves", "mean-identity", "test", "selfcheck")

DEFAULTS = {
    "simulate": {"M": 8, "N": 256, "L": 4, "rho": 0.5, "bank": None, "seed": 0, "reps": 1},
    "detequiv": {"M": 8, "N": 64, "L": 4, "rho": 0.5, "bank": None, "eta": 0.01, "n_x": 200,
                 "tol": 1e-10, "max_iter": 2000, "seed": 0, "reps": 1},
    "histogram": {"M": 80, "N": 600, "L": 10, "rho": 0.5, "bins": None, "tag": None, "seed": 0, "reps": 20},
    "error-curves": {"c_star": 0.5, "N_list": [600], "beta_list": [0.2, 0.3, 0.4, 0.5, 0.6, 0.7],
                     "rho": 0.5, "statistic": "sq_dev", "seed": 0, "reps": 200},
    "mean-identity": {"M": 16, "N": 512, "L": 8, "rho": 0.5, "z_max": 4.0, "seed": 0, "reps": 2000},
    "test": {"data": None, "L": None, "alpha": 0.1, "format": "complex", "bank": None},
    "selfcheck": {},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        if "invalid choice" in message:
            bad = message.split("invalid choice: ")[1].split(" ")[0].strip("'")
            close = difflib.get_close_matches(bad, SUBCOMMANDS, n=1)
            if close:
                message += f"\ndid you mean '{close[0]}'?"
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _global_flags(p, suppress):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=d, help="base RNG seed")
    p.add_argument("--reps", type=int, default=d, help="Monte-Carlo replications")
    p.add_argument("--out", default=d, help="output directory")
    p.add_argument("--threads", type=int, default=d, help="worker threads for replications")
    p.add_argument("--config", default=d, help="JSON config file")
    p.add_argument("--set", action="append", default=argparse.SUPPRESS if suppress else [],
                   metavar="KEY=VALUE", help="override a config key (dotted paths allowed)")


def build_parser():
    parser = _Parser(prog="blockcorr", description="Block correlation matrices of high-dimensional time series.")
    parser.add_argument("--version", action="version", version=f"blockcorr {__version__}")
    _global_flags(parser, suppress=False)
    parent = argparse.ArgumentParser(add_help=False)
    _global_flags(parent, suppress=True)
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}", parser_class=_Parser)

    def dims(p, *names):
        for n in names:
            p.add_argument(f"--{n}", type=int, default=argparse.SUPPRESS)

    p = sub.add_parser("simulate", parents=[parent], help="draw an ensemble and its spectral statistics")
    dims(p, "M", "N", "L")
    p.add_argument("--rho", type=complex, default=argparse.SUPPRESS)
    p.add_argument("--bank", default=argparse.SUPPRESS, help="model bank JSON file")

    p = sub.add_parser("detequiv", parents=[parent], help="solve the canonical equations and report mu_N")
    dims(p, "M", "N", "L")
    p.add_argument("--rho", type=complex, default=argparse.SUPPRESS)
    p.add_argument("--bank", default=argparse.SUPPRESS)
    p.add_argument("--eta", type=float, default=argparse.SUPPRESS)

    p = sub.add_parser("histogram", parents=[parent], help="pooled eigenvalue histogram against MP")
    dims(p, "M", "N", "L")
    p.add_argument("--rho", type=complex, default=argparse.SUPPRESS)
    p.add_argument("--bins", type=int, default=argparse.SUPPRESS)

    p = sub.add_parser("error-curves", parents=[parent], help="error decomposition against beta")
    p.add_argument("--c-star", dest="c_star", type=float, default=argparse.SUPPRESS)
    p.add_argument("--N-list", dest="N_list", type=int, nargs="+", default=argparse.SUPPRESS)
    p.add_argument("--beta-list", dest="beta_list", type=float, nargs="+", default=argparse.SUPPRESS)
    p.add_argument("--rho", type=complex, default=argparse.SUPPRESS)

    p = sub.add_parser("mean-identity", parents=[parent], help="Monte-Carlo check of the exact-mean identity")
    dims(p, "M", "N", "L")
    p.add_argument("--rho", type=complex, default=argparse.SUPPRESS)
    p.add_argument("--z-max", dest="z_max", type=float, default=argparse.SUPPRESS)

    p = sub.add_parser("test", parents=[parent], help="uncorrelatedness diagnostic on user data")
    p.add_argument("data", help="CSV file, one series per row")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--alpha", type=float, default=argparse.SUPPRESS, help="threshold on the relative deviation")
    p.add_argument("--format", choices=("complex", "pairs"), default=argparse.SUPPRESS)
    p.add_argument("--bank", default=argparse.SUPPRESS, help="model bank JSON for the mu_N reference")

    p = sub.add_parser("selfcheck", parents=[parent], help="fast invariant suite")
    p.add_argument("--corrupt-r", dest="corrupt_r", action="store_true", help=argparse.SUPPRESS)
    return parser


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_dotted(cfg, key, value, allowed):
    parts = key.split(".")
    if parts[0] not in allowed:
        raise UsageError(f"unknown config key {parts[0]!r}; allowed: {sorted(allowed)}")
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            node[p] = {}
        node = node[p]
    node[parts[-1]] = value


def resolve_config(command, args):
    """Defaults < --config file < subcommand flags and globals < --set overrides."""
    cfg = copy.deepcopy(DEFAULTS[command])
    allowed = set(cfg)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        for k, v in doc.items():
            _set_dotted(cfg, k, v, allowed)
    ns = vars(args)
    for k in allowed:
        if k in ns and ns[k] is not None and k not in ("bank",) or (k == "bank" and ns.get("bank")):
            v = ns[k]
            cfg[k] = [v.real, v.imag] if isinstance(v, complex) else v
    for item in ns.get("set") or []:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        _set_dotted(cfg, k.strip(), _parse_value(v), allowed)
    return cfg


def _rho(cfg):
    r = cfg["rho"]
    return complex(*r) if isinstance(r, (list, tuple)) else complex(r)


def _bank(cfg, M=None):
    src = cfg.get("bank")
    if src is None:
        rho = _rho(cfg)
        model = CovarianceModel.white() if rho == 0 else CovarianceModel.ar1(rho)
        return ModelBank.repeat(model, int(cfg["M"] if M is None else M))
    if isinstance(src, dict):
        return ModelBank.from_dict(src)
    try:
        with open(src) as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read bank file {src}: {exc}") from exc
    return ModelBank.from_json(text)


def _out(args, command):
    return getattr(args, "out", None) or os.path.join("blockcorr-out", command)


def format_complex(z):
    return f"{z.real!r}{z.imag:+.17g}j"


def write_data_csv(path, data):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in data:
            w.writerow([format_complex(complex(v)) for v in row])


def read_data_csv(path, fmt="complex"):
    """Read an ``M x n`` complex sample array.

    ``fmt="complex"`` expects one ``re+imj`` value per cell (plain reals allowed);
    ``fmt="pairs"`` expects ``re,im`` column pairs.
    """
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise ParseError(f"cannot read data file {path}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: no data rows")
    width = len(rows[0])
    out = []
    for i, r in enumerate(rows):
        if len(r) != width:
            raise ParseError(f"{path}: row {i + 1} has {len(r)} columns, expected {width}")
        try:
            if fmt == "pairs":
                if width % 2:
                    raise ParseError(f"{path}: pairs format needs an even number of columns")
                vals = [complex(float(r[k]), float(r[k + 1])) for k in range(0, width, 2)]
            else:
                vals = [complex(c.strip().replace(" ", "")) for c in r]
        except ValueError as exc:
            raise ParseError(f"{path}: row {i + 1}: {exc}") from exc
        out.append(vals)
    return np.array(out, dtype=complex)


def cmd_simulate(cfg, args):
    bank = _bank(cfg)
    M, N, L = bank.M, int(cfg["N"]), int(cfg["L"])
    outdir = _out(args, "simulate")
    os.makedirs(outdir, exist_ok=True)
    results = []
    for rep in range(int(cfg["reps"])):
        ens = sample_ensemble(bank, N, L, int(cfg["seed"]), rep=rep)
        stats = eigen_stats(sample_block_corr(ens), ("sq_dev", "mean"), N=N)
        suffix = "" if cfg["reps"] == 1 else f"_{rep}"
        write_data_csv(os.path.join(outdir, f"data{suffix}.csv"), ens.data)
        with open(os.path.join(outdir, f"stats{suffix}.json"), "w") as fh:
            fh.write(stats.to_json())
        results.append({"rep": rep, "lss": stats.lss})
    harness.write_manifest(outdir, "simulate", {**cfg, "bank": bank.to_dict()}, {"replications": results})
    for r in results:
        print(f"rep {r['rep']}: sq_dev={r['lss']['sq_dev']:.6g} (MP reference {M * L / N:.6g})")
    return EXIT_OK


def cmd_detequiv(cfg, args):
    bank = _bank(cfg)
    M, N, L = bank.M, int(cfg["N"]), int(cfg["L"])
    rep = detequiv.detequiv_report(bank, L, N, tol=float(cfg["tol"]), max_iter=int(cfg["max_iter"]))
    law = mplaw.MPLaw(M * L / N)
    lo, hi = law.edges
    x = np.linspace(max(0.0, lo - 0.5), hi + 0.5, int(cfg["n_x"]))
    eta = float(cfg["eta"])
    dens = detequiv.density_mu_N(bank, M, L, N, x, eta, max_iter=int(cfg["max_iter"]))
    dens_mp = np.imag(mplaw.stieltjes_t(law, x + 1j * eta)) / np.pi
    outdir = _out(args, "detequiv")
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "detequiv.json"), "w") as fh:
        fh.write(rep.to_json(indent=2))
    detequiv.write_density_csv(os.path.join(outdir, "density.csv"), x, dens, dens_mp)
    harness.write_manifest(outdir, "detequiv", {**cfg, "bank": bank.to_dict()}, rep.to_dict())
    print(f"c_N={rep.mp_sq_dev:.6g}  int (lam-1)^2 dmu_N={rep.sq_dev_integral:.6g}  correction={rep.correction:.3e}")
    print(f"sup |(1/ML) Tr T - t| on the report grid: {rep.gap.max():.3e}")
    return EXIT_OK


def cmd_histogram(cfg, args):
    outdir = _out(args, "histogram")
    res = harness.run_histogram(int(cfg["M"]), int(cfg["N"]), int(cfg["L"]), rho=_rho(cfg),
                                reps=int(cfg["reps"]), bins=cfg["bins"], seed=int(cfg["seed"]),
                                threads=args.threads or 1, outputs=outdir, tag=cfg["tag"])
    print(f"c_N={res.c:.4g}  KS distance={res.ks:.4f}  dropped={res.dropped}")
    return EXIT_OK


def cmd_error_curves(cfg, args):
    conf = harness.ExperimentConfig(
        c_star=float(cfg["c_star"]), N_list=[int(n) for n in cfg["N_list"]],
        beta_list=[float(b) for b in cfg["beta_list"]], rho=_rho(cfg), reps=int(cfg["reps"]),
        seed=int(cfg["seed"]), statistic=cfg["statistic"], outputs=_out(args, "error-curves"),
    )
    curves = harness.run_error_curves(conf, threads=args.threads or 1)
    print("beta      N     M    L   err_total    err1        err2")
    for c in curves.cells:
        print(f"{c.beta:<6.3g} {c.N:5d} {c.M:5d} {c.L:4d}  {c.err_total:.4e}  {c.err1:.4e}  {c.err2:.4e}")
    for N in sorted({c.N for c in curves.cells}):
        x = harness.crossover_estimate(curves, N)
        print(f"N={N}: crossover " + ("none" if x is None else f"{x.beta:.3f} in {x.bracket}"))
    return EXIT_OK


def cmd_mean_identity(cfg, args):
    rep = harness.run_mean_identity(int(cfg["M"]), int(cfg["L"]), int(cfg["N"]), rho=_rho(cfg),
                                    reps=int(cfg["reps"]), seed=int(cfg["seed"]), threads=args.threads or 1)
    outdir = _out(args, "mean-identity")
    harness.write_manifest(outdir, "mean-identity", cfg, rep.to_dict())
    caveat = "  (single replication: no standard error)" if rep.single_rep else ""
    print(f"MC mean={rep.mc_mean:.6g} +- {rep.stderr:.2g}  exact={rep.exact:.6g}  z={rep.z_score:.3f}{caveat}")
    return EXIT_OK if rep.single_rep or abs(rep.z_score) <= float(cfg["z_max"]) else EXIT_FAIL


def cmd_test(cfg, args):
    """Compare the sq_dev statistic of user data with its MP (and optionally mu_N) reference."""
    data = read_data_csv(cfg["data"], cfg["format"])
    L = int(cfg["L"])
    if L < 1:
        raise DimensionError("L must be >= 1")
    M, n = data.shape
    N = n - L + 1
    if N <= 0:
        raise DimensionError(f"{n} samples per series leave N={N} lag vectors at L={L}")
    ens = Ensemble(data, M, N, L, seed=0)
    stat = sq_dev_trace(sample_block_corr(ens))
    c = M * L / N
    report = {"dims": [M, N, L], "statistic": stat, "mp_reference": c}
    ref = c
    if cfg.get("bank") is not None:
        bank = _bank(cfg)
        if bank.M != M:
            raise DimensionError(f"bank has {bank.M} models but the data has {M} series")
        value, _, _ = detequiv.sq_dev_integral(bank, M, L, N)
        report["mu_N_reference"] = value
        ref = value
    deviation = abs(stat - ref) / ref
    verdict = "consistent-with-H0" if deviation <= float(cfg["alpha"]) else "inconsistent-with-H0"
    report.update({"relative_deviation": deviation, "alpha": float(cfg["alpha"]), "verdict": verdict})
    if getattr(args, "out", None):
        harness.write_manifest(args.out, "test", cfg, report)
    print(json.dumps(report, indent=2))
    return EXIT_OK if verdict == "consistent-with-H0" else EXIT_FAIL


def selfcheck_rows(corrupt_r=False):
    """Run the fast invariant subset; returns ``[(name, ok, detail)]``."""
    from . import matfun, szego, toeplitz
    from .tsmodel import toeplitz_covariance

    rng = np.random.default_rng(12345)
    rows = []

    def check(name, value, tol):
        rows.append((name, bool(value <= tol), f"{value:.2e} <= {tol:.0e}"))

    model = CovarianceModel.ar1(0.5)
    bank = ModelBank([model, CovarianceModel.ar1(0.3 + 0.4j), CovarianceModel.white()])
    M, L, N = 3, 4, 7
    check("psi_m(I) = R", np.abs(toeplitz.psi_m(model, np.eye(5), 6) - toeplitz_covariance(model, 6)).max(), 1e-12)
    A = rng.standard_normal((M * L, M * L)) + 1j * rng.standard_normal((M * L, M * L))
    B = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    lhs = np.trace(toeplitz.psi_bar(bank, A, N) @ B) / N
    rhs = np.trace(A @ np.asarray(toeplitz.psi_block(bank, B, L))) / (M * L)
    check("duality of Psi and Psi-bar", abs(lhs - rhs) / abs(rhs), 1e-10)

    lev_model = CovarianceModel.custom([1.0, 0.5 + 1e-3, 0.25, 0.125]) if corrupt_r else model
    chain = szego.levinson(lev_model, 8)
    worst = max(np.abs(chain.predictor(l) - szego.yule_walker_dense(model, l)[0]).max() for l in range(1, 9))
    check("Levinson = Yule-Walker", worst, 1e-9)
    nu = np.arange(64) / 64
    q1, q2 = szego.quad_form_identity(model, 16, nu), szego.quad_form_dense(model, 16, nu)
    check("Szego quadratic-form identity", np.max(np.abs(q1 - q2) / q2), 1e-9)
    rep = szego.error_matrix(ModelBank.repeat(model, 4), 16, 64)
    check("Tr E_N = 0", abs(rep.trace_E) / rep.N, 1e-8)

    law = mplaw.MPLaw(0.5)
    zs = np.array([-1 + 0.05j, 0.5 + 0.05j, 2 + 0.5j, 4 + 1j])
    t = mplaw.stieltjes_t(law, zs)
    check("MP fixed-point residual", np.max(mplaw.fixed_point_residual(law, zs, t)), 1e-12)
    check("MP Im t >= 0", max(0.0, -np.min(t.imag)), 0.0)
    check("MP Im(z t) >= 0", max(0.0, -np.min((zs * t).imag)), 0.0)

    white = ModelBank.repeat(CovarianceModel.white(), 4)
    worst = 0.0
    for z in zs:
        pair = detequiv.solve_canonical(white, 4, 4, 32, z)
        T = pair.T
        tz = mplaw.stieltjes_t(mplaw.MPLaw(0.5), z)
        worst = max(worst, np.linalg.norm(T - tz * np.eye(16)) / np.linalg.norm(T))
    check("white bank reduces to MP", worst, 1e-10)

    X = rng.standard_normal((4, 4))
    check("D at identity is X/2", np.abs(matfun.d_operator(np.eye(4), X) - X / 2).max(), 1e-14)
    return rows


def cmd_selfcheck(cfg, args):
    t0 = time.perf_counter()
    rows = selfcheck_rows(corrupt_r=getattr(args, "corrupt_r", False))
    width = max(len(r[0]) for r in rows)
    for name, ok, detail in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
    n_fail = sum(not ok for _, ok, _ in rows)
    print(f"{len(rows) - n_fail}/{len(rows)} checks passed in {time.perf_counter() - t0:.2f} s")
    return EXIT_OK if n_fail == 0 else EXIT_FAIL


HANDLERS = {
    "simulate": cmd_simulate, "detequiv": cmd_detequiv, "histogram": cmd_histogram,
    "error-curves": cmd_error_curves, "mean-identity": cmd_mean_identity, "test": cmd_test,
    "selfcheck": cmd_selfcheck,
}


def main(argv=None):
    """Parse ``argv``, run the subcommand and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE
    try:
        cfg = resolve_config(args.command, args)
        return HANDLERS[args.command](cfg, args)
    except UsageError as exc:
        print(f"blockcorr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, DimensionError) as exc:
        print(f"blockcorr: input error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NoConvergence, SingularBlockError, NotPositiveDefinite, NonPositiveVariance, PositivityError) as exc:
        print(f"blockcorr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DomainError, ValueError, TypeError, KeyError) as exc:
        print(f"blockcorr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
