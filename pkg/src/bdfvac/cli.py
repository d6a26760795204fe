"""Batch command-line entry point.

Subcommands: screening-table, linear-scan, scf, pair-production,
invariant-suite.  Configuration is a TOML file; results are CSV (tabular
scans) and JSON (structured summaries), always embedding the fully-resolved
configuration.  For a fixed config and seed the payload files are
byte-identical between runs; wall-clock data lives only in the
metadata.json sidecar.

Heavy numerical imports happen inside the handlers so that --threads can
cap the BLAS pool before the linear algebra libraries load.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from .config import ConfigError, RunConfig, load_config

__all__ = ["main"]

_SCHEMA_DOC = {
    "screening_table.csv": {
        "k": "momentum radius on the lattice grid (inverse Compton lengths)",
        "B_Lambda_k": "screening multiplier at radius k (continuum quadrature)",
        "U_Lambda_k": "screening defect B_Lambda(0) - B_Lambda(k)",
    },
    "linear_scan.csv": {
        "cutoff": "momentum-ball radius of the row's lattice",
        "kappa": "external coupling",
        "lambda": "gap eigenvalue cluster of the external-field operator",
        "gap_margin": "distance from the cluster to the rest of the spectrum",
        "multiplicity": "cluster size (2 for time-reversal doublets)",
    },
    "pair_scan.csv": {
        "kappa": "external coupling",
        "alpha": "interaction strength",
        "F": "energy difference of the two competing vacua",
        "lambda_ren": "gap eigenvalue at the renormalized coupling",
        "multiplicity": "crossing-cluster size",
        "deviation": "F - multiplicity * lambda_ren",
        "charge_plus": "vacuum charge at the upper Fermi level",
        "charge_minus": "vacuum charge at the lower Fermi level",
        "converged_plus": "1 when the upper solve converged",
        "converged_minus": "1 when the lower solve converged",
    },
    "scf_result.json": {
        "converged": "whether the fixed-point norm dropped below x_tol",
        "energy": "kinetic/external/direct/exchange/total breakdown (rest-mass units)",
        "residual_history": "per-iteration fixed-point increments",
        "contraction_estimate": "geometric ratio fitted to the residual history",
    },
    "critical_coupling.json": {
        "kappa_c": "coupling where F changes sign",
        "slope": "(kappa_c - kappa_c_zero) / alpha",
        "predicted_ratio": "1 + alpha * B_Lambda (continuum quadrature)",
        "asymptotic_ratio": "1 + (2/(3 pi)) alpha log(Lambda)",
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bdfvac",
        description="Cutoff Dirac-vacuum solver: screening tables, linear scans, "
                    "self-consistent polarization, pair-production thresholds.",
    )
    parser.add_argument("--config", required=True, help="TOML configuration file")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, default=None, help="seed override for randomized checks")
    parser.add_argument("--threads", type=int, default=None, help="cap BLAS/FFT thread pools")
    parser.add_argument(
        "subcommand",
        choices=["screening-table", "linear-scan", "scf", "pair-production", "invariant-suite"],
    )
    return parser


def _emit_error(kind: str, message: str, key: str | None = None) -> None:
    payload = {"error": kind, "message": message}
    if key:
        payload["key"] = key
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path, columns, rows, header: dict, config: RunConfig):
    if "csv" not in config.output["formats"]:
        return
    lines = [f"# {k} = {v}" for k, v in header.items()]
    lines.append("# config = " + json.dumps(config.resolved(), sort_keys=True, separators=(",", ":")))
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, float) and not (obj == obj and abs(obj) != float("inf")):
        return None
    return obj


def _write_json(path, payload: dict, config: RunConfig):
    if "json" not in config.output["formats"]:
        return
    payload = dict(payload)
    payload["config"] = config.resolved()
    with open(path, "w") as fh:
        json.dump(_sanitize(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_schema(outdir):
    with open(os.path.join(outdir, "schema.json"), "w") as fh:
        json.dump(_SCHEMA_DOC, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _setup(cfg: RunConfig):
    """Lattice and external density from the config; normalizes the crossing
    to unit coupling when requested."""
    import numpy as np

    from .coulomb import ChargeDensity, gaussian_density
    from .lattice import LatticeSpec, build_lattice
    from .spectral import normalize_crossing

    spec = LatticeSpec(
        n_per_axis=cfg.lattice["n_per_axis"],
        box_length=float(cfg.lattice["box_length"]),
        cutoff=float(cfg.lattice["cutoff"]),
    )
    lattice = build_lattice(spec)
    if cfg.density["kind"] == "gaussian":
        nu = gaussian_density(lattice, float(cfg.density["charge"]), float(cfg.density["width"]))
    else:
        arr = np.load(cfg.density["path"])
        nu = ChargeDensity(lattice, np.asarray(arr, dtype=float))
    kappa_c0 = None
    if cfg.density["normalize"]:
        window = (float(cfg.physics["mu_minus"]), float(cfg.physics["mu_plus"]))
        lo, hi = cfg.density["normalize_range"]
        nu, kappa_c0 = normalize_crossing(nu, window, (float(lo), float(hi)), lattice)
    return lattice, nu, kappa_c0


def _kappa_grid(cfg: RunConfig):
    import numpy as np

    grid = cfg.physics.get("kappa_grid")
    if grid is None:
        eps = float(cfg.physics["epsilon"])
        return np.linspace(1.0 - eps, 1.0 + eps, 7)
    return np.linspace(float(grid["start"]), float(grid["stop"]), int(grid["count"]))


def cmd_screening_table(cfg: RunConfig, outdir: str) -> int:
    from .coulomb import ScreeningTable
    from .lattice import LatticeSpec, build_lattice

    spec = LatticeSpec(cfg.lattice["n_per_axis"], float(cfg.lattice["box_length"]),
                       float(cfg.lattice["cutoff"]))
    lattice = build_lattice(spec)
    table = ScreeningTable.build(lattice)
    rows = [(float(r), float(b), float(u))
            for r, b, u in zip(table.radii, table.b_values, table.u_values)]
    _write_csv(
        os.path.join(outdir, "screening_table.csv"),
        ["k", "B_Lambda_k", "U_Lambda_k"],
        rows,
        {"Lambda": table.cutoff, "abs_tol": table.abs_tol, "rel_tol": table.rel_tol},
        cfg,
    )
    return 0


def cmd_linear_scan(cfg: RunConfig, outdir: str) -> int:
    from .coulomb import ChargeDensity
    from .lattice import LatticeSpec, build_lattice
    from .spectral import crossing_scan, gap_eigenpair

    lattice, nu, _ = _setup(cfg)
    window = (float(cfg.physics["mu_minus"]), float(cfg.physics["mu_plus"]))
    kappas = _kappa_grid(cfg)

    # the cutoff enters only through the retained ball, so a cutoff ladder
    # reuses the same density field on re-cut lattices
    ladder = cfg.physics.get("cutoff_ladder") or [lattice.cutoff]
    rows = []
    kappa_c = None
    for cutoff in ladder:
        if float(cutoff) == lattice.cutoff:
            lat_c, nu_c = lattice, nu
        else:
            lat_c = build_lattice(LatticeSpec(lattice.n, lattice.box_length, float(cutoff)))
            nu_c = ChargeDensity(lat_c, nu.position.copy())
        profile = crossing_scan(nu_c, kappas, window, lat_c)
        if float(cutoff) == lattice.cutoff:
            kappa_c = profile.kappa_c
        for k, l, m in zip(profile.kappas, profile.lambdas, profile.multiplicities):
            margin = gap_eigenpair(nu_c, float(k), window, lat_c).gap_margin
            rows.append((float(cutoff), float(k), float(l), float(margin), int(m)))
    _write_csv(
        os.path.join(outdir, "linear_scan.csv"),
        ["cutoff", "kappa", "lambda", "gap_margin", "multiplicity"],
        rows,
        {"mu_minus": window[0], "mu_plus": window[1],
         "kappa_c_estimate": kappa_c if kappa_c is not None else "none"},
        cfg,
    )
    return 0


def cmd_scf(cfg: RunConfig, outdir: str) -> int:
    from .scf import SCFConfig, scf_solve
    from . import io as io_mod

    lattice, nu, _ = _setup(cfg)
    solver = SCFConfig(
        alpha=float(cfg.physics["alpha"]),
        kappa=float(cfg.physics["kappa"]),
        mu=float(cfg.physics["mu"]),
        max_iters=int(cfg.solver["max_iters"]),
        x_tol=float(cfg.solver["x_tol"]),
        damping=float(cfg.solver["damping"]),
        preconditioner=cfg.solver["preconditioner"],
        init=cfg.solver["init"],
    )
    result = scf_solve(solver, nu, lattice)
    payload = {
        "converged": result.converged,
        "iterations": result.iterations,
        "contraction_estimate": result.contraction_estimate,
        "energy": result.energy.as_dict(),
        "residual_history": [[i, r] for i, r in result.residual_history],
        "charge": float(result.density.total_charge),
    }
    _write_json(os.path.join(outdir, "scf_result.json"), payload, cfg)
    if cfg.output["save_state"]:
        io_mod.save_state(os.path.join(outdir, "state.npz"), result.state)
    if not result.converged:
        _emit_error("runtime", f"scf did not converge within {result.iterations} iterations "
                               f"(last residual {result.residual_history[-1][1]:.3e})")
        return 1
    return 0


def cmd_pair_production(cfg: RunConfig, outdir: str) -> int:
    from .pairprod import critical_coupling, f_scan, validate_fermi_window
    from .coulomb import ScreeningTable
    from .scf import SCFConfig

    lattice, nu, kappa_c0 = _setup(cfg)
    mu_minus = float(cfg.physics["mu_minus"])
    mu_plus = float(cfg.physics["mu_plus"])
    alpha = float(cfg.physics["alpha"])
    kappas = _kappa_grid(cfg)
    validate_fermi_window(nu, kappas, mu_minus, mu_plus, lattice)
    screening = ScreeningTable.build(lattice)
    solver = SCFConfig(
        alpha=alpha, kappa=1.0, mu=mu_minus,
        max_iters=int(cfg.solver["max_iters"]), x_tol=float(cfg.solver["x_tol"]),
        damping=float(cfg.solver["damping"]), preconditioner=cfg.solver["preconditioner"],
        init=cfg.solver["init"],
    )

    points = f_scan(nu, kappas, alpha, mu_minus, mu_plus, lattice,
                    screening=screening, solver=solver)
    rows = [
        (p.kappa, p.alpha, p.f_value, p.lambda_ren, p.multiplicity, p.deviation,
         p.charge_plus, p.charge_minus, p.converged_plus, p.converged_minus)
        for p in points
    ]
    _write_csv(
        os.path.join(outdir, "pair_scan.csv"),
        ["kappa", "alpha", "F", "lambda_ren", "multiplicity", "deviation",
         "charge_plus", "charge_minus", "converged_plus", "converged_minus"],
        rows,
        {"mu_minus": mu_minus, "mu_plus": mu_plus},
        cfg,
    )

    bracket = cfg.physics.get("bracket")
    if bracket is None:
        eps = float(cfg.physics["epsilon"])
        bracket = [1.0 - eps / 6, 1.0 + eps / 2]
    report = critical_coupling(
        nu, alpha, (float(bracket[0]), float(bracket[1])), mu_minus, mu_plus,
        lattice, screening=screening, solver=solver,
        bracket_tol=float(cfg.physics["bracket_tol"]),
        kappa_c_zero=1.0 if cfg.density["normalize"] else (kappa_c0 or 1.0),
    )
    payload = {
        "alpha": report.alpha,
        "kappa_c": report.kappa_c,
        "bracket": list(report.bracket),
        "kappa_c_zero": report.kappa_c_zero,
        "ratio": report.ratio,
        "predicted_ratio": report.predicted_ratio,
        "asymptotic_ratio": report.asymptotic_ratio,
        "slope": report.slope,
        "evaluations": report.evaluations,
    }
    _write_json(os.path.join(outdir, "critical_coupling.json"), payload, cfg)
    return 0


def cmd_invariant_suite(cfg: RunConfig, outdir: str) -> int:
    from .invariants import CHECKS, run_battery
    from .lattice import LatticeSpec, build_lattice

    seed = int(cfg.run["seed"])
    lattices = {
        "n4": build_lattice(LatticeSpec(4, 6.0, 1.6)),
        "n8": build_lattice(LatticeSpec(8, 10.0, 2.0)),
    }
    all_ok = True
    results = {}
    width = max(len(name) for name, _ in CHECKS)
    for label, lattice in lattices.items():
        print(f"--- invariant battery on {lattice} ---")
        battery = run_battery(lattice, seed)
        results[label] = [
            {"check": name, "ok": ok, "detail": detail} for name, ok, detail in battery
        ]
        for name, ok, detail in battery:
            print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}")
            all_ok = all_ok and ok
    _write_json(os.path.join(outdir, "invariants.json"),
                {"results": results, "seed": seed, "all_ok": all_ok}, cfg)
    return 0 if all_ok else 1


_HANDLERS = {
    "screening-table": cmd_screening_table,
    "linear-scan": cmd_linear_scan,
    "scf": cmd_scf,
    "pair-production": cmd_pair_production,
    "invariant-suite": cmd_invariant_suite,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    started = time.time()
    try:
        cfg = load_config(args.config)
    except ConfigError as err:
        _emit_error("config", str(err), err.key)
        return 2

    if args.seed is not None:
        cfg.run["seed"] = args.seed
    outdir = args.out or os.environ.get("BDFVAC_OUT") or cfg.output["directory"]
    os.makedirs(outdir, exist_ok=True)

    try:
        status = _HANDLERS[args.subcommand](cfg, outdir)
        _write_schema(outdir)
    except ConfigError as err:
        _emit_error("config", str(err), err.key)
        return 2
    except Exception as err:
        _emit_error("runtime", f"{type(err).__name__}: {err}")
        return 1

    with open(os.path.join(outdir, "metadata.json"), "w") as fh:
        json.dump(
            {"subcommand": args.subcommand, "wall_seconds": time.time() - started,
             "finished_unix": time.time(), "config_path": cfg.source_path},
            fh, indent=2, sort_keys=True,
        )
        fh.write("\n")
    return status


if __name__ == "__main__":
    sys.exit(main())
