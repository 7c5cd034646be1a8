"""Experiment runner: every pipeline as a subcommand over a config file.

Usage::

    fractomo <subcommand> --config path/to/run.ini [--out DIR]
             [--threads K] [--verbose]

Subcommands: ``poincare``, ``solve``, ``dn``, ``reconstruct``,
``liouville-check``, ``transfer-check``, ``counterexample``,
``oracle-compare``, ``convergence-study``.

Exit codes: 0 success, 1 runtime error, 2 violated invariant
(e.g. lost coercivity or a failed maximum principle), 3 configuration
error.  Artifacts (CSV series, JSON reports) land in the output
directory; identical configs and seeds produce byte-identical files.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import conductivity_form, gagliardo_form, mass_matrix, potential_form
from .config import ExperimentConfig, parse_config
from .counterexample import build_pair, verify_nonuniqueness
from .dnmap import DNOperator
from .errors import ConfigError, FractomoError, VerificationError
from .io import (
    export_dn_csv,
    export_pair_csv,
    export_reconstruction_csv,
    export_solution_csv,
    residual_records,
    write_json_report,
)
from .mesh import Region
from .profiles import bump
from .reconstruction import bump_sequence, exterior_reconstruct, potential_decay_check
from .reduction import dn_transfer_residual, liouville_residual
from .solver import poincare_constant, solve_dirichlet
from .spectral import spectral_frac_laplacian

SUBCOMMANDS = (
    "poincare", "solve", "dn", "reconstruct", "liouville-check",
    "transfer-check", "counterexample", "oracle-compare", "convergence-study",
)


def _exterior_datum(cfg, mesh, spec, where):
    f = cfg.nodal(mesh, spec, where)
    f = np.asarray(f, dtype=float).copy()
    f[mesh.interior_dofs] = 0.0
    return f


def _forms(cfg: ExperimentConfig, mesh, params, coeffs):
    cond = conductivity_form(
        mesh, params, coeffs,
        order_singular=cfg.order_singular, order_regular=cfg.order_regular,
        check=cfg.quadrature_check, threads=cfg.threads,
    )
    return cond + potential_form(mesh, coeffs.q)


def run_poincare(cfg, outdir, verbose):
    mesh = cfg.build_mesh()
    params = cfg.params()
    result = poincare_constant(mesh, params)
    write_json_report(outdir / "poincare.json", result, "fractomo.poincare.v1")
    return f"C_opt={result['C_opt']:.6g} delta0={result['delta0']:.6g}"


def run_solve(cfg, outdir, verbose):
    mesh = cfg.build_mesh()
    params = cfg.params()
    coeffs = cfg.coefficients(mesh)
    form = _forms(cfg, mesh, params, coeffs)
    f = _exterior_datum(cfg, mesh, cfg.f_spec or "constant:0", "[data] f")
    src = cfg.nodal(mesh, cfg.source_spec, "[data] source")
    f_src = mass_matrix(mesh).entries @ src
    sol = solve_dirichlet(
        form, mesh, f, f_src, far_field=cfg.far_field,
        tol=cfg.solver_tolerance, method=cfg.solver_method,
    )
    export_solution_csv(outdir / "solution.csv", mesh, sol.u)
    write_json_report(
        outdir / "solve.json",
        {"residual": sol.residual, "energy": sol.energy,
         "far_field": sol.far_field},
        "fractomo.solve.v1",
    )
    return f"residual={sol.residual:.2e} energy={sol.energy:.6g}"


def run_dn(cfg, outdir, verbose):
    mesh = cfg.build_mesh()
    params = cfg.params()
    coeffs = cfg.coefficients(mesh)
    op = DNOperator(mesh, params, coeffs, form=_forms(cfg, mesh, params, coeffs))
    w1 = "W1" if "W1" in mesh.regions else "W"
    w2 = "W2" if "W2" in mesh.regions else w1
    dn = op.matrix(w1, w2, threads=cfg.threads)
    export_dn_csv(outdir / "dn_matrix.csv", mesh, dn)
    sym = ""
    if np.array_equal(dn.rows, dn.cols):
        sym = f" symmetry_defect={dn.symmetry_defect():.2e}"
    return f"dn {dn.entries.shape[0]}x{dn.entries.shape[1]}{sym}"


def run_reconstruct(cfg, outdir, verbose):
    mesh = cfg.build_mesh()
    params = cfg.params()
    coeffs = cfg.coefficients(mesh)
    if cfg.x0 is None:
        raise ConfigError("[reconstruct] x0: key is required")
    gform = gagliardo_form(mesh, params, order_singular=cfg.order_singular,
                           order_regular=cfg.order_regular)
    bumps = bump_sequence(mesh, params, cfg.reconstruct_W, cfg.x0, cfg.scales,
                          gform=gform)
    op = DNOperator(mesh, params, coeffs,
                    form=_forms(cfg, mesh, params, coeffs))
    result = exterior_reconstruct(
        mesh, params, coeffs, cfg.reconstruct_W, cfg.x0,
        operator=op, bumps=bumps, gform=gform,
    )
    decay = potential_decay_check(mesh, coeffs.q, bumps, cfg.p_exponent, params,
                                  strict=False)
    export_reconstruction_csv(
        outdir / "reconstruction.csv", result["samples"], cfg.gamma_true,
        [d["value"] for d in decay],
    )
    write_json_report(
        outdir / "reconstruction.json",
        {"extrapolated": result["extrapolated"], "fit": result["fit"],
         "x0": cfg.x0},
        "fractomo.reconstruction.v1",
    )
    return f"extrapolated={result['extrapolated']:.6g} over {len(bumps)} scales"


def run_liouville_check(cfg, outdir, verbose):
    params = cfg.params()
    if "Omega" not in cfg.regions:
        raise ConfigError("[regions]: Omega is required")
    olo, ohi = cfg.regions["Omega"]
    center = 0.5 * (olo[0] + ohi[0])
    halfw = 0.5 * (ohi[0] - olo[0])
    hs, residuals = [], []
    from .mesh import build_mesh as _bm

    for level in range(cfg.levels):
        h = cfg.h / 2**level
        mesh = _bm(cfg.resolved_box(), h, cfg.region_objects())
        coeffs = cfg.coefficients(mesh)
        x = mesh.coords
        u = np.zeros_like(x)
        phi = np.zeros_like(x)
        ii = mesh.interior_dofs
        u[ii] = bump((x[ii] - center + 0.2 * halfw) / (0.6 * halfw))
        phi[ii] = bump((x[ii] - center - 0.2 * halfw) / (0.5 * halfw))
        residuals.append(liouville_residual(mesh, params, coeffs, u, phi))
        hs.append(h)
    records = residual_records(hs, residuals)
    write_json_report(outdir / "liouville.json", {"records": records},
                      "fractomo.residuals.v1")
    return "residuals " + " ".join(f"{r:.2e}" for r in residuals)


def run_transfer_check(cfg, outdir, verbose):
    params = cfg.params()
    wlabel = cfg.reconstruct_W if cfg.reconstruct_W in cfg.regions else "W1"
    if wlabel not in cfg.regions:
        raise ConfigError("[regions]: a measurement region W1 is required")
    wlo, whi = cfg.regions[wlabel]
    center = 0.5 * (wlo[0] + whi[0])
    halfw = 0.5 * (whi[0] - wlo[0])
    hs, residuals = [], []
    from .mesh import build_mesh as _bm

    for level in range(cfg.levels):
        h = cfg.h / 2**level
        mesh = _bm(cfg.resolved_box(), h, cfg.region_objects())
        coeffs = cfg.coefficients(mesh)
        x = mesh.coords
        f = bump((x - center) / (0.45 * 2 * halfw))
        g = bump((x - center) / (0.35 * 2 * halfw))
        f[mesh.interior_dofs] = 0.0
        g[mesh.interior_dofs] = 0.0
        residuals.append(
            dn_transfer_residual(mesh, params, coeffs, coeffs.gamma, wlabel, f, g)
        )
        hs.append(h)
    records = residual_records(hs, residuals)
    write_json_report(outdir / "transfer.json", {"records": records},
                      "fractomo.residuals.v1")
    return "residuals " + " ".join(f"{r:.2e}" for r in residuals)


def run_counterexample(cfg, outdir, verbose):
    mesh = cfg.build_mesh()
    params = cfg.params()
    if cfg.ce_omega_prime is None or cfg.ce_omega is None:
        raise ConfigError("[counterexample]: omega_prime and omega are required")
    om_p = Region("Omega_prime", *cfg.ce_omega_prime)
    om = Region("omega_seed", *cfg.ce_omega)
    wlabel = cfg.ce_W if cfg.ce_W in mesh.regions else "W1"
    W = mesh.region_objects[wlabel]
    gform = gagliardo_form(mesh, params, order_singular=cfg.order_singular,
                           order_regular=cfg.order_regular)
    pair = build_pair(mesh, params, om_p, om, cfg.ce_eps, W,
                      scale=cfg.ce_scale, gform=gform)
    report = verify_nonuniqueness(pair, mesh, params, W, gform=gform,
                                  seed=cfg.seed)
    export_pair_csv(outdir / "pair.csv", mesh, pair)
    schema = report.pop("schema")
    write_json_report(outdir / "nonuniqueness.json", report, schema)
    return (f"dn_gap={report['dn_gap']:.3e} q_gap={report['q_gap']:.4f} "
            f"admissible={report['admissible']}")


def run_oracle_compare(cfg, outdir, verbose):
    from .io import _fmt
    import csv

    mesh = cfg.build_mesh()
    if mesh.n != 1:
        raise ConfigError("oracle-compare is a 1D experiment")
    u = cfg.nodal(mesh, cfg.oracle_u_spec, "[oracle] u")
    M = mass_matrix(mesh)
    rows = []
    from .assembly import KernelParams

    for s in cfg.oracle_s_list:
        params = KernelParams(cfg.n, s, cfg.c_ns)
        A = gagliardo_form(mesh, params, order_singular=cfg.order_singular,
                           order_regular=cfg.order_regular)
        nodal = np.linalg.solve(M.entries, A.entries @ u)
        spec = spectral_frac_laplacian(mesh, params, u, pad_factor=cfg.pad_factor)
        diff = nodal - spec
        rel = np.sqrt(diff @ M.entries @ diff) / np.sqrt(spec @ M.entries @ spec)
        rows.append({"s": s, "rel_l2_mismatch": float(rel)})
    with (outdir / "oracle_compare.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "rel_l2_mismatch"])
        for r in rows:
            w.writerow([_fmt(r["s"]), _fmt(r["rel_l2_mismatch"])])
    write_json_report(outdir / "oracle_compare.json", {"rows": rows},
                      "fractomo.oracle.v1")
    return " ".join(f"s={r['s']:g}:{r['rel_l2_mismatch']:.3%}" for r in rows)


def run_convergence_study(cfg, outdir, verbose):
    params = cfg.params()
    wlabel = "W1" if "W1" in cfg.regions else cfg.reconstruct_W
    if wlabel not in cfg.regions:
        raise ConfigError("[regions]: a measurement region W1 is required")
    wlo, whi = cfg.regions[wlabel]
    center = 0.5 * (wlo[0] + whi[0])
    width = whi[0] - wlo[0]
    from .mesh import build_mesh as _bm

    values, hs = [], []
    for level in range(cfg.levels):
        h = cfg.h / 2**level
        mesh = _bm(cfg.resolved_box(), h, cfg.region_objects())
        coeffs = cfg.coefficients(mesh)
        x = mesh.coords
        f = bump((x - center) / (0.45 * width))
        g = bump((x - center) / (0.35 * width))
        f[mesh.interior_dofs] = 0.0
        g[mesh.interior_dofs] = 0.0
        op = DNOperator(mesh, params, coeffs)
        values.append(op.pairing(f, g))
        hs.append(h)
    records = []
    for k, (h, v) in enumerate(zip(hs, values)):
        rec = {"h": h, "value": v}
        if k:
            rec["diff"] = abs(v - values[k - 1])
            if k >= 2 and rec["diff"] > 0:
                rec["rate"] = float(np.log2(records[-1]["diff"] / rec["diff"]))
        records.append(rec)
    write_json_report(outdir / "convergence.json", {"records": records},
                      "fractomo.convergence.v1")
    return "pairings " + " ".join(f"{v:.8g}" for v in values)


RUNNERS = {
    "poincare": run_poincare,
    "solve": run_solve,
    "dn": run_dn,
    "reconstruct": run_reconstruct,
    "liouville-check": run_liouville_check,
    "transfer-check": run_transfer_check,
    "counterexample": run_counterexample,
    "oracle-compare": run_oracle_compare,
    "convergence-study": run_convergence_study,
}


def run_experiment(subcommand: str, cfg: ExperimentConfig, outdir=None,
                   verbose: bool = False) -> str:
    """Run one subcommand; returns the one-line summary (raises on error)."""
    if subcommand not in RUNNERS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    out = Path(outdir or os.environ.get("FRACTOMO_OUT", cfg.outdir))
    out.mkdir(parents=True, exist_ok=True)
    return RUNNERS[subcommand](cfg, out, verbose)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fractomo",
        description="nonlocal optical tomography laboratory",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the INI config")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config)
        if args.threads is not None:
            cfg.threads = args.threads
        summary = run_experiment(args.subcommand, cfg, args.out, args.verbose)
    except ConfigError as exc:
        print(f"fractomo {args.subcommand}: config error: {exc}", file=sys.stderr)
        return 3
    except VerificationError as exc:
        print(f"fractomo {args.subcommand}: invariant violated: {exc}",
              file=sys.stderr)
        return 2
    except FractomoError as exc:
        print(f"fractomo {args.subcommand}: error: {exc}", file=sys.stderr)
        return 1
    print(f"fractomo {args.subcommand}: {summary}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
