"""Command-line runner: ``orthospec <command> --config <path> [--out <dir>] [--threads N]``.

Every command writes a CSV of its grid and a ``summary.json``.  Outputs
depend only on the config (thread count excluded), and floats are written
with ``repr`` so reruns are byte-identical.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import correlations as cor
from .config import COMMANDS, parse_scenario
from .errors import ConfigError, OrthospecError, SingularityError, SolverError
from .orthospectrum import (counting_function, default_T0, length_spectrum, spectrum_to_csv,
                            steiner_count, swapped_spectrum)
from .spectral import (atom_extract, dirac_comb, guinand_meyer_measure, lattice_norms,
                       singularity_scan)
from .zeta import ConvexZeta, residues

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _f(x):
    return repr(float(x))


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _cplx(z):
    return [float(z.real), float(z.imag)]


def _bodies(sc):
    K1, K2 = sc.bodies
    return K1, K2


def _base_summary(sc):
    out = {"command": sc.command, "dimension": sc.dimension, "status": "ok"}
    if sc.bodies:
        out["bodies"] = [b.to_dict() for b in sc.bodies]
    if sc.observables:
        out["observables"] = {"phi": sc.observables[0].to_dict(), "psi": sc.observables[1].to_dict()}
    return out


# --------------------------------------------------------------------------
# commands; each returns ({filename: text}, summary dict)
# --------------------------------------------------------------------------


def _spectrum(sc):
    K1, K2 = _bodies(sc)
    spec = length_spectrum(K1, K2, sc.T, sc.beta, sc.f, sc.T0, workers=sc.threads)
    shells = np.unique(np.round(spec.lengths, 9))
    summary = {"T0": spec.T0, "T": spec.T, "count": len(spec), "n_shells": int(shells.size),
               "shortest": float(spec.lengths[0]) if len(spec) else None}
    return {"spectrum.csv": spectrum_to_csv(spec)}, summary


def _count(sc):
    K1, K2 = _bodies(sc)
    spec = length_spectrum(K1, K2, sc.T, T0=sc.T0, workers=sc.threads)
    grid = np.array(sc.count_grid) if sc.count_grid else np.linspace(spec.T0, sc.T, 33)[1:]
    N = counting_function(spec, grid)
    P = steiner_count(K1, K2, grid)
    rows = [(_f(t), int(n), _f(p), _f(n / p)) for t, n, p in zip(grid, N, P)]
    summary = {"T0": spec.T0, "T": spec.T, "final_ratio": float(N[-1] / P[-1])}
    return {"count.csv": _csv(["T", "N", "steiner", "ratio"], rows)}, summary


def _zeta(sc):
    K1, K2 = _bodies(sc)
    Z = ConvexZeta(K1, K2, T_max=sc.T_max, workers=sc.threads)
    rows = []
    for s in sc.s:
        method = sc.method
        if method == "auto":
            method = "direct" if s.real > sc.dimension else "continued"
        v = Z.direct(s) if method == "direct" else Z.continued(s)
        rows.append((_f(s.real), _f(s.imag), _f(v.value.real), _f(v.value.imag),
                     _f(v.tail_bound), v.method))
    summary = {"T_max": Z.T_max, "T0": Z.T0, "n_lengths": int(Z.lengths.size)}
    return {"zeta.csv": _csv(["s_re", "s_im", "value_re", "value_im", "tail_bound", "method"],
                             rows)}, summary


def _residues(sc):
    K1, K2 = _bodies(sc)
    reps = residues(K1, K2, sc.T_max, radius=sc.tolerances["residue_radius"])
    rows = [(r.location, _f(r.residue.real), _f(r.residue.imag), _f(r.predicted.real),
             _f(r.relative_gap), r.method) for r in reps]
    summary = {"residues": [r.to_dict() for r in reps]}
    return {"residues.csv": _csv(["pole", "residue_re", "residue_im", "predicted",
                                  "relative_gap", "method"], rows)}, summary


def _scan(sc):
    K1, K2 = _bodies(sc)
    spec = length_spectrum(K1, K2, sc.T, T0=sc.T0, workers=sc.threads)
    scales = sc.scales or tuple(np.geomspace(sc.T / 10, sc.T / 5, 5))
    rep = singularity_scan(dirac_comb(spec), sc.tau_grid, scales,
                           threshold=sc.tolerances["scan_threshold"],
                           max_residual=sc.tolerances["scan_max_residual"], workers=sc.threads)
    rows = [(_f(t), _f(s), _f(re), _f(im), _f(e), flag) for t, s, re, im, e, flag in rep.rows()]
    summary = rep.summary()
    summary["singular_set"] = [float(x) for x in rep.singular_set]
    return {"scan.csv": _csv(["tau", "scale", "re", "im", "exponent", "flag"], rows)}, summary


def _lambda_points(d, beta, n):
    cutoff = 2.0
    while True:
        v = lattice_norms(d, cutoff, beta)
        v = v[v > 0]
        if v.size > n:
            return v[:n + 1]
        cutoff *= 1.5


def _guinand(sc):
    K1, K2 = _bodies(sc)
    spec12 = length_spectrum(K1, K2, sc.T, sc.beta, sc.f, sc.T0, workers=sc.threads)
    spec21 = swapped_spectrum(spec12, workers=sc.threads)
    m = guinand_meyer_measure(spec12, spec21)
    sigma = sc.sigma or sc.T
    pts = _lambda_points(sc.dimension, sc.beta, sc.n_atoms)
    atoms, nxt = pts[:-1], pts[1:]
    mids = 0.5 * (atoms + nxt)
    a_vals = atom_extract(m, atoms, sigma)
    m_vals = atom_extract(m, mids, sigma)
    rows = [(_f(l), "atom", _f(v.real), _f(v.imag), _f(abs(v))) for l, v in zip(atoms, a_vals)]
    rows += [(_f(l), "midgap", _f(v.real), _f(v.imag), _f(abs(v))) for l, v in zip(mids, m_vals)]
    rows.sort(key=lambda r: float(r[0]))
    # smallest atom against the largest midgap probe; the neighbour ratio is diagnostic
    ratio = float(np.abs(a_vals).min() / max(np.abs(m_vals).max(), 1e-300))
    neigh = np.maximum(np.abs(m_vals), np.concatenate([[0.0], np.abs(m_vals[:-1])]))
    ratios = np.abs(a_vals) / np.maximum(neigh, 1e-300)
    summary = {"sigma": sigma, "beta": list(sc.beta), "n_atoms": int(atoms.size),
               "atom_to_midgap_ratio": ratio,
               "min_neighbour_ratio": float(ratios.min()),
               "required_ratio": sc.tolerances["guinand_ratio"],
               "separated": bool(ratio >= sc.tolerances["guinand_ratio"])}
    return {"guinand.csv": _csv(["lambda", "kind", "re", "im", "abs"], rows)}, summary


def _correlation(sc):
    phi, psi = sc.observables
    t = np.array(sc.t_grid)
    vals = cor.correlation(phi, psi, t)
    inv = cor.invariant_term(phi, psi)
    rows = []
    for ti, v in zip(t, np.atleast_1d(vals)):
        lead = cor.stationary_phase_leading(phi, psi, ti) if ti >= 1 else math.nan
        rows.append((_f(ti), _f(v.real), _f(v.imag), _f(np.real(lead)), _f(np.imag(lead))))
    summary = {"invariant": _cplx(complex(inv)), "n_points": int(t.size)}
    return {"correlation.csv": _csv(["t", "re", "im", "leading_re", "leading_im"], rows)}, summary


def _laplace(sc):
    phi, psi = sc.observables
    tol = sc.tolerances["singular_distance"]
    sing = cor.singular_points(phi, psi)
    rows = []
    for s in sc.s:
        near = min(abs(s - p) for p in sing)
        if near < tol and not sc.probe:
            raise SingularityError(f"s = {s} lies within {tol:g} of a singular point")
        v = cor.laplace_transform(phi, psi, s, t_split=sc.t_split, probe=True)
        rows.append((_f(s.real), _f(s.imag), _f(v.value.real), _f(v.value.imag), _f(near)))
    summary = {"singular_points": [_cplx(p) for p in sing], "t_split": sc.t_split}
    return {"laplace.csv": _csv(["s_re", "s_im", "value_re", "value_im", "singular_distance"],
                                rows)}, summary


def _mellin(sc):
    phi, psi = sc.observables
    rows = []
    for s in sc.s:
        v = cor.mellin_transform(phi, psi, s, chi_cutoff=sc.chi_cutoff, t_split=sc.t_split)
        M0 = v.parts["M0"]
        rows.append((_f(s.real), _f(s.imag), _f(v.value.real), _f(v.value.imag),
                     _f(M0.real), _f(M0.imag)))
    summary = {"predicted_residue_at_1": _cplx(complex(cor.invariant_term(phi, psi))),
               "chi_cutoff": sc.chi_cutoff, "t_split": sc.t_split}
    return {"mellin.csv": _csv(["s_re", "s_im", "value_re", "value_im", "M0_re", "M0_im"],
                               rows)}, summary


HANDLERS = {"spectrum": _spectrum, "count": _count, "zeta": _zeta, "residues": _residues,
            "scan": _scan, "guinand": _guinand, "correlation": _correlation,
            "laplace": _laplace, "mellin": _mellin}


def run(scenario, out_dir):
    """Execute ``scenario`` and write its CSV and ``summary.json`` into ``out_dir``.

    Returns the summary dict.  Module errors propagate unchanged.
    """
    files, extra = HANDLERS[scenario.command](scenario)
    summary = _base_summary(scenario)
    summary.update(extra)
    summary["files"] = sorted(files)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return summary


def error_report(exc, code):
    report = {"status": "error", "exit_code": code, "error": type(exc).__name__,
              "message": str(exc)}
    if isinstance(exc, ConfigError):
        report["path"] = exc.path
    if isinstance(exc, SolverError):
        report["xi"] = [list(map(int, x)) for x in exc.xi[:20]]
    return report


def build_parser():
    p = argparse.ArgumentParser(prog="orthospec",
                                description="Orthospectra, zeta functions and correlations "
                                            "of convex bodies in flat tori.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON scenario file")
    p.add_argument("--out", default=None, help="output directory (default: config 'output' or ./out)")
    p.add_argument("--threads", type=int, default=None, help="worker threads")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    out_dir = args.out
    try:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", "--config") from None
        sc = parse_scenario(text, args.command)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("threads must be a positive integer", "--threads")
            sc = replace(sc, threads=args.threads)
        out_dir = out_dir or sc.output or "out"
        summary = run(sc, out_dir)
    except ConfigError as exc:
        print(json.dumps(error_report(exc, EXIT_CONFIG), sort_keys=True))
        return EXIT_CONFIG
    except (OrthospecError, ArithmeticError) as exc:
        report = error_report(exc, EXIT_NUMERIC)
        print(json.dumps(report, sort_keys=True))
        if out_dir is not None:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            (Path(out_dir) / "error.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
        return EXIT_NUMERIC
    print(json.dumps({"status": "ok", "command": sc.command, "out": str(out_dir),
                      "files": summary["files"] + ["summary.json"]}, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
