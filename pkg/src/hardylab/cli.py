"""Configuration-driven command line front end.

Subcommands:

* ``verify-symbol NAME`` — derivative-condition and plane-vanishing table
  for a builtin symbol.
* ``run CONFIG`` — execute the checks listed in a config file, writing
  ``manifest.json``, ``report.json``, ``summary.csv`` and plot-data files
  into the output directory.
* ``replay REPORT TRIAL_ID`` — recompute one recorded trial and compare
  bit-for-bit.

Config files are flat INI: ``[section]`` headers, ``key = value`` lines and
``#`` comments.  Exit codes: 0 all checks pass, 1 a check failed, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .grid import make_grid
from .symbols import (
    BUILTIN_NAMES,
    builtin_symbol,
    cm_condition_ratio,
    dyadic_shells,
    plane_samples,
    plane_vanishing_order,
    sphere_directions,
)
from .verify import (
    ExperimentConfig,
    check_cancellation,
    check_decay_lemma,
    check_fs_inequality,
    check_local_estimate,
    check_pointwise_majorant,
    draw_trial_entries,
    replay_trial,
    resolve_index,
    resolve_operator,
    run_boundedness_ensemble,
    scale_invariance_test,
    trial_seed,
)
from .atoms import make_atom

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

SUMMARY_COLUMNS = ("trial_id", "seed", "lhs", "rhs", "ratio", "flags")


# ---------------------------------------------------------------------------
# JSON with 17-significant-digit floats
# ---------------------------------------------------------------------------


def _format_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def dumps_17g(obj, indent: int = 0) -> str:
    """Serialize to JSON with IEEE doubles written at 17 significant digits."""
    pad = " " * indent
    inner = " " * (indent + 2)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, complex):
        return dumps_17g({"re": obj.real, "im": obj.imag}, indent)
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [dumps_17g(v, indent + 2) for v in obj]
        return "[\n" + ",\n".join(inner + it for it in items) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f"{inner}{json.dumps(str(k))}: {dumps_17g(v, indent + 2)}"
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj)!r}")


# ---------------------------------------------------------------------------
# verify-symbol
# ---------------------------------------------------------------------------


def cmd_verify_symbol(args) -> int:
    try:
        sym = builtin_symbol(args.name)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    shells = dyadic_shells(-args.shells, args.shells)
    dirs = sphere_directions(sym.m, sym.n, 64, seed=0)
    alphas = [
        alpha
        for alpha in _multi_indices(sym.m * sym.n, args.orders)
    ]
    failed: list[str] = []

    header = "alpha".ljust(12) + "".join(f"{s:>12.4g}" for s in shells)
    print(f"symbol {sym.name} (m={sym.m}, n={sym.n}, kind={sym.kind})")
    print(header)
    for alpha in alphas:
        row = []
        for radius in shells:
            val = cm_condition_ratio(sym, alpha, dirs * radius)
            row.append(val)
        print(str(alpha).ljust(12) + "".join(f"{v:>12.4g}" for v in row))
        if not all(np.isfinite(v) for v in row):
            failed.append(f"non-finite derivative ratio at alpha={alpha}")
        if sym.homogeneous_degree_zero:
            lo, hi = min(row), max(row)
            if hi > 0 and (hi - lo) / hi > 0.10:
                failed.append(f"shell spread exceeds 10% at alpha={alpha}")

    if sym.m >= 2:
        pts = plane_samples(sym.m, sym.n, 200, seed=1)
        rep = plane_vanishing_order(sym, 0, pts)
        print(f"plane residual (order 0): {rep.max_residual:.3e}")
        if args.require_plane_vanishing and rep.max_residual >= 1e-10:
            failed.append(f"plane residual {rep.max_residual:.3e} >= 1e-10")

    if failed:
        for msg in failed:
            print(f"FAIL: {msg}")
        return EXIT_FAIL
    print("PASS")
    return EXIT_PASS


def _multi_indices(length: int, max_order: int):
    out = []
    def rec(prefix, remaining, budget):
        if remaining == 0:
            out.append(tuple(prefix))
            return
        for k in range(budget + 1):
            rec(prefix + [k], remaining - 1, budget - k)
    for total in range(max_order + 1):
        before = len(out)
        rec([], length, total)
        # rec enumerates |alpha| <= total; keep only the new exact-order ones
        out[before:] = [a for a in out[before:] if sum(a) == total]
    return out


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def _parse_bool(text: str) -> bool:
    val = text.strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_float(text: str) -> float:
    val = text.strip().lower()
    if val in ("inf", "infinity"):
        return math.inf
    return float(text)


def load_config(path: str) -> tuple[ExperimentConfig, dict]:
    """Parse a run config; returns the ensemble config and the check flags."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = parser.read(path)
    if not read:
        raise ValueError(f"cannot read config file {path}")

    op = parser["operator"] if parser.has_section("operator") else {}
    idx = parser["indices"] if parser.has_section("indices") else {}
    grid = parser["grid"] if parser.has_section("grid") else {}
    ens = parser["ensemble"] if parser.has_section("ensemble") else {}
    ladder = parser["ladder"] if parser.has_section("ladder") else {}
    tol = parser["tolerances"] if parser.has_section("tolerances") else {}
    checks_sec = parser["checks"] if parser.has_section("checks") else {}

    cutoff_text = op.get("cutoff", "none").strip().lower()
    if cutoff_text not in ("none", "default"):
        raise ValueError(f"cutoff must be 'none' or 'default', got {cutoff_text!r}")

    exponents = tuple(
        _parse_float(tok) for tok in idx.get("p", "1, 1").split(",") if tok.strip()
    )
    ells = tuple(
        float(tok) for tok in ens.get("ell", "0.5").split(",") if tok.strip()
    )
    n_override = idx.get("n_moments")
    config = ExperimentConfig(
        kind=op.get("kind", "general").strip(),
        symbol=op.get("symbol", "sigma1_bilinear").strip(),
        exponents=exponents,
        n=int(grid.get("n", "1")),
        L=float(grid.get("l", grid.get("L", "8"))),
        M=int(grid.get("m", grid.get("M", "512"))),
        trials=int(ens.get("trials", "50")),
        max_atoms=int(ens.get("max_atoms", "4")),
        seed=int(ens.get("seed", "0")),
        ell_choices=ells,
        center_span=float(ens.get("center_span", "0.25")),
        N_override=int(n_override) if n_override is not None else None,
        use_cutoff=(cutoff_text == "default"),
        half_steps=_parse_bool(ladder.get("half_steps", "false")),
        budget=int(ens.get("budget", str(2**26))),
        dilatable=_parse_bool(ens.get("dilatable", "false")),
    )

    known_checks = (
        "boundedness",
        "scale_invariance",
        "cancellation",
        "decay",
        "local_estimate",
        "pointwise_majorant",
        "fs_inequality",
    )
    checks = {name: False for name in known_checks}
    checks["boundedness"] = True
    for name in checks_sec:
        if name not in known_checks:
            raise ValueError(f"unknown check {name!r}")
        checks[name] = _parse_bool(checks_sec[name])
    tolerances = {k: float(v) for k, v in tol.items()}
    return config, {"checks": checks, "tolerances": tolerances}


def _single_atoms_for_checks(config: ExperimentConfig, partner_order: int | None = None):
    """One deterministic atom per input slot, drawn from the trial-0 stream.

    ``partner_order`` lowers the cancellation order of every slot after the
    first (the decay fit only relies on the first atom's moments).
    """
    grid = make_grid(config.n, config.L, config.M)
    idx = resolve_index(config)
    entries = draw_trial_entries(config, trial_seed(config.seed, 0), idx.m, grid)
    atoms = []
    for slot, (inp, p_l) in enumerate(zip(entries, idx.exponents)):
        lam, cube, seed = inp[0]
        order = idx.N if (slot == 0 or partner_order is None) else partner_order
        atoms.append(make_atom(cube, p_l, order, seed, grid))
    return grid, idx, atoms


def _run_checks(config: ExperimentConfig, options: dict, jobs: int, out: Path) -> dict:
    checks = options["checks"]
    tolerances = options["tolerances"]
    results: dict[str, dict] = {}
    trials_payload: list[dict] = []

    if checks["boundedness"]:
        report = run_boundedness_ensemble(config, jobs=jobs)
        trials_payload = [t.to_dict() for t in report.trials]
        results["boundedness"] = {
            "pass": report.passed,
            "ratio_sup": report.ratio_sup,
            "ratio_median": report.ratio_median,
            "vacuous_trials": report.vacuous_trials,
        }
        _write_summary_csv(out / "summary.csv", report.trials)
        _write_ratio_histogram(out / "ratio_hist.dat", [t.ratio for t in report.trials])

    if checks["scale_invariance"]:
        tol = tolerances.get("scale_invariance", 0.2)
        rep = scale_invariance_test(config, 2.0, trials=min(config.trials, 20))
        results["scale_invariance"] = {
            "pass": rep.max_deviation < tol,
            "max_deviation": rep.max_deviation,
            "dilation": rep.dilation,
            "tolerance": tol,
        }

    if checks["cancellation"]:
        grid, idx, atoms = _single_atoms_for_checks(config)
        op = resolve_operator(config, grid)
        tol = tolerances.get("cancellation", 1e-5)
        rep = check_cancellation(op, atoms, idx.s, tolerance=tol)
        results["cancellation"] = {
            "pass": rep.passed,
            "max_normalized": rep.max_normalized,
            "tolerance": tol,
        }

    if checks["decay"]:
        grid, idx, atoms = _single_atoms_for_checks(config, partner_order=0)
        op = resolve_operator(config, grid)
        rep = check_decay_lemma(op, atoms, idx.N)
        results["decay"] = {
            "pass": rep.passed,
            "slope": rep.slope,
            "slope_bound": rep.slope_bound,
            "ratio_sup": rep.ratio_sup,
        }
        _write_decay_points(out / "decay_fit.dat", op, atoms)

    if checks["local_estimate"]:
        grid, idx, atoms = _single_atoms_for_checks(config)
        op = resolve_operator(config, grid)
        rep = check_local_estimate(op, atoms, r=2.0, N=idx.N)
        finite = math.isfinite(rep.ratio_direct) and math.isfinite(rep.ratio_maximal)
        results["local_estimate"] = {
            "pass": finite,
            "ratio_direct": rep.ratio_direct,
            "ratio_maximal": rep.ratio_maximal,
        }

    if checks["pointwise_majorant"]:
        grid, idx, atoms = _single_atoms_for_checks(config)
        op = resolve_operator(config, grid)
        rep = check_pointwise_majorant(config.kind, op, atoms, idx)
        results["pointwise_majorant"] = {
            "pass": rep.passed,
            "ratio_sup": rep.ratio_sup,
            "included_points": rep.included_points,
        }

    if checks["fs_inequality"]:
        grid = make_grid(config.n, config.L, config.M)
        idx = resolve_index(config)
        entries = draw_trial_entries(config, trial_seed(config.seed, 1), 1, grid)[0]
        cubes = [cube for _, cube, _ in entries]
        lambdas = [lam for lam, _, _ in entries]
        p_eff = min(idx.p, 1.0) if math.isfinite(idx.p) else 1.0
        gamma = max(1.0, 1.0 / p_eff) + 1.0
        rep = check_fs_inequality(cubes, lambdas, gamma, p_eff, grid)
        results["fs_inequality"] = {
            "pass": rep.passed,
            "ratio": rep.ratio,
            "gamma": gamma,
            "p": p_eff,
            "vacuous": rep.vacuous,
        }

    return {"checks": results, "trials": trials_payload}


def _write_summary_csv(path: Path, trials) -> None:
    lines = [",".join(SUMMARY_COLUMNS)]
    for t in trials:
        lines.append(
            ",".join(
                [
                    str(t.trial_id),
                    str(t.seed),
                    _format_float(t.lhs),
                    _format_float(t.rhs),
                    _format_float(t.ratio),
                    t.flags,
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n", newline="\n")


def _write_ratio_histogram(path: Path, ratios) -> None:
    vals = np.asarray([r for r in ratios if np.isfinite(r)])
    lines = ["# ratio count"]
    if vals.size:
        lo, hi = float(np.min(vals)), float(np.max(vals))
        if hi <= lo:
            hi = lo + 1.0
        edges = np.linspace(lo, hi, 11)
        counts, _ = np.histogram(vals, bins=edges)
        centers = 0.5 * (edges[:-1] + edges[1:])
        for c, k in zip(centers, counts):
            lines.append(f"{_format_float(float(c))} {int(k)}")
    path.write_text("\n".join(lines) + "\n", newline="\n")


def _write_decay_points(path: Path, op, atoms) -> None:
    from .atoms import dilate_cube
    from .operators import apply_operator

    grid = op.grid
    out = apply_operator(op, [a.values for a in atoms])
    pts = grid.points()
    eligible = np.ones(grid.shape, dtype=bool)
    for a in atoms:
        eligible &= ~dilate_cube(a.cube, "star").contains(pts)
    centers = [np.asarray(a.cube.center) for a in atoms]
    dist = np.zeros(grid.shape)
    for c in centers:
        dist += np.linalg.norm(pts - c, axis=-1)
    mags = np.abs(out.values)
    keep = eligible & (mags > 0)
    lines = ["# log10_distance log10_magnitude"]
    for d, v in zip(dist[keep], mags[keep]):
        lines.append(f"{_format_float(float(np.log10(d)))} {_format_float(float(np.log10(v)))}")
    path.write_text("\n".join(lines) + "\n", newline="\n")


def cmd_run(args) -> int:
    try:
        config, options = load_config(args.config)
        if args.seed is not None:
            config = ExperimentConfig.from_dict({**config.to_dict(), "seed": args.seed})
        resolve_index(config)  # surface exponent/type conflicts as config errors
        builtin_symbol(config.symbol)
    except (ValueError, KeyError, configparser.Error) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config_hash = hashlib.sha256(dumps_17g(config.to_dict()).encode()).hexdigest()
    manifest = {
        "config_path": str(args.config),
        "config": config.to_dict(),
        "config_sha256": config_hash,
        "checks": options["checks"],
        "tolerances": options["tolerances"],
        "output_dir": str(out),
        "created_unix": time.time(),
        "version": __version__,
        "jobs": args.jobs,
    }
    (out / "manifest.json").write_text(dumps_17g(manifest) + "\n")

    try:
        payload = _run_checks(config, options, args.jobs, out)
    except ValueError as exc:
        (out / "FAILED").write_text(f"error: {exc}\n")
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    all_pass = all(entry["pass"] for entry in payload["checks"].values())
    report = {
        "manifest": manifest,
        "config": config.to_dict(),
        "trials": payload["trials"],
        "summary": {
            "checks": payload["checks"],
            "version": __version__,
        },
        "pass": all_pass,
    }
    (out / "report.json").write_text(dumps_17g(report) + "\n")

    for name, entry in payload["checks"].items():
        print(f"{name}: {'PASS' if entry['pass'] else 'FAIL'}")
    if not all_pass:
        (out / "FAILED").write_text(
            "\n".join(n for n, e in payload["checks"].items() if not e["pass"]) + "\n"
        )
        return EXIT_FAIL
    return EXIT_PASS


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------


def cmd_replay(args) -> int:
    try:
        report = json.loads(Path(args.report).read_text())
        config = ExperimentConfig.from_dict(report["config"])
        trials = report["trials"]
    except (OSError, ValueError, KeyError) as exc:
        print(f"error reading report: {exc}", file=sys.stderr)
        return EXIT_USAGE

    match = [t for t in trials if t["trial_id"] == args.trial_id]
    if not match:
        print(f"trial {args.trial_id} not found in report", file=sys.stderr)
        return EXIT_USAGE
    record = match[0]

    from .verify import TrialRecord

    trial = TrialRecord.from_dict(record)
    try:
        lhs, rhs, ratio = replay_trial(config, trial)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    ok = lhs == trial.lhs and rhs == trial.rhs and ratio == trial.ratio
    print(f"trial {args.trial_id}: recomputed lhs={_format_float(lhs)} rhs={_format_float(rhs)}")
    if not ok:
        print(
            "MISMATCH: recorded "
            f"lhs={_format_float(trial.lhs)} rhs={_format_float(trial.rhs)} "
            f"ratio={_format_float(trial.ratio)}",
            file=sys.stderr,
        )
        return EXIT_FAIL
    print("bit-exact match")
    return EXIT_PASS


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hardylab",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=(
            "summary.csv columns: trial_id,seed,lhs,rhs,ratio,flags (LF endings).\n"
            "Known symbols: " + ", ".join(BUILTIN_NAMES)
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sym = sub.add_parser("verify-symbol", help="check a builtin multiplier symbol")
    p_sym.add_argument("name")
    p_sym.add_argument("--orders", type=int, default=2, help="max derivative order")
    p_sym.add_argument("--shells", type=int, default=4, help="dyadic shell range 2^-k..2^k")
    p_sym.add_argument(
        "--require-plane-vanishing",
        action="store_true",
        help="fail unless the symbol vanishes on the plane sum(xi_j) = 0",
    )
    p_sym.set_defaults(func=cmd_verify_symbol)

    default_jobs = int(os.environ.get("HARDYLAB_JOBS", "1"))
    p_run = sub.add_parser("run", help="run configured checks and write reports")
    p_run.add_argument("config")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override master seed")
    p_run.add_argument(
        "--jobs", type=int, default=default_jobs, help="parallel trial workers"
    )
    p_run.set_defaults(func=cmd_run)

    p_rep = sub.add_parser("replay", help="recompute one trial from a report")
    p_rep.add_argument("report")
    p_rep.add_argument("trial_id", type=int)
    p_rep.set_defaults(func=cmd_replay)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
