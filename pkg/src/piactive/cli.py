"""Command-line front end.

Exit codes: 0 success, 1 internal or numeric failure, 2 user-input error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .ingest import SampleFileError, load_samples
from .models import (MODELS, ModelFunction, ParameterSpace, gradient_check, hartmann_space, make_model)
from .subspace import (SelectionError, Spectrum, activity_identity_check, bootstrap_spectrum,
                       eigendecompose, eigenvalues_csv, estimate_c_from_samples, estimate_c_monte_carlo,
                       estimate_c_quadrature, rng_for, select_dimension, spectrum_report)
from .units import QuantitySystem, UnitsError, pi_report, pi_report_text

log = logging.getLogger("piactive")


class UsageError(Exception):
    """Bad user input; maps to exit code 2."""


# ---------------------------------------------------------------------------
# helpers


def _stamp(args) -> dict:
    if args.no_timestamp:
        return {}
    return {"generated": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    log.info("wrote %s", path)
    return path


def _write_json(out: Path, name: str, data: dict, args) -> Path:
    return _write(out, name, json.dumps({**data, **_stamp(args)}, indent=2) + "\n")


def _load_space(args, default: ParameterSpace | None = None) -> ParameterSpace | None:
    if getattr(args, "space", None):
        try:
            return ParameterSpace.load(args.space)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read parameter space {args.space}: {exc}") from exc
    return default


def _model(name: str, space: ParameterSpace | None) -> ModelFunction:
    if name not in MODELS:
        raise UsageError(f"unknown model {name!r}; choose from {', '.join(sorted(MODELS))}")
    if space is None:
        space = hartmann_space()
    try:
        return make_model(name, space)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


class _Analysis:
    """Gradient source + C estimate + spectrum, shared by subspace and summary."""

    def __init__(self, args):
        if bool(args.model) == bool(args.samples):
            raise UsageError("give exactly one gradient source: --model NAME or --samples FILE")
        if args.mc is not None and args.seed is None:
            raise UsageError("--mc requires --seed")
        self.model = None
        self.samples = None
        self.grid = None
        if args.samples:
            space = _load_space(args)
            try:
                self.samples = load_samples(args.samples, space)
            except (OSError, SampleFileError) as exc:
                raise UsageError(f"cannot load samples: {exc}") from exc
            self.space = self.samples.space
            self.estimate = estimate_c_from_samples(self.samples)
        else:
            self.model = _model(args.model, _load_space(args))
            self.space = self.model.space
            if args.mc is not None:
                if args.mc < 1:
                    raise UsageError("--mc must be >= 1")
                self.estimate, self.samples = estimate_c_monte_carlo(self.model, M=args.mc, seed=args.seed,
                                                                     workers=args.workers)
            else:
                q = args.quadrature or 11
                self.estimate, self.grid = estimate_c_quadrature(self.model, points_per_dim=q,
                                                                 workers=args.workers, return_gradients=True)
        self.spectrum = eigendecompose(self.estimate)
        try:
            dim = args.dim
            self.subspace = select_dimension(self.spectrum, "largest_gap" if dim == "auto" else int(dim))
        except (SelectionError, ValueError) as exc:
            raise UsageError(f"cannot select active dimension: {exc}") from exc


def _add_source_flags(p):
    p.add_argument("--model", help=f"built-in model ({', '.join(sorted(MODELS))})")
    p.add_argument("--samples", help="gradient-sample file")
    p.add_argument("--space", help="parameter-space JSON file")
    est = p.add_mutually_exclusive_group()
    est.add_argument("--quadrature", type=int, metavar="N", help="Gauss-Legendre points per dimension (default 11)")
    est.add_argument("--mc", type=int, metavar="M", help="Monte Carlo sample count (needs --seed)")
    p.add_argument("--seed", type=int, help="64-bit seed for every stochastic step")
    p.add_argument("--dim", default="auto", help="active dimension N or 'auto' (largest gap)")
    p.add_argument("--workers", type=int, default=1, help="threads for model evaluation")


def _add_common(p):
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--no-timestamp", action="store_true", help="omit the generation timestamp")


# ---------------------------------------------------------------------------
# commands


def cmd_pi(args) -> int:
    if not args.system:
        raise UsageError("--system FILE is required")
    try:
        system = QuantitySystem.load(args.system)
        report = pi_report(system, verify=args.verify)
    except (OSError, json.JSONDecodeError, UnitsError) as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    _write_json(out, "pi.json", report, args)
    stamp = _stamp(args)
    text = pi_report_text(report)
    if stamp:
        text = f"# generated {stamp['generated']}\n" + text
    _write(out, "pi.txt", text)
    print(pi_report_text(report), end="")
    if args.verify and not report["verification"]["passed"]:
        return 1
    return 0


def _consistency(args, spectrum: Spectrum, space: ParameterSpace) -> dict:
    try:
        system = QuantitySystem.load(args.system)
        lr = dg.log_ridge_matrix(system.pi_groups())
    except (OSError, json.JSONDecodeError, UnitsError) as exc:
        raise UsageError(f"cannot read quantity system: {exc}") from exc
    varied = list(space.quantities)
    missing = [q for q in varied if q not in lr.input_names]
    if missing:
        raise UsageError(f"parameters {missing} are not inputs of the quantity system")
    rep = dg.consistency_check(spectrum, lr.restrict(varied), space)
    return {**rep.to_dict(), "system": str(args.system), "varied_quantities": varied,
            "fixed_quantities": [q for q in lr.input_names if q not in varied]}


def cmd_subspace(args) -> int:
    if args.bootstrap is not None and args.seed is None:
        raise UsageError("--bootstrap requires --seed")
    an = _Analysis(args)
    spectrum = an.spectrum
    if args.bootstrap is not None:
        if an.samples is None:
            raise UsageError("--bootstrap needs Monte Carlo (--mc) or file (--samples) gradient samples")
        if args.bootstrap < 1:
            raise UsageError("--bootstrap must be >= 1")
        boot = bootstrap_spectrum(an.samples, args.bootstrap, args.seed, workers=args.workers)
        spectrum = Spectrum(spectrum.eigenvalues, spectrum.eigenvectors, boot)
    out = Path(args.out)
    names = an.space.names
    report = spectrum_report(spectrum, an.subspace, an.estimate, names)
    report["source"] = an.model.name if an.model is not None else str(args.samples)
    sens = dg.eigenvector_sensitivities(spectrum, an.subspace.n, names)
    if args.system:
        report["consistency"] = _consistency(args, spectrum, an.space)
    _write_json(out, "spectrum.json", report, args)
    _write(out, "eigenvalues.csv", eigenvalues_csv(spectrum))
    _write_json(out, "sensitivity.json", sens.to_dict(), args)
    _write(out, "sensitivity.txt", sens.to_text())
    lam = spectrum.eigenvalues
    print(f"eigenvalues: {' '.join(f'{x:.6e}' for x in lam)}")
    print(f"selected n = {an.subspace.n} ({an.subspace.selection})")
    if "consistency" in report:
        c = report["consistency"]
        print(f"consistency: rank(C) = {c['numerical_rank_of_C']} <= {c['log_ridge_rank']}: "
              f"{c['rank_bound_holds']}, containment distance {c['containment_distance']:.3e}")
    return 0


def _summary_points(an: _Analysis, args):
    count = args.count
    if an.samples is not None:
        return an.samples
    if args.seed is not None:
        return an.model
    # deterministic: evenly strided quadrature nodes
    X = an.grid[0]
    idx = np.linspace(0, len(X) - 1, min(count, len(X))).round().astype(int)
    x = X[idx]
    return (x, an.model.value(x), an.space)


def cmd_summary(args) -> int:
    which = {"1": (1,), "2": (2,), "both": (1, 2)}[args.which]
    an = _Analysis(args)
    if 2 in which and an.subspace.n < 2:
        raise UsageError(f"2-D summary requested but the active subspace has n = {an.subspace.n}; "
                         "use --which 1 or --dim 2")
    source = _summary_points(an, args)
    out = Path(args.out)
    label = an.model.name if an.model is not None else Path(args.samples).stem
    if 1 in which:
        s1 = dg.summary_1d(source, an.subspace, args.count, args.seed)
        _write(out, "summary1.csv", s1.to_csv())
        _write(out, "summary1.svg", s1.to_svg(f"{label}: 1-D summary"))
        print(f"summary1: {len(s1.f)} rows, Spearman {dg.spearman(s1):+.4f}")
    if 2 in which:
        s2 = dg.summary_2d(source, an.subspace, args.count, args.seed)
        _write(out, "summary2.csv", s2.to_csv())
        _write(out, "summary2.svg", s2.to_svg(f"{label}: 2-D summary"))
        print(f"summary2: {len(s2.f)} rows")
    return 0


class _Corrupted(ModelFunction):
    """Test hook: perturbs one gradient component."""

    def __init__(self, base: ModelFunction, index: int):
        super().__init__(base.space)
        self.base = base
        self.index = index
        self.name = base.name + f"+corrupt[{index}]"

    def value(self, xi):
        return self.base.value(xi)

    def gradient(self, xi):
        g = np.array(self.base.gradient(xi), dtype=float)
        g[..., self.index] += 1e-3 * (1 + np.abs(g[..., self.index]))
        return g


def cmd_check(args) -> int:
    names = [args.model] if args.model else ["hartmann_u_avg", "hartmann_b_ind"]
    space = _load_space(args)
    seed = 0 if args.seed is None else args.seed
    results = []
    ok = True
    for name in names:
        model = _model(name, space)
        if args.corrupt_gradient is not None:
            if not 0 <= args.corrupt_gradient < model.m:
                raise UsageError(f"--corrupt-gradient must be in [0, {model.m})")
            model = _Corrupted(model, args.corrupt_gradient)
        x = model.space.sample(rng_for(seed, 6), args.points)
        gc = gradient_check(model, x, args.h)
        q = args.quadrature or 11
        est, grid = estimate_c_quadrature(model, points_per_dim=q, return_gradients=True)
        spec = eigendecompose(est)
        n = spec.numerical_rank() if args.dim == "auto" else int(args.dim)
        n = min(max(n, 1), model.m)
        act = activity_identity_check(model, None, spec, n, q, gradients=grid)
        g_ok = gc.passed(args.tol)
        a_ok = act.passed(args.identity_tol)
        ok &= g_ok and a_ok
        results.append({
            "model": model.name,
            "gradient_check": {
                "points": gc.points, "seed": seed, "h": gc.h, "tolerance": args.tol,
                "max_rel_error": gc.max_rel_error, "worst_point": gc.worst_point,
                "worst_component": gc.worst_component,
                "worst_parameter": model.space.names[gc.worst_component], "passed": g_ok,
            },
            "activity_identity": {
                "n": n, "quadrature": q, "tolerance": args.identity_tol,
                "active_residual": act.active_residual, "inactive_residual": act.inactive_residual,
                "passed": a_ok,
            },
        })
        status = "pass" if g_ok and a_ok else "FAIL"
        print(f"{model.name}: gradient max rel err {gc.max_rel_error:.3e} "
              f"(component {gc.worst_component}, {model.space.names[gc.worst_component]}), "
              f"identity residuals {act.active_residual:.2e}/{act.inactive_residual:.2e} -> {status}")
    _write_json(Path(args.out), "check.json", {"models": results, "passed": bool(ok)}, args)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="piactive", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pi", help="Buckingham Pi groups from a quantity-system file")
    p.add_argument("--system", help="quantity-system JSON file")
    p.add_argument("--verify", action="store_true", help="include the exact verification audit")
    _add_common(p)
    p.set_defaults(func=cmd_pi)

    p = sub.add_parser("subspace", help="estimate C, its spectrum and the active subspace")
    _add_source_flags(p)
    p.add_argument("--system", help="quantity-system JSON for the dimensional-analysis consistency check")
    p.add_argument("--bootstrap", type=int, metavar="R", help="bootstrap replicates (needs --seed)")
    _add_common(p)
    p.set_defaults(func=cmd_subspace)

    p = sub.add_parser("summary", help="1-D / 2-D summary plot data and SVGs")
    _add_source_flags(p)
    p.add_argument("--count", type=int, default=1000, help="rows per summary (default 1000)")
    p.add_argument("--which", choices=("1", "2", "both"), default="both")
    _add_common(p)
    p.set_defaults(func=cmd_summary)

    p = sub.add_parser("check", help="finite-difference gradient and activity-identity audits")
    p.add_argument("--model", help="model to audit (default: both Hartmann models)")
    p.add_argument("--space", help="parameter-space JSON file")
    p.add_argument("--seed", type=int, help="seed for audit points (default 0)")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--h", type=float, default=1e-6, help="finite-difference step")
    p.add_argument("--tol", type=float, default=1e-6, help="max relative gradient error")
    p.add_argument("--identity-tol", type=float, default=1e-10)
    p.add_argument("--quadrature", type=int, metavar="N")
    p.add_argument("--dim", default="auto")
    p.add_argument("--corrupt-gradient", type=int, metavar="INDEX", help=argparse.SUPPRESS)
    _add_common(p)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - the exit-code contract needs a catch-all
        log.debug("internal failure", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
